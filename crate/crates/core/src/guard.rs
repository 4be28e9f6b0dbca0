//! Hardened validator. Each signed element gets a guard record pinning
//! where it sat at signing time: its depth, its parent's name, and its
//! parent's unique identifier. The guard header also carries a MessageID
//! and Timestamp and is itself signed, so freshness and replay are covered.
//!
//! A wrapper that imitates the parent's name still lacks the parent's id;
//! copying the id onto the wrapper duplicates it, and duplicate ids are
//! rejected before any reference is resolved.

use std::collections::BTreeSet;

use crate::dsig::{self, ensure_security, sign, WSU_ID};
use crate::error::{Error, Result};
use crate::keystore::KeyStore;
use crate::replay::{ReplayStatus, ReplayStore};
use crate::report::{ValidatorMode, VerificationReport};
use crate::soap::{as_envelope, header_blocks, SoapEnvelope, ROLE_ULTIMATE_RECEIVER};
use crate::time::UnixTime;
use crate::xml::{
    build_wsu_id_index, depth_of, fresh_id, id_of, parent_of, reference_id, resolve_reference, Element, NodePath,
};

pub const GUARD_ELEMENT: &str = "Guard";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardRecord {
    pub ref_id: String,
    pub depth: usize,
    pub parent_name: String,
    pub parent_wsu_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardHeader {
    pub records: Vec<GuardRecord>,
    pub message_id: String,
    pub timestamp: UnixTime,
}

/// Depth, parent name and parent id of each referenced element.
pub fn compute_guards(env: &SoapEnvelope, ref_ids: &[String]) -> Result<Vec<GuardRecord>> {
    let root = env.root();
    let mut seen = BTreeSet::new();
    ref_ids
        .iter()
        .map(|raw| {
            let id = reference_id(raw).to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::AmbiguousReference(id));
            }
            let path = resolve_reference(root, &id)?;
            let (parent_path, parent_name) = parent_of(root, &path)?;
            let parent = root.element_at(&parent_path).expect("parent resolved");
            let parent_wsu_id = id_of(parent)
                .ok_or_else(|| Error::MissingParentId(id.clone()))?
                .to_string();
            Ok(GuardRecord {
                ref_id: id,
                depth: depth_of(root, &path)?,
                parent_name,
                parent_wsu_id,
            })
        })
        .collect()
}

pub fn guard_element(guard: &GuardHeader, id: &str) -> Element {
    let mut el = Element::new(GUARD_ELEMENT)
        .with_attr(WSU_ID, id)
        .with_child(Element::new("MessageID").with_text(guard.message_id.as_str()))
        .with_child(Element::new("Timestamp").with_text(guard.timestamp.to_iso()));
    for r in &guard.records {
        el = el.with_child(
            Element::new("GuardRef")
                .with_attr("refId", r.ref_id.as_str())
                .with_attr("depth", r.depth.to_string())
                .with_attr("parentName", r.parent_name.as_str())
                .with_attr("parentId", r.parent_wsu_id.as_str()),
        );
    }
    el
}

pub fn parse_guard(el: &Element) -> Result<GuardHeader> {
    let bad = |what: &str| Error::MalformedSignature(format!("Guard: {what}"));
    let message_id = el
        .child("MessageID")
        .map(|m| m.text_content().trim().to_string())
        .filter(|m| !m.is_empty())
        .ok_or_else(|| bad("missing MessageID"))?;
    let timestamp = UnixTime::parse_iso(
        &el.child("Timestamp")
            .ok_or_else(|| bad("missing Timestamp"))?
            .text_content(),
    )?;
    let records = el
        .child_elements()
        .filter(|c| c.local_name() == "GuardRef")
        .map(|r| {
            let attr = |n: &str| {
                r.attr(n)
                    .map(str::to_string)
                    .ok_or_else(|| bad(&format!("GuardRef without {n}")))
            };
            Ok(GuardRecord {
                ref_id: attr("refId")?,
                depth: attr("depth")?.parse().map_err(|_| bad("depth is not a number"))?,
                parent_name: attr("parentName")?,
                parent_wsu_id: attr("parentId")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GuardHeader {
        records,
        message_id,
        timestamp,
    })
}

/// Gives each referenced element's parent an id if it lacks one, inserts a
/// Guard header before Security, and signs the references plus the guard.
pub fn attach_guards(
    env: SoapEnvelope,
    ref_ids: &[String],
    key_id: &str,
    ks: &KeyStore,
    message_id: &str,
    timestamp: UnixTime,
) -> Result<SoapEnvelope> {
    if env
        .root()
        .elements()
        .iter()
        .any(|(_, e)| e.local_name() == GUARD_ELEMENT)
    {
        return Err(Error::AlreadyGuarded);
    }
    if message_id.trim().is_empty() {
        return Err(Error::InvalidHeaderName("MessageID must not be empty".into()));
    }
    let ids: Vec<String> = ref_ids.iter().map(|r| reference_id(r).to_string()).collect();
    for id in &ids {
        resolve_reference(env.root(), id)?;
    }
    ks.get(key_id)?;

    let mut root = env.into_root();
    for id in &ids {
        let path = resolve_reference(&root, id)?;
        let (parent_path, _) = parent_of(&root, &path)?;
        if id_of(root.element_at(&parent_path).expect("parent resolved")).is_none() {
            let fresh = fresh_id(&root);
            root.element_at_mut(&parent_path)
                .expect("parent resolved")
                .set_attr(WSU_ID, fresh);
        }
    }

    let security = ensure_security(&mut root);
    let guard_id = fresh_id(&root);
    let (header, idx) = security.split_last().expect("security is under Header");
    let guard_path = header.child(idx);
    root.insert(
        &header,
        idx,
        Element::new(GUARD_ELEMENT).with_attr(WSU_ID, guard_id.as_str()).into(),
    )?;

    let env = as_envelope(root)?;
    let guard = GuardHeader {
        records: compute_guards(&env, &ids)?,
        message_id: message_id.to_string(),
        timestamp,
    };
    let env = env.edit(|root| {
        *root.element_at_mut(&guard_path).expect("guard inserted") = guard_element(&guard, &guard_id);
        Ok(())
    })?;
    let mut signed = ids;
    signed.push(guard_id);
    sign(env, &signed, key_id, ks)
}

/// Atomic check-and-insert of a MessageID.
pub fn replay_seen(rs: &ReplayStore, message_id: &str, now: UnixTime) -> ReplayStatus {
    rs.replay_seen(message_id, now)
}

/// Locates the single Guard header block a receiver may trust.
fn locate_guard<'a>(env: &'a SoapEnvelope, report: &mut VerificationReport) -> Option<(NodePath, &'a Element)> {
    let guards: Vec<(NodePath, &Element)> = env
        .root()
        .elements()
        .into_iter()
        .filter(|(_, e)| e.local_name() == GUARD_ELEMENT)
        .collect();
    if guards.len() != 1 {
        report.record(
            "guard.present",
            false,
            format!("expected exactly one Guard element, found {}", guards.len()),
        );
        return None;
    }
    let (path, el) = guards.into_iter().next().expect("one guard");
    let block = header_blocks(env).into_iter().find(|b| b.path == path);
    match block {
        Some(b) if b.targets(ROLE_ULTIMATE_RECEIVER) => {
            report.record("guard.present", true, format!("Guard header at {path}"));
            Some((path, el))
        }
        Some(b) => {
            report.record(
                "guard.present",
                false,
                format!(
                    "Guard at {path} targets role {:?}, not processed by the receiver",
                    b.role
                ),
            );
            None
        }
        None => {
            report.record(
                "guard.present",
                false,
                format!("Guard at {path} is not a direct Header block"),
            );
            None
        }
    }
}

/// Runs every hardened check and records each one; accept iff all pass.
///
/// Order: identifier uniqueness, two-step signature checks, guard presence
/// and coverage, per-record depth/parent/parent-id, timestamp freshness,
/// and finally the replay store. The store only records a MessageID when
/// every earlier check passed.
pub fn verify_hardened(env: &SoapEnvelope, ks: &KeyStore, rs: &ReplayStore, now: UnixTime) -> VerificationReport {
    let mut report = VerificationReport::new(ValidatorMode::Hardened);
    let root = env.root();

    let index = build_wsu_id_index(root);
    let dup_detail = if index.duplicates.is_empty() {
        format!("{} identifiers, all distinct", index.entries.len())
    } else {
        index
            .duplicates
            .iter()
            .map(|(id, paths)| format!("id {id:?} appears {} times", paths.len()))
            .collect::<Vec<_>>()
            .join("; ")
    };
    report.record("id.unique", index.duplicates.is_empty(), dup_detail);

    if dsig::record_signature_checks(env, ks, &mut report) == 0 {
        report.record("dsig.present", false, "no Signature under a Security header");
    }

    let Some((guard_path, guard_el)) = locate_guard(env, &mut report) else {
        return report;
    };
    let guard = match parse_guard(guard_el) {
        Ok(g) => g,
        Err(e) => {
            report.record("guard.parse", false, e.to_string());
            return report;
        }
    };

    let guard_id = id_of(guard_el).unwrap_or_default().to_string();
    let covering = dsig::signatures(env)
        .into_iter()
        .flatten()
        .find(|s| !guard_id.is_empty() && s.references_id(&guard_id));
    match covering {
        Some(sig) => {
            report.record(
                "guard.signed",
                true,
                format!("Guard {guard_id} at {guard_path} is signed"),
            );
            let recorded: BTreeSet<&str> = guard.records.iter().map(|r| r.ref_id.as_str()).collect();
            let uncovered: Vec<&str> = sig
                .referenced_ids()
                .filter(|id| *id != guard_id && !recorded.contains(id))
                .collect();
            report.record(
                "guard.coverage",
                uncovered.is_empty(),
                if uncovered.is_empty() {
                    format!("{} signed reference(s) guarded", recorded.len())
                } else {
                    format!("signed without a guard record: {}", uncovered.join(", "))
                },
            );
        }
        None => report.record(
            "guard.signed",
            false,
            format!("Guard at {guard_path} is not covered by any signature"),
        ),
    }

    for rec in &guard.records {
        check_record(root, rec, &mut report);
    }

    let skew = now.abs_diff(guard.timestamp);
    report.record(
        "freshness",
        skew <= rs.window_seconds(),
        format!(
            "timestamp {} is {skew}s from now {}, window {}s",
            guard.timestamp,
            now,
            rs.window_seconds()
        ),
    );

    let others_pass = report.checks.iter().all(|c| c.pass);
    let status = if others_pass {
        rs.replay_seen(&guard.message_id, now)
    } else {
        rs.peek(&guard.message_id, now)
    };
    let detail = match (status, others_pass) {
        (ReplayStatus::Fresh, true) => format!("{} first delivery, recorded", guard.message_id),
        (ReplayStatus::Fresh, false) => format!(
            "{} not seen; not recorded since the message is rejected",
            guard.message_id
        ),
        (ReplayStatus::Replayed, _) => format!("{} already delivered within the window", guard.message_id),
    };
    report.record("replay", status == ReplayStatus::Fresh, detail);
    report
}

fn check_record(root: &Element, rec: &GuardRecord, report: &mut VerificationReport) {
    let path = match resolve_reference(root, &rec.ref_id) {
        Ok(p) => p,
        Err(e) => {
            report.record("guard.depth", false, format!("ref {}: {e}", rec.ref_id));
            return;
        }
    };
    let depth = path.len();
    report.record(
        "guard.depth",
        depth == rec.depth,
        format!("ref {}: recorded depth {}, found {depth}", rec.ref_id, rec.depth),
    );
    let Ok((parent_path, parent_name)) = parent_of(root, &path) else {
        report.record(
            "guard.parent",
            false,
            format!("ref {}: element is the root", rec.ref_id),
        );
        return;
    };
    report.record(
        "guard.parent",
        parent_name == rec.parent_name,
        format!(
            "ref {}: recorded parent {}, found {parent_name}",
            rec.ref_id, rec.parent_name
        ),
    );
    let parent_id = root.element_at(&parent_path).and_then(id_of).unwrap_or("");
    report.record(
        "guard.parent_id",
        parent_id == rec.parent_wsu_id,
        format!(
            "ref {}: recorded parent id {:?}, found {parent_id:?}",
            rec.ref_id, rec.parent_wsu_id
        ),
    );
}
