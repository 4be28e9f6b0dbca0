//! SOAP Account: a signed header recording the message structure
//! (child counts, parent and sibling names of each signed element), with
//! accounts of successive nodes chained through their signature values.
//!
//! The validator is deliberately faithful to the scheme, including its gap:
//! presence is checked document-wide while field comparison only covers
//! accounts in header blocks the receiving role actually processes. An
//! account moved into a `role="none"` block is never compared.
//!
//! No successor field is stored; children of a signed element are already
//! covered by its digest.

use std::collections::{BTreeMap, BTreeSet};

use crate::dsig::{self, ensure_security, sign_chained, SignatureBlock, WSU_ID};
use crate::error::{Error, Result};
use crate::keystore::KeyStore;
use crate::report::{ValidatorMode, VerificationReport};
use crate::soap::{self, as_envelope, in_processing_view, SoapEnvelope, ROLE_ULTIMATE_RECEIVER};
use crate::xml::{fresh_id, id_of, reference_id, resolve_reference, Element, NodePath};

pub const ACCOUNT_ELEMENT: &str = "SoapAccount";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoapAccount {
    pub no_child_of_envelope: usize,
    pub no_child_of_header: usize,
    /// Total number of references in the signature covering the account.
    pub no_signed_objects: usize,
    pub parent_of: BTreeMap<String, String>,
    pub sibling_of: BTreeMap<String, Vec<String>>,
    pub extensions: Vec<(String, String)>,
}

/// One node's account in a chain of successive signers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountChainLink {
    pub account: SoapAccount,
    pub node_id: String,
    pub previous_signature_value: Option<[u8; 32]>,
}

/// Receiver-side settings for [`verify_account_with`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountPolicy {
    pub node_role: String,
    /// Compare sibling lists and the exact Header child count. When false,
    /// siblings are ignored and the Header may have grown.
    pub strict_siblings: bool,
}

impl Default for AccountPolicy {
    fn default() -> Self {
        AccountPolicy {
            node_role: ROLE_ULTIMATE_RECEIVER.to_string(),
            strict_siblings: true,
        }
    }
}

/// Structure of `env` as seen from the given signed ids.
pub fn compute_account(env: &SoapEnvelope, signed_ref_ids: &[String]) -> Result<SoapAccount> {
    let root = env.root();
    let mut account = SoapAccount {
        no_child_of_envelope: root.element_count(),
        no_child_of_header: env.header().map_or(0, Element::element_count),
        no_signed_objects: signed_ref_ids.len(),
        ..Default::default()
    };
    for raw in signed_ref_ids {
        let id = reference_id(raw).to_string();
        let path = resolve_reference(root, &id)?;
        let (parent_path, parent_name) = crate::xml::parent_of(root, &path)?;
        let own = path.indices().last().copied();
        let parent = root.element_at(&parent_path).expect("parent resolved");
        let siblings = parent
            .children
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != own)
            .filter_map(|(_, c)| c.as_element().map(|e| e.name.clone()))
            .collect();
        account.parent_of.insert(id.clone(), parent_name);
        account.sibling_of.insert(id, siblings);
    }
    Ok(account)
}

fn is_numeric(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit())
}

/// Serializes an account in the header layout used on the wire.
pub fn account_element(account: &SoapAccount, id: &str, node_id: &str) -> Element {
    let mut el = Element::new(ACCOUNT_ELEMENT)
        .with_attr(WSU_ID, id)
        .with_attr("nodeId", node_id)
        .with_child(Element::new("NoOfChildOfEnvelope").with_text(account.no_child_of_envelope.to_string()))
        .with_child(Element::new("NoOfChildOfHeader").with_text(account.no_child_of_header.to_string()))
        .with_child(Element::new("NoOfSignedObject").with_text(account.no_signed_objects.to_string()));
    for (ref_id, parent) in &account.parent_of {
        el = el.with_child(keyed("ParentOf", ref_id).with_text(parent.as_str()));
    }
    for (ref_id, siblings) in &account.sibling_of {
        el = el.with_child(keyed("SiblingOf", ref_id).with_text(siblings.join(",")));
    }
    for (name, value) in &account.extensions {
        el = el.with_child(
            Element::new("Extension")
                .with_attr("name", name.as_str())
                .with_text(value.as_str()),
        );
    }
    el
}

/// `ParentOfId1` for numeric ids, `<ParentOf refId="x">` otherwise.
fn keyed(base: &str, ref_id: &str) -> Element {
    if is_numeric(ref_id) {
        Element::new(format!("{base}Id{ref_id}"))
    } else {
        Element::new(base).with_attr("refId", ref_id)
    }
}

fn field_key(el: &Element, base: &str) -> Option<String> {
    let local = el.local_name();
    if local == base {
        return el.attr("refId").map(str::to_string);
    }
    local
        .strip_prefix(base)
        .and_then(|rest| rest.strip_prefix("Id"))
        .filter(|id| is_numeric(id))
        .map(str::to_string)
}

pub fn parse_account(el: &Element) -> Result<SoapAccount> {
    let count = |name: &str| -> Result<usize> {
        el.child(name)
            .ok_or_else(|| Error::MalformedAccount(format!("missing {name}")))?
            .text_content()
            .trim()
            .parse()
            .map_err(|_| Error::MalformedAccount(format!("{name} is not a count")))
    };
    let mut account = SoapAccount {
        no_child_of_envelope: count("NoOfChildOfEnvelope")?,
        no_child_of_header: count("NoOfChildOfHeader")?,
        no_signed_objects: count("NoOfSignedObject")?,
        ..Default::default()
    };
    for child in el.child_elements() {
        if let Some(id) = field_key(child, "ParentOf") {
            account.parent_of.insert(id, child.text_content().trim().to_string());
        } else if let Some(id) = field_key(child, "SiblingOf") {
            let names = child
                .text_content()
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            account.sibling_of.insert(id, names);
        } else if child.local_name() == "Extension" {
            account
                .extensions
                .push((child.attr("name").unwrap_or_default().to_string(), child.text_content()));
        }
    }
    if account.parent_of.keys().ne(account.sibling_of.keys()) {
        return Err(Error::MalformedAccount(
            "ParentOf and SiblingOf cover different ids".into(),
        ));
    }
    Ok(account)
}

/// Inserts this node's SoapAccount before the Security header and signs the
/// given ids plus the account. `previous_signature` chains the HMAC to the
/// preceding node's signature value.
pub fn attach_account(
    env: SoapEnvelope,
    signed_ref_ids: &[String],
    node_id: &str,
    key_id: &str,
    ks: &KeyStore,
    previous_signature: Option<&[u8; 32]>,
) -> Result<SoapEnvelope> {
    for id in signed_ref_ids {
        resolve_reference(env.root(), id)?;
    }
    ks.get(key_id)?;

    let mut root = env.into_root();
    let security = ensure_security(&mut root);
    let account_id = fresh_id(&root);
    let (header, security_idx) = security.split_last().expect("security is under Header");
    let account_path = header.child(security_idx);
    root.insert(
        &header,
        security_idx,
        Element::new(ACCOUNT_ELEMENT)
            .with_attr(WSU_ID, account_id.as_str())
            .into(),
    )?;

    let mut refs: Vec<String> = signed_ref_ids.iter().map(|r| reference_id(r).to_string()).collect();
    refs.push(account_id.clone());
    let env = as_envelope(root)?;
    let account = compute_account(&env, &refs)?;
    let env = env.edit(|root| {
        *root.element_at_mut(&account_path).expect("account inserted") =
            account_element(&account, &account_id, node_id);
        Ok(())
    })?;
    sign_chained(env, &refs, key_id, ks, previous_signature)
}

/// A signature that covers at least one SoapAccount, in document order.
#[derive(Debug, Clone)]
struct Link {
    signature: SignatureBlock,
    account_ids: Vec<String>,
}

fn account_elements(env: &SoapEnvelope) -> Vec<(NodePath, &Element)> {
    env.root()
        .elements()
        .into_iter()
        .filter(|(_, e)| e.local_name() == ACCOUNT_ELEMENT)
        .collect()
}

fn links(env: &SoapEnvelope) -> Vec<Link> {
    let ids: Vec<String> = account_elements(env)
        .iter()
        .filter_map(|(_, e)| id_of(e).map(str::to_string))
        .collect();
    // an account belongs to the first signature covering it; later
    // signatures that merely re-sign it (a Guard, say) are not links
    let mut claimed = BTreeSet::new();
    dsig::signatures(env)
        .into_iter()
        .flatten()
        .filter_map(|signature| {
            let account_ids: Vec<String> = ids
                .iter()
                .filter(|id| signature.references_id(id) && claimed.insert(id.to_string()))
                .cloned()
                .collect();
            (!account_ids.is_empty()).then_some(Link { signature, account_ids })
        })
        .collect()
}

/// The chain as it appears in the message, one entry per account-signing node.
pub fn account_chain(env: &SoapEnvelope) -> Vec<AccountChainLink> {
    let accounts = account_elements(env);
    links(env)
        .into_iter()
        .flat_map(|link| {
            let chained_to = link.signature.chained_to;
            link.account_ids
                .into_iter()
                .filter_map(|id| {
                    accounts
                        .iter()
                        .find(|(_, e)| id_of(e) == Some(id.as_str()))
                        .and_then(|(_, e)| {
                            Some(AccountChainLink {
                                account: parse_account(e).ok()?,
                                node_id: e.attr("nodeId").unwrap_or_default().to_string(),
                                previous_signature_value: chained_to,
                            })
                        })
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Signature value of the most recent account-signing node, for chaining.
pub fn last_account_signature(env: &SoapEnvelope) -> Option<[u8; 32]> {
    links(env).last().map(|l| l.signature.signature_value)
}

/// The message as it left the signer of `links[upto]`: later links' accounts,
/// signatures and security tokens removed.
fn state_at(env: &SoapEnvelope, links: &[Link], upto: usize) -> Result<SoapEnvelope> {
    let root = env.root();
    let mut doomed: Vec<NodePath> = Vec::new();
    for later in &links[upto + 1..] {
        doomed.push(later.signature.path.clone());
        for id in &later.account_ids {
            if let Ok(p) = resolve_reference(root, id) {
                doomed.push(p);
            }
        }
        let token = root
            .element_at(&later.signature.path)
            .and_then(|s| s.child("KeyInfo"))
            .and_then(|k| k.child("SecurityTokenReference"))
            .and_then(|r| r.attr("URI"));
        if let Some(p) = token.and_then(|uri| resolve_reference(root, uri).ok()) {
            doomed.push(p);
        }
    }
    doomed.sort();
    doomed.dedup();
    let mut state = root.clone();
    for p in doomed.iter().rev() {
        state.remove(p)?;
    }
    as_envelope(state)
}

pub fn verify_account(env: &SoapEnvelope, ks: &KeyStore, node_role: &str) -> VerificationReport {
    verify_account_with(
        env,
        ks,
        &AccountPolicy {
            node_role: node_role.to_string(),
            ..Default::default()
        },
    )
}

/// Presence anywhere, naive signature checks, then field comparison for
/// accounts inside the processing view of `policy.node_role`.
pub fn verify_account_with(env: &SoapEnvelope, ks: &KeyStore, policy: &AccountPolicy) -> VerificationReport {
    let mut report = VerificationReport::new(ValidatorMode::Account);
    let accounts = account_elements(env);
    report.record(
        "account.present",
        !accounts.is_empty(),
        format!("{} SoapAccount element(s) in the message", accounts.len()),
    );

    if dsig::record_signature_checks(env, ks, &mut report) == 0 {
        report.record("dsig.present", false, "no Signature under a Security header");
    }

    let links = links(env);
    let mut chain_ok = true;
    let mut chain_detail = format!("{} account signature(s)", links.len());
    for (i, pair) in links.windows(2).enumerate() {
        if pair[1].signature.chained_to != Some(pair[0].signature.signature_value) {
            chain_ok = false;
            chain_detail = format!("link {} is not chained to link {i}", i + 1);
        }
    }
    report.record("account.chain", chain_ok, chain_detail);

    let mut compared = 0;
    for (path, el) in &accounts {
        if !in_processing_view(env, &policy.node_role, path) {
            continue;
        }
        compared += 1;
        let label = format!("account at {path}");
        let Some(link_idx) = id_of(el).and_then(|id| links.iter().position(|l| l.account_ids.iter().any(|a| a == id)))
        else {
            report.record(
                "account.signed",
                false,
                format!("{label} is not covered by any signature"),
            );
            continue;
        };
        report.record(
            "account.signed",
            true,
            format!("{label} covered by signature {link_idx}"),
        );
        let recorded = match parse_account(el) {
            Ok(a) => a,
            Err(e) => {
                report.record("account.parse", false, format!("{label}: {e}"));
                continue;
            }
        };
        let refs: Vec<String> = recorded.parent_of.keys().cloned().collect();
        let current = state_at(env, &links, link_idx).and_then(|s| compute_account(&s, &refs));
        let mut current = match current {
            Ok(c) => c,
            Err(e) => {
                report.record("account.parent", false, format!("{label}: {e}"));
                continue;
            }
        };
        current.no_signed_objects = links[link_idx].signature.references.len();
        compare(&mut report, &label, &recorded, &current, policy.strict_siblings);
    }
    if compared == 0 {
        report.record(
            "account.compare",
            true,
            format!(
                "no SoapAccount in the processing view of role {}; nothing compared",
                policy.node_role
            ),
        );
    }
    report
}

fn compare(report: &mut VerificationReport, label: &str, recorded: &SoapAccount, current: &SoapAccount, strict: bool) {
    let count = |name: &str, rec: usize, cur: usize| format!("{label}: {name} recorded {rec}, found {cur}");
    report.record(
        "account.envelope_children",
        recorded.no_child_of_envelope == current.no_child_of_envelope,
        count(
            "NoOfChildOfEnvelope",
            recorded.no_child_of_envelope,
            current.no_child_of_envelope,
        ),
    );
    let header_ok = if strict {
        recorded.no_child_of_header == current.no_child_of_header
    } else {
        recorded.no_child_of_header <= current.no_child_of_header
    };
    report.record(
        "account.header_children",
        header_ok,
        count(
            "NoOfChildOfHeader",
            recorded.no_child_of_header,
            current.no_child_of_header,
        ),
    );
    report.record(
        "account.signed_objects",
        recorded.no_signed_objects == current.no_signed_objects,
        count(
            "NoOfSignedObject",
            recorded.no_signed_objects,
            current.no_signed_objects,
        ),
    );
    for (id, parent) in &recorded.parent_of {
        let found = current.parent_of.get(id).map(String::as_str).unwrap_or("?");
        report.record(
            "account.parent",
            parent == found,
            format!("{label}: ParentOf {id} recorded {parent}, found {found}"),
        );
    }
    if strict {
        for (id, siblings) in &recorded.sibling_of {
            let found = current.sibling_of.get(id).cloned().unwrap_or_default();
            report.record(
                "account.siblings",
                *siblings == found,
                format!(
                    "{label}: SiblingOf {id} recorded [{}], found [{}]",
                    siblings.join(","),
                    found.join(",")
                ),
            );
        }
    }
}

/// Verifies `env` before and after a legitimate intermediary inserts a
/// header block named `benign_header_name`.
pub fn sibling_fragility_demo(
    env: &SoapEnvelope,
    benign_header_name: &str,
    ks: &KeyStore,
    policy: &AccountPolicy,
) -> Result<(VerificationReport, VerificationReport)> {
    let before = verify_account_with(env, ks, policy);
    let changed = soap::insert_header_block(env.clone(), benign_header_name, soap::ROLE_NEXT)?;
    let after = verify_account_with(&changed, ks, policy);
    Ok((before, after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsig::{set_text, verify_naive};
    use crate::xml::parse;

    fn ks() -> KeyStore {
        KeyStore::from_json(include_str!("../fixtures/keystore.json")).unwrap()
    }

    fn env(bytes: &[u8]) -> SoapEnvelope {
        as_envelope(parse(bytes).unwrap()).unwrap()
    }

    fn loan_request() -> SoapEnvelope {
        env(include_bytes!("../fixtures/loan_request.xml"))
    }

    fn refs(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn protected() -> SoapEnvelope {
        attach_account(loan_request(), &refs(&["1"]), "client", "k-bank", &ks(), None).unwrap()
    }

    #[test]
    fn computes_loan_account_account() {
        let a = compute_account(&env(include_bytes!("../fixtures/loan_account.xml")), &refs(&["1", "2"])).unwrap();
        assert_eq!(a.no_child_of_envelope, 2);
        assert_eq!(a.no_child_of_header, 6);
        assert_eq!(a.no_signed_objects, 2);
        assert_eq!(a.parent_of["1"], "Envelope");
        assert_eq!(a.parent_of["2"], "Header");
        assert_eq!(a.sibling_of["1"], ["Header"]);
        assert_eq!(a.sibling_of["2"], ["To", "ReplyTo", "MessageID", "Action", "Security"]);
    }

    #[test]
    fn loan_account_fixture_fields_parse_to_computed_account() {
        let e = env(include_bytes!("../fixtures/loan_account.xml"));
        let el = e
            .root()
            .elements()
            .into_iter()
            .find(|(_, e)| e.name == "SoapAccount")
            .unwrap()
            .1;
        let parsed = parse_account(el).unwrap();
        assert_eq!(parsed, compute_account(&e, &refs(&["1", "2"])).unwrap());
    }

    #[test]
    fn body_only_account() {
        let a = compute_account(&env(br#"<Envelope><Body Id="1"/></Envelope>"#), &refs(&["1"])).unwrap();
        assert_eq!(a.no_child_of_envelope, 1);
        assert_eq!(a.no_child_of_header, 0);
        assert_eq!(a.no_signed_objects, 1);
        assert_eq!(a.parent_of["1"], "Envelope");
        assert!(a.sibling_of["1"].is_empty());
        assert_eq!(
            compute_account(&loan_request(), &refs(&["9"])),
            Err(Error::ReferenceNotFound("9".into()))
        );
    }

    #[test]
    fn non_numeric_ids_use_ref_attribute() {
        let mut a = SoapAccount::default();
        a.parent_of.insert("body-a".into(), "Envelope".into());
        a.sibling_of.insert("body-a".into(), vec!["Header".into()]);
        a.extensions.push(("note".into(), "x".into()));
        let el = account_element(&a, "acc", "n1");
        assert!(el.child("ParentOf").is_some());
        assert_eq!(parse_account(&el).unwrap(), a);
    }

    #[test]
    fn attach_produces_loan_account_shape() {
        let m = protected();
        let header_names: Vec<&str> = m.header().unwrap().child_elements().map(|e| e.name.as_str()).collect();
        assert_eq!(
            header_names,
            ["To", "ReplyTo", "MessageID", "Action", "SoapAccount", "Security"]
        );
        let acct_path = resolve_reference(m.root(), "2").unwrap();
        let acct = parse_account(m.root().element_at(&acct_path).unwrap()).unwrap();
        let loan_account = env(include_bytes!("../fixtures/loan_account.xml"));
        assert_eq!(acct, compute_account(&loan_account, &refs(&["1", "2"])).unwrap());
        let sig = dsig::signatures(&m).remove(0).unwrap();
        assert_eq!(sig.referenced_ids().collect::<Vec<_>>(), ["1", "2"]);
        // token id follows the account id, as in the fixture
        assert!(m
            .root()
            .elements()
            .iter()
            .any(|(_, e)| e.name == "BinarySecurityToken" && e.attr(WSU_ID) == Some("3")));
    }

    #[test]
    fn round_trip_accepts() {
        let report = verify_account(&protected(), &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(report.accepted(), "{}", report.to_text());
    }

    #[test]
    fn missing_account_rejects() {
        let signed = dsig::sign(loan_request(), &refs(&["1"]), "k-bank", &ks()).unwrap();
        let report = verify_account(&signed, &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(report.failed_check("account.present"));
    }

    #[test]
    fn unknown_key() {
        assert_eq!(
            attach_account(loan_request(), &refs(&["1"]), "c", "k-none", &ks(), None).unwrap_err(),
            Error::UnknownKey("k-none".into())
        );
    }

    #[test]
    fn body_wrap_is_detected() {
        let wrapped = protected()
            .edit(|root| {
                let body = root.remove(&NodePath::new(vec![1]))?;
                let wrapper = Element::new("Bogus").with_child(body);
                root.insert(&NodePath::new(vec![0]), 0, wrapper.into())?;
                root.children.push(Element::new("Body").with_text("evil").into());
                Ok(())
            })
            .unwrap();
        assert!(verify_naive(&wrapped, &ks()).unwrap().accepted());
        let report = verify_account(&wrapped, &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(report.failed_check("account.parent"), "{}", report.to_text());
    }

    #[test]
    fn chained_accounts() {
        let first = protected();
        let prev = last_account_signature(&first).unwrap();
        let second = attach_account(first, &refs(&["1"]), "relay", "k-relay", &ks(), Some(&prev)).unwrap();
        let chain = account_chain(&second);
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].node_id, "client");
        assert_eq!(chain[0].previous_signature_value, None);
        assert_eq!(chain[1].node_id, "relay");
        assert_eq!(chain[1].previous_signature_value, Some(prev));
        assert_eq!(account_elements(&second).len(), 2);
        let report = verify_account(&second, &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(report.accepted(), "{}", report.to_text());

        let altered = second
            .edit(|r| {
                assert!(set_text(r, "ChainedTo", &hex::encode([1u8; 32])));
                Ok(())
            })
            .unwrap();
        assert!(!verify_account(&altered, &ks(), ROLE_ULTIMATE_RECEIVER).accepted());
    }

    #[test]
    fn unchained_second_link_rejects() {
        let first = protected();
        let second = attach_account(first, &refs(&["1"]), "relay", "k-relay", &ks(), None).unwrap();
        let report = verify_account(&second, &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(report.failed_check("account.chain"));
    }

    #[test]
    fn sibling_fragility() {
        let m = protected();
        let (before, after) = sibling_fragility_demo(&m, "Via", &ks(), &AccountPolicy::default()).unwrap();
        assert!(before.accepted());
        assert!(!after.accepted());
        assert!(after.failed_check("account.siblings"));

        let lenient = AccountPolicy {
            strict_siblings: false,
            ..Default::default()
        };
        let (before, after) = sibling_fragility_demo(&m, "Via", &ks(), &lenient).unwrap();
        assert!(before.accepted());
        assert!(after.accepted(), "{}", after.to_text());
    }

    #[test]
    fn no_insertion_both_accept() {
        let m = protected();
        let before = verify_account(&m, &ks(), ROLE_ULTIMATE_RECEIVER);
        let again = verify_account(&m.clone(), &ks(), ROLE_ULTIMATE_RECEIVER);
        assert!(before.accepted() && again.accepted());
    }
}
