//! XML Digital Signature subset: per-reference SHA-256 digests under an
//! HMAC-SHA256 signed `SignedInfo`.
//!
//! Verification is the classic two steps: reference validation, then
//! signature validation. References are resolved by id wherever the element
//! sits in the tree, so a relocated element still validates. That property is
//! the weakness the attack generators exploit.

use std::collections::BTreeSet;

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::keystore::KeyStore;
use crate::report::{ValidatorMode, VerificationReport};
use crate::soap::SoapEnvelope;
use crate::xml::{
    self, fresh_id, reference_id, resolve_reference, serialize_canonical, Element, NodePath, C14N_METHOD,
};

pub const DIGEST_SHA256: &str = "urn:soapguard:sha256";
pub const SIGNATURE_HMAC_SHA256: &str = "urn:soapguard:hmac-sha256";

/// Attribute used for identifiers this library assigns.
pub const WSU_ID: &str = "wsu:Id";

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub uri: String,
    pub digest_method: String,
    pub digest_value: [u8; 32],
}

/// A parsed `Signature` element and where it sits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlock {
    pub path: NodePath,
    pub canonicalization_method: String,
    pub signature_method: String,
    pub references: Vec<Reference>,
    pub signature_value: [u8; 32],
    pub key_id: String,
    /// Signature value of the previous node when this signature is chained.
    pub chained_to: Option<[u8; 32]>,
    pub signed_info: Element,
}

impl SignatureBlock {
    /// Ids (without `#`) of every referenced element.
    pub fn referenced_ids(&self) -> impl Iterator<Item = &str> {
        self.references.iter().map(|r| reference_id(&r.uri))
    }

    pub fn references_id(&self, id: &str) -> bool {
        self.referenced_ids().any(|r| r == id)
    }
}

/// Outcome of one reference check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceResult {
    pub uri: String,
    pub pass: bool,
    pub detail: String,
}

/// SHA-256 over the canonical bytes of the subtree at `path`.
pub fn digest_element(root: &Element, path: &NodePath) -> Result<[u8; 32]> {
    let el = root.element_at(path).ok_or_else(|| Error::InvalidPath(path.to_vec()))?;
    Ok(sha256(&serialize_canonical(el)))
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn hmac_input(signed_info: &Element, chained_to: Option<&[u8; 32]>) -> Vec<u8> {
    let mut input = serialize_canonical(signed_info);
    if let Some(prev) = chained_to {
        input.extend_from_slice(prev);
    }
    input
}

fn new_mac(ks: &KeyStore, key_id: &str) -> Result<HmacSha256> {
    let key = ks.get(key_id)?;
    Ok(HmacSha256::new_from_slice(key).expect("HMAC accepts any key length"))
}

/// Signs the elements with the given ids.
pub fn sign(env: SoapEnvelope, ref_ids: &[String], key_id: &str, ks: &KeyStore) -> Result<SoapEnvelope> {
    sign_chained(env, ref_ids, key_id, ks, None)
}

/// Signs the elements with the given ids; with `previous` set, the HMAC
/// input is the canonical SignedInfo followed by the previous signature value.
///
/// The Signature goes into the first Security header block, created as the
/// last Header child when missing.
pub fn sign_chained(
    env: SoapEnvelope,
    ref_ids: &[String],
    key_id: &str,
    ks: &KeyStore,
    previous: Option<&[u8; 32]>,
) -> Result<SoapEnvelope> {
    for id in ref_ids {
        resolve_reference(env.root(), id)?;
    }
    let mut mac = new_mac(ks, key_id)?;

    let mut root = env.into_root();
    let security = ensure_security(&mut root);
    let token_id = fresh_id(&root);
    let token = Element::new("BinarySecurityToken")
        .with_attr(WSU_ID, token_id.as_str())
        .with_text(key_id);
    append_child(&mut root, &security, token);

    let mut signed_info = Element::new("SignedInfo")
        .with_child(Element::new("CanonicalizationMethod").with_attr("Algorithm", C14N_METHOD))
        .with_child(Element::new("SignatureMethod").with_attr("Algorithm", SIGNATURE_HMAC_SHA256));
    for id in ref_ids {
        let id = reference_id(id);
        let path = resolve_reference(&root, id)?;
        if path.is_prefix_of(&security) {
            return Err(Error::ReferenceEnclosesSignature(id.to_string()));
        }
        let digest = digest_element(&root, &path)?;
        signed_info.children.push(
            Element::new("Reference")
                .with_attr("URI", format!("#{id}"))
                .with_child(Element::new("DigestMethod").with_attr("Algorithm", DIGEST_SHA256))
                .with_child(Element::new("DigestValue").with_text(hex::encode(digest)))
                .into(),
        );
    }

    mac.update(&hmac_input(&signed_info, previous));
    let value = mac.finalize().into_bytes();

    let mut signature = Element::new("Signature")
        .with_child(signed_info)
        .with_child(Element::new("SignatureValue").with_text(hex::encode(value)))
        .with_child(
            Element::new("KeyInfo")
                .with_child(Element::new("KeyName").with_text(key_id))
                .with_child(Element::new("SecurityTokenReference").with_attr("URI", format!("#{token_id}"))),
        );
    if let Some(prev) = previous {
        signature = signature.with_child(Element::new("ChainedTo").with_text(hex::encode(prev)));
    }
    append_child(&mut root, &security, signature);
    crate::soap::as_envelope(root)
}

fn append_child(root: &mut Element, parent: &NodePath, child: Element) {
    root.element_at_mut(parent)
        .expect("parent path was just resolved")
        .children
        .push(child.into());
}

/// Path of the Header, inserting an empty one as first Envelope child if absent.
pub(crate) fn ensure_header(root: &mut Element) -> NodePath {
    if let Some(i) = root.child_index("Header") {
        return NodePath::new(vec![i]);
    }
    root.children.insert(0, Element::new("Header").into());
    NodePath::new(vec![0])
}

/// Path of the first Security header block, appending one to Header if absent.
pub(crate) fn ensure_security(root: &mut Element) -> NodePath {
    let header = ensure_header(root);
    let h = root.element_at_mut(&header).expect("header exists");
    let idx = match h.child_index("Security") {
        Some(i) => i,
        None => {
            h.children.push(Element::new("Security").into());
            h.children.len() - 1
        }
    };
    header.child(idx)
}

/// Paths of every `Signature` directly under a Security header block.
pub fn signature_paths(env: &SoapEnvelope) -> Vec<NodePath> {
    let (Some(hp), Some(header)) = (env.header_path(), env.header()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, block) in header.children.iter().enumerate() {
        let Some(sec) = block.as_element().filter(|e| e.local_name() == "Security") else {
            continue;
        };
        for (j, child) in sec.children.iter().enumerate() {
            if child.as_element().is_some_and(|e| e.local_name() == "Signature") {
                out.push(hp.child(i).child(j));
            }
        }
    }
    out
}

/// Every signature in document order; malformed ones are returned as errors.
pub fn signatures(env: &SoapEnvelope) -> Vec<Result<SignatureBlock>> {
    signature_paths(env)
        .into_iter()
        .map(|p| parse_signature(env.root(), &p))
        .collect()
}

/// Ids referenced by any well-formed signature in the message.
pub fn signed_ids(env: &SoapEnvelope) -> BTreeSet<String> {
    signatures(env)
        .into_iter()
        .flatten()
        .flat_map(|s| s.referenced_ids().map(str::to_string).collect::<Vec<_>>())
        .collect()
}

fn decode_32(text: &str, what: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(text.trim()).map_err(|e| Error::MalformedSignature(format!("{what} is not hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| Error::MalformedSignature(format!("{what} is not 32 bytes")))
}

pub fn parse_signature(root: &Element, path: &NodePath) -> Result<SignatureBlock> {
    let sig = root.element_at(path).ok_or_else(|| Error::InvalidPath(path.to_vec()))?;
    let missing = |what: &str| Error::MalformedSignature(format!("missing {what}"));
    let signed_info = sig.child("SignedInfo").ok_or_else(|| missing("SignedInfo"))?;
    let algorithm = |el: Option<&Element>, what: &str| -> Result<String> {
        el.and_then(|e| e.attr("Algorithm"))
            .map(str::to_string)
            .ok_or_else(|| missing(what))
    };
    let canonicalization_method = algorithm(signed_info.child("CanonicalizationMethod"), "CanonicalizationMethod")?;
    let signature_method = algorithm(signed_info.child("SignatureMethod"), "SignatureMethod")?;
    let mut references = Vec::new();
    for r in signed_info.child_elements().filter(|e| e.local_name() == "Reference") {
        references.push(Reference {
            uri: r.attr("URI").ok_or_else(|| missing("Reference URI"))?.to_string(),
            digest_method: algorithm(r.child("DigestMethod"), "DigestMethod")?,
            digest_value: decode_32(
                &r.child("DigestValue")
                    .ok_or_else(|| missing("DigestValue"))?
                    .text_content(),
                "DigestValue",
            )?,
        });
    }
    if references.is_empty() {
        return Err(missing("Reference"));
    }
    let signature_value = decode_32(
        &sig.child("SignatureValue")
            .ok_or_else(|| missing("SignatureValue"))?
            .text_content(),
        "SignatureValue",
    )?;
    let key_id = sig
        .child("KeyInfo")
        .and_then(|k| k.child("KeyName"))
        .map(|k| k.text_content().trim().to_string())
        .ok_or_else(|| missing("KeyInfo/KeyName"))?;
    let chained_to = sig
        .child("ChainedTo")
        .map(|c| decode_32(&c.text_content(), "ChainedTo"))
        .transpose()?;
    Ok(SignatureBlock {
        path: path.clone(),
        canonicalization_method,
        signature_method,
        references,
        signature_value,
        key_id,
        chained_to,
        signed_info: signed_info.clone(),
    })
}

/// First verification step: recompute and compare each reference digest.
pub fn reference_validation(env: &SoapEnvelope, sig: &SignatureBlock) -> Vec<ReferenceResult> {
    sig.references
        .iter()
        .map(|r| {
            let (pass, detail) = check_reference(env.root(), r);
            ReferenceResult {
                uri: r.uri.clone(),
                pass,
                detail,
            }
        })
        .collect()
}

fn check_reference(root: &Element, r: &Reference) -> (bool, String) {
    if r.digest_method != DIGEST_SHA256 {
        return (false, format!("unsupported digest method {}", r.digest_method));
    }
    let path = match resolve_reference(root, &r.uri) {
        Ok(p) => p,
        Err(e) => return (false, e.to_string()),
    };
    match digest_element(root, &path) {
        Ok(d) if d == r.digest_value => (true, format!("digest matches element at {path}")),
        Ok(_) => (false, format!("digest mismatch for element at {path}")),
        Err(e) => (false, e.to_string()),
    }
}

/// Second verification step: recompute the HMAC over canonical SignedInfo.
pub fn signature_validation(_env: &SoapEnvelope, sig: &SignatureBlock, ks: &KeyStore) -> Result<bool> {
    let mut mac = new_mac(ks, &sig.key_id)?;
    if sig.canonicalization_method != C14N_METHOD || sig.signature_method != SIGNATURE_HMAC_SHA256 {
        return Ok(false);
    }
    mac.update(&hmac_input(&sig.signed_info, sig.chained_to.as_ref()));
    Ok(mac.verify_slice(&sig.signature_value).is_ok())
}

/// Runs both steps for every signature, appending `dsig.*` checks to `report`.
/// Returns the number of Signature elements found.
pub(crate) fn record_signature_checks(env: &SoapEnvelope, ks: &KeyStore, report: &mut VerificationReport) -> usize {
    let paths = signature_paths(env);
    for path in &paths {
        let sig = match parse_signature(env.root(), path) {
            Ok(s) => s,
            Err(e) => {
                report.record("dsig.signature", false, format!("signature at {path}: {e}"));
                continue;
            }
        };
        for r in reference_validation(env, &sig) {
            report.record("dsig.reference", r.pass, format!("{}: {}", r.uri, r.detail));
        }
        match signature_validation(env, &sig, ks) {
            Ok(true) => report.record(
                "dsig.signature",
                true,
                format!("signature at {path} valid under key {}", sig.key_id),
            ),
            Ok(false) => report.record(
                "dsig.signature",
                false,
                format!("signature at {path} does not verify under key {}", sig.key_id),
            ),
            Err(e) => report.record("dsig.signature", false, format!("signature at {path}: {e}")),
        }
    }
    paths.len()
}

/// Two-step verification of every signature with no structural checks.
pub fn verify_naive(env: &SoapEnvelope, ks: &KeyStore) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(ValidatorMode::Naive);
    if record_signature_checks(env, ks, &mut report) == 0 {
        return Err(Error::NoSignatureFound);
    }
    Ok(report)
}

/// Ids of the Envelope-level Body elements that some signature references.
pub fn signed_body_paths(env: &SoapEnvelope) -> Vec<NodePath> {
    let signed = signed_ids(env);
    env.body_paths()
        .iter()
        .filter(|p| {
            env.root()
                .element_at(p)
                .and_then(xml::id_of)
                .is_some_and(|id| signed.contains(id))
        })
        .cloned()
        .collect()
}

/// Mutable access to the text of the first descendant element named `local`.
#[cfg(test)]
pub(crate) fn set_text(root: &mut Element, local: &str, text: &str) -> bool {
    fn go(el: &mut Element, local: &str, text: &str) -> bool {
        for c in &mut el.children {
            if let xml::XmlNode::Element(e) = c {
                if e.local_name() == local {
                    e.children = vec![xml::XmlNode::Text(text.to_string())];
                    return true;
                }
                if go(e, local, text) {
                    return true;
                }
            }
        }
        false
    }
    go(root, local, text)
}
