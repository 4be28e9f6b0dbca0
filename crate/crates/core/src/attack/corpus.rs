//! Seeded generator of loan-offer messages shaped like the banking example,
//! plus the protection recipes applied to them.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::account::attach_account;
use crate::dsig::{sha256, sign};
use crate::error::Result;
use crate::guard::attach_guards;
use crate::keystore::KeyStore;
use crate::soap::{as_envelope, message_meta, SoapEnvelope};
use crate::time::UnixTime;
use crate::xml::{serialize_canonical, Element};

const FIRST: &[&str] = &[
    "John", "Maria", "Robert", "Aiko", "Omar", "Lena", "Piter", "Chen", "Fatima", "Diego", "Ines", "Tomas",
];
const LAST: &[&str] = &[
    "Abraham", "Lewis", "Rossi", "Tanaka", "Haddad", "Novak", "Pan", "Wei", "Mensah", "Garcia", "Okafor", "Berg",
];

/// Stream reserved for attacker bodies so they never collide with corpus messages.
const ATTACKER_STREAM: u64 = u64::MAX;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn name(rng: &mut impl Rng) -> String {
    format!("{} {}", FIRST.choose(rng).unwrap(), LAST.choose(rng).unwrap())
}

/// Six letters, two digits, a letter, two digits, a letter.
fn ssn(rng: &mut impl Rng) -> String {
    let letter = |rng: &mut dyn rand::RngCore| char::from(b'A' + rng.random_range(0..26u8));
    let digit = |rng: &mut dyn rand::RngCore| char::from(b'0' + rng.random_range(0..10u8));
    let mut s = String::with_capacity(12);
    (0..6).for_each(|_| s.push(letter(rng)));
    (0..2).for_each(|_| s.push(digit(rng)));
    s.push(letter(rng));
    (0..2).for_each(|_| s.push(digit(rng)));
    s.push(letter(rng));
    s
}

fn password(rng: &mut impl Rng) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..9).map(|_| char::from(*ALPHABET.choose(rng).unwrap())).collect()
}

fn loan_offer(client: String, ssn: String, password: String, username: String, amount: u64, kind: u8) -> Element {
    Element::new("issueLoanOffer")
        .with_child(
            Element::new("clientData")
                .with_child(Element::new("clientName").with_text(client))
                .with_child(Element::new("clientSSN").with_text(ssn)),
        )
        .with_child(
            Element::new("employeeData")
                .with_child(Element::new("password").with_text(password))
                .with_child(Element::new("username").with_text(username)),
        )
        .with_child(Element::new("loanAmount").with_text(amount.to_string()))
        .with_child(Element::new("loanType").with_text(kind.to_string()))
}

/// Message `index` of the corpus for `seed`. Body carries `Id="1"`; the
/// MessageID is a UUID drawn from the same stream.
pub fn loan_message(seed: u64, index: usize) -> SoapEnvelope {
    let mut rng = rng_for(seed, index as u64);
    let message_id = uuid::Builder::from_random_bytes(rng.random()).into_uuid();
    let client = name(&mut rng);
    let ssn = ssn(&mut rng);
    let password = password(&mut rng);
    let username = name(&mut rng);
    let amount = rng.random_range(1..=200u64) * 1000;
    let kind = rng.random_range(1..=3u8);
    let root = Element::new("Envelope")
        .with_child(
            Element::new("Header")
                .with_child(Element::new("To").with_text("ClientProcessService"))
                .with_child(Element::new("ReplyTo").with_child(Element::new("Address").with_text("RequestClient")))
                .with_child(Element::new("MessageID").with_text(format!("urn:uuid:{message_id}")))
                .with_child(Element::new("Action")),
        )
        .with_child(
            Element::new("Body")
                .with_attr("Id", "1")
                .with_child(loan_offer(client, ssn, password, username, amount, kind)),
        );
    as_envelope(root).expect("generated root is an Envelope")
}

pub fn generate_corpus(seed: u64, count: usize) -> Vec<SoapEnvelope> {
    (0..count).map(|i| loan_message(seed, i)).collect()
}

/// Envelope-level Body the attacker substitutes: no identifier, 500000 requested.
pub fn attacker_body(seed: u64) -> Element {
    let mut rng = rng_for(seed, ATTACKER_STREAM);
    let client = name(&mut rng);
    let ssn = ssn(&mut rng);
    let password = password(&mut rng);
    let username = name(&mut rng);
    Element::new("Body").with_child(loan_offer(client, ssn, password, username, 500_000, 2))
}

/// How a sender protects a message before it leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protection {
    /// Signs the Body only.
    Plain,
    /// Attaches a SoapAccount and signs Body plus account.
    Account,
    /// Account, then a Guard over Body and account.
    Hardened,
}

/// MessageID from the Header, or one derived from the message digest.
pub fn message_id_or_digest(env: &SoapEnvelope) -> String {
    message_meta(env)
        .ok()
        .and_then(|m| m.message_id)
        .filter(|m| !m.trim().is_empty())
        .unwrap_or_else(|| format!("urn:sha256:{}", hex::encode(sha256(&serialize_canonical(env.root())))))
}

/// Identifiers of every SoapAccount, in document order.
pub fn account_ids(env: &SoapEnvelope) -> Vec<String> {
    env.root()
        .elements()
        .into_iter()
        .filter(|(_, e)| e.local_name() == crate::account::ACCOUNT_ELEMENT)
        .filter_map(|(_, e)| crate::xml::id_of(e).map(str::to_string))
        .collect()
}

pub fn protect(
    env: SoapEnvelope,
    protection: Protection,
    key_id: &str,
    ks: &KeyStore,
    now: UnixTime,
) -> Result<SoapEnvelope> {
    let body = vec!["1".to_string()];
    match protection {
        Protection::Plain => sign(env, &body, key_id, ks),
        Protection::Account => attach_account(env, &body, "sender", key_id, ks, None),
        Protection::Hardened => {
            let env = attach_account(env, &body, "sender", key_id, ks, None)?;
            let account_id = account_ids(&env).pop().expect("account just attached");
            let message_id = message_id_or_digest(&env);
            attach_guards(env, &[body[0].clone(), account_id], key_id, ks, &message_id, now)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed_and_index() {
        let a = serialize_canonical(loan_message(7, 3).root());
        assert_eq!(a, serialize_canonical(loan_message(7, 3).root()));
        assert_ne!(a, serialize_canonical(loan_message(7, 4).root()));
        assert_ne!(a, serialize_canonical(loan_message(8, 3).root()));
    }

    #[test]
    fn shaped_like_banking_message() {
        let env = loan_message(1, 0);
        assert!(env.well_formed());
        let names: Vec<&str> = env.header().unwrap().child_elements().map(|e| e.local_name()).collect();
        assert_eq!(names, ["To", "ReplyTo", "MessageID", "Action"]);
        let body = env.root().element_at(&env.body_paths()[0]).unwrap();
        assert_eq!(body.attr("Id"), Some("1"));
        let offer = body.child("issueLoanOffer").unwrap();
        let ssn = offer
            .child("clientData")
            .unwrap()
            .child("clientSSN")
            .unwrap()
            .text_content();
        assert_eq!(ssn.len(), 12);
        assert!(message_meta(&env).unwrap().message_id.unwrap().starts_with("urn:uuid:"));
    }

    #[test]
    fn attacker_body_has_no_id() {
        let b = attacker_body(0);
        assert!(b.attributes.is_empty());
        assert!(b.text_content().contains("500000"));
    }
}
