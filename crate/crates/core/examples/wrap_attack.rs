//! Signs the banking message, then wraps its Body into a bogus header and
//! substitutes the attacker's Body. Naive verification still accepts.
//!
//! `cargo run --example wrap_attack -- --write` refreshes
//! fixtures/loan_signed.xml and fixtures/loan_wrapped.xml.

use std::path::Path;

use soapguard::attack::attack_wrap_body;
use soapguard::dsig::{reference_validation, sign, signature_validation, signatures, verify_naive};
use soapguard::xml::{parse, serialize_canonical};
use soapguard::{as_envelope, KeyStore};

fn main() -> soapguard::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let ks = KeyStore::load(&dir.join("keystore.json"))?;
    let original = as_envelope(parse(&std::fs::read(dir.join("loan_request.xml"))?)?)?;

    // the attacker's Body is the Envelope-level Body of the relocated fixture
    let loan_relocated = parse(&std::fs::read(dir.join("loan_relocated.xml"))?)?;
    let evil = loan_relocated
        .child_elements()
        .last()
        .cloned()
        .expect("loan_relocated has a Body");

    let signed = sign(original, &["1".to_string()], "k-bank", &ks)?;
    let attacked = attack_wrap_body(signed.clone(), evil.into(), "BogusHeader")?;

    let sig = signatures(&attacked).remove(0)?;
    for r in reference_validation(&attacked, &sig) {
        println!(
            "reference {}: {} ({})",
            r.uri,
            if r.pass { "pass" } else { "FAIL" },
            r.detail
        );
    }
    println!("signature validation: {}", signature_validation(&attacked, &sig, &ks)?);
    print!("{}", verify_naive(&attacked, &ks)?.to_text());

    if std::env::args().any(|a| a == "--write") {
        let mut a = serialize_canonical(signed.root());
        a.push(b'\n');
        let mut b = serialize_canonical(attacked.root());
        b.push(b'\n');
        std::fs::write(dir.join("loan_signed.xml"), a)?;
        std::fs::write(dir.join("loan_wrapped.xml"), b)?;
        println!("wrote loan_signed.xml and loan_wrapped.xml");
    }
    Ok(())
}
