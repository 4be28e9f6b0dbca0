//! SoapAccount catches the plain wrapping attack, but relocating the account
//! into an unprocessed header defeats it. Also shows the sibling-list false
//! positive when an honest intermediary adds a header.

use soapguard::account::{attach_account, sibling_fragility_demo, verify_account, AccountPolicy};
use soapguard::attack::{attack_relocate_account, attack_wrap_body};
use soapguard::dsig::verify_naive;
use soapguard::soap::ROLE_ULTIMATE_RECEIVER;
use soapguard::xml::{parse, serialize_canonical};
use soapguard::{as_envelope, KeyStore};

fn main() -> soapguard::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let ks = KeyStore::load(format!("{dir}/keystore.json").as_ref())?;
    let loan_request = as_envelope(parse(&std::fs::read(format!("{dir}/loan_request.xml"))?)?)?;
    let loan_relocated = parse(&std::fs::read(format!("{dir}/loan_relocated.xml"))?)?;
    let evil = loan_relocated
        .child_elements()
        .last()
        .cloned()
        .expect("loan_relocated has a Body");

    let protected = attach_account(loan_request, &["1".to_string()], "bank", "k-bank", &ks, None)?;
    println!(
        "{}\n",
        String::from_utf8_lossy(&serialize_canonical(protected.header().unwrap()))
    );

    let verdict = |label: &str, env| -> soapguard::Result<()> {
        let naive = verify_naive(env, &ks)?.verdict();
        let account = verify_account(env, &ks, ROLE_ULTIMATE_RECEIVER);
        println!("{label:<20} naive {naive:?}  account {:?}", account.verdict());
        for c in account.failed() {
            println!("    {} {}", c.name, c.detail);
        }
        Ok(())
    };
    verdict("protected", &protected)?;
    let wrapped = attack_wrap_body(protected.clone(), evil.clone().into(), "BogusHeader")?;
    verdict("wrapped body", &wrapped)?;
    let moved = attack_relocate_account(protected.clone(), evil.into())?;
    verdict("relocated account", &moved)?;
    let report = verify_account(&moved, &ks, ROLE_ULTIMATE_RECEIVER);
    for c in report.checks_named("account.") {
        println!("    {} {}", c.name, c.detail);
    }

    for strict in [true, false] {
        let policy = AccountPolicy {
            strict_siblings: strict,
            ..Default::default()
        };
        let (before, after) = sibling_fragility_demo(&protected, "Via", &ks, &policy)?;
        println!(
            "honest Via header, strict_siblings={strict}: before {:?}, after {:?}",
            before.verdict(),
            after.verdict()
        );
    }
    Ok(())
}
