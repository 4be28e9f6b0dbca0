//! The hardened validator against every attack generator, including a
//! wrapper named Envelope with and without the Envelope's copied identifier.

use soapguard::attack::corpus::{attacker_body, loan_message, protect, Protection};
use soapguard::attack::{
    add_benign_header, attack_relocate_account, attack_reorder_signed, attack_replay, attack_wrap_body,
    attack_wrap_body_with,
};
use soapguard::guard::verify_hardened;
use soapguard::{KeyStore, ReplayStore, SoapEnvelope, UnixTime};

fn main() -> soapguard::Result<()> {
    let ks = KeyStore::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/keystore.json").as_ref())?;
    let t0 = UnixTime::parse_iso("2007-03-01T12:00:00Z")?;
    let guarded = protect(loan_message(7, 0), Protection::Hardened, "k-bank", &ks, t0)?;
    let evil = || attacker_body(7).into();

    let cases: Vec<(&str, SoapEnvelope)> = vec![
        ("benign", guarded.clone()),
        ("benign + Via", add_benign_header(guarded.clone(), "Via")?),
        ("wrap_body", attack_wrap_body(guarded.clone(), evil(), "BogusHeader")?),
        (
            "wrap as Envelope",
            attack_wrap_body_with(guarded.clone(), evil(), "Envelope", false)?,
        ),
        (
            "wrap as Envelope+id",
            attack_wrap_body_with(guarded.clone(), evil(), "Envelope", true)?,
        ),
        ("relocate_account", attack_relocate_account(guarded.clone(), evil())?),
        ("reorder_signed", attack_reorder_signed(guarded.clone())?),
    ];
    for (label, env) in &cases {
        let report = verify_hardened(env, &ks, &ReplayStore::default(), t0.plus(1));
        let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
        println!("{label:<20} {:?}  {}", report.verdict(), failed.join(" "));
    }

    let rs = ReplayStore::default();
    verify_hardened(&guarded, &ks, &rs, t0.plus(1));
    let again = verify_hardened(&attack_replay(&guarded), &ks, &rs, t0.plus(2));
    println!(
        "{:<20} {:?}  {}",
        "replay",
        again.verdict(),
        again.failed().map(|c| c.detail.as_str()).collect::<String>()
    );
    Ok(())
}
