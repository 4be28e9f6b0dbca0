//! Detection rates of the three validators over a generated corpus.
//!
//! `cargo run --example detection_matrix [count] [seed]`

use soapguard::account::verify_account;
use soapguard::attack::corpus::{attacker_body, generate_corpus, protect, Protection};
use soapguard::attack::{attack_relocate_account, attack_reorder_signed, attack_replay, attack_wrap_body};
use soapguard::dsig::verify_naive;
use soapguard::guard::verify_hardened;
use soapguard::soap::ROLE_ULTIMATE_RECEIVER;
use soapguard::{KeyStore, ReplayStore, SoapEnvelope, UnixTime, ValidatorMode};

const ATTACKS: [&str; 4] = ["wrap_body", "relocate_account", "reorder_signed", "replay"];

fn mutate(env: &SoapEnvelope, attack: &str, seed: u64) -> soapguard::Result<SoapEnvelope> {
    let evil = attacker_body(seed).into();
    match attack {
        "wrap_body" => attack_wrap_body(env.clone(), evil, "BogusHeader"),
        "relocate_account" => attack_relocate_account(env.clone(), evil),
        "reorder_signed" => attack_reorder_signed(env.clone()),
        _ => Ok(attack_replay(env)),
    }
}

/// True iff the validator rejects; replays count as detected when the
/// second delivery is rejected.
fn detects(
    mode: ValidatorMode,
    original: &SoapEnvelope,
    attacked: &SoapEnvelope,
    replay: bool,
    ks: &KeyStore,
    t: UnixTime,
) -> bool {
    let rs = ReplayStore::default();
    let check = |env: &SoapEnvelope, at: UnixTime| match mode {
        ValidatorMode::Naive => verify_naive(env, ks).map(|r| r.accepted()).unwrap_or(false),
        ValidatorMode::Account => verify_account(env, ks, ROLE_ULTIMATE_RECEIVER).accepted(),
        ValidatorMode::Hardened => verify_hardened(env, ks, &rs, at).accepted(),
    };
    if replay {
        check(original, t);
    }
    !check(attacked, t.plus(1))
}

fn main() -> soapguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let ks = KeyStore::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/keystore.json").as_ref())?;
    let t0 = UnixTime::parse_iso("2007-03-01T12:00:00Z")?;
    let corpus = generate_corpus(seed, count);

    println!(
        "{:<10} {:>18} {:>18} {:>18} {:>18}",
        "validator", ATTACKS[0], ATTACKS[1], ATTACKS[2], ATTACKS[3]
    );
    for (mode, protection) in [
        (ValidatorMode::Naive, Protection::Account),
        (ValidatorMode::Account, Protection::Account),
        (ValidatorMode::Hardened, Protection::Hardened),
    ] {
        let mut row = format!("{:<10}", mode.as_str());
        for attack in ATTACKS {
            let mut hits = 0;
            for (i, m) in corpus.iter().enumerate() {
                let protected = protect(m.clone(), protection, "k-bank", &ks, t0)?;
                let attacked = mutate(&protected, attack, seed + i as u64)?;
                hits += detects(mode, &protected, &attacked, attack == "replay", &ks, t0) as usize;
            }
            row.push_str(&format!(" {:>18}", format!("{hits}/{count}")));
        }
        println!("{row}");
    }
    Ok(())
}
