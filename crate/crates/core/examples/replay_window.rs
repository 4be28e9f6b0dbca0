//! Replay-store behaviour under a virtual clock: the same MessageID is
//! refused inside the window and admitted again once it has expired.

use soapguard::attack::corpus::{loan_message, protect, Protection};
use soapguard::guard::verify_hardened;
use soapguard::{KeyStore, ReplayStore, UnixTime};

fn main() -> soapguard::Result<()> {
    let ks = KeyStore::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/keystore.json").as_ref())?;
    let t0 = UnixTime::parse_iso("2007-03-01T12:00:00Z")?;
    let rs = ReplayStore::new(300);

    // a fresh Guard per delivery time, same MessageID throughout
    for offset in [0, 10, 300, 301, 700] {
        let now = t0.plus(offset);
        let env = protect(loan_message(1, 0), Protection::Hardened, "k-bank", &ks, now)?;
        let report = verify_hardened(&env, &ks, &rs, now);
        let replay = report.checks_named("replay").next().expect("replay check recorded");
        println!("t0+{offset:<4} {:?}  {}", report.verdict(), replay.detail);
    }
    Ok(())
}
