//! Runs every bundled scenario through the handler-chain simulator.
//!
//! `cargo run --example pipeline [scenario.json]`

use soapguard::attack::pipeline::{run_pipeline, PipelineScenario};
use soapguard::{KeyStore, ReplayStore};

fn main() -> soapguard::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let ks = KeyStore::load(format!("{root}/fixtures/keystore.json").as_ref())?;
    let files: Vec<std::path::PathBuf> = match std::env::args().nth(1) {
        Some(f) => vec![f.into()],
        None => {
            let mut v: Vec<_> = std::fs::read_dir(format!("{root}/scenarios"))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            v
        }
    };
    for f in files {
        let scenario = PipelineScenario::from_json(&std::fs::read_to_string(&f)?)?;
        let t = run_pipeline(&scenario, &ks, &ReplayStore::default())?;
        let failed: Vec<&str> = t.final_report.failed().map(|c| c.name.as_str()).collect();
        println!(
            "{:<36} {:<9} {:?}/{:?} {} {}",
            f.file_name().unwrap().to_string_lossy(),
            t.validator.as_str(),
            t.outcome,
            t.expected,
            if t.matches_expected { "ok" } else { "MISMATCH" },
            failed.join(",")
        );
    }
    Ok(())
}
