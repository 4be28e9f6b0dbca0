//! Parses a message, prints its canonical bytes, the identifier index and
//! the depth and digest of every identified element.
//!
//! `cargo run --example canonicalize [file.xml]`

use soapguard::dsig::digest_element;
use soapguard::xml::{build_wsu_id_index, parent_of, parse, serialize_canonical};

fn main() -> soapguard::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/loan_account.xml").to_string());
    let root = parse(&std::fs::read(&path)?)?;
    println!("{}\n", String::from_utf8_lossy(&serialize_canonical(&root)));

    let index = build_wsu_id_index(&root);
    for (id, p) in &index.entries {
        let (_, parent) = parent_of(&root, p)?;
        let digest = hex::encode(digest_element(&root, p)?);
        println!(
            "id {id:>3}  path {p:<8} depth {}  parent {parent:<10} sha256 {}",
            p.len(),
            &digest[..16]
        );
    }
    for (id, paths) in &index.duplicates {
        println!("duplicate id {id}: {paths:?}");
    }
    Ok(())
}
