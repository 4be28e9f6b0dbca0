//! Signs the Body, verifies in the two standard steps, then shows what an
//! in-place edit and a wrong key do to the report.

use soapguard::dsig::{sign, verify_naive};
use soapguard::xml::{parse, XmlNode};
use soapguard::{as_envelope, KeyStore};

fn main() -> soapguard::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let ks = KeyStore::load(format!("{dir}/keystore.json").as_ref())?;
    let env = as_envelope(parse(&std::fs::read(format!("{dir}/loan_request.xml"))?)?)?;
    let signed = sign(env, &["1".to_string()], "k-bank", &ks)?;
    print!("{}", verify_naive(&signed, &ks)?.to_text());

    println!("\n-- loanAmount edited in place --");
    let edited = signed.clone().edit(|root| {
        let (path, _) = root
            .elements()
            .into_iter()
            .find(|(_, e)| e.name == "loanAmount")
            .expect("loanAmount present");
        root.element_at_mut(&path).unwrap().children = vec![XmlNode::Text("900000".into())];
        Ok(())
    })?;
    print!("{}", verify_naive(&edited, &ks)?.to_text());

    println!("\n-- verified with a different secret under the same key id --");
    let other = KeyStore::new().with_key("k-bank", &[7u8; 32])?;
    print!("{}", verify_naive(&signed, &other)?.to_text());
    Ok(())
}
