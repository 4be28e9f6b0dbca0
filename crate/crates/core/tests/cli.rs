mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use serde_json::Value;
use soapguard::account::parse_account;
use soapguard::xml::parse;

const NOW: &str = "2007-03-01T12:00:00Z";

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soapguard"))
        .args(args)
        .env("SOAPGUARD_KEYSTORE", keystore_path())
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Work {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// loan_request with an account, then a guard over Body and account.
    fn hardened(&self) -> PathBuf {
        let a = self.path("account.xml");
        let g = self.path("guarded.xml");
        let loan_request = fixture_path("loan_request.xml");
        assert_eq!(
            code(&run(&[
                "sign",
                p(&loan_request),
                "--refs",
                "1",
                "--key",
                "k-bank",
                "--mode",
                "account",
                "-o",
                p(&a)
            ])),
            0
        );
        assert_eq!(
            code(&run(&[
                "sign",
                p(&a),
                "--refs",
                "1",
                "--key",
                "k-bank",
                "--mode",
                "guard",
                "--now",
                NOW,
                "-o",
                p(&g)
            ])),
            0
        );
        g
    }
}

fn report_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn failing(report: &Value) -> Vec<String> {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn sign_modes_and_errors() {
    let w = Work::new();
    let loan_request = fixture_path("loan_request.xml");
    let out = w.path("g.xml");
    let o = run(&[
        "sign",
        p(&loan_request),
        "--refs",
        "1",
        "--key",
        "k-bank",
        "--mode",
        "guard",
        "--now",
        NOW,
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().contains("<Guard "));

    assert_eq!(
        code(&run(&["sign", p(&loan_request), "--refs", "99", "--key", "k-bank"])),
        3
    );
    assert_eq!(
        code(&run(&["sign", p(&loan_request), "--refs", "1", "--key", "k-none"])),
        4
    );
    let garbage = w.path("bad.xml");
    std::fs::write(&garbage, "<Envelope><Body></Envelope>").unwrap();
    assert_eq!(code(&run(&["sign", p(&garbage), "--refs", "1", "--key", "k-bank"])), 2);
}

#[test]
fn account_mode_gives_loan_account_shape() {
    let o = run(&[
        "sign",
        p(&fixture_path("loan_request.xml")),
        "--refs",
        "1",
        "--key",
        "k-bank",
        "--mode",
        "account",
    ]);
    assert_eq!(code(&o), 0);
    let root = parse(&o.stdout).unwrap();
    let header = root.child("Header").unwrap();
    let names: Vec<&str> = header.child_elements().map(|e| e.name.as_str()).collect();
    assert_eq!(
        names,
        ["To", "ReplyTo", "MessageID", "Action", "SoapAccount", "Security"]
    );
    let acct = parse_account(header.child("SoapAccount").unwrap()).unwrap();
    assert_eq!(
        (
            acct.no_child_of_envelope,
            acct.no_child_of_header,
            acct.no_signed_objects
        ),
        (2, 6, 2)
    );
    assert_eq!(acct.parent_of["1"], "Envelope");
    assert_eq!(acct.parent_of["2"], "Header");
}

#[test]
fn verify_benign_relocated_and_wrapped() {
    let w = Work::new();
    let g = w.hardened();
    let at = "2007-03-01T12:00:10Z";
    assert_eq!(code(&run(&["verify", p(&g), "--mode", "hardened", "--now", at])), 0);

    let moved = w.path("loan_relocated.xml");
    assert_eq!(
        code(&run(&["attack", p(&g), "--kind", "relocate_account", "-o", p(&moved)])),
        0
    );
    let o = run(&["verify", p(&moved), "--mode", "account", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let detail = report_json(&o)["checks"].to_string();
    assert!(detail.contains("nothing compared"), "{detail}");

    let o = run(&[
        "verify",
        p(&moved),
        "--mode",
        "hardened",
        "--now",
        at,
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 1);
    assert!(failing(&report_json(&o)).contains(&"guard.parent".to_string()));
    assert_eq!(code(&run(&["verify", p(&moved), "--mode", "naive"])), 0);
}

#[test]
fn report_schema_is_stable() {
    let w = Work::new();
    let g = w.hardened();
    let o = run(&["verify", p(&g), "--mode", "hardened", "--now", NOW, "--format", "json"]);
    let v = report_json(&o);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["checks", "mode", "verdict"]);
    assert_eq!(v["verdict"], "accept");
    assert_eq!(v["mode"], "hardened");
    for c in v["checks"].as_array().unwrap() {
        let mut k: Vec<&str> = c.as_object().unwrap().keys().map(String::as_str).collect();
        k.sort();
        assert_eq!(k, ["detail", "name", "pass"]);
    }
}

#[test]
fn attack_command() {
    let w = Work::new();
    let loan_request = fixture_path("loan_request.xml");
    assert_eq!(code(&run(&["attack", p(&loan_request), "--kind", "wrap_body"])), 5);
    let signed = fixture_path("loan_signed.xml");
    let out = w.path("wrapped.xml");
    let o = run(&[
        "attack",
        p(&signed),
        "--kind",
        "wrap_body",
        "--wrapper",
        "BogusHeader",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0);
    let root = parse(&std::fs::read(&out).unwrap()).unwrap();
    let bogus = root.child("Header").unwrap().child("BogusHeader").unwrap();
    assert_eq!(bogus.child("Body").unwrap().attr("Id"), Some("1"));

    assert_eq!(code(&run(&["attack", p(&signed), "--kind", "relocate_account"])), 5);
    assert_eq!(code(&run(&["attack", p(&signed), "--kind", "reorder_signed"])), 5);
    assert_eq!(
        code(&run(&[
            "attack",
            p(&signed),
            "--kind",
            "add_benign_header",
            "--header-name",
            "Via"
        ])),
        0
    );

    // output that no longer verifies is refused
    let tampered = w.path("tampered.xml");
    let text = std::fs::read_to_string(&signed).unwrap().replace("100000", "100001");
    std::fs::write(&tampered, text).unwrap();
    assert_eq!(code(&run(&["attack", p(&tampered), "--kind", "replay"])), 5);
}

#[test]
fn pipeline_command() {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let w = Work::new();
    let t = w.path("t.json");
    let o = run(&["pipeline", p(&scenarios.join("wrap-vs-hardened.json")), "-o", p(&t)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let transcript: Value = serde_json::from_slice(&std::fs::read(&t).unwrap()).unwrap();
    assert_eq!(transcript["outcome"], "detected");
    assert_eq!(
        code(&run(&["pipeline", p(&scenarios.join("relocate-vs-account.json"))])),
        0
    );

    let bad = w.path("bad.json");
    std::fs::write(&bad, r#"{"seed": 1, "nodes": []}"#).unwrap();
    assert_eq!(code(&run(&["pipeline", p(&bad)])), 2);

    let wrong = w.path("wrong.json");
    let text = std::fs::read_to_string(scenarios.join("wrap-vs-naive.json")).unwrap();
    std::fs::write(&wrong, text.replace("\"undetected\"", "\"detected\"")).unwrap();
    assert_eq!(code(&run(&["pipeline", p(&wrong)])), 1);
}

#[test]
fn corpus_command() {
    let w = Work::new();
    let (a, b) = (w.path("a"), w.path("b"));
    for d in [&a, &b] {
        assert_eq!(code(&run(&["corpus", p(d), "--count", "50", "--seed", "7"])), 0);
    }
    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 51);
    for f in &files {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f:?}"
        );
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["messages"].as_array().unwrap().len(), 50);

    let one = w.path("one");
    assert_eq!(code(&run(&["corpus", p(&one), "--count", "1"])), 0);
    let root = parse(&std::fs::read(one.join("msg-0000.xml")).unwrap()).unwrap();
    let names: Vec<&str> = root.child_elements().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["Header", "Body"]);
    assert!(root.child("Body").unwrap().child("issueLoanOffer").is_some());

    assert_eq!(code(&run(&["corpus", p(&w.path("zero")), "--count", "0"])), 2);
    let blocker = w.path("file");
    std::fs::write(&blocker, "").unwrap();
    assert_eq!(code(&run(&["corpus", p(&blocker.join("sub")), "--count", "1"])), 2);
}

#[test]
fn replay_db_persists_between_runs() {
    let w = Work::new();
    let g = w.hardened();
    let db = w.path("replay.json");
    let args = [
        "verify",
        p(&g),
        "--mode",
        "hardened",
        "--now",
        NOW,
        "--replay-db",
        p(&db),
    ];
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(code(&run(&args)), 1);
    let later = [
        "verify",
        p(&g),
        "--mode",
        "hardened",
        "--now",
        "2007-03-01T12:05:01Z",
        "--replay-db",
        p(&db),
        "--window",
        "600",
    ];
    assert_eq!(code(&run(&later)), 1);
}

#[test]
fn keystore_errors() {
    let loan_request = fixture_path("loan_request.xml");
    let o = Command::new(env!("CARGO_BIN_EXE_soapguard"))
        .args(["sign", p(&loan_request), "--refs", "1", "--key", "k-bank"])
        .env_remove("SOAPGUARD_KEYSTORE")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
    let o = run(&[
        "sign",
        p(&loan_request),
        "--refs",
        "1",
        "--key",
        "k-bank",
        "--keystore",
        "/nonexistent/ks.json",
    ]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&run(&["verify", p(&loan_request), "--window", "0"])), 2);
}
