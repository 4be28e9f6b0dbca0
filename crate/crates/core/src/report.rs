use std::fmt;

use serde::{Deserialize, Serialize};

/// Which validator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidatorMode {
    Naive,
    Account,
    Hardened,
}

impl ValidatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidatorMode::Naive => "naive",
            ValidatorMode::Account => "account",
            ValidatorMode::Hardened => "hardened",
        }
    }
}

impl fmt::Display for ValidatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

/// One named pass/fail entry in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Ordered ledger of checks; the verdict is accept iff every check passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ReportJson", from = "ReportJson")]
pub struct VerificationReport {
    pub mode: ValidatorMode,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(mode: ValidatorMode) -> Self {
        VerificationReport {
            mode,
            checks: Vec::new(),
        }
    }

    pub fn record(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn verdict(&self) -> Verdict {
        if !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict() == Verdict::Accept
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Whether some check with this name failed.
    pub fn failed_check(&self, name: &str) -> bool {
        self.failed().any(|c| c.name == name)
    }

    /// Checks whose name starts with `prefix`.
    pub fn checks_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "mode: {}\nverdict: {}\n",
            self.mode,
            match self.verdict() {
                Verdict::Accept => "accept",
                Verdict::Reject => "reject",
            }
        );
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("  [{mark}] {}: {}\n", c.name, c.detail));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    verdict: Verdict,
    mode: ValidatorMode,
    checks: Vec<Check>,
}

impl From<VerificationReport> for ReportJson {
    fn from(r: VerificationReport) -> Self {
        ReportJson {
            verdict: r.verdict(),
            mode: r.mode,
            checks: r.checks,
        }
    }
}

impl From<ReportJson> for VerificationReport {
    fn from(j: ReportJson) -> Self {
        VerificationReport {
            mode: j.mode,
            checks: j.checks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_rejects() {
        assert_eq!(VerificationReport::new(ValidatorMode::Naive).verdict(), Verdict::Reject);
    }

    #[test]
    fn json_shape() {
        let mut r = VerificationReport::new(ValidatorMode::Hardened);
        r.record("id.unique", true, "");
        r.record("guard.parent", false, "ref 1: expected Envelope, found Action");
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["verdict"], "reject");
        assert_eq!(v["mode"], "hardened");
        assert_eq!(v["checks"][1]["name"], "guard.parent");
        assert_eq!(v["checks"][1]["pass"], false);
        let back: VerificationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
