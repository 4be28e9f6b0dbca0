//! Deterministic multi-hop simulation: a client's outflow handlers protect
//! the message, intermediaries and attackers act on it in order, and the
//! server's inflow validator decides. Time is virtual.

use serde::{Deserialize, Serialize};

use super::corpus::{self, account_ids, message_id_or_digest};
use super::{add_benign_header, attack_reorder_signed, attack_replay, attack_wrap_body_with};
use crate::account::{attach_account, last_account_signature, verify_account_with, AccountPolicy};
use crate::dsig::{sha256, sign, verify_naive};
use crate::error::{Error, Result};
use crate::guard::{attach_guards, verify_hardened};
use crate::keystore::KeyStore;
use crate::replay::ReplayStore;
use crate::report::{ValidatorMode, VerificationReport};
use crate::soap::{SoapEnvelope, ROLE_ULTIMATE_RECEIVER};
use crate::time::UnixTime;
use crate::xml::serialize_canonical;

/// Virtual clock origin when a scenario names none.
pub const DEFAULT_START: &str = "2007-03-01T12:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Client,
    Intermediary,
    Attacker,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Detected,
    Undetected,
}

fn default_wrapper() -> String {
    super::DEFAULT_WRAPPER.to_string()
}

fn default_benign() -> String {
    super::DEFAULT_BENIGN_HEADER.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Sign {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refs: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
    },
    AttachAccount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refs: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
    },
    AttachGuards {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refs: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        message_id: Option<String>,
    },
    WrapBody {
        #[serde(default = "default_wrapper")]
        wrapper: String,
        #[serde(default)]
        copy_parent_id: bool,
    },
    RelocateAccount {},
    ReorderSigned {},
    Replay {},
    AddBenignHeader {
        #[serde(default = "default_benign")]
        name: String,
    },
}

impl Action {
    pub fn op(&self) -> &'static str {
        match self {
            Action::Sign { .. } => "sign",
            Action::AttachAccount { .. } => "attach_account",
            Action::AttachGuards { .. } => "attach_guards",
            Action::WrapBody { .. } => "wrap_body",
            Action::RelocateAccount {} => "relocate_account",
            Action::ReorderSigned {} => "reorder_signed",
            Action::Replay {} => "replay",
            Action::AddBenignHeader { .. } => "add_benign_header",
        }
    }

    fn allowed_for(&self, role: NodeRole) -> bool {
        use Action::*;
        match role {
            NodeRole::Client => matches!(
                self,
                Sign { .. } | AttachAccount { .. } | AttachGuards { .. } | AddBenignHeader { .. }
            ),
            NodeRole::Intermediary => matches!(self, Sign { .. } | AttachAccount { .. } | AddBenignHeader { .. }),
            NodeRole::Attacker => !matches!(self, Sign { .. } | AttachAccount { .. } | AttachGuards { .. }),
            NodeRole::Server => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub role: NodeRole,
    #[serde(default)]
    pub actions: Vec<Action>,
}

fn default_tick() -> i64 {
    1
}

fn default_strict() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub validator: ValidatorMode,
    pub nodes: Vec<NodeSpec>,
    pub expected: Outcome,
    /// Which corpus message (for `seed`) the client starts from.
    #[serde(default)]
    pub message_index: usize,
    /// ISO-8601 UTC start of the virtual clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    /// Seconds the clock advances per hop and per extra delivery.
    #[serde(default = "default_tick")]
    pub tick: i64,
    #[serde(default = "default_strict")]
    pub strict_siblings: bool,
}

impl PipelineScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: PipelineScenario = serde_json::from_str(text).map_err(|e| Error::ScenarioInvalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ScenarioInvalid(m));
        let roles: Vec<NodeRole> = self.nodes.iter().map(|n| n.role).collect();
        if roles.first() != Some(&NodeRole::Client) || roles.last() != Some(&NodeRole::Server) || roles.len() < 2 {
            return bad("the first node must be the client and the last the server".into());
        }
        for role in [NodeRole::Client, NodeRole::Server] {
            if roles.iter().filter(|r| **r == role).count() != 1 {
                return bad(format!("exactly one {role:?} node is required"));
            }
        }
        let mut ids: Vec<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("node ids must be distinct".into());
        }
        for node in &self.nodes {
            if let Some(a) = node.actions.iter().find(|a| !a.allowed_for(node.role)) {
                return bad(format!(
                    "{} node {:?} cannot perform {}",
                    role_name(node.role),
                    node.id,
                    a.op()
                ));
            }
        }
        if self.tick < 0 {
            return bad("tick must not be negative".into());
        }
        self.start_time().map(|_| ())
    }

    pub fn start_time(&self) -> Result<UnixTime> {
        UnixTime::parse_iso(self.start.as_deref().unwrap_or(DEFAULT_START))
            .map_err(|e| Error::ScenarioInvalid(e.to_string()))
    }
}

fn role_name(r: NodeRole) -> &'static str {
    match r {
        NodeRole::Client => "client",
        NodeRole::Intermediary => "intermediary",
        NodeRole::Attacker => "attacker",
        NodeRole::Server => "server",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub node_id: String,
    pub role: NodeRole,
    pub time: UnixTime,
    pub actions: Vec<String>,
    /// Hex SHA-256 of the canonical message after this node.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTranscript {
    pub seed: u64,
    pub validator: ValidatorMode,
    pub hops: Vec<Hop>,
    /// One report per delivery; replays add deliveries.
    pub deliveries: Vec<VerificationReport>,
    pub final_report: VerificationReport,
    pub outcome: Outcome,
    pub expected: Outcome,
    pub matches_expected: bool,
}

impl PipelineTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

fn digest_hex(env: &SoapEnvelope) -> String {
    hex::encode(sha256(&serialize_canonical(env.root())))
}

fn default_key(ks: &KeyStore, key: &Option<String>) -> Result<String> {
    match key {
        Some(k) => Ok(k.clone()),
        None => ks
            .key_ids()
            .next()
            .map(str::to_string)
            .ok_or_else(|| Error::UnknownKey("(empty keystore)".into())),
    }
}

struct Ctx<'a> {
    ks: &'a KeyStore,
    node_id: &'a str,
    now: UnixTime,
    attacker_seed: u64,
    extra_deliveries: usize,
}

fn body_refs(refs: &Option<Vec<String>>) -> Vec<String> {
    refs.clone().unwrap_or_else(|| vec!["1".to_string()])
}

fn apply(env: SoapEnvelope, action: &Action, ctx: &mut Ctx) -> Result<SoapEnvelope> {
    match action {
        Action::Sign { refs, key } => sign(env, &body_refs(refs), &default_key(ctx.ks, key)?, ctx.ks),
        Action::AttachAccount { refs, key } => {
            let previous = last_account_signature(&env);
            let key = default_key(ctx.ks, key)?;
            attach_account(env, &body_refs(refs), ctx.node_id, &key, ctx.ks, previous.as_ref())
        }
        Action::AttachGuards { refs, key, message_id } => {
            let refs = refs.clone().unwrap_or_else(|| {
                let mut r = vec!["1".to_string()];
                r.extend(account_ids(&env));
                r
            });
            let mid = message_id.clone().unwrap_or_else(|| message_id_or_digest(&env));
            attach_guards(env, &refs, &default_key(ctx.ks, key)?, ctx.ks, &mid, ctx.now)
        }
        Action::WrapBody {
            wrapper,
            copy_parent_id,
        } => attack_wrap_body_with(
            env,
            corpus::attacker_body(ctx.attacker_seed).into(),
            wrapper,
            *copy_parent_id,
        ),
        Action::RelocateAccount {} => {
            super::attack_relocate_account(env, corpus::attacker_body(ctx.attacker_seed).into())
        }
        Action::ReorderSigned {} => attack_reorder_signed(env),
        Action::Replay {} => {
            ctx.extra_deliveries += 1;
            Ok(attack_replay(&env))
        }
        Action::AddBenignHeader { name } => add_benign_header(env, name),
    }
}

fn validate(
    env: &SoapEnvelope,
    mode: ValidatorMode,
    ks: &KeyStore,
    rs: &ReplayStore,
    now: UnixTime,
    strict_siblings: bool,
) -> VerificationReport {
    match mode {
        ValidatorMode::Naive => verify_naive(env, ks).unwrap_or_else(|e| {
            let mut r = VerificationReport::new(ValidatorMode::Naive);
            r.record("dsig.present", false, e.to_string());
            r
        }),
        ValidatorMode::Account => verify_account_with(
            env,
            ks,
            &AccountPolicy {
                node_role: ROLE_ULTIMATE_RECEIVER.to_string(),
                strict_siblings,
            },
        ),
        ValidatorMode::Hardened => verify_hardened(env, ks, rs, now),
    }
}

/// Runs the scenario. A failing action is recorded on its hop; that node's
/// remaining actions are skipped and the message travels on unchanged.
pub fn run_pipeline(scenario: &PipelineScenario, ks: &KeyStore, rs: &ReplayStore) -> Result<PipelineTranscript> {
    scenario.validate()?;
    let start = scenario.start_time()?;
    let mut env = corpus::loan_message(scenario.seed, scenario.message_index);
    let mut hops = Vec::with_capacity(scenario.nodes.len());
    let mut extra_deliveries = 0;
    let mut now = start;

    for (i, node) in scenario.nodes.iter().enumerate() {
        now = start.plus(scenario.tick * i as i64);
        let mut ctx = Ctx {
            ks,
            node_id: &node.id,
            now,
            attacker_seed: scenario.seed.wrapping_add(i as u64),
            extra_deliveries: 0,
        };
        let mut applied = Vec::new();
        let mut error = None;
        for action in &node.actions {
            match apply(env.clone(), action, &mut ctx) {
                Ok(next) => {
                    env = next;
                    applied.push(action.op().to_string());
                }
                Err(e) => {
                    error = Some(format!("{}: {e}", action.op()));
                    break;
                }
            }
        }
        extra_deliveries += ctx.extra_deliveries;
        hops.push(Hop {
            node_id: node.id.clone(),
            role: node.role,
            time: now,
            actions: applied,
            digest: digest_hex(&env),
            error,
        });
    }

    let deliveries: Vec<VerificationReport> = (0..=extra_deliveries)
        .map(|k| {
            let at = now.plus(scenario.tick * k as i64);
            validate(&env, scenario.validator, ks, rs, at, scenario.strict_siblings)
        })
        .collect();
    let final_report = deliveries.last().expect("at least one delivery").clone();
    let outcome = if final_report.accepted() {
        Outcome::Undetected
    } else {
        Outcome::Detected
    };
    Ok(PipelineTranscript {
        seed: scenario.seed,
        validator: scenario.validator,
        hops,
        deliveries,
        final_report,
        outcome,
        expected: scenario.expected,
        matches_expected: outcome == scenario.expected,
    })
}
