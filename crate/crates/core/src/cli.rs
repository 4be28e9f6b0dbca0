//! Command-line surface. Exit codes: 0 accept or match, 1 reject or
//! mismatch, 2 bad input, 3 reference error, 4 key error, 5 attack refused.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::account::{attach_account, last_account_signature, verify_account_with, AccountPolicy};
use crate::attack::corpus::{account_ids, generate_corpus, message_id_or_digest};
use crate::attack::pipeline::{run_pipeline, PipelineScenario};
use crate::attack::{apply_attack, AttackKind};
use crate::dsig::{sha256, sign, verify_naive};
use crate::error::{Error, Result};
use crate::guard::{attach_guards, verify_hardened};
use crate::keystore::KeyStore;
use crate::replay::{ReplayStore, DEFAULT_WINDOW_SECONDS};
use crate::report::{ValidatorMode, VerificationReport};
use crate::soap::{as_envelope, SoapEnvelope, ROLE_ULTIMATE_RECEIVER};
use crate::time::UnixTime;
use crate::xml::{parse, serialize_canonical, IdAttributes};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REFERENCE: i32 = 3;
pub const EXIT_KEY: i32 = 4;
pub const EXIT_ATTACK_INVALID: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "soapguard", version, about = "Sign, attack and verify SOAP messages")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON map of key id to hex secret
    #[arg(long, global = true, env = "SOAPGUARD_KEYSTORE")]
    pub keystore: Option<PathBuf>,
    /// JSON file persisting seen MessageIDs between runs
    #[arg(long, global = true)]
    pub replay_db: Option<PathBuf>,
    /// Freshness and replay window in seconds
    #[arg(long, global = true, default_value_t = DEFAULT_WINDOW_SECONDS)]
    pub window: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignMode {
    Plain,
    Account,
    /// Guard header over --refs plus any SoapAccount present
    Guard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Naive,
    Account,
    Hardened,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    WrapBody,
    RelocateAccount,
    ReorderSigned,
    Replay,
    AddBenignHeader,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sign a message, optionally adding a SoapAccount or a Guard
    Sign {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        refs: Vec<String>,
        #[arg(long)]
        key: String,
        #[arg(long, value_enum, default_value_t = SignMode::Plain)]
        mode: SignMode,
        /// nodeId recorded on the SoapAccount
        #[arg(long, default_value = "sender")]
        node_id: String,
        /// MessageID for the Guard; defaults to the Header's MessageID
        #[arg(long)]
        message_id: Option<String>,
        /// ISO-8601 UTC time for the Guard timestamp
        #[arg(long)]
        now: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify a message and print the check ledger
    Verify {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = VerifyMode::Naive)]
        mode: VerifyMode,
        /// SOAP role of the verifying node (account mode)
        #[arg(long, default_value = ROLE_ULTIMATE_RECEIVER)]
        role: String,
        /// Skip sibling comparison and allow extra header blocks (account mode)
        #[arg(long)]
        lenient_siblings: bool,
        /// ISO-8601 UTC verification time (hardened mode)
        #[arg(long)]
        now: Option<String>,
    },
    /// Apply a rewriting attack; refuses output that would fail naive verification
    Attack {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value = crate::attack::DEFAULT_WRAPPER)]
        wrapper: String,
        /// Copy the Envelope's identifier onto the wrapper
        #[arg(long)]
        copy_parent_id: bool,
        #[arg(long, default_value = crate::attack::DEFAULT_BENIGN_HEADER)]
        header_name: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a pipeline scenario; exit 0 iff the outcome matches its expectation
    Pipeline {
        scenario: PathBuf,
        /// Write the JSON transcript here
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write generated loan messages and a manifest
    Corpus {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
}

/// Resolved settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub keystore: Option<PathBuf>,
    pub replay_db: Option<PathBuf>,
    pub id_attributes: IdAttributes,
    pub window_seconds: u64,
    pub format: Format,
    pub seed: u64,
}

impl CliConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self> {
        if g.window == 0 {
            return Err(Error::InvalidArgument("--window must be positive".into()));
        }
        Ok(CliConfig {
            keystore: g.keystore.clone(),
            replay_db: g.replay_db.clone(),
            id_attributes: IdAttributes::default(),
            window_seconds: g.window,
            format: g.format,
            seed: g.seed,
        })
    }

    pub fn load_keystore(&self) -> Result<KeyStore> {
        let path = self
            .keystore
            .as_ref()
            .ok_or_else(|| Error::UnknownKey("no keystore given (--keystore or SOAPGUARD_KEYSTORE)".into()))?;
        KeyStore::load(path).map_err(|e| match e {
            Error::Io(m) => Error::InvalidKey {
                id: path.display().to_string(),
                reason: m,
            },
            other => other,
        })
    }

    fn replay_store(&self) -> Result<ReplayStore> {
        match &self.replay_db {
            Some(p) => ReplayStore::load(p, self.window_seconds),
            None => Ok(ReplayStore::new(self.window_seconds)),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ReferenceNotFound(_)
        | Error::AmbiguousReference(_)
        | Error::ReferenceEnclosesSignature(_)
        | Error::MissingParentId(_)
        | Error::InvalidPath(_)
        | Error::RootHasNoParent => EXIT_REFERENCE,
        Error::UnknownKey(_) | Error::InvalidKey { .. } => EXIT_KEY,
        Error::NoSignedBody | Error::NoAccountPresent | Error::NeedTwoSignedElements => EXIT_ATTACK_INVALID,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_ACCEPT;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "soapguard: {e}");
            exit_code(&e)
        }
    }
}

fn read_envelope(path: &Path) -> Result<SoapEnvelope> {
    as_envelope(parse(&std::fs::read(path)?)?)
}

fn message_bytes(env: &SoapEnvelope) -> Vec<u8> {
    let mut bytes = serialize_canonical(env.root());
    bytes.push(b'\n');
    bytes
}

fn emit(bytes: &[u8], output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn time_arg(now: Option<&str>) -> Result<UnixTime> {
    now.map(UnixTime::parse_iso).unwrap_or_else(|| Ok(UnixTime::now()))
}

fn print_report(report: &VerificationReport, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Text => write!(out, "{}", report.to_text())?,
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(report).expect("report serializes")
        )?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    message_id: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    count: usize,
    messages: Vec<ManifestEntry>,
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = CliConfig::from_args(&cli.global)?;
    match cli.command {
        Command::Sign {
            input,
            refs,
            key,
            mode,
            node_id,
            message_id,
            now,
            output,
        } => {
            let env = read_envelope(&input)?;
            let ks = cfg.load_keystore()?;
            let signed = match mode {
                SignMode::Plain => sign(env, &refs, &key, &ks)?,
                SignMode::Account => {
                    let previous = last_account_signature(&env);
                    attach_account(env, &refs, &node_id, &key, &ks, previous.as_ref())?
                }
                SignMode::Guard => {
                    let mut refs = refs;
                    for id in account_ids(&env) {
                        if !refs.iter().any(|r| crate::xml::reference_id(r) == id) {
                            refs.push(id);
                        }
                    }
                    let mid = message_id.unwrap_or_else(|| message_id_or_digest(&env));
                    attach_guards(env, &refs, &key, &ks, &mid, time_arg(now.as_deref())?)?
                }
            };
            emit(&message_bytes(&signed), output.as_deref(), out)?;
            Ok(EXIT_ACCEPT)
        }
        Command::Verify {
            input,
            mode,
            role,
            lenient_siblings,
            now,
        } => {
            let env = read_envelope(&input)?;
            let ks = cfg.load_keystore()?;
            let report = match mode {
                VerifyMode::Naive => verify_naive(&env, &ks).unwrap_or_else(|e| {
                    let mut r = VerificationReport::new(ValidatorMode::Naive);
                    r.record("dsig.present", false, e.to_string());
                    r
                }),
                VerifyMode::Account => verify_account_with(
                    &env,
                    &ks,
                    &AccountPolicy {
                        node_role: role,
                        strict_siblings: !lenient_siblings,
                    },
                ),
                VerifyMode::Hardened => {
                    let rs = cfg.replay_store()?;
                    let report = verify_hardened(&env, &ks, &rs, time_arg(now.as_deref())?);
                    if let Some(p) = &cfg.replay_db {
                        rs.save(p)?;
                    }
                    report
                }
            };
            print_report(&report, cfg.format, out)?;
            Ok(if report.accepted() { EXIT_ACCEPT } else { EXIT_REJECT })
        }
        Command::Attack {
            input,
            kind,
            wrapper,
            copy_parent_id,
            header_name,
            output,
        } => {
            let env = read_envelope(&input)?;
            let ks = cfg.load_keystore()?;
            let kind = match kind {
                KindArg::WrapBody => AttackKind::WrapBody {
                    wrapper,
                    copy_parent_id,
                    seed: cfg.seed,
                },
                KindArg::RelocateAccount => AttackKind::RelocateAccount { seed: cfg.seed },
                KindArg::ReorderSigned => AttackKind::ReorderSigned,
                KindArg::Replay => AttackKind::Replay,
                KindArg::AddBenignHeader => AttackKind::AddBenignHeader { name: header_name },
            };
            let attacked = apply_attack(env, &kind)?;
            let refusal = match verify_naive(&attacked, &ks) {
                Ok(r) if r.accepted() => None,
                Ok(r) => Some(r.failed().map(|c| c.detail.as_str()).collect::<Vec<_>>().join("; ")),
                Err(e) => Some(e.to_string()),
            };
            if let Some(reason) = refusal {
                writeln!(
                    err,
                    "soapguard: refusing {} output, naive verification fails: {reason}",
                    kind.name()
                )?;
                return Ok(EXIT_ATTACK_INVALID);
            }
            emit(&message_bytes(&attacked), output.as_deref(), out)?;
            Ok(EXIT_ACCEPT)
        }
        Command::Pipeline { scenario, output } => {
            let text = std::fs::read_to_string(&scenario)?;
            let scenario = PipelineScenario::from_json(&text)?;
            let ks = cfg.load_keystore()?;
            let rs = cfg.replay_store()?;
            let transcript = run_pipeline(&scenario, &ks, &rs)?;
            if let Some(p) = &output {
                std::fs::write(p, transcript.to_json())?;
            }
            match cfg.format {
                Format::Json => writeln!(out, "{}", transcript.to_json())?,
                Format::Text => {
                    for hop in &transcript.hops {
                        writeln!(
                            out,
                            "{:<12} {:<13} {} [{}]{}",
                            hop.node_id,
                            format!("{:?}", hop.role).to_lowercase(),
                            &hop.digest[..16],
                            hop.actions.join(","),
                            hop.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
                        )?;
                    }
                    write!(out, "{}", transcript.final_report.to_text())?;
                    writeln!(
                        out,
                        "outcome {:?}, expected {:?}: {}",
                        transcript.outcome,
                        transcript.expected,
                        if transcript.matches_expected {
                            "match"
                        } else {
                            "MISMATCH"
                        }
                    )?;
                }
            }
            Ok(if transcript.matches_expected {
                EXIT_ACCEPT
            } else {
                EXIT_REJECT
            })
        }
        Command::Corpus { out_dir, count } => {
            if count == 0 {
                return Err(Error::InvalidArgument("--count must be at least 1".into()));
            }
            std::fs::create_dir_all(&out_dir)?;
            let mut messages = Vec::with_capacity(count);
            for (i, env) in generate_corpus(cfg.seed, count).iter().enumerate() {
                let file = format!("msg-{i:04}.xml");
                let bytes = message_bytes(env);
                std::fs::write(out_dir.join(&file), &bytes)?;
                messages.push(ManifestEntry {
                    file,
                    message_id: message_id_or_digest(env),
                    sha256: hex::encode(sha256(&bytes)),
                });
            }
            let manifest = Manifest {
                seed: cfg.seed,
                count,
                messages,
            };
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            std::fs::write(out_dir.join("manifest.json"), format!("{json}\n"))?;
            writeln!(out, "wrote {count} messages to {}", out_dir.display())?;
            Ok(EXIT_ACCEPT)
        }
    }
}
