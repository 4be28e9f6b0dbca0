//! Reproduce XML signature-wrapping (rewriting) attacks on SOAP messages and
//! check them against three validators:
//!
//! - [`dsig::verify_naive`]: two-step XML-DSig verification, location-blind.
//! - [`account::verify_account`]: the SOAP Account structural header, including
//!   the relocation bypass it is known to miss.
//! - [`guard::verify_hardened`]: depth, parent name and unique parent id pinned
//!   per signed reference, plus signed MessageID/Timestamp with a replay store.
//!
//! [`attack`] holds the mutation generators, a seeded corpus of loan-request
//! messages and a deterministic handler-pipeline simulator.

pub mod account;
pub mod attack;
pub mod cli;
pub mod dsig;
pub mod error;
pub mod guard;
pub mod keystore;
pub mod replay;
pub mod report;
pub mod soap;
pub mod time;
pub mod xml;

pub use error::{Error, Result};
pub use keystore::KeyStore;
pub use replay::{ReplayStatus, ReplayStore};
pub use report::{Check, ValidatorMode, Verdict, VerificationReport};
pub use soap::{as_envelope, SoapEnvelope};
pub use time::UnixTime;
