use std::fmt;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Whole seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnixTime(pub i64);

impl UnixTime {
    pub fn now() -> Self {
        UnixTime(Utc::now().timestamp())
    }

    /// Parses the `YYYY-MM-DDThh:mm:ssZ` form used in Timestamp headers.
    pub fn parse_iso(s: &str) -> Result<Self> {
        NaiveDateTime::parse_from_str(s.trim(), ISO_FORMAT)
            .map(|dt| UnixTime(dt.and_utc().timestamp()))
            .map_err(|_| Error::BadTimestampFormat(s.to_string()))
    }

    pub fn to_iso(self) -> String {
        DateTime::<Utc>::from_timestamp(self.0, 0)
            .map(|dt| dt.format(ISO_FORMAT).to_string())
            .unwrap_or_else(|| self.0.to_string())
    }

    pub fn plus(self, secs: i64) -> Self {
        UnixTime(self.0 + secs)
    }

    pub fn abs_diff(self, other: UnixTime) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for UnixTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}
