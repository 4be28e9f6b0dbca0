use thiserror::Error;

/// Errors raised by the soapguard library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed XML at byte {offset}: {reason}")]
    MalformedXml { offset: usize, reason: String },

    #[error("path {0:?} does not resolve to a node")]
    InvalidPath(Vec<usize>),

    #[error("the root element has no parent")]
    RootHasNoParent,

    #[error("reference {0:?} not found")]
    ReferenceNotFound(String),

    #[error("reference {0:?} is ambiguous: id appears more than once")]
    AmbiguousReference(String),

    #[error("reference {0:?} encloses the signature location")]
    ReferenceEnclosesSignature(String),

    #[error("root element {0:?} is not a SOAP Envelope")]
    NotAnEnvelope(String),

    #[error("bad timestamp {0:?}: expected YYYY-MM-DDThh:mm:ssZ")]
    BadTimestampFormat(String),

    #[error("unknown key id {0:?}")]
    UnknownKey(String),

    #[error("invalid key {id:?}: {reason}")]
    InvalidKey { id: String, reason: String },

    #[error("no Signature element found under a Security header")]
    NoSignatureFound,

    #[error("malformed signature: {0}")]
    MalformedSignature(String),

    #[error("malformed SoapAccount: {0}")]
    MalformedAccount(String),

    #[error("parent of {0:?} carries no identifier attribute")]
    MissingParentId(String),

    #[error("message already carries a Guard header")]
    AlreadyGuarded,

    #[error("message has no signed Body")]
    NoSignedBody,

    #[error("message carries no SoapAccount")]
    NoAccountPresent,

    #[error("need at least two independently signed elements")]
    NeedTwoSignedElements,

    #[error("invalid header name {0:?}")]
    InvalidHeaderName(String),

    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
