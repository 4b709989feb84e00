use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unsupported security level: {0} bits")]
    UnsupportedSecurityLevel(u32),
    #[error("operands belong to different pairing contexts")]
    ContextMismatch,
    #[error("hash input must be non-empty")]
    EmptyHashInput,
    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("role hierarchy contains a cycle through role {0}")]
    CycleDetected(String),
    #[error("unknown role: {0}")]
    UnknownRole(String),
    #[error("duplicate role: {0}")]
    DuplicateRole(String),
    #[error("role hierarchy is empty")]
    EmptyHierarchy,
    #[error("role {0} is an ancestor-closure of every role, so its complement set is empty")]
    DegenerateRole(String),

    #[error("RevokedUser: no public key on the bulletin board for {0}")]
    RevokedUser(String),
    #[error("unknown user: {0}")]
    UnknownUser(String),
    #[error("UnauthorizedRole: {held} is not an ancestor of {target}")]
    UnauthorizedRole { held: String, target: String },
    #[error("MissingComponent: ciphertext lacks the component for role {0}")]
    MissingComponent(String),
    #[error("joint role keys need two distinct organizations, got {0} twice")]
    SameOrganization(String),
    #[error("MissingReKey: organization {host} holds no re-encryption key for {guest}")]
    MissingReKey { host: String, guest: String },
    #[error("AuthFailure: payload authentication failed")]
    AuthFailure,
    #[error("authentication of {0} was rejected")]
    AuthenticationRejected(String),
    #[error("key material mismatch: {0}")]
    KeyMismatch(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures caused by cryptographic or protocol state, as
    /// opposed to malformed input or I/O.
    pub fn is_crypto(&self) -> bool {
        matches!(
            self,
            Error::RevokedUser(_)
                | Error::UnauthorizedRole { .. }
                | Error::MissingComponent(_)
                | Error::MissingReKey { .. }
                | Error::AuthFailure
                | Error::AuthenticationRejected(_)
                | Error::KeyMismatch(_)
                | Error::UnknownUser(_)
                | Error::SameOrganization(_)
                | Error::Protocol(_)
        )
    }

    /// Variant name, as used by `expect` clauses in scenario scripts.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnsupportedSecurityLevel(_) => "UnsupportedSecurityLevel",
            Error::ContextMismatch => "ContextMismatch",
            Error::EmptyHashInput => "EmptyHashInput",
            Error::Decode(_) => "Decode",
            Error::CycleDetected(_) => "CycleDetected",
            Error::UnknownRole(_) => "UnknownRole",
            Error::DuplicateRole(_) => "DuplicateRole",
            Error::EmptyHierarchy => "EmptyHierarchy",
            Error::DegenerateRole(_) => "DegenerateRole",
            Error::RevokedUser(_) => "RevokedUser",
            Error::UnknownUser(_) => "UnknownUser",
            Error::UnauthorizedRole { .. } => "UnauthorizedRole",
            Error::MissingComponent(_) => "MissingComponent",
            Error::SameOrganization(_) => "SameOrganization",
            Error::MissingReKey { .. } => "MissingReKey",
            Error::AuthFailure => "AuthFailure",
            Error::AuthenticationRejected(_) => "AuthenticationRejected",
            Error::KeyMismatch(_) => "KeyMismatch",
            Error::Protocol(_) => "Protocol",
            Error::Io(_) => "Io",
        }
    }
}
