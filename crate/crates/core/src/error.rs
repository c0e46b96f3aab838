use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Input outside the domain of the operation (zero vector, zero quaternion).
    Domain(&'static str),
    /// A chain product was asked for over zero inputs.
    EmptyChain,
    /// Width or shape of an argument does not match what the callee expects.
    WidthMismatch { what: &'static str, expected: usize, got: usize },
    /// A backward pass was handed a tape from a different forward call.
    TapeMismatch { expected: usize, got: usize },
    LabelOutOfRange { label: usize, classes: usize },
    /// An edge collapsed to zero length after perturbation.
    DegenerateEdge { index: usize },
    InvalidConfig(&'static str),
    /// A layer received quaternions where it expects reals, or vice versa.
    SignalKind(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::EmptyChain => f.write_str("chain product over zero inputs"),
            Error::WidthMismatch { what, expected, got } => {
                write!(f, "{what}: expected width {expected}, got {got}")
            }
            Error::TapeMismatch { expected, got } => {
                write!(f, "tape holds {got} entries but {expected} inputs were given")
            }
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::DegenerateEdge { index } => write!(f, "edge {index} has zero length"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::SignalKind(msg) => write!(f, "signal kind mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_width(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::WidthMismatch { what, expected, got })
    }
}
