//! Error type shared by every module of the core crate.

use core::fmt;

/// Errors raised while building or running codes, trellises, decoders and
/// CRC searches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A polynomial numeral contained a character that is not a digit of
    /// the requested base.
    InvalidDigit {
        /// Offending character.
        digit: char,
        /// Base being parsed (8 or 16).
        radix: u32,
    },
    /// An empty numeral was given.
    EmptyNumeral,
    /// Division by the zero polynomial.
    ZeroDivisor,
    /// The CRC polynomial is not usable: degree 0, degree above 63 or a
    /// zero constant term.
    InvalidCrc,
    /// The parity-check matrix violates a structural requirement.
    InvalidParityCheck(&'static str),
    /// No rail of the parity-check matrix has a nonzero constant term, so
    /// the dual trellis is undefined.
    UndefinedDualTrellis,
    /// A code configuration is inconsistent.
    InvalidConfig(&'static str),
    /// `K + m` is not a multiple of `n - 1`.
    NotDivisible {
        /// Information plus CRC bits.
        bits: usize,
        /// Number of input rails.
        rails: usize,
    },
    /// Input length does not match what the operation expects.
    LengthMismatch {
        /// Expected number of elements.
        expected: usize,
        /// Number of elements supplied.
        found: usize,
    },
    /// A state cannot be driven back to zero within the termination budget.
    Unterminable {
        /// Primal encoder state.
        state: u32,
    },
    /// No initial state satisfies the tail-biting condition for this
    /// message.
    NoTailBitingState,
    /// The weight threshold of a CRC search left some candidate without any
    /// undetected path, so the winner cannot be certified.
    InsufficientThreshold {
        /// Threshold that was used.
        d_tilde: u32,
        /// Smallest threshold worth retrying with.
        hint: u32,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDigit { digit, radix } => {
                write!(f, "invalid base-{radix} digit {digit:?}")
            }
            Error::EmptyNumeral => write!(f, "empty polynomial numeral"),
            Error::ZeroDivisor => write!(f, "division by the zero polynomial"),
            Error::InvalidCrc => write!(f, "CRC polynomial must have degree 1..=63 and constant term 1"),
            Error::InvalidParityCheck(why) => write!(f, "invalid parity-check matrix: {why}"),
            Error::UndefinedDualTrellis => {
                write!(f, "no parity polynomial has constant term 1; dual trellis undefined")
            }
            Error::InvalidConfig(why) => write!(f, "invalid code configuration: {why}"),
            Error::NotDivisible { bits, rails } => write!(
                f,
                "K + m = {bits} is not divisible by n - 1 = {rails} (blocklength constraint)"
            ),
            Error::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} elements, found {found}")
            }
            Error::Unterminable { state } => {
                write!(f, "state {state} cannot reach the zero state")
            }
            Error::NoTailBitingState => {
                write!(f, "no initial state satisfies the tail-biting condition")
            }
            Error::InsufficientThreshold { d_tilde, hint } => write!(
                f,
                "weight threshold {d_tilde} too small to rank CRC candidates; retry with at least {hint}"
            ),
        }
    }
}

impl core::error::Error for Error {}
