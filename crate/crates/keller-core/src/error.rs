use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the geometry, simulation, imaging, and design layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two points that must be distinct coincide. The payload names the pair.
    CoincidentPoints(&'static str),
    /// A quantity that must be strictly positive is not.
    NonPositive(&'static str),
    /// A vector that must have unit (or nonzero) norm does not.
    DegenerateVector(&'static str),
    /// Bisector steering is undefined: the two unit vectors cancel.
    DegenerateOrientation,
    /// Two grids that must share dimensions do not.
    GridMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Scene validation failed; the payload names the offending entity.
    InvalidScene(String),
    /// A partition assignment violates its invariants.
    InvalidAssignment(String),
    /// Some focal targets cannot be reached by any lattice element.
    UnreachableTargets(Vec<usize>),
    /// An angle argument lies outside its admissible interval.
    AngleOutOfRange(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::CoincidentPoints(what) => write!(f, "coincident points: {what}"),
            Error::NonPositive(what) => write!(f, "{what} must be strictly positive"),
            Error::DegenerateVector(what) => write!(f, "degenerate vector: {what}"),
            Error::DegenerateOrientation => {
                write!(f, "bisector undefined: incident and exit directions cancel")
            }
            Error::GridMismatch { expected, got } => write!(
                f,
                "grid dimensions mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::InvalidScene(what) => write!(f, "invalid scene: {what}"),
            Error::InvalidAssignment(what) => write!(f, "invalid assignment: {what}"),
            Error::UnreachableTargets(ts) => {
                write!(f, "no eligible element for target(s): {ts:?}")
            }
            Error::AngleOutOfRange(what) => write!(f, "angle out of range: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
