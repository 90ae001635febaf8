use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors shared by all modules. Numeric routines never panic on bad input;
/// they return one of these with enough context to reconstruct the call.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Piece intervals leave a gap or overlap inside [0,1].
    BadCoverage { at: f64 },
    /// A density piece is non-positive somewhere on its interval.
    NotPositive { at: f64 },
    /// A density does not integrate to 1 within tolerance.
    NotNormalized { mass: f64 },
    /// A parameter is outside its documented domain.
    InvalidParameter { what: &'static str, value: f64 },
    /// Quadrature hit a non-finite integrand value at a point that carried
    /// no singularity annotation.
    UnannotatedSingularity { at: f64 },
    /// Adaptive quadrature failed to reach the requested tolerance.
    QuadratureStalled { error_bound: f64 },
    /// Two piecewise descriptors cannot be refined to a common lattice
    /// (for example two different infinite tail families).
    IncompatibleLattices,
    /// The operation needs a finite piece list but got an infinite tail.
    TailUnsupported { op: &'static str },
    /// A random variable that must be centered is not.
    NotCentered { offset: f64 },
    /// The requested arc parameter lies outside the validity interval.
    OutsideValidity { value: f64, lo: f64, hi: f64 },
    /// An operation with a connectivity precondition was called on a pair
    /// that is not connected.
    NotConnected,
    /// The normalizer of an exponential arc diverges at this parameter.
    DivergentNormalizer { theta: f64 },
    /// The modular decreased non-monotonically during bisection, which
    /// indicates an invalid Young function or integrand.
    NonMonotoneModular { k_lo: f64, k_hi: f64 },
    /// A witness list for a supremum-based bound was empty.
    NoWitnesses,
    /// Two independently computed verdicts that must agree do not.
    VerdictMismatch { context: String },
    /// The closure target must be a simple (piecewise constant) density.
    TargetNotSimple,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BadCoverage { at } => {
                write!(f, "piece intervals gap or overlap near x = {at}")
            }
            Error::NotPositive { at } => write!(f, "density is not strictly positive at x = {at}"),
            Error::NotNormalized { mass } => {
                write!(f, "density integrates to {mass}, expected 1")
            }
            Error::InvalidParameter { what, value } => {
                write!(f, "invalid parameter {what} = {value}")
            }
            Error::UnannotatedSingularity { at } => {
                write!(f, "integrand is non-finite at x = {at} with no singularity annotation")
            }
            Error::QuadratureStalled { error_bound } => {
                write!(f, "quadrature stalled with error bound {error_bound}")
            }
            Error::IncompatibleLattices => {
                write!(f, "piecewise descriptors cannot be refined to a common lattice")
            }
            Error::TailUnsupported { op } => {
                write!(f, "{op} does not support densities with infinite tails")
            }
            Error::NotCentered { offset } => {
                write!(f, "random variable has mean {offset}, expected 0")
            }
            Error::OutsideValidity { value, lo, hi } => {
                write!(f, "parameter {value} outside validity interval ({lo}, {hi})")
            }
            Error::NotConnected => write!(f, "precondition failed: densities are not connected"),
            Error::DivergentNormalizer { theta } => {
                write!(f, "arc normalizer diverges at theta = {theta}")
            }
            Error::NonMonotoneModular { k_lo, k_hi } => {
                write!(f, "modular is not non-increasing between k = {k_lo} and k = {k_hi}")
            }
            Error::NoWitnesses => write!(f, "witness list is empty"),
            Error::VerdictMismatch { context } => {
                write!(f, "independent verdicts disagree: {context}")
            }
            Error::TargetNotSimple => {
                write!(f, "closure target must be a simple (piecewise constant) density")
            }
        }
    }
}

impl core::error::Error for Error {}
