use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed scalar {0}: denominator is divisible by p = {1}")]
    MalformedScalar(String, u64),
    #[error("modulus exponent must be positive")]
    EmptyModulus,
    #[error("expected a p-adic unit, got {0}")]
    NonUnit(String),
    #[error("operation is unsupported at p = {0}")]
    UnsupportedPrime(u64),
    #[error("quadratic has no root modulo p compatible with the seed")]
    NoRoot,
    #[error("seed is not a simple root modulo p; Hensel lifting fails")]
    HenselFailure,
    #[error("malformed polynomial: {0}")]
    MalformedPolynomial(String),
    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),
    #[error("ambient rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("antisymmetry violated at basis pair ({0}, {1})")]
    Antisymmetry(usize, usize),
    #[error("Jacobi identity violated at basis triple ({0}, {1}, {2})")]
    Jacobi(usize, usize, usize),
    #[error("structure constant at ({0}, {1}) is not p-integral")]
    NonIntegralConstant(usize, usize),
    #[error("submodule is not closed under the bracket")]
    NotClosed,
    #[error("matrix is singular")]
    Singular,
    #[error("not a subalgebra: bracket of generators {0} and {1} leaves the module")]
    NotSubalgebra(usize, usize),
    #[error("not a homomorphism of algebras: mismatch at basis pair ({0}, {1})")]
    NotHomomorphism(usize, usize),
    #[error("matrix rows 0,i must vanish for i >= 1: F_{{0,{0}}} is nonzero")]
    ForcedZeroRow(usize),
    #[error("family parameter out of domain: {0}")]
    OutOfDomain(String),
    #[error("input lattice is not solvable")]
    Unsolvable,
    #[error("no explicit certificate construction covers this tag")]
    NoCertificate,
    #[error("lattice does not match the required presentation shape: {0}")]
    ShapeMismatch(String),
    #[error("candidate submodule is not an ideal modulo p^{0}")]
    CandidateNotIdeal(u32),
    #[error("unknown family name: {0}")]
    UnknownFamily(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
