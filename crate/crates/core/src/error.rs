use alloc::string::String;

/// Errors raised by the homogenization pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("basis index {index} outside [{first}, {last}]")]
    IndexOutOfRange { index: isize, first: isize, last: isize },

    #[error("derivative order {order} exceeds spline degree {degree}")]
    UnsupportedOrder { order: usize, degree: usize },

    #[error(
        "dimension {dim}: {cells} cells cannot carry a periodic degree-{degree} basis \
         (need at least {} cells so no basis overlaps its own image)", degree + 1
    )]
    SelfOverlap { dim: usize, cells: usize, degree: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("point outside the unit cell: {0}")]
    OutsideCell(String),

    #[error("rotation is not proper orthogonal (deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("invalid material: {0}")]
    Material(String),

    #[error("ill-conditioned material: {0}")]
    Conditioning(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dof vector has length {got}, expected {expected}")]
    DofLength { expected: usize, got: usize },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular factorization at pivot {pivot} (value {value:e}); suspects: {suspects}")]
    Singular { pivot: usize, value: f64, suspects: String },

    #[error("macroscopic stress oracle unavailable: {0}")]
    OracleUnavailable(String),
}

pub type Result<T> = core::result::Result<T, Error>;
