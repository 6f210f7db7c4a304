use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("polygon is not convex")]
    NonConvexPolygon,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate lattice: generators at angles {phi} and {eta} are collinear")]
    DegenerateLattice { phi: f64, eta: f64 },
    #[error("no swap/negation of the generators satisfies the sign conditions (phi={phi}, eta={eta})")]
    NormalizationFailed { phi: f64, eta: f64 },
    #[error("degenerate simplex: interpolation points are collinear")]
    DegenerateSimplex,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("inadmissible parameters: strip spacing {value} is not positive")]
    InadmissibleSpacing { value: f64 },
    #[error(
        "domain too small: strip {strip} needs width {width} but only {available} is available \
         (theta must be at least {min_theta} rad)"
    )]
    DomainTooSmall { strip: u8, width: f64, available: f64, min_theta: f64 },
    #[error(
        "theta too large: strip spacing {r_bar} does not exceed the core radius {core}; \
         the maximal admissible theta is {max_theta} rad"
    )]
    ThetaTooLarge { r_bar: f64, core: f64, max_theta: f64 },
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
