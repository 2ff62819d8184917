use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants map one-to-one to the numeric status codes exposed over the C ABI,
/// so new variants must be appended, never reordered.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no reciprocal eigenvalue pairing within tolerance (best residual {residual:.3e})")]
    PairingAmbiguous { residual: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("point lies on the circular locus, Delaunay angles undefined")]
    CircularLocus,
    #[error("point outside the Poincaré domain: {0}")]
    OutOfDomain(String),
    #[error(
        "state is not a positively oriented elliptic state (E = {energy:.6e}, M = {momentum:.6e})"
    )]
    NotElliptic { energy: f64, momentum: f64 },
    #[error("path passes within {0:.3e} of the origin")]
    PathThroughOrigin(f64),
    #[error("path endpoints differ by {0:.3e}")]
    NotClosed(f64),
    #[error("operation requires a linear (Fourier) forcing")]
    WrongKind,
    #[error("point outside the solid torus of radius^2 {limit:.6}")]
    OutOfTorus { limit: f64 },
    #[error("trajectory reached |x| = {radius:.3e} at t = {t:.6}")]
    CollisionGuard { t: f64, radius: f64 },
    #[error("step size control failed at t = {t:.6} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },
    #[error("shooting Jacobian is singular (smallest singular value {0:.3e})")]
    SingularJacobian(f64),
    #[error("continuation produced no branch point: {0}")]
    EmptyBranch(String),
    #[error("need at least {needed} usable branch points, have {have}")]
    InsufficientPoints { needed: usize, have: usize },
    #[error("forcing is off the manifold c0 = c2N = 0 (|c0| = {c0:.3e}, |c2N| = {c2n:.3e})")]
    OffManifold { c0: f64, c2n: f64 },
    #[error("c_N vanishes, equator critical points are not isolated")]
    DegenerateEquator,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
