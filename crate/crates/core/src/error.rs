use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("diffusion coefficient must be positive (min p = {min_p:e})")]
    NonPositiveDiffusion { min_p: f64 },

    #[error("coefficient bounds violated: {0}")]
    CoefficientBounds(String),

    #[error("grid of {grid_size} intervals is too coarse for {n_modes} modes (need at least {required})")]
    ResolutionTooCoarse {
        grid_size: usize,
        n_modes: usize,
        required: usize,
    },

    #[error("eigenvalue bound violated at mode {mode}: lower margin {lower:e}, upper margin {upper:e}")]
    BoundViolation { mode: usize, lower: f64, upper: f64 },

    #[error("sampled function has {got} points, spectrum grid has {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("derivative of p is required for the lifting function")]
    MissingDerivative,

    #[error("boundary measurement requires a C2 diffusion coefficient")]
    InsufficientSmoothness,

    #[error("spectrum has {available} modes, {required} required")]
    InsufficientModes { available: usize, required: usize },

    #[error("decay rate {delta} unreachable: -lambda_n + q_c >= -delta for every computed mode (raise n_modes)")]
    DecayUnreachable { delta: f64 },

    #[error("epsilon {0} outside (0, 1/2]")]
    EpsOutOfRange(f64),

    #[error("(A1, B1) is not controllable (relative singular value {0:e})")]
    UncontrollablePair(f64),

    #[error("(A0, C0) is not observable (relative singular value {0:e})")]
    UnobservablePair(f64),

    #[error("requested pole {pole} is not faster than -delta = {neg_delta}")]
    PoleTooSlow { pole: f64, neg_delta: f64 },

    #[error("observer order N = {n} must be at least N0 + 1 = {min}")]
    OrderTooSmall { n: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("F + delta I is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitzShifted { abscissa: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("no certificate found for N0+1 <= N <= {n_max}")]
    NoFeasibleN { n_max: usize },

    #[error("simulation order mismatch: {0}")]
    OrderMismatch(String),

    #[error("initial condition incompatible with boundary conditions: {0}")]
    IncompatibleInitialCondition(String),

    #[error("state transition matrix overflows over the horizon (log-norm bound {0:e})")]
    StepRejected(f64),

    #[error("a feasible certificate is required")]
    CertificateRequired,

    #[error("series must be positive on the fit window")]
    NonPositiveSeries,

    #[error("SDPA format: {0}")]
    SdpaFormat(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
