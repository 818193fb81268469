use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by the zero polynomial")]
    DivisionByZero,

    #[error("polynomial parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("non-isolated equilibria (isolated-equilibria hypothesis violated): {0}")]
    NonIsolated(String),

    #[error("H degenerate on the boundary of the positive sphere octant")]
    DegenerateFirstIntegral,

    #[error("not yet on sphere: |L(x(T))| = {0:e}")]
    NotOnSphere(f64),

    #[error("critical noise intensity (not covered by the regime classification): sigma = {0}")]
    CriticalNoise(f64),

    #[error("no nontrivial stationary density on the ray: sigma^2 = {sigma_sq} >= 2*alpha = {two_alpha}")]
    NoStationaryDensity { sigma_sq: f64, two_alpha: f64 },

    #[error("step size underflow at t = {t} (last state {state:?})")]
    StepUnderflow { t: f64, state: [f64; 3] },

    #[error("non-finite state at step {step} (t = {t}); dt is likely too large")]
    BlowUp { step: usize, t: f64 },

    #[error("exp overflow in the pathwise transform at t = {t}; use a shorter horizon or stronger noise")]
    TransformOverflow { t: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StepUnderflow { .. }
            | Error::BlowUp { .. }
            | Error::TransformOverflow { .. }
            | Error::Quadrature(_)
            | Error::NotOnSphere(_) => 2,
            _ => 1,
        }
    }
}
