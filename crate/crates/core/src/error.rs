use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("quadrature on [{a}, {b}] reached error {achieved:e}, requested {requested:e}")]
    Quadrature {
        a: f64,
        b: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("no delta-fine tag found on [{a}, {b}] after {depth} bisections")]
    GaugeTooFine { a: f64, b: f64, depth: usize },

    #[error(
        "gauge sums did not settle after {rounds} rounds: last two sums {previous:?} and {last:?} differ by {difference:e}"
    )]
    ReferenceNotConverged {
        rounds: usize,
        previous: Vec<f64>,
        last: Vec<f64>,
        difference: f64,
    },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("singular jump factor at t = {time}: {detail}")]
    SingularJump { time: f64, detail: String },

    #[error("no hyperbolic splitting: {0}")]
    NotHyperbolic(String),

    #[error("matrix is not a projection: |P^2 - P| = {residual:e}")]
    NotProjection { residual: f64 },

    #[error("initial point is not in the stable subspace: residual {residual:e}")]
    NotInStableSpace { residual: f64 },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("fixed-point iteration is not contracting; successive ratios {ratios:?}")]
    NotContracting { ratios: Vec<f64> },

    #[error("fixed-point iteration stopped after {max_iter} sweeps with residual {residual:e}")]
    MaxIterations { max_iter: usize, residual: f64 },

    #[error("hypothesis {condition} failed: {witness}")]
    Hypothesis { condition: String, witness: String },

    #[error("bracket [{lo}, {hi}] shows no sign change")]
    NoBracket { lo: f64, hi: f64 },

    #[error("unknown registry entry `{0}`")]
    UnknownRegistry(String),
}

impl Error {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Quadrature { .. } => "quadrature",
            Error::GaugeTooFine { .. } => "gauge_too_fine",
            Error::ReferenceNotConverged { .. } => "reference_not_converged",
            Error::Integrator { .. } => "integrator",
            Error::SingularJump { .. } => "singular_jump",
            Error::NotHyperbolic(_) => "not_hyperbolic",
            Error::NotProjection { .. } => "not_projection",
            Error::NotInStableSpace { .. } => "not_in_stable_space",
            Error::MeshMismatch(_) => "mesh_mismatch",
            Error::NotContracting { .. } => "not_contracting",
            Error::MaxIterations { .. } => "max_iterations",
            Error::Hypothesis { .. } => "hypothesis",
            Error::NoBracket { .. } => "no_bracket",
            Error::UnknownRegistry(_) => "unknown_registry",
        }
    }

    /// True for failures caused by an iteration or tolerance not being met.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::GaugeTooFine { .. }
                | Error::ReferenceNotConverged { .. }
                | Error::Integrator { .. }
                | Error::MaxIterations { .. }
                | Error::NotContracting { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
