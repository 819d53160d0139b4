use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate evaluation: |D(jw)| = {magnitude:e} at w = {omega}")]
    DegenerateEvaluation { omega: f64, magnitude: f64 },

    #[error("eigenvalue computation failed for a {0}x{0} companion matrix")]
    EigenSolver(usize),

    #[error("transfer function is not Hurwitz (pole with real part {max_real_part})")]
    NotHurwitz { max_real_part: f64 },

    #[error("circle condition requires rho1 < 0 < rho2, got ({rho1}, {rho2}); use check_positive_real")]
    WrongCircleCondition { rho1: f64, rho2: f64 },

    #[error("repeated poles (separation {separation:e}) are not supported by the modal form")]
    RepeatedPoles { separation: f64 },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("could not bracket the equilibrium for v_ref = {v_ref}")]
    BracketFailure { v_ref: f64 },

    #[error("closed loop is unstable (pole with real part {max_real_part}); increase k")]
    UnstableClosedLoop { max_real_part: f64 },

    #[error("simulation diverged at t = {time} s (|x| = {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("numerical failure at t = {time} s: {reason}")]
    Numerical { time: f64, reason: String },

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("multisine aliasing: N_f = {n_f} must be below N/2 = {half}")]
    Aliasing { n_f: usize, half: usize },

    #[error("grid point {index} (v_ref = {v_ref}) did not settle: drift {drift:e} > {limit:e}")]
    NotSettled {
        index: usize,
        v_ref: f64,
        drift: f64,
        limit: f64,
    },

    #[error("regression matrix is ill-conditioned (cond = {condition:e}); use a wider and finer grid")]
    IllConditioned { condition: f64 },

    #[error("excitation hole at bin {bin}: |V_r| = {magnitude:e}")]
    ExcitationHole { bin: usize, magnitude: f64 },

    #[error("rational fit did not converge after {iterations} iterations (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("fitted model is unstable and pole reflection degrades the residual by {degradation:.3}")]
    UnstableFit { degradation: f64 },

    #[error("ill-posed recovery: leading coefficient of 1 - G_k is {leading:e}")]
    IllPosedRecovery { leading: f64 },

    #[error("NRMSE undefined for a constant reference signal")]
    UndefinedNrmse,

    #[error("missing artifact {0}; run the previous stage first")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DegenerateEvaluation { .. } => "degenerate_evaluation",
            Error::EigenSolver(_) => "eigen_solver",
            Error::NotHurwitz { .. } => "not_hurwitz",
            Error::WrongCircleCondition { .. } => "wrong_condition",
            Error::RepeatedPoles { .. } => "repeated_poles",
            Error::UnknownModel(_) => "unknown_model",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::BracketFailure { .. } => "bracket_failure",
            Error::UnstableClosedLoop { .. } => "unstable_closed_loop",
            Error::Divergence { .. } => "divergence",
            Error::Numerical { .. } => "numerical",
            Error::Realization { .. } => "realization",
            Error::Aliasing { .. } => "aliasing",
            Error::NotSettled { .. } => "not_settled",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::ExcitationHole { .. } => "excitation_hole",
            Error::NonConvergence { .. } => "non_convergence",
            Error::UnstableFit { .. } => "unstable_fit",
            Error::IllPosedRecovery { .. } => "ill_posed_recovery",
            Error::UndefinedNrmse => "undefined_nrmse",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }
}
