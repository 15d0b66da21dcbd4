use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilneError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid spacing is not uniform (relative deviation {0:e})")]
    NonUniformGrid(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("potential has no single interior minimum on the grid")]
    NoMinimum,
    #[error("energy {energy} is not below the potential at both grid edges ({left}, {right})")]
    EnergyOutOfRange { energy: f64, left: f64, right: f64 },
    #[error("expected exactly two resolvable turning points, found {0} sign changes of p^2")]
    DegenerateTurningPoints(usize),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("Wronskian is not constant near the potential minimum (relative spread {0:e})")]
    InconsistentWronskian(f64),
    #[error("n(E) = {0} is too close to an integer for the requested construction")]
    EigenvalueDegenerate(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("W^2 = {w2} is not below 4 I^2 = {four_i2}; c_o would be complex")]
    RealityViolated { w2: f64, four_i2: f64 },
    #[error("coefficient matrix is not positive definite (det {det:e}, trace {trace:e})")]
    NotPositiveDefinite { det: f64, trace: f64 },
    #[error("amplitude squared became non-positive at x = {0}")]
    NegativeQuadraticForm(f64),
    #[error("integrated phase disagrees with the closed form at {fraction:.4} of samples (max {max_dev:e})")]
    PhaseUnwrapMismatch { fraction: f64, max_dev: f64 },
    #[error("reconstructed basis deviates by {0:e} (relative max norm)")]
    ReconstructionMismatch(f64),
    #[error("inverted-pair identity violated: {0:e}")]
    InvertedMismatch(f64),
    #[error("c-band undefined at x = {0}")]
    BandUndefined(f64),
    #[error("could not bracket eigenvalue n = {0} inside the bound energy window")]
    BracketNotFound(usize),
    #[error("energy {energy} lies outside the tabulated spectrum [{lo}, {hi}]")]
    OutOfRange { energy: f64, lo: f64, hi: f64 },
    #[error("arccos argument {0} outside [-1, 1]")]
    ArccosDomain(f64),
    #[error("derivative vanishes at sample {0}")]
    DerivativeVanishes(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MilneError {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            MilneError::Config(_)
                | MilneError::Io(_)
                | MilneError::Csv(_)
                | MilneError::Json(_)
                | MilneError::InvalidGrid(_)
                | MilneError::NonUniformGrid(_)
                | MilneError::InvalidPotential(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MilneError>;
