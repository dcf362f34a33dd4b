use thiserror::Error;

/// Everything that can go wrong while building or optimizing a deployment.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("no coverage: limit {limit:e} does not exceed the overhead value {floor:e}")]
    NoCoverage { limit: f64, floor: f64 },

    #[error("quadratic fit failed: a = {a:e}, b = {b:e}, c = {c:e}")]
    FitFailure { a: f64, b: f64, c: f64 },

    #[error("device {device} has no UAV satisfying the energy threshold")]
    Coverage { device: usize },

    #[error("device {device} cannot meet the SNR threshold at epoch {epoch}")]
    SnrInfeasible { device: usize, epoch: usize },

    #[error("disc constraints have an empty intersection")]
    InfeasibleRegion,

    #[error("no feasible placement for UAV {uav}")]
    InfeasiblePlacement { uav: usize },

    #[error("time allocation failed: {0}")]
    TimeAllocation(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("fairness is undefined when every throughput is zero")]
    UndefinedFairness,

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Short stable name of the error class, used in result tables.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Domain(_) => "domain",
            Error::Bracket { .. } => "bracket",
            Error::NoCoverage { .. } => "no-coverage",
            Error::FitFailure { .. } => "fit-failure",
            Error::Coverage { .. } => "coverage",
            Error::SnrInfeasible { .. } => "snr-infeasible",
            Error::InfeasibleRegion => "infeasible-region",
            Error::InfeasiblePlacement { .. } => "infeasible-placement",
            Error::TimeAllocation(_) => "time-allocation",
            Error::State(_) => "state",
            Error::UndefinedFairness => "undefined-fairness",
            Error::AtIteration { source, .. } => source.class(),
            Error::Invariant(_) => "invariant",
        }
    }

    /// Process exit code for the error class. Zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Domain(_) | Error::Bracket { .. } | Error::FitFailure { .. } => 3,
            Error::NoCoverage { .. } | Error::Coverage { .. } => 4,
            Error::SnrInfeasible { .. } => 5,
            Error::InfeasibleRegion | Error::InfeasiblePlacement { .. } => 6,
            Error::TimeAllocation(_) => 7,
            Error::State(_) | Error::UndefinedFairness => 8,
            Error::AtIteration { source, .. } => source.exit_code(),
            Error::Invariant(_) => 9,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration { iteration, source: Box::new(e) },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
