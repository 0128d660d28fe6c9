use thiserror::Error;

/// Errors produced by instance validation, the solvers and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate mode mismatch: {0:?} vs {1:?}")]
    ModeMismatch(crate::geo::CoordMode, crate::geo::CoordMode),

    #[error("solver {solver} does not apply to {instance} instances")]
    ModeMismatchProblem {
        solver: &'static str,
        instance: &'static str,
    },

    #[error("invalid coordinate ({x}, {y}) for {mode:?} mode")]
    InvalidCoordinate {
        mode: crate::geo::CoordMode,
        x: f64,
        y: f64,
    },

    #[error("{what}: size {got} exceeds limit {limit}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("enumeration needs {routes} routes, budget is {budget}; use pruned enumeration (smaller k)")]
    EnumerationBudget { routes: u128, budget: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("requested flow value {requested} exceeds maximum flow {maximum}")]
    InfeasibleFlowValue { requested: i64, maximum: i64 },

    #[error("no candidate task sets")]
    NoCandidates,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("incentive budget {budget} is below the minimum attainable incentive {c_min}")]
    InfeasibleBudget { budget: f64, c_min: f64 },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: i64, expected: i64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
