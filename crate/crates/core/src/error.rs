use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sampled field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Lorentz quasi-norm is not finite: {0}")]
    NonFiniteNorm(String),

    #[error("truncation schedule exhausted at k = {last_k:e} without stabilization (last value {last_value})")]
    ScheduleExhausted { last_k: f64, last_value: f64 },

    #[error("no mesh and no override value given for the Sobolev constant S(N = {n}, p = {p})")]
    MissingOverride { n: usize, p: f64 },

    #[error("<H(x) xi, xi> = {value:e} < 0 at x = {x:?}: H is not positive semidefinite")]
    NonSpdMatrix { x: Vec<f64>, value: f64 },

    #[error(
        "distance condition violated: dist_(N,inf)(b, L^inf) = {distance:.6} is not below \
         alpha^(1/p) / S = {threshold:.6} (S = {sobolev:.6}, {provenance})"
    )]
    DistanceTooLarge {
        distance: f64,
        threshold: f64,
        sobolev: f64,
        provenance: String,
    },

    #[error("functions are defined on different meshes")]
    MeshMismatch,

    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    #[error("fixed-point iteration diverged after {iterations} iterations: W^(1,p) norm grew from {initial_norm:e} to {last_norm:e}")]
    PicardDiverged {
        iterations: usize,
        initial_norm: f64,
        last_norm: f64,
        norm_history: Vec<f64>,
    },

    #[error("fixed-point iteration stagnated after {iterations} iterations (last increment {last_increment:e})")]
    Stagnated {
        iterations: usize,
        last_increment: f64,
    },

    #[error("truncation levels exhausted without stabilization: last level difference {last_difference:e} after {levels} levels")]
    SchemeNotCauchy { levels: usize, last_difference: f64 },

    #[error("obstacle shift is not admissible at node {node}: {detail}")]
    NotAdmissible { node: usize, detail: String },

    #[error("projected iteration stalled after {iterations} iterations (complementarity residual {residual:e})")]
    ProjectionStalled { iterations: usize, residual: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("singular matrix (zero pivot at row {row})")]
    SingularMatrix { row: usize },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
