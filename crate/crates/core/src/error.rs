use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("window too small to hold at least two points")]
    WindowTooSmall,
    #[error("saturation audit failed after {attempts} attempts ({remaining} insertable audit sites left)")]
    SaturationFailed { attempts: usize, remaining: usize },
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error("matrix is not orthogonal (deviation {0:e})")]
    NotOrthogonal(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("k = {k} must be in 1..{n}")]
    InvalidK { k: usize, n: usize },
    #[error("forward-difference edges need an unjittered cubic lattice")]
    NotCubic,
    #[error("no path between {from} and {to} inside the tube")]
    NoPath { from: usize, to: usize },
    #[error("path between {from} and {to} has {len} points, above the bound {bound:.3}")]
    PathTooLong { from: usize, to: usize, len: usize, bound: f64 },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("axiom {axiom} violated: {witness}")]
    AxiomViolated { axiom: &'static str, witness: String },
    #[error("negative multiset entry {0}")]
    NegativeEntry(f64),
    #[error("multiset holds {len} entries, more than the bound {max}")]
    MultisetOverflow { len: usize, max: usize },
    #[error("invalid beta arguments l = {l}, k = {k}")]
    InvalidBeta { l: usize, k: usize },
    #[error("invalid energy parameters: {0}")]
    InvalidParams(String),
    #[error("site {0} lies outside the region")]
    SiteOutsideRegion(usize),
    #[error("value at site {0} is not in {{+e1, -e1}}")]
    NonBinary(usize),
    #[error("fields live on different lattices or scales: {0}")]
    FieldMismatch(String),
    #[error("cell {0} has zero volume")]
    ZeroVolume(usize),
    #[error("conjugate gradient did not converge: residual {residual:e} after {iterations} iterations")]
    CgNotConverged { residual: f64, iterations: usize },
    #[error("unsupported solver input: {0}")]
    Unsupported(String),
    #[error("search space of {0} fields is too large")]
    SearchSpaceTooLarge(f64),
    #[error("invalid cell problem: {0}")]
    InvalidCellProblem(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
