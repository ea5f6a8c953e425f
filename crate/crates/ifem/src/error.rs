use thiserror::Error;

/// Errors surfaced by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("interface assumption violated on element {element}: {detail}")]
    AssumptionViolation { element: usize, detail: String },

    #[error("degenerate interface cut on element {element}")]
    DegenerateCut { element: usize },

    #[error("local basis system on element {element} is ill conditioned (cond ~ {cond:.3e})")]
    IllConditioned { element: usize, cond: f64 },

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("root finding failed on element {element} while tracing the interface")]
    InterfaceTrace { element: usize },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<V> = std::result::Result<V, Error>;
