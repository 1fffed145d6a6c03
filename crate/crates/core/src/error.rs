use thiserror::Error;

pub type Result<T, E = TtmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TtmError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode {mode} has dimension {dim}, above the supported maximum of {max}")]
    DimensionTooLarge { mode: usize, dim: usize, max: usize },

    #[error("eigensolver did not reach the residual tolerance (relative residual {residual:.3e})")]
    EigenNonConvergence { residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("vertex matrix is numerically singular (condition ratio {ratio:.3e})")]
    SingularVertices { ratio: f64 },

    #[error("topic {topic} has non-positive scale q0 = {value:.3e}; check the mode-3 rank")]
    NonPositiveScale { topic: usize, value: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<TtmError>,
    },
}

impl TtmError {
    /// True when the input was well formed but the estimator could not
    /// produce a valid model (singular vertices, dropped rows, q0 ≤ 0...).
    pub fn is_fit_degenerate(&self) -> bool {
        match self {
            TtmError::Degenerate(_)
            | TtmError::SingularVertices { .. }
            | TtmError::NonPositiveScale { .. }
            | TtmError::EigenNonConvergence { .. } => true,
            TtmError::Stage { source, .. } => source.is_fit_degenerate(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| TtmError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
