use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Per-class shortfall reported when a split cannot be satisfied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub class: usize,
    pub required: usize,
    pub available: usize,
}

impl core::fmt::Display for Shortfall {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "class {} needs {} rows, has {}",
            self.class, self.required, self.available
        )
    }
}

fn join_shortfalls(s: &[Shortfall]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, item) in s.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{item}");
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("loss must be 1x1, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("loss function is not deterministic: {first} != {second}")]
    Determinism { first: f64, second: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate confidences: o + o' must be positive")]
    DegenerateConfidence,
    #[error("training diverged in {stage} at step {step}: {detail}")]
    Training {
        stage: &'static str,
        step: usize,
        detail: String,
    },
    #[error("evaluation protocol error: {0}")]
    Protocol(String),
    #[error("infeasible split: {}", join_shortfalls(.0))]
    InfeasibleSplit(Vec<Shortfall>),
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension { op, left, right }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
