use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest-point search did not converge for ({x}, {y})")]
    NoConvergence { x: f64, y: f64 },
    #[error("unsupported degree {degree} (supported: {min}..={max})")]
    UnsupportedDegree { degree: usize, min: usize, max: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("singular or inverted geometry in element {element} (det = {det:e})")]
    SingularGeometry { element: usize, det: f64 },
    #[error("eigensolver did not converge after {iterations} iterations ({converged} of {requested} pairs)")]
    NotConverged {
        iterations: usize,
        converged: usize,
        requested: usize,
    },
    #[error("inner linear solve failed: {0}")]
    InnerSolveFailure(String),
    #[error("Gram matrix of the reference eigenspace is numerically singular")]
    SingularGram,
    #[error("bad sequence: {0}")]
    BadSequence(String),
    #[error("study stopped at level {level}: {source}")]
    PartialReport {
        level: usize,
        source: Box<Error>,
        report: Box<crate::analysis::StudyReport>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
