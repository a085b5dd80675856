use crate::expr::ExprError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("positivity lost at node ({i}, {j}): p = {p}, q = {q}")]
    PositivityLoss { i: usize, j: usize, p: f64, q: f64 },
    #[error("fixed-point iteration did not converge at node ({i}, {j}) after {iterations} iterations")]
    NonConvergence { i: usize, j: usize, iterations: usize },
    #[error("discrete monotonicity of {field} violated at node ({i}, {j}) by {amount:e}")]
    Monotonicity { field: &'static str, i: usize, j: usize, amount: f64 },
    #[error("point (X, Y) = ({x}, {y}) lies outside the solved region")]
    OutOfDomain { x: f64, y: f64 },
    #[error("time {t} is not attained inside the solved region")]
    NotAttained { t: f64 },
    #[error("perturbation pattern cannot be realised: {0}")]
    PatternInfeasible(String),
    #[error("relabeling map '{0}' is not strictly increasing")]
    NotIncreasing(String),
    #[error("relabeling map '{0}' is not affine")]
    NotAffine(String),
}

pub type Result<T> = std::result::Result<T, Error>;
