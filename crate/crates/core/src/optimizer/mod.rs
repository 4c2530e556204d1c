//! Strong-Wolfe line search, dense BFGS and β-continuation.

mod bfgs;
mod line_search;
mod tigra;

pub use bfgs::{bfgs_minimize, BfgsOptions, BfgsOutcome, BfgsStatus};
pub use line_search::{wolfe_line_search, LineSearchResult, WolfeConditions};
pub use tigra::{default_initial_design, tigra_solve, ContinuationSchedule, SolveReport, StepRecord};
