//! Solving queries: SMT-LIB2 emission, an external solver driver, and an
//! exhaustive-search engine for small instances.

mod brute;
mod emit;
mod scalarize;
mod solver;

use std::sync::{Arc, Mutex};
use std::time::Duration;

pub use brute::{brute_force, cone_bits, BruteConfig};
pub use emit::{demangle, emit_smtlib, mangle, reprint, SmtScript};
pub use solver::{solve, SolverConfig};

use crate::query::{Query, QueryError};
use crate::value::{UfTable, Valuation};

/// A satisfying assignment: values for the query's roots plus the
/// uninterpreted-function entries the formula depends on.
#[derive(Clone, Debug)]
pub struct Model {
    pub values: Valuation,
    pub ufs: UfTable,
}

#[derive(Clone, Debug)]
pub enum SolveStatus {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SolveStatus {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveStatus::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveStatus::Unsat)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolveStatus::Sat(_) => "sat",
            SolveStatus::Unsat => "unsat",
            SolveStatus::Unknown(_) => "unknown",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub engine: &'static str,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum SolveError {
    #[error("solver unavailable: {0}")]
    EngineUnavailable(String),
    #[error("cannot parse solver output: {message}\n--- solver output ---\n{output}")]
    Parse { message: String, output: String },
    #[error("query needs {needed} free bits, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("malformed query: {0}")]
    Query(#[from] QueryError),
}

/// Collects every query sent to an external solver.
pub type QueryLog = Arc<Mutex<Vec<Query>>>;

/// How queries get decided.
#[derive(Clone, Debug)]
pub enum Engine {
    Brute(BruteConfig),
    Solver(SolverConfig),
    /// Exhaustive search when the query fits the budget, the solver otherwise.
    Auto { brute: BruteConfig, solver: Option<SolverConfig> },
    /// Appends each query to the log and answers unsat without solving, so a
    /// check walks through every query it would issue when all pass.
    Record(QueryLog),
}

impl Engine {
    pub fn brute() -> Engine {
        Engine::Brute(BruteConfig::default())
    }

    pub fn solve(&self, q: &Query) -> Result<SolveResult, SolveError> {
        match self {
            Engine::Brute(b) => brute_force(q, b),
            Engine::Solver(s) => solve(q, s),
            Engine::Auto { brute, solver } => match brute_force(q, brute) {
                Err(SolveError::BudgetExceeded { needed, budget }) => match solver {
                    Some(s) => solve(q, s),
                    None => Err(SolveError::BudgetExceeded { needed, budget }),
                },
                other => other,
            },
            Engine::Record(log) => {
                q.check()?;
                log.lock().unwrap().push(q.clone());
                Ok(SolveResult { status: SolveStatus::Unsat, engine: "record", elapsed: Duration::ZERO })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Brute(_) => "brute",
            Engine::Solver(_) => "solver",
            Engine::Auto { .. } => "auto",
            Engine::Record(_) => "record",
        }
    }
}
