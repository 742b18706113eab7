use std::collections::BTreeSet;

use thiserror::Error;

use crate::depgraph::DepGraph;
use crate::formula::{Fuzzy, StateFormula};
use crate::model::{Action, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A node of the dependency graph could not be brought into factored form.
#[derive(Debug, Clone)]
pub struct FactorizationFailure {
    pub state: String,
    /// The grouped, partially evaluated formula that is still entangled.
    pub formula: Fuzzy,
    /// Actions guarding more than one leaf.
    pub actions: BTreeSet<Action>,
    /// The graph built up to the failure, when available.
    pub partial: Option<DepGraph>,
}

impl std::fmt::Display for FactorizationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let acts: Vec<_> = self.actions.iter().map(|a| a.as_str()).collect();
        write!(
            f,
            "formula is entangled at state {} on {{{}}}: {}",
            self.state,
            acts.join(", "),
            self.formula
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error("ill-formed formula: {}", .0.join("; "))]
    IllFormed(Vec<String>),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("{0}")]
    Factorization(Box<FactorizationFailure>),
    #[error("DNF expansion exceeded the budget of {budget} clauses")]
    SizeBudgetExceeded { budget: usize },
    #[error("simultaneous fixed-point block mixes least and greatest equations")]
    MixedSignBlock,
    #[error("equation stratum mixes least and greatest fixed points")]
    MixedSignStratum,
    #[error(
        "value iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("nested threshold {formula} is undecided at state {state}")]
    NestedUnknown {
        state: String,
        formula: Box<StateFormula>,
    },
    #[error("invalid equation system: {0}")]
    InvalidSystem(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("inconsistent exit indexing: {0}")]
    InconsistentExitIndexing(String),
    #[error("oracle budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },
    #[error("oracle cannot certify a bound: {0}")]
    NoCertificate(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
