//! Model checking of the probabilistic mu-calculus XPL over probabilistic
//! labeled transition systems.

pub mod checker;
pub mod depgraph;
pub mod encoders;
pub mod eqsolve;
pub mod error;
pub mod formats;
pub mod formula;
mod lex;
pub mod model;
pub mod oracle;
pub mod transform;

pub use error::{Error, FactorizationFailure, Result};
pub use formula::{Cmp, Fuzzy, Modality, Sign, StateFormula};
pub use model::{Action, Plts, Prop, StateId};
