//! Sparse ReLU networks, constraint families, architecture budgets, and
//! training.

mod budget;
mod constraints;
mod net;
mod train;

pub use budget::{budget_from_theorem, ArchitectureBudget, BudgetInputs, Theorem};
pub use constraints::{project_constraints, ConstraintSet, FeasibilityReport};
pub use net::{backward, forward, Gradient, Layer, Network};
pub use train::{train, TrainConfig, TrainOutcome};
