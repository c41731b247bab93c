//! Small dense numerical solvers: linear programming, log-barrier Newton, linear algebra helpers.

pub mod barrier;
pub mod linalg;
pub mod lp;
