//! Dense matrices, a differentiable graph and finite-difference checking.

mod gradcheck;
mod graph;
mod matrix;
mod params;

pub use gradcheck::{grad_check, relative_error, EntryError, GradCheckOptions, GradCheckReport, ABS_FLOOR};
pub use graph::{Graph, Node, Var};
pub use matrix::{softmax_stable, Matrix};
pub use params::{Bindings, ParameterSet};

pub(crate) use graph::relu;
pub use graph::{sigmoid, softplus};

/// Floor applied to every probability before a logarithm.
pub const EPS: f64 = 1e-12;
