//! Dense tensor values, a reverse-mode compute graph, parameter storage,
//! optimizers, and the finite-difference gradient checker.

pub(crate) mod functions;
mod gradcheck;
mod graph;
mod optim;
mod params;
mod tensor;

pub use functions::{binary_cross_entropy, softmax, squash};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Graph, NodeId};
pub use optim::{Optimizer, OptimizerSettings};
pub use params::{ParamInit, ParamShape, ParameterStore};
pub use tensor::{RealMatrix, RealVector};
