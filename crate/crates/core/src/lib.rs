//! Stochastic circuit simulation with generalized polynomial chaos.

pub mod basis;
pub mod circuit;
pub mod engine;
pub mod post;
pub mod quadrature;
pub mod testing_nodes;
pub mod uq;
mod linalg;

pub use basis::{num_basis, BasisError, Distribution, GpcBasisSet, MultiIndex, RandomParameter};
pub use circuit::{CircuitError, StochasticCircuit};
pub use engine::{EngineError, NewtonConfig, Scheme, StepControl, TranOptions};
pub use post::{PdfEstimate, PostError, StatSeries};
pub use quadrature::{QuadratureError, TensorGrid};
pub use testing_nodes::{SelectionError, TestingNodeSet};
pub use uq::{Analysis, GpcTrajectory, Method, SampleEnsemble, UqError};
