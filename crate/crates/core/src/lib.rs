//! Numerical laboratory for double-phase obstacle problems with mixed
//! boundary conditions: P1 finite elements, penalty and Moreau-Yosida
//! regularizations of the obstacle constraint, semismooth Newton with
//! continuation, and diagnostics for the set convergence of approximate
//! solution sets as the penalty parameter tends to zero.

pub mod assembly;
pub mod convergence_lab;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod musielak_orlicz;
pub mod nonsmooth;
pub mod solver;

pub use discrete::DiscreteFunction;
pub use error::{Error, Result};
pub use mesh::{BoundaryPartition, BoundaryTag, Mesh, Side};
pub use musielak_orlicz::{PhaseConfig, ModularValue};
