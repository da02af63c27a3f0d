//! Rate-independent phase-field damage in 2D plane strain.
//!
//! Each load step alternates between an unconstrained displacement solve and
//! a damage solve restricted to a ball of radius `rho` around the previous
//! damage field; the time step adapts so that physical time only advances
//! when the damage increment leaves room in the ball.

pub mod assembly;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod model;
pub mod problem;
pub mod quadrature;
pub mod solvers;
pub mod sparse;
pub mod vtk;
pub mod zerodim;

pub use error::{Error, Result};
