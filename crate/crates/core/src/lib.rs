//! Least-squares finite elements for nonlinear first-order systems in two
//! dimensions.
//!
//! The pieces are layered: [`mesh`] and [`elements`] describe geometry and
//! reference shape functions, [`space`] builds global conforming spaces,
//! [`system`] defines the residual of each model problem, [`assembly`] forms
//! the Gauss-Newton normal equations, [`solve`] drives Newton and adaptive
//! refinement, and [`lab`] runs complete experiments.

pub mod assembly;
pub mod elements;
pub mod error;
pub mod lab;
pub mod mesh;
pub mod solve;
pub mod space;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};
