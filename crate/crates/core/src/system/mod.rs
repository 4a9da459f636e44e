//! Model problems written as first-order residual systems
//! `r1 = L1(u, sigma) + f`, `r2 = L2(u, sigma) + K(u) + g`, with their
//! Gateaux derivatives.

mod heat;
mod relu;
mod svk;

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::space::{BcRules, FieldPoint};

pub use heat::{heat_kappa, Conductivity, HeatProblem};
pub use relu::{ReluParams, ReluProblem};
pub use svk::{
    compliance, svk_nonlinearity, svk_nonlinearity_derivative, svk_strain, svk_stress, SvkParams,
    SvkProblem,
};

/// Largest number of residual rows of any problem (2 + 4 for elasticity).
pub const MAX_ROWS: usize = 6;

/// Pointwise values of a mixed pair. `grad_u[(i, j)] = d_j u_i`; row `i` of
/// `sigma` is an H(div) field with divergence `div_sigma[i]`. Scalar problems
/// use the first component and row only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointState {
    pub u: Vector2<f64>,
    pub grad_u: Matrix2<f64>,
    pub sigma: Matrix2<f64>,
    pub div_sigma: Vector2<f64>,
}

impl PointState {
    pub fn from_fields(primal: &FieldPoint, flux: &FieldPoint) -> Self {
        Self {
            u: Vector2::new(primal.value[0][0], primal.value[1][0]),
            grad_u: Matrix2::new(
                primal.grad[0][0],
                primal.grad[0][1],
                primal.grad[1][0],
                primal.grad[1][1],
            ),
            sigma: Matrix2::new(
                flux.value[0][0],
                flux.value[0][1],
                flux.value[1][0],
                flux.value[1][1],
            ),
            div_sigma: Vector2::new(flux.div[0], flux.div[1]),
        }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &PointState) -> PointState {
        PointState {
            u: self.u + other.u * t,
            grad_u: self.grad_u + other.grad_u * t,
            sigma: self.sigma + other.sigma * t,
            div_sigma: self.div_sigma + other.div_sigma * t,
        }
    }
}

/// Exact solution pair as a function of position.
pub type ExactSolution = Arc<dyn Fn([f64; 2]) -> PointState + Send + Sync>;

/// A first-order system whose squared L2 residual is the least-squares
/// functional.
pub trait FirstOrderSystem: Send + Sync {
    fn name(&self) -> &str;

    /// 1 for scalar problems, 2 for elasticity.
    fn components(&self) -> usize;

    /// Number of rows of `r1` and of `r2`.
    fn residual_rows(&self) -> (usize, usize);

    fn n_rows(&self) -> usize {
        let (a, b) = self.residual_rows();
        a + b
    }

    /// Writes `(r1, r2)` at `x`. Volume data are scaled by `load`.
    fn residual(&self, x: [f64; 2], state: &PointState, load: f64, out: &mut [f64]);

    /// Writes the derivative of the residual at `state` in direction `dir`.
    fn linearization(&self, x: [f64; 2], state: &PointState, dir: &PointState, out: &mut [f64]);

    /// Essential boundary data for the primal and flux spaces.
    fn bc_rules(&self) -> BcRules;

    fn exact(&self) -> Option<ExactSolution> {
        None
    }

    /// True when the residual is affine in the state.
    fn is_linear(&self) -> bool {
        false
    }
}
