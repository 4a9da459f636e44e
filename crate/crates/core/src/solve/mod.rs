//! Linear solves, Gauss-Newton drivers, bulk marking, the adaptive inner
//! loop with its inexact outer iteration, and convergence rates.

mod afem;
mod eoc;
mod linear;
mod marking;
mod newton;

pub use afem::{
    adaptive_gauss_newton, afem_newton_step, inexact_gauss_newton, refine_and_transfer,
    AdaptiveOptions, AdaptiveRun, AfemStep, InnerCycle, Snapshot,
};
pub use eoc::{eoc, Rates};
pub use linear::{pcg, solve_spd, solve_spd_with, LinearSolver, DIRECT_LIMIT};
pub use marking::doerfler_mark;
pub use newton::{gauss_newton, NewtonOptions, NewtonResult};

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub cycle: usize,
    pub n_dof: usize,
    pub h: f64,
    pub error: Option<f64>,
    pub functional_sqrt: f64,
    pub i_eff: Option<f64>,
    pub eoc_h: Option<f64>,
    pub eoc_dof: Option<f64>,
    pub newton_iters: usize,
}

impl ConvergenceRecord {
    pub fn new(
        cycle: usize,
        n_dof: usize,
        h: f64,
        functional_sqrt: f64,
        newton_iters: usize,
    ) -> Self {
        Self {
            cycle,
            n_dof,
            h,
            error: None,
            functional_sqrt,
            i_eff: None,
            eoc_h: None,
            eoc_dof: None,
            newton_iters,
        }
    }
}
