use crate::assembly::{assemble_gauss_newton, evaluate_functional, Discretization};
use crate::error::{invalid, Error, Result};
use crate::sparse::dot;
use crate::system::FirstOrderSystem;

use super::linear::solve_spd;

/// Gauss-Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once `|R(u) + f| <= abs_tol`.
    pub abs_tol: f64,
    /// Stop once the functional reduction `|R'(u) du|^2` predicted for the
    /// next step is at most `rel_tol |R(u) + f|^2`; that step is not applied.
    /// A step with predicted reduction below `sqrt(rel_tol) |R(u) + f|^2`
    /// whose actual reduction falls below `rel_tol |R(u) + f|^2` also ends
    /// the iteration, keeping the better of the last two iterates.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Contraction of the forcing sequence of the inexact method.
    pub tau: f64,
    /// Volume data and tractions are ramped up over this many stages.
    pub load_steps: usize,
    /// Relative residual of the linear solves.
    pub linear_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iters: 30,
            tau: 0.5,
            load_steps: 1,
            linear_tol: 1e-8,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.linear_tol > 0.0) {
            return Err(invalid("Newton tolerances must be positive"));
        }
        if self.load_steps == 0 || self.max_iters == 0 {
            return Err(invalid("load_steps and max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a Gauss-Newton solve on a fixed mesh.
#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub state: Vec<f64>,
    /// Number of applied steps over all load stages.
    pub iterations: usize,
    /// `|R(u_n) + f|` for every iterate of the final load stage, the first
    /// entry being the starting value of that stage.
    pub residuals: Vec<f64>,
    /// `|R'(u_n) du_n|` for every computed step of the final stage.
    pub decrements: Vec<f64>,
}

impl NewtonResult {
    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }
}

/// Solves the linearized least-squares problem at `state` and returns the
/// full increment with `|R'(u) du|`.
pub(crate) fn gauss_newton_step(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    load: f64,
    linear_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let sys = assemble_gauss_newton(problem, disc, state, load)?;
    let x = solve_spd(&sys.system, linear_tol)?;
    // du^T M du = du^T b on the free DOFs
    let decrement = dot(&x, &sys.system.rhs).max(0.0).sqrt();
    Ok((sys.expand(&x), decrement))
}

/// Gauss-Newton iteration `u_{n+1} = u_n + du_n` on a fixed discretization,
/// starting from `initial`. Boundary data that `initial` does not satisfy is
/// imposed by the first increment, linearized at `initial`.
pub fn gauss_newton(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    initial: Vec<f64>,
    options: &NewtonOptions,
) -> Result<NewtonResult> {
    options.validate()?;
    if initial.len() != disc.n_dofs() {
        return Err(invalid(format!(
            "initial state has {} entries, space has {}",
            initial.len(),
            disc.n_dofs()
        )));
    }
    let mut state = initial;
    let mut iterations = 0;
    let mut residuals = Vec::new();
    let mut decrements = Vec::new();
    for stage in 1..=options.load_steps {
        let load = stage as f64 / options.load_steps as f64;
        let constraints = disc.space().constraints(load);
        let mut pending = constraints.iter().any(|(d, v)| state[*d] != *v);
        residuals.clear();
        decrements.clear();
        let mut previous: Option<Vec<f64>> = None;
        loop {
            let res = evaluate_functional(problem, disc, &state, load)?.sqrt();
            residuals.push(res);
            if !res.is_finite() {
                return Err(Error::NonConvergence {
                    iterations,
                    history: residuals,
                });
            }
            if !pending && res <= options.abs_tol {
                break;
            }
            if let (Some(prev_state), [.., before, _], Some(step)) =
                (&previous, residuals.as_slice(), decrements.last())
            {
                // stagnation after a small step
                let (before, near) = (
                    *before,
                    step * step <= options.rel_tol.sqrt() * before * before,
                );
                if near && before * before - res * res <= options.rel_tol * before * before {
                    if res > before {
                        state.clone_from(prev_state);
                        residuals.pop();
                        iterations -= 1;
                    }
                    break;
                }
            }
            if iterations >= options.max_iters {
                return Err(Error::NonConvergence {
                    iterations,
                    history: residuals,
                });
            }
            let (du, decrement) =
                gauss_newton_step(problem, disc, &state, load, options.linear_tol)?;
            decrements.push(decrement);
            log::debug!(
                "newton iter={iterations} load={load} F={:.6e} step={decrement:.6e}",
                res * res
            );
            if !pending && decrement * decrement <= options.rel_tol * res * res {
                break;
            }
            previous = Some(state.clone());
            for (s, d) in state.iter_mut().zip(&du) {
                *s += d;
            }
            if pending {
                for (d, v) in &constraints {
                    state[*d] = *v;
                }
                pending = false;
                previous = None;
            }
            iterations += 1;
        }
    }
    Ok(NewtonResult {
        state,
        iterations,
        residuals,
        decrements,
    })
}
