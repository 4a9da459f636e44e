use std::sync::Arc;

use crate::assembly::{evaluate_functional, linearized_functional, Discretization};
use crate::error::{invalid, Error, Result};
use crate::mesh::{bisect, Triangulation};
use crate::space::transfer_mixed;
use crate::system::FirstOrderSystem;

use super::marking::doerfler_mark;
use super::newton::{gauss_newton, gauss_newton_step, NewtonOptions};
use super::ConvergenceRecord;

/// Controls of adaptive refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Bulk parameter of the marking.
    pub theta: f64,
    /// Refinements allowed inside one adaptive Newton step.
    pub max_cycles: usize,
    /// No further refinement once a space has this many unknowns.
    pub max_dofs: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_cycles: 10,
            max_dofs: 1_000_000,
        }
    }
}

impl AdaptiveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// A discretization with a state living on it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub disc: Arc<Discretization>,
    pub state: Vec<f64>,
}

/// Bisects the marked elements and interpolates `state` onto the new spaces.
pub fn refine_and_transfer(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    marked: &[usize],
    load: f64,
) -> Result<(Arc<Discretization>, Vec<f64>)> {
    let mesh: Arc<Triangulation> = Arc::new(bisect(disc.mesh(), marked));
    let fine = Discretization::with_exactness(mesh, disc.degree(), problem, disc.rule().exactness)?;
    let state = transfer_mixed(disc.space(), state, fine.space(), load)?;
    Ok((Arc::new(fine), state))
}

/// One pass of the inner adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerCycle {
    pub n_dof: usize,
    /// `|R(u_n) + f|` on this mesh.
    pub residual: f64,
    /// Square root of the linearized functional at the computed direction.
    pub xi: f64,
}

/// Accepted direction of an adaptive Newton step.
#[derive(Debug, Clone)]
pub struct AfemStep {
    pub disc: Arc<Discretization>,
    /// Current iterate interpolated onto the final discretization.
    pub state: Vec<f64>,
    pub direction: Vec<f64>,
    pub xi: f64,
    pub residual: f64,
    pub refinements: usize,
    /// True when the refinement budget ran out before `xi <= forcing * residual`.
    pub capped: bool,
    pub trace: Vec<InnerCycle>,
    /// Meshes created by the refinements of this step, oldest first.
    pub meshes: Vec<Arc<Triangulation>>,
}

/// Solves the linearized problem, refining with the element contributions of
/// the linearized functional until `xi <= forcing |R(u_n) + f|`.
pub fn afem_newton_step(
    problem: &dyn FirstOrderSystem,
    disc: Arc<Discretization>,
    state: Vec<f64>,
    forcing: f64,
    newton: &NewtonOptions,
    adaptive: &AdaptiveOptions,
) -> Result<AfemStep> {
    adaptive.validate()?;
    let load = 1.0;
    let (mut disc, mut state) = (disc, state);
    let mut trace = Vec::new();
    let mut meshes = Vec::new();
    for cycle in 0.. {
        let residual = evaluate_functional(problem, &disc, &state, load)?.sqrt();
        let (direction, _) = gauss_newton_step(problem, &disc, &state, load, newton.linear_tol)?;
        let flin = linearized_functional(problem, &disc, &state, &direction, load)?;
        let xi = flin.sqrt();
        log::info!(
            "cycle={cycle} ndof={} F={:.6e} xi={xi:.6e} eta={forcing:.6e}",
            disc.n_dofs(),
            residual * residual
        );
        trace.push(InnerCycle {
            n_dof: disc.n_dofs(),
            residual,
            xi,
        });
        let done = xi <= forcing * residual;
        let capped = !done && (cycle >= adaptive.max_cycles || disc.n_dofs() >= adaptive.max_dofs);
        if done || capped {
            if capped {
                log::warn!("adaptive Newton step stopped after {cycle} refinements with xi={xi:.3e} > {:.3e}", forcing * residual);
            }
            return Ok(AfemStep {
                disc,
                state,
                direction,
                xi,
                residual,
                refinements: cycle,
                capped,
                trace,
                meshes,
            });
        }
        let marked = doerfler_mark(&flin.per_element, adaptive.theta)?;
        (disc, state) = refine_and_transfer(problem, &disc, &state, &marked, load)?;
        meshes.push(disc.mesh().clone());
    }
    unreachable!("the refinement loop returns")
}

/// Records and snapshots of an adaptive run, with the error that ended it
/// early if any.
#[derive(Debug)]
pub struct AdaptiveRun {
    pub records: Vec<ConvergenceRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Forcing term used in each outer step (inexact method only).
    pub forcing: Vec<f64>,
    /// Every mesh of the run, each one a refinement of its predecessor.
    pub meshes: Vec<Arc<Triangulation>>,
    pub failure: Option<Error>,
}

impl AdaptiveRun {
    fn new(initial: Arc<Triangulation>) -> Self {
        Self {
            records: Vec::new(),
            snapshots: Vec::new(),
            forcing: Vec::new(),
            meshes: vec![initial],
            failure: None,
        }
    }
}

/// Inexact Gauss-Newton method with adaptive inner solves. Starts with
/// `eta_0 = tau` and updates `eta_n = min(tau eta_{n-1}, |R(u_n) + f|)`. One
/// record is written per outer step.
pub fn inexact_gauss_newton(
    problem: &dyn FirstOrderSystem,
    mesh: Arc<Triangulation>,
    degree: usize,
    newton: &NewtonOptions,
    adaptive: &AdaptiveOptions,
) -> Result<AdaptiveRun> {
    newton.validate()?;
    adaptive.validate()?;
    let mut disc = Arc::new(Discretization::new(mesh, degree, problem)?);
    let mut state = disc.space().initial_state(1.0);
    let mut run = AdaptiveRun::new(disc.mesh().clone());
    let mut eta: Option<f64> = None;
    for n in 0..newton.max_iters {
        let res = evaluate_functional(problem, &disc, &state, 1.0)?.sqrt();
        if res <= newton.abs_tol {
            break;
        }
        let forcing = match eta {
            None => newton.tau,
            Some(prev) => (newton.tau * prev).min(res),
        };
        eta = Some(forcing);
        let step = match afem_newton_step(
            problem,
            disc.clone(),
            state.clone(),
            forcing,
            newton,
            adaptive,
        ) {
            Ok(s) => s,
            Err(e) => {
                run.failure = Some(e);
                break;
            }
        };
        run.meshes.extend(step.meshes);
        disc = step.disc;
        state = step.state;
        for (s, d) in state.iter_mut().zip(&step.direction) {
            *s += d;
        }
        let f = evaluate_functional(problem, &disc, &state, 1.0)?.sqrt();
        run.records.push(ConvergenceRecord::new(
            n,
            disc.n_dofs(),
            disc.mesh().max_element_size(),
            f,
            n + 1,
        ));
        run.snapshots.push(Snapshot {
            disc: disc.clone(),
            state: state.clone(),
        });
        run.forcing.push(forcing);
        if step.capped && disc.n_dofs() >= adaptive.max_dofs {
            break;
        }
    }
    Ok(run)
}

/// Adaptive loop that converges Gauss-Newton on every mesh before marking
/// with the element contributions of the nonlinear functional. The iterate is
/// interpolated onto each refined mesh as the next starting value.
pub fn adaptive_gauss_newton(
    problem: &dyn FirstOrderSystem,
    mesh: Arc<Triangulation>,
    degree: usize,
    cycles: usize,
    newton: &NewtonOptions,
    adaptive: &AdaptiveOptions,
) -> Result<AdaptiveRun> {
    newton.validate()?;
    adaptive.validate()?;
    let mut disc = Arc::new(Discretization::new(mesh, degree, problem)?);
    let mut state = vec![0.0; disc.n_dofs()];
    let mut run = AdaptiveRun::new(disc.mesh().clone());
    for cycle in 0..cycles {
        let result = match gauss_newton(problem, &disc, state, newton) {
            Ok(r) => r,
            Err(e) => {
                run.failure = Some(e);
                break;
            }
        };
        state = result.state;
        let functional = evaluate_functional(problem, &disc, &state, 1.0)?;
        log::info!(
            "cycle={cycle} ndof={} F={:.6e} iters={}",
            disc.n_dofs(),
            functional.total,
            result.iterations
        );
        run.records.push(ConvergenceRecord::new(
            cycle,
            disc.n_dofs(),
            disc.mesh().max_element_size(),
            functional.sqrt(),
            result.iterations,
        ));
        run.snapshots.push(Snapshot {
            disc: disc.clone(),
            state: state.clone(),
        });
        if cycle + 1 == cycles || disc.n_dofs() >= adaptive.max_dofs {
            break;
        }
        let marked = doerfler_mark(&functional.per_element, adaptive.theta)?;
        if marked.is_empty() {
            break;
        }
        (disc, state) = refine_and_transfer(problem, &disc, &state, &marked, 1.0)?;
        run.meshes.push(disc.mesh().clone());
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_lshape, make_unit_square};
    use crate::space::BcRules;
    use crate::system::HeatProblem;

    #[test]
    fn loose_forcing_exits_after_first_solve() {
        let p = HeatProblem::manufactured_square();
        let disc =
            Arc::new(Discretization::new(Arc::new(make_unit_square(8).unwrap()), 1, &p).unwrap());
        let state = disc.space().initial_state(1.0);
        let step = afem_newton_step(
            &p,
            disc,
            state,
            0.99,
            &NewtonOptions::default(),
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert_eq!(step.refinements, 0);
        assert!(!step.capped);
    }

    #[test]
    fn tiny_forcing_refines_until_cap() {
        let p = HeatProblem::manufactured_square();
        let disc =
            Arc::new(Discretization::new(Arc::new(make_unit_square(2).unwrap()), 1, &p).unwrap());
        let state = disc.space().initial_state(1.0);
        let opts = AdaptiveOptions {
            max_cycles: 3,
            ..Default::default()
        };
        let step =
            afem_newton_step(&p, disc, state, 1e-12, &NewtonOptions::default(), &opts).unwrap();
        assert_eq!(step.refinements, 3);
        assert!(step.capped);
        assert!(step.trace.windows(2).all(|w| w[1].n_dof > w[0].n_dof));
    }

    #[test]
    fn forcing_sequence_follows_update_rule() {
        let p = HeatProblem::lshape();
        let newton = NewtonOptions {
            max_iters: 5,
            ..Default::default()
        };
        let adaptive = AdaptiveOptions {
            max_cycles: 4,
            max_dofs: 20_000,
            ..Default::default()
        };
        let run =
            inexact_gauss_newton(&p, Arc::new(make_lshape(2).unwrap()), 1, &newton, &adaptive)
                .unwrap();
        assert!(run.failure.is_none());
        assert_eq!(run.forcing[0], 0.5);
        for (i, w) in run.forcing.windows(2).enumerate() {
            assert!(w[1] <= 0.5 * w[0] + 1e-15);
            assert!(w[1] <= run.records[i].functional_sqrt + 1e-15);
        }
        assert!(run.records.windows(2).all(|w| w[1].n_dof >= w[0].n_dof));
    }

    #[test]
    fn nested_run_concentrates_at_reentrant_corner() {
        let p = HeatProblem::lshape();
        let run = adaptive_gauss_newton(
            &p,
            Arc::new(make_lshape(2).unwrap()),
            1,
            7,
            &NewtonOptions::default(),
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert!(run.failure.is_none());
        assert_eq!(run.records.len(), 7);
        assert!(run.records.windows(2).all(|w| w[1].n_dof > w[0].n_dof));
        let mesh = run.snapshots[6].disc.mesh();
        let near = (0..mesh.n_triangles())
            .filter(|t| {
                let c = mesh.centroid(*t);
                (c[0] * c[0] + c[1] * c[1]).sqrt() < 0.25
            })
            .count();
        assert!(
            near as f64 >= 0.15 * mesh.n_triangles() as f64,
            "{near} of {}",
            mesh.n_triangles()
        );
    }

    #[test]
    fn linear_problem_inexact_matches_plain_solve() {
        let p = HeatProblem::linear(1.0, |_| 1.0, BcRules::new());
        let mesh = Arc::new(make_unit_square(4).unwrap());
        let newton = NewtonOptions {
            max_iters: 1,
            ..Default::default()
        };
        let run = inexact_gauss_newton(&p, mesh.clone(), 1, &newton, &AdaptiveOptions::default())
            .unwrap();
        let disc = Discretization::new(run.snapshots[0].disc.mesh().clone(), 1, &p).unwrap();
        let direct = gauss_newton(
            &p,
            &disc,
            vec![0.0; disc.n_dofs()],
            &NewtonOptions::default(),
        )
        .unwrap();
        let f = evaluate_functional(&p, &disc, &direct.state, 1.0)
            .unwrap()
            .sqrt();
        assert!((f - run.records[0].functional_sqrt).abs() <= 1e-10 * f);
    }
}
