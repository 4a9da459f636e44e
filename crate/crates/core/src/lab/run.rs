use std::fs;
use std::io::BufWriter;
use std::sync::Arc;

use crate::assembly::{evaluate_functional, Discretization};
use crate::error::{config, Error, Result};
use crate::mesh::{make_cook, make_lshape, make_unit_square, uniform_refine, Triangulation};
use crate::solve::{
    adaptive_gauss_newton, eoc, gauss_newton, inexact_gauss_newton, AdaptiveOptions,
    ConvergenceRecord, NewtonOptions, Snapshot,
};
use crate::system::{
    FirstOrderSystem, HeatProblem, ReluParams, ReluProblem, SvkParams, SvkProblem,
};

use super::config::{ExperimentConfig, Mode, ProblemId, ReferenceKind, SolverKind};
use super::measure::{
    ancestor_map, error_exactness, overkill_reference, triple_norm_error, Reference,
};
use super::output::{format_csv, write_state_vtk};

/// One line of a convergence table; `newton_iters` counts the Gauss-Newton
/// steps taken for the row.
pub type TableRow = ConvergenceRecord;

/// Everything an experiment computed.
pub struct ExperimentOutput {
    pub rows: Vec<TableRow>,
    pub snapshots: Vec<Snapshot>,
    pub reference: Option<Snapshot>,
    /// Error that ended the run early; rows computed before it are kept.
    pub failure: Option<Error>,
}

/// Model problem described by `cfg`.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Box<dyn FirstOrderSystem>> {
    let problem: Box<dyn FirstOrderSystem> = match cfg.problem {
        ProblemId::HeatSquare => Box::new(HeatProblem::manufactured_square()),
        ProblemId::HeatLshape => match cfg.source {
            None => Box::new(HeatProblem::lshape()),
            Some(f) => {
                let base = HeatProblem::lshape();
                Box::new(HeatProblem::new(
                    "heat-lshape",
                    Arc::new(|_, u| crate::system::heat_kappa(u)),
                    move |_| f,
                    base.bc_rules(),
                ))
            }
        },
        ProblemId::ReluLshape => {
            let f = cfg.source.unwrap_or(0.0);
            Box::new(
                ReluProblem::lshape(
                    ReluParams {
                        delta: cfg.delta,
                        kappa: cfg.kappa,
                    },
                    move |_| f,
                )
                .map_err(as_config)?,
            )
        }
        ProblemId::SvkSquare => Box::new(
            SvkProblem::manufactured_square(SvkParams {
                lambda: cfg.lambda,
                kappa: cfg.kappa,
            })
            .map_err(as_config)?,
        ),
        ProblemId::SvkCook => Box::new(
            SvkProblem::cook(
                SvkParams {
                    lambda: cfg.lambda,
                    kappa: cfg.kappa,
                },
                cfg.traction,
            )
            .map_err(as_config)?,
        ),
    };
    Ok(problem)
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => config(m),
        other => other,
    }
}

/// Initial structured mesh of the problem domain.
pub fn initial_mesh(cfg: &ExperimentConfig) -> Result<Triangulation> {
    match cfg.problem {
        ProblemId::HeatSquare | ProblemId::SvkSquare => make_unit_square(cfg.initial_n),
        ProblemId::HeatLshape | ProblemId::ReluLshape => make_lshape(cfg.initial_n),
        ProblemId::SvkCook => make_cook(cfg.initial_n),
    }
}

struct Solved {
    records: Vec<TableRow>,
    snapshots: Vec<Snapshot>,
    meshes: Vec<Arc<Triangulation>>,
    failure: Option<Error>,
}

fn solve_uniform(
    problem: &dyn FirstOrderSystem,
    cfg: &ExperimentConfig,
    mesh: Arc<Triangulation>,
) -> Result<Solved> {
    let mut out = Solved {
        records: Vec::new(),
        snapshots: Vec::new(),
        meshes: Vec::new(),
        failure: None,
    };
    let mut mesh = mesh;
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = Arc::new(uniform_refine(&mesh));
        }
        out.meshes.push(mesh.clone());
        let disc = Arc::new(Discretization::new(mesh.clone(), cfg.degree, problem)?);
        let result = match gauss_newton(problem, &disc, vec![0.0; disc.n_dofs()], &cfg.newton) {
            Ok(r) => r,
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        };
        let f = evaluate_functional(problem, &disc, &result.state, 1.0)?.sqrt();
        log::info!(
            "level={level} ndof={} F^1/2={f:.6e} iters={}",
            disc.n_dofs(),
            result.iterations
        );
        out.records.push(ConvergenceRecord::new(
            level,
            disc.n_dofs(),
            mesh.max_element_size(),
            f,
            result.iterations,
        ));
        out.snapshots.push(Snapshot {
            disc,
            state: result.state,
        });
    }
    Ok(out)
}

fn solve_adaptive(
    problem: &dyn FirstOrderSystem,
    cfg: &ExperimentConfig,
    mesh: Arc<Triangulation>,
) -> Result<Solved> {
    let adaptive = AdaptiveOptions {
        theta: cfg.theta,
        max_cycles: cfg.max_refinements,
        max_dofs: cfg.max_dofs,
    };
    let run = match cfg.solver {
        SolverKind::Nested => adaptive_gauss_newton(
            problem,
            mesh,
            cfg.degree,
            cfg.cycles,
            &cfg.newton,
            &adaptive,
        )?,
        SolverKind::Inexact => {
            let newton = NewtonOptions {
                max_iters: cfg.cycles,
                ..cfg.newton
            };
            inexact_gauss_newton(problem, mesh, cfg.degree, &newton, &adaptive)?
        }
    };
    Ok(Solved {
        records: run.records,
        snapshots: run.snapshots,
        meshes: run.meshes,
        failure: run.failure,
    })
}

/// Runs the experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let mesh = Arc::new(initial_mesh(cfg)?);
    let solved = match cfg.mode {
        Mode::Uniform => solve_uniform(problem.as_ref(), cfg, mesh)?,
        Mode::Adaptive => solve_adaptive(problem.as_ref(), cfg, mesh)?,
    };
    let Solved {
        mut records,
        snapshots,
        mut meshes,
        mut failure,
    } = solved;
    let mut reference = None;
    let mut errors: Vec<Option<f64>> = vec![None; records.len()];
    match cfg.reference {
        ReferenceKind::None => {}
        ReferenceKind::Analytic => {
            let exact = problem
                .exact()
                .ok_or_else(|| config(format!("{} has no analytic solution", cfg.problem)))?;
            for (e, snap) in errors.iter_mut().zip(&snapshots) {
                let space = snap.disc.space();
                *e = Some(triple_norm_error(
                    space,
                    &snap.state,
                    &Reference::Analytic(&exact),
                    error_exactness(cfg.degree),
                )?);
            }
        }
        ReferenceKind::Overkill if failure.is_none() && !snapshots.is_empty() => {
            let last = snapshots.last().expect("at least one snapshot");
            match overkill_reference(
                problem.as_ref(),
                last,
                cfg.overkill_levels,
                cfg.overkill_boost,
                &cfg.newton,
            ) {
                Ok(ovk) => {
                    meshes.extend(ovk.meshes);
                    let fine = &ovk.snapshot;
                    let exactness = error_exactness(fine.disc.degree());
                    for (e, snap) in errors.iter_mut().zip(&snapshots) {
                        let pos = meshes
                            .iter()
                            .position(|m| Arc::ptr_eq(m, snap.disc.mesh()))
                            .ok_or_else(|| {
                                config("snapshot mesh missing from the refinement chain")
                            })?;
                        let chain: Vec<&Triangulation> =
                            meshes[pos..].iter().rev().map(|m| m.as_ref()).collect();
                        let ancestors = ancestor_map(&chain)?;
                        let r = Reference::Discrete {
                            space: fine.disc.space(),
                            coeffs: &fine.state,
                            ancestors: &ancestors,
                        };
                        *e = Some(triple_norm_error(
                            snap.disc.space(),
                            &snap.state,
                            &r,
                            exactness,
                        )?);
                    }
                    reference = Some(ovk.snapshot);
                }
                Err(e) => failure = Some(e),
            }
        }
        ReferenceKind::Overkill => {}
    }
    let err: Vec<f64> = errors.iter().map(|e| e.unwrap_or(0.0)).collect();
    let h: Vec<f64> = records.iter().map(|r| r.h).collect();
    let dofs: Vec<f64> = records.iter().map(|r| r.n_dof as f64).collect();
    let (by_h, by_dof) = eoc(&err, &h, &dofs)?;
    for (i, r) in records.iter_mut().enumerate() {
        r.error = errors[i];
        r.i_eff = errors[i]
            .filter(|e| *e > 0.0)
            .map(|e| r.functional_sqrt / e);
        r.eoc_h = by_h[i];
        r.eoc_dof = by_dof[i];
    }
    Ok(ExperimentOutput {
        rows: records,
        snapshots,
        reference,
        failure,
    })
}

/// Runs the experiment, writes the CSV table and the VTK file of the last
/// state when configured, and returns the rows. A solver failure is returned
/// after the rows computed so far have been written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    let out = execute(cfg)?;
    if let Some(path) = &cfg.csv {
        fs::write(path, format_csv(&out.rows))?;
    }
    if let (Some(path), Some(last)) = (&cfg.vtk, out.snapshots.last()) {
        let problem = build_problem(cfg)?;
        write_state_vtk(
            problem.as_ref(),
            last,
            BufWriter::new(fs::File::create(path)?),
        )?;
    }
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_heat_rows() {
        let mut cfg = ExperimentConfig::new(ProblemId::HeatSquare);
        cfg.levels = 3;
        let out = execute(&cfg).unwrap();
        assert!(out.failure.is_none());
        assert_eq!(out.rows.len(), 3);
        for (i, r) in out.rows.iter().enumerate() {
            assert_eq!(r.cycle, i);
            let ieff = r.i_eff.unwrap();
            assert!((0.9..1.1).contains(&ieff), "{ieff}");
        }
        assert!(out.rows[0].eoc_h.is_none());
        assert!(out.rows[2].eoc_h.unwrap() > 0.8);
    }

    #[test]
    fn adaptive_rows_carry_overkill_errors() {
        let mut cfg = ExperimentConfig::new(ProblemId::HeatLshape);
        cfg.cycles = 3;
        let out = execute(&cfg).unwrap();
        assert!(out.failure.is_none());
        assert_eq!(out.rows.len(), 3);
        assert!(out.reference.is_some());
        assert!(out.rows.iter().all(|r| r.error.unwrap() > 0.0));
    }

    #[test]
    fn inexact_solver_produces_rows() {
        let mut cfg = ExperimentConfig::new(ProblemId::HeatLshape);
        cfg.solver = SolverKind::Inexact;
        cfg.cycles = 2;
        let out = execute(&cfg).unwrap();
        assert!(out.failure.is_none());
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn invalid_material_is_config_error() {
        let mut cfg = ExperimentConfig::new(ProblemId::ReluLshape);
        cfg.delta = 10.0;
        assert!(matches!(execute(&cfg), Err(Error::Configuration(_))));
    }

    #[test]
    fn nonconvergence_keeps_partial_rows() {
        let mut cfg = ExperimentConfig::new(ProblemId::HeatSquare);
        cfg.levels = 3;
        cfg.newton.max_iters = 4;
        let out = execute(&cfg).unwrap();
        assert!(matches!(out.failure, Some(Error::NonConvergence { .. })));
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].error.is_some());
    }
}
