use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{assembly_exactness, Discretization};
use crate::elements::{quadrature, Family};
use crate::error::{invalid, Result};
use crate::mesh::{uniform_refine, Triangulation};
use crate::solve::{gauss_newton, NewtonOptions, Snapshot};
use crate::space::{FieldPoint, MixedSpace};
use crate::system::{ExactSolution, FirstOrderSystem, PointState};

/// Extra exactness of the error quadrature over the assembly rule.
pub const ERROR_EXACTNESS_BOOST: usize = 4;

/// Quadrature exactness used to measure errors of degree `degree` fields.
pub fn error_exactness(degree: usize) -> usize {
    (assembly_exactness(degree) + ERROR_EXACTNESS_BOOST).min(20)
}

/// Solution the discrete states are compared with.
pub enum Reference<'a> {
    Analytic(&'a ExactSolution),
    /// Discrete state on a refinement of the measured mesh; `ancestors` maps
    /// every reference element to the measured element containing it.
    Discrete {
        space: &'a MixedSpace,
        coeffs: &'a [f64],
        ancestors: &'a [usize],
    },
}

/// Mixed states of `coeffs` at reference points of element `t`.
fn states_at(
    space: &MixedSpace,
    coeffs: &[f64],
    t: usize,
    points: &[[f64; 2]],
) -> Result<Vec<PointState>> {
    let (p, f) = space.split(coeffs);
    let primal = space.primal.evaluate_field(p, t, points)?;
    let flux = space.flux.evaluate_field(f, t, points)?;
    Ok(primal
        .iter()
        .zip(&flux)
        .map(|(a, b)| PointState::from_fields(a, b))
        .collect())
}

fn squared_difference(a: &PointState, b: &PointState) -> f64 {
    (a.grad_u - b.grad_u).norm_squared()
        + (a.sigma - b.sigma).norm_squared()
        + (a.div_sigma - b.div_sigma).norm_squared()
}

/// `(|grad(u - u_h)|^2 + |sigma - sigma_h|^2 + |div(sigma - sigma_h)|^2)^(1/2)`
/// by quadrature of the given exactness on the finer of the two meshes.
pub fn triple_norm_error(
    space: &MixedSpace,
    coeffs: &[f64],
    reference: &Reference<'_>,
    exactness: usize,
) -> Result<f64> {
    if coeffs.len() != space.n_dofs() {
        return Err(invalid(format!(
            "state has {} entries, space has {}",
            coeffs.len(),
            space.n_dofs()
        )));
    }
    let rule = quadrature(exactness)?;
    let per_element: Vec<f64> = match reference {
        Reference::Analytic(exact) => (0..space.mesh().n_triangles())
            .into_par_iter()
            .map(|t| {
                let map = space.primal.element_map(t)?;
                let states = states_at(space, coeffs, t, &rule.points)?;
                Ok(states
                    .iter()
                    .enumerate()
                    .map(|(q, s)| {
                        rule.weights[q]
                            * map.det.abs()
                            * squared_difference(s, &exact(map.map_point(rule.points[q])))
                    })
                    .sum())
            })
            .collect::<Result<_>>()?,
        Reference::Discrete {
            space: fine,
            coeffs: fine_coeffs,
            ancestors,
        } => {
            let n_fine = fine.mesh().n_triangles();
            if ancestors.len() != n_fine
                || ancestors.iter().any(|a| *a >= space.mesh().n_triangles())
            {
                return Err(invalid(
                    "ancestor map does not connect the reference mesh to the measured mesh",
                ));
            }
            (0..n_fine)
                .into_par_iter()
                .map(|t| {
                    let map = fine.primal.element_map(t)?;
                    let exact = states_at(fine, fine_coeffs, t, &rule.points)?;
                    let coarse_map = space.primal.element_map(ancestors[t])?;
                    let pulled: Vec<[f64; 2]> = rule
                        .points
                        .iter()
                        .map(|p| coarse_map.pull_back(map.map_point(*p)))
                        .collect();
                    let approx = states_at(space, coeffs, ancestors[t], &pulled)?;
                    Ok(exact
                        .iter()
                        .zip(&approx)
                        .enumerate()
                        .map(|(q, (e, a))| {
                            rule.weights[q] * map.det.abs() * squared_difference(a, e)
                        })
                        .sum())
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(per_element.iter().sum::<f64>().sqrt())
}

/// `sqrt(functional_total) / error`.
pub fn effectivity(functional_total: f64, error: f64) -> Result<f64> {
    if !(error > 0.0) {
        return Err(invalid(format!(
            "effectivity needs a positive error, got {error}"
        )));
    }
    Ok(functional_total.max(0.0).sqrt() / error)
}

/// Element map from the first mesh of `chain` to the last one, where every
/// mesh refines the one after it.
pub fn ancestor_map(chain: &[&Triangulation]) -> Result<Vec<usize>> {
    for w in chain.windows(2) {
        let parent = w[0]
            .parent_map()
            .ok_or_else(|| invalid("mesh in the chain has no parent map"))?;
        if parent.len() != w[0].n_triangles() || parent.iter().any(|p| *p >= w[1].n_triangles()) {
            return Err(invalid(
                "parent map does not match the next mesh of the chain",
            ));
        }
    }
    Ok(Triangulation::compose_parents(chain))
}

/// High-order solution on uniform refinements of a computed state.
pub struct Overkill {
    pub snapshot: Snapshot,
    /// Meshes between the coarse mesh (excluded) and the reference mesh
    /// (included), coarse to fine.
    pub meshes: Vec<Arc<Triangulation>>,
    pub iterations: usize,
}

fn flatten(fp: &FieldPoint, family: Family) -> Vec<f64> {
    match family {
        Family::Lagrange => vec![fp.value[0][0], fp.value[1][0]],
        Family::RaviartThomas => vec![
            fp.value[0][0],
            fp.value[0][1],
            fp.value[1][0],
            fp.value[1][1],
        ],
    }
}

/// Interpolates a state onto a nested space of any degree.
fn prolongate(
    coarse: &MixedSpace,
    coeffs: &[f64],
    fine: &MixedSpace,
    ancestors: &[usize],
) -> Result<Vec<f64>> {
    let (p, f) = coarse.split(coeffs);
    let eval = |space: &crate::space::FeSpace, c: &[f64], t: usize, x: [f64; 2]| match space
        .evaluate_at(c, ancestors[t], x)
    {
        Ok(fp) => flatten(&fp, space.family()),
        Err(_) => vec![f64::NAN; 4],
    };
    let mut out = fine.interpolate(
        |t, x| eval(&coarse.primal, p, t, x),
        |t, x| eval(&coarse.flux, f, t, x),
    )?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(invalid("prolongation produced non-finite values"));
    }
    for (d, v) in fine.constraints(1.0) {
        out[d] = v;
    }
    Ok(out)
}

/// Refines the mesh of `coarse` uniformly `levels` times, raises the degree by
/// `degree_boost` and converges Gauss-Newton there, starting from the
/// interpolated coarse state.
pub fn overkill_reference(
    problem: &dyn FirstOrderSystem,
    coarse: &Snapshot,
    levels: usize,
    degree_boost: usize,
    newton: &NewtonOptions,
) -> Result<Overkill> {
    let mut meshes: Vec<Arc<Triangulation>> = Vec::with_capacity(levels);
    let mut mesh = coarse.disc.mesh().clone();
    for _ in 0..levels {
        mesh = Arc::new(uniform_refine(&mesh));
        meshes.push(mesh.clone());
    }
    let disc = Discretization::new(mesh.clone(), coarse.disc.degree() + degree_boost, problem)?;
    let mut chain: Vec<&Triangulation> = meshes.iter().rev().map(|m| m.as_ref()).collect();
    chain.push(coarse.disc.mesh());
    let ancestors = ancestor_map(&chain)?;
    let initial = prolongate(coarse.disc.space(), &coarse.state, disc.space(), &ancestors)?;
    let result = gauss_newton(problem, &disc, initial, newton)?;
    log::info!(
        "overkill reference: {} DOFs, degree {}, {} iterations",
        disc.n_dofs(),
        disc.degree(),
        result.iterations
    );
    Ok(Overkill {
        snapshot: Snapshot {
            disc: Arc::new(disc),
            state: result.state,
        },
        meshes,
        iterations: result.iterations,
    })
}
