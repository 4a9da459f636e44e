//! Gauss-Newton normal equations of the linearized least-squares functional
//! and element-wise evaluation of the nonlinear and linearized functionals.

use std::sync::Arc;

use rayon::prelude::*;

use crate::elements::{quadrature, AffineMap, QuadratureRule};
use crate::error::{invalid, Result};
use crate::mesh::Triangulation;
use crate::space::{apply_constraints, ConstrainedSystem, ElementBasis, MixedSpace, Tabulation};
use crate::sparse::{CsrMatrix, SparseSystem};
use crate::system::{FirstOrderSystem, PointState, MAX_ROWS};

/// Quadrature exactness `2 max(k, r + 1) + 2` used for assembly with primal
/// degree `k` and flux index `r = k - 1`.
pub fn assembly_exactness(degree: usize) -> usize {
    let flux_index = degree.saturating_sub(1);
    2 * degree.max(flux_index + 1) + 2
}

/// A mixed space together with the quadrature tables and the sparsity pattern
/// used for assembly.
#[derive(Debug)]
pub struct Discretization {
    space: MixedSpace,
    rule: QuadratureRule,
    primal_tab: Tabulation,
    flux_tab: Tabulation,
    pattern: CsrMatrix,
}

/// Per-point data of one element: physical point, weight (area included),
/// state, and the physical basis functions.
struct ElementData {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    primal: ElementBasis,
    flux: ElementBasis,
}

impl Discretization {
    pub fn new(
        mesh: Arc<Triangulation>,
        degree: usize,
        problem: &dyn FirstOrderSystem,
    ) -> Result<Self> {
        Self::with_exactness(mesh, degree, problem, assembly_exactness(degree))
    }

    pub fn with_exactness(
        mesh: Arc<Triangulation>,
        degree: usize,
        problem: &dyn FirstOrderSystem,
        exactness: usize,
    ) -> Result<Self> {
        let space = MixedSpace::new(mesh, degree, problem.components(), &problem.bc_rules())?;
        let rule = quadrature(exactness)?;
        let primal_tab = space.primal.tabulate(&rule.points);
        let flux_tab = space.flux.tabulate(&rule.points);
        let mut d = Self {
            space,
            rule,
            primal_tab,
            flux_tab,
            pattern: CsrMatrix::identity(0),
        };
        d.pattern = d.build_pattern();
        Ok(d)
    }

    pub fn space(&self) -> &MixedSpace {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        self.space.mesh()
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Global mixed indices of the local basis of element `t`: primal
    /// components first, then flux rows.
    pub fn local_dofs(&self, t: usize) -> Vec<usize> {
        let (p, f) = (&self.space.primal, &self.space.flux);
        let off = self.space.flux_offset();
        let mut out =
            Vec::with_capacity(p.components() * p.local_dofs() + f.components() * f.local_dofs());
        for c in 0..p.components() {
            out.extend(p.element_dofs(t).iter().map(|d| c * p.n_scalar_dofs() + d));
        }
        for c in 0..f.components() {
            out.extend(
                f.element_dofs(t)
                    .iter()
                    .map(|d| off + c * f.n_scalar_dofs() + d),
            );
        }
        out
    }

    fn build_pattern(&self) -> CsrMatrix {
        let n = self.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in 0..self.mesh().n_triangles() {
            let dofs = self.local_dofs(t);
            for &i in &dofs {
                rows[i].extend_from_slice(&dofs);
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        CsrMatrix::from_pattern(n, rows)
    }

    fn element_data(&self, t: usize) -> Result<ElementData> {
        let map: AffineMap = self.space.primal.element_map(t)?;
        let mut primal = ElementBasis::default();
        let mut flux = ElementBasis::default();
        self.space
            .primal
            .element_basis(t, &map, &self.primal_tab, &mut primal);
        self.space
            .flux
            .element_basis(t, &map, &self.flux_tab, &mut flux);
        let points = self.rule.points.iter().map(|p| map.map_point(*p)).collect();
        let weights = self
            .rule
            .weights
            .iter()
            .map(|w| w * map.det.abs())
            .collect();
        Ok(ElementData {
            points,
            weights,
            primal,
            flux,
        })
    }

    /// Mixed state at quadrature point `q` of element `t`.
    fn state_at(&self, coeffs: &[f64], t: usize, data: &ElementData, q: usize) -> PointState {
        let (p, f) = self.space.split(coeffs);
        let fp = self.space.primal.combine(p, t, &data.primal, q);
        let ff = self.space.flux.combine(f, t, &data.flux, q);
        PointState::from_fields(&fp, &ff)
    }

    /// Mixed states at the quadrature points of element `t`, with the
    /// physical points and weights.
    pub fn element_states(
        &self,
        coeffs: &[f64],
        t: usize,
    ) -> Result<Vec<([f64; 2], f64, PointState)>> {
        let data = self.element_data(t)?;
        Ok((0..self.rule.len())
            .map(|q| {
                (
                    data.points[q],
                    data.weights[q],
                    self.state_at(coeffs, t, &data, q),
                )
            })
            .collect())
    }

    /// Direction of local basis function `a` at point `q`, matching
    /// [`Discretization::local_dofs`].
    fn basis_direction(&self, data: &ElementData, a: usize, q: usize) -> PointState {
        let np = self.space.primal.local_dofs();
        let nf = self.space.flux.local_dofs();
        let n_primal = np * self.space.primal.components();
        let mut d = PointState::default();
        if a < n_primal {
            let (c, j) = (a / np, a % np);
            let i = q * np + j;
            d.u[c] = data.primal.values[i][0];
            d.grad_u[(c, 0)] = data.primal.grads[i][0];
            d.grad_u[(c, 1)] = data.primal.grads[i][1];
        } else {
            let b = a - n_primal;
            let (c, j) = (b / nf, b % nf);
            let i = q * nf + j;
            d.sigma[(c, 0)] = data.flux.values[i][0];
            d.sigma[(c, 1)] = data.flux.values[i][1];
            d.div_sigma[c] = data.flux.divs[i];
        }
        d
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_dofs() {
            return Err(invalid(format!(
                "state has {} entries, space has {} DOFs",
                coeffs.len(),
                self.n_dofs()
            )));
        }
        Ok(())
    }
}

/// Local normal equations of one element.
struct LocalSystem {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

fn local_system(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    load: f64,
    t: usize,
) -> Result<LocalSystem> {
    let data = disc.element_data(t)?;
    let dofs = disc.local_dofs(t);
    let n = dofs.len();
    let rows = problem.n_rows();
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let mut b = vec![0.0; rows * n];
    let mut r = [0.0; MAX_ROWS];
    let mut col = [0.0; MAX_ROWS];
    for q in 0..disc.rule.len() {
        let x = data.points[q];
        let w = data.weights[q];
        let s = disc.state_at(state, t, &data, q);
        problem.residual(x, &s, load, &mut r);
        for a in 0..n {
            let d = disc.basis_direction(&data, a, q);
            problem.linearization(x, &s, &d, &mut col);
            for k in 0..rows {
                b[k * n + a] = col[k];
            }
        }
        for k in 0..rows {
            let bk = &b[k * n..(k + 1) * n];
            for i in 0..n {
                let wi = w * bk[i];
                if wi == 0.0 {
                    continue;
                }
                rhs[i] -= wi * r[k];
                let mi = &mut matrix[i * n..(i + 1) * n];
                for j in 0..n {
                    mi[j] += wi * bk[j];
                }
            }
        }
    }
    Ok(LocalSystem { dofs, matrix, rhs })
}

/// Normal equations `M delta = rhs` of the linearized functional at `state`
/// over all mixed DOFs, before constraints.
pub fn assemble_full(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    load: f64,
) -> Result<SparseSystem> {
    disc.check_len(state)?;
    let locals: Vec<LocalSystem> = (0..disc.mesh().n_triangles())
        .into_par_iter()
        .map(|t| local_system(problem, disc, state, load, t))
        .collect::<Result<_>>()?;
    let mut matrix = disc.pattern.clone();
    let mut rhs = vec![0.0; disc.n_dofs()];
    for l in &locals {
        let n = l.dofs.len();
        for (i, gi) in l.dofs.iter().enumerate() {
            rhs[*gi] += l.rhs[i];
            for (j, gj) in l.dofs.iter().enumerate() {
                matrix.add_to(*gi, *gj, l.matrix[i * n + j]);
            }
        }
    }
    Ok(SparseSystem {
        matrix,
        rhs,
        partition: disc.space.partition(),
    })
}

/// Gauss-Newton system for the increment. Constrained increments move the
/// state onto the boundary data of the given load (zero once imposed).
pub fn assemble_gauss_newton(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    load: f64,
) -> Result<ConstrainedSystem> {
    let full = assemble_full(problem, disc, state, load)?;
    let constraints: Vec<(usize, f64)> = disc
        .space
        .constraints(load)
        .into_iter()
        .map(|(d, v)| (d, v - state[d]))
        .collect();
    apply_constraints(&full, &constraints)
}

/// Functional value with its element contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalValue {
    pub total: f64,
    pub per_element: Vec<f64>,
}

impl FunctionalValue {
    fn from_elements(per_element: Vec<f64>) -> Self {
        Self {
            total: per_element.iter().sum(),
            per_element,
        }
    }

    pub fn sqrt(&self) -> f64 {
        functional_sqrt(self.total)
    }
}

pub fn functional_sqrt(total: f64) -> f64 {
    total.max(0.0).sqrt()
}

/// Least-squares functional `sum_T int_T |r1|^2 + |r2|^2`.
pub fn evaluate_functional(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    load: f64,
) -> Result<FunctionalValue> {
    disc.check_len(state)?;
    let rows = problem.n_rows();
    let per_element = (0..disc.mesh().n_triangles())
        .into_par_iter()
        .map(|t| {
            let data = disc.element_data(t)?;
            let mut r = [0.0; MAX_ROWS];
            let mut sum = 0.0;
            for q in 0..disc.rule.len() {
                let s = disc.state_at(state, t, &data, q);
                problem.residual(data.points[q], &s, load, &mut r);
                sum += data.weights[q] * r[..rows].iter().map(|v| v * v).sum::<f64>();
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FunctionalValue::from_elements(per_element))
}

/// Linearized functional `sum_T int_T |r(state) + r'(state)[dir]|^2`.
pub fn linearized_functional(
    problem: &dyn FirstOrderSystem,
    disc: &Discretization,
    state: &[f64],
    dir: &[f64],
    load: f64,
) -> Result<FunctionalValue> {
    disc.check_len(state)?;
    disc.check_len(dir)?;
    let rows = problem.n_rows();
    let per_element = (0..disc.mesh().n_triangles())
        .into_par_iter()
        .map(|t| {
            let data = disc.element_data(t)?;
            let (mut r, mut dr) = ([0.0; MAX_ROWS], [0.0; MAX_ROWS]);
            let mut sum = 0.0;
            for q in 0..disc.rule.len() {
                let s = disc.state_at(state, t, &data, q);
                let d = disc.state_at(dir, t, &data, q);
                problem.residual(data.points[q], &s, load, &mut r);
                problem.linearization(data.points[q], &s, &d, &mut dr);
                sum += data.weights[q] * (0..rows).map(|k| (r[k] + dr[k]).powi(2)).sum::<f64>();
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FunctionalValue::from_elements(per_element))
}
