use std::sync::Arc;

use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::assembly::{assemble_full, linearized_functional, Discretization};
use crate::error::Result;
use crate::mesh::make_unit_square;
use crate::solve::{doerfler_mark, gauss_newton, NewtonOptions};
use crate::space::BcRules;
use crate::system::{
    compliance, svk_nonlinearity, svk_stress, FirstOrderSystem, HeatProblem, PointState,
    ReluParams, ReluProblem, SvkParams, SvkProblem, MAX_ROWS,
};

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl OracleCheck {
    fn new(name: &str, worst: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: worst <= tol,
            detail: format!("worst {worst:.2e} (tolerance {tol:.0e})"),
        }
    }
}

const SEED: u64 = 20_240_917;

fn problems() -> Result<Vec<Box<dyn FirstOrderSystem>>> {
    Ok(vec![
        Box::new(HeatProblem::manufactured_square()),
        Box::new(ReluProblem::new(
            ReluParams::default(),
            |x| x[0] - x[1],
            BcRules::new(),
        )?),
        Box::new(SvkProblem::manufactured_square(SvkParams::default())?),
        Box::new(SvkProblem::cook(
            SvkParams {
                lambda: 2.0,
                kappa: 1000f64.sqrt(),
            },
            0.03,
        )?),
    ])
}

fn random_state(rng: &mut StdRng, components: usize) -> PointState {
    let mut s = PointState::default();
    for c in 0..components {
        s.u[c] = rng.random_range(-1.0..1.0);
        s.div_sigma[c] = rng.random_range(-1.0..1.0);
        for j in 0..2 {
            s.grad_u[(c, j)] = rng.random_range(-1.0..1.0);
            s.sigma[(c, j)] = rng.random_range(-1.0..1.0);
        }
    }
    s
}

/// Largest defect between central differences of the residual and the
/// linearization, relative to `max(|R'(s) d|, 1)`.
fn jacobian_defect(problem: &dyn FirstOrderSystem, rng: &mut StdRng, samples: usize) -> f64 {
    let rows = problem.n_rows();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let s = random_state(rng, problem.components());
        // the ReLU residual has a kink at u = 0
        if s.u[0].abs() < 1e-3 {
            continue;
        }
        let d = random_state(rng, problem.components());
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let (mut plus, mut minus, mut lin) = ([0.0; MAX_ROWS], [0.0; MAX_ROWS], [0.0; MAX_ROWS]);
        problem.residual(x, &s.axpy(eps, &d), 1.0, &mut plus);
        problem.residual(x, &s.axpy(-eps, &d), 1.0, &mut minus);
        problem.linearization(x, &s, &d, &mut lin);
        let mut diff = 0.0;
        let mut size = 0.0;
        for k in 0..rows {
            diff += ((plus[k] - minus[k]) / (2.0 * eps) - lin[k]).powi(2);
            size += lin[k] * lin[k];
        }
        worst = worst.max(diff.sqrt() / size.sqrt().max(1.0));
        taken += 1;
    }
    worst
}

/// Normal equations recovered entry by entry from the linearized functional
/// `G(d) = |r + B d|^2`: `M_ij = (G(e_i + e_j) - G(e_i) - G(e_j) + G(0)) / 2`
/// (`M_ii` from `G(2 e_i)`) and `b_i = (M_ii - G(e_i) + G(0)) / 2`.
fn dense_defect(problem: &dyn FirstOrderSystem, degree: usize, rng: &mut StdRng) -> Result<f64> {
    let disc = Discretization::new(Arc::new(make_unit_square(1)?), degree, problem)?;
    let n = disc.n_dofs();
    let state: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let g = |dir: &[f64]| linearized_functional(problem, &disc, &state, dir, 1.0).map(|f| f.total);
    let g0 = g(&vec![0.0; n])?;
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let gi: Vec<f64> = (0..n).map(|i| g(&unit(i))).collect::<Result<_>>()?;
    let sys = assemble_full(problem, &disc, &state, 1.0)?;
    let scale = sys
        .matrix
        .max_abs()
        .max(sys.rhs.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut e = unit(i);
            e[j] += 1.0;
            let mij = if i == j {
                (g(&e)? - 2.0 * gi[i] + g0) / 2.0
            } else {
                (g(&e)? - gi[i] - gi[j] + g0) / 2.0
            };
            worst = worst.max((mij - sys.matrix.get(i, j)).abs() / scale);
        }
        let mii = sys.matrix.get(i, i);
        let bi = (mii - gi[i] + g0) / 2.0;
        worst = worst.max((bi - sys.rhs[i]).abs() / scale);
    }
    Ok(worst)
}

fn random_matrix(rng: &mut StdRng, scale: f64) -> Matrix2<f64> {
    Matrix2::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Smallest number of entries whose sum reaches `theta` times the total.
fn minimal_count(values: &[f64], theta: f64) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let target = theta * values.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        if acc >= target {
            return i + 1;
        }
    }
    sorted.len()
}

/// Runs the oracle checks of the toolkit.
pub fn verify() -> Result<Vec<OracleCheck>> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut checks = Vec::new();

    for p in problems()? {
        let worst = jacobian_defect(p.as_ref(), &mut rng, 50);
        checks.push(OracleCheck::new(
            &format!("finite-difference Jacobian ({})", p.name()),
            worst,
            1e-5,
        ));
    }

    for p in problems()?.iter().take(3) {
        for degree in [1, 2] {
            let worst = dense_defect(p.as_ref(), degree, &mut rng)?;
            checks.push(OracleCheck::new(
                &format!("dense normal equations ({}, k={degree})", p.name()),
                worst,
                1e-12,
            ));
        }
    }

    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let h = random_matrix(&mut rng, 0.8);
        let lambda = rng.random_range(0.5..5.0);
        let eps = (h + h.transpose()) * 0.5;
        let linear = eps * 2.0 + Matrix2::identity() * (lambda * eps.trace());
        let lhs = svk_stress(&h, lambda);
        let rhs = linear + svk_nonlinearity(&h, lambda);
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    checks.push(OracleCheck::new(
        "stress decomposition identity",
        worst,
        1e-12,
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let tau = random_matrix(&mut rng, 2.0);
        let lambda = rng.random_range(0.5..5.0);
        let c = tau * 2.0 + Matrix2::identity() * (lambda * tau.trace());
        worst = worst.max((compliance(&c, lambda) - tau).norm() / tau.norm().max(1.0));
    }
    checks.push(OracleCheck::new("compliance inversion", worst, 1e-12));

    let mut failures = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..60);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let theta = rng.random_range(0.05..0.95);
        let marked = doerfler_mark(&values, theta)?;
        let sum: f64 = marked.iter().map(|i| values[*i]).sum();
        if sum < theta * values.iter().sum::<f64>() || marked.len() != minimal_count(&values, theta)
        {
            failures += 1;
        }
    }
    checks.push(OracleCheck {
        name: "bulk marking minimality".to_string(),
        passed: failures == 0,
        detail: format!("{failures} of 100 random vectors violated"),
    });

    let mut iterations = Vec::new();
    for degree in [1, 2] {
        let bc = BcRules::new()
            .constant("x=0", vec![1.0])
            .with("y=1", |x| vec![x[0]]);
        let p = HeatProblem::linear(1.5, |x| x[0] + 2.0 * x[1], bc);
        let disc = Discretization::new(Arc::new(make_unit_square(4)?), degree, &p)?;
        iterations.push(
            gauss_newton(
                &p,
                &disc,
                vec![0.0; disc.n_dofs()],
                &NewtonOptions::default(),
            )?
            .iterations,
        );
    }
    checks.push(OracleCheck {
        name: "linear problem in one Gauss-Newton step".to_string(),
        passed: iterations.iter().all(|i| *i == 1),
        detail: format!("iterations {iterations:?}"),
    });

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass() {
        let checks = verify().unwrap();
        assert!(checks.len() >= 12);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn minimal_count_examples() {
        assert_eq!(minimal_count(&[0.5, 0.3, 0.2], 0.5), 1);
        assert_eq!(minimal_count(&[0.5, 0.3, 0.2], 0.6), 2);
        assert_eq!(minimal_count(&[1.0, 1.0], 1.0), 2);
    }
}
