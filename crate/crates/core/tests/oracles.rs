use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};
use nlsqfem::assembly::{evaluate_functional, Discretization};
use nlsqfem::lab::{execute, ExperimentConfig, ProblemId};
use nlsqfem::mesh::make_unit_square;
use nlsqfem::solve::{gauss_newton, NewtonOptions};
use nlsqfem::space::BcRules;
use nlsqfem::system::HeatProblem;

const KAPPA: f64 = 1.5;
const SOURCE: f64 = 3.0;

fn boundary(x: [f64; 2]) -> f64 {
    1.0 + 2.0 * x[0] - x[1]
}

/// Lowest-order least-squares functional for `kappa grad u + sigma = 0`,
/// `div sigma = f` on the two triangles of the unit square. All four
/// vertices are Dirichlet nodes, so only the five flux unknowns are free.
fn scalar_lsfem_minimum() -> f64 {
    let p: [Vector2<f64>; 4] = [
        Vector2::new(0.0, 0.0),
        Vector2::new(1.0, 0.0),
        Vector2::new(1.0, 1.0),
        Vector2::new(0.0, 1.0),
    ];
    let triangles = [[0, 1, 2], [0, 2, 3]];
    // (triangle, opposite local vertex, sign) for each global edge
    let edges: [&[(usize, usize, f64)]; 5] = [
        &[(0, 1, 1.0), (1, 2, -1.0)],
        &[(0, 0, 1.0)],
        &[(0, 2, 1.0)],
        &[(1, 0, 1.0)],
        &[(1, 1, 1.0)],
    ];
    let grad_g = Vector2::new(2.0, -1.0);
    let mut m = DMatrix::<f64>::zeros(5, 5);
    let mut b = DVector::<f64>::zeros(5);
    // values and divergences of the five basis functions at the quadrature points of a triangle
    let basis = |t: usize, x: Vector2<f64>| -> Vec<(Vector2<f64>, f64)> {
        let v = triangles[t].map(|i| p[i]);
        let area: f64 = 0.5 * (v[1] - v[0]).perp(&(v[2] - v[0])).abs();
        edges
            .iter()
            .map(|support| {
                support.iter().filter(|(tt, _, _)| *tt == t).fold(
                    (Vector2::zeros(), 0.0),
                    |acc, (_, i, s)| {
                        let len = (v[(i + 1) % 3] - v[(i + 2) % 3]).norm();
                        (
                            acc.0 + (x - v[*i]) * (s * len / (2.0 * area)),
                            acc.1 + s * len / area,
                        )
                    },
                )
            })
            .collect()
    };
    let points = |t: usize| -> Vec<(Vector2<f64>, f64)> {
        let v = triangles[t].map(|i| p[i]);
        let area: f64 = 0.5 * (v[1] - v[0]).perp(&(v[2] - v[0])).abs();
        (0..3)
            .map(|i| ((v[i] + v[(i + 1) % 3]) * 0.5, area / 3.0))
            .collect()
    };
    for t in 0..2 {
        for (x, w) in points(t) {
            let phi = basis(t, x);
            for i in 0..5 {
                for j in 0..5 {
                    m[(i, j)] += w * (phi[i].1 * phi[j].1 + phi[i].0.dot(&phi[j].0));
                }
                b[i] += w * (SOURCE * phi[i].1 - KAPPA * grad_g.dot(&phi[i].0));
            }
        }
    }
    let c = m.cholesky().expect("positive definite").solve(&b);
    let mut total = 0.0;
    for t in 0..2 {
        for (x, w) in points(t) {
            let phi = basis(t, x);
            let sigma: Vector2<f64> = (0..5).map(|i| phi[i].0 * c[i]).sum();
            let div: f64 = (0..5).map(|i| phi[i].1 * c[i]).sum();
            total += w * ((SOURCE - div).powi(2) + (grad_g * KAPPA + sigma).norm_squared());
        }
    }
    total
}

#[test]
fn linear_heat_matches_scalar_lsfem() {
    let mut bc = BcRules::new();
    for label in ["x=0", "x=1", "y=0", "y=1"] {
        bc = bc.with(label, |x| vec![boundary(x)]);
    }
    let p = HeatProblem::linear(KAPPA, |_| SOURCE, bc);
    let disc = Discretization::new(Arc::new(make_unit_square(1).unwrap()), 1, &p).unwrap();
    let r = gauss_newton(
        &p,
        &disc,
        vec![0.0; disc.n_dofs()],
        &NewtonOptions::default(),
    )
    .unwrap();
    let ours = evaluate_functional(&p, &disc, &r.state, 1.0).unwrap().total;
    let oracle = scalar_lsfem_minimum();
    assert!(oracle > 1e-3);
    assert!(
        (ours - oracle).abs() <= 1e-12 * oracle,
        "{ours} vs {oracle}"
    );
}

#[test]
fn effectivity_band_on_uniform_meshes() {
    for problem in [ProblemId::HeatSquare, ProblemId::SvkSquare] {
        let mut cfg = ExperimentConfig::new(problem);
        cfg.levels = 4;
        let out = execute(&cfg).unwrap();
        assert!(out.failure.is_none());
        for r in out.rows.iter().filter(|r| r.h <= 0.125 + 1e-12) {
            let ieff = r.i_eff.unwrap();
            assert!((0.8..=1.3).contains(&ieff), "{problem}: {ieff}");
        }
    }
}

#[test]
fn heat_rate_in_h() {
    let mut cfg = ExperimentConfig::new(ProblemId::HeatSquare);
    cfg.levels = 5;
    let out = execute(&cfg).unwrap();
    for r in &out.rows[2..] {
        let rate = r.eoc_h.unwrap();
        assert!((0.9..=1.1).contains(&rate), "{rate}");
    }
}
