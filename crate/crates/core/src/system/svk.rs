use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{ExactSolution, FirstOrderSystem, PointState};
use crate::error::{invalid, Result};
use crate::space::BcRules;

/// Lame ratio `lambda` and momentum weight `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkParams {
    pub lambda: f64,
    pub kappa: f64,
}

impl Default for SvkParams {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            kappa: 1.0,
        }
    }
}

impl SvkParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda > 0.0
            && self.kappa > 0.0
            && self.lambda.is_finite()
            && self.kappa.is_finite()
        {
            Ok(())
        } else {
            Err(invalid(format!(
                "svk parameters must be positive, got lambda={}, kappa={}",
                self.lambda, self.kappa
            )))
        }
    }
}

/// Green-Lagrange strain `E = (F^T F - I) / 2` with `F = I + grad u`.
pub fn svk_strain(grad_u: &Matrix2<f64>) -> Matrix2<f64> {
    let f = Matrix2::identity() + grad_u;
    (f.transpose() * f - Matrix2::identity()) * 0.5
}

/// First Piola-Kirchhoff stress `F (2E + lambda tr(E) I)`.
pub fn svk_stress(grad_u: &Matrix2<f64>, lambda: f64) -> Matrix2<f64> {
    let f = Matrix2::identity() + grad_u;
    let e = svk_strain(grad_u);
    f * (e * 2.0 + Matrix2::identity() * (lambda * e.trace()))
}

/// `A tau = (tau - lambda / (2 + 2 lambda) tr(tau) I) / 2`.
pub fn compliance(tau: &Matrix2<f64>, lambda: f64) -> Matrix2<f64> {
    (tau - Matrix2::identity() * (lambda / (2.0 + 2.0 * lambda) * tau.trace())) * 0.5
}

fn sym(h: &Matrix2<f64>) -> Matrix2<f64> {
    (h + h.transpose()) * 0.5
}

/// Part of the stress beyond the linear law: with `H = grad u`,
/// `k = H^T H + H H^T + H^2 + H H^T H + lambda tr(E) H + lambda/2 tr(H^T H) I`.
pub fn svk_nonlinearity(h: &Matrix2<f64>, lambda: f64) -> Matrix2<f64> {
    let ht = h.transpose();
    let q = (ht * h).trace();
    let tr_e = h.trace() + 0.5 * q;
    ht * h
        + h * ht
        + h * h
        + h * ht * h
        + h * (lambda * tr_e)
        + Matrix2::identity() * (0.5 * lambda * q)
}

/// Directional derivative of [`svk_nonlinearity`] at `h` in direction `d`.
pub fn svk_nonlinearity_derivative(
    h: &Matrix2<f64>,
    d: &Matrix2<f64>,
    lambda: f64,
) -> Matrix2<f64> {
    let ht = h.transpose();
    let dt = d.transpose();
    let q = (ht * h).trace();
    let dq = (ht * d).trace();
    let tr_e = h.trace() + 0.5 * q;
    dt * h
        + ht * d
        + d * ht
        + h * dt
        + d * h
        + h * d
        + d * ht * h
        + h * dt * h
        + h * ht * d
        + h * (lambda * (d.trace() + dq))
        + d * (lambda * tr_e)
        + Matrix2::identity() * (lambda * dq)
}

/// Saint Venant-Kirchhoff elasticity with `r1 = kappa (div sigma + f)` and
/// `r2 = A sigma - eps(u) - A k(u)`; `r2` is stored row by row.
#[derive(Clone)]
pub struct SvkProblem {
    name: String,
    params: SvkParams,
    force: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    bc: BcRules,
    exact: Option<ExactSolution>,
}

impl SvkProblem {
    pub fn new(
        name: &str,
        params: SvkParams,
        force: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        bc: BcRules,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            name: name.to_string(),
            params,
            force: Arc::new(force),
            bc,
            exact: None,
        })
    }

    /// Manufactured displacement
    /// `u = 0.1 (sin(pi x) cos(pi y) + x^2 / (2 lambda), -cos(pi x) sin(pi y) + y^2 / (2 lambda))`
    /// on the unit square, clamped to the exact values on the whole boundary.
    pub fn manufactured_square(params: SvkParams) -> Result<Self> {
        params.validate()?;
        let lambda = params.lambda;
        let exact: ExactSolution = Arc::new(move |x| square_exact(x, lambda));
        let mut bc = BcRules::new();
        for label in ["x=0", "x=1", "y=0", "y=1"] {
            bc = bc.with(label, move |x| {
                let u = square_exact(x, lambda).u;
                vec![u[0], u[1]]
            });
        }
        let mut p = Self::new(
            "svk-square",
            params,
            move |x| {
                let d = square_exact(x, lambda).div_sigma;
                [-d[0], -d[1]]
            },
            bc,
        )?;
        p.exact = Some(exact);
        Ok(p)
    }

    /// Cook's membrane: clamped left edge, constant traction `(0, traction)` on
    /// the right edge, no body force.
    pub fn cook(params: SvkParams, traction: f64) -> Result<Self> {
        let bc = BcRules::new().constant("traction", vec![0.0, traction]);
        Self::new("svk-cook", params, |_| [0.0, 0.0], bc)
    }

    pub fn params(&self) -> SvkParams {
        self.params
    }

    pub fn force(&self, x: [f64; 2]) -> [f64; 2] {
        (self.force)(x)
    }
}

/// Derivative of the stress at `grad u = g` in direction `d`, from
/// `sigma = F S` with `S = 2E + lambda tr(E) I`.
fn stress_derivative(g: &Matrix2<f64>, d: &Matrix2<f64>, lambda: f64) -> Matrix2<f64> {
    let f = Matrix2::identity() + g;
    let e = svk_strain(g);
    let s = e * 2.0 + Matrix2::identity() * (lambda * e.trace());
    let de = (d.transpose() * f + f.transpose() * d) * 0.5;
    d * s + f * (de * 2.0 + Matrix2::identity() * (lambda * de.trace()))
}

fn square_exact(x: [f64; 2], lambda: f64) -> PointState {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let a = 0.1;
    let pi2 = PI * PI;
    let u = Vector2::new(
        a * (sx * cy + x[0] * x[0] / (2.0 * lambda)),
        a * (-cx * sy + x[1] * x[1] / (2.0 * lambda)),
    );
    let g = Matrix2::new(
        a * (PI * cx * cy + x[0] / lambda),
        -a * PI * sx * sy,
        a * PI * sx * sy,
        a * (-PI * cx * cy + x[1] / lambda),
    );
    // second derivatives d_x G and d_y G
    let gx = Matrix2::new(
        a * (-pi2 * sx * cy + 1.0 / lambda),
        -a * pi2 * cx * sy,
        a * pi2 * cx * sy,
        a * pi2 * sx * cy,
    );
    let gy = Matrix2::new(
        -a * pi2 * cx * sy,
        -a * pi2 * sx * cy,
        a * pi2 * sx * cy,
        a * (pi2 * cx * sy + 1.0 / lambda),
    );
    let dx = stress_derivative(&g, &gx, lambda);
    let dy = stress_derivative(&g, &gy, lambda);
    PointState {
        u,
        grad_u: g,
        sigma: svk_stress(&g, lambda),
        div_sigma: Vector2::new(dx[(0, 0)] + dy[(0, 1)], dx[(1, 0)] + dy[(1, 1)]),
    }
}

impl FirstOrderSystem for SvkProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn components(&self) -> usize {
        2
    }

    fn residual_rows(&self) -> (usize, usize) {
        (2, 4)
    }

    fn residual(&self, x: [f64; 2], s: &PointState, load: f64, out: &mut [f64]) {
        let SvkParams { lambda, kappa } = self.params;
        let f = (self.force)(x);
        out[0] = kappa * (s.div_sigma[0] + load * f[0]);
        out[1] = kappa * (s.div_sigma[1] + load * f[1]);
        let r2 = compliance(&s.sigma, lambda)
            - sym(&s.grad_u)
            - compliance(&svk_nonlinearity(&s.grad_u, lambda), lambda);
        out[2] = r2[(0, 0)];
        out[3] = r2[(0, 1)];
        out[4] = r2[(1, 0)];
        out[5] = r2[(1, 1)];
    }

    fn linearization(&self, _x: [f64; 2], s: &PointState, d: &PointState, out: &mut [f64]) {
        let SvkParams { lambda, kappa } = self.params;
        out[0] = kappa * d.div_sigma[0];
        out[1] = kappa * d.div_sigma[1];
        let dk = svk_nonlinearity_derivative(&s.grad_u, &d.grad_u, lambda);
        let r2 = compliance(&d.sigma, lambda) - sym(&d.grad_u) - compliance(&dk, lambda);
        out[2] = r2[(0, 0)];
        out[3] = r2[(0, 1)];
        out[4] = r2[(1, 0)];
        out[5] = r2[(1, 1)];
    }

    fn bc_rules(&self) -> BcRules {
        self.bc.clone()
    }

    fn exact(&self) -> Option<ExactSolution> {
        self.exact.clone()
    }
}
