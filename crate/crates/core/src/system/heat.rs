use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{ExactSolution, FirstOrderSystem, PointState};
use crate::space::BcRules;

/// Conductivity `kappa(x, u)` and its derivative with respect to `u`.
pub type Conductivity = Arc<dyn Fn([f64; 2], f64) -> (f64, f64) + Send + Sync>;

/// Temperature-dependent conductivity of silicon in dimensionless
/// temperature, with its derivative.
pub fn heat_kappa(u: f64) -> (f64, f64) {
    let k = (((6.27 * u - 13.26) * u + 9.98) * u - 5.41) * u + 2.68;
    let dk = ((4.0 * 6.27 * u - 3.0 * 13.26) * u + 2.0 * 9.98) * u - 5.41;
    (k, dk)
}

/// Stationary heat conduction `-div(kappa(x, u) grad u) = f` with
/// `r1 = f - div sigma`, `r2 = kappa(x, u) grad u + sigma`.
#[derive(Clone)]
pub struct HeatProblem {
    name: String,
    conductivity: Conductivity,
    source: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    bc: BcRules,
    exact: Option<ExactSolution>,
    linear: bool,
}

impl HeatProblem {
    pub fn new(
        name: &str,
        conductivity: Conductivity,
        source: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        bc: BcRules,
    ) -> Self {
        Self {
            name: name.to_string(),
            conductivity,
            source: Arc::new(source),
            bc,
            exact: None,
            linear: false,
        }
    }

    /// Constant conductivity, which makes the problem linear.
    pub fn linear(
        kappa: f64,
        source: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        bc: BcRules,
    ) -> Self {
        let mut p = Self::new(
            "heat-linear",
            Arc::new(move |_, _| (kappa, 0.0)),
            source,
            bc,
        );
        p.linear = true;
        p
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Manufactured solution `u = sin(pi x) cos(pi y) + 0.1 (x + y)^2 + 0.4`
    /// on the unit square with Dirichlet data on all four sides.
    pub fn manufactured_square() -> Self {
        let exact: ExactSolution = Arc::new(square_exact);
        let e = exact.clone();
        let mut bc = BcRules::new();
        for label in ["x=0", "x=1", "y=0", "y=1"] {
            let e = e.clone();
            bc = bc.with(label, move |x| vec![e(x).u[0]]);
        }
        let kappa: Conductivity = Arc::new(|_, u| heat_kappa(u));
        Self::new("heat-square", kappa, |x| square_exact(x).div_sigma[0], bc).with_exact(exact)
    }

    /// L-shaped domain with `u = 0` on `x = 1`, `u = 0.85` on `y = 1`,
    /// insulated elsewhere and a constant source `-0.05`.
    pub fn lshape() -> Self {
        let bc = BcRules::new()
            .constant("x=1", vec![0.0])
            .constant("y=1", vec![0.85]);
        let kappa: Conductivity = Arc::new(|_, u| heat_kappa(u));
        Self::new("heat-lshape", kappa, |_| -0.05, bc)
    }

    pub fn source(&self, x: [f64; 2]) -> f64 {
        (self.source)(x)
    }
}

/// `u`, `grad u`, `sigma = -kappa(u) grad u` and `div sigma = f` of the
/// manufactured solution, with `f = -(kappa'(u) |grad u|^2 + kappa(u) lap u)`.
fn square_exact(x: [f64; 2]) -> PointState {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let s = x[0] + x[1];
    let u = sx * cy + 0.1 * s * s + 0.4;
    let g = Vector2::new(PI * cx * cy + 0.2 * s, -PI * sx * sy + 0.2 * s);
    let lap = -2.0 * PI * PI * sx * cy + 0.4;
    let (k, dk) = heat_kappa(u);
    let f = -(dk * g.norm_squared() + k * lap);
    PointState {
        u: Vector2::new(u, 0.0),
        grad_u: Matrix2::new(g[0], g[1], 0.0, 0.0),
        sigma: Matrix2::new(-k * g[0], -k * g[1], 0.0, 0.0),
        div_sigma: Vector2::new(f, 0.0),
    }
}

impl FirstOrderSystem for HeatProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn components(&self) -> usize {
        1
    }

    fn residual_rows(&self) -> (usize, usize) {
        (1, 2)
    }

    fn residual(&self, x: [f64; 2], s: &PointState, load: f64, out: &mut [f64]) {
        let (k, _) = (self.conductivity)(x, s.u[0]);
        out[0] = load * (self.source)(x) - s.div_sigma[0];
        out[1] = k * s.grad_u[(0, 0)] + s.sigma[(0, 0)];
        out[2] = k * s.grad_u[(0, 1)] + s.sigma[(0, 1)];
    }

    fn linearization(&self, x: [f64; 2], s: &PointState, d: &PointState, out: &mut [f64]) {
        let (k, dk) = (self.conductivity)(x, s.u[0]);
        out[0] = -d.div_sigma[0];
        for j in 0..2 {
            out[1 + j] = k * d.grad_u[(0, j)] + dk * d.u[0] * s.grad_u[(0, j)] + d.sigma[(0, j)];
        }
    }

    fn bc_rules(&self) -> BcRules {
        self.bc.clone()
    }

    fn exact(&self) -> Option<ExactSolution> {
        self.exact.clone()
    }

    fn is_linear(&self) -> bool {
        self.linear
    }
}
