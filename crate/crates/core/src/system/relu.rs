use std::sync::Arc;

use super::{FirstOrderSystem, PointState};
use crate::error::{invalid, Result};
use crate::space::BcRules;

/// Shift `delta` and first-equation weight `kappa`, with `1 < delta < kappa^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluParams {
    pub delta: f64,
    pub kappa: f64,
}

impl Default for ReluParams {
    fn default() -> Self {
        Self {
            delta: 2.0,
            kappa: 2.0,
        }
    }
}

impl ReluParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta.is_finite()
            && self.kappa.is_finite()
            && 1.0 < self.delta
            && self.delta < self.kappa * self.kappa;
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "relu parameters need 1 < delta < kappa^2, got delta={}, kappa={}",
                self.delta, self.kappa
            )))
        }
    }
}

/// `max(u, 0) - div(grad u) = f` split as `r1 = kappa (sigma - grad u)`,
/// `r2 = (-div sigma + delta u) + (max(u, 0) - delta u) - f`.
#[derive(Clone)]
pub struct ReluProblem {
    params: ReluParams,
    source: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    bc: BcRules,
}

impl ReluProblem {
    pub fn new(
        params: ReluParams,
        source: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        bc: BcRules,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            source: Arc::new(source),
            bc,
        })
    }

    /// L-shape with `u = -2` on `x = 1` and `u = 3` on `y = 1`.
    pub fn lshape(
        params: ReluParams,
        source: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let bc = BcRules::new()
            .constant("x=1", vec![-2.0])
            .constant("y=1", vec![3.0]);
        Self::new(params, source, bc)
    }

    pub fn params(&self) -> ReluParams {
        self.params
    }
}

fn heaviside(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl FirstOrderSystem for ReluProblem {
    fn name(&self) -> &str {
        "relu"
    }

    fn components(&self) -> usize {
        1
    }

    fn residual_rows(&self) -> (usize, usize) {
        (2, 1)
    }

    fn residual(&self, x: [f64; 2], s: &PointState, load: f64, out: &mut [f64]) {
        let ReluParams { delta, kappa } = self.params;
        let u = s.u[0];
        out[0] = kappa * (s.sigma[(0, 0)] - s.grad_u[(0, 0)]);
        out[1] = kappa * (s.sigma[(0, 1)] - s.grad_u[(0, 1)]);
        out[2] = (-s.div_sigma[0] + delta * u) + (u.max(0.0) - delta * u) - load * (self.source)(x);
    }

    fn linearization(&self, _x: [f64; 2], s: &PointState, d: &PointState, out: &mut [f64]) {
        let ReluParams { delta, kappa } = self.params;
        out[0] = kappa * (d.sigma[(0, 0)] - d.grad_u[(0, 0)]);
        out[1] = kappa * (d.sigma[(0, 1)] - d.grad_u[(0, 1)]);
        out[2] = -d.div_sigma[0] + delta * d.u[0] + (heaviside(s.u[0]) - delta) * d.u[0];
    }

    fn bc_rules(&self) -> BcRules {
        self.bc.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::testing::{fd_defect, lcg, random_state};
    use crate::system::MAX_ROWS;
    use nalgebra::Vector2;

    #[test]
    fn parameter_validation() {
        assert!(ReluParams {
            delta: 1.0,
            kappa: 1.0
        }
        .validate()
        .is_err());
        assert!(ReluParams {
            delta: 2.0,
            kappa: 2.0
        }
        .validate()
        .is_ok());
        assert!(ReluParams {
            delta: 4.0,
            kappa: 2.0
        }
        .validate()
        .is_err());
        assert!(ReluProblem::new(
            ReluParams {
                delta: 0.5,
                kappa: 2.0
            },
            |_| 0.0,
            BcRules::new()
        )
        .is_err());
    }

    #[test]
    fn residual_examples() {
        let p = ReluProblem::new(ReluParams::default(), |_| 0.0, BcRules::new()).unwrap();
        let mut r = [0.0; MAX_ROWS];
        let s = PointState {
            u: Vector2::new(-1.0, 0.0),
            ..Default::default()
        };
        p.residual([0.0, 0.0], &s, 1.0, &mut r);
        assert_eq!(r[2], 0.0);
        let s = PointState {
            u: Vector2::new(2.0, 0.0),
            ..Default::default()
        };
        p.residual([0.0, 0.0], &s, 1.0, &mut r);
        assert_eq!(r[2], 2.0);
    }

    #[test]
    fn active_and_inactive_sets() {
        let p = ReluProblem::new(ReluParams::default(), |_| 0.0, BcRules::new()).unwrap();
        let d = PointState {
            u: Vector2::new(1.0, 0.0),
            div_sigma: Vector2::new(0.5, 0.0),
            ..Default::default()
        };
        let mut r = [0.0; MAX_ROWS];
        let s = PointState {
            u: Vector2::new(-1.0, 0.0),
            ..Default::default()
        };
        p.linearization([0.0, 0.0], &s, &d, &mut r);
        assert_eq!(r[2], -0.5);
        let s = PointState {
            u: Vector2::new(1.0, 0.0),
            ..Default::default()
        };
        p.linearization([0.0, 0.0], &s, &d, &mut r);
        assert_eq!(r[2], 0.5);
        let s = PointState::default();
        p.linearization([0.0, 0.0], &s, &d, &mut r);
        assert_eq!(r[2], -0.5);
    }

    #[test]
    fn finite_difference_jacobian_off_kink() {
        let p = ReluProblem::new(ReluParams::default(), |x| x[0], BcRules::new()).unwrap();
        let mut seed = 5;
        let mut checked = 0;
        while checked < 50 {
            let s = random_state(&mut seed, 1.0);
            let d = random_state(&mut seed, 1.0);
            if s.u[0].abs() < 1e-3 {
                continue;
            }
            let x = [lcg(&mut seed), lcg(&mut seed)];
            assert!(fd_defect(&p, x, &s, &d) < 1e-5);
            checked += 1;
        }
    }
}
