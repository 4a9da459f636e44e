use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Affine map from the reference triangle onto a physical triangle, with the
/// data needed for the covariant (gradient) and contravariant Piola transforms.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Vector2<f64>,
    pub jacobian: Matrix2<f64>,
    pub det: f64,
    pub inverse: Matrix2<f64>,
    /// `J / det J`, applied to reference H(div) vectors.
    pub contravariant: Matrix2<f64>,
}

/// Affine map of the triangle with vertices `coords`.
pub fn piola_map(coords: [[f64; 2]; 3]) -> Result<AffineMap> {
    let [a, b, c] = coords;
    let jacobian = Matrix2::new(b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
    let det = jacobian.determinant();
    let scale = jacobian.abs().max().powi(2);
    if det.abs() <= 1e-14 * scale || !det.is_finite() {
        return Err(Error::DegenerateElement {
            element: usize::MAX,
            det,
        });
    }
    let inverse = Matrix2::new(
        jacobian[(1, 1)],
        -jacobian[(0, 1)],
        -jacobian[(1, 0)],
        jacobian[(0, 0)],
    ) / det;
    Ok(AffineMap {
        origin: Vector2::new(a[0], a[1]),
        jacobian,
        det,
        inverse,
        contravariant: jacobian / det,
    })
}

impl AffineMap {
    pub fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        let x = self.origin + self.jacobian * Vector2::new(p[0], p[1]);
        [x[0], x[1]]
    }

    pub fn pull_back(&self, x: [f64; 2]) -> [f64; 2] {
        let p = self.inverse * (Vector2::new(x[0], x[1]) - self.origin);
        [p[0], p[1]]
    }

    /// Physical gradient `J^{-T} g` of a reference gradient `g`.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let v = self.inverse.transpose() * Vector2::new(g[0], g[1]);
        [v[0], v[1]]
    }

    /// Contravariant Piola transform `J v / det J`.
    pub fn push_hdiv(&self, v: [f64; 2]) -> [f64; 2] {
        let w = self.contravariant * Vector2::new(v[0], v[1]);
        [w[0], w[1]]
    }

    /// Inverse Piola transform `det J  J^{-1} w`.
    pub fn pull_hdiv(&self, w: [f64; 2]) -> [f64; 2] {
        let v = self.inverse * Vector2::new(w[0], w[1]) * self.det;
        [v[0], v[1]]
    }

    pub fn push_divergence(&self, div: f64) -> f64 {
        div / self.det
    }
}
