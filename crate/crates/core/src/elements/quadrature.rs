use crate::error::{invalid, Result};

/// Quadrature rule on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates `(x, y)` of the points.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates `(1-x-y, x, y)` of every point.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| [1.0 - p[0] - p[1], p[0], p[1]])
            .collect()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Triangle rule exact for polynomials of total degree `exactness`.
///
/// Degrees 1 and 2 use the centroid and the three-point interior rule; higher
/// degrees use a collapsed (Duffy) product of Gauss-Legendre rules, whose
/// weights are all positive.
pub fn quadrature(exactness: usize) -> Result<QuadratureRule> {
    match exactness {
        0 | 1 => Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            exactness: 1,
        }),
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            Ok(QuadratureRule {
                points: vec![[a, a], [b, a], [a, b]],
                weights: vec![1.0 / 6.0; 3],
                exactness: 2,
            })
        }
        3..=20 => {
            let m = (exactness + 3) / 2;
            let (x, w) = gauss_legendre(m);
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push([*u, v * (1.0 - u)]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
            Ok(QuadratureRule {
                points,
                weights,
                exactness,
            })
        }
        _ => Err(invalid(format!(
            "no quadrature rule of exactness {exactness}"
        ))),
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` on `[-1, 1]` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * (n * (n + 1)) as f64
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Shifted Legendre polynomial `P_n(2t - 1)` on `[0, 1]`.
pub fn shifted_legendre(n: usize, t: f64) -> f64 {
    legendre_with_derivative(n, 2.0 * t - 1.0).0
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form of the integral of `x^a y^b` over the reference triangle:
    /// `a! b! / (a + b + 2)!`.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn centroid_rule() {
        let q = quadrature(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.weights[0], 0.5);
        assert!(q.barycentric()[0]
            .iter()
            .all(|l| (l - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn degree_two_integrates_x_squared() {
        let q = quadrature(2).unwrap();
        assert!((q.integrate(|p| p[0] * p[0]) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn exactness_against_closed_form() {
        for deg in 1..=10 {
            let q = quadrature(deg).unwrap();
            assert!((q.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(q.weights.iter().all(|w| *w > 0.0));
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let got = q.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    let want = monomial_integral(a, b);
                    assert!(
                        (got - want).abs() < 1e-14,
                        "deg {deg} x^{a} y^{b}: {got} vs {want}"
                    );
                }
            }
        }
        assert!(quadrature(25).is_err());
    }

    #[test]
    fn gauss_legendre_exact_on_unit_interval() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((got - 1.0 / (p as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }
}
