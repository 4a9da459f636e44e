use crate::error::{invalid, Result};

/// Convergence order per row; `None` where it is undefined.
pub type Rates = Vec<Option<f64>>;

/// Experimental orders of convergence with respect to the mesh size and to
/// the number of unknowns. Entry 0, entries with non-positive data and
/// entries whose size does not change are `None`.
pub fn eoc(errors: &[f64], h: &[f64], dofs: &[f64]) -> Result<(Rates, Rates)> {
    if errors.len() != h.len() || errors.len() != dofs.len() {
        return Err(invalid(format!(
            "eoc needs equal lengths, got {} errors, {} sizes and {} DOF counts",
            errors.len(),
            h.len(),
            dofs.len()
        )));
    }
    let rate = |num: (f64, f64), den: (f64, f64)| -> Option<f64> {
        let step = (den.0 / den.1).ln();
        if [num.0, num.1, den.0, den.1]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
            && step.abs() > 1e-10
        {
            Some((num.0 / num.1).ln() / step)
        } else {
            None
        }
    };
    let mut by_h = vec![None; errors.len()];
    let mut by_dof = vec![None; errors.len()];
    for i in 1..errors.len() {
        by_h[i] = rate((errors[i - 1], errors[i]), (h[i - 1], h[i]));
        by_dof[i] = rate((errors[i - 1], errors[i]), (dofs[i], dofs[i - 1]));
    }
    Ok((by_h, by_dof))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let (h, _) = eoc(&[2.0, 1.0], &[1.0, 0.5], &[1.0, 2.0]).unwrap();
        assert_eq!(h, vec![None, Some(1.0)]);
        let (_, d) = eoc(&[8.79e-1, 6.64e-1], &[1.0, 1.0], &[81.0, 131.0]).unwrap();
        assert!((d[1].unwrap() - 0.58).abs() < 0.005);
        let (_, d) = eoc(&[2.0, 1.0], &[1.0, 1.0], &[100.0, 400.0]).unwrap();
        assert!((d[1].unwrap() - 0.5).abs() < 1e-15);
        let (h, _) = eoc(&[2.0, 0.0], &[1.0, 0.5], &[1.0, 2.0]).unwrap();
        assert_eq!(h[1], None);
        let (h, _) = eoc(
            &[2.0, 1.0],
            &[9.19, 9.19 * (1.0 + f64::EPSILON)],
            &[1.0, 2.0],
        )
        .unwrap();
        assert_eq!(h[1], None);
        assert!(eoc(&[1.0], &[], &[]).is_err());
    }
}
