use crate::error::{invalid, Result};

/// Minimal set of elements whose values sum to at least `theta` times the
/// total. Elements are taken in decreasing order of value, ties by lower
/// index; the result is sorted by element index.
pub fn doerfler_mark(values: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!(
            "bulk parameter must lie in (0, 1), got {theta}"
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(invalid(format!(
            "estimator values must be finite and non-negative, got {v}"
        )));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    let goal = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if sum >= goal {
            break;
        }
        sum += values[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            doerfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap(),
            vec![0, 1]
        );
        assert_eq!(
            doerfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.9).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(
            doerfler_mark(&[1.0, 4.0, 2.0, 3.0], 0.999).unwrap(),
            vec![0, 1, 2, 3]
        );
        assert_eq!(doerfler_mark(&[1.0, 3.0, 3.0], 0.4).unwrap(), vec![1]);
        assert!(doerfler_mark(&[0.0, 0.0], 0.5).unwrap().is_empty());
        assert!(doerfler_mark(&[1.0], 1.0).is_err());
        assert!(doerfler_mark(&[-1.0], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn marked_set_is_minimal(values in prop::collection::vec(0.0f64..10.0, 1..60), theta in 0.05f64..0.95) {
            let marked = doerfler_mark(&values, theta).unwrap();
            let total: f64 = values.iter().sum();
            let sum: f64 = marked.iter().map(|i| values[*i]).sum();
            prop_assert!(sum >= theta * total * (1.0 - 1e-12));
            if let Some(min) = marked.iter().map(|i| values[*i]).min_by(f64::total_cmp) {
                prop_assert!(sum - min < theta * total);
            }
            // no unmarked element is larger than a marked one
            let smallest = marked.iter().map(|i| values[*i]).fold(f64::INFINITY, f64::min);
            for (i, v) in values.iter().enumerate() {
                if !marked.contains(&i) {
                    prop_assert!(*v <= smallest);
                }
            }
        }
    }
}
