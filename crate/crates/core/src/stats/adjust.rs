use crate::{Error, Result};

fn check(p: &[f64]) -> Result<()> {
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(bad) => Err(Error::Argument(format!("p-value {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    check(p)?;
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let adj = p[i] * (m as f64 / (rank + 1) as f64);
        running = running.min(adj).min(1.0);
        out[i] = running;
    }
    Ok(out)
}

/// Bonferroni: `min(1, p * m)`.
pub fn bonferroni_adjust(p: &[f64], m: usize) -> Result<Vec<f64>> {
    check(p)?;
    Ok(p.iter().map(|v| (v * m as f64).min(1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bh_hand_values() {
        assert_eq!(bh_adjust(&[0.01, 0.02, 0.03]).unwrap(), vec![0.03, 0.03, 0.03]);
        assert_eq!(bh_adjust(&[0.5]).unwrap(), vec![0.5]);
        assert!(bh_adjust(&[1.2]).is_err());
        let a = bh_adjust(&[0.04, 0.001, 0.9]).unwrap();
        assert!((a[1] - 0.003).abs() < 1e-15);
        assert!((a[0] - 0.06).abs() < 1e-15);
        assert_eq!(a[2], 0.9);
    }

    #[test]
    fn bonferroni_hand_values() {
        assert!((bonferroni_adjust(&[0.04], 3).unwrap()[0] - 0.12).abs() < 1e-15);
        assert_eq!(bonferroni_adjust(&[0.5], 3).unwrap(), vec![1.0]);
    }

    proptest! {
        #[test]
        fn bh_monotone_and_dominates(p in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            let adj = bh_adjust(&p).unwrap();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, raw) in adj.iter().zip(&p) {
                prop_assert!(*a >= *raw && *a <= 1.0);
            }
        }
    }
}
