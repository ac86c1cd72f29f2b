//! Paired Student t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
    /// All differences equal but non-zero: `t` is infinite and `p` is 0.
    pub degenerate: bool,
}

/// Two-sided p-value of `t` under Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Tests `mean(a − b) = 0`. Identical vectors give `t = 0, p = 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Mismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTest {
                t: 0.0,
                p: 1.0,
                df,
                degenerate: false,
            });
        }
        return Ok(TTest {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: two_sided_p(t, df),
        df,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors() {
        let a = [0.4, 0.5, 0.6];
        let r = paired_ttest(&a, &a).unwrap();
        assert_eq!((r.t, r.p, r.df), (0.0, 1.0, 2));
    }

    #[test]
    fn constant_difference_is_degenerate() {
        let r = paired_ttest(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.t, f64::INFINITY);
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn swap_negates_t() {
        let a = [0.1, 0.5, 0.3, 0.9];
        let b = [0.2, 0.1, 0.4, 0.3];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn length_mismatch() {
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
    }
}
