//! Cosine annealing with warm restarts.

use serde::{Deserialize, Serialize};

/// `η_min + ½(η_max − η_min)(1 + cos(π·t_cur/t_i))`.
pub fn lr_at(t_cur: f64, t_i: f64, lr_max: f64, lr_min: f64) -> f64 {
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t_cur / t_i).cos())
}

/// One annealing cycle in 1-based epochs: it covers epochs
/// `start + 1 ..= end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: usize,
    pub end: usize,
    pub length: usize,
    /// `false` for a final cycle cut short by the epoch budget.
    pub complete: bool,
}

/// Cycles of lengths `t0, t0·t_mult, …` covering `total_epochs`, the last
/// one truncated if the budget ends mid-cycle.
pub fn cycles(t0: usize, t_mult: usize, total_epochs: usize) -> Vec<Cycle> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut length = t0.max(1);
    while start < total_epochs {
        let end = start + length;
        out.push(Cycle {
            start,
            end: end.min(total_epochs),
            length,
            complete: end <= total_epochs,
        });
        start = end;
        length *= t_mult.max(1);
    }
    out
}

/// Epochs at which a cycle ends, the last one clipped to `total_epochs`.
pub fn restart_epochs(t0: usize, t_mult: usize, total_epochs: usize) -> Vec<usize> {
    cycles(t0, t_mult, total_epochs).iter().map(|c| c.end).collect()
}

/// Learning rate at fractional training progress `progress` (in epochs
/// since the start of training).
pub fn lr_at_progress(progress: f64, t0: usize, t_mult: usize, lr_max: f64, lr_min: f64) -> f64 {
    let mut start = 0.0;
    let mut length = t0.max(1) as f64;
    while progress >= start + length {
        start += length;
        length *= t_mult.max(1) as f64;
    }
    lr_at(progress - start, length, lr_max, lr_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values() {
        assert_eq!(lr_at(0.0, 15.0, 0.05, 1e-6), 0.05);
        assert!((lr_at(15.0, 15.0, 0.05, 1e-6) - 1e-6).abs() < 1e-12);
        assert!((lr_at(7.5, 15.0, 0.05, 1e-6) - (0.05 + 1e-6) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn restarts() {
        assert_eq!(restart_epochs(15, 2, 945), vec![15, 45, 105, 225, 465, 945]);
        assert_eq!(restart_epochs(15, 2, 460), vec![15, 45, 105, 225, 460]);
        assert_eq!(restart_epochs(1, 1, 3), vec![1, 2, 3]);
        assert!(restart_epochs(15, 2, 0).is_empty());
        let c = cycles(15, 2, 460);
        assert!(!c[4].complete);
        assert_eq!(c[4].length, 240);
    }

    #[test]
    fn progress_restarts_at_cycle_start() {
        assert_eq!(lr_at_progress(15.0, 15, 2, 0.05, 1e-6), 0.05);
        assert_eq!(lr_at_progress(45.0, 15, 2, 0.05, 1e-6), 0.05);
        let mid = lr_at_progress(30.0, 15, 2, 0.05, 1e-6);
        assert!((mid - (0.05 + 1e-6) / 2.0).abs() < 1e-12);
    }
}
