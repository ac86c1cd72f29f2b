//! Central finite-difference verification of analytic gradients.
//!
//! Two refinements keep the numeric side trustworthy on whole networks:
//!
//! - Cross-entropy checks take the loss difference `CE(z⁺) − CE(z⁻)` from
//!   the two logit tensors with `expm1`/`ln_1p` instead of subtracting two
//!   rounded losses, which lowers the rounding floor of the difference
//!   quotient by more than an order of magnitude.
//! - When a perturbation moves a relu input across zero, the central
//!   difference straddles a kink and says nothing about the derivative at
//!   the base point. Such probes use the second-order one-sided difference
//!   `(3f(x) − 4f(x∓h) + f(x∓2h)) / 2h` on the kink-free side (first order
//!   if only `x∓h` is kink-free). When both sides cross, the central
//!   difference is taken with every kink frozen on its base-point side,
//!   which is the smooth piece whose derivative the tape computes. Both
//!   cases are counted in the report.

use crate::error::{AutodiffError, Result};
use crate::param::{Bound, ParamId, ParamStore};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};

/// Relative error floor in the denominator, so exact zeros compare cleanly.
pub const REL_ERR_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Probe at most this many entries per parameter tensor (chosen with
    /// `seed`); `None` probes every entry.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub probed: usize,
    pub max_rel_error: f64,
    /// Flat index, analytic and numeric value of the worst entry.
    pub worst: Option<(usize, f64, f64)>,
    pub one_sided: usize,
    pub frozen: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probed: usize,
    /// Probes that fell back to a one-sided difference next to a kink.
    pub one_sided: usize,
    /// Probes with a kink on both sides, checked on the frozen piece.
    pub frozen: usize,
    pub per_param: Vec<ParamCheck>,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Mean softmax cross-entropy of logits `a` minus that of `b` (both
/// `[B, C]` row-major), evaluated from `a − b` without cancellation.
pub fn cross_entropy_difference(a: &[f64], b: &[f64], labels: &[usize]) -> f64 {
    let classes = a.len() / labels.len().max(1);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let ra = &a[i * classes..(i + 1) * classes];
        let rb = &b[i * classes..(i + 1) * classes];
        let m = rb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w_sum = 0.0;
        let mut moved = 0.0;
        for (&za, &zb) in ra.iter().zip(rb) {
            let w = (zb - m).exp();
            w_sum += w;
            moved += w * (za - zb).exp_m1();
        }
        total += (moved / w_sum).ln_1p() - (ra[y] - rb[y]);
    }
    total / labels.len() as f64
}

/// Compares the tape's gradient of the scalar returned by `loss` against
/// central differences for the parameters in `store`.
///
/// `loss` must be deterministic: it is evaluated twice up front and a
/// mismatch is reported as [`AutodiffError::NonDeterministic`].
pub fn grad_check<F>(store: &mut ParamStore<f64>, loss: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &Bound) -> Result<Var>,
{
    check(store, loss, |_, v| Ok(v), |a, b| a[0] - b[0], cfg)
}

/// As [`grad_check`] for the mean cross-entropy of the logits `[B, C]`
/// returned by `logits` against `labels`.
pub fn grad_check_cross_entropy<F>(
    store: &mut ParamStore<f64>,
    logits: F,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &Bound) -> Result<Var>,
{
    check(
        store,
        logits,
        |tape, z| tape.cross_entropy(z, labels),
        |a, b| cross_entropy_difference(a, b, labels),
        cfg,
    )
}

struct Point {
    values: Vec<f64>,
    kinks: Vec<bool>,
}

fn check<F, S, D>(store: &mut ParamStore<f64>, mut out: F, to_scalar: S, diff: D, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &Bound) -> Result<Var>,
    S: Fn(&mut Tape<f64>, Var) -> Result<Var>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let eval = |store: &ParamStore<f64>, out: &mut F, frozen: Option<&[bool]>| -> Result<Point> {
        let mut tape = Tape::new();
        tape.track_kinks();
        if let Some(sides) = frozen {
            tape.freeze_kinks(sides.to_vec());
        }
        let bound = store.bind(&mut tape, false);
        let v = out(&mut tape, &bound)?;
        Ok(Point {
            values: tape.value(v).data().to_vec(),
            kinks: tape.kink_sides().unwrap_or_default().to_vec(),
        })
    };

    let mut tape = Tape::new();
    let bound = store.bind(&mut tape, true);
    let v = out(&mut tape, &bound)?;
    let root = to_scalar(&mut tape, v)?;
    if tape.value(root).len() != 1 {
        return Err(AutodiffError::InvalidArgument {
            op: "grad_check",
            reason: format!("loss must be scalar, has {} elements", tape.value(root).len()),
        });
    }
    let grads = tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = bound
        .vars()
        .iter()
        .zip(store.iter())
        .map(|(&v, p)| grads.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();
    drop(tape);

    let base = eval(store, &mut out, None)?;
    let again = eval(store, &mut out, None)?;
    if let Some((a, b)) = base
        .values
        .iter()
        .zip(&again.values)
        .find(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(AutodiffError::NonDeterministic { first: *a, second: *b });
    }

    let h = cfg.step;
    let mut rng = SeededRng::new(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        probed: 0,
        one_sided: 0,
        frozen: 0,
        per_param: Vec::with_capacity(store.len()),
    };
    for pi in 0..store.len() {
        let id = ParamId(pi);
        let n = analytic[pi].len();
        let entries: Vec<usize> = match cfg.max_entries_per_param {
            Some(k) if k < n => {
                let mut all: Vec<usize> = (0..n).collect();
                rng.shuffle(&mut all);
                all.truncate(k);
                all.sort_unstable();
                all
            }
            _ => (0..n).collect(),
        };
        let mut pc = ParamCheck {
            name: store.get(id).name.clone(),
            probed: 0,
            max_rel_error: 0.0,
            worst: None,
            one_sided: 0,
            frozen: 0,
        };
        for &e in &entries {
            let orig = store.get(id).value.data()[e];
            let mut at = |store: &mut ParamStore<f64>, offset: f64, frozen: Option<&[bool]>| -> Result<Point> {
                store.get_mut(id).value.data_mut()[e] = orig + offset;
                let p = eval(store, &mut out, frozen);
                store.get_mut(id).value.data_mut()[e] = orig;
                p
            };
            let plus = at(store, h, None)?;
            let minus = at(store, -h, None)?;
            let smooth_plus = plus.kinks == base.kinks;
            let smooth_minus = minus.kinks == base.kinks;
            let numeric = if smooth_plus && smooth_minus {
                diff(&plus.values, &minus.values) / (2.0 * h)
            } else if smooth_plus || smooth_minus {
                let sign = if smooth_plus { 1.0 } else { -1.0 };
                let near = if smooth_plus { &plus } else { &minus };
                let far = at(store, 2.0 * sign * h, None)?;
                pc.one_sided += 1;
                if far.kinks == base.kinks {
                    sign * (4.0 * diff(&near.values, &base.values) - diff(&far.values, &base.values)) / (2.0 * h)
                } else {
                    sign * diff(&near.values, &base.values) / h
                }
            } else {
                let plus = at(store, h, Some(&base.kinks))?;
                let minus = at(store, -h, Some(&base.kinks))?;
                pc.frozen += 1;
                diff(&plus.values, &minus.values) / (2.0 * h)
            };
            pc.probed += 1;
            let err = relative_error(analytic[pi][e], numeric);
            if pc.worst.is_none() || err > pc.max_rel_error {
                pc.max_rel_error = err;
                pc.worst = Some((e, analytic[pi][e], numeric));
            }
        }
        report.max_rel_error = report.max_rel_error.max(pc.max_rel_error);
        report.probed += pc.probed;
        report.one_sided += pc.one_sided;
        report.frozen += pc.frozen;
        report.per_param.push(pc);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn detects_nondeterministic_closure() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::scalar(1.0));
        let mut calls = 0.0;
        let err = grad_check(
            &mut store,
            |tape, b| {
                calls += 1.0;
                tape.scale(b.vars()[0], calls)
            },
            &GradCheckConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AutodiffError::NonDeterministic { .. }));
    }

    #[test]
    fn stable_difference_matches_plain_difference() {
        let ce = |z: &[f64], y: &[usize]| -> f64 {
            y.iter()
                .enumerate()
                .map(|(i, &l)| {
                    let r = &z[i * 3..i * 3 + 3];
                    r.iter().map(|v| v.exp()).sum::<f64>().ln() - r[l]
                })
                .sum::<f64>()
                / y.len() as f64
        };
        let a = [0.3, -1.2, 2.0, 0.0, 0.5, -0.5];
        let b = [0.1, -1.0, 2.5, 0.2, 0.4, -0.7];
        let y = [2, 0];
        let plain = ce(&a, &y) - ce(&b, &y);
        assert!((cross_entropy_difference(&a, &b, &y) - plain).abs() < 1e-14);
        assert_eq!(cross_entropy_difference(&a, &a, &y), 0.0);
    }

    #[test]
    fn kink_crossing_uses_one_sided_difference() {
        // relu(x - 0.3) + x² at x = 0.3 + 4e-6: the +h side is smooth, the
        // −h side crosses the kink.
        let mut store = ParamStore::new();
        store.add("x", Tensor::scalar(0.3 + 4e-6));
        let report = grad_check(
            &mut store,
            |tape, b| {
                let x = b.vars()[0];
                let shift = tape.constant(Tensor::scalar(-0.3));
                let s = tape.add(x, shift)?;
                let r = tape.relu(s)?;
                let sq = tape.mul(x, x)?;
                tape.add(r, sq)
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(report.one_sided, 1);
        assert_eq!(report.frozen, 0);
        assert!(report.max_rel_error < 1e-7, "{report:?}");
    }

    #[test]
    fn kinks_on_both_sides_use_the_frozen_piece() {
        // relu(x − a) + relu(b − x) + x² with a, b within h of x on either
        // side: both perturbations cross a kink, the base point sits on the
        // piece where both relus are off.
        let x0 = 0.3;
        let mut store = ParamStore::new();
        store.add("x", Tensor::scalar(x0));
        let report = grad_check(
            &mut store,
            |tape, b| {
                let x = b.vars()[0];
                let a = tape.constant(Tensor::scalar(-(x0 + 3e-6)));
                let up = tape.add(x, a)?;
                let up = tape.relu(up)?;
                let nx = tape.scale(x, -1.0)?;
                let b = tape.constant(Tensor::scalar(x0 - 3e-6));
                let down = tape.add(nx, b)?;
                let down = tape.relu(down)?;
                let sq = tape.mul(x, x)?;
                let r = tape.add(up, down)?;
                tape.add(r, sq)
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!((report.frozen, report.one_sided, report.probed), (1, 0, 1));
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn frozen_sides_override_relu_signs() {
        let mut tape = Tape::<f64>::new();
        tape.freeze_kinks(vec![true, false]);
        let x = tape.leaf(Tensor::new(&[2], vec![-1.0, 2.0]).unwrap());
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[-1.0, 0.0]);
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0, 0.0]);
    }
}
