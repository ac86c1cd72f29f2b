//! Butterworth band-pass design and zero-phase (forward-backward) filtering
//! in second-order sections.
//!
//! Design follows the classic analog route: the order-`n` low-pass
//! prototype poles are mapped to band-pass poles around the prewarped band
//! edges, then to the z-plane with the bilinear transform. A band-pass of
//! prototype order `n` has `2n` poles, grouped into `n` conjugate-pair
//! biquads. Each biquad has zeros at `z = ±1`, i.e. numerator
//! `g (1 − z⁻²)`, with `g` chosen so the section has unit gain at the
//! band's digital centre frequency.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (r0, r1) = (b1 - a1 * b0, b2 - a2 * b0);
        let z0 = (r0 + r1) / (1.0 + a1 + a2);
        [z0, r1 - a2 * z0]
    }
}

/// Cascade of second-order sections.
#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Butterworth band-pass of prototype order `order` for `[low, high]` Hz
    /// at `rate` Hz.
    pub fn butterworth_bandpass(order: usize, low: f64, high: f64, rate: f64) -> Result<Self> {
        let nyquist = rate / 2.0;
        if !(low > 0.0 && low < high && high < nyquist) || order == 0 {
            return Err(Error::BandOutOfRange { low, high, nyquist });
        }
        let fs2 = 2.0 * rate;
        let wl = fs2 * (PI * low / rate).tan();
        let wh = fs2 * (PI * high / rate).tan();
        let bw = wh - wl;
        let w0 = (wl * wh).sqrt();
        let centre = 2.0 * (w0 / fs2).atan();

        let mut sections = Vec::with_capacity(order);
        for k in 0..order {
            // Prototype poles in the upper half plane's mirror: -exp(iπ(2k-n+1)/2n).
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            let proto = Complex64::new(-theta.sin(), theta.cos());
            let half = proto * (bw / 2.0);
            let root = (half * half - w0 * w0).sqrt();
            for analog in [half + root, half - root] {
                if analog.im < 0.0 {
                    continue;
                }
                let z = (fs2 + analog) / (fs2 - analog);
                let a = [-2.0 * z.re, z.norm_sqr()];
                let mut s = Biquad { b: [1.0, 0.0, -1.0], a };
                let g = 1.0 / s.response(centre).norm();
                s.b = [g, 0.0, -g];
                sections.push(s);
            }
        }
        if sections.len() != order {
            return Err(Error::InvalidConfig(format!(
                "band {low}-{high} Hz at {rate} Hz produced {} sections for order {order}",
                sections.len()
            )));
        }
        Ok(SosFilter { sections })
    }

    /// Number of poles.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Magnitude response at `freq` Hz for a `rate` Hz signal (single pass).
    pub fn gain(&self, freq: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * freq / rate;
        self.sections.iter().map(|s| s.response(w).norm()).product()
    }

    /// Causal filtering with per-section initial states (scaled by `x0`).
    fn run(&self, x: &mut [f64], init: Option<&[[f64; 2]]>, x0: f64) {
        for (i, s) in self.sections.iter().enumerate() {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let (mut z0, mut z1) = match init {
                Some(zi) => (zi[i][0] * x0, zi[i][1] * x0),
                None => (0.0, 0.0),
            };
            for v in x.iter_mut() {
                let inp = *v;
                let out = b0 * inp + z0;
                z0 = b1 * inp - a1 * out + z1;
                z1 = b2 * inp - a2 * out;
                *v = out;
            }
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, None, 0.0);
        y
    }

    /// Per-section steady-state step states of the cascade: each section's
    /// step state is scaled by the DC gain of the sections before it.
    fn cascade_step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.step_state();
                let out = [z[0] * scale, z[1] * scale];
                scale *= (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
                out
            })
            .collect()
    }

    /// Default edge padding: three times the filter order.
    pub fn pad_len(&self) -> usize {
        3 * self.order()
    }

    /// Forward-backward filtering with odd-reflection padding of
    /// [`Self::pad_len`] samples at each edge and step-response initial
    /// states, giving zero phase and squared magnitude response.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(Error::InvalidRecording(format!(
                "{n} samples is too short for forward-backward filtering (needs more than {pad})"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.cascade_step_states();
        let first = ext[0];
        self.run(&mut ext, Some(&zi), first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, Some(&zi), first);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}
