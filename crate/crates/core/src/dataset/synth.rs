//! Seeded synthetic EEG for desk-scale verification.
//!
//! Every random draw comes from [`SeededRng`] (ChaCha8 keyed by the seed,
//! with separate streams for fixed patterns, per-trial choices and noise),
//! so a `(config, seed)` pair reproduces the same bytes on any platform.
//!
//! Background noise is 1/f: white Gaussian samples through Kellet's
//! seven-term pink filter, scaled to unit stationary variance. Half the
//! noise power is independent per channel and half is spatially
//! correlated through a fixed random mixing matrix with unit-norm rows.
//! Noise streams run continuously across trials, like a recording.
//!
//! Modes:
//!
//! * `linear`: class 1 carries `+p·w(t)`, class 0 carries `−q·w(t)` where
//!   `q` mixes `p` with an orthogonal pattern. The sign of the projection
//!   onto `p·w` recovers the class, and the two classes also differ in
//!   spatial covariance.
//! * `xor`: signs `s1, s2` with label `[s1·s2 > 0]`; the signal is
//!   `s1·p·w1(t) + s2·q·w2(t)` with `w1`, `w2` zero-mean single sine cycles
//!   on disjoint time supports. Class means and class covariances are
//!   identical, so only a nonlinear decoder can read the label.
//! * `subject`: each subject adds its own fixed pattern times `w(t)`.
//!
//! Amplitudes: patterns have unit RMS across channels and waveforms peak
//! at 1, so `snr` is the ratio of signal peak to per-channel noise
//! standard deviation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use neurodecode_autodiff::SeededRng;
use serde::{Deserialize, Serialize};

use super::{concept_table, Concept, EpochSet, Label, Split, TrialMeta};
use crate::error::{Error, Result};
use crate::signal::{RawRecording, N_CHANNELS, N_SAMPLES};

/// Kellet filter output standard deviation for unit white input.
pub const PINK_STD: f64 = 3.052_527_546_333_385_6;
pub const RAW_RATE: u32 = 1000;
const RATE: f64 = 100.0;
const PRE: usize = 20;
const BURN_IN: usize = 4000;
const STREAM_PATTERNS: u64 = 1;
const STREAM_TRIALS: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// 64-electrode montage of the raw variant; `Cz` is the reference.
pub const RAW_CHANNELS: [&str; 64] = [
    "Fp1", "Fz", "F3", "F7", "FT9", "FC5", "FC1", "C3", "T7", "TP9", "CP5", "CP1", "Pz", "P3", "P7", "O1", "Oz", "O2",
    "P4", "P8", "TP10", "CP6", "CP2", "Cz", "C4", "T8", "FT10", "FC6", "FC2", "F4", "F8", "Fp2", "AF7", "AF3", "AFz",
    "F1", "F5", "FT7", "FC3", "C1", "C5", "TP7", "CP3", "P1", "P5", "PO7", "PO3", "POz", "PO4", "PO8", "P6", "P2",
    "CPz", "CP4", "TP8", "C6", "C2", "FC4", "FT8", "F6", "AF8", "AF4", "F2", "Iz",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    Linear,
    Xor,
    #[serde(alias = "subject_signature")]
    Subject,
}

impl fmt::Display for SynthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthMode::Linear => "linear",
            SynthMode::Xor => "xor",
            SynthMode::Subject => "subject",
        })
    }
}

impl FromStr for SynthMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(SynthMode::Linear),
            "xor" => Ok(SynthMode::Xor),
            "subject" | "subject_signature" => Ok(SynthMode::Subject),
            _ => Err(format!("unknown synthetic mode {s:?} (linear, xor, subject)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub n_trials: usize,
    pub n_subjects: u32,
    pub snr: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_trials == 0 || self.n_trials % 2 != 0 {
            return bad("n_trials must be even and positive");
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad("snr must be positive");
        }
        if self.n_subjects == 0 {
            return bad("n_subjects must be at least 1");
        }
        if self.mode == SynthMode::Subject && self.n_subjects < 2 {
            return bad("subject mode needs at least 2 subjects");
        }
        Ok(())
    }
}

/// Evoked bump: a Gaussian-windowed 5 Hz half cycle centred 170 ms after
/// onset (`t` in seconds), peak 1.
pub fn erp_waveform(t: f64) -> f64 {
    let d = t - 0.17;
    if d.abs() > 0.05 {
        return 0.0;
    }
    (2.0 * PI * 5.0 * d).cos() * (-d * d / (2.0 * 0.04 * 0.04)).exp()
}

/// One full sine cycle of length 160 ms starting at `start` seconds.
fn cycle(t: f64, start: f64) -> f64 {
    let u = (t - start) / 0.16;
    if (0.0..1.0).contains(&u) {
        (2.0 * PI * u).sin()
    } else {
        0.0
    }
}

fn xor_waveforms(t: f64) -> (f64, f64) {
    (cycle(t, 0.04), cycle(t, 0.22))
}

fn unit_rms(v: &mut [f64]) {
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    v.iter_mut().for_each(|x| *x /= rms);
}

fn random_pattern(rng: &mut SeededRng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..N_CHANNELS).map(|_| rng.normal()).collect();
    unit_rms(&mut p);
    p
}

struct Patterns {
    p: Vec<f64>,
    q: Vec<f64>,
    mixing: Vec<f64>,
    subjects: Vec<Vec<f64>>,
}

impl Patterns {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = SeededRng::with_stream(cfg.seed, STREAM_PATTERNS);
        let p = random_pattern(&mut rng);
        let mut q = random_pattern(&mut rng);
        if cfg.mode == SynthMode::Linear {
            // q = p/2 + r with r ⟂ p, both unit RMS.
            let dot = q.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / N_CHANNELS as f64;
            q.iter_mut().zip(&p).for_each(|(a, b)| *a -= dot * b);
            unit_rms(&mut q);
            q.iter_mut().zip(&p).for_each(|(a, b)| *a += 0.5 * b);
            unit_rms(&mut q);
        }
        let mut mixing: Vec<f64> = (0..N_CHANNELS * N_CHANNELS).map(|_| rng.normal()).collect();
        for row in mixing.chunks_mut(N_CHANNELS) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= n);
        }
        let subjects = (0..cfg.n_subjects).map(|_| random_pattern(&mut rng)).collect();
        Patterns { p, q, mixing, subjects }
    }
}

/// Continuous 1/f noise generator for all electrodes.
struct Noise {
    rng: SeededRng,
    own: Vec<[f64; 7]>,
    shared: Vec<[f64; 7]>,
    mixing: Vec<f64>,
}

fn kellet(b: &mut [f64; 7], white: f64) -> f64 {
    b[0] = 0.99886 * b[0] + white * 0.0555179;
    b[1] = 0.99332 * b[1] + white * 0.0750759;
    b[2] = 0.96900 * b[2] + white * 0.1538520;
    b[3] = 0.86650 * b[3] + white * 0.3104856;
    b[4] = 0.55000 * b[4] + white * 0.5329522;
    b[5] = -0.7616 * b[5] - white * 0.0168980;
    let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
    b[6] = white * 0.115926;
    out / PINK_STD
}

impl Noise {
    fn new(seed: u64, mixing: Vec<f64>) -> Self {
        let mut n = Noise {
            rng: SeededRng::with_stream(seed, STREAM_NOISE),
            own: vec![[0.0; 7]; N_CHANNELS],
            shared: vec![[0.0; 7]; N_CHANNELS],
            mixing,
        };
        let mut scratch = vec![0.0; N_CHANNELS];
        for _ in 0..BURN_IN {
            n.step(&mut scratch);
        }
        n
    }

    /// One time sample for every electrode.
    fn step(&mut self, out: &mut [f64]) {
        let mut shared = [0.0; N_CHANNELS];
        for (s, b) in shared.iter_mut().zip(self.shared.iter_mut()) {
            *s = kellet(b, self.rng.normal());
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (c, o) in out.iter_mut().enumerate() {
            let own = kellet(&mut self.own[c], self.rng.normal());
            let row = &self.mixing[c * N_CHANNELS..(c + 1) * N_CHANNELS];
            let mixed: f64 = row.iter().zip(&shared).map(|(a, b)| a * b).sum();
            *o = h * (own + mixed);
        }
    }
}

/// Class, signs, subject and concept of one trial.
struct TrialPlan {
    class: usize,
    signs: (f64, f64),
    subject: u32,
    concept: usize,
}

fn plan_trials(cfg: &SynthConfig, concepts: &[Concept]) -> Vec<TrialPlan> {
    let mut rng = SeededRng::with_stream(cfg.seed, STREAM_TRIALS);
    let n = cfg.n_trials;
    let mut classes: Vec<usize> = (0..n).map(|i| i % 2).collect();
    rng.shuffle(&mut classes);
    let alive: Vec<usize> = (0..concepts.len()).filter(|&i| concepts[i].label == Label::Alive).collect();
    let nonliving: Vec<usize> = (0..concepts.len()).filter(|&i| concepts[i].label == Label::Nonliving).collect();
    let k = cfg.n_subjects as usize;
    (0..n)
        .map(|i| {
            let subject = (i * k / n) as u32 + 1;
            match cfg.mode {
                SynthMode::Subject => TrialPlan {
                    class: (subject - 1) as usize,
                    signs: (1.0, 1.0),
                    subject,
                    concept: rng.below(concepts.len()),
                },
                _ => {
                    let class = classes[i];
                    let pool = if class == 1 { &alive } else { &nonliving };
                    let s1 = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                    let s2 = if class == 1 { s1 } else { -s1 };
                    TrialPlan {
                        class,
                        signs: (s1, s2),
                        subject,
                        concept: pool[rng.below(pool.len())],
                    }
                }
            }
        })
        .collect()
}

fn trial_meta(i: usize, plan: &TrialPlan, concepts: &[Concept]) -> TrialMeta {
    let c = &concepts[plan.concept];
    TrialMeta {
        trial_id: i as u64,
        subject: plan.subject,
        concept_id: c.id,
        concept_name: c.name.clone(),
        category: c.category.to_string(),
        label: c.label as u8,
        split: Split::Train,
    }
}

/// Noise-free signal of one trial on electrode `c` at time `t` seconds
/// after onset.
fn signal(cfg: &SynthConfig, pat: &Patterns, plan: &TrialPlan, c: usize, t: f64) -> f64 {
    let amp = cfg.snr;
    match cfg.mode {
        SynthMode::Linear => {
            let w = erp_waveform(t);
            if plan.class == 1 {
                amp * pat.p[c] * w
            } else {
                -amp * pat.q[c] * w
            }
        }
        SynthMode::Xor => {
            let (w1, w2) = xor_waveforms(t);
            amp * (plan.signs.0 * pat.p[c] * w1 + plan.signs.1 * pat.q[c] * w2)
        }
        SynthMode::Subject => amp * pat.subjects[(plan.subject - 1) as usize][c] * erp_waveform(t),
    }
}

/// Preprocessed epochs (63 × 50, baseline-corrected and z-scored) drawn
/// directly at 100 Hz.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<EpochSet> {
    cfg.validate()?;
    let concepts = concept_table();
    let pat = Patterns::new(cfg);
    let plans = plan_trials(cfg, &concepts);
    let mut noise = Noise::new(cfg.seed, pat.mixing.clone());
    let total = PRE + N_SAMPLES;
    let mut data = Vec::with_capacity(cfg.n_trials * N_CHANNELS * N_SAMPLES);
    let mut meta = Vec::with_capacity(cfg.n_trials);
    let mut window = vec![0.0; N_CHANNELS * total];
    let mut sample = vec![0.0; N_CHANNELS];
    for (i, plan) in plans.iter().enumerate() {
        for s in 0..total {
            noise.step(&mut sample);
            let t = (s as f64 - PRE as f64) / RATE;
            for c in 0..N_CHANNELS {
                window[c * total + s] = sample[c] + signal(cfg, &pat, plan, c, t);
            }
        }
        for ch in window.chunks(total) {
            let base = ch[..PRE].iter().sum::<f64>() / PRE as f64;
            let crop = &ch[PRE..];
            let m = crop.iter().sum::<f64>() / N_SAMPLES as f64 - base;
            let sd = (crop.iter().map(|v| (v - base - m).powi(2)).sum::<f64>() / N_SAMPLES as f64).sqrt();
            data.extend(crop.iter().map(|v| ((v - base - m) / (sd + 1e-8)) as f32));
        }
        meta.push(trial_meta(i, plan, &concepts));
    }
    EpochSet::new(N_CHANNELS, N_SAMPLES, data, meta)
}

/// Continuous 64-channel recording at 1000 Hz with stimuli every 100 ms
/// (overlapping responses), a common drift on the `Cz` reference and
/// 50 Hz line noise, for exercising the full preprocessing pipeline.
pub fn generate_raw(cfg: &SynthConfig) -> Result<(RawRecording, Vec<TrialMeta>)> {
    cfg.validate()?;
    let concepts = concept_table();
    let pat = Patterns::new(cfg);
    let plans = plan_trials(cfg, &concepts);
    let rate = RAW_RATE as usize;
    let lead = rate;
    let spacing = rate / 10;
    let len = lead + cfg.n_trials * spacing + rate;
    let ref_idx = RAW_CHANNELS.iter().position(|&c| c == "Cz").expect("montage has Cz");

    let mut noise = Noise::new(cfg.seed, pat.mixing.clone());
    let mut ref_state = [0.0; 7];
    let mut ref_rng = SeededRng::with_stream(cfg.seed, STREAM_NOISE + 1);
    let mut data = vec![vec![0.0; len]; RAW_CHANNELS.len()];
    let mut sample = vec![0.0; N_CHANNELS];
    for s in 0..len {
        noise.step(&mut sample);
        let reference = 5.0 * kellet(&mut ref_state, ref_rng.normal());
        let line = 0.5 * (2.0 * PI * 50.0 * s as f64 / rate as f64).sin();
        let mut e = 0;
        for (ch, row) in data.iter_mut().enumerate() {
            row[s] = reference + line;
            if ch != ref_idx {
                row[s] += sample[e];
                e += 1;
            }
        }
    }
    let onsets: Vec<usize> = (0..cfg.n_trials).map(|i| lead + i * spacing).collect();
    for (plan, &onset) in plans.iter().zip(&onsets) {
        for k in 0..rate / 2 {
            let t = k as f64 / rate as f64;
            let mut e = 0;
            for (ch, row) in data.iter_mut().enumerate() {
                if ch != ref_idx {
                    row[onset + k] += signal(cfg, &pat, plan, e, t);
                    e += 1;
                }
            }
        }
    }
    let meta: Vec<TrialMeta> = plans.iter().enumerate().map(|(i, p)| trial_meta(i, p, &concepts)).collect();
    let rec = RawRecording::new(
        data,
        RAW_CHANNELS.iter().map(|s| s.to_string()).collect(),
        RAW_RATE,
        onsets.iter().zip(&meta).map(|(&o, m)| (o, m.trial_id)).collect(),
    )?;
    Ok((rec, meta))
}
