use serde::{Deserialize, Serialize};

use super::filter::SosFilter;
use super::{N_CHANNELS, N_SAMPLES};
use crate::error::{Error, Result};

/// Prototype order of the band-pass (the filter has twice as many poles,
/// and forward-backward application doubles the effective order again).
pub const FILTER_ORDER: usize = 4;

/// Continuous multichannel recording in microvolts.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecording {
    /// `channels × samples`.
    pub data: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
    pub sample_rate: u32,
    /// `(sample_index, trial_id)` per stimulus onset.
    pub events: Vec<(usize, u64)>,
}

impl RawRecording {
    pub fn new(data: Vec<Vec<f64>>, channel_names: Vec<String>, sample_rate: u32, events: Vec<(usize, u64)>) -> Result<Self> {
        let rec = RawRecording {
            data,
            channel_names,
            sample_rate,
            events,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRecording(m));
        if self.data.len() != self.channel_names.len() {
            return bad(format!("{} data rows for {} channel names", self.data.len(), self.channel_names.len()));
        }
        let n = self.n_samples();
        if self.data.iter().any(|c| c.len() != n) {
            return bad("channels have unequal lengths".into());
        }
        let mut names: Vec<&String> = self.channel_names.iter().collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate channel name {:?}", w[0]));
        }
        if self.sample_rate < 100 {
            return bad(format!("sample rate {} Hz below 100 Hz", self.sample_rate));
        }
        if let Some(&(s, id)) = self.events.iter().find(|&&(s, _)| s >= n) {
            return bad(format!("event for trial {id} at sample {s} beyond {n} samples"));
        }
        Ok(())
    }

    fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }
}

/// A stimulus-locked window, `channels × samples`, with `t0_offset`
/// samples preceding the onset.
#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    pub trial_id: u64,
    pub data: Vec<Vec<f64>>,
    pub t0_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ref_channel: String,
    pub band: Band,
    pub target_rate: u32,
    /// Milliseconds relative to stimulus onset.
    pub baseline_window: [f64; 2],
    pub crop_window: [f64; 2],
    pub zscore_epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ref_channel: "Cz".into(),
            band: Band {
                low_hz: 1.0,
                high_hz: 40.0,
            },
            target_rate: 100,
            baseline_window: [-200.0, 0.0],
            crop_window: [0.0, 500.0],
            zscore_epsilon: 1e-8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let nyq = self.target_rate as f64 / 2.0;
        if !(self.band.low_hz > 0.0 && self.band.low_hz < self.band.high_hz && self.band.high_hz < nyq) {
            return Err(Error::BandOutOfRange {
                low: self.band.low_hz,
                high: self.band.high_hz,
                nyquist: nyq,
            });
        }
        if self.baseline_window[1] != self.crop_window[0] {
            return Err(Error::InvalidConfig("baseline window must end where the crop window starts".into()));
        }
        if self.baseline_window[0] >= self.baseline_window[1] || self.crop_window[0] >= self.crop_window[1] {
            return Err(Error::InvalidConfig("empty baseline or crop window".into()));
        }
        if self.zscore_epsilon <= 0.0 {
            return Err(Error::InvalidConfig("zscore_epsilon must be positive".into()));
        }
        Ok(())
    }

    fn samples(&self, ms: f64) -> usize {
        (ms * self.target_rate as f64 / 1000.0).round() as usize
    }
}

/// Subtracts the reference channel from every other channel and drops it.
pub fn rereference(rec: &RawRecording, reference: &str) -> Result<RawRecording> {
    let r = rec.channel_index(reference)?;
    let refc = &rec.data[r];
    let mut data = Vec::with_capacity(rec.data.len() - 1);
    let mut names = Vec::with_capacity(rec.data.len() - 1);
    for (i, (ch, name)) in rec.data.iter().zip(&rec.channel_names).enumerate() {
        if i != r {
            data.push(ch.iter().zip(refc).map(|(a, b)| a - b).collect());
            names.push(name.clone());
        }
    }
    Ok(RawRecording {
        data,
        channel_names: names,
        sample_rate: rec.sample_rate,
        events: rec.events.clone(),
    })
}

/// Zero-phase Butterworth band-pass applied to every channel.
pub fn bandpass(rec: &RawRecording, low: f64, high: f64) -> Result<RawRecording> {
    let filt = SosFilter::butterworth_bandpass(FILTER_ORDER, low, high, rec.sample_rate as f64)?;
    let data = rec.data.iter().map(|ch| filt.filtfilt(ch)).collect::<Result<_>>()?;
    Ok(RawRecording {
        data,
        channel_names: rec.channel_names.clone(),
        sample_rate: rec.sample_rate,
        events: rec.events.clone(),
    })
}

/// Keeps every `rate / target`-th sample starting at sample 0; event onsets
/// are floor-divided by the same factor.
pub fn downsample(rec: &RawRecording, target: u32) -> Result<RawRecording> {
    if target == 0 || rec.sample_rate % target != 0 {
        return Err(Error::DecimationFactor {
            rate: rec.sample_rate,
            target,
        });
    }
    let k = (rec.sample_rate / target) as usize;
    Ok(RawRecording {
        data: rec.data.iter().map(|ch| ch.iter().step_by(k).copied().collect()).collect(),
        channel_names: rec.channel_names.clone(),
        sample_rate: target,
        events: rec.events.iter().map(|&(s, id)| (s / k, id)).collect(),
    })
}

/// A trial whose window does not fit inside the recording.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub trial_id: u64,
    pub onset: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct EpochExtraction {
    pub epochs: Vec<Epoch>,
    pub skipped: Vec<SkippedTrial>,
}

/// Cuts `[onset − pre, onset + post)` around every event, with `pre` and
/// `post` converted from milliseconds at the recording's rate. Windows may
/// overlap.
pub fn extract_epochs(rec: &RawRecording, pre_ms: f64, post_ms: f64) -> EpochExtraction {
    let to_samples = |ms: f64| (ms * rec.sample_rate as f64 / 1000.0).round() as usize;
    let (pre, post) = (to_samples(pre_ms), to_samples(post_ms));
    let n = rec.n_samples();
    let mut out = EpochExtraction::default();
    for &(onset, trial_id) in &rec.events {
        if onset < pre || onset + post > n {
            let reason = if onset < pre {
                format!("window starts {} samples before the recording", pre - onset)
            } else {
                format!("window ends {} samples after the recording", onset + post - n)
            };
            out.skipped.push(SkippedTrial { trial_id, onset, reason });
            continue;
        }
        out.epochs.push(Epoch {
            trial_id,
            data: rec.data.iter().map(|ch| ch[onset - pre..onset + post].to_vec()).collect(),
            t0_offset: pre,
        });
    }
    out
}

/// Subtracts each channel's mean over the pre-onset samples.
pub fn baseline_correct(e: &Epoch) -> Result<Epoch> {
    if e.t0_offset == 0 {
        return Err(Error::EmptyBaseline);
    }
    let data = e
        .data
        .iter()
        .map(|ch| {
            let m = ch[..e.t0_offset].iter().sum::<f64>() / e.t0_offset as f64;
            ch.iter().map(|v| v - m).collect()
        })
        .collect();
    Ok(Epoch {
        trial_id: e.trial_id,
        data,
        t0_offset: e.t0_offset,
    })
}

/// Keeps `len` samples from the onset and z-scores each channel with the
/// population standard deviation plus `eps`. Returns `channels × len`,
/// row-major.
pub fn crop_and_zscore(e: &Epoch, len: usize, eps: f64) -> Result<Vec<f64>> {
    let total = e.data.first().map_or(0, Vec::len);
    if total < e.t0_offset + len {
        return Err(Error::InvalidRecording(format!(
            "epoch of {total} samples cannot hold {len} samples after offset {}",
            e.t0_offset
        )));
    }
    let mut out = Vec::with_capacity(e.data.len() * len);
    for ch in &e.data {
        let w = &ch[e.t0_offset..e.t0_offset + len];
        let m = w.iter().sum::<f64>() / len as f64;
        let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / len as f64).sqrt();
        out.extend(w.iter().map(|v| (v - m) / (sd + eps)));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOutput {
    /// `(trial_id, 63 × 50 row-major epoch)` in event order.
    pub epochs: Vec<(u64, Vec<f32>)>,
    pub skipped: Vec<SkippedTrial>,
}

/// The full chain in its fixed order. Computes in `f64`, emits `f32`.
pub fn run_pipeline(rec: &RawRecording, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    rec.validate()?;
    let r = rereference(rec, &cfg.ref_channel)?;
    if r.data.len() != N_CHANNELS {
        return Err(Error::ChannelCount {
            expected: N_CHANNELS,
            found: r.data.len(),
        });
    }
    if cfg.band.high_hz >= r.sample_rate as f64 / 2.0 {
        return Err(Error::BandOutOfRange {
            low: cfg.band.low_hz,
            high: cfg.band.high_hz,
            nyquist: r.sample_rate as f64 / 2.0,
        });
    }
    let r = bandpass(&r, cfg.band.low_hz, cfg.band.high_hz)?;
    let r = downsample(&r, cfg.target_rate)?;
    let pre_ms = cfg.crop_window[0] - cfg.baseline_window[0];
    let post_ms = cfg.crop_window[1] - cfg.crop_window[0];
    let len = cfg.samples(post_ms);
    if len != N_SAMPLES {
        return Err(Error::InvalidConfig(format!("crop window yields {len} samples, expected {N_SAMPLES}")));
    }
    let ex = extract_epochs(&r, pre_ms, post_ms);
    let mut out = PipelineOutput {
        epochs: Vec::with_capacity(ex.epochs.len()),
        skipped: ex.skipped,
    };
    for e in &ex.epochs {
        let b = baseline_correct(e)?;
        let z = crop_and_zscore(&b, len, cfg.zscore_epsilon)?;
        out.epochs.push((e.trial_id, z.into_iter().map(|v| v as f32).collect()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(data: Vec<Vec<f64>>, names: &[&str]) -> RawRecording {
        RawRecording::new(data, names.iter().map(|s| s.to_string()).collect(), 100, vec![]).unwrap()
    }

    #[test]
    fn rereference_three_channel_toy() {
        let rec = toy(vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 1.0]], &["a", "b", "ref"]);
        let out = rereference(&rec, "ref").unwrap();
        assert_eq!(out.channel_names, vec!["a", "b"]);
        assert_eq!(out.data, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn rereference_unknown_channel() {
        let rec = toy(vec![vec![1.0]], &["a"]);
        assert!(matches!(rereference(&rec, "Cz"), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn rereference_against_itself_cancels() {
        let ch = vec![0.3, -2.0, 7.5];
        let rec = toy(vec![ch.clone(), ch.clone(), ch], &["a", "b", "Cz"]);
        let out = rereference(&rec, "Cz").unwrap();
        assert!(out.data.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn recording_rejects_duplicates_and_bad_events() {
        let names = vec!["a".to_string(), "a".to_string()];
        assert!(RawRecording::new(vec![vec![0.0]; 2], names, 100, vec![]).is_err());
        let names = vec!["a".to_string()];
        assert!(RawRecording::new(vec![vec![0.0; 4]], names.clone(), 100, vec![(4, 0)]).is_err());
        assert!(RawRecording::new(vec![vec![0.0; 4]], names, 50, vec![]).is_err());
    }

    #[test]
    fn downsample_rules() {
        let rec = RawRecording::new(vec![vec![2.5; 1000]], vec!["a".into()], 1000, vec![(1234 % 1000, 1)]).unwrap();
        let d = downsample(&rec, 100).unwrap();
        assert_eq!(d.data[0], vec![2.5; 100]);
        assert_eq!(d.sample_rate, 100);
        assert_eq!(d.events, vec![(23, 1)]);
        let same = downsample(&d, 100).unwrap();
        assert_eq!(same, d);
        let long = RawRecording::new(vec![vec![0.0; 2000]], vec!["a".into()], 1000, vec![(1234, 9)]).unwrap();
        assert_eq!(downsample(&long, 100).unwrap().events, vec![(123, 9)]);
        assert!(matches!(downsample(&rec, 300), Err(Error::DecimationFactor { .. })));
    }

    #[test]
    fn epoch_windows() {
        let ch: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let rec = RawRecording::new(vec![ch], vec!["a".into()], 100, vec![(100, 1), (10, 2), (110, 3), (260, 4)]).unwrap();
        let ex = extract_epochs(&rec, 200.0, 500.0);
        assert_eq!(ex.epochs.len(), 2);
        assert_eq!(ex.epochs[0].data[0].first(), Some(&80.0));
        assert_eq!(ex.epochs[0].data[0].last(), Some(&149.0));
        assert_eq!(ex.epochs[0].data[0].len(), 70);
        assert_eq!(ex.epochs[0].t0_offset, 20);
        // Overlapping 10 Hz presentation: both produced.
        assert_eq!(ex.epochs[1].trial_id, 3);
        let skipped: Vec<u64> = ex.skipped.iter().map(|s| s.trial_id).collect();
        assert_eq!(skipped, vec![2, 4]);
    }

    #[test]
    fn baseline_arithmetic() {
        let e = Epoch {
            trial_id: 0,
            data: vec![vec![1.0, 3.0, 2.0, 2.0], vec![5.0; 4]],
            t0_offset: 2,
        };
        let b = baseline_correct(&e).unwrap();
        assert_eq!(b.data[0], vec![-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.data[1], vec![0.0; 4]);
        let zero = Epoch { t0_offset: 0, ..e };
        assert!(matches!(baseline_correct(&zero), Err(Error::EmptyBaseline)));
    }

    #[test]
    fn zscore_contract() {
        let alt: Vec<f64> = (0..70).map(|i| (i % 2) as f64).collect();
        let e = Epoch {
            trial_id: 0,
            data: vec![alt, vec![4.0; 70]],
            t0_offset: 20,
        };
        let z = crop_and_zscore(&e, 50, 1e-8).unwrap();
        assert_eq!(z.len(), 100);
        let (a, c) = z.split_at(50);
        let m = a.iter().sum::<f64>() / 50.0;
        let sd = (a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!(m.abs() < 1e-6);
        assert!((sd - 1.0).abs() < 1e-4);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let mut c = PipelineConfig::default();
        c.baseline_window = [-200.0, -50.0];
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.band.high_hz = 55.0;
        assert!(c.validate().is_err());
    }
}
