//! Raw recording to normalized 63 × 50 epochs: re-reference, band-pass,
//! decimate, epoch, baseline-correct, crop and z-score.

mod filter;
mod pipeline;

pub use filter::{Biquad, SosFilter};
pub use pipeline::{
    bandpass, baseline_correct, crop_and_zscore, downsample, extract_epochs, rereference, run_pipeline, Epoch,
    EpochExtraction, PipelineConfig, PipelineOutput, RawRecording, SkippedTrial, FILTER_ORDER,
};

/// Electrodes per epoch after the reference channel is dropped.
pub const N_CHANNELS: usize = 63;
/// Samples per epoch after cropping (500 ms at 100 Hz).
pub const N_SAMPLES: usize = 50;
