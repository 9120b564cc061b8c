//! Audio loading and preprocessing.
//!
//! Every recording passes through the same chain before feature
//! extraction: decode, resample to the canonical rate, peak-normalize,
//! trim surrounding silence, validate. The chain is deterministic, so
//! reprocessing a file yields byte-identical samples.

pub mod resample;
pub mod wav;

use std::path::Path;

use crate::error::{Error, Result};

pub use resample::resample;
pub use wav::{read_wav, write_wav, Audio};

/// Canonical sample rate all recordings are converted to.
pub const SAMPLE_RATE: u32 = 44_100;

/// Minimum peak amplitude for a recording to count as non-silent.
pub const MIN_PEAK: f64 = 1e-4;

/// Absolute amplitude below which edge samples count as silence when
/// trimming. Applied after normalization, so it is relative to full scale.
pub const TRIM_THRESHOLD: f64 = 1e-4;

/// Context kept on each side of the detected active region when trimming.
pub const TRIM_GUARD_MS: f64 = 50.0;

/// Minimum duration for a recording to be usable.
pub const MIN_DURATION_MS: f64 = 100.0;

/// Why [`validate`] rejected a segment. Not a hard error: callers that
/// screen whole manifests record the reason and move on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    TooShort,
    TooQuiet,
}

impl RejectReason {
    /// Stable label used in rejection logs.
    pub fn label(&self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::TooQuiet => "too_quiet",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Scales samples so the peak absolute amplitude is exactly 1.
///
/// A single positive factor is applied, so the waveform shape is
/// preserved. All-zero signals have no meaningful scale and are
/// rejected.
pub fn normalize_amplitude(audio: &mut Audio) -> Result<()> {
    let peak = peak_amplitude(&audio.samples);
    if peak == 0.0 {
        return Err(Error::DegenerateSignal(
            "cannot normalize an all-zero signal".into(),
        ));
    }
    for s in &mut audio.samples {
        *s /= peak;
    }
    Ok(())
}

/// Largest absolute sample value.
pub fn peak_amplitude(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()))
}

/// Removes leading and trailing samples below [`TRIM_THRESHOLD`],
/// keeping up to [`TRIM_GUARD_MS`] of context on each side of the
/// active region: with i0/i1 the first/last index at or above the
/// threshold, the output is samples[max(0, i0-guard) .. min(len, i1+guard)].
///
/// Trimming an already-trimmed signal changes nothing. A signal with no
/// sample at or above the threshold has no active region and is
/// rejected.
pub fn trim_silence(audio: &mut Audio) -> Result<()> {
    let above = |s: &f64| s.abs() >= TRIM_THRESHOLD;
    let Some(first) = audio.samples.iter().position(above) else {
        return Err(Error::DegenerateSignal(
            "no sample reaches the trim threshold".into(),
        ));
    };
    let last = audio.samples.iter().rposition(above).unwrap();

    let guard = (TRIM_GUARD_MS * audio.sample_rate as f64 / 1000.0).round() as usize;
    let start = first.saturating_sub(guard);
    let end = (last + guard).min(audio.samples.len());
    audio.samples.drain(end..);
    audio.samples.drain(..start);
    Ok(())
}

/// Screens a segment against duration and peak-amplitude floors.
///
/// Returns the rejection reason instead of an error so manifest-level
/// filtering can log it per recording.
pub fn validate(
    audio: &Audio,
    min_duration_ms: f64,
    min_peak: f64,
) -> std::result::Result<(), RejectReason> {
    let duration_ms = audio.samples.len() as f64 * 1000.0 / audio.sample_rate as f64;
    if duration_ms < min_duration_ms {
        return Err(RejectReason::TooShort);
    }
    if peak_amplitude(&audio.samples) < min_peak {
        return Err(RejectReason::TooQuiet);
    }
    Ok(())
}

/// Full preprocessing chain on decoded audio: resample, normalize,
/// trim, validate.
///
/// The peak screen runs on the raw signal before normalization:
/// normalizing first would amplify noise-floor recordings into
/// apparently valid ones.
pub fn preprocess(mut audio: Audio, id: &str) -> Result<Audio> {
    if peak_amplitude(&audio.samples) < MIN_PEAK {
        return Err(Error::AudioInvalid {
            id: id.to_string(),
            reason: RejectReason::TooQuiet.label().to_string(),
        });
    }
    audio = resample(&audio, SAMPLE_RATE)?;
    normalize_amplitude(&mut audio)?;
    trim_silence(&mut audio)?;
    validate(&audio, MIN_DURATION_MS, MIN_PEAK).map_err(|reason| Error::AudioInvalid {
        id: id.to_string(),
        reason: reason.label().to_string(),
    })?;
    Ok(audio)
}

/// Reads a WAV file and runs [`preprocess`] on it.
pub fn preprocess_file(path: &Path, id: &str) -> Result<Audio> {
    preprocess(read_wav(path)?, id)
}
