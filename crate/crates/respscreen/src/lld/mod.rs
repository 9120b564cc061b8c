//! Frame-level low-level descriptor (LLD) extraction.
//!
//! A recording is reduced to a frames x 130 matrix: 65 base
//! descriptors (4 energy, 55 spectral, 26 of which are
//! modulation-filtered band trajectories, and 6 voicing) plus a
//! first-order delta for each. Column order is fixed and carried in
//! `descriptor_names`; downstream feature layouts depend on it.

pub mod energy;
pub mod framing;
pub mod spectral;
pub mod voicing;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use framing::{Frames, WindowFunction};

/// Base descriptor count (before deltas).
pub const N_BASE_LLDS: usize = 65;
/// Total descriptor count including first-order deltas.
pub const N_LLDS: usize = 2 * N_BASE_LLDS;

/// Framing and FFT parameters for extraction. The defaults are the
/// values used throughout: 25 ms Hamming window at a 10 ms hop with a
/// 2048-point FFT, and a 60 ms window for the pitch path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_length_ms: f64,
    pub hop_ms: f64,
    pub window_function: WindowFunction,
    pub fft_size: usize,
    pub pitch_window_length_ms: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            window_length_ms: 25.0,
            hop_ms: 10.0,
            window_function: WindowFunction::Hamming,
            fft_size: 2048,
            pitch_window_length_ms: 60.0,
        }
    }
}

impl FrameConfig {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn pitch_window_samples(&self, sample_rate: u32) -> usize {
        (self.pitch_window_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let all_positive = self.window_length_ms > 0.0
            && self.hop_ms > 0.0
            && self.pitch_window_length_ms > 0.0
            && self.fft_size > 0;
        if !all_positive {
            return Err(Error::Config("framing parameters must be positive".into()));
        }
        if self.hop_ms > self.window_length_ms {
            return Err(Error::Config(format!(
                "hop {} ms exceeds window {} ms",
                self.hop_ms, self.window_length_ms
            )));
        }
        if self.fft_size < self.window_samples(sample_rate) {
            return Err(Error::Config(format!(
                "fft size {} is smaller than the {}-sample window",
                self.fft_size,
                self.window_samples(sample_rate)
            )));
        }
        Ok(())
    }
}

/// Per-frame descriptor matrix.
#[derive(Debug, Clone)]
pub struct LLDMatrix {
    /// frames x descriptors.
    pub values: Vec<Vec<f64>>,
    pub descriptor_names: Vec<String>,
    /// Frame center times in seconds.
    pub frame_times: Vec<f64>,
}

impl LLDMatrix {
    pub fn n_frames(&self) -> usize {
        self.values.len()
    }

    pub fn n_descriptors(&self) -> usize {
        self.descriptor_names.len()
    }

    /// Copy of column `j` as a contour over frames.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

/// Names of the 65 base descriptors, in column order.
pub fn base_descriptor_names() -> Vec<String> {
    let mut names = vec![
        "rms_energy".to_string(),
        "zcr".to_string(),
        "loudness".to_string(),
        "mod_audspec_sum".to_string(),
    ];
    for b in 0..spectral::N_MEL_BANDS {
        names.push(format!("mod_audspec_band_{b:02}"));
    }
    for c in 1..=spectral::N_MFCC {
        names.push(format!("mfcc_{c:02}"));
    }
    names.extend(
        [
            "spectral_flux",
            "spectral_centroid",
            "spectral_entropy",
            "spectral_slope",
            "sharpness",
            "harmonicity",
            "rolloff_25",
            "rolloff_50",
            "rolloff_75",
            "rolloff_90",
            "spectral_variance",
            "spectral_skewness",
            "spectral_kurtosis",
            "band_energy_250_650",
            "band_energy_1000_4000",
            "f0",
            "voicing_prob",
            "log_hnr",
            "jitter_local",
            "jitter_delta",
            "shimmer_local",
        ]
        .map(String::from),
    );
    debug_assert_eq!(names.len(), N_BASE_LLDS);
    names
}

/// Names of all 130 descriptors: the base set followed by `de_`-prefixed
/// first-order deltas in the same order.
pub fn descriptor_names() -> Vec<String> {
    let base = base_descriptor_names();
    let deltas: Vec<String> = base.iter().map(|n| format!("de_{n}")).collect();
    base.into_iter().chain(deltas).collect()
}

/// First-order delta by regression over two frames on each side, with
/// boundary frames replicated: d[t] = sum_n n (x[t+n] - x[t-n]) / 10.
pub fn delta_contour(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    (0..n as isize)
        .map(|t| ((at(t + 1) - at(t - 1)) + 2.0 * (at(t + 2) - at(t - 2))) / 10.0)
        .collect()
}

/// Extracts the full LLD matrix for a preprocessed segment.
///
/// Spectral and energy descriptors share one framing; the voicing
/// group runs on its longer window at the same hop and is aligned to
/// spectral frames by nearest center time.
pub fn extract_lld_matrix(
    samples: &[f64],
    sample_rate: u32,
    config: &FrameConfig,
) -> Result<LLDMatrix> {
    config.validate(sample_rate)?;
    let win = config.window_samples(sample_rate);
    let hop = config.hop_samples(sample_rate);
    let pitch_win = config.pitch_window_samples(sample_rate);

    let frames = Frames::new(samples, sample_rate, win, hop, config.window_function)?;
    let n = frames.count();

    let rms = energy::rms_energy(&frames);
    let zcr = energy::zero_crossing_rate(&frames);
    let spec = spectral::compute_spectral(&frames, config.fft_size, sample_rate);
    let voi = voicing::compute_voicing(samples, sample_rate, pitch_win, hop)?;

    // Nearest-center-time alignment of pitch frames to spectral frames.
    let align: Vec<usize> = (0..n)
        .map(|t| nearest_index(&voi.center_times, frames.center_time(t)))
        .collect();

    let mut base = vec![vec![0.0f64; N_BASE_LLDS]; n];
    for t in 0..n {
        let row = &mut base[t];
        row[0] = rms[t];
        row[1] = zcr[t];
        row[2] = spec.loudness[t];
        row[3] = spec.mod_sum[t];
        let mut j = 4;
        for b in 0..spectral::N_MEL_BANDS {
            row[j] = spec.mod_bands[t][b];
            j += 1;
        }
        for c in 0..spectral::N_MFCC {
            row[j] = spec.mfcc[t][c];
            j += 1;
        }
        row[j] = spec.flux[t];
        row[j + 1] = spec.centroid[t];
        row[j + 2] = spec.entropy[t];
        row[j + 3] = spec.slope[t];
        row[j + 4] = spec.sharpness[t];
        row[j + 5] = spec.harmonicity[t];
        row[j + 6] = spec.rolloff[t][0];
        row[j + 7] = spec.rolloff[t][1];
        row[j + 8] = spec.rolloff[t][2];
        row[j + 9] = spec.rolloff[t][3];
        row[j + 10] = spec.variance[t];
        row[j + 11] = spec.skewness[t];
        row[j + 12] = spec.kurtosis[t];
        row[j + 13] = spec.band_250_650[t];
        row[j + 14] = spec.band_1000_4000[t];
        let p = align[t];
        row[j + 15] = voi.f0[p];
        row[j + 16] = voi.voicing_prob[p];
        row[j + 17] = voi.log_hnr[p];
        row[j + 18] = voi.jitter_local[p];
        row[j + 19] = voi.jitter_delta[p];
        row[j + 20] = voi.shimmer_local[p];
        debug_assert_eq!(j + 21, N_BASE_LLDS);
    }

    // Append the delta of every base column.
    let mut values = vec![vec![0.0f64; N_LLDS]; n];
    for t in 0..n {
        values[t][..N_BASE_LLDS].copy_from_slice(&base[t]);
    }
    for j in 0..N_BASE_LLDS {
        let contour: Vec<f64> = (0..n).map(|t| base[t][j]).collect();
        let delta = delta_contour(&contour);
        for t in 0..n {
            values[t][N_BASE_LLDS + j] = delta[t];
        }
    }

    for (t, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    stage: "lld".into(),
                    reason: format!("non-finite value at frame {t}, descriptor {j}"),
                });
            }
        }
    }

    Ok(LLDMatrix {
        values,
        descriptor_names: descriptor_names(),
        frame_times: (0..n).map(|t| frames.center_time(t)).collect(),
    })
}

/// Index of the element of sorted `times` nearest to `t`.
fn nearest_index(times: &[f64], t: f64) -> usize {
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        0
    } else if i >= times.len() {
        times.len() - 1
    } else if (times[i] - t).abs() < (t - times[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}
