//! Shared signal-processing primitives: windows, FFT spectra, mel
//! filterbank, DCT, autocorrelation and linear-prediction recursion.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos())
        .collect()
}

/// Forward FFT of one size with scratch buffers reused across calls.
pub struct SpectrumPlan {
    fft: Arc<dyn rustfft::Fft<f64>>,
    size: usize,
}

impl SpectrumPlan {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectrumPlan {
            fft: planner.plan_fft_forward(size),
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of one-sided spectrum bins: size/2 + 1.
    pub fn bins(&self) -> usize {
        self.size / 2 + 1
    }

    /// One-sided magnitude spectrum of `frame`, zero-padded to the FFT
    /// size. Frames longer than the FFT size are truncated.
    pub fn magnitude_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .take(self.size)
            .map(|&s| Complex::new(s, 0.0))
            .collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..self.bins()].iter().map(|c| c.norm()).collect()
    }

    /// One-sided power spectrum (squared magnitudes).
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .take(self.size)
            .map(|&s| Complex::new(s, 0.0))
            .collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..self.bins()].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// FFT-based autocorrelation for frames too long for direct evaluation.
pub struct AutocorrPlan {
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
    size: usize,
}

impl AutocorrPlan {
    /// `size` must be at least twice the frame length to avoid circular
    /// wrap-around in the lags of interest.
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        AutocorrPlan {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            size,
        }
    }

    /// Raw (biased) autocorrelation r[0..=max_lag] of `x`.
    pub fn autocorrelation(&self, x: &[f64], max_lag: usize) -> Vec<f64> {
        debug_assert!(x.len() + max_lag <= self.size);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&s| Complex::new(s, 0.0)).collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for c in &mut buf {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf[..=max_lag].iter().map(|c| c.re * scale).collect()
    }
}

/// Direct time-domain autocorrelation, for short sequences such as
/// functional contours.
pub fn autocorrelation_direct(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Frequency in Hz to mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Mel scale to frequency in Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Bank of triangular filters equally spaced on the mel scale, applied
/// to one-sided power spectra. Filters are stored sparsely as
/// (bin, weight) pairs.
pub struct MelFilterbank {
    filters: Vec<Vec<(usize, f64)>>,
    /// Center frequency of each band in Hz.
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_bands: usize, sample_rate: f64, fft_size: usize, fmin: f64, fmax: f64) -> Self {
        let mel_lo = hz_to_mel(fmin);
        let mel_hi = hz_to_mel(fmax);
        // n_bands + 2 edge points: each band spans [edge_b, edge_b+2]
        // peaking at edge_b+1.
        let edges_bin: Vec<f64> = (0..n_bands + 2)
            .map(|i| {
                let mel = mel_lo + (mel_hi - mel_lo) * i as f64 / (n_bands + 1) as f64;
                mel_to_hz(mel) * fft_size as f64 / sample_rate
            })
            .collect();
        let n_bins = fft_size / 2 + 1;
        let filters = (0..n_bands)
            .map(|b| {
                let (lo, center, hi) = (edges_bin[b], edges_bin[b + 1], edges_bin[b + 2]);
                let mut taps = Vec::new();
                let first = lo.ceil() as usize;
                let last = (hi.floor() as usize).min(n_bins - 1);
                for k in first..=last {
                    let kf = k as f64;
                    let w = if kf <= center {
                        (kf - lo) / (center - lo)
                    } else {
                        (hi - kf) / (hi - center)
                    };
                    if w > 0.0 {
                        taps.push((k, w));
                    }
                }
                taps
            })
            .collect();
        let centers_hz = (1..=n_bands)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_bands + 1) as f64))
            .collect();
        MelFilterbank {
            filters,
            centers_hz,
        }
    }

    pub fn n_bands(&self) -> usize {
        self.filters.len()
    }

    /// Band energies for a one-sided power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|taps| taps.iter().map(|&(k, w)| w * power[k]).sum())
            .collect()
    }
}

/// Orthonormal DCT-II: y[k] = s(k) * sum_n x[n] cos(pi k (2n+1) / 2N),
/// with s(0) = sqrt(1/N) and s(k>0) = sqrt(2/N). Returns the first
/// `n_coeffs` coefficients.
pub fn dct_ii_orthonormal(x: &[f64], n_coeffs: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; n_coeffs];
    }
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    (0..n_coeffs)
        .map(|k| {
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0)
                        / (2.0 * n as f64))
                        .cos()
                })
                .sum();
            sum * if k == 0 { norm0 } else { norm }
        })
        .collect()
}

/// Levinson-Durbin recursion on autocorrelation r[0..=order].
///
/// Returns predictor coefficients a[1..=order] in the convention
/// x[t] ~ sum_k a[k] x[t-k], so an AR(1) signal with pole 0.9 yields
/// a[1] close to +0.9. Degenerate input (r[0] <= 0 or a vanishing
/// prediction error) returns zeros.
pub fn levinson_durbin(r: &[f64], order: usize) -> Vec<f64> {
    let mut a = vec![0.0; order];
    if r.len() < order + 1 || r[0] <= 0.0 {
        return a;
    }
    let mut err = r[0];
    for i in 0..order {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc -= a[j] * r[i - j];
        }
        if err.abs() < 1e-300 {
            return vec![0.0; order];
        }
        let k = acc / err;
        a[i] = k;
        for j in 0..i / 2 {
            let tmp = a[j];
            a[j] -= k * a[i - 1 - j];
            a[i - 1 - j] -= k * tmp;
        }
        if i % 2 == 1 {
            a[i / 2] -= k * a[i / 2];
        }
        err *= 1.0 - k * k;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_has_standard_endpoints_and_center() {
        let w = hamming(11);
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[10] - 0.08).abs() < 1e-12);
        assert!((w[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sine_at_bin_frequency_concentrates_in_that_bin() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 8.0 * i as f64 / n as f64).sin())
            .collect();
        let plan = SpectrumPlan::new(n);
        let mag = plan.magnitude_spectrum(&x);
        assert!((mag[8] - n as f64 / 2.0).abs() < 1e-9);
        for (k, &m) in mag.iter().enumerate() {
            if k != 8 {
                assert!(m < 1e-9, "leakage {m} at bin {k}");
            }
        }
    }

    #[test]
    fn power_spectrum_satisfies_parseval() {
        let x: Vec<f64> = (0..128).map(|i| ((i * 37 + 11) % 97) as f64 / 97.0).collect();
        let plan = SpectrumPlan::new(128);
        let power = plan.power_spectrum(&x);
        // One-sided: interior bins appear twice in the full spectrum.
        let mut full = power[0] + power[64];
        full += 2.0 * power[1..64].iter().sum::<f64>();
        let time: f64 = x.iter().map(|v| v * v).sum();
        assert!((full / 128.0 - time).abs() < 1e-9 * time);
    }

    #[test]
    fn fft_autocorrelation_matches_direct_evaluation() {
        let x: Vec<f64> = (0..200)
            .map(|i| ((i * 29 + 7) % 83) as f64 / 83.0 - 0.5)
            .collect();
        let plan = AutocorrPlan::new(512);
        let fast = plan.autocorrelation(&x, 50);
        let slow = autocorrelation_direct(&x, 50);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-9, "{f} vs {s}");
        }
    }

    #[test]
    fn mel_conversion_round_trips() {
        for hz in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
    }

    #[test]
    fn mel_filterbank_routes_tone_to_matching_band() {
        let fb = MelFilterbank::new(26, 44100.0, 2048, 0.0, 8000.0);
        // Synthetic power spectrum: single active bin at 1 kHz.
        let bin = (1000.0_f64 * 2048.0 / 44100.0).round() as usize;
        let mut power = vec![0.0; 1025];
        power[bin] = 1.0;
        let bands = fb.apply(&power);
        let hot = bands
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        // The band whose center is nearest 1 kHz should dominate.
        let nearest = fb
            .centers_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;
        assert!(hot == nearest || hot.abs_diff(nearest) <= 1);
    }

    #[test]
    fn dct_preserves_energy_and_maps_constants_to_first_coefficient() {
        let x = vec![2.0; 16];
        let c = dct_ii_orthonormal(&x, 16);
        assert!((c[0] - 2.0 * 4.0).abs() < 1e-12); // sqrt(16) * mean
        for &v in &c[1..] {
            assert!(v.abs() < 1e-12);
        }
        let x: Vec<f64> = (0..16).map(|i| ((i * 13 + 5) % 17) as f64).collect();
        let c = dct_ii_orthonormal(&x, 16);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = c.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() < 1e-9 * ex);
    }

    #[test]
    fn levinson_recovers_ar1_coefficient() {
        // AR(1) with pole 0.9 has autocorrelation r[k] = 0.9^k.
        let r: Vec<f64> = (0..6).map(|k| 0.9f64.powi(k)).collect();
        let a = levinson_durbin(&r, 5);
        assert!((a[0] - 0.9).abs() < 1e-9, "a1 = {}", a[0]);
        for &v in &a[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn levinson_handles_degenerate_input() {
        assert_eq!(levinson_durbin(&[0.0; 6], 5), vec![0.0; 5]);
    }
}
