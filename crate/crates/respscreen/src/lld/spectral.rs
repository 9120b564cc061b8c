//! Spectral descriptor group: auditory (mel) spectrogram with
//! modulation filtering, MFCCs, and scalar spectrum-shape measures.
//!
//! All power values are floored at [`POWER_FLOOR`] before logs and
//! normalizations, so a silent frame produces finite descriptors (it
//! looks like a uniform spectrum at the floor level).

use crate::dsp::{dct_ii_orthonormal, MelFilterbank, SpectrumPlan};

use super::framing::Frames;

/// Number of mel bands in the auditory spectrum.
pub const N_MEL_BANDS: usize = 26;
/// Auditory spectrum frequency range in Hz.
pub const MEL_FMIN: f64 = 0.0;
pub const MEL_FMAX: f64 = 8000.0;
/// Number of cepstral coefficients kept (coefficients 1 to 14; the
/// zeroth is excluded because RMS energy is already a descriptor).
pub const N_MFCC: usize = 14;
/// Floor applied to power values before logs and normalization.
pub const POWER_FLOOR: f64 = 1e-10;
/// Roll-off fractions, in layout order.
pub const ROLLOFF_FRACTIONS: [f64; 4] = [0.25, 0.50, 0.75, 0.90];

/// Per-frame outputs of the spectral front-end. The energy group
/// reuses `loudness` and `mod_sum` rather than recomputing the bank.
pub struct SpectralOutputs {
    /// Mel band energies (auditory spectrum), frames x 26.
    pub aud_spec: Vec<Vec<f64>>,
    /// Modulation-filtered log band energies, frames x 26.
    pub mod_bands: Vec<Vec<f64>>,
    /// Sum of the auditory spectrum per frame.
    pub loudness: Vec<f64>,
    /// Sum of the modulation-filtered bands per frame.
    pub mod_sum: Vec<f64>,
    /// Cepstral coefficients 1..=14, frames x 14.
    pub mfcc: Vec<Vec<f64>>,
    pub flux: Vec<f64>,
    pub centroid: Vec<f64>,
    pub entropy: Vec<f64>,
    pub slope: Vec<f64>,
    pub sharpness: Vec<f64>,
    pub harmonicity: Vec<f64>,
    /// Roll-off frequencies at [`ROLLOFF_FRACTIONS`], frames x 4.
    pub rolloff: Vec<[f64; 4]>,
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
    pub kurtosis: Vec<f64>,
    pub band_250_650: Vec<f64>,
    pub band_1000_4000: Vec<f64>,
}

/// Computes every spectral descriptor for all frames.
pub fn compute_spectral(frames: &Frames, fft_size: usize, sample_rate: u32) -> SpectralOutputs {
    let plan = SpectrumPlan::new(fft_size);
    let bank = MelFilterbank::new(
        N_MEL_BANDS,
        sample_rate as f64,
        fft_size,
        MEL_FMIN,
        MEL_FMAX,
    );
    let n = frames.count();
    let bins = plan.bins();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let bark: Vec<f64> = bank.centers_hz.iter().map(|&f| bark_scale(f)).collect();

    let mut out = SpectralOutputs {
        aud_spec: Vec::with_capacity(n),
        mod_bands: Vec::new(),
        loudness: Vec::with_capacity(n),
        mod_sum: Vec::new(),
        mfcc: Vec::with_capacity(n),
        flux: Vec::with_capacity(n),
        centroid: Vec::with_capacity(n),
        entropy: Vec::with_capacity(n),
        slope: Vec::with_capacity(n),
        sharpness: Vec::with_capacity(n),
        harmonicity: Vec::with_capacity(n),
        rolloff: Vec::with_capacity(n),
        variance: Vec::with_capacity(n),
        skewness: Vec::with_capacity(n),
        kurtosis: Vec::with_capacity(n),
        band_250_650: Vec::with_capacity(n),
        band_1000_4000: Vec::with_capacity(n),
    };

    let mut windowed = Vec::with_capacity(frames.win_len());
    let mut prev_unit_mag: Vec<f64> = Vec::new();
    let mut log_bands_over_time: Vec<Vec<f64>> = Vec::with_capacity(n);

    for t in 0..n {
        frames.windowed_into(t, &mut windowed);
        let power: Vec<f64> = plan
            .power_spectrum(&windowed)
            .iter()
            .map(|&p| p.max(POWER_FLOOR))
            .collect();
        let total: f64 = power.iter().sum();

        // Auditory spectrum and its log trajectory (filtered later).
        let bands = bank.apply(&power);
        let log_bands: Vec<f64> = bands.iter().map(|&b| b.max(POWER_FLOOR).ln()).collect();
        out.loudness.push(bands.iter().sum());
        out.mfcc
            .push(dct_ii_orthonormal(&log_bands, N_MFCC + 1)[1..].to_vec());
        out.aud_spec.push(bands);
        log_bands_over_time.push(log_bands);

        // Flux: Euclidean distance between unit-norm magnitude spectra.
        let mag: Vec<f64> = power.iter().map(|&p| p.sqrt()).collect();
        let norm = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
        let unit: Vec<f64> = mag.iter().map(|m| m / norm).collect();
        let flux = if t == 0 {
            0.0
        } else {
            unit.iter()
                .zip(&prev_unit_mag)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        out.flux.push(flux);
        prev_unit_mag = unit;

        // Power-weighted frequency moments.
        let centroid: f64 = power
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * bin_hz * p)
            .sum::<f64>()
            / total;
        out.centroid.push(centroid);
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for (k, &p) in power.iter().enumerate() {
            let d = k as f64 * bin_hz - centroid;
            let w = p / total;
            m2 += w * d * d;
            m3 += w * d * d * d;
            m4 += w * d * d * d * d;
        }
        out.variance.push(m2);
        if m2 > 1e-12 {
            out.skewness.push(m3 / m2.powf(1.5));
            out.kurtosis.push(m4 / (m2 * m2));
        } else {
            out.skewness.push(0.0);
            out.kurtosis.push(0.0);
        }

        // Entropy of the normalized power spectrum, scaled to [0, 1].
        let entropy: f64 = -power
            .iter()
            .map(|&p| {
                let q = p / total;
                q * q.ln()
            })
            .sum::<f64>()
            / (bins as f64).ln();
        out.entropy.push(entropy);

        // Least-squares slope of log power against frequency in Hz.
        let f_mean = (bins - 1) as f64 * bin_hz / 2.0;
        let l_mean: f64 = power.iter().map(|p| p.ln()).sum::<f64>() / bins as f64;
        let mut cov = 0.0;
        let mut var_f = 0.0;
        for (k, &p) in power.iter().enumerate() {
            let df = k as f64 * bin_hz - f_mean;
            cov += df * (p.ln() - l_mean);
            var_f += df * df;
        }
        out.slope.push(cov / var_f);

        out.sharpness.push(sharpness(&out.aud_spec[t], &bark));
        out.harmonicity.push(peak_to_valley_db(&power));

        let mut roll = [0.0; 4];
        let mut cum = 0.0;
        let mut next = 0;
        for (k, &p) in power.iter().enumerate() {
            cum += p;
            while next < 4 && cum >= ROLLOFF_FRACTIONS[next] * total {
                roll[next] = k as f64 * bin_hz;
                next += 1;
            }
            if next == 4 {
                break;
            }
        }
        out.rolloff.push(roll);

        out.band_250_650.push(band_fraction(&power, bin_hz, 250.0, 650.0, total));
        out.band_1000_4000
            .push(band_fraction(&power, bin_hz, 1000.0, 4000.0, total));
    }

    let (mod_bands, mod_sum) = modulation_filter(&log_bands_over_time);
    out.mod_bands = mod_bands;
    out.mod_sum = mod_sum;
    out
}

/// Fraction of total power in [lo, hi] Hz (bounds inclusive).
fn band_fraction(power: &[f64], bin_hz: f64, lo: f64, hi: f64, total: f64) -> f64 {
    power
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * bin_hz;
            f >= lo && f <= hi
        })
        .map(|(_, &p)| p)
        .sum::<f64>()
        / total
}

/// Traunmueller's bark-scale approximation.
fn bark_scale(hz: f64) -> f64 {
    26.81 * hz / (1960.0 + hz) - 0.53
}

/// Psychoacoustic sharpness: bark-position centroid of specific
/// loudness (band energy compressed by the 0.23 power law), with the
/// von Bismarck high-band weighting. Dimensionless approximation.
fn sharpness(bands: &[f64], bark: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&b, &z) in bands.iter().zip(bark) {
        let specific = b.max(POWER_FLOOR).powf(0.23);
        let g = if z <= 15.8 {
            1.0
        } else {
            0.85 + 0.15 * (0.42 * (z - 15.8)).exp()
        };
        num += specific * g * z;
        den += specific;
    }
    0.11 * num / den
}

/// Harmonicity as the ratio of mean local-peak power to mean
/// local-valley power, in dB. Harmonic spectra have deep valleys
/// between partials; noise does not.
fn peak_to_valley_db(power: &[f64]) -> f64 {
    let mut peak_sum = 0.0;
    let mut peak_n = 0usize;
    let mut valley_sum = 0.0;
    let mut valley_n = 0usize;
    for k in 1..power.len() - 1 {
        if power[k] > power[k - 1] && power[k] > power[k + 1] {
            peak_sum += power[k];
            peak_n += 1;
        } else if power[k] < power[k - 1] && power[k] < power[k + 1] {
            valley_sum += power[k];
            valley_n += 1;
        }
    }
    if peak_n == 0 || valley_n == 0 {
        return 0.0;
    }
    let ratio = (peak_sum / peak_n as f64 + POWER_FLOOR) / (valley_sum / valley_n as f64 + POWER_FLOOR);
    10.0 * ratio.log10()
}

/// Band-pass filters each log-band trajectory over time with the
/// modulation filter H(z) = 0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.94 z^-1).
/// At the 100 Hz frame rate the passband is roughly 1 to 30 Hz. Input
/// before the first frame is treated as a continuation of frame 0, so
/// a constant trajectory maps to exactly zero from the start.
fn modulation_filter(log_bands: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = log_bands.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let n_bands = log_bands[0].len();
    let mut filtered = vec![vec![0.0; n_bands]; n];
    let mut sums = vec![0.0; n];
    for b in 0..n_bands {
        let x = |t: isize| log_bands[t.max(0) as usize][b];
        let mut y_prev = 0.0;
        for t in 0..n {
            let ti = t as isize;
            // Grouped as differences so equal taps cancel exactly and
            // the constant-input-to-zero property survives rounding.
            let y = 0.1 * (2.0 * (x(ti) - x(ti - 4)) + (x(ti - 1) - x(ti - 3))) + 0.94 * y_prev;
            filtered[t][b] = y;
            sums[t] += y;
            y_prev = y;
        }
    }
    (filtered, sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lld::framing::WindowFunction;
    use rand::{Rng, SeedableRng};

    const FS: u32 = 44100;
    const FFT: usize = 2048;

    fn tone(freq: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / FS as f64).sin())
            .collect()
    }

    fn spectral_of(signal: &[f64]) -> SpectralOutputs {
        let frames = Frames::new(signal, FS, 1103, 441, WindowFunction::Hamming).unwrap();
        compute_spectral(&frames, FFT, FS)
    }

    #[test]
    fn pure_tone_centroid_is_within_two_percent_of_tone_frequency() {
        let out = spectral_of(&tone(1000.0, 44100));
        for &c in &out.centroid {
            assert!((c - 1000.0).abs() < 20.0, "centroid {c}");
        }
    }

    #[test]
    fn bin_centered_tone_rolloff_90_sits_at_the_tone_bin() {
        // Rectangular window of exactly the FFT length and a tone on an
        // exact bin: all energy lands in one bin, so every roll-off
        // fraction resolves to the tone bin itself.
        let bin_hz = FS as f64 / FFT as f64;
        let freq = 46.0 * bin_hz;
        let signal = tone(freq, 3 * FFT);
        let frames = Frames::new(&signal, FS, FFT, 441, WindowFunction::Rectangular).unwrap();
        let out = compute_spectral(&frames, FFT, FS);
        for r in &out.rolloff {
            assert!((r[3] - freq).abs() <= bin_hz + 1e-9, "rolloff {}", r[3]);
        }
    }

    #[test]
    fn windowed_tone_rolloff_90_stays_within_the_mainlobe() {
        // Under the default Hamming window the tone's energy spreads
        // over the mainlobe, so the 90% point sits within two bins.
        let out = spectral_of(&tone(1000.0, 44100));
        let bin_hz = FS as f64 / FFT as f64;
        for r in &out.rolloff {
            assert!((r[3] - 1000.0).abs() <= 2.0 * bin_hz, "rolloff {}", r[3]);
        }
    }

    #[test]
    fn white_noise_entropy_is_high_and_tone_entropy_low() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..44100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = spectral_of(&noise);
        let mut med: Vec<f64> = out.entropy.clone();
        med.sort_by(f64::total_cmp);
        assert!(med[med.len() / 2] > 0.9, "noise entropy {}", med[med.len() / 2]);

        let out = spectral_of(&tone(1000.0, 44100));
        assert!(out.entropy[5] < 0.5, "tone entropy {}", out.entropy[5]);
    }

    #[test]
    fn constant_tone_modulation_bands_are_zero() {
        // A steady tone has constant band trajectories; the modulation
        // filter rejects DC exactly under the continuation convention.
        let out = spectral_of(&tone(500.0, 44100));
        for row in &out.mod_bands {
            for &v in row {
                assert!(v.abs() < 1e-9, "modulation output {v}");
            }
        }
    }

    #[test]
    fn centroid_of_two_equal_tones_lies_between_them() {
        let a = tone(500.0, 44100);
        let b = tone(3000.0, 44100);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let out = spectral_of(&sum);
        for &c in &out.centroid {
            assert!(c > 500.0 && c < 3000.0, "centroid {c}");
        }
    }

    #[test]
    fn higher_tone_is_sharper() {
        let low = spectral_of(&tone(300.0, 22050));
        let high = spectral_of(&tone(6000.0, 22050));
        assert!(high.sharpness[3] > low.sharpness[3]);
    }

    #[test]
    fn sawtooth_is_more_harmonic_than_noise() {
        let saw: Vec<f64> = (0..44100)
            .map(|n| {
                let ph = 150.0 * n as f64 / FS as f64;
                2.0 * (ph - (ph + 0.5).floor())
            })
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..44100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hs = spectral_of(&saw).harmonicity;
        let hn = spectral_of(&noise).harmonicity;
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(med(hs) > med(hn) + 3.0);
    }

    #[test]
    fn silent_frames_produce_finite_descriptors() {
        let out = spectral_of(&vec![0.0; 8820]);
        let check = |v: &[f64]| {
            for &x in v {
                assert!(x.is_finite());
            }
        };
        check(&out.centroid);
        check(&out.entropy);
        check(&out.slope);
        check(&out.sharpness);
        check(&out.harmonicity);
        check(&out.skewness);
        check(&out.kurtosis);
        for row in &out.mfcc {
            check(row);
        }
    }

    #[test]
    fn band_fractions_capture_tone_location() {
        let out = spectral_of(&tone(400.0, 44100));
        assert!(out.band_250_650[5] > 0.9);
        assert!(out.band_1000_4000[5] < 0.05);
        let out = spectral_of(&tone(2000.0, 44100));
        assert!(out.band_1000_4000[5] > 0.9);
    }
}
