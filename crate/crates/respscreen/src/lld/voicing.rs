//! Voicing descriptor group: F0 by subharmonic summation with Viterbi
//! smoothing, autocorrelation-based voicing probability and HNR, and
//! frame-level jitter/shimmer from consecutive period estimates.

use crate::dsp::{hamming, AutocorrPlan, SpectrumPlan};
use crate::error::Result;

use super::framing::{Frames, WindowFunction};

/// F0 search range in Hz. Covers adult speech and vocalizations.
pub const F0_MIN: f64 = 55.0;
pub const F0_MAX: f64 = 500.0;
/// Subharmonic summation: number of harmonics and per-harmonic decay.
pub const SHS_HARMONICS: usize = 15;
pub const SHS_COMPRESSION: f64 = 0.84;
/// FFT size for the pitch spectrum (zero-padded 60 ms frames).
pub const PITCH_FFT: usize = 4096;
/// Candidate grid density on the log-frequency axis.
const GRID_STEPS_PER_OCTAVE: f64 = 48.0;
/// Candidates kept per frame for the Viterbi lattice.
const MAX_CANDIDATES: usize = 5;
/// Transition cost per octave of F0 movement between voiced frames.
const OCTAVE_COST: f64 = 2.0;
/// Transition cost for switching between voiced and unvoiced.
const VOICED_UNVOICED_COST: f64 = 0.5;
/// Local score of the unvoiced state; acts as the voicing threshold:
/// a candidate whose SHS-weighted periodicity falls below it loses.
const UNVOICED_SCORE: f64 = 0.45;

/// Per-pitch-frame outputs. `f0` is 0 for unvoiced frames.
pub struct VoicingOutputs {
    pub f0: Vec<f64>,
    pub voicing_prob: Vec<f64>,
    pub log_hnr: Vec<f64>,
    pub jitter_local: Vec<f64>,
    pub jitter_delta: Vec<f64>,
    pub shimmer_local: Vec<f64>,
    /// Frame center times in seconds, for alignment to spectral frames.
    pub center_times: Vec<f64>,
}

struct Candidate {
    freq: f64,
    /// SHS strength normalized by the frame's best candidate.
    salience: f64,
    /// Normalized autocorrelation at the candidate period, in [0, 1].
    periodicity: f64,
}

/// Computes the voicing group on its own (longer-window) framing.
pub fn compute_voicing(
    signal: &[f64],
    sample_rate: u32,
    pitch_win: usize,
    hop: usize,
) -> Result<VoicingOutputs> {
    let frames = Frames::new(signal, sample_rate, pitch_win, hop, WindowFunction::Rectangular)?;
    let n = frames.count();
    let window = hamming(pitch_win);
    let spectrum = SpectrumPlan::new(PITCH_FFT);
    let max_lag = (sample_rate as f64 / F0_MIN).ceil() as usize;
    let acf_size = (pitch_win + max_lag + 1).next_power_of_two();
    let acf = AutocorrPlan::new(acf_size);
    let bin_hz = sample_rate as f64 / PITCH_FFT as f64;

    // Log-spaced candidate grid over the search range.
    let octaves = (F0_MAX / F0_MIN).log2();
    let grid_len = (octaves * GRID_STEPS_PER_OCTAVE).floor() as usize + 1;
    let grid: Vec<f64> = (0..grid_len)
        .map(|i| F0_MIN * 2f64.powf(i as f64 / GRID_STEPS_PER_OCTAVE))
        .collect();

    let mut all_candidates: Vec<Vec<Candidate>> = Vec::with_capacity(n);
    let mut amplitudes = Vec::with_capacity(n);
    let mut buf = vec![0.0; pitch_win];

    for t in 0..n {
        let raw = frames.raw(t);
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        amplitudes.push(
            (raw.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / raw.len() as f64).sqrt(),
        );

        // Magnitude spectrum of the mean-removed, windowed frame.
        for (b, (&s, &w)) in buf.iter_mut().zip(raw.iter().zip(&window)) {
            *b = (s - mean) * w;
        }
        let mag = spectrum.magnitude_spectrum(&buf);

        // Autocorrelation of the mean-removed raw frame for periodicity.
        for (b, &s) in buf.iter_mut().zip(raw) {
            *b = s - mean;
        }
        // Unbias the finite-window autocorrelation: the raw estimator
        // decays by (N - k) / N, which would cap a perfectly periodic
        // frame's normalized peak (and thus HNR) well below 1.
        let mut r = acf.autocorrelation(&buf, max_lag);
        let frame_len = raw.len() as f64;
        for (k, v) in r.iter_mut().enumerate() {
            *v *= frame_len / (frame_len - k as f64);
        }
        let r0 = r[0];

        let shs: Vec<f64> = grid
            .iter()
            .map(|&f0| subharmonic_sum(&mag, f0, bin_hz))
            .collect();
        let mut cands = peak_candidates(&grid, &shs);
        for c in &mut cands {
            c.periodicity = if r0 > 1e-12 {
                let lag = (sample_rate as f64 / c.freq).round() as usize;
                let lag = lag.clamp(1, max_lag);
                (peak_value(&r, lag) / r0).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        all_candidates.push(cands);
    }

    let chosen = viterbi(&all_candidates);

    let mut out = VoicingOutputs {
        f0: Vec::with_capacity(n),
        voicing_prob: Vec::with_capacity(n),
        log_hnr: Vec::with_capacity(n),
        jitter_local: vec![0.0; n],
        jitter_delta: vec![0.0; n],
        shimmer_local: vec![0.0; n],
        center_times: (0..n).map(|t| frames.center_time(t)).collect(),
    };

    for (t, &state) in chosen.iter().enumerate() {
        match state {
            None => {
                // Unvoiced: report the periodicity evidence anyway so the
                // probability contour stays informative.
                let best = all_candidates[t]
                    .iter()
                    .map(|c| c.periodicity)
                    .fold(0.0f64, f64::max);
                out.f0.push(0.0);
                out.voicing_prob.push(best);
                out.log_hnr.push(0.0);
            }
            Some(i) => {
                let c = &all_candidates[t][i];
                let r = c.periodicity.clamp(1e-6, 1.0 - 1e-6);
                out.f0.push(c.freq);
                out.voicing_prob.push(c.periodicity);
                out.log_hnr.push(10.0 * (r / (1.0 - r)).log10());
            }
        }
    }

    // Jitter and shimmer from consecutive voiced frame estimates.
    for t in 1..n {
        if out.f0[t] > 0.0 && out.f0[t - 1] > 0.0 {
            let (p1, p0) = (1.0 / out.f0[t], 1.0 / out.f0[t - 1]);
            out.jitter_local[t] = (p1 - p0).abs() / ((p1 + p0) / 2.0);
            let (a1, a0) = (amplitudes[t], amplitudes[t - 1]);
            if a1 + a0 > 0.0 {
                out.shimmer_local[t] = (a1 - a0).abs() / ((a1 + a0) / 2.0);
            }
        }
        if t >= 2 && out.f0[t] > 0.0 && out.f0[t - 1] > 0.0 && out.f0[t - 2] > 0.0 {
            let (p2, p1, p0) = (1.0 / out.f0[t], 1.0 / out.f0[t - 1], 1.0 / out.f0[t - 2]);
            out.jitter_delta[t] = ((p2 - p1) - (p1 - p0)).abs() / ((p2 + p1 + p0) / 3.0);
        }
    }

    Ok(out)
}

/// Subharmonic summation strength of candidate `f0`: harmonically
/// spaced spectrum samples with geometrically decaying weights.
fn subharmonic_sum(mag: &[f64], f0: f64, bin_hz: f64) -> f64 {
    let mut sum = 0.0;
    let mut weight = 1.0;
    for h in 1..=SHS_HARMONICS {
        let f = f0 * h as f64;
        let x = f / bin_hz;
        let k = x.floor() as usize;
        if k + 1 >= mag.len() {
            break;
        }
        let frac = x - k as f64;
        sum += weight * (mag[k] * (1.0 - frac) + mag[k + 1] * frac);
        weight *= SHS_COMPRESSION;
    }
    sum
}

/// Local maxima of the SHS curve, parabolically refined on the
/// log-frequency grid, strongest `MAX_CANDIDATES` kept, saliences
/// normalized to the frame's best.
fn peak_candidates(grid: &[f64], shs: &[f64]) -> Vec<Candidate> {
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..shs.len() - 1 {
        if shs[i] > shs[i - 1] && shs[i] > shs[i + 1] {
            let denom = shs[i - 1] - 2.0 * shs[i] + shs[i + 1];
            let (delta, value) = if denom.abs() > 1e-300 {
                let d = 0.5 * (shs[i - 1] - shs[i + 1]) / denom;
                (d.clamp(-0.5, 0.5), shs[i] - 0.25 * (shs[i - 1] - shs[i + 1]) * d)
            } else {
                (0.0, shs[i])
            };
            let freq = (grid[i] * 2f64.powf(delta / GRID_STEPS_PER_OCTAVE)).clamp(F0_MIN, F0_MAX);
            peaks.push((freq, value));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(MAX_CANDIDATES);
    let best = peaks.first().map(|p| p.1).unwrap_or(0.0);
    if best <= 0.0 {
        return Vec::new();
    }
    peaks
        .into_iter()
        .map(|(freq, value)| Candidate {
            freq,
            salience: value / best,
            periodicity: 0.0,
        })
        .collect()
}

/// Autocorrelation value at `lag`, parabolically refined against its
/// neighbors so slightly off-integer periods are not undervalued.
fn peak_value(r: &[f64], lag: usize) -> f64 {
    if lag == 0 || lag + 1 >= r.len() {
        return r[lag.min(r.len() - 1)];
    }
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return a.max(b).max(c);
    }
    let d = 0.5 * (a - c) / denom;
    let d = d.clamp(-1.0, 1.0);
    b - 0.25 * (a - c) * d
}

/// Minimum-cost state sequence. State `None` is unvoiced; `Some(i)`
/// selects candidate i. Voiced-to-voiced transitions pay
/// [`OCTAVE_COST`] per octave of F0 change, voicing flips pay
/// [`VOICED_UNVOICED_COST`].
fn viterbi(frames: &[Vec<Candidate>]) -> Vec<Option<usize>> {
    let n = frames.len();
    if n == 0 {
        return Vec::new();
    }
    // State 0 = unvoiced, states 1.. = candidates of that frame.
    let local = |t: usize, s: usize| -> f64 {
        if s == 0 {
            -(UNVOICED_SCORE).ln()
        } else {
            let c = &frames[t][s - 1];
            -(c.salience * c.periodicity + 1e-6).ln()
        }
    };
    let transition = |prev: &[Candidate], a: usize, cur: &[Candidate], b: usize| -> f64 {
        match (a, b) {
            (0, 0) => 0.0,
            (0, _) | (_, 0) => VOICED_UNVOICED_COST,
            (a, b) => {
                let fa = prev[a - 1].freq;
                let fb = cur[b - 1].freq;
                OCTAVE_COST * (fb / fa).log2().abs()
            }
        }
    };

    let mut cost: Vec<f64> = (0..=frames[0].len()).map(|s| local(0, s)).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
    for t in 1..n {
        let prev_cands = &frames[t - 1];
        let cur_cands = &frames[t];
        let mut new_cost = vec![f64::INFINITY; cur_cands.len() + 1];
        let mut new_back = vec![0usize; cur_cands.len() + 1];
        for (b, item) in new_cost.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (a, &ca) in cost.iter().enumerate() {
                let c = ca + transition(prev_cands, a, cur_cands, b);
                if c < best {
                    best = c;
                    arg = a;
                }
            }
            *item = best + local(t, b);
            new_back[b] = arg;
        }
        cost = new_cost;
        back.push(new_back);
    }

    let mut state = cost
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(s, _)| s)
        .unwrap_or(0);
    let mut path = vec![state; n];
    for t in (1..n).rev() {
        state = back[t - 1][state];
        path[t - 1] = state;
    }
    path.into_iter()
        .map(|s| if s == 0 { None } else { Some(s - 1) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const FS: u32 = 44100;
    const WIN: usize = 2646; // 60 ms
    const HOP: usize = 441;

    fn sawtooth(freq: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let ph = freq * n as f64 / FS as f64;
                2.0 * (ph - (ph + 0.5).floor())
            })
            .collect()
    }

    /// Harmonic complex with 1/h amplitudes, constant F0 and level.
    fn vowel(freq: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                (1..=8)
                    .map(|h| {
                        (2.0 * std::f64::consts::PI * freq * h as f64 * n as f64 / FS as f64).sin()
                            / h as f64
                    })
                    .sum()
            })
            .collect()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        assert!(!v.is_empty());
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sawtooth_f0_is_recovered_within_five_percent() {
        let out = compute_voicing(&sawtooth(150.0, 44100), FS, WIN, HOP).unwrap();
        let voiced: Vec<f64> = out.f0.iter().copied().filter(|&f| f > 0.0).collect();
        assert!(voiced.len() * 2 > out.f0.len(), "mostly unvoiced");
        let med = median(voiced);
        assert!((med - 150.0).abs() < 7.5, "median F0 {med}");
    }

    #[test]
    fn white_noise_has_low_voicing_probability() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..44100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = compute_voicing(&noise, FS, WIN, HOP).unwrap();
        assert!(median(out.voicing_prob.clone()) < 0.5);
        let voiced = out.f0.iter().filter(|&&f| f > 0.0).count();
        assert!(voiced * 10 < out.f0.len(), "{voiced} voiced noise frames");
    }

    #[test]
    fn steady_vowel_has_negligible_jitter_and_shimmer() {
        let out = compute_voicing(&vowel(180.0, 66150), FS, WIN, HOP).unwrap();
        let jit: Vec<f64> = out
            .f0
            .windows(2)
            .zip(&out.jitter_local[1..])
            .filter(|(w, _)| w[0] > 0.0 && w[1] > 0.0)
            .map(|(_, &j)| j)
            .collect();
        assert!(!jit.is_empty());
        assert!(median(jit) < 0.005, "jitter too high");
        let shm: Vec<f64> = out
            .shimmer_local
            .iter()
            .zip(&out.f0)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&s, _)| s)
            .collect();
        assert!(median(shm) < 0.02, "shimmer too high");
    }

    #[test]
    fn voiced_frames_have_high_hnr_for_periodic_signal() {
        let out = compute_voicing(&vowel(180.0, 44100), FS, WIN, HOP).unwrap();
        let hnr: Vec<f64> = out
            .log_hnr
            .iter()
            .zip(&out.f0)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&h, _)| h)
            .collect();
        assert!(median(hnr) > 10.0);
    }

    #[test]
    fn silent_signal_yields_zero_track_without_nan() {
        let out = compute_voicing(&vec![0.0; 22050], FS, WIN, HOP).unwrap();
        for t in 0..out.f0.len() {
            assert_eq!(out.f0[t], 0.0);
            assert!(out.voicing_prob[t].is_finite());
            assert!(out.log_hnr[t].is_finite());
        }
    }
}
