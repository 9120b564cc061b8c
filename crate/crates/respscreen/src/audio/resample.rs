//! Polyphase windowed-sinc sample-rate conversion.
//!
//! The converter reduces the rate ratio to p/q, then evaluates a
//! Kaiser-windowed sinc interpolation kernel at the p fractional phases.
//! The kernel cuts off just below the lower of the two Nyquist
//! frequencies, so the same path serves upsampling (anti-imaging) and
//! downsampling (anti-aliasing). Each phase's taps are normalized to
//! unit sum, which pins DC gain to exactly 1 and removes passband
//! ripple-induced amplitude modulation across phases.

use super::wav::Audio;

/// Zero crossings of the sinc on each side, measured at the cutoff rate.
const HALF_ZERO_CROSSINGS: usize = 32;

/// Kaiser shape parameter. Sidelobes sit near -100 dB, far below the
/// quality floor the pipeline requires.
const KAISER_BETA: f64 = 14.0;

/// Cutoff as a fraction of the lower Nyquist. Leaves transition-band
/// headroom so the stopband is reached before the fold-over frequency.
const CUTOFF_ROLLOFF: f64 = 0.945;

/// Above this many phases the per-phase tap cache would dominate the
/// cost; taps are then evaluated directly per output sample.
const MAX_CACHED_PHASES: usize = 4096;

/// Converts `input` to `target_rate`. Equal rates pass through unchanged.
///
/// Output length is `round(len * target_rate / source_rate)`; samples
/// beyond the input boundaries are treated as zero.
pub fn resample(input: &Audio, target_rate: u32) -> crate::Result<Audio> {
    if target_rate == 0 {
        return Err(crate::Error::Config(
            "resample target rate must be positive".into(),
        ));
    }
    if input.sample_rate == target_rate || input.samples.is_empty() {
        return Ok(Audio {
            samples: input.samples.clone(),
            sample_rate: target_rate,
        });
    }

    let g = gcd(input.sample_rate as u64, target_rate as u64);
    let p = (target_rate as u64 / g) as usize; // upsample factor
    let q = (input.sample_rate as u64 / g) as usize; // downsample factor

    // Cutoff relative to the input Nyquist; below 1 only when decimating.
    let cutoff = CUTOFF_ROLLOFF * (p as f64 / q as f64).min(1.0);
    // Kernel half-width in input samples, widened so the sinc keeps
    // HALF_ZERO_CROSSINGS zero crossings at the reduced cutoff.
    let half = (HALF_ZERO_CROSSINGS as f64 / cutoff).ceil() as usize;

    let x = &input.samples;
    let out_len =
        (x.len() as f64 * target_rate as f64 / input.sample_rate as f64).round() as usize;
    let mut out = Vec::with_capacity(out_len);

    let cache: Option<Vec<Vec<f64>>> = (p <= MAX_CACHED_PHASES)
        .then(|| (0..p).map(|r| phase_taps(r, p, half, cutoff)).collect());

    for m in 0..out_len {
        // Output sample m sits at input position n0 + r/p.
        let num = m * q;
        let n0 = (num / p) as isize;
        let r = num % p;
        let direct;
        let taps: &[f64] = match &cache {
            Some(c) => &c[r],
            None => {
                direct = phase_taps(r, p, half, cutoff);
                &direct
            }
        };
        let mut acc = 0.0;
        for (j, &t) in taps.iter().enumerate() {
            let i = n0 + j as isize - (half as isize - 1);
            if i >= 0 && (i as usize) < x.len() {
                acc += t * x[i as usize];
            }
        }
        out.push(acc);
    }

    Ok(Audio {
        samples: out,
        sample_rate: target_rate,
    })
}

/// Taps for fractional phase r/p: the kernel sampled at distances
/// (j - (half - 1) - r/p) for j in 0..2*half, normalized to unit sum.
fn phase_taps(r: usize, p: usize, half: usize, cutoff: f64) -> Vec<f64> {
    let frac = r as f64 / p as f64;
    let mut taps: Vec<f64> = (0..2 * half)
        .map(|j| {
            let t = j as f64 - (half as f64 - 1.0) - frac;
            kernel(t, half as f64, cutoff)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Windowed-sinc kernel at offset `t` input samples from the output point.
fn kernel(t: f64, half: f64, cutoff: f64) -> f64 {
    if t.abs() >= half {
        return 0.0;
    }
    let ratio = t / half;
    let window = bessel_i0(KAISER_BETA * (1.0 - ratio * ratio).sqrt()) / bessel_i0(KAISER_BETA);
    cutoff * sinc(cutoff * t) * window
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        let pt = std::f64::consts::PI * t;
        pt.sin() / pt
    }
}

/// Modified Bessel function of the first kind, order zero, by power
/// series. Converges quickly for the argument range the window uses.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..200 {
        term *= half_x / k as f64;
        let sq = term * term;
        sum += sq;
        if sq < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
