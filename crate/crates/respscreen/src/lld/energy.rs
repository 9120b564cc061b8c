//! Time-domain energy descriptors.
//!
//! Both operate on unwindowed frames: RMS of a full-scale square wave
//! must be exactly 1, which a tapering window would destroy. The other
//! two energy-group descriptors (loudness, modulation-filtered
//! spectrum sum) come from the spectral front-end.

use super::framing::Frames;

/// Root-mean-square amplitude per frame.
pub fn rms_energy(frames: &Frames) -> Vec<f64> {
    (0..frames.count())
        .map(|t| {
            let raw = frames.raw(t);
            (raw.iter().map(|s| s * s).sum::<f64>() / raw.len() as f64).sqrt()
        })
        .collect()
}

/// Zero-crossing rate per frame, as sign changes per sample.
///
/// Zero samples are treated as positive so a zero-touching crossing
/// counts once rather than twice. Each sample-pair crossing belongs to
/// the frame holding its left sample, so the pair straddling the frame
/// boundary is included; without it, a tone phase-locked to the hop
/// loses one crossing in every frame.
pub fn zero_crossing_rate(frames: &Frames) -> Vec<f64> {
    (0..frames.count())
        .map(|t| {
            let raw = frames.raw_extended(t);
            let crossings = raw
                .windows(2)
                .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
                .count();
            crossings as f64 / frames.win_len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lld::framing::WindowFunction;

    #[test]
    fn zero_frame_has_zero_rms_and_zcr() {
        let signal = vec![0.0; 2000];
        let frames = Frames::new(&signal, 44100, 1103, 441, WindowFunction::Hamming).unwrap();
        assert_eq!(rms_energy(&frames)[0], 0.0);
        assert_eq!(zero_crossing_rate(&frames)[0], 0.0);
    }

    #[test]
    fn full_scale_square_wave_has_unit_rms() {
        let signal: Vec<f64> = (0..2000).map(|i| if (i / 50) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let frames = Frames::new(&signal, 44100, 1103, 441, WindowFunction::Hamming).unwrap();
        for v in rms_energy(&frames) {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn sine_zcr_matches_analytic_crossing_count() {
        // 100 Hz sine at 44.1 kHz crosses zero 200 times per second:
        // about 4.54e-3 crossings per sample, within one crossing per frame.
        let signal: Vec<f64> = (0..44100)
            .map(|n| (2.0 * std::f64::consts::PI * 100.0 * n as f64 / 44100.0).sin())
            .collect();
        let frames = Frames::new(&signal, 44100, 1103, 441, WindowFunction::Hamming).unwrap();
        let expected = 200.0 / 44100.0;
        let slack = 1.0 / 1103.0;
        for v in zero_crossing_rate(&frames) {
            assert!((v - expected).abs() <= slack, "zcr {v} vs {expected}");
        }
    }
}
