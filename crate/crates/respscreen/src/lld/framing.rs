//! Fixed-hop framing of a signal.
//!
//! Only full frames are produced: frame t covers samples
//! [t*hop, t*hop + win) and the count is floor((len - win) / hop) + 1.
//! A trailing remainder shorter than one window is dropped rather than
//! zero-padded, so every frame sees real signal.

use crate::error::{Error, Result};

/// Window shape applied before spectral analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowFunction {
    Hamming,
    Rectangular,
}

impl WindowFunction {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFunction::Hamming => crate::dsp::hamming(n),
            WindowFunction::Rectangular => vec![1.0; n],
        }
    }
}

/// View of a signal as overlapping frames. Raw frames are slices into
/// the signal; windowed frames are materialized on demand so the pitch
/// path (long windows) does not hold copies of every frame.
pub struct Frames<'a> {
    signal: &'a [f64],
    window: Vec<f64>,
    win_len: usize,
    hop: usize,
    count: usize,
    sample_rate: u32,
}

impl<'a> Frames<'a> {
    pub fn new(
        signal: &'a [f64],
        sample_rate: u32,
        win_len: usize,
        hop: usize,
        window_function: WindowFunction,
    ) -> Result<Self> {
        if signal.len() < win_len {
            return Err(Error::Numeric {
                stage: "framing".into(),
                reason: format!(
                    "segment of {} samples is shorter than one {win_len}-sample window",
                    signal.len()
                ),
            });
        }
        let count = (signal.len() - win_len) / hop + 1;
        Ok(Frames {
            signal,
            window: window_function.coefficients(win_len),
            win_len,
            hop,
            count,
            sample_rate,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn win_len(&self) -> usize {
        self.win_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Unwindowed samples of frame `t`.
    pub fn raw(&self, t: usize) -> &[f64] {
        let start = t * self.hop;
        &self.signal[start..start + self.win_len]
    }

    /// Frame `t` plus one lookahead sample when the signal extends past
    /// the frame. Used by pairwise measures (zero crossings) so an
    /// event on the frame boundary is attributed to exactly one frame.
    pub fn raw_extended(&self, t: usize) -> &[f64] {
        let start = t * self.hop;
        let end = (start + self.win_len + 1).min(self.signal.len());
        &self.signal[start..end]
    }

    /// Window-multiplied samples of frame `t`, written into `buf`.
    pub fn windowed_into(&self, t: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(
            self.raw(t)
                .iter()
                .zip(&self.window)
                .map(|(&s, &w)| s * w),
        );
    }

    /// Center time of frame `t` in seconds.
    pub fn center_time(&self, t: usize) -> f64 {
        (t * self.hop) as f64 / self.sample_rate as f64
            + self.win_len as f64 / (2.0 * self.sample_rate as f64)
    }
}
