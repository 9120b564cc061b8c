//! WAV decoding and encoding.
//!
//! Input recordings may be PCM integer (8 to 32 bit) or IEEE float,
//! mono or multi-channel; multi-channel audio is mixed down by
//! averaging. Output is always mono IEEE float 32-bit, which
//! round-trips f32-representable samples bit-exactly.

use std::io::{Read, Seek};
use std::path::Path;

use crate::error::{Error, Result};

/// Decoded audio: mono samples plus the source sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn wav_err(path: &Path, reason: impl ToString) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Reads a WAV file and mixes it down to mono f64 samples.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    decode(reader).map_err(|e| wav_err(path, e))
}

/// Decodes in-memory WAV bytes; used by tests and fixture generators.
pub fn decode_wav(bytes: &[u8]) -> std::result::Result<Audio, hound::Error> {
    decode(hound::WavReader::new(std::io::Cursor::new(bytes))?)
}

fn decode<R: Read + Seek>(
    mut reader: hound::WavReader<R>,
) -> std::result::Result<Audio, hound::Error> {
    let spec = reader.spec();
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            // Scale so the most negative representable value maps to -1.
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let ch = spec.channels as usize;
    let samples = if ch == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(ch)
            .map(|frame| frame.iter().sum::<f64>() / ch as f64)
            .collect()
    };
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Writes mono samples as an IEEE float 32-bit WAV file.
pub fn write_wav(path: &Path, audio: &Audio) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in &audio.samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
