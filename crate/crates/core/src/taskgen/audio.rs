use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

pub const CANONICAL_RATE: u32 = 8_000;

/// Mono waveform in [-1, 1] (nominally) at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioSignal {
    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Self {
        AudioSignal { sample_rate, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean square.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }
}

pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn unsupported(path: &Path, reason: String) -> Error {
    Error::UnsupportedAudio {
        path: path.to_path_buf(),
        chunk: "fmt ",
        reason,
    }
}

/// Reads a mono 16-bit PCM WAV file.
pub fn load_audio(path: &Path) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(unsupported(path, format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(
            path,
            format!("{:?} with {} bits per sample, expected 16-bit PCM", spec.sample_format, spec.bits_per_sample),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(AudioSignal::new(spec.sample_rate, samples))
}

/// Writes a mono 16-bit PCM WAV file. Samples are clamped to [-1, 1].
pub fn save_audio(path: &Path, signal: &AudioSignal) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &v in &signal.samples {
        w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Windowed-sinc low-pass at the target Nyquist followed by integer
/// decimation. Output length is `ceil(N / M)`.
pub fn resample_to_8k(signal: &AudioSignal) -> Result<AudioSignal> {
    let from = signal.sample_rate;
    if from == CANONICAL_RATE {
        return Ok(signal.clone());
    }
    if from < CANONICAL_RATE || !from.is_multiple_of(CANONICAL_RATE) {
        return Err(Error::ResampleRatio {
            from,
            to: CANONICAL_RATE,
        });
    }
    let m = (from / CANONICAL_RATE) as usize;
    let half = 16 * m;
    let cutoff = 0.5 / m as f64;
    let taps: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let n = k as f64 - half as f64;
            let sinc = if n == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * n).sin() / (PI * n)
            };
            // Blackman window
            let w = 0.42 - 0.5 * (2.0 * PI * k as f64 / (2 * half) as f64).cos()
                + 0.08 * (4.0 * PI * k as f64 / (2 * half) as f64).cos();
            sinc * w
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    let x = &signal.samples;
    let out_len = x.len().div_ceil(m);
    let out = (0..out_len)
        .map(|i| {
            let centre = (i * m) as isize;
            let mut acc = 0.0;
            for (k, h) in taps.iter().enumerate() {
                let idx = centre + k as isize - half as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += h * x[idx as usize];
                }
            }
            acc / gain
        })
        .collect();
    Ok(AudioSignal::new(CANONICAL_RATE, out))
}
