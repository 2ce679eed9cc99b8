use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::audio::{power, AudioSignal};
use crate::error::{Error, Result};

/// Output of [`mix_at_snr`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mix {
    pub mixture: AudioSignal,
    /// `s1` trimmed to the common length.
    pub target: Vec<f64>,
    /// `a * s2` trimmed to the common length.
    pub scaled_interferer: Vec<f64>,
    pub scale: f64,
}

fn check_rates(a: &AudioSignal, b: &AudioSignal) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::InvalidConfig(format!(
            "sample rates differ: {} Hz and {} Hz",
            a.sample_rate, b.sample_rate
        )));
    }
    Ok(())
}

/// Gain `a` such that `10 log10(P(s1) / P(a s2)) = snr_db`.
pub fn snr_gain(p_signal: f64, p_interferer: f64, snr_db: f64) -> f64 {
    (p_signal / (p_interferer * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// `s1 + a s2` at the requested SNR. Both inputs are trimmed to the shorter
/// length first and powers are measured on the trimmed signals.
pub fn mix_at_snr(s1: &AudioSignal, s2: &AudioSignal, snr_db: f64) -> Result<Mix> {
    check_rates(s1, s2)?;
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("mixing SNR must be finite, got {snr_db}")));
    }
    let n = s1.len().min(s2.len());
    let target = s1.samples[..n].to_vec();
    let other = &s2.samples[..n];
    let (p1, p2) = (power(&target), power(other));
    if p1 == 0.0 {
        return Err(Error::ZeroPower("first source"));
    }
    if p2 == 0.0 {
        return Err(Error::ZeroPower("second source"));
    }
    let scale = snr_gain(p1, p2, snr_db);
    let scaled_interferer: Vec<f64> = other.iter().map(|v| v * scale).collect();
    let mixture = target.iter().zip(&scaled_interferer).map(|(a, b)| a + b).collect();
    Ok(Mix {
        mixture: AudioSignal::new(s1.sample_rate, mixture),
        target,
        scaled_interferer,
        scale,
    })
}

/// Noise waveform with a label.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseProfile {
    pub label: String,
    pub signal: AudioSignal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseColor {
    White,
    /// Leaky-integrated white noise, most energy at low frequencies.
    Brown,
}

impl NoiseProfile {
    pub fn new(label: impl Into<String>, signal: AudioSignal) -> Result<Self> {
        if signal.power() == 0.0 {
            return Err(Error::ZeroPower("noise"));
        }
        Ok(NoiseProfile {
            label: label.into(),
            signal,
        })
    }

    /// Seeded synthetic noise, normalized to unit RMS.
    pub fn synthetic(label: impl Into<String>, color: NoiseColor, len: usize, sample_rate: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = 0.0;
        let mut x: Vec<f64> = (0..len.max(1))
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut rng);
                match color {
                    NoiseColor::White => w,
                    NoiseColor::Brown => {
                        state = 0.98 * state + w;
                        state
                    }
                }
            })
            .collect();
        let rms = power(&x).sqrt();
        x.iter_mut().for_each(|v| *v /= rms);
        NoiseProfile {
            label: label.into(),
            signal: AudioSignal::new(sample_rate, x),
        }
    }

    /// The noise tiled or trimmed to `len` samples.
    pub fn fitted(&self, len: usize) -> Vec<f64> {
        self.signal.samples.iter().copied().cycle().take(len).collect()
    }
}

/// `mixture + b noise` with `b` chosen so the mixture-to-noise power ratio
/// is `snr_db`. `+inf` returns the mixture unchanged.
pub fn add_noise(mixture: &AudioSignal, noise: &NoiseProfile, snr_db: f64) -> Result<AudioSignal> {
    if snr_db == f64::INFINITY {
        return Ok(mixture.clone());
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("noise SNR must not be {snr_db}")));
    }
    check_rates(mixture, &noise.signal)?;
    let n = noise.fitted(mixture.len());
    let (pm, pn) = (mixture.power(), power(&n));
    if pn == 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    if pm == 0.0 {
        return Err(Error::ZeroPower("mixture"));
    }
    let b = snr_gain(pm, pn, snr_db);
    Ok(AudioSignal::new(
        mixture.sample_rate,
        mixture.samples.iter().zip(&n).map(|(x, v)| x + b * v).collect(),
    ))
}
