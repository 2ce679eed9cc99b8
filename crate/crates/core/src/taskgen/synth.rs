use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::audio::AudioSignal;
use super::child_seed;
use crate::error::{Error, Result};

pub const MAX_HARMONICS: usize = 5;

/// A synthetic speaker: pitch band, harmonic amplitudes (fundamental first)
/// and a seed for per-utterance randomness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSpec {
    pub id: String,
    pub band_hz: (f64, f64),
    pub harmonics: Vec<f64>,
    pub seed: u64,
}

impl SpeakerSpec {
    /// A random speaker with a 40 Hz pitch band somewhere in 90-360 Hz and
    /// geometrically decaying harmonics.
    pub fn random(id: impl Into<String>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = 90.0 * 4f64.powf(rng.gen::<f64>()) * 0.9;
        let decay: f64 = rng.gen_range(0.35..0.8);
        let mut harmonics: Vec<f64> = (0..MAX_HARMONICS)
            .map(|k| decay.powi(k as i32) * rng.gen_range(0.85..1.0))
            .collect();
        harmonics[0] = 1.0;
        for k in 1..harmonics.len() {
            harmonics[k] = harmonics[k].min(harmonics[k - 1]);
        }
        SpeakerSpec {
            id: id.into(),
            band_hz: (lo, lo + 40.0),
            harmonics,
            seed,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let (lo, hi) = self.band_hz;
        let nyquist = sample_rate as f64 / 2.0;
        if !(lo > 0.0 && lo <= hi && hi < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "speaker {}: band [{lo}, {hi}] Hz must lie within (0, {nyquist}) Hz",
                self.id
            )));
        }
        if self.harmonics.is_empty() || self.harmonics.len() > MAX_HARMONICS {
            return Err(Error::InvalidConfig(format!(
                "speaker {}: expected 1 to {MAX_HARMONICS} harmonic amplitudes",
                self.id
            )));
        }
        Ok(())
    }
}

/// Harmonic tone with a slowly drifting pitch inside the speaker's band and
/// a slow random amplitude envelope, normalized to unit RMS.
pub fn synth_speaker_utterance(
    spec: &SpeakerSpec,
    utterance: u64,
    duration_s: f64,
    sample_rate: u32,
) -> Result<AudioSignal> {
    spec.validate(sample_rate)?;
    let n = (duration_s * sample_rate as f64).round() as usize;
    if n == 0 {
        return Err(Error::InvalidConfig("utterance duration rounds to zero samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(spec.seed, &format!("utt{utterance}")));
    let (lo, hi) = spec.band_hz;
    let f0 = rng.gen_range(lo..=hi);
    let drift_rate = rng.gen_range(0.5..2.0);
    let drift_phase = rng.gen_range(0.0..2.0 * PI);
    let env: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(1.0..4.0), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.3..1.0)))
        .collect();
    let phases: Vec<f64> = spec.harmonics.iter().map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let nyquist = sample_rate as f64 / 2.0;
    let dt = 1.0 / sample_rate as f64;

    let mut phase = 0.0;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        // pitch wanders over the band, never outside it
        let f = (f0 + 0.25 * (hi - lo) * (2.0 * PI * drift_rate * t + drift_phase).sin()).clamp(lo, hi);
        phase += 2.0 * PI * f * dt;
        let amp = 1.0 + 0.5 * env.iter().map(|(r, p, w)| w * (2.0 * PI * r * t + p).sin()).sum::<f64>() / 3.0;
        let mut v = 0.0;
        for (k, (a, ph)) in spec.harmonics.iter().zip(&phases).enumerate() {
            if (k + 1) as f64 * hi < nyquist {
                v += a * ((k + 1) as f64 * phase + ph).sin();
            }
        }
        x.push(amp * v);
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::ZeroPower("synthetic utterance"));
    }
    x.iter_mut().for_each(|v| *v /= rms);
    Ok(AudioSignal::new(sample_rate, x))
}
