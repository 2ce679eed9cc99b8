use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audio::{load_audio, resample_to_8k, AudioSignal};
use super::child_seed;
use super::mix::{add_noise, mix_at_snr, NoiseProfile};
use super::synth::{synth_speaker_utterance, SpeakerSpec};
use crate::error::{Error, Result};
use crate::metalearn::{MixtureExample, Task};

/// Utterances selected per speaker for one task.
pub const UTTERANCES_PER_SPEAKER: usize = 3;
pub const MIXTURES_PER_TASK: usize = UTTERANCES_PER_SPEAKER * UTTERANCES_PER_SPEAKER;
pub const QUERY_SIZE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Speaker {
    pub id: String,
    pub utterances: Vec<AudioSignal>,
}

/// Speakers with at least three usable utterances each, all at one rate.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerPool {
    sample_rate: u32,
    speakers: Vec<Speaker>,
}

impl SpeakerPool {
    pub fn new(sample_rate: u32, speakers: Vec<Speaker>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &speakers {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate speaker id {}", s.id)));
            }
            if s.utterances.len() < UTTERANCES_PER_SPEAKER {
                return Err(Error::InvalidConfig(format!(
                    "speaker {} has {} utterances, at least {UTTERANCES_PER_SPEAKER} are required",
                    s.id,
                    s.utterances.len()
                )));
            }
            for (k, u) in s.utterances.iter().enumerate() {
                if u.sample_rate != sample_rate {
                    return Err(Error::InvalidConfig(format!(
                        "speaker {} utterance {k} is at {} Hz, pool rate is {sample_rate} Hz",
                        s.id, u.sample_rate
                    )));
                }
                if !u.samples.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite(format!("speaker {} utterance {k}", s.id)));
                }
                if u.power() == 0.0 {
                    return Err(Error::ZeroPower("utterance"));
                }
            }
        }
        Ok(SpeakerPool { sample_rate, speakers })
    }

    /// Synthetic pool rendered from speaker specs.
    pub fn synthetic(specs: &[SpeakerSpec], utterances: usize, duration_s: f64, sample_rate: u32) -> Result<Self> {
        let speakers = specs
            .par_iter()
            .map(|spec| {
                let utterances = (0..utterances as u64)
                    .map(|u| synth_speaker_utterance(spec, u, duration_s, sample_rate))
                    .collect::<Result<_>>()?;
                Ok(Speaker {
                    id: spec.id.clone(),
                    utterances,
                })
            })
            .collect::<Result<_>>()?;
        SpeakerPool::new(sample_rate, speakers)
    }

    /// One speaker per subdirectory of `root`, one utterance per `.wav`
    /// file, resampled to 8 kHz. Files are taken in name order.
    pub fn from_dir(root: &Path) -> Result<Self> {
        let mut dirs: Vec<_> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .collect();
        dirs.sort_by_key(|e| e.file_name());
        let mut speakers = Vec::new();
        for d in dirs {
            let mut files: Vec<_> = std::fs::read_dir(d.path())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            files.sort();
            let utterances = files
                .iter()
                .map(|f| resample_to_8k(&load_audio(f)?))
                .collect::<Result<_>>()?;
            speakers.push(Speaker {
                id: d.file_name().to_string_lossy().into_owned(),
                utterances,
            });
        }
        SpeakerPool::new(super::audio::CANONICAL_RATE, speakers)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn speakers(&self) -> &[Speaker] {
        &self.speakers
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.id == id)
    }
}

/// An unordered speaker pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub speakers: [String; 2],
}

pub fn task_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All unordered speaker pairs, ordered by speaker id.
pub fn enumerate_tasks(pool: &SpeakerPool) -> Vec<TaskSpec> {
    let mut ids: Vec<&str> = pool.speakers.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    enumerate_pairs(&ids)
}

pub(crate) fn enumerate_pairs(ids: &[&str]) -> Vec<TaskSpec> {
    let mut out = Vec::with_capacity(task_count(ids.len()));
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            out.push(TaskSpec {
                task_id: format!("{a}+{b}"),
                speakers: [a.to_string(), b.to_string()],
            });
        }
    }
    out
}

/// One two-speaker mixture with its clean references.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskMixture {
    /// 0-based (utterance of first speaker, utterance of second speaker).
    pub pair: (usize, usize),
    pub mixture: Vec<f64>,
    pub references: [Vec<f64>; 2],
    pub snr_db: f64,
    pub noise_snr_db: Option<f64>,
}

impl TaskMixture {
    pub fn to_example(&self) -> MixtureExample {
        MixtureExample::new(self.mixture.clone(), self.references.to_vec())
    }
}

/// The nine mixtures of a speaker pair, row-major over `pair`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTask {
    /// Indices into each speaker's utterance list.
    pub selected: [[usize; UTTERANCES_PER_SPEAKER]; 2],
    pub mixtures: Vec<TaskMixture>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationTask {
    pub task_id: String,
    pub speakers: [String; 2],
    pub seed: u64,
    pub support: Vec<TaskMixture>,
    pub query: Vec<TaskMixture>,
    /// Label of the injected noise profile, if any.
    pub noise: Option<String>,
}

impl SeparationTask {
    pub fn noise_flag(&self) -> bool {
        self.noise.is_some()
    }

    pub fn to_meta_task(&self) -> Task<MixtureExample> {
        Task {
            id: self.task_id.clone(),
            support: self.support.iter().map(TaskMixture::to_example).collect(),
            query: self.query.iter().map(TaskMixture::to_example).collect(),
        }
    }
}

fn select(rng: &mut ChaCha8Rng, available: usize) -> [usize; UTTERANCES_PER_SPEAKER] {
    let v = sample(rng, available, UTTERANCES_PER_SPEAKER).into_vec();
    [v[0], v[1], v[2]]
}

/// Picks three utterances per speaker and mixes every pair at an SNR drawn
/// uniformly from `snr_range`.
pub fn build_task(a: &[AudioSignal], b: &[AudioSignal], snr_range: (f64, f64), seed: u64) -> Result<RawTask> {
    if a.len() < UTTERANCES_PER_SPEAKER || b.len() < UTTERANCES_PER_SPEAKER {
        return Err(Error::InvalidConfig(format!(
            "each speaker needs at least {UTTERANCES_PER_SPEAKER} utterances, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = [select(&mut rng, a.len()), select(&mut rng, b.len())];
    let mut mixtures = Vec::with_capacity(MIXTURES_PER_TASK);
    for (i, &ua) in selected[0].iter().enumerate() {
        for (j, &ub) in selected[1].iter().enumerate() {
            let snr_db = rng.gen_range(snr_range.0..=snr_range.1);
            let m = mix_at_snr(&a[ua], &b[ub], snr_db)?;
            mixtures.push(TaskMixture {
                pair: (i, j),
                mixture: m.mixture.samples,
                references: [m.target, m.scaled_interferer],
                snr_db,
                noise_snr_db: None,
            });
        }
    }
    Ok(RawTask { selected, mixtures })
}

/// Support is mixture `(i, j)`; query is every `(k, l)` with `k != i` and
/// `l != j`. The other four mixtures are dropped.
pub fn split_support_query(raw: &RawTask, support: (usize, usize)) -> Result<(Vec<TaskMixture>, Vec<TaskMixture>)> {
    let n = UTTERANCES_PER_SPEAKER;
    if support.0 >= n || support.1 >= n || raw.mixtures.len() != MIXTURES_PER_TASK {
        return Err(Error::InvalidConfig(format!("invalid support index {support:?}")));
    }
    let s = raw.mixtures[support.0 * n + support.1].clone();
    let q = raw
        .mixtures
        .iter()
        .filter(|m| m.pair.0 != support.0 && m.pair.1 != support.1)
        .cloned()
        .collect();
    Ok((vec![s], q))
}

#[derive(Clone, Debug)]
pub struct TaskOptions {
    pub snr_range: (f64, f64),
    /// Profiles to draw from; `None` generates clean tasks.
    pub noise: Option<Vec<NoiseProfile>>,
    pub noise_snr_range: (f64, f64),
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions {
            snr_range: (0.0, 5.0),
            noise: None,
            noise_snr_range: (10.0, 15.0),
        }
    }
}

/// Builds, splits and optionally noises one task. Depends only on the pool,
/// the pair, and `child_seed(master_seed, task_id)`.
pub fn generate_task(pool: &SpeakerPool, spec: &TaskSpec, master_seed: u64, opts: &TaskOptions) -> Result<SeparationTask> {
    let seed = child_seed(master_seed, &spec.task_id);
    let find = |id: &str| {
        pool.speaker(id)
            .ok_or_else(|| Error::InvalidConfig(format!("speaker {id} is not in the pool")))
    };
    let (a, b) = (find(&spec.speakers[0])?, find(&spec.speakers[1])?);
    let raw = build_task(&a.utterances, &b.utterances, opts.snr_range, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let support_idx = (
        rng.gen_range(0..UTTERANCES_PER_SPEAKER),
        rng.gen_range(0..UTTERANCES_PER_SPEAKER),
    );
    let (mut support, mut query) = split_support_query(&raw, support_idx)?;
    let mut noise = None;
    if let Some(profiles) = opts.noise.as_ref().filter(|p| !p.is_empty()) {
        let profile = &profiles[rng.gen_range(0..profiles.len())];
        for m in support.iter_mut().chain(query.iter_mut()) {
            let snr = rng.gen_range(opts.noise_snr_range.0..=opts.noise_snr_range.1);
            let noisy = add_noise(&AudioSignal::new(pool.sample_rate, std::mem::take(&mut m.mixture)), profile, snr)?;
            m.mixture = noisy.samples;
            m.noise_snr_db = Some(snr);
        }
        noise = Some(profile.label.clone());
    }
    Ok(SeparationTask {
        task_id: spec.task_id.clone(),
        speakers: spec.speakers.clone(),
        seed,
        support,
        query,
        noise,
    })
}

/// [`generate_task`] over many pairs in parallel; output order follows `specs`.
pub fn generate_tasks(
    pool: &SpeakerPool,
    specs: &[TaskSpec],
    master_seed: u64,
    opts: &TaskOptions,
) -> Result<Vec<SeparationTask>> {
    specs
        .par_iter()
        .map(|s| generate_task(pool, s, master_seed, opts))
        .collect()
}
