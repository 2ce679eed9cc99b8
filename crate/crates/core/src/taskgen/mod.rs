//! Meta-task construction: speaker pools, SNR-controlled mixing, one-shot
//! support/query splits, noise injection, synthetic speakers and the task
//! manifest.

mod audio;
mod manifest;
mod mix;
mod synth;
mod task;

pub use audio::{load_audio, power, resample_to_8k, save_audio, AudioSignal, CANONICAL_RATE};
pub use manifest::{
    load_manifest_tasks, load_task, read_manifest, write_manifest, ManifestRecord, MixtureRecord, NoiseRecord, Role,
};
pub use mix::{add_noise, mix_at_snr, snr_gain, Mix, NoiseColor, NoiseProfile};
pub use synth::{synth_speaker_utterance, SpeakerSpec, MAX_HARMONICS};
pub use task::{
    build_task, enumerate_tasks, generate_task, generate_tasks, split_support_query, task_count, RawTask,
    SeparationTask, Speaker, SpeakerPool, TaskMixture, TaskOptions, TaskSpec, MIXTURES_PER_TASK, QUERY_SIZE,
    UTTERANCES_PER_SPEAKER,
};

/// Seed for a named child stream, stable across platforms and releases.
pub fn child_seed(master: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ master.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
