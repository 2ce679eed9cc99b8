//! Checks of the task construction protocol on a small synthetic pool.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use metass::harness::noise_profiles;
use metass::taskgen::{
    build_task, enumerate_tasks, generate_task, SeparationTask, SpeakerPool, SpeakerSpec, TaskOptions, MIXTURES_PER_TASK,
};

pub fn pool_of(n: usize, utterances: usize, duration_s: f64) -> SpeakerPool {
    let specs: Vec<SpeakerSpec> = (0..n).map(|i| SpeakerSpec::random(format!("s{i:03}"), 1000 + i as u64)).collect();
    SpeakerPool::synthetic(&specs, utterances, duration_s, 8000).unwrap()
}

/// Six speakers with five utterances each.
pub fn small_pool() -> &'static SpeakerPool {
    static POOL: OnceLock<SpeakerPool> = OnceLock::new();
    POOL.get_or_init(|| pool_of(6, 5, 0.05))
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

pub fn db(a: f64, b: f64) -> f64 {
    10.0 * (a / b).log10()
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = power(x).sqrt();
    x.iter().map(|v| v / n).collect()
}

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    unit(a).iter().zip(unit(b)).all(|(x, y)| (x - y).abs() < 1e-9)
}

fn clean_violations(task: &SeparationTask, out: &mut Vec<String>) {
    let id = &task.task_id;
    if task.support.len() != 1 || task.query.len() != 4 {
        out.push(format!("{id}: split {}/{}", task.support.len(), task.query.len()));
        return;
    }
    let s = &task.support[0];
    for q in &task.query {
        if q.pair.0 == s.pair.0 || q.pair.1 == s.pair.1 {
            out.push(format!("{id}: query pair {:?} shares an utterance with support {:?}", q.pair, s.pair));
        }
        if q.references[0] == s.references[0] || same_direction(&q.references[1], &s.references[1]) {
            out.push(format!("{id}: query reuses a support source"));
        }
    }
    let pairs: BTreeSet<_> = task.query.iter().map(|q| q.pair).collect();
    if pairs.len() != 4 {
        out.push(format!("{id}: duplicate query mixtures"));
    }
    for m in task.support.iter().chain(&task.query) {
        if !(0.0..=5.0).contains(&m.snr_db) {
            out.push(format!("{id}: SNR {} outside [0, 5]", m.snr_db));
        }
        let measured = db(power(&m.references[0]), power(&m.references[1]));
        if (measured - m.snr_db).abs() >= 0.01 {
            out.push(format!("{id}: measured SNR {measured} for requested {}", m.snr_db));
        }
    }
}

/// Everything wrong with the clean and noisy tasks for one pair and seed.
pub fn task_violations(seed: u64, pair: usize) -> Vec<String> {
    let pool = small_pool();
    let specs = enumerate_tasks(pool);
    let spec = &specs[pair % specs.len()];
    let mut out = Vec::new();
    let (a, b) = (pool.speaker(&spec.speakers[0]).unwrap(), pool.speaker(&spec.speakers[1]).unwrap());
    let raw = build_task(&a.utterances, &b.utterances, (0.0, 5.0), seed).unwrap();
    if raw.mixtures.len() != MIXTURES_PER_TASK || MIXTURES_PER_TASK != 9 {
        out.push(format!("{} mixtures built", raw.mixtures.len()));
    }
    for sel in &raw.selected {
        if sel.iter().collect::<BTreeSet<_>>().len() != 3 {
            out.push(format!("utterance selection {sel:?} repeats"));
        }
    }
    let clean = generate_task(pool, spec, seed, &TaskOptions::default()).unwrap();
    clean_violations(&clean, &mut out);
    if clean.noise.is_some() {
        out.push("clean task carries noise".into());
    }
    let opts = TaskOptions {
        noise: Some(noise_profiles(seed, 8000)),
        ..TaskOptions::default()
    };
    let noisy = generate_task(pool, spec, seed, &opts).unwrap();
    if noisy.noise.is_none() {
        out.push("noisy task has no noise label".into());
    }
    for (c, n) in clean.support.iter().chain(&clean.query).zip(noisy.support.iter().chain(&noisy.query)) {
        if c.references != n.references {
            out.push("noise changed the references".into());
        }
        let Some(snr) = n.noise_snr_db else {
            out.push("noisy mixture without noise SNR".into());
            continue;
        };
        if !(10.0..=15.0).contains(&snr) {
            out.push(format!("noise SNR {snr} outside [10, 15]"));
        }
        let added: Vec<f64> = n.mixture.iter().zip(&c.mixture).map(|(a, b)| a - b).collect();
        let measured = db(power(&c.mixture), power(&added));
        if (measured - snr).abs() >= 0.01 {
            out.push(format!("measured noise SNR {measured} for requested {snr}"));
        }
    }
    if generate_task(pool, spec, seed, &opts).unwrap() != noisy {
        out.push("generation is not deterministic".into());
    }
    out
}
