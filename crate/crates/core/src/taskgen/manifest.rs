use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audio::{load_audio, save_audio, AudioSignal};
use super::mix::NoiseProfile;
use super::task::{SeparationTask, TaskMixture};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Dev,
    Test,
}

/// One mixture on disk. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub mixture: String,
    pub references: [String; 2],
    pub pair: [usize; 2],
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_snr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub path: String,
    pub label: String,
}

/// One line of a task manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub task_id: String,
    pub speakers: [String; 2],
    pub role: Role,
    pub seed: u64,
    pub support: Vec<MixtureRecord>,
    pub query: Vec<MixtureRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseRecord>,
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn manifest_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_mixture(dir: &Path, rel: &str, sample_rate: u32, m: &TaskMixture) -> Result<MixtureRecord> {
    // same gain on mixture and references, peak at most 0.99
    let peak = m
        .mixture
        .iter()
        .chain(m.references.iter().flatten())
        .fold(0.0f64, |p, v| p.max(v.abs()));
    let gain = if peak > 0.99 { 0.99 / peak } else { 1.0 };
    let scaled = |x: &[f64]| AudioSignal::new(sample_rate, x.iter().map(|v| v * gain).collect());
    let names = [format!("{rel}_mix.wav"), format!("{rel}_s1.wav"), format!("{rel}_s2.wav")];
    save_audio(&dir.join(&names[0]), &scaled(&m.mixture))?;
    save_audio(&dir.join(&names[1]), &scaled(&m.references[0]))?;
    save_audio(&dir.join(&names[2]), &scaled(&m.references[1]))?;
    let [mixture, r1, r2] = names;
    Ok(MixtureRecord {
        mixture,
        references: [r1, r2],
        pair: [m.pair.0, m.pair.1],
        snr_db: m.snr_db,
        noise_snr_db: m.noise_snr_db,
    })
}

/// Writes every task's audio next to the manifest (under a directory named
/// after the manifest's file stem) and one JSON record per line.
pub fn write_manifest(
    path: &Path,
    tasks: &[(Role, SeparationTask)],
    noises: &[NoiseProfile],
    sample_rate: u32,
) -> Result<Vec<ManifestRecord>> {
    let dir = manifest_dir(path);
    let stem = path
        .file_stem()
        .ok_or_else(|| manifest_err(path, "manifest path has no file name"))?
        .to_string_lossy()
        .into_owned();
    fs::create_dir_all(&dir)?;
    let mut noise_paths = Vec::new();
    for n in noises {
        let rel = format!("{stem}/noise/{}.wav", n.label);
        save_audio(&dir.join(&rel), &n.signal)?;
        noise_paths.push((n.label.clone(), rel));
    }
    let records: Vec<ManifestRecord> = tasks
        .par_iter()
        .map(|(role, t)| {
            let base = format!("{stem}/{}", t.task_id);
            let support = t
                .support
                .iter()
                .enumerate()
                .map(|(k, m)| write_mixture(&dir, &format!("{base}/support{k}"), sample_rate, m))
                .collect::<Result<_>>()?;
            let query = t
                .query
                .iter()
                .enumerate()
                .map(|(k, m)| write_mixture(&dir, &format!("{base}/query{k}"), sample_rate, m))
                .collect::<Result<_>>()?;
            let noise = match &t.noise {
                None => None,
                Some(label) => {
                    let (_, rel) = noise_paths
                        .iter()
                        .find(|(l, _)| l == label)
                        .ok_or_else(|| manifest_err(path, format!("noise profile {label} was not supplied")))?;
                    Some(NoiseRecord {
                        path: rel.clone(),
                        label: label.clone(),
                    })
                }
            };
            Ok(ManifestRecord {
                task_id: t.task_id.clone(),
                speakers: t.speakers.clone(),
                role: *role,
                seed: t.seed,
                support,
                query,
                noise,
            })
        })
        .collect::<Result<_>>()?;
    let mut f = fs::File::create(path)?;
    for r in &records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let f = fs::File::open(path).map_err(|e| manifest_err(path, e.to_string()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| manifest_err(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

fn load_mixture(dir: &Path, r: &MixtureRecord) -> Result<TaskMixture> {
    let load = |rel: &str| load_audio(&dir.join(rel)).map(|a| a.samples);
    Ok(TaskMixture {
        pair: (r.pair[0], r.pair[1]),
        mixture: load(&r.mixture)?,
        references: [load(&r.references[0])?, load(&r.references[1])?],
        snr_db: r.snr_db,
        noise_snr_db: r.noise_snr_db,
    })
}

/// Loads the audio of one record. `manifest` is the manifest file path.
pub fn load_task(manifest: &Path, record: &ManifestRecord) -> Result<SeparationTask> {
    let dir = manifest_dir(manifest);
    Ok(SeparationTask {
        task_id: record.task_id.clone(),
        speakers: record.speakers.clone(),
        seed: record.seed,
        support: record.support.iter().map(|r| load_mixture(&dir, r)).collect::<Result<_>>()?,
        query: record.query.iter().map(|r| load_mixture(&dir, r)).collect::<Result<_>>()?,
        noise: record.noise.as_ref().map(|n| n.label.clone()),
    })
}

/// Every task of a manifest with its role, in file order.
pub fn load_manifest_tasks(path: &Path) -> Result<Vec<(Role, SeparationTask)>> {
    let records = read_manifest(path)?;
    records
        .par_iter()
        .map(|r| Ok((r.role, load_task(path, r)?)))
        .collect()
}
