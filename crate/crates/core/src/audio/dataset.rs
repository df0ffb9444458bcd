//! Dataset directories: one sub-directory per track holding one WAV per
//! source name and optionally `mixture.wav`.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use super::{read_wav, resample, AudioClip};
use crate::error::{Error, Result};
use crate::training::TrackPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskProfile {
    SingingVoice,
    MultiInstrument,
}

impl TaskProfile {
    pub fn source_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            TaskProfile::SingingVoice => &["vocals", "accompaniment"],
            TaskProfile::MultiInstrument => &["bass", "drums", "other", "vocals"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn for_sources(k: usize) -> Option<Self> {
        match k {
            2 => Some(TaskProfile::SingingVoice),
            4 => Some(TaskProfile::MultiInstrument),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackEntry {
    pub name: String,
    pub dir: PathBuf,
    pub mixture: Option<PathBuf>,
    pub sources: IndexMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetIndex {
    pub source_names: Vec<String>,
    pub tracks: Vec<TrackEntry>,
}

impl DatasetIndex {
    /// Indexes every sub-directory of `root` in name order. A track missing
    /// any source file is a dataset error naming the track.
    pub fn scan(root: &Path, source_names: &[String]) -> Result<Self> {
        let entries = std::fs::read_dir(root)
            .map_err(|e| Error::io(format!("listing dataset {}", root.display()), e))?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        let mut tracks = Vec::with_capacity(dirs.len());
        for dir in dirs {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut sources = IndexMap::new();
            for source in source_names {
                let path = dir.join(format!("{source}.wav"));
                if !path.is_file() {
                    return Err(Error::Dataset(format!("track {name}: missing source file {source}.wav")));
                }
                sources.insert(source.clone(), path);
            }
            let mixture = Some(dir.join("mixture.wav")).filter(|p| p.is_file());
            tracks.push(TrackEntry {
                name,
                dir,
                mixture,
                sources,
            });
        }
        Ok(DatasetIndex {
            source_names: source_names.to_vec(),
            tracks,
        })
    }
}

/// Matches a decoded clip to the model's channel count and rate: mono
/// models mix down, stereo models need stereo files.
pub fn conform(clip: AudioClip, channels: usize, rate: u32, label: &str) -> Result<AudioClip> {
    let clip = match (channels, clip.channels()) {
        (1, _) => clip.to_mono(),
        (c, have) if c == have => clip,
        (c, have) => {
            return Err(Error::Dataset(format!("{label}: {have} channel(s), model needs {c}")));
        }
    };
    Ok(resample(&clip, rate))
}

/// Loads and conforms one track. The training pair re-derives its mixture
/// from the sources; the stored `mixture.wav` is returned separately when
/// present.
pub fn load_track(entry: &TrackEntry, channels: usize, rate: u32) -> Result<(TrackPair, Option<AudioClip>)> {
    let mut sources = Vec::with_capacity(entry.sources.len());
    for (name, path) in &entry.sources {
        let label = format!("track {} source {name}", entry.name);
        let clip = read_wav(path).map_err(|e| Error::Dataset(format!("{label}: {e}")))?;
        sources.push(conform(clip, channels, rate, &label)?);
    }
    let len = sources.iter().map(|s| s.len()).min().unwrap_or(0);
    if sources.iter().any(|s| s.len() != len) {
        return Err(Error::Dataset(format!("track {}: sources differ in length", entry.name)));
    }
    if len == 0 {
        return Err(Error::Dataset(format!("track {}: empty audio", entry.name)));
    }
    let pair = TrackPair::new(entry.name.clone(), sources)
        .map_err(|e| Error::Dataset(format!("track {}: {e}", entry.name)))?;
    let mixture = match &entry.mixture {
        Some(path) => {
            let label = format!("track {} mixture", entry.name);
            let clip = read_wav(path).map_err(|e| Error::Dataset(format!("{label}: {e}")))?;
            Some(conform(clip, channels, rate, &label)?)
        }
        None => None,
    };
    Ok((pair, mixture))
}
