use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{segment_sdr, summarize, SdrMode, SegmentScore, SummaryStats};
use crate::audio::{load_track, separate_track, AudioClip, DatasetIndex};
use crate::error::{Error, Result};
use crate::model::Checkpoint;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceSummary {
    pub source: String,
    /// `None` when every segment of the source was excluded.
    pub stats: Option<SummaryStats>,
}

/// Whole-dataset results: per-source statistics pooled over all segments
/// of all tracks, plus every individual score.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: SdrMode,
    pub segment_seconds: f64,
    /// How segments were aggregated into the statistics.
    pub aggregation: &'static str,
    pub checkpoint_sha256: Option<String>,
    pub tracks: Vec<String>,
    pub failed_tracks: Vec<(String, String)>,
    pub sources: Vec<SourceSummary>,
    #[serde(skip)]
    pub scores: Vec<SegmentScore>,
}

/// Scores every source of one track.
pub fn score_track(
    track: &str,
    source_names: &[String],
    references: &[AudioClip],
    estimates: &[AudioClip],
    segment_seconds: f64,
    mode: SdrMode,
) -> Result<Vec<SegmentScore>> {
    if references.len() != source_names.len() || estimates.len() != source_names.len() {
        return Err(Error::Usage("one reference and one estimate per source required".into()));
    }
    let mut out = Vec::new();
    for ((name, r), e) in source_names.iter().zip(references).zip(estimates) {
        for (segment, value) in segment_sdr(r, e, segment_seconds, mode)?.into_iter().enumerate() {
            out.push(SegmentScore {
                track: track.to_string(),
                source: name.clone(),
                segment,
                value,
            });
        }
    }
    Ok(out)
}

impl EvalReport {
    pub fn from_scores(
        source_names: &[String],
        scores: Vec<SegmentScore>,
        segment_seconds: f64,
        mode: SdrMode,
    ) -> Self {
        let mut by_source: IndexMap<&str, Vec<_>> =
            source_names.iter().map(|s| (s.as_str(), Vec::new())).collect();
        for s in &scores {
            if let Some(v) = by_source.get_mut(s.source.as_str()) {
                v.push(s.value);
            }
        }
        let sources = by_source
            .into_iter()
            .map(|(name, values)| SourceSummary {
                source: name.to_string(),
                stats: summarize(&values).ok(),
            })
            .collect();
        let mut tracks: Vec<String> = Vec::new();
        for s in &scores {
            if tracks.last() != Some(&s.track) && !tracks.contains(&s.track) {
                tracks.push(s.track.clone());
            }
        }
        EvalReport {
            mode,
            segment_seconds,
            aggregation: "pooled_segments",
            checkpoint_sha256: None,
            tracks,
            failed_tracks: Vec::new(),
            sources,
            scores,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per segment: `track,source,segment,sdr_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("track,source,segment,sdr_db\n");
        for s in &self.scores {
            out.push_str(&format!("{},{},{},{}\n", csv_field(&s.track), csv_field(&s.source), s.segment, s.value));
        }
        out
    }

    /// Fixed-width table with columns source, Med., MAD, Mean, SD.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(v) if v.is_finite() => format!("{v:.2}"),
            Some(v) if v.is_nan() => "nan".into(),
            Some(v) if v > 0.0 => "inf".into(),
            Some(_) => "-inf".into(),
            None => "-".into(),
        };
        let mut out = format!("{:<14} {:>8} {:>8} {:>8} {:>8}\n", "source", "Med.", "MAD", "Mean", "SD");
        for s in &self.sources {
            let (med, mad, mean, sd) = match &s.stats {
                Some(st) => (Some(st.median), Some(st.mad), st.mean, st.sd),
                None => (None, None, None, None),
            };
            out.push_str(&format!(
                "{:<14} {:>8} {:>8} {:>8} {:>8}\n",
                s.source,
                fmt(med),
                fmt(mad),
                fmt(mean),
                fmt(sd)
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn checkpoint_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Separates and scores every track of `index`. Tracks that fail to load
/// or separate are logged and listed in `failed_tracks`.
pub fn evaluate_dataset(
    checkpoint: &Checkpoint,
    index: &DatasetIndex,
    segment_seconds: f64,
    mode: SdrMode,
) -> Result<EvalReport> {
    let meta = &checkpoint.meta;
    if index.source_names != meta.source_names {
        return Err(Error::Dataset(format!(
            "dataset sources {:?} differ from model sources {:?}",
            index.source_names, meta.source_names
        )));
    }
    let results: Vec<(String, Result<Vec<SegmentScore>>)> = index
        .tracks
        .par_iter()
        .map(|entry| {
            let scored = (|| {
                let (pair, stored_mix) = load_track(entry, meta.model.channels, meta.sample_rate)?;
                let mixture = stored_mix.unwrap_or_else(|| pair.mixture().clone());
                if mixture.len() != pair.len() {
                    return Err(Error::Dataset(format!("track {}: mixture length differs from sources", entry.name)));
                }
                let estimates = separate_track(&checkpoint.params, &meta.model, meta.sample_rate, &mixture)?;
                score_track(&entry.name, &meta.source_names, pair.sources(), &estimates, segment_seconds, mode)
            })();
            (entry.name.clone(), scored)
        })
        .collect();

    let mut scores = Vec::new();
    let mut failed = Vec::new();
    for (name, r) in results {
        match r {
            Ok(s) => scores.extend(s),
            Err(e) => {
                log::error!("track {name} skipped: {e}");
                failed.push((name, e.to_string()));
            }
        }
    }
    let mut report = EvalReport::from_scores(&meta.source_names, scores, segment_seconds, mode);
    report.checkpoint_sha256 = Some(checkpoint_digest(&checkpoint.to_bytes()?));
    report.failed_tracks = failed;
    Ok(report)
}
