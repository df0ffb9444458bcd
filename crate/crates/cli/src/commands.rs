use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use waveunet::audio::{load_track, read_wav, resample, separate_track, write_wav, DatasetIndex, WavFormat};
use waveunet::eval::{evaluate_dataset, SdrMode};
use waveunet::model::{compute_valid_sizes, shape_trace, Checkpoint, ModelConfig, Upsampling};
use waveunet::training::{split_tracks, TrainConfig, TrainJob};
use waveunet::Error;

use crate::presets;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Size { .. } | Error::Shape { .. } | Error::Config(_) | Error::Usage(_) | Error::Json(_) => 2,
            Error::NonFinite(_) => 4,
            Error::Decode { .. }
            | Error::Dataset(_)
            | Error::Checkpoint(_)
            | Error::EmptyStats
            | Error::Io { .. } => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    epochs: usize,
    iterations: u64,
    best_val_mse: Option<f64>,
    aborted: Option<&'a str>,
    train_tracks: Vec<&'a str>,
    val_tracks: Vec<&'a str>,
}

pub fn train(config_path: &Path, out: &Path, resume: bool) -> Outcome {
    let cfg = TrainConfig::load(config_path).map_err(|e| match e {
        Error::Io { .. } => Failure::usage(e.to_string()),
        other => other.into(),
    })?;
    let dataset_dir = cfg
        .dataset_dir
        .as_ref()
        .ok_or_else(|| Failure::usage("training config has no dataset_dir"))?;
    // Relative dataset paths are taken relative to the config file.
    let dataset_dir: PathBuf = if dataset_dir.is_relative() {
        config_path.parent().unwrap_or(Path::new(".")).join(dataset_dir)
    } else {
        dataset_dir.clone()
    };
    let names = cfg.sources();
    let index = DatasetIndex::scan(&dataset_dir, &names).map_err(|e| Failure::data(e.to_string()))?;
    if index.tracks.is_empty() {
        return Err(Failure::data(format!("dataset {} contains no tracks", dataset_dir.display())));
    }
    let mut tracks = Vec::with_capacity(index.tracks.len());
    for entry in &index.tracks {
        let (pair, _) = load_track(entry, cfg.model.channels, cfg.sample_rate).map_err(|e| Failure::data(e.to_string()))?;
        tracks.push(pair);
    }
    let (train_set, mut val_set) = split_tracks(tracks, cfg.val_fraction, cfg.hyper.seed);
    if val_set.is_empty() {
        log::warn!("no validation tracks; validating on the training set");
        val_set = train_set.clone();
    }
    log::info!("{} training and {} validation track(s)", train_set.len(), val_set.len());

    create_dir(out)?;
    let job = TrainJob {
        config: cfg.model.clone(),
        hyper: cfg.hyper.clone(),
        sample_rate: cfg.sample_rate,
        source_names: names,
    };
    let last_path = out.join("last.ckpt");
    let best_path = out.join("best.ckpt");
    let log_path = out.join("train_log.csv");

    let (state, best) = if resume {
        let last = load_checkpoint(&last_path)?;
        let state = job.resume(&last)?;
        let best = if best_path.is_file() { Some(load_checkpoint(&best_path)?) } else { None };
        log::info!("resuming after epoch {}", state.epoch);
        (state, best)
    } else {
        write_file(&log_path, b"epoch,stage,train_mse,val_mse\n")?;
        (job.initial_state()?, None)
    };

    let outcome = job.run(&train_set, &val_set, state, best, |record, state, best| {
        let mut log = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| Error::io(format!("opening {}", log_path.display()), e))?;
        writeln!(log, "{},{},{},{}", record.epoch, record.stage, record.train_mse, record.val_mse)
            .map_err(|e| Error::io(format!("writing {}", log_path.display()), e))?;
        if let Some(best) = best {
            best.save(&best_path)?;
        }
        job.checkpoint(state).save(&last_path)
    })?;

    outcome.best.save(&best_path)?;
    let summary = TrainSummary {
        epochs: outcome.last.epoch,
        iterations: outcome.last.iterations,
        best_val_mse: outcome.last.best_val_loss.is_finite().then_some(outcome.last.best_val_loss),
        aborted: outcome.aborted.as_deref(),
        train_tracks: train_set.iter().map(|t| t.name.as_str()).collect(),
        val_tracks: val_set.iter().map(|t| t.name.as_str()).collect(),
    };
    write_file(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(Error::from)?.as_bytes(),
    )?;
    if let Some(reason) = &outcome.aborted {
        return Err(Failure {
            code: 4,
            message: format!("training aborted: {reason}; best.ckpt holds the last good state"),
        });
    }
    log::info!("best validation MSE {:?} written to {}", summary.best_val_mse, best_path.display());
    Ok(())
}

#[derive(Serialize)]
struct SeparationSummary {
    input: String,
    sample_rate: u32,
    frames: usize,
    outputs: Vec<String>,
}

pub fn separate(checkpoint: &Path, input: &Path, out: &Path, format: WavFormat) -> Outcome {
    let ckpt = load_checkpoint(checkpoint)?;
    let meta = &ckpt.meta;
    let clip = read_wav(input).map_err(|e| Failure::data(e.to_string()))?;
    if clip.channels() != meta.model.channels {
        return Err(Failure::usage(format!(
            "{} has {} channel(s), the model expects {}",
            input.display(),
            clip.channels(),
            meta.model.channels
        )));
    }
    let clip = resample(&clip, meta.sample_rate);
    if clip.is_empty() {
        return Err(Failure::data(format!("{} contains no audio", input.display())));
    }
    let estimates = separate_track(&ckpt.params, &meta.model, meta.sample_rate, &clip)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for (name, est) in meta.source_names.iter().zip(&estimates) {
        let file = format!("{name}.wav");
        write_wav(est, &out.join(&file), format)?;
        log::info!("wrote {}", out.join(&file).display());
        outputs.push(file);
    }
    let summary = SeparationSummary {
        input: input.display().to_string(),
        sample_rate: meta.sample_rate,
        frames: clip.len(),
        outputs,
    };
    write_file(
        &out.join("separation.json"),
        serde_json::to_string_pretty(&summary).map_err(Error::from)?.as_bytes(),
    )
}

pub fn evaluate(checkpoint: &Path, dataset: &Path, out: &Path, segment_seconds: f64, mode: SdrMode) -> Outcome {
    if !(segment_seconds > 0.0 && segment_seconds.is_finite()) {
        return Err(Failure::usage("--segment-seconds must be positive"));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let index = DatasetIndex::scan(dataset, &ckpt.meta.source_names).map_err(|e| match e {
        Error::Io { .. } => Failure::usage(e.to_string()),
        other => Failure::data(other.to_string()),
    })?;
    if index.tracks.is_empty() {
        return Err(Failure::usage(format!("dataset {} contains no tracks", dataset.display())));
    }
    let report = evaluate_dataset(&ckpt, &index, segment_seconds, mode)?;
    create_dir(out)?;
    write_file(&out.join("report.json"), report.to_json()?.as_bytes())?;
    write_file(&out.join("scores.csv"), report.to_csv().as_bytes())?;
    print!("{}", report.table());
    if !report.failed_tracks.is_empty() {
        return Err(Failure::data(format!(
            "{} of {} track(s) failed: {}",
            report.failed_tracks.len(),
            index.tracks.len(),
            report.failed_tracks.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(())
}

pub fn sizes(levels: usize, fd: usize, fu: usize, desired: usize, context: bool) -> Outcome {
    if desired == 0 {
        return Err(Failure::usage("--out must be at least 1"));
    }
    let cfg = ModelConfig {
        levels,
        extra_filters: 1,
        down_kernel: fd,
        up_kernel: fu,
        sources: 2,
        channels: 1,
        context,
        difference_output: false,
        upsampling: Upsampling::Linear,
        input_frames: 0,
        output_frames: 0,
        leaky_slope: 0.2,
    };
    cfg.validate_structure()?;
    let (lm, ls) = compute_valid_sizes(&cfg, desired)?;
    println!("{lm} {ls}");
    Ok(())
}

fn model_from_json(text: &str, origin: &str) -> Result<ModelConfig, Failure> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Failure::usage(format!("{origin}: {e}")))?;
    let model = match value.get("model") {
        Some(m) => m.clone(),
        None => value,
    };
    let cfg: ModelConfig = serde_json::from_value(model).map_err(|e| Failure::usage(format!("{origin}: {e}")))?;
    cfg.validate_structure()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    block: &'a str,
    frames: usize,
    channels: usize,
}

pub fn trace(preset: Option<&str>, config: Option<&Path>, json: bool) -> Outcome {
    let cfg = match (preset, config) {
        (Some(name), _) => {
            let text = presets::get(name).ok_or_else(|| {
                Failure::usage(format!("unknown preset {name:?}; available: {}", presets::NAMES.join(", ")))
            })?;
            model_from_json(text, name)?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            model_from_json(&text, &path.display().to_string())?
        }
        (None, None) => return Err(Failure::usage("pass --preset or --config")),
    };
    let rows = shape_trace(&cfg)?;
    if json {
        let rows: Vec<TraceRow> = rows
            .iter()
            .map(|b| TraceRow { block: &b.block, frames: b.frames, channels: b.channels })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).map_err(Error::from)?);
    } else {
        println!("{:<16} {:>8} {:>8}", "block", "frames", "channels");
        for b in &rows {
            println!("{:<16} {:>8} {:>8}", b.block, b.frames, b.channels);
        }
    }
    Ok(())
}
