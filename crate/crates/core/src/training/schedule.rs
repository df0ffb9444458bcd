//! Two-stage training: Adam until validation loss stops improving for
//! `patience` epochs, then fine-tuning from the last state with a doubled
//! batch and a lower learning rate under the same rule. The best checkpoint
//! over both stages wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamHyper};
use super::data::{augment, excerpt_at, sample_excerpt, Excerpt, TrackPair};
use crate::audio::window_starts;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::model::{
    build, forward, forward_graph, AdamMoments, Checkpoint, CheckpointMeta, ModelConfig, ParamArray,
    ParamVars, ParameterSet,
};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    FineTune,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Initial => "initial",
            Stage::FineTune => "fine_tune",
        })
    }
}

fn d_lr() -> f64 {
    1e-4
}
fn d_lr_ft() -> f64 {
    1e-5
}
fn d_batch() -> usize {
    16
}
fn d_patience() -> usize {
    20
}
fn d_ipe() -> usize {
    2000
}
fn d_true() -> bool {
    true
}

/// Optimisation schedule. Defaults are the full-scale settings; desk-scale
/// runs shrink epochs and patience.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_lr_ft")]
    pub lr_finetune: f64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    /// Fine-tuning batch size; twice `batch` when unset.
    #[serde(default)]
    pub batch_finetune: Option<usize>,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_ipe")]
    pub iterations_per_epoch: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_true")]
    pub fine_tune: bool,
    /// Carry Adam moments into fine-tuning instead of restarting them.
    #[serde(default = "d_true")]
    pub resume_moments: bool,
    #[serde(default)]
    pub max_epochs_per_stage: Option<usize>,
    #[serde(default)]
    pub adam: AdamHyper,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: d_lr(),
            lr_finetune: d_lr_ft(),
            batch: d_batch(),
            batch_finetune: None,
            patience: d_patience(),
            iterations_per_epoch: d_ipe(),
            seed: 0,
            fine_tune: true,
            resume_moments: true,
            max_epochs_per_stage: None,
            adam: AdamHyper::default(),
        }
    }
}

impl TrainHyper {
    pub fn stage_settings(&self, stage: Stage) -> (f64, usize) {
        match stage {
            Stage::Initial => (self.lr, self.batch),
            Stage::FineTune => (self.lr_finetune, self.batch_finetune.unwrap_or(2 * self.batch)),
        }
    }
}

/// Serializable bookkeeping stored in checkpoint metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainProgress {
    pub stage: Stage,
    pub epoch: usize,
    pub stage_epoch: usize,
    pub iterations: u64,
    /// `None` until the first validation pass.
    pub best_val_loss: Option<f64>,
    pub epochs_since_improvement: usize,
    pub rng_seed: u64,
    /// ChaCha word position, decimal (does not fit a JSON number).
    pub rng_word_pos: String,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ParameterSet<f32>,
    pub moments: AdamMoments,
    pub stage: Stage,
    pub epoch: usize,
    pub stage_epoch: usize,
    pub iterations: u64,
    pub best_val_loss: f64,
    pub epochs_since_improvement: usize,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

impl TrainState {
    pub fn progress(&self) -> TrainProgress {
        TrainProgress {
            stage: self.stage,
            epoch: self.epoch,
            stage_epoch: self.stage_epoch,
            iterations: self.iterations,
            best_val_loss: self.best_val_loss.is_finite().then_some(self.best_val_loss),
            epochs_since_improvement: self.epochs_since_improvement,
            rng_seed: self.rng_seed,
            rng_word_pos: self.rng.get_word_pos().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub train_mse: f64,
    pub val_mse: f64,
    pub best_val_mse: f64,
    pub improved: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: TrainState,
    pub history: Vec<EpochRecord>,
    /// Set when training stopped on a non-finite loss or gradient; `best`
    /// is then the last good checkpoint.
    pub aborted: Option<String>,
}

/// Everything fixed for one training run.
#[derive(Clone, Debug)]
pub struct TrainJob {
    pub config: ModelConfig,
    pub hyper: TrainHyper,
    pub sample_rate: u32,
    pub source_names: Vec<String>,
}

fn zero_moments(params: &ParameterSet<f32>) -> AdamMoments {
    AdamMoments {
        step: 0,
        m: params.zeros_like(),
        v: params.zeros_like(),
    }
}

impl TrainJob {
    pub fn initial_state(&self) -> Result<TrainState> {
        let params = build(&self.config, self.hyper.seed)?;
        let moments = zero_moments(&params);
        let rng_seed = self.hyper.seed.wrapping_add(0x5eed);
        Ok(TrainState {
            params,
            moments,
            stage: Stage::Initial,
            epoch: 0,
            stage_epoch: 0,
            iterations: 0,
            best_val_loss: f64::INFINITY,
            epochs_since_improvement: 0,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    pub fn checkpoint(&self, state: &TrainState) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                model: self.config.clone(),
                sample_rate: self.sample_rate,
                source_names: self.source_names.clone(),
                training: Some(state.progress()),
            },
            params: state.params.clone(),
            optimizer: Some(state.moments.clone()),
        }
    }

    /// Restores the state saved by [`TrainJob::checkpoint`].
    pub fn resume(&self, ckpt: &Checkpoint) -> Result<TrainState> {
        if ckpt.meta.model != self.config {
            return Err(Error::Checkpoint("checkpoint was trained with a different model config".into()));
        }
        let progress = ckpt
            .meta
            .training
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("checkpoint carries no training progress".into()))?;
        let word_pos: u128 = progress
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Checkpoint("bad rng_word_pos".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(progress.rng_seed);
        rng.set_word_pos(word_pos);
        Ok(TrainState {
            params: ckpt.params.clone(),
            moments: ckpt.optimizer.clone().unwrap_or_else(|| zero_moments(&ckpt.params)),
            stage: progress.stage,
            epoch: progress.epoch,
            stage_epoch: progress.stage_epoch,
            iterations: progress.iterations,
            best_val_loss: progress.best_val_loss.unwrap_or(f64::INFINITY),
            epochs_since_improvement: progress.epochs_since_improvement,
            rng_seed: progress.rng_seed,
            rng,
        })
    }

    /// Runs the schedule from `state` to completion. `best` is the best
    /// checkpoint so far when resuming. `on_epoch` sees every epoch record,
    /// the state after it, and the new best checkpoint when it improved.
    pub fn run(
        &self,
        train_set: &[TrackPair],
        val_set: &[TrackPair],
        mut state: TrainState,
        mut best: Option<Checkpoint>,
        mut on_epoch: impl FnMut(&EpochRecord, &TrainState, Option<&Checkpoint>) -> Result<()>,
    ) -> Result<TrainOutcome> {
        if train_set.is_empty() || val_set.is_empty() {
            return Err(Error::Dataset("training and validation sets must be non-empty".into()));
        }
        self.config.validate()?;
        let mut history = Vec::new();
        let mut aborted = None;

        'stages: loop {
            let (lr, batch) = self.hyper.stage_settings(state.stage);
            loop {
                let exhausted = state.stage_epoch > 0 && state.epochs_since_improvement >= self.hyper.patience;
                let capped = self
                    .hyper
                    .max_epochs_per_stage
                    .is_some_and(|m| state.stage_epoch >= m);
                if exhausted || capped {
                    break;
                }
                let mut sum = 0.0;
                for _ in 0..self.hyper.iterations_per_epoch {
                    let examples = draw_batch(train_set, &self.config, batch, &mut state.rng);
                    match train_step(&mut state.params, &mut state.moments, &self.config, &examples, lr, self.hyper.adam) {
                        Ok(loss) => sum += loss,
                        Err(Error::NonFinite(what)) => {
                            aborted = Some(format!("non-finite {what} at iteration {}", state.iterations));
                            break 'stages;
                        }
                        Err(e) => return Err(e),
                    }
                    state.iterations += 1;
                }
                let train_mse = sum / self.hyper.iterations_per_epoch.max(1) as f64;
                let val_mse = validation_loss(&state.params, &self.config, val_set, batch)?;
                if !val_mse.is_finite() {
                    aborted = Some(format!("non-finite validation loss after epoch {}", state.epoch + 1));
                    break 'stages;
                }
                state.epoch += 1;
                state.stage_epoch += 1;
                let improved = val_mse < state.best_val_loss;
                if improved {
                    state.best_val_loss = val_mse;
                    state.epochs_since_improvement = 0;
                    best = Some(self.checkpoint(&state));
                } else {
                    state.epochs_since_improvement += 1;
                }
                let record = EpochRecord {
                    epoch: state.epoch,
                    stage: state.stage,
                    train_mse,
                    val_mse,
                    best_val_mse: state.best_val_loss,
                    improved,
                };
                log::info!(
                    "epoch {} ({}) train_mse {:.6e} val_mse {:.6e}{}",
                    record.epoch,
                    record.stage,
                    train_mse,
                    val_mse,
                    if improved { " *" } else { "" }
                );
                on_epoch(&record, &state, if improved { best.as_ref() } else { None })?;
                history.push(record);
            }
            if state.stage == Stage::Initial && self.hyper.fine_tune {
                state.stage = Stage::FineTune;
                state.stage_epoch = 0;
                state.epochs_since_improvement = 0;
                if !self.hyper.resume_moments {
                    state.moments = zero_moments(&state.params);
                }
            } else {
                break;
            }
        }

        let best = match best {
            Some(b) => b,
            None => self.checkpoint(&state),
        };
        Ok(TrainOutcome {
            best,
            last: state,
            history,
            aborted,
        })
    }
}

/// Runs a full schedule from fresh parameters. Source names default to
/// `source0`, `source1`, ...
pub fn train(
    train_set: &[TrackPair],
    val_set: &[TrackPair],
    config: &ModelConfig,
    hyper: &TrainHyper,
) -> Result<TrainOutcome> {
    let sample_rate = train_set
        .first()
        .map(|t| t.sample_rate())
        .ok_or_else(|| Error::Dataset("empty training set".into()))?;
    let job = TrainJob {
        config: config.clone(),
        hyper: hyper.clone(),
        sample_rate,
        source_names: (0..config.sources).map(|k| format!("source{k}")).collect(),
    };
    let state = job.initial_state()?;
    job.run(train_set, val_set, state, None, |_, _, _| Ok(()))
}

fn draw_batch<R: Rng>(tracks: &[TrackPair], config: &ModelConfig, batch: usize, rng: &mut R) -> Vec<Excerpt> {
    (0..batch)
        .map(|_| {
            let track = &tracks[rng.gen_range(0..tracks.len())];
            let augmented = augment(track, rng);
            sample_excerpt(&augmented, config, rng)
        })
        .collect()
}

fn stack_sources(batch: &[Excerpt], k: usize) -> Result<Tensor<f32>> {
    let parts: Vec<Tensor<f32>> = batch.iter().map(|e| e.sources[k].clone()).collect();
    Tensor::stack(&parts)
}

/// One optimisation step on a batch; returns the batch MSE before the update.
pub fn train_step(
    params: &mut ParameterSet<f32>,
    moments: &mut AdamMoments,
    config: &ModelConfig,
    batch: &[Excerpt],
    lr: f64,
    adam: AdamHyper,
) -> Result<f64> {
    let tape = Tape::new();
    let vars = ParamVars::register(&tape, params);
    let mixture = Tensor::stack(&batch.iter().map(|e| e.mixture.clone()).collect::<Vec<_>>())?;
    let mixture = tape.constant(mixture);
    let outputs = forward_graph(&tape, config, params, &vars, mixture)?;

    let mut pred = outputs[0];
    let mut target = tape.constant(stack_sources(batch, 0)?);
    for (k, &out) in outputs.iter().enumerate().skip(1) {
        pred = tape.concat_channels(pred, out)?;
        target = tape.concat_channels(target, tape.constant(stack_sources(batch, k)?))?;
    }
    let loss_var = tape.mse(pred, target)?;
    let loss = tape.scalar(loss_var)? as f64;
    let grads = tape.backward(loss_var)?;

    let mut grad_set = ParameterSet::new();
    for ((name, array), &v) in params.iter().zip(vars.vars()) {
        let data = grads
            .get(v)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; array.data.len()]);
        grad_set.insert(
            name,
            ParamArray {
                dims: array.dims.clone(),
                data,
            },
        );
    }
    adam_step(params, moments, &grad_set, lr, adam)?;
    Ok(loss)
}

/// Per-track validation MSE: each track is covered by consecutive output
/// windows, the last one aligned to the track end, and the window losses
/// are averaged.
pub fn validation_losses(
    params: &ParameterSet<f32>,
    config: &ModelConfig,
    val_set: &[TrackPair],
    batch: usize,
) -> Result<Vec<f64>> {
    let batch = batch.max(1);
    val_set
        .iter()
        .map(|track| {
            let starts = window_starts(track.len(), config.output_frames);
            let mut total = 0.0;
            for chunk in starts.chunks(batch) {
                let examples: Vec<Excerpt> = chunk.iter().map(|&s| excerpt_at(track, config, s)).collect();
                let mixture = Tensor::stack(&examples.iter().map(|e| e.mixture.clone()).collect::<Vec<_>>())?;
                let outputs = forward(params, config, &mixture)?;
                let per_window = config.output_frames * config.channels;
                for (b, example) in examples.iter().enumerate() {
                    let mut sq = 0.0f64;
                    for (out, target) in outputs.iter().zip(&example.sources) {
                        let pred = &out.data()[b * per_window..(b + 1) * per_window];
                        sq += pred
                            .iter()
                            .zip(target.data())
                            .map(|(&p, &t)| ((p - t) as f64).powi(2))
                            .sum::<f64>();
                    }
                    total += sq / (per_window * config.sources) as f64;
                }
            }
            Ok(total / starts.len() as f64)
        })
        .collect()
}

/// Mean of [`validation_losses`] over tracks.
pub fn validation_loss(
    params: &ParameterSet<f32>,
    config: &ModelConfig,
    val_set: &[TrackPair],
    batch: usize,
) -> Result<f64> {
    if val_set.is_empty() {
        return Err(Error::Dataset("empty validation set".into()));
    }
    let losses = validation_losses(params, config, val_set, batch)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
