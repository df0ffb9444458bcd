//! Full-track separation by tiling the track with non-overlapping output
//! windows. Each output sample comes from exactly one window.

use super::AudioClip;
use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, ParameterSet};
use crate::tensor::Tensor;

const WINDOWS_PER_PASS: usize = 4;

/// Output-window starts covering `n` frames with windows of `len`: 0, len,
/// 2·len, ... and a final window aligned to the end of the track.
pub fn window_starts(n: usize, len: usize) -> Vec<usize> {
    if n <= len {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..).map(|k| k * len).take_while(|&s| s + len < n).collect();
    starts.push(n - len);
    starts
}

/// Separates a whole track into one clip per source, each exactly as long
/// as the input. The final window is shifted to end at the track end and
/// only contributes the frames no earlier window produced.
pub fn separate_track(
    params: &ParameterSet<f32>,
    config: &ModelConfig,
    model_rate: u32,
    mixture: &AudioClip,
) -> Result<Vec<AudioClip>> {
    if mixture.channels() != config.channels {
        return Err(Error::Usage(format!(
            "mixture has {} channel(s), model expects {}",
            mixture.channels(),
            config.channels
        )));
    }
    if mixture.sample_rate != model_rate {
        return Err(Error::Usage(format!(
            "mixture is at {} Hz, model runs at {model_rate} Hz",
            mixture.sample_rate
        )));
    }
    let n = mixture.len();
    let (lm, ls) = (config.input_frames, config.output_frames);
    let margin = ((lm - ls) / 2) as isize;
    let starts = window_starts(n, ls);
    let mut outputs = vec![AudioClip::silence(model_rate, config.channels, n); config.sources];

    let mut covered = 0usize;
    for chunk in starts.chunks(WINDOWS_PER_PASS) {
        let inputs: Vec<Tensor<f32>> = chunk
            .iter()
            .map(|&s| mixture.window_tensor(s as isize - margin, lm))
            .collect();
        let preds = forward(params, config, &Tensor::stack(&inputs)?)?;
        for (b, &start) in chunk.iter().enumerate() {
            let from = covered.max(start);
            let to = (start + ls).min(n);
            if from >= to {
                continue;
            }
            for (out, pred) in outputs.iter_mut().zip(&preds) {
                out.write_frames(from, pred.example(b), from - start, to - from);
            }
            covered = to;
        }
    }
    Ok(outputs)
}
