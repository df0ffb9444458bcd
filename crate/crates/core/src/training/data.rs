use rand::seq::SliceRandom;
use rand::Rng;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;

/// Aligned source stems and the mixture derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackPair {
    pub name: String,
    sources: Vec<AudioClip>,
    mixture: AudioClip,
}

impl TrackPair {
    /// The mixture is always the sample-wise sum of the sources.
    pub fn new(name: impl Into<String>, sources: Vec<AudioClip>) -> Result<Self> {
        let mixture = AudioClip::sum(&sources)
            .map_err(|_| Error::Dataset("sources differ in rate, channels or length".into()))?;
        Ok(TrackPair {
            name: name.into(),
            sources,
            mixture,
        })
    }

    pub fn sources(&self) -> &[AudioClip] {
        &self.sources
    }

    pub fn mixture(&self) -> &AudioClip {
        &self.mixture
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixture.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.mixture.channels()
    }
}

/// One training example: `(1, L_m, C)` mixture and `(1, L_s, C)` per source.
#[derive(Clone, Debug)]
pub struct Excerpt {
    pub output_start: usize,
    pub mixture: Tensor<f32>,
    pub sources: Vec<Tensor<f32>>,
}

/// Picks an output window uniformly among all starts that keep it inside the
/// track and cuts the surrounding context from the mixture. Context that
/// falls outside the track is zero.
pub fn sample_excerpt<R: Rng + ?Sized>(pair: &TrackPair, config: &ModelConfig, rng: &mut R) -> Excerpt {
    let last = pair.len().saturating_sub(config.output_frames);
    let start = rng.gen_range(0..=last);
    excerpt_at(pair, config, start)
}

pub(crate) fn excerpt_at(pair: &TrackPair, config: &ModelConfig, start: usize) -> Excerpt {
    let margin = (config.input_frames - config.output_frames) / 2;
    let mix_start = start as isize - margin as isize;
    Excerpt {
        output_start: start,
        mixture: pair.mixture.window_tensor(mix_start, config.input_frames),
        sources: pair
            .sources
            .iter()
            .map(|s| s.window_tensor(start as isize, config.output_frames))
            .collect(),
    }
}

/// Scales each source by an independent draw from `[0.7, 1.0]` and
/// re-derives the mixture.
pub fn augment<R: Rng + ?Sized>(pair: &TrackPair, rng: &mut R) -> TrackPair {
    let factors: Vec<f32> = pair.sources.iter().map(|_| rng.gen_range(0.7f32..=1.0)).collect();
    augment_with_factors(pair, &factors)
}

pub fn augment_with_factors(pair: &TrackPair, factors: &[f32]) -> TrackPair {
    let sources = pair
        .sources
        .iter()
        .zip(factors)
        .map(|(s, &f)| s.scaled(f))
        .collect();
    TrackPair::new(pair.name.clone(), sources).expect("scaling keeps shapes")
}

/// Deterministic seeded shuffle, then the first `1 - val_fraction` of the
/// tracks train and the rest validate. Both sides get at least one track
/// when there are two or more.
pub fn split_tracks<T>(mut tracks: Vec<T>, val_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    tracks.shuffle(&mut rng);
    let n = tracks.len();
    let mut n_val = (n as f64 * val_fraction).round() as usize;
    if n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    }
    let val = tracks.split_off(n - n_val.min(n));
    (tracks, val)
}
