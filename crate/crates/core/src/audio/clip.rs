use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Multi-channel audio with per-channel sample vectors of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    samples: Vec<Vec<f32>>,
}

impl AudioClip {
    pub fn new(sample_rate: u32, samples: Vec<Vec<f32>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::shape("audio clip", "no channels"));
        };
        if samples.iter().any(|c| c.len() != first.len()) {
            return Err(Error::shape("audio clip", "channels differ in length"));
        }
        if sample_rate == 0 {
            return Err(Error::shape("audio clip", "sample rate is zero"));
        }
        Ok(AudioClip {
            sample_rate,
            samples,
        })
    }

    pub fn silence(sample_rate: u32, channels: usize, len: usize) -> Self {
        AudioClip {
            sample_rate,
            samples: vec![vec![0.0; len]; channels.max(1)],
        }
    }

    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.samples[c]
    }

    pub fn channels_iter(&self) -> impl Iterator<Item = &[f32]> {
        self.samples.iter().map(|c| c.as_slice())
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.samples
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Frame-interleaved copy of `len` frames starting at `start`, with zeros
    /// wherever the window leaves the clip.
    pub fn window(&self, start: isize, len: usize) -> Vec<f32> {
        let c = self.channels();
        let n = self.len() as isize;
        let mut out = vec![0.0; len * c];
        let lo = start.max(0);
        let hi = (start + len as isize).min(n);
        for t in lo..hi {
            let dst = (t - start) as usize * c;
            for (ch, samples) in self.samples.iter().enumerate() {
                out[dst + ch] = samples[t as usize];
            }
        }
        out
    }

    pub fn window_tensor<T: Real>(&self, start: isize, len: usize) -> Tensor<T> {
        let data = self.window(start, len).into_iter().map(|v| T::from_f64(v as f64)).collect();
        Tensor::from_frames(len, self.channels(), data).expect("window dims")
    }

    /// Single-channel mean of all channels.
    pub fn to_mono(&self) -> AudioClip {
        if self.channels() == 1 {
            return self.clone();
        }
        let scale = 1.0 / self.channels() as f32;
        let mixed = (0..self.len())
            .map(|t| self.samples.iter().map(|c| c[t]).sum::<f32>() * scale)
            .collect();
        AudioClip {
            sample_rate: self.sample_rate,
            samples: vec![mixed],
        }
    }

    /// Sample-wise sum of equally shaped clips.
    pub fn sum(clips: &[AudioClip]) -> Result<AudioClip> {
        let first = clips
            .first()
            .ok_or_else(|| Error::shape("audio sum", "no clips"))?;
        let mut acc = first.samples.clone();
        for clip in &clips[1..] {
            if clip.sample_rate != first.sample_rate
                || clip.channels() != first.channels()
                || clip.len() != first.len()
            {
                return Err(Error::shape("audio sum", "clips differ in rate, channels or length"));
            }
            for (a, b) in acc.iter_mut().zip(&clip.samples) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
        AudioClip::new(first.sample_rate, acc)
    }

    pub fn scaled(&self, factor: f32) -> AudioClip {
        AudioClip {
            sample_rate: self.sample_rate,
            samples: self
                .samples
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// Copies frames `[start, start + len)` of `src` (frame-interleaved) into
    /// this clip at `dst`.
    pub(crate) fn write_frames(&mut self, dst: usize, src: &[f32], start: usize, len: usize) {
        let c = self.channels();
        for t in 0..len {
            for ch in 0..c {
                self.samples[ch][dst + t] = src[(start + t) * c + ch];
            }
        }
    }

    pub fn duplicate_channels(&self, channels: usize) -> AudioClip {
        AudioClip {
            sample_rate: self.sample_rate,
            samples: (0..channels).map(|i| self.samples[i % self.channels()].clone()).collect(),
        }
    }
}
