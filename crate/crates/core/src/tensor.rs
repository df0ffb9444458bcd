//! Rank-3 tensors and the parameter containers built from them.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use crate::error::{Error, Result};

/// Scalar type the engine computes in. Training and inference run in `f32`;
/// gradient checks run the same code in `f64`.
pub trait Real: Float + Sum + Default + Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub frames: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(batch: usize, frames: usize, channels: usize) -> Self {
        Shape {
            batch,
            frames,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.batch * self.frames * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.batch, self.frames, self.channels)
    }
}

/// Batch × frames × channels array, channels innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
    pub requires_grad: bool,
    pub grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.batch == 0 || shape.frames == 0 || shape.channels == 0 {
            return Err(Error::shape("tensor", format!("zero dimension in {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::shape(
                "tensor",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
            requires_grad: false,
            grad: None,
        }
    }

    /// Single-example tensor from a frames × channels slice.
    pub fn from_frames(frames: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        Self::new(Shape::new(1, frames, channels), data)
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: Shape::new(1, 1, 1),
            data: vec![v],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.batch
    }

    pub fn frames(&self) -> usize {
        self.shape.frames
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, t: usize, c: usize) -> T {
        self.data[(b * self.shape.frames + t) * self.shape.channels + c]
    }

    /// Frames × channels block of one batch element.
    pub fn example(&self, b: usize) -> &[T] {
        let n = self.shape.frames * self.shape.channels;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| U::from_f64(v.as_f64())).collect()),
        }
    }

    /// Stack single-or-multi example tensors of equal frames/channels along batch.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("stack", "no tensors"))?;
        let (frames, channels) = (first.frames(), first.channels());
        let mut data = Vec::new();
        let mut batch = 0;
        for p in parts {
            if p.frames() != frames || p.channels() != channels {
                return Err(Error::shape(
                    "stack",
                    format!("{} vs {}", p.shape(), first.shape()),
                ));
            }
            batch += p.batch();
            data.extend_from_slice(&p.data);
        }
        Tensor::new(Shape::new(batch, frames, channels), data)
    }
}

/// Filter bank of a 1-D convolution: `filters` is laid out
/// filter_size × in_channels × out_channels (stored in a [`Tensor`] whose
/// batch axis is the tap index).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub filters: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn new(
        filter_size: usize,
        in_channels: usize,
        out_channels: usize,
        filters: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let filters = Tensor::new(Shape::new(filter_size, in_channels, out_channels), filters)?;
        if bias.len() != out_channels {
            return Err(Error::shape(
                "conv params",
                format!("{} biases for {out_channels} output channels", bias.len()),
            ));
        }
        Ok(ConvParams { filters, bias })
    }

    pub fn filter_size(&self) -> usize {
        self.filters.shape().batch
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape().frames
    }

    pub fn out_channels(&self) -> usize {
        self.filters.shape().channels
    }
}

/// Unconstrained per-channel weights of the learned interpolation layer.
/// The layer mixes neighbours with `sigmoid(w)`, which always lies in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct UpsampleWeights<T> {
    pub w: Vec<T>,
}

impl<T: Real> UpsampleWeights<T> {
    pub fn zeros(channels: usize) -> Self {
        UpsampleWeights {
            w: vec![T::zero(); channels],
        }
    }

    pub fn mix(&self) -> Vec<T> {
        self.w.iter().map(|&w| crate::ops::sigmoid(w)).collect()
    }
}
