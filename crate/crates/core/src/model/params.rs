use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Upsampling};
use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Real, Shape, Tensor, UpsampleWeights};

/// One named parameter array with its logical dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamArray<T> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> ParamArray<T> {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        ParamArray {
            dims,
            data: vec![T::zero(); n],
        }
    }

    /// Rank-3 view used by the tape. Filters keep their (taps, in, out)
    /// layout; vectors become (1, 1, n).
    pub fn to_tensor(&self) -> Tensor<T> {
        let shape = match self.dims.as_slice() {
            [f, i, o] => Shape::new(*f, *i, *o),
            [n] => Shape::new(1, 1, *n),
            _ => unreachable!("parameters are rank 1 or 3"),
        };
        Tensor::new(shape, self.data.clone()).expect("dims match data")
    }
}

/// Ordered, named parameters of one network. Names are stable across runs:
/// `ds{i}.weight`, `bottleneck.bias`, `us{i}.interp`, `head{k}.weight`, ...
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet<T> {
    entries: IndexMap<String, ParamArray<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, array: ParamArray<T>) {
        self.entries.insert(name.into(), array);
    }

    pub fn get(&self, name: &str) -> Option<&ParamArray<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamArray<T>> {
        self.entries.get_mut(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamArray<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamArray<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.values().map(|a| a.data.len()).sum()
    }

    /// Same names and dims, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), ParamArray::zeros(v.dims.clone())))
                .collect(),
        }
    }

    pub fn same_layout<U>(&self, other: &ParameterSet<U>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, x), (b, y))| a == b && x.dims == y.dims)
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        ParamArray {
                            dims: v.dims.clone(),
                            data: v.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn conv(&self, layer: &str) -> Result<ConvParams<T>> {
        let w = self.require(&format!("{layer}.weight"))?;
        let b = self.require(&format!("{layer}.bias"))?;
        let [f, i, o] = w.dims[..] else {
            return Err(Error::Checkpoint(format!("{layer}.weight is not rank 3")));
        };
        ConvParams::new(f, i, o, w.data.clone(), b.data.clone())
    }

    pub fn upsample(&self, layer: &str) -> Result<UpsampleWeights<T>> {
        Ok(UpsampleWeights {
            w: self.require(&format!("{layer}.interp"))?.data.clone(),
        })
    }

    fn require(&self, name: &str) -> Result<&ParamArray<T>> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }
}

impl<T: Real> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) enum LayerKind {
    Conv { taps: usize, inputs: usize, outputs: usize },
    Interp { channels: usize },
}

/// Layers in recording order with their parameter shapes.
pub(crate) fn layer_layout(config: &ModelConfig) -> Vec<(String, LayerKind)> {
    let (l, fc, c) = (config.levels, config.extra_filters, config.channels);
    let mut layers = Vec::new();
    let conv = |taps, inputs, outputs| LayerKind::Conv { taps, inputs, outputs };
    for i in 1..=l {
        let inputs = if i == 1 { c } else { fc * (i - 1) };
        layers.push((format!("ds{i}"), conv(config.down_kernel, inputs, fc * i)));
    }
    layers.push(("bottleneck".into(), conv(config.down_kernel, fc * l, fc * (l + 1))));
    for i in (1..=l).rev() {
        if config.upsampling == Upsampling::Learned {
            layers.push((format!("us{i}"), LayerKind::Interp { channels: fc * (i + 1) }));
        }
        layers.push((format!("us{i}"), conv(config.up_kernel, fc * (i + 1) + fc * i, fc * i)));
    }
    for k in 0..config.heads() {
        layers.push((format!("head{k}"), conv(1, fc + c, c)));
    }
    layers
}

pub(crate) fn layout_matches<T: Real>(config: &ModelConfig, params: &ParameterSet<T>) -> bool {
    let mut expected = Vec::new();
    for (name, kind) in layer_layout(config) {
        match kind {
            LayerKind::Conv { taps, inputs, outputs } => {
                expected.push((format!("{name}.weight"), vec![taps, inputs, outputs]));
                expected.push((format!("{name}.bias"), vec![outputs]));
            }
            LayerKind::Interp { channels } => expected.push((format!("{name}.interp"), vec![channels])),
        }
    }
    expected.len() == params.len()
        && expected
            .iter()
            .zip(params.iter())
            .all(|((en, ed), (n, a))| en == n && ed == &a.dims)
}

/// Fresh parameters: filters uniform on `[-b, b]` with
/// `b = sqrt(6 / (fan_in + fan_out))` (fans over taps × channels), zero
/// biases, and zero interpolation weights so learned upsampling starts out
/// as linear interpolation.
pub fn build(config: &ModelConfig, seed: u64) -> Result<ParameterSet<f32>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::new();
    for (name, kind) in layer_layout(config) {
        match kind {
            LayerKind::Conv { taps, inputs, outputs } => {
                let bound = (6.0 / ((taps * inputs + taps * outputs) as f64)).sqrt();
                let data = (0..taps * inputs * outputs)
                    .map(|_| rng.gen_range(-bound..bound) as f32)
                    .collect();
                params.insert(
                    format!("{name}.weight"),
                    ParamArray {
                        dims: vec![taps, inputs, outputs],
                        data,
                    },
                );
                params.insert(format!("{name}.bias"), ParamArray::zeros(vec![outputs]));
            }
            LayerKind::Interp { channels } => {
                params.insert(format!("{name}.interp"), ParamArray::zeros(vec![channels]));
            }
        }
    }
    Ok(params)
}
