use super::{ModelConfig, ParameterSet, Upsampling};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::ops::Activation;
use crate::tensor::{Real, Tensor};

/// Tape handles for every parameter, in [`ParameterSet`] order.
pub struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    /// Records all parameters as gradient-carrying leaves.
    pub fn register<T: Real>(tape: &Tape<T>, params: &ParameterSet<T>) -> Self {
        Self::record(tape, params, true)
    }

    /// Records all parameters as constants (inference).
    pub fn constants<T: Real>(tape: &Tape<T>, params: &ParameterSet<T>) -> Self {
        Self::record(tape, params, false)
    }

    fn record<T: Real>(tape: &Tape<T>, params: &ParameterSet<T>, grad: bool) -> Self {
        let vars = params
            .iter()
            .map(|(_, a)| {
                let t = a.to_tensor();
                if grad {
                    tape.param(t)
                } else {
                    tape.constant(t)
                }
            })
            .collect();
        ParamVars { vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Re-labels size errors from generic kernels with the layer name.
fn at<T>(layer: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Size { reason, .. } => Error::Size {
            block: layer.to_string(),
            reason,
        },
        other => other,
    })
}

/// Records the network on `tape` and returns one `(batch, L_s, C)` variable
/// per source.
pub fn forward_graph<T: Real>(
    tape: &Tape<T>,
    config: &ModelConfig,
    params: &ParameterSet<T>,
    vars: &ParamVars,
    mixture: Var,
) -> Result<Vec<Var>> {
    let shape = tape.shape(mixture)?;
    if shape.frames != config.input_frames || shape.channels != config.channels {
        return Err(Error::shape(
            "forward",
            format!(
                "mixture is {shape}, model expects (*, {}, {})",
                config.input_frames, config.channels
            ),
        ));
    }
    let p = |name: String| -> Result<Var> {
        params
            .index_of(&name)
            .map(|i| vars.vars[i])
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    };
    let padding = config.padding();
    let leaky = Activation::LeakyRelu(config.leaky_slope);
    let conv = |layer: &str, x: Var, act: Activation| -> Result<Var> {
        let y = at(
            layer,
            tape.conv1d(x, p(format!("{layer}.weight"))?, p(format!("{layer}.bias"))?, padding),
        )?;
        tape.activation(y, act)
    };

    let mut x = mixture;
    let mut skips = Vec::with_capacity(config.levels);
    for i in 1..=config.levels {
        x = conv(&format!("ds{i}"), x, leaky)?;
        skips.push(x);
        x = at(&format!("ds{i}.decimate"), tape.decimate(x, config.context))?;
    }
    x = conv("bottleneck", x, leaky)?;
    for i in (1..=config.levels).rev() {
        let skip = skips[i - 1];
        let layer = format!("us{i}");
        x = at(
            &format!("{layer}.upsample"),
            match (config.context, config.upsampling) {
                (true, Upsampling::Linear) => tape.upsample_linear(x),
                (true, Upsampling::Learned) => tape.upsample_learned(x, p(format!("{layer}.interp"))?),
                (false, _) => {
                    let target = tape.shape(skip)?.frames;
                    tape.resize_linear(x, target)
                }
            },
        )?;
        x = at(&format!("{layer}.concat"), tape.concat_crop(x, skip))?;
        x = conv(&layer, x, leaky)?;
    }
    x = at("concat_input", tape.concat_crop(x, mixture))?;

    let mut outputs = Vec::with_capacity(config.sources);
    for k in 0..config.heads() {
        outputs.push(conv(&format!("head{k}"), x, Activation::Tanh)?);
    }
    if config.difference_output {
        let frames = tape.shape(outputs[0])?.frames;
        let mut rest = at("difference", tape.crop_center(mixture, frames))?;
        for &o in &outputs {
            rest = tape.sub(rest, o)?;
        }
        outputs.push(rest);
    }
    Ok(outputs)
}

/// Inference convenience: one `(batch, L_s, C)` tensor per source.
pub fn forward<T: Real>(
    params: &ParameterSet<T>,
    config: &ModelConfig,
    mixture: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let tape = Tape::new();
    let vars = ParamVars::constants(&tape, params);
    let m = tape.constant(mixture.clone());
    let outs = forward_graph(&tape, config, params, &vars, m)?;
    outs.into_iter()
        .map(|v| Ok(tape.value(v)?.clone()))
        .collect()
}
