//! Frame/channel algebra of the network.
//!
//! With context, every convolution is valid (`n -> n - f + 1`), decimation
//! needs odd counts (`n -> (n + 1) / 2`) and upsampling gives `n -> 2n - 1`.
//! Without context, convolutions keep `n` and upsampling returns to the size
//! of the matching skip connection.

use serde::Serialize;

use super::ModelConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockShape {
    pub block: String,
    pub frames: usize,
    pub channels: usize,
}

impl BlockShape {
    fn new(block: impl Into<String>, frames: usize, channels: usize) -> Self {
        BlockShape {
            block: block.into(),
            frames,
            channels,
        }
    }
}

/// Block-by-block shapes for the configured input size.
pub fn shape_trace(config: &ModelConfig) -> Result<Vec<BlockShape>> {
    config.validate_structure()?;
    trace_from(config, config.input_frames)
}

/// Block-by-block shapes for an arbitrary input frame count. Fails with a
/// size error naming the first block whose input is too small or breaks the
/// odd-size chain.
pub fn trace_from(config: &ModelConfig, input_frames: usize) -> Result<Vec<BlockShape>> {
    let (l, fc) = (config.levels, config.extra_filters);
    let context = config.context;
    let conv = |name: &str, n: usize, f: usize| -> Result<usize> {
        if !context {
            return Ok(n);
        }
        if n < f {
            return Err(Error::size(name, format!("{n} frames < filter size {f}")));
        }
        Ok(n - f + 1)
    };

    if input_frames == 0 {
        return Err(Error::size("input", "zero frames"));
    }
    let mut out = vec![BlockShape::new("input", input_frames, config.channels)];
    let mut n = input_frames;
    let mut skips = Vec::with_capacity(l);
    for i in 1..=l {
        let name = format!("ds{i}.conv");
        n = conv(&name, n, config.down_kernel)?;
        out.push(BlockShape::new(name, n, fc * i));
        skips.push((n, fc * i));
        let name = format!("ds{i}.decimate");
        if context && (n < 3 || n % 2 == 0) {
            return Err(Error::size(name, format!("expected an odd frame count >= 3, got {n}")));
        }
        n = n.div_ceil(2);
        out.push(BlockShape::new(name, n, fc * i));
    }
    n = conv("bottleneck", n, config.down_kernel)?;
    let mut ch = fc * (l + 1);
    out.push(BlockShape::new("bottleneck", n, ch));

    for i in (1..=l).rev() {
        let (skip_n, skip_ch) = skips[i - 1];
        let name = format!("us{i}.upsample");
        n = if context {
            if n < 2 {
                return Err(Error::size(name, format!("need at least 2 frames, got {n}")));
            }
            2 * n - 1
        } else {
            skip_n
        };
        out.push(BlockShape::new(name, n, ch));
        let name = format!("us{i}.concat");
        if skip_n < n || (skip_n - n) % 2 != 0 {
            return Err(Error::size(name, format!("cannot centre-crop {skip_n} frames to {n}")));
        }
        ch += skip_ch;
        out.push(BlockShape::new(name, n, ch));
        let name = format!("us{i}.conv");
        n = conv(&name, n, config.up_kernel)?;
        ch = fc * i;
        out.push(BlockShape::new(name, n, ch));
    }

    if input_frames < n || (input_frames - n) % 2 != 0 {
        return Err(Error::size(
            "concat_input",
            format!("cannot centre-crop {input_frames} input frames to {n}"),
        ));
    }
    out.push(BlockShape::new("concat_input", n, ch + config.channels));
    out.push(BlockShape::new("output", n, config.sources * config.channels));
    Ok(out)
}

/// Input frames needed for a given bottleneck output size, walking the
/// context-mode chain backwards.
fn input_for_bottleneck(config: &ModelConfig, bottleneck: usize) -> Option<usize> {
    let mut n = bottleneck.checked_add(config.down_kernel - 1)?;
    for _ in 0..config.levels {
        n = n.checked_mul(2)?.checked_sub(1)?.checked_add(config.down_kernel - 1)?;
    }
    Some(n)
}

/// Smallest feasible output size `>= desired_output` and the input size it
/// implies, as `(input_frames, output_frames)`.
pub fn compute_valid_sizes(config: &ModelConfig, desired_output: usize) -> Result<(usize, usize)> {
    config.validate_structure()?;
    if desired_output == 0 {
        return Err(Error::Config("desired output size must be >= 1".into()));
    }
    if !config.context {
        return Ok((desired_output, desired_output));
    }
    // Output size grows strictly with the bottleneck size, so the first
    // feasible bottleneck reaching the target is the answer.
    for bottleneck in 1usize.. {
        let Some(input) = input_for_bottleneck(config, bottleneck) else {
            break;
        };
        if let Ok(trace) = trace_from(config, input) {
            let output = trace.last().expect("non-empty trace").frames;
            if output >= desired_output {
                return Ok((input, output));
            }
        }
    }
    Err(Error::size("bottleneck", "no feasible size below usize::MAX"))
}
