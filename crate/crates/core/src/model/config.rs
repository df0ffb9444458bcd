use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::Padding;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Upsampling {
    Linear,
    Learned,
}

/// Hyperparameters of one network variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of downsampling levels (L).
    pub levels: usize,
    /// Filters added per level (F_c).
    pub extra_filters: usize,
    /// Filter size of the downsampling convolutions (f_d).
    pub down_kernel: usize,
    /// Filter size of the upsampling convolutions (f_u).
    pub up_kernel: usize,
    /// Number of estimated sources (K).
    pub sources: usize,
    /// Audio channels (C).
    pub channels: usize,
    /// Valid convolutions with extra input context instead of zero padding.
    pub context: bool,
    pub difference_output: bool,
    pub upsampling: Upsampling,
    /// Mixture frames fed to the network (L_m).
    pub input_frames: usize,
    /// Frames predicted per source (L_s).
    pub output_frames: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

fn default_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

impl ModelConfig {
    pub fn padding(&self) -> Padding {
        if self.context {
            Padding::Valid
        } else {
            Padding::Same
        }
    }

    /// Number of convolutional output heads.
    pub fn heads(&self) -> usize {
        if self.difference_output {
            self.sources - 1
        } else {
            self.sources
        }
    }

    /// Checks the structural invariants that do not depend on frame counts.
    pub fn validate_structure(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.levels < 1 {
            return fail("levels must be >= 1");
        }
        if self.extra_filters < 1 {
            return fail("extra_filters must be >= 1");
        }
        if self.sources < 2 {
            return fail("sources must be >= 2");
        }
        if !(1..=2).contains(&self.channels) {
            return fail("channels must be 1 or 2");
        }
        if self.down_kernel % 2 == 0 || self.up_kernel % 2 == 0 {
            return fail("down_kernel and up_kernel must be odd");
        }
        if self.upsampling == Upsampling::Learned && !self.context {
            return fail("learned upsampling requires context (valid convolutions)");
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return fail("leaky_slope must be finite and non-negative");
        }
        Ok(())
    }

    /// Full validation including the frame-count fixed point.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.output_frames < 1 {
            return Err(Error::Config("output_frames must be >= 1".into()));
        }
        if !self.context {
            if self.input_frames != self.output_frames {
                return Err(Error::Config(format!(
                    "without context input_frames must equal output_frames ({} != {})",
                    self.input_frames, self.output_frames
                )));
            }
            return Ok(());
        }
        if self.input_frames <= self.output_frames {
            return Err(Error::Config(format!(
                "with context input_frames must exceed output_frames ({} <= {})",
                self.input_frames, self.output_frames
            )));
        }
        let trace = super::trace_from(self, self.input_frames)
            .map_err(|e| Error::Config(format!("input_frames {} is infeasible: {e}", self.input_frames)))?;
        let out = trace.last().map(|b| b.frames).unwrap_or(0);
        if out != self.output_frames {
            return Err(Error::Config(format!(
                "input_frames {} yields {out} output frames, not {}",
                self.input_frames, self.output_frames
            )));
        }
        Ok(())
    }
}
