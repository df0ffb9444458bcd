use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdamMoments, ParameterSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched if any
/// gradient is non-finite; the error names the offending parameter.
pub fn adam_step(
    params: &mut ParameterSet<f32>,
    moments: &mut AdamMoments,
    grads: &ParameterSet<f32>,
    lr: f64,
    hyper: AdamHyper,
) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&moments.m) || !params.same_layout(&moments.v) {
        return Err(Error::shape("adam", "gradients or moments do not mirror the parameters"));
    }
    if let Some((name, _)) = grads.iter().find(|(_, g)| g.data.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    moments.step += 1;
    let t = moments.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    let iter = params
        .iter_mut()
        .zip(grads.iter())
        .zip(moments.m.iter_mut().zip(moments.v.iter_mut()));
    for (((_, p), (_, g)), ((_, m), (_, v))) in iter {
        for i in 0..p.data.len() {
            let gi = g.data[i] as f64;
            let mi = hyper.beta1 * m.data[i] as f64 + (1.0 - hyper.beta1) * gi;
            let vi = hyper.beta2 * v.data[i] as f64 + (1.0 - hyper.beta2) * gi * gi;
            m.data[i] = mi as f32;
            v.data[i] = vi as f32;
            let update = lr * (mi / c1) / ((vi / c2).sqrt() + hyper.eps);
            p.data[i] = (p.data[i] as f64 - update) as f32;
        }
    }
    Ok(())
}
