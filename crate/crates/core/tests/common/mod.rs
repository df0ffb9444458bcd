#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveunet::autodiff::Tape;
use waveunet::model::{build, compute_valid_sizes, forward, forward_graph, ModelConfig, ParamVars, ParameterSet, Upsampling};
use waveunet::tensor::{Real, Shape, Tensor};

pub fn tiny_config(levels: usize, upsampling: Upsampling, difference_output: bool) -> ModelConfig {
    let mut cfg = ModelConfig {
        levels,
        extra_filters: 2,
        down_kernel: 3,
        up_kernel: 3,
        sources: 2,
        channels: 1,
        context: true,
        difference_output,
        upsampling,
        input_frames: 0,
        output_frames: 0,
        leaky_slope: 0.2,
    };
    let (lm, ls) = compute_valid_sizes(&cfg, 8).unwrap();
    cfg.input_frames = lm;
    cfg.output_frames = ls;
    cfg
}

pub fn random_tensor<T: Real>(rng: &mut ChaCha8Rng, shape: Shape, scale: f64) -> Tensor<T> {
    let data = (0..shape.len())
        .map(|_| T::from_f64(rng.gen_range(-scale..scale)))
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Parameters with non-zero biases and interpolation weights so every
/// parameter has a non-trivial gradient.
pub fn random_params(config: &ModelConfig, seed: u64) -> ParameterSet<f64> {
    let mut p = build(config, seed).unwrap().cast::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for (name, a) in p.iter_mut() {
        if name.ends_with(".bias") {
            a.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        } else if name.ends_with(".interp") {
            a.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
    }
    p
}

/// Reference forward pass built directly from the ops, independent of the
/// tape. Also returns the sign pattern of every LeakyReLU input so callers
/// can tell whether two parameter points lie on the same linear piece.
pub fn reference_forward(params: &ParameterSet<f64>, config: &ModelConfig, mixture: &Tensor<f64>) -> (Vec<Tensor<f64>>, Vec<bool>) {
    use waveunet::ops::{self, Activation};
    let padding = config.padding();
    let mut signs = Vec::new();
    let mut conv = |layer: &str, x: &Tensor<f64>, leaky: bool| {
        let z = ops::conv1d(x, &params.conv(layer).unwrap(), padding).unwrap();
        if leaky {
            signs.extend(z.data().iter().map(|&v| v >= 0.0));
            ops::activation(&z, Activation::LeakyRelu(config.leaky_slope))
        } else {
            ops::activation(&z, Activation::Tanh)
        }
    };
    let mut x = mixture.clone();
    let mut skips = Vec::new();
    for i in 1..=config.levels {
        x = conv(&format!("ds{i}"), &x, true);
        skips.push(x.clone());
        x = ops::decimate(&x, config.context).unwrap();
    }
    x = conv("bottleneck", &x, true);
    for i in (1..=config.levels).rev() {
        let skip = &skips[i - 1];
        x = if !config.context {
            ops::resize_linear(&x, skip.frames()).unwrap()
        } else if config.upsampling == Upsampling::Learned {
            ops::upsample_learned(&x, &params.upsample(&format!("us{i}")).unwrap()).unwrap()
        } else {
            ops::upsample_linear(&x).unwrap()
        };
        x = ops::concat_crop(&x, skip).unwrap();
        x = conv(&format!("us{i}"), &x, true);
    }
    x = ops::concat_crop(&x, mixture).unwrap();
    let mut outs: Vec<Tensor<f64>> = (0..config.heads()).map(|k| conv(&format!("head{k}"), &x, false)).collect();
    if config.difference_output {
        let mut rest = ops::crop_center(mixture, config.output_frames).unwrap();
        for o in &outs {
            rest = ops::sub(&rest, o).unwrap();
        }
        outs.push(rest);
    }
    (outs, signs)
}

/// Mean squared error over every source sample, from the reference pass.
pub fn loss_and_signs(params: &ParameterSet<f64>, config: &ModelConfig, mixture: &Tensor<f64>, targets: &[Tensor<f64>]) -> (f64, Vec<bool>) {
    let (outs, signs) = reference_forward(params, config, mixture);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (o, t) in outs.iter().zip(targets) {
        for (a, b) in o.data().iter().zip(t.data()) {
            sum += (a - b) * (a - b);
        }
        count += o.data().len();
    }
    (sum / count as f64, signs)
}

pub fn loss_value(params: &ParameterSet<f64>, config: &ModelConfig, mixture: &Tensor<f64>, targets: &[Tensor<f64>]) -> f64 {
    loss_and_signs(params, config, mixture, targets).0
}

pub fn analytic_grads(params: &ParameterSet<f64>, config: &ModelConfig, mixture: &Tensor<f64>, targets: &[Tensor<f64>]) -> Vec<Vec<f64>> {
    let tape = Tape::new();
    let vars = ParamVars::register(&tape, params);
    let m = tape.constant(mixture.clone());
    let outs = forward_graph(&tape, config, params, &vars, m).unwrap();
    let mut pred = outs[0];
    let mut target = tape.constant(targets[0].clone());
    for k in 1..outs.len() {
        pred = tape.concat_channels(pred, outs[k]).unwrap();
        target = tape.concat_channels(target, tape.constant(targets[k].clone())).unwrap();
    }
    let loss = tape.mse(pred, target).unwrap();
    let g = tape.backward(loss).unwrap();
    params
        .iter()
        .zip(vars.vars())
        .map(|((_, a), &v)| g.get(v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; a.data.len()]))
        .collect()
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    let d = (a - n).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(n.abs()).max(1e-8)
    }
}

pub struct GradReport {
    pub max_rel: f64,
    pub worst: String,
    pub checked: usize,
    /// Test points discarded because a ±h stencil crossed a LeakyReLU kink.
    pub rejected_points: usize,
}

/// Central finite differences with step `h` on every scalar parameter.
///
/// Finite differences only estimate a derivative when the whole stencil
/// lies on one linear piece of every LeakyReLU. A test point where some
/// p ± h flips the sign of any LeakyReLU input is discarded and the next
/// seed is drawn; at an accepted point every parameter is compared.
pub fn finite_difference_check(config: &ModelConfig, seed: u64, h: f64) -> GradReport {
    let mut rejected = 0;
    for attempt in 0..64u64 {
        if let Some(mut r) = check_point(config, seed.wrapping_add(attempt * 7919), h) {
            r.rejected_points = rejected;
            return r;
        }
        rejected += 1;
    }
    panic!("no kink-free test point found in 64 draws");
}

fn check_point(config: &ModelConfig, seed: u64, h: f64) -> Option<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = random_params(config, seed);
    let mixture = random_tensor::<f64>(&mut rng, Shape::new(2, config.input_frames, config.channels), 0.5);
    let targets: Vec<Tensor<f64>> = (0..config.sources)
        .map(|_| random_tensor(&mut rng, Shape::new(2, config.output_frames, config.channels), 0.5))
        .collect();

    // The reference pass must agree with the model's own forward.
    let (reference, base_signs) = reference_forward(&params, config, &mixture);
    let model = forward(&params, config, &mixture).unwrap();
    for (a, b) in reference.iter().zip(&model) {
        assert_eq!(a.data(), b.data(), "reference forward disagrees with the model");
    }

    let analytic = analytic_grads(&params, config, &mixture, &targets);
    let mut report = GradReport { max_rel: 0.0, worst: String::new(), checked: 0, rejected_points: 0 };
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for (pi, name) in names.iter().enumerate() {
        let len = params.get(name).unwrap().data.len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data[i] += h;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data[i] -= h;
            let (lp, sp) = loss_and_signs(&plus, config, &mixture, &targets);
            let (lm, sm) = loss_and_signs(&minus, config, &mixture, &targets);
            if sp != base_signs || sm != base_signs {
                return None;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let e = rel_err(analytic[pi][i], numeric);
            report.checked += 1;
            if e > report.max_rel {
                report.max_rel = e;
                report.worst = format!("{name}[{i}]: analytic {:.6e} numeric {:.6e}", analytic[pi][i], numeric);
            }
        }
    }
    Some(report)
}

/// Two-source fixture: a low band-limited tone and high-passed noise.
/// Both sources carry similar power so neither dominates the SDR.
pub fn tone_and_noise(rate: u32, seconds: f64, seed: u64) -> Vec<waveunet::audio::AudioClip> {
    use waveunet::audio::AudioClip;
    let n = (rate as f64 * seconds).round() as usize;
    let tone: Vec<f32> = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (0.25 * (2.0 * std::f64::consts::PI * 110.0 * t).sin() + 0.15 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()) as f32
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Second difference: a high-pass with a double zero at DC.
    let hp: Vec<f64> = (0..n).map(|i| white[i + 2] - 2.0 * white[i + 1] + white[i]).collect();
    let rms = (hp.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let noise: Vec<f32> = hp.iter().map(|v| (0.2 * v / rms) as f32).collect();
    vec![AudioClip::mono(rate, tone).unwrap(), AudioClip::mono(rate, noise).unwrap()]
}

/// The 12-level mono configuration with 15/5 kernels and a 16384-sample
/// output target; `context` picks valid or same convolutions.
pub fn m_config(context: bool, difference_output: bool) -> ModelConfig {
    let mut cfg = ModelConfig {
        levels: 12,
        extra_filters: 24,
        down_kernel: 15,
        up_kernel: 5,
        sources: 2,
        channels: 1,
        context,
        difference_output,
        upsampling: Upsampling::Linear,
        input_frames: 0,
        output_frames: 0,
        leaky_slope: 0.2,
    };
    let (lm, ls) = compute_valid_sizes(&cfg, 16384).unwrap();
    cfg.input_frames = lm;
    cfg.output_frames = ls;
    cfg
}

/// Independent size oracle: walks the network with plain integer
/// arithmetic and returns the output length, or `None` if some block
/// cannot be applied.
pub fn simulate_valid(lm: usize, levels: usize, fd: usize, fu: usize) -> Option<usize> {
    let mut n = lm;
    let mut skips = Vec::new();
    for _ in 0..levels {
        if n < fd {
            return None;
        }
        n -= fd - 1;
        skips.push(n);
        if n < 3 || n % 2 == 0 {
            return None;
        }
        n = (n + 1) / 2;
    }
    if n < fd {
        return None;
    }
    n -= fd - 1;
    for &skip in skips.iter().rev() {
        if n < 2 {
            return None;
        }
        n = 2 * n - 1;
        if skip < n || (skip - n) % 2 != 0 {
            return None;
        }
        if n < fu {
            return None;
        }
        n -= fu - 1;
    }
    if lm < n || (lm - n) % 2 != 0 {
        return None;
    }
    Some(n)
}
