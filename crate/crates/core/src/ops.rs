//! Forward kernels and their vector-Jacobian products.
//!
//! Every function here is pure. The tape in [`crate::autodiff`] records
//! calls to these and replays the `*_backward` counterparts in reverse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Real, Shape, Tensor, UpsampleWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No implicit padding: `n` frames become `n - f + 1`.
    Valid,
    /// Zero padding that keeps the frame count. For even `f - 1` the pad is
    /// symmetric; otherwise the extra zero goes on the right.
    Same,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slope")]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn conv_geometry(frames: usize, filter: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (frames >= filter).then(|| (frames - filter + 1, 0)),
        Padding::Same => Some((frames, (filter - 1) / 2)),
    }
}

/// 1-D cross-correlation (no kernel flip) with per-channel bias.
pub fn conv1d<T: Real>(input: &Tensor<T>, params: &ConvParams<T>, padding: Padding) -> Result<Tensor<T>> {
    conv1d_raw(input, &params.filters, &params.bias, padding)
}

pub(crate) fn conv1d_raw<T: Real>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    bias: &[T],
    padding: Padding,
) -> Result<Tensor<T>> {
    let Shape { batch, frames, channels: cin } = input.shape();
    let Shape { batch: f, frames: fin, channels: cout } = filters.shape();
    if fin != cin {
        return Err(Error::shape(
            "conv1d",
            format!("input has {cin} channels, filters expect {fin}"),
        ));
    }
    if bias.len() != cout {
        return Err(Error::shape("conv1d", format!("{} biases for {cout} filters", bias.len())));
    }
    let (out_frames, offset) = conv_geometry(frames, f, padding).ok_or_else(|| {
        Error::size("conv1d", format!("{frames} frames < filter size {f} (valid padding)"))
    })?;
    let w = filters.data();
    let mut out = vec![T::zero(); batch * out_frames * cout];
    out.par_chunks_mut(out_frames * cout)
        .enumerate()
        .for_each(|(b, out_b)| {
            let x = input.example(b);
            for t in 0..out_frames {
                let row = &mut out_b[t * cout..(t + 1) * cout];
                row.copy_from_slice(bias);
                for k in 0..f {
                    let src = t + k;
                    if src < offset || src - offset >= frames {
                        continue;
                    }
                    let xrow = &x[(src - offset) * cin..(src - offset + 1) * cin];
                    let wk = &w[k * cin * cout..(k + 1) * cin * cout];
                    for (i, &xv) in xrow.iter().enumerate() {
                        let wrow = &wk[i * cout..(i + 1) * cout];
                        for (o, &wv) in row.iter_mut().zip(wrow) {
                            *o = *o + xv * wv;
                        }
                    }
                }
            }
        });
    Tensor::new(Shape::new(batch, out_frames, cout), out)
}

pub struct ConvGrads<T> {
    pub input: Vec<T>,
    pub filters: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn conv1d_backward<T: Real>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    padding: Padding,
    grad_out: &[T],
) -> ConvGrads<T> {
    let Shape { batch, frames, channels: cin } = input.shape();
    let Shape { batch: f, channels: cout, .. } = filters.shape();
    let (out_frames, offset) =
        conv_geometry(frames, f, padding).expect("geometry validated in forward");
    let w = filters.data();

    let per_example: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let x = input.example(b);
            let g = &grad_out[b * out_frames * cout..(b + 1) * out_frames * cout];
            let mut gx = vec![T::zero(); frames * cin];
            let mut gw = vec![T::zero(); f * cin * cout];
            let mut gb = vec![T::zero(); cout];
            for t in 0..out_frames {
                let grow = &g[t * cout..(t + 1) * cout];
                for (acc, &gv) in gb.iter_mut().zip(grow) {
                    *acc = *acc + gv;
                }
                for k in 0..f {
                    let src = t + k;
                    if src < offset || src - offset >= frames {
                        continue;
                    }
                    let s = src - offset;
                    let xrow = &x[s * cin..(s + 1) * cin];
                    let base = k * cin * cout;
                    for i in 0..cin {
                        let wrow = &w[base + i * cout..base + (i + 1) * cout];
                        let mut dot = T::zero();
                        for (&wv, &gv) in wrow.iter().zip(grow) {
                            dot = dot + wv * gv;
                        }
                        gx[s * cin + i] = gx[s * cin + i] + dot;
                        let xv = xrow[i];
                        let gwrow = &mut gw[base + i * cout..base + (i + 1) * cout];
                        for (acc, &gv) in gwrow.iter_mut().zip(grow) {
                            *acc = *acc + xv * gv;
                        }
                    }
                }
            }
            (gx, gw, gb)
        })
        .collect();

    let mut gin = Vec::with_capacity(batch * frames * cin);
    let mut gw = vec![T::zero(); f * cin * cout];
    let mut gb = vec![T::zero(); cout];
    // Summed in batch order so results do not depend on thread scheduling.
    for (gx_b, gw_b, gb_b) in per_example {
        gin.extend_from_slice(&gx_b);
        for (a, v) in gw.iter_mut().zip(gw_b) {
            *a = *a + v;
        }
        for (a, v) in gb.iter_mut().zip(gb_b) {
            *a = *a + v;
        }
    }
    ConvGrads {
        input: gin,
        filters: gw,
        bias: gb,
    }
}

pub fn activation<T: Real>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    let f: Box<dyn Fn(T) -> T + Sync> = match kind {
        Activation::LeakyRelu(a) => {
            let a = T::from_f64(a);
            Box::new(move |v: T| if v > T::zero() { v } else { a * v })
        }
        Activation::Tanh => Box::new(|v: T| v.tanh()),
        Activation::Sigmoid => Box::new(sigmoid),
    };
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

/// Uses the saved input for leaky ReLU and the saved output for tanh/sigmoid.
/// The leaky ReLU derivative at exactly zero is taken from the positive branch.
pub(crate) fn activation_backward<T: Real>(
    input: &[T],
    output: &[T],
    kind: Activation,
    grad_out: &[T],
) -> Vec<T> {
    match kind {
        Activation::LeakyRelu(a) => {
            let a = T::from_f64(a);
            input
                .iter()
                .zip(grad_out)
                .map(|(&x, &g)| if x >= T::zero() { g } else { a * g })
                .collect()
        }
        Activation::Tanh => output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| g * (T::one() - y * y))
            .collect(),
        Activation::Sigmoid => output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| g * y * (T::one() - y))
            .collect(),
    }
}

/// Keeps frames 0, 2, 4, ... With `require_odd` (valid-padding networks)
/// the input must have an odd count of at least 3 so both borders survive.
pub fn decimate<T: Real>(x: &Tensor<T>, require_odd: bool) -> Result<Tensor<T>> {
    let Shape { batch, frames, channels } = x.shape();
    if require_odd && (frames < 3 || frames % 2 == 0) {
        return Err(Error::size(
            "decimate",
            format!("expected an odd frame count >= 3, got {frames}"),
        ));
    }
    let out_frames = frames.div_ceil(2);
    let mut out = Vec::with_capacity(batch * out_frames * channels);
    for b in 0..batch {
        let ex = x.example(b);
        for t in 0..out_frames {
            out.extend_from_slice(&ex[2 * t * channels..(2 * t + 1) * channels]);
        }
    }
    Tensor::new(Shape::new(batch, out_frames, channels), out)
}

pub(crate) fn decimate_backward<T: Real>(input_shape: Shape, grad_out: &[T]) -> Vec<T> {
    let Shape { batch, frames, channels } = input_shape;
    let out_frames = frames.div_ceil(2);
    let mut g = vec![T::zero(); input_shape.len()];
    for b in 0..batch {
        for t in 0..out_frames {
            let src = (b * out_frames + t) * channels;
            let dst = (b * frames + 2 * t) * channels;
            g[dst..dst + channels].copy_from_slice(&grad_out[src..src + channels]);
        }
    }
    g
}

/// Interpolates between neighbouring frames only: `n` frames become
/// `2n - 1`, odd outputs are midpoints, borders are kept.
pub fn upsample_linear<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = x.frames();
    if n < 2 {
        return Err(Error::size("upsample", format!("need at least 2 frames, got {n}")));
    }
    resize_linear(x, 2 * n - 1)
}

/// Position of output frame `t` on the input grid when `n` input frames are
/// stretched onto `m` output frames with both ends aligned: returns the left
/// neighbour and the exact rational fraction `num / den` towards the right one.
#[inline]
fn aligned_position(t: usize, n: usize, m: usize) -> (usize, usize, usize) {
    if m == 1 || n == 1 {
        return (0, 0, 1);
    }
    let num = t * (n - 1);
    let den = m - 1;
    (num / den, num % den, den)
}

/// Linear interpolation to `target` frames with aligned first and last frames.
/// Used by zero-padded networks whose skip connections have arbitrary sizes;
/// `upsample_linear` is the `2n - 1` special case.
pub fn resize_linear<T: Real>(x: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    let Shape { batch, frames: n, channels } = x.shape();
    if target == 0 {
        return Err(Error::size("upsample", "target frame count is zero"));
    }
    let mut out = Vec::with_capacity(batch * target * channels);
    for b in 0..batch {
        let ex = x.example(b);
        for t in 0..target {
            let (lo, num, den) = aligned_position(t, n, target);
            let left = &ex[lo * channels..(lo + 1) * channels];
            if num == 0 {
                out.extend_from_slice(left);
            } else if 2 * num == den {
                let right = &ex[(lo + 1) * channels..(lo + 2) * channels];
                let half = T::from_f64(0.5);
                out.extend(left.iter().zip(right).map(|(&a, &b)| (a + b) * half));
            } else {
                let frac = T::from_f64(num as f64 / den as f64);
                let right = &ex[(lo + 1) * channels..(lo + 2) * channels];
                out.extend(
                    left.iter()
                        .zip(right)
                        .map(|(&a, &b)| a * (T::one() - frac) + b * frac),
                );
            }
        }
    }
    Tensor::new(Shape::new(batch, target, channels), out)
}

pub(crate) fn resize_linear_backward<T: Real>(input_shape: Shape, target: usize, grad_out: &[T]) -> Vec<T> {
    let Shape { batch, frames: n, channels } = input_shape;
    let mut g = vec![T::zero(); input_shape.len()];
    for b in 0..batch {
        for t in 0..target {
            let (lo, num, den) = aligned_position(t, n, target);
            let go = &grad_out[(b * target + t) * channels..(b * target + t + 1) * channels];
            let base = b * n * channels;
            if num == 0 {
                for (c, &v) in go.iter().enumerate() {
                    g[base + lo * channels + c] = g[base + lo * channels + c] + v;
                }
                continue;
            }
            let frac = if 2 * num == den {
                T::from_f64(0.5)
            } else {
                T::from_f64(num as f64 / den as f64)
            };
            for (c, &v) in go.iter().enumerate() {
                let l = base + lo * channels + c;
                let r = l + channels;
                g[l] = g[l] + v * (T::one() - frac);
                g[r] = g[r] + v * frac;
            }
        }
    }
    g
}

/// Learned interpolation: the inserted frame between `f_t` and `f_{t+1}` is
/// `s * f_t + (1 - s) * f_{t+1}` with `s = sigmoid(w)` per channel.
pub fn upsample_learned<T: Real>(x: &Tensor<T>, weights: &UpsampleWeights<T>) -> Result<Tensor<T>> {
    let Shape { batch, frames: n, channels } = x.shape();
    if weights.w.len() != channels {
        return Err(Error::shape(
            "upsample_learned",
            format!("{} weights for {channels} channels", weights.w.len()),
        ));
    }
    if n < 2 {
        return Err(Error::size("upsample", format!("need at least 2 frames, got {n}")));
    }
    let s = weights.mix();
    let m = 2 * n - 1;
    let mut out = Vec::with_capacity(batch * m * channels);
    for b in 0..batch {
        let ex = x.example(b);
        for t in 0..n {
            let cur = &ex[t * channels..(t + 1) * channels];
            out.extend_from_slice(cur);
            if t + 1 < n {
                let next = &ex[(t + 1) * channels..(t + 2) * channels];
                out.extend(
                    cur.iter()
                        .zip(next)
                        .zip(&s)
                        .map(|((&a, &b), &s)| s * a + (T::one() - s) * b),
                );
            }
        }
    }
    Tensor::new(Shape::new(batch, m, channels), out)
}

pub(crate) fn upsample_learned_backward<T: Real>(
    input: &Tensor<T>,
    w: &[T],
    grad_out: &[T],
) -> (Vec<T>, Vec<T>) {
    let Shape { batch, frames: n, channels } = input.shape();
    let m = 2 * n - 1;
    let s: Vec<T> = w.iter().map(|&v| sigmoid(v)).collect();
    let mut gx = vec![T::zero(); input.shape().len()];
    let mut gs = vec![T::zero(); channels];
    for b in 0..batch {
        let ex = input.example(b);
        let go = &grad_out[b * m * channels..(b + 1) * m * channels];
        let base = b * n * channels;
        for t in 0..n {
            for c in 0..channels {
                gx[base + t * channels + c] = gx[base + t * channels + c] + go[2 * t * channels + c];
            }
            if t + 1 < n {
                for c in 0..channels {
                    let g = go[(2 * t + 1) * channels + c];
                    let a = ex[t * channels + c];
                    let bb = ex[(t + 1) * channels + c];
                    gx[base + t * channels + c] = gx[base + t * channels + c] + g * s[c];
                    gx[base + (t + 1) * channels + c] =
                        gx[base + (t + 1) * channels + c] + g * (T::one() - s[c]);
                    gs[c] = gs[c] + g * (a - bb);
                }
            }
        }
    }
    let gw = gs
        .iter()
        .zip(&s)
        .map(|(&g, &s)| g * s * (T::one() - s))
        .collect();
    (gx, gw)
}

/// Centre crop to `frames`. The removed amount must split evenly.
pub fn crop_center<T: Real>(x: &Tensor<T>, frames: usize) -> Result<Tensor<T>> {
    let Shape { batch, frames: n, channels } = x.shape();
    if frames > n {
        return Err(Error::size("crop", format!("cannot crop {n} frames to {frames}")));
    }
    if (n - frames) % 2 != 0 {
        return Err(Error::size(
            "crop",
            format!("odd crop difference {} ({n} -> {frames}); the size calculus is broken", n - frames),
        ));
    }
    let off = (n - frames) / 2;
    let mut out = Vec::with_capacity(batch * frames * channels);
    for b in 0..batch {
        out.extend_from_slice(&x.example(b)[off * channels..(off + frames) * channels]);
    }
    Tensor::new(Shape::new(batch, frames, channels), out)
}

pub(crate) fn crop_center_backward<T: Real>(input_shape: Shape, frames: usize, grad_out: &[T]) -> Vec<T> {
    let Shape { batch, frames: n, channels } = input_shape;
    let off = (n - frames) / 2;
    let mut g = vec![T::zero(); input_shape.len()];
    for b in 0..batch {
        let dst = (b * n + off) * channels;
        let src = b * frames * channels;
        g[dst..dst + frames * channels].copy_from_slice(&grad_out[src..src + frames * channels]);
    }
    g
}

/// Channel-wise concatenation `[a | b]` of equally long tensors.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.batch() != b.batch() || a.frames() != b.frames() {
        return Err(Error::shape("concat", format!("{} vs {}", a.shape(), b.shape())));
    }
    let (ca, cb) = (a.channels(), b.channels());
    let mut out = Vec::with_capacity(a.shape().len() + b.shape().len());
    for (ra, rb) in a.data().chunks(ca).zip(b.data().chunks(cb)) {
        out.extend_from_slice(ra);
        out.extend_from_slice(rb);
    }
    Tensor::new(Shape::new(a.batch(), a.frames(), ca + cb), out)
}

pub(crate) fn concat_channels_backward<T: Real>(ca: usize, cb: usize, grad_out: &[T]) -> (Vec<T>, Vec<T>) {
    let rows = grad_out.len() / (ca + cb);
    let mut ga = Vec::with_capacity(rows * ca);
    let mut gb = Vec::with_capacity(rows * cb);
    for row in grad_out.chunks(ca + cb) {
        ga.extend_from_slice(&row[..ca]);
        gb.extend_from_slice(&row[ca..]);
    }
    (ga, gb)
}

/// Centre-crops `local` to the frame count of `high_level`, then appends
/// its channels after those of `high_level`.
pub fn concat_crop<T: Real>(high_level: &Tensor<T>, local: &Tensor<T>) -> Result<Tensor<T>> {
    let cropped = crop_center(local, high_level.frames())?;
    concat_channels(high_level, &cropped)
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same(a, b, "add", |x, y| x + y)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same(a, b, "sub", |x, y| x - y)
}

fn zip_same<T: Real>(a: &Tensor<T>, b: &Tensor<T>, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{} vs {}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data)
}

/// Mean of squared differences over every element.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse", format!("{} vs {}", pred.shape(), target.shape())));
    }
    let sum: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / T::from_f64(pred.data().len() as f64))
}
