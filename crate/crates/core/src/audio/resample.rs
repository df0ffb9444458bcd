//! Band-limited sample-rate conversion with a Kaiser-windowed sinc.

use rayon::prelude::*;

use super::AudioClip;

/// Zero crossings per side, counted at the lower of the two rates.
const ZERO_CROSSINGS: f64 = 64.0;
const KAISER_BETA: f64 = 8.6;
/// Passband edge as a fraction of the lower Nyquist frequency.
const CUTOFF: f64 = 0.9;

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Output length is `round(n * target / source)`; equal rates return the
/// clip unchanged. Samples outside the clip count as zero.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate >= 1, "target rate must be positive");
    if target_rate == clip.sample_rate {
        return clip.clone();
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let n = clip.len();
    let out_len = (n as f64 * ratio).round() as usize;
    let scale = ratio.min(1.0);
    // Low-pass in source-sample units: h(d) = 2 fc sinc(2 fc d), fc in cycles/sample.
    let two_fc = CUTOFF * scale;
    let half_width = ZERO_CROSSINGS / scale;
    let norm = bessel_i0(KAISER_BETA);
    let tap = |d: f64| -> f64 {
        if d.abs() > half_width {
            return 0.0;
        }
        let u = d / half_width;
        two_fc * sinc(two_fc * d) * bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / norm
    };

    // Output j sits at source position j * down / up. Its fractional part
    // takes only `up` distinct values, so the taps are tabulated per phase.
    let g = gcd(clip.sample_rate as u64, target_rate as u64);
    let (up, down) = (target_rate as u64 / g, clip.sample_rate as u64 / g);
    let reach = half_width.ceil() as i64 + 1;
    let width = (2 * reach + 1) as usize;
    let table: Option<Vec<f64>> = (up <= 4096).then(|| {
        (0..up)
            .flat_map(|ph| {
                let frac = ph as f64 / up as f64;
                (-reach..=reach).map(move |k| frac - k as f64)
            })
            .map(tap)
            .collect()
    });

    let channels = clip
        .channels_iter()
        .map(|x| {
            (0..out_len)
                .into_par_iter()
                .map(|j| {
                    let pos = j as u64 * down;
                    let base = (pos / up) as i64;
                    let phase = (pos % up) as usize;
                    let mut acc = 0.0f64;
                    for k in -reach..=reach {
                        let i = base + k;
                        if i < 0 || i >= n as i64 {
                            continue;
                        }
                        let h = match &table {
                            Some(t) => t[phase * width + (k + reach) as usize],
                            None => tap(phase as f64 / up as f64 - k as f64),
                        };
                        acc += x[i as usize] as f64 * h;
                    }
                    acc as f32
                })
                .collect()
        })
        .collect();
    AudioClip::new(target_rate, channels).expect("equal channel lengths")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
