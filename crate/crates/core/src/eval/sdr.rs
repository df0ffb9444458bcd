use serde::{Deserialize, Serialize, Serializer};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdrMode {
    /// `10 log10(|s|^2 / |s - ŝ|^2)`.
    Plain,
    /// Same ratio after replacing the reference by its scaled projection
    /// `α s`, `α = <ŝ, s> / |s|^2`, which forgives pure gain errors.
    Projected,
}

impl std::fmt::Display for SdrMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdrMode::Plain => "plain",
            SdrMode::Projected => "projected",
        })
    }
}

/// SDR of one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentValue {
    Finite(f64),
    /// Zero error energy.
    Infinite,
    /// Zero projected target energy (projected mode with an estimate
    /// orthogonal to the reference).
    NegInfinite,
    /// Silent reference; the ratio is undefined.
    Excluded,
}

impl SegmentValue {
    /// Ordered value for statistics; `None` when excluded.
    pub fn as_db(self) -> Option<f64> {
        match self {
            SegmentValue::Finite(v) => Some(v),
            SegmentValue::Infinite => Some(f64::INFINITY),
            SegmentValue::NegInfinite => Some(f64::NEG_INFINITY),
            SegmentValue::Excluded => None,
        }
    }
}

impl std::fmt::Display for SegmentValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentValue::Finite(v) => write!(f, "{v}"),
            SegmentValue::Infinite => f.write_str("inf"),
            SegmentValue::NegInfinite => f.write_str("-inf"),
            SegmentValue::Excluded => f.write_str("excluded"),
        }
    }
}

impl Serialize for SegmentValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SegmentValue::Finite(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentScore {
    pub track: String,
    pub source: String,
    pub segment: usize,
    pub value: SegmentValue,
}

fn ratio_db(signal: f64, error: f64) -> SegmentValue {
    if error == 0.0 {
        SegmentValue::Infinite
    } else if signal == 0.0 {
        SegmentValue::NegInfinite
    } else {
        SegmentValue::Finite(10.0 * (signal / error).log10())
    }
}

/// Scores non-overlapping segments of `round(segment_seconds · rate)`
/// samples; a trailing partial segment is dropped. Channels are flattened
/// into one vector per segment.
pub fn segment_sdr(
    reference: &AudioClip,
    estimate: &AudioClip,
    segment_seconds: f64,
    mode: SdrMode,
) -> Result<Vec<SegmentValue>> {
    if reference.len() != estimate.len()
        || reference.channels() != estimate.channels()
        || reference.sample_rate != estimate.sample_rate
    {
        return Err(Error::Usage(
            "reference and estimate differ in length, channels or rate".into(),
        ));
    }
    if !(segment_seconds > 0.0) {
        return Err(Error::Usage("segment length must be positive".into()));
    }
    let seg = (segment_seconds * reference.sample_rate as f64).round() as usize;
    if seg == 0 {
        return Err(Error::Usage("segment shorter than one sample".into()));
    }
    let count = reference.len() / seg;
    let pairs: Vec<(&[f32], &[f32])> = reference.channels_iter().zip(estimate.channels_iter()).collect();

    Ok((0..count)
        .map(|i| {
            let range = i * seg..(i + 1) * seg;
            let mut ss = 0.0f64;
            let mut se = 0.0f64;
            for (r, e) in &pairs {
                for (&s, &e) in r[range.clone()].iter().zip(&e[range.clone()]) {
                    let (s, e) = (s as f64, e as f64);
                    ss += s * s;
                    se += s * e;
                }
            }
            if ss == 0.0 {
                return SegmentValue::Excluded;
            }
            match mode {
                SdrMode::Plain => {
                    let mut err = 0.0f64;
                    for (r, e) in &pairs {
                        for (&s, &e) in r[range.clone()].iter().zip(&e[range.clone()]) {
                            let d = s as f64 - e as f64;
                            err += d * d;
                        }
                    }
                    ratio_db(ss, err)
                }
                SdrMode::Projected => {
                    let alpha = se / ss;
                    let mut err = 0.0f64;
                    for (r, e) in &pairs {
                        for (&s, &e) in r[range.clone()].iter().zip(&e[range.clone()]) {
                            let d = alpha * s as f64 - e as f64;
                            err += d * d;
                        }
                    }
                    ratio_db(alpha * alpha * ss, err)
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(v: Vec<f32>) -> AudioClip {
        AudioClip::mono(10, v).unwrap()
    }

    fn signal() -> Vec<f32> {
        (0..40).map(|i| ((i as f32) * 0.7).sin() * 0.5 + 0.01).collect()
    }

    #[test]
    fn zero_estimate_is_zero_db() {
        let s = clip(signal());
        let z = clip(vec![0.0; 40]);
        for v in segment_sdr(&s, &z, 1.0, SdrMode::Plain).unwrap() {
            assert_eq!(v, SegmentValue::Finite(0.0));
        }
    }

    #[test]
    fn half_gain_reference_values() {
        let s = clip(signal());
        let h = clip(signal().iter().map(|v| v * 0.5).collect());
        for v in segment_sdr(&s, &h, 1.0, SdrMode::Plain).unwrap() {
            let SegmentValue::Finite(db) = v else { panic!("{v:?}") };
            assert!((db - 6.020_599_913_279_624).abs() < 1e-4);
        }
        for v in segment_sdr(&s, &h, 1.0, SdrMode::Projected).unwrap() {
            assert_eq!(v, SegmentValue::Infinite);
        }
    }

    #[test]
    fn silent_reference_segment_is_excluded() {
        let mut r = signal();
        r[10..20].iter_mut().for_each(|v| *v = 0.0);
        let e = clip(vec![0.1; 40]);
        let out = segment_sdr(&clip(r), &e, 1.0, SdrMode::Plain).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[1], SegmentValue::Excluded);
        assert!(matches!(out[0], SegmentValue::Finite(_)));
    }

    #[test]
    fn partial_segment_dropped_and_shape_checked() {
        let s = clip(signal());
        assert_eq!(segment_sdr(&s, &s, 1.5, SdrMode::Plain).unwrap().len(), 2);
        let short = clip(vec![0.0; 39]);
        assert!(segment_sdr(&s, &short, 1.0, SdrMode::Plain).is_err());
        assert!(segment_sdr(&s, &s, 0.0, SdrMode::Plain).is_err());
    }
}
