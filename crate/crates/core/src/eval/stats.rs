use serde::{Serialize, Serializer};

use super::SegmentValue;
use crate::error::{Error, Result};

/// Robust and classical summaries of one set of segment scores.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    #[serde(serialize_with = "db")]
    pub median: f64,
    #[serde(serialize_with = "db")]
    pub mad: f64,
    /// Over finite values only; `None` if there are none.
    pub mean: Option<f64>,
    /// Population standard deviation over finite values.
    pub sd: Option<f64>,
    pub n_segments: usize,
    pub n_excluded: usize,
    pub n_infinite: usize,
    pub n_neg_infinite: usize,
}

fn db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_none()
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Median of an ascending slice. For even counts the two middle values are
/// averaged; if exactly one of them is infinite the finite one is taken, so
/// the median is infinite only when more than half of the values are.
fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        return sorted[n / 2];
    }
    let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
    match (a.is_finite(), b.is_finite()) {
        (true, true) => (a + b) / 2.0,
        (true, false) => a,
        (false, true) => b,
        (false, false) if a == b => a,
        // -inf and +inf in the middle: no side dominates.
        (false, false) => f64::NAN,
    }
}

fn abs_dev(x: f64, m: f64) -> f64 {
    if x == m {
        0.0
    } else {
        (x - m).abs()
    }
}

pub fn summarize(values: &[SegmentValue]) -> Result<SummaryStats> {
    let mut included: Vec<f64> = values.iter().filter_map(|v| v.as_db()).collect();
    if included.is_empty() {
        return Err(Error::EmptyStats);
    }
    included.sort_by(f64::total_cmp);
    let median = sorted_median(&included);
    let mut devs: Vec<f64> = included.iter().map(|&x| abs_dev(x, median)).collect();
    devs.sort_by(f64::total_cmp);
    let mad = sorted_median(&devs);

    let finite: Vec<f64> = included.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, sd) = if finite.is_empty() {
        (None, None)
    } else {
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    Ok(SummaryStats {
        median,
        mad,
        mean,
        sd,
        n_segments: values.len(),
        n_excluded: values.len() - included.len(),
        n_infinite: included.iter().filter(|v| **v == f64::INFINITY).count(),
        n_neg_infinite: included.iter().filter(|v| **v == f64::NEG_INFINITY).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(v: &[f64]) -> Vec<SegmentValue> {
        v.iter().map(|&x| SegmentValue::Finite(x)).collect()
    }

    #[test]
    fn reference_list() {
        let s = summarize(&finite(&[1.0, 2.0, 3.0, 4.0, 100.0])).unwrap();
        assert_eq!((s.median, s.mad, s.mean), (3.0, 1.0, Some(22.0)));
    }

    #[test]
    fn single_value() {
        let s = summarize(&finite(&[4.5])).unwrap();
        assert_eq!((s.median, s.mad, s.sd), (4.5, 0.0, Some(0.0)));
    }

    #[test]
    fn infinities_order_above_finite() {
        let mut v = finite(&[1.0, 2.0]);
        v.push(SegmentValue::Infinite);
        let s = summarize(&v).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(s.mean, Some(1.5));
        assert_eq!(s.n_infinite, 1);

        // Exactly half infinite: the median stays finite.
        let v = vec![SegmentValue::Finite(1.0), SegmentValue::Infinite];
        assert_eq!(summarize(&v).unwrap().median, 1.0);
        let v = vec![SegmentValue::Infinite; 3];
        let s = summarize(&v).unwrap();
        assert_eq!((s.median, s.mad, s.mean), (f64::INFINITY, 0.0, None));
    }

    #[test]
    fn all_excluded_is_an_error() {
        assert!(matches!(summarize(&[SegmentValue::Excluded]), Err(Error::EmptyStats)));
        let s = summarize(&[SegmentValue::Excluded, SegmentValue::Finite(2.0)]).unwrap();
        assert_eq!((s.n_segments, s.n_excluded), (2, 1));
    }

    #[test]
    fn json_spells_out_infinity() {
        let s = summarize(&[SegmentValue::Infinite]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"median\":\"inf\""), "{j}");
    }
}
