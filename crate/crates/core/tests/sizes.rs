mod common;

use std::time::Instant;

use common::*;
use proptest::prelude::*;
use waveunet::model::{build, compute_valid_sizes, forward, shape_trace, trace_from, ModelConfig, Upsampling};
use waveunet::tensor::{Shape, Tensor};
use waveunet::Error;

fn rows(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    shape_trace(cfg)
        .unwrap()
        .into_iter()
        .map(|b| (b.block, b.frames, b.channels))
        .collect()
}

fn find<'a>(rows: &'a [(String, usize, usize)], name: &str) -> (usize, usize) {
    let r = rows.iter().find(|r| r.0 == name).unwrap_or_else(|| panic!("no block {name}"));
    (r.1, r.2)
}

#[test]
fn twelve_level_context_sizes() {
    let mut cfg = m_config(true, true);
    let t = Instant::now();
    assert_eq!(compute_valid_sizes(&cfg, 16384).unwrap(), (147443, 16389));
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(compute_valid_sizes(&cfg, 16389).unwrap(), (147443, 16389));
    assert_eq!(simulate_valid(147443, 12, 15, 5), Some(16389));
    // One bottleneck frame fewer is too short.
    assert_eq!(compute_valid_sizes(&cfg, 16390).unwrap().1, 16389 + 4096);
    cfg.input_frames = 147443;
    cfg.output_frames = 16389;
    assert_eq!(find(&rows(&cfg), "bottleneck"), (9, 24 * 13));
}

#[test]
fn base_architecture_trace() {
    let cfg = m_config(false, false);
    assert_eq!((cfg.input_frames, cfg.output_frames), (16384, 16384));
    let r = rows(&cfg);
    assert_eq!(find(&r, "ds12.decimate"), (4, 288));
    assert_eq!(find(&r, "bottleneck"), (4, 312));
    assert_eq!(find(&r, "us1.conv"), (16384, 24));
    assert_eq!(find(&r, "concat_input"), (16384, 25));
    assert_eq!(find(&r, "output"), (16384, 2));
    assert_eq!(find(&r, "ds3.conv").1, 72);
}

#[test]
fn short_context_input_is_a_size_error() {
    let mut cfg = m_config(true, true);
    let err = trace_from(&cfg, 100).unwrap_err();
    assert!(matches!(err, Error::Size { .. }), "{err}");
    cfg.input_frames = 100;
    assert!(cfg.validate().is_err());
}

#[test]
fn zero_desired_output_is_rejected() {
    assert!(compute_valid_sizes(&m_config(true, true), 0).is_err());
}

#[test]
fn exhaustive_oracle_single_level() {
    let cfg = tiny(1, 3, 3);
    let mut reachable: Vec<(usize, usize)> = (1..5000)
        .filter_map(|lm| simulate_valid(lm, 1, 3, 3).map(|ls| (ls, lm)))
        .collect();
    reachable.sort();
    for desired in 1..=1000 {
        let expected = reachable.iter().find(|(ls, _)| *ls >= desired).map(|&(ls, lm)| (lm, ls)).unwrap();
        assert_eq!(compute_valid_sizes(&cfg, desired).unwrap(), expected, "desired {desired}");
    }
    assert_eq!(compute_valid_sizes(&cfg, 1).unwrap(), (9, 1));
}

fn tiny(levels: usize, fd: usize, fu: usize) -> ModelConfig {
    ModelConfig {
        levels,
        extra_filters: 1,
        down_kernel: fd,
        up_kernel: fu,
        sources: 2,
        channels: 1,
        context: true,
        difference_output: false,
        upsampling: Upsampling::Linear,
        input_frames: 0,
        output_frames: 0,
        leaky_slope: 0.2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sizes_agree_with_oracle(levels in 1usize..6, fd in 1usize..8, fu in 1usize..5, desired in 1usize..3000) {
        let (fd, fu) = (2 * fd + 1, 2 * fu + 1);
        let cfg = tiny(levels, fd, fu);
        let (lm, ls) = compute_valid_sizes(&cfg, desired).unwrap();
        prop_assert!(ls >= desired);
        prop_assert_eq!(simulate_valid(lm, levels, fd, fu), Some(ls));
        // Nothing smaller reaches the target.
        let smaller = (1..lm).filter_map(|m| simulate_valid(m, levels, fd, fu)).any(|s| s >= desired && s < ls);
        prop_assert!(!smaller);
        let trace = trace_from(&cfg, lm).unwrap();
        prop_assert_eq!(trace.last().unwrap().frames, ls);
    }

    #[test]
    fn forward_never_fails_on_computed_sizes(levels in 1usize..4, desired in 1usize..64, seed in 0u64..100) {
        let mut cfg = tiny(levels, 5, 3);
        let (lm, ls) = compute_valid_sizes(&cfg, desired).unwrap();
        cfg.input_frames = lm;
        cfg.output_frames = ls;
        let params = build(&cfg, seed).unwrap();
        let out = forward(&params, &cfg, &Tensor::<f32>::zeros(Shape::new(1, lm, 1))).unwrap();
        prop_assert_eq!(out.len(), 2);
        prop_assert!(out.iter().all(|o| o.frames() == ls && o.channels() == 1));
    }
}
