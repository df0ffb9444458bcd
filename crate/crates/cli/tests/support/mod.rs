#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use waveunet::audio::{write_wav, AudioClip, WavFormat};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_waveunet"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn waveunet")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

/// Writes `tracks` two-source tracks (tone + high-passed noise) under
/// `root/<name>/{vocals,accompaniment}.wav`.
pub fn write_dataset(root: &Path, tracks: usize, rate: u32, seconds: f64) {
    for t in 0..tracks {
        let dir = root.join(format!("track{t:02}"));
        std::fs::create_dir_all(&dir).unwrap();
        let src = super::common::tone_and_noise(rate, seconds, 100 + t as u64);
        write_wav(&src[0], &dir.join("vocals.wav"), WavFormat::Pcm16).unwrap();
        write_wav(&src[1], &dir.join("accompaniment.wav"), WavFormat::Pcm16).unwrap();
    }
}

/// A small but complete training config pointing at `dataset`.
pub fn small_train_config(dataset: &Path, seed: u64) -> String {
    format!(
        r#"{{
  "model": {{"levels": 2, "extra_filters": 4, "down_kernel": 5, "up_kernel": 3, "sources": 2,
             "channels": 1, "context": true, "difference_output": true, "upsampling": "linear",
             "input_frames": {lm}, "output_frames": {ls}}},
  "lr": 0.001, "lr_finetune": 0.0001, "batch": 2, "patience": 1, "iterations_per_epoch": 4,
  "max_epochs_per_stage": 2, "seed": {seed}, "sample_rate": 8000, "val_fraction": 0.34,
  "dataset_dir": {dir:?}
}}"#,
        lm = SMALL_SIZES.0,
        ls = SMALL_SIZES.1,
        dir = dataset.display().to_string()
    )
}

pub const SMALL_SIZES: (usize, usize) = (69, 35);

pub fn mono_clip(rate: u32, data: Vec<f32>) -> AudioClip {
    AudioClip::mono(rate, data).unwrap()
}
