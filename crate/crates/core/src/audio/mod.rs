//! Audio clips, WAV files, resampling, dataset directories and full-track
//! separation.

mod clip;
mod dataset;
mod resample;
mod separate;
mod wav;

pub use clip::AudioClip;
pub use dataset::{conform, load_track, DatasetIndex, TaskProfile, TrackEntry};
pub use resample::resample;
pub use separate::{separate_track, window_starts};
pub use wav::{encode_pcm16, read_wav, read_wav_bytes, write_wav, write_wav_bytes, WavFormat};
