//! Excerpt sampling, augmentation, Adam and the two-stage early-stopping
//! schedule.

mod adam;
mod config;
mod data;
mod schedule;

pub use adam::{adam_step, AdamHyper};
pub use config::TrainConfig;
pub use data::{augment, augment_with_factors, sample_excerpt, split_tracks, Excerpt, TrackPair};
pub use schedule::{
    train, train_step, validation_loss, validation_losses, EpochRecord, Stage, TrainHyper,
    TrainJob, TrainOutcome, TrainProgress, TrainState,
};
