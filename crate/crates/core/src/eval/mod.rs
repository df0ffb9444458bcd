//! Segment-wise SDR with silent-segment exclusion and robust summaries.

mod report;
mod sdr;
mod stats;

pub use report::{checkpoint_digest, evaluate_dataset, score_track, EvalReport, SourceSummary};
pub use sdr::{segment_sdr, SdrMode, SegmentScore, SegmentValue};
pub use stats::{summarize, SummaryStats};
