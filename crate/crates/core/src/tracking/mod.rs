//! From selected edges to tracks and their figures of merit.

pub mod assemble;
pub mod binning;
pub mod merge;
pub mod metrics;
pub mod scan;

pub use assemble::{assemble_tracks, TrackCandidate};
pub use binning::{binned_metrics, BinMetrics, BinVariable};
pub use merge::merge_sectors;
pub use metrics::{harmonic, score, MatchRule, Metrics, DEFAULT_MIN_HITS};
pub use scan::{energy_scan, spearman, write_scan_csv, ScanRow};
