//! CSV ingestion with the biased train split, ratio-controlled re-splits,
//! the seeded synthetic generator and on-disk dataset snapshots.

mod config;
mod ingest;
mod ratio;
mod snapshot;
mod synthetic;

pub use config::{CompareOp, DatasetConfig, SensitiveKind, SplitRule, Threshold};
pub use ingest::{ingest, ingest_reader, Split};
pub use ratio::ratio_split;
pub use snapshot::{read_snapshot, write_snapshot};
pub use synthetic::{
    correlated_errors, generate_synthetic, AttributeModel, Latent, Synthetic, SyntheticConfig, Truth,
};
