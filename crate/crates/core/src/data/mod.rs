//! Interaction logs: ingestion, filtering, splitting, id maps,
//! configuration and a synthetic corpus generator.

pub mod config;
pub mod filter;
pub mod idmap;
pub mod ingest;
pub mod split;
pub mod synth;

pub use config::Config;
pub use filter::{filter, FilterSummary};
pub use idmap::IdMap;
pub use ingest::{ingest, parse, Format, IngestSummary, Interaction, InteractionLog};
pub use split::{split, SplitDataset, UserSplit};
