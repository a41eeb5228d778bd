//! Controllable sequential recommendation.
//!
//! The crate is organised around four areas:
//!
//! * [`model`]: catalog, item embeddings, the GRU / self-attention / pooling
//!   scorers, revocation masks, top-K recommendation and training.
//! * [`engine`]: retrospective explanations (greedy search and continuous
//!   relaxation) and prospective explanations.
//! * [`eval`]: controllability and ranking metrics, the random and
//!   similarity baselines, and the retrospective / prospective protocols.
//! * [`data`]: ingestion, filtering, splitting, id maps, configuration and a
//!   synthetic corpus generator.

pub mod autodiff;
pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{
    recommend_top_k, Catalog, ItemId, MaskMode, MaskVector, RecommendationList, ScorerKind,
    ScorerParams, SequenceWindow, UserId,
};
