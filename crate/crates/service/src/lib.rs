//! HTTP JSON API over a trained scorer: per-user sessions that can
//! recommend, explain, revoke past behaviors and preview a new
//! interaction before confirming or undoing it.
//!
//! [`Service`] holds the logic and is usable without a server;
//! [`router`] exposes it over axum.

mod api;
mod error;
mod service;

pub use api::{router, serve};
pub use error::ApiError;
pub use service::{Service, Settings, SCHEMA_VERSION};
