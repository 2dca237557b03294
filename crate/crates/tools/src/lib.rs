//! Web search and web parse tools for research agents, served over HTTP.
//!
//! Search maps a SERP provider's knowledge-graph, organic and related-search
//! results onto [`SearchResponse`]. Parse fetches a page or paper, extracts
//! its main text and returns the passages most relevant to a query plus the
//! page's outbound links. Responses can be recorded to cassettes and
//! replayed offline.

pub mod cassette;
pub mod error;
pub mod normalize;
pub mod parse;
pub mod relevance;
pub mod search;
pub mod server;
pub mod service;
pub mod types;

pub use cassette::{Cassette, CassetteStore, Endpoint, Reply, ToolRequest};
pub use error::ToolError;
pub use server::{router, serve, ServiceHandle};
pub use service::{Mode, ToolConfig, ToolService};
pub use types::*;
