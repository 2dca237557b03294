pub mod agent;
pub mod eval;
pub mod llm_gateway;
pub mod registry;
pub mod sandbox;
pub mod stream_parser;
mod template;
pub mod workflow;
