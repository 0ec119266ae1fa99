//! Configuration, CLI plumbing and HTTP API for the episodic memory agent.

pub mod api;
pub mod config;
pub mod evaluate;
pub mod providers;
pub mod repl;
pub mod runtime;
pub mod server;

pub use api::{AskRequest, AskResponse, MemoryStats, ServiceError};
pub use config::AppConfig;
pub use runtime::Runtime;
