//! Command-line tool and HTTP service for the `cfe-core` structuring engine.

pub mod api;
pub mod cli;
pub mod output;
pub mod server;

pub use cli::dispatch;
