//! Runs a scenario headless or behind a WebSocket, and records traces.

pub mod audit;
pub mod protocol;
pub mod server;
pub mod session;
pub mod trace;

pub use session::{GatewayError, InjectError, RunSummary, Session, StopReason, TickReport};
