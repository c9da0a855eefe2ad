//! Session server: create sessions per avatar, step them over HTTP or a websocket and
//! stream world-space geometry back.

pub mod config;
pub mod error;
pub mod protocol;
pub mod registry;
pub mod server;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use protocol::{ActionMessage, FrameMessage, PayloadKind};
pub use registry::{frame_message, CreateSession, Registry, SessionEntry, SessionInfo};
pub use server::{router, serve, spawn_expiry};
