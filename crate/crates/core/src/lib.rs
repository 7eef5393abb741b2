//! Quasi-principal 2-bundles over Lie groupoids and their parallel transport.

pub mod builtins;
pub mod bundle2;
pub mod connection;
pub mod crossed_module;
pub mod error;
pub mod groupoid;
pub mod hpath;
pub mod matlie;
pub mod report;
pub mod transport;
pub mod vbassoc;

pub use error::{Error, Result};
