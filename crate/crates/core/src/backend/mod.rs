// SPDX-License-Identifier: Apache-2.0

//! Verilog emission, key port insertion and key/manifest files.

pub mod emit;
pub mod keyfile;
pub mod keyport;

use thiserror::Error;

pub use emit::emit;
pub use keyfile::{read_key, write_atomic, write_key};
pub use keyport::{insert_key_ports, KeyRange, KeyWiring, DEFAULT_KEY_PORT};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("module `{module}` already declares `{name}`; choose another key port name")]
    KeyPortCollision { module: String, name: String },
    #[error("malformed key file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
