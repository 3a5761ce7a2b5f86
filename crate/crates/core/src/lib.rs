// SPDX-License-Identifier: Apache-2.0

//! RTL logic locking: parse a Verilog subset, pick lockable constants,
//! operations and branches, rewrite them under a key, and check the locked
//! design against the original by simulation.

pub mod analyze;
pub mod backend;
pub mod cli;
pub mod frontend;
pub mod harness;
pub mod lock;
pub mod sim;
