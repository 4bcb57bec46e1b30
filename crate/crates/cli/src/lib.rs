//! Batch front-end: experiment configs, sweeps, the invariant suite and
//! report emission. The `fujita` binary is a thin wrapper over this crate.

pub mod commands;
pub mod config;
pub mod sweep;
pub mod verify;

use config::ConfigError;

/// Process exit code for an error: 2 for configuration problems, 1 for
/// suite failures and everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some()) {
        2
    } else {
        1
    }
}
