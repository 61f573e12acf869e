//! Command execution: wire records, the allow-list policy and the process
//! runner shared by the server and local-dispatch mode.

mod policy;
mod protocol;
mod runner;

pub use policy::{AllowList, AllowListError, CommandPolicy, LocalExecutor, DEFAULT_ALLOW_LIST, OUTPUT_LIMIT};
pub use protocol::{
    ExecRequest, ExecResponse, ExecStatus, HistoryKind, HistoryRecord, InvalidRequest,
};
pub use runner::{CommandRunner, ProcessRunner, RunOutput, RunnerError};

use thiserror::Error;

#[derive(Debug, Error)]
#[error("executor unavailable: {0}")]
pub struct ExecutorError(pub String);

/// Anything that can carry a command to a policy-checked runner, locally or
/// over the network.
pub trait CommandExecutor: Send + Sync {
    fn execute(&self, command: &str) -> Result<ExecResponse, ExecutorError>;
}
