//! JSON wire records. Fields serialize in declaration order; unknown input
//! fields are ignored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecRequest {
    pub request_id: String,
    pub client_id: String,
    pub command: String,
    pub issued_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidRequest {
    #[error("request_id is empty")]
    EmptyRequestId,
    #[error("command is empty")]
    EmptyCommand,
}

impl ExecRequest {
    pub fn validate(&self) -> Result<(), InvalidRequest> {
        if self.request_id.is_empty() {
            return Err(InvalidRequest::EmptyRequestId);
        }
        if self.command.trim().is_empty() {
            return Err(InvalidRequest::EmptyCommand);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Ok,
    Rejected,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResponse {
    pub request_id: String,
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    pub duration_ms: u64,
}

impl ExecResponse {
    pub fn rejected(request_id: impl Into<String>) -> Self {
        Self {
            request_id: request_id.into(),
            status: ExecStatus::Rejected,
            exit_code: None,
            stdout: String::new(),
            stderr: String::new(),
            duration_ms: 0,
        }
    }

    pub fn error(request_id: impl Into<String>, stderr: impl Into<String>, duration_ms: u64) -> Self {
        Self {
            request_id: request_id.into(),
            status: ExecStatus::Error,
            exit_code: None,
            stdout: String::new(),
            stderr: stderr.into(),
            duration_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryKind {
    Utterance,
    Execution,
    Reminder,
    /// Dialog-session events ingested from a remote client.
    Session,
}

impl HistoryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HistoryKind::Utterance => "utterance",
            HistoryKind::Execution => "execution",
            HistoryKind::Reminder => "reminder",
            HistoryKind::Session => "session",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub kind: HistoryKind,
    pub payload: serde_json::Value,
    pub seq: u64,
    pub at: i64,
}
