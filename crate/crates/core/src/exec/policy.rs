use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::protocol::{ExecRequest, ExecResponse, ExecStatus};
use super::runner::CommandRunner;
use super::{CommandExecutor, ExecutorError};
use crate::clock::Clock;

pub const DEFAULT_ALLOW_LIST: &str = include_str!("../../data/default.allow");

/// Per-stream capture limit in bytes.
pub const OUTPUT_LIMIT: usize = 64 * 1024;
const TRUNCATION_MARKER: &str = "\n[output truncated]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllowListError {
    #[error("allow-list is empty")]
    Empty,
    #[error("line {line}: `{name}` is not a bare program name")]
    BadName { line: usize, name: String },
}

/// Program names the server may spawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowList {
    entries: BTreeSet<String>,
}

impl AllowList {
    /// One name per line, `#` comments, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, AllowListError> {
        let mut entries = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let name = raw.split('#').next().unwrap_or("").trim();
            if name.is_empty() {
                continue;
            }
            if name.contains(char::is_whitespace) || name.contains('/') || name.contains('\\') {
                return Err(AllowListError::BadName {
                    line: idx + 1,
                    name: name.to_string(),
                });
            }
            entries.insert(name.to_string());
        }
        Self::from_names(entries)
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, AllowListError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        if entries.is_empty() {
            return Err(AllowListError::Empty);
        }
        if let Some(bad) = entries
            .iter()
            .find(|n| n.is_empty() || n.contains(char::is_whitespace) || n.contains(['/', '\\']))
        {
            return Err(AllowListError::BadName {
                line: 0,
                name: bad.clone(),
            });
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, program: &str) -> bool {
        self.entries.contains(program)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// Program and arguments of `command` if its first token is permitted.
    pub fn check<'c>(&self, command: &'c str) -> Option<(&'c str, Vec<String>)> {
        let mut tokens = command.split_whitespace();
        let program = tokens.next()?;
        self.contains(program)
            .then(|| (program, tokens.map(str::to_string).collect()))
    }
}

/// Allow-list check plus execution with a timeout.
pub struct CommandPolicy {
    allow: AllowList,
    runner: Arc<dyn CommandRunner>,
    timeout: Duration,
}

impl CommandPolicy {
    pub fn new(allow: AllowList, runner: Arc<dyn CommandRunner>, timeout: Duration) -> Self {
        Self { allow, runner, timeout }
    }

    pub fn allow_list(&self) -> &AllowList {
        &self.allow
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Rejected commands never reach the runner.
    pub fn execute(&self, req: &ExecRequest) -> ExecResponse {
        let Some((program, args)) = self.allow.check(&req.command) else {
            return ExecResponse::rejected(&req.request_id);
        };
        let started = Instant::now();
        match self.runner.run(program, &args, self.timeout) {
            Ok(out) if out.timed_out => ExecResponse {
                request_id: req.request_id.clone(),
                status: ExecStatus::Error,
                exit_code: None,
                stdout: capture(&out.stdout),
                stderr: {
                    let mut s = capture(&out.stderr);
                    if !s.is_empty() && !s.ends_with('\n') {
                        s.push('\n');
                    }
                    s.push_str(&format!("timeout: killed after {} ms", self.timeout.as_millis()));
                    s
                },
                duration_ms: millis(out.duration),
            },
            Ok(out) => match out.exit_code {
                Some(code) => ExecResponse {
                    request_id: req.request_id.clone(),
                    status: ExecStatus::Ok,
                    exit_code: Some(code),
                    stdout: capture(&out.stdout),
                    stderr: capture(&out.stderr),
                    duration_ms: millis(out.duration),
                },
                None => ExecResponse {
                    request_id: req.request_id.clone(),
                    status: ExecStatus::Error,
                    exit_code: None,
                    stdout: capture(&out.stdout),
                    stderr: format!("{}terminated by signal", capture(&out.stderr)),
                    duration_ms: millis(out.duration),
                },
            },
            Err(e) => ExecResponse::error(&req.request_id, e.to_string(), millis(started.elapsed())),
        }
    }
}

fn millis(d: Duration) -> u64 {
    u64::try_from(d.as_millis()).unwrap_or(u64::MAX)
}

/// Lossy UTF-8 decode, truncated to [`OUTPUT_LIMIT`] bytes with a marker.
fn capture(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    if text.len() <= OUTPUT_LIMIT {
        return text.into_owned();
    }
    let mut cut = OUTPUT_LIMIT;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    let mut out = text[..cut].to_string();
    out.push_str(TRUNCATION_MARKER);
    out
}

/// Runs commands in-process through the same policy the server uses.
pub struct LocalExecutor {
    policy: Arc<CommandPolicy>,
    client_id: String,
    clock: Arc<dyn Clock>,
    next_id: AtomicU64,
}

impl LocalExecutor {
    pub fn new(policy: Arc<CommandPolicy>, client_id: impl Into<String>, clock: Arc<dyn Clock>) -> Self {
        Self {
            policy,
            client_id: client_id.into(),
            clock,
            next_id: AtomicU64::new(1),
        }
    }
}

impl CommandExecutor for LocalExecutor {
    fn execute(&self, command: &str) -> Result<ExecResponse, ExecutorError> {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let req = ExecRequest {
            request_id: format!("local-{n}"),
            client_id: self.client_id.clone(),
            command: command.to_string(),
            issued_at: self.clock.now_ms(),
        };
        Ok(self.policy.execute(&req))
    }
}
