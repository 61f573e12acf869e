//! Bounded, recorded command execution shared by the HTTP handlers and the
//! server-side dispatcher.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde_json::json;
use tokio::sync::Semaphore;
use voxd_core::exec::{CommandExecutor, CommandPolicy, ExecRequest, ExecResponse, ExecutorError, HistoryKind};
use voxd_core::Clock;

use crate::history::History;

pub const DEFAULT_MAX_CONCURRENT: usize = 4;

/// Runs requests through the allow-list policy with at most `limit`
/// processes alive at once. Waiters are admitted in FIFO order.
pub struct ExecService {
    policy: Arc<CommandPolicy>,
    slots: Semaphore,
    history: Arc<History>,
}

impl ExecService {
    pub fn new(policy: Arc<CommandPolicy>, limit: usize, history: Arc<History>) -> Self {
        Self {
            policy,
            slots: Semaphore::new(limit.max(1)),
            history,
        }
    }

    pub fn policy(&self) -> &CommandPolicy {
        &self.policy
    }

    pub async fn execute(self: &Arc<Self>, req: ExecRequest) -> ExecResponse {
        let _permit = self.slots.acquire().await.expect("semaphore never closed");
        let this = self.clone();
        let resp = tokio::task::spawn_blocking(move || {
            let resp = this.policy.execute(&req);
            (req, resp)
        })
        .await;
        match resp {
            Ok((req, resp)) => {
                self.record(&req, &resp);
                resp
            }
            Err(e) => ExecResponse::error("", format!("runner task failed: {e}"), 0),
        }
    }

    /// Blocking variant for synchronous callers off the async workers.
    pub fn execute_blocking(&self, req: &ExecRequest) -> ExecResponse {
        let _permit = futures::executor::block_on(self.slots.acquire()).expect("semaphore never closed");
        let resp = self.policy.execute(req);
        self.record(req, &resp);
        resp
    }

    fn record(&self, req: &ExecRequest, resp: &ExecResponse) {
        self.history.append(
            HistoryKind::Execution,
            json!({ "request": req, "response": resp }),
        );
    }
}

/// [`CommandExecutor`] for skills dispatched inside the server process.
pub struct ServerExecutor {
    service: Arc<ExecService>,
    clock: Arc<dyn Clock>,
    next: AtomicU64,
}

impl ServerExecutor {
    pub fn new(service: Arc<ExecService>, clock: Arc<dyn Clock>) -> Self {
        Self {
            service,
            clock,
            next: AtomicU64::new(1),
        }
    }
}

impl CommandExecutor for ServerExecutor {
    fn execute(&self, command: &str) -> Result<ExecResponse, ExecutorError> {
        let req = ExecRequest {
            request_id: format!("server-{}", self.next.fetch_add(1, Ordering::Relaxed)),
            client_id: "server".into(),
            command: command.to_string(),
            issued_at: self.clock.now_ms(),
        };
        Ok(self.service.execute_blocking(&req))
    }
}
