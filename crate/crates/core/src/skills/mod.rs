//! Skill registry, dispatcher and the built-in skills.

mod builtin;
pub mod clients;
pub mod reminders;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{CommandExecutor, ExecResponse, ExecStatus};
use crate::grammar::{Intent, IntentKind};

pub use builtin::*;

/// Reminder message used for alarms.
pub const ALARM_MESSAGE: &str = "alarm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillStatus {
    Ok,
    UserError,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillResult {
    pub spoken_text: String,
    pub display_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_command: Option<String>,
    pub status: SkillStatus,
}

impl SkillResult {
    pub fn ok(spoken: impl Into<String>, display: impl Into<String>) -> Self {
        Self {
            spoken_text: spoken.into(),
            display_text: display.into(),
            remote_command: None,
            status: SkillStatus::Ok,
        }
    }

    pub fn user_error(spoken: impl Into<String>, display: impl Into<String>) -> Self {
        Self {
            status: SkillStatus::UserError,
            ..Self::ok(spoken, display)
        }
    }

    pub fn backend_error(spoken: impl Into<String>, display: impl Into<String>) -> Self {
        Self {
            status: SkillStatus::BackendError,
            ..Self::ok(spoken, display)
        }
    }

    pub fn with_command(mut self, command: impl Into<String>) -> Self {
        self.remote_command = Some(command.into());
        self
    }
}

/// Returned by skill entry points called with an empty required argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("required input is empty")]
pub struct EmptyInput;

pub trait Skill: Send + Sync {
    fn handle(&self, intent: &Intent) -> SkillResult;
}

impl<F: Fn(&Intent) -> SkillResult + Send + Sync> Skill for F {
    fn handle(&self, intent: &Intent) -> SkillResult {
        self(intent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("no skill registered for {0}")]
    NoHandler(IntentKind),
    #[error("unknown intents are not dispatched")]
    UnknownIntent,
}

#[derive(Default, Clone)]
pub struct SkillRegistry {
    handlers: BTreeMap<IntentKind, Arc<dyn Skill>>,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kind: IntentKind, skill: Arc<dyn Skill>) -> &mut Self {
        self.handlers.insert(kind, skill);
        self
    }

    pub fn get(&self, kind: IntentKind) -> Option<&Arc<dyn Skill>> {
        self.handlers.get(&kind)
    }

    /// Dispatchable kinds with no handler.
    pub fn missing(&self) -> Vec<IntentKind> {
        IntentKind::dispatchable()
            .filter(|k| !self.handlers.contains_key(k))
            .collect()
    }

    /// Startup check that every non-Unknown kind has a handler.
    pub fn ensure_total(&self) -> Result<(), DispatchError> {
        match self.missing().first() {
            Some(&k) => Err(DispatchError::NoHandler(k)),
            None => Ok(()),
        }
    }
}

/// Outcome of one dispatch, including the command execution if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub intent: Intent,
    pub result: SkillResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecResponse>,
}

type DispatchHook = Box<dyn Fn(&Dispatch) + Send + Sync>;

const DISPATCH_LOG: usize = 1000;

/// Routes intents to skills and forwards their commands to an executor.
pub struct Dispatcher {
    registry: SkillRegistry,
    executor: Option<Arc<dyn CommandExecutor>>,
    log: Mutex<VecDeque<Dispatch>>,
    hooks: Vec<DispatchHook>,
}

impl Dispatcher {
    pub fn new(registry: SkillRegistry, executor: Option<Arc<dyn CommandExecutor>>) -> Self {
        Self {
            registry,
            executor,
            log: Mutex::new(VecDeque::new()),
            hooks: Vec::new(),
        }
    }

    /// Called after every dispatch, in registration order.
    pub fn on_dispatch(&mut self, hook: impl Fn(&Dispatch) + Send + Sync + 'static) {
        self.hooks.push(Box::new(hook));
    }

    pub fn registry(&self) -> &SkillRegistry {
        &self.registry
    }

    pub fn dispatch(&self, intent: &Intent) -> Result<Dispatch, DispatchError> {
        if intent.is_unknown() {
            return Err(DispatchError::UnknownIntent);
        }
        let skill = self
            .registry
            .get(intent.kind)
            .ok_or(DispatchError::NoHandler(intent.kind))?;
        let mut result = skill.handle(intent);
        let mut execution = None;
        if let (Some(command), SkillStatus::Ok) = (result.remote_command.clone(), result.status) {
            match &self.executor {
                None => {
                    result.status = SkillStatus::BackendError;
                    result.spoken_text = "sorry, i cannot run commands right now".into();
                    result.display_text = format!("no executor configured for `{command}`");
                }
                Some(exec) => match exec.execute(&command) {
                    Ok(resp) => {
                        fold_execution(&mut result, &command, &resp);
                        execution = Some(resp);
                    }
                    Err(e) => {
                        result.status = SkillStatus::BackendError;
                        result.spoken_text = "sorry, the command server is unreachable".into();
                        result.display_text = e.to_string();
                    }
                },
            }
        }
        let dispatch = Dispatch {
            intent: intent.clone(),
            result,
            execution,
        };
        {
            let mut log = self.log.lock();
            if log.len() == DISPATCH_LOG {
                log.pop_front();
            }
            log.push_back(dispatch.clone());
        }
        for hook in &self.hooks {
            hook(&dispatch);
        }
        Ok(dispatch)
    }

    /// Most recent dispatches, oldest first.
    pub fn history(&self) -> Vec<Dispatch> {
        self.log.lock().iter().cloned().collect()
    }
}

fn fold_execution(result: &mut SkillResult, command: &str, resp: &ExecResponse) {
    match (resp.status, resp.exit_code) {
        (ExecStatus::Ok, Some(0)) => {
            let out = resp.stdout.trim_end();
            if !out.is_empty() {
                result.display_text = format!("{}\n{out}", result.display_text);
            }
        }
        (ExecStatus::Ok, code) => {
            result.status = SkillStatus::BackendError;
            result.spoken_text = "the command failed".into();
            result.display_text = format!(
                "`{command}` exited with code {}\n{}",
                code.map_or_else(|| "?".to_string(), |c| c.to_string()),
                resp.stderr.trim_end()
            );
        }
        (ExecStatus::Rejected, _) => {
            result.status = SkillStatus::UserError;
            result.spoken_text = "sorry, that command is not allowed".into();
            result.display_text = format!("rejected: `{command}`");
        }
        (ExecStatus::Error, _) => {
            result.status = SkillStatus::BackendError;
            result.spoken_text = "sorry, the command did not complete".into();
            result.display_text = format!("error: `{command}`\n{}", resp.stderr.trim_end());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecutorError;

    struct Canned(ExecResponse);

    impl CommandExecutor for Canned {
        fn execute(&self, _: &str) -> Result<ExecResponse, ExecutorError> {
            Ok(self.0.clone())
        }
    }

    fn registry_with(kind: IntentKind, result: SkillResult) -> SkillRegistry {
        let mut reg = SkillRegistry::new();
        reg.register(kind, Arc::new(move |_: &Intent| result.clone()));
        reg
    }

    #[test]
    fn missing_handlers_are_reported() {
        let reg = registry_with(IntentKind::Exit, SkillResult::ok("bye", "bye"));
        assert_eq!(reg.missing().len(), 11);
        assert!(matches!(reg.ensure_total(), Err(DispatchError::NoHandler(_))));
        let d = Dispatcher::new(reg, None);
        assert_eq!(
            d.dispatch(&Intent::with_slots(IntentKind::GetTime, [])),
            Err(DispatchError::NoHandler(IntentKind::GetTime))
        );
        assert_eq!(d.dispatch(&Intent::unknown()), Err(DispatchError::UnknownIntent));
    }

    #[test]
    fn rejected_execution_is_user_error() {
        let reg = registry_with(
            IntentKind::RunCommand,
            SkillResult::ok("running", "running rm").with_command("rm -rf /"),
        );
        let d = Dispatcher::new(reg, Some(Arc::new(Canned(ExecResponse::rejected("x")))));
        let out = d
            .dispatch(&Intent::with_slots(IntentKind::RunCommand, [("command", "rm -rf /")]))
            .unwrap();
        assert_eq!(out.result.status, SkillStatus::UserError);
        assert!(out.result.display_text.contains("rejected"));
        assert_eq!(out.execution.unwrap().status, ExecStatus::Rejected);
        assert_eq!(d.history().len(), 1);
    }

    #[test]
    fn successful_output_is_displayed() {
        let reg = registry_with(
            IntentKind::RunCommand,
            SkillResult::ok("running echo", "$ echo hi").with_command("echo hi"),
        );
        let resp = ExecResponse {
            request_id: "x".into(),
            status: ExecStatus::Ok,
            exit_code: Some(0),
            stdout: "hi\n".into(),
            stderr: String::new(),
            duration_ms: 1,
        };
        let mut d = Dispatcher::new(reg, Some(Arc::new(Canned(resp))));
        let seen = Arc::new(Mutex::new(0));
        let counter = seen.clone();
        d.on_dispatch(move |_| *counter.lock() += 1);
        let out = d
            .dispatch(&Intent::with_slots(IntentKind::RunCommand, [("command", "echo hi")]))
            .unwrap();
        assert_eq!(out.result.status, SkillStatus::Ok);
        assert_eq!(out.result.display_text, "$ echo hi\nhi");
        assert_eq!(*seen.lock(), 1);
    }

    #[test]
    fn command_without_executor_is_backend_error() {
        let reg = registry_with(
            IntentKind::OpenApplication,
            SkillResult::ok("opening", "opening").with_command("gedit"),
        );
        let d = Dispatcher::new(reg, None);
        let out = d
            .dispatch(&Intent::with_slots(IntentKind::OpenApplication, [("app", "editor")]))
            .unwrap();
        assert_eq!(out.result.status, SkillStatus::BackendError);
    }
}
