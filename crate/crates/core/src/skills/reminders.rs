//! Reminder persistence on an append-only journal.
//!
//! Journal lines are `v1|<kind>|<id>|<timestamp>|<payload>` with kind one of
//! `create`, `fire`, `cancel`. A create payload is `<due_at>|<message>` where
//! the message runs to the end of the line. Current state is derived by
//! replaying every line; nothing is edited in place.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ReminderId(pub u64);

impl fmt::Display for ReminderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl FromStr for ReminderId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('r')
            .and_then(|n| n.parse().ok())
            .map(ReminderId)
            .ok_or_else(|| format!("bad reminder id `{s}`"))
    }
}

impl From<ReminderId> for String {
    fn from(id: ReminderId) -> Self {
        id.to_string()
    }
}

impl TryFrom<String> for ReminderId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReminderState {
    Pending,
    Fired,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reminder {
    pub id: ReminderId,
    pub created_at: DateTime<Utc>,
    pub due_at: DateTime<Utc>,
    pub message: String,
    pub state: ReminderState,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("reminder journal write failed: {0}")]
    Write(#[source] io::Error),
    #[error("cannot open reminder journal {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("reminder journal line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("no reminder {0}")]
    NoSuchReminder(ReminderId),
    #[error("reminder {id} is already {state:?}")]
    NotPending { id: ReminderId, state: ReminderState },
    #[error("due time precedes creation time")]
    DueBeforeCreated,
    #[error("message must be non-empty and single-line")]
    BadMessage,
}

/// Durable destination for journal lines.
pub trait JournalSink: Send {
    /// Returns only after the line is durable.
    fn append(&mut self, line: &str) -> io::Result<()>;
}

pub struct FileJournal {
    file: File,
}

impl JournalSink for FileJournal {
    fn append(&mut self, line: &str) -> io::Result<()> {
        self.file.write_all(format!("{line}\n").as_bytes())?;
        self.file.sync_data()
    }
}

/// Discards nothing and persists nothing; for tests and ephemeral sessions.
#[derive(Default)]
pub struct MemoryJournal {
    pub lines: Arc<Mutex<Vec<String>>>,
}

impl JournalSink for MemoryJournal {
    fn append(&mut self, line: &str) -> io::Result<()> {
        self.lines.lock().push(line.to_string());
        Ok(())
    }
}

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_ts(s: &str, line: usize) -> Result<DateTime<Utc>, StoreError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt {
            line,
            reason: format!("timestamp `{s}`: {e}"),
        })
}

struct Inner {
    sink: Box<dyn JournalSink>,
    reminders: BTreeMap<ReminderId, Reminder>,
    next_id: u64,
}

/// Single-writer reminder store. All mutations are serialized and journaled
/// before they take effect in memory.
pub struct ReminderStore {
    inner: Mutex<Inner>,
}

impl ReminderStore {
    /// Opens (creating if needed) a journal file and replays it. A torn final
    /// line left by a crash mid-write is discarded.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let open_err = |source| StoreError::Open {
            path: path.to_path_buf(),
            source,
        };
        let mut text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(open_err(e)),
        };
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            warn!(path = %path.display(), "dropping torn journal tail");
            text.truncate(keep);
            let f = OpenOptions::new().write(true).open(path).map_err(open_err)?;
            f.set_len(keep as u64).map_err(open_err)?;
            f.sync_data().map_err(open_err)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(open_err)?;
        Self::replay(&text, Box::new(FileJournal { file }))
    }

    /// Rebuilds state from journal text, then appends new records to `sink`.
    pub fn replay(text: &str, sink: Box<dyn JournalSink>) -> Result<Self, StoreError> {
        let mut reminders = BTreeMap::new();
        let mut next_id = 1;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            let corrupt = |reason: &str| StoreError::Corrupt {
                line: line_no,
                reason: reason.to_string(),
            };
            let mut parts = line.splitn(5, '|');
            let (Some(version), Some(kind), Some(id), Some(at), rest) =
                (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(corrupt("too few fields"));
            };
            if version != "v1" {
                return Err(corrupt("unsupported version"));
            }
            let id: ReminderId = id.parse().map_err(|e: String| corrupt(&e))?;
            let at = parse_ts(at, line_no)?;
            match kind {
                "create" => {
                    let (due, message) = rest
                        .and_then(|r| r.split_once('|'))
                        .ok_or_else(|| corrupt("create needs due time and message"))?;
                    let due_at = parse_ts(due, line_no)?;
                    if reminders.contains_key(&id) {
                        return Err(corrupt("duplicate create"));
                    }
                    next_id = next_id.max(id.0 + 1);
                    reminders.insert(
                        id,
                        Reminder {
                            id,
                            created_at: at,
                            due_at,
                            message: message.to_string(),
                            state: ReminderState::Pending,
                        },
                    );
                }
                "fire" | "cancel" => {
                    let r = reminders
                        .get_mut(&id)
                        .ok_or_else(|| corrupt("state change for unknown reminder"))?;
                    // a repeated terminal record is harmless; the first one wins
                    if r.state == ReminderState::Pending {
                        r.state = if kind == "fire" {
                            ReminderState::Fired
                        } else {
                            ReminderState::Cancelled
                        };
                    }
                }
                other => return Err(corrupt(&format!("unknown record kind `{other}`"))),
            }
        }
        Ok(Self {
            inner: Mutex::new(Inner {
                sink,
                reminders,
                next_id,
            }),
        })
    }

    pub fn in_memory() -> Self {
        Self::replay("", Box::<MemoryJournal>::default()).expect("empty journal replays")
    }

    /// Journals and then records a new pending reminder.
    pub fn create(
        &self,
        message: &str,
        due_at: DateTime<Utc>,
        now: DateTime<Utc>,
    ) -> Result<Reminder, StoreError> {
        if message.is_empty() || message.contains(['\n', '\r']) {
            return Err(StoreError::BadMessage);
        }
        if due_at < now {
            return Err(StoreError::DueBeforeCreated);
        }
        let mut inner = self.inner.lock();
        let id = ReminderId(inner.next_id);
        let line = format!("v1|create|{id}|{}|{}|{message}", ts(now), ts(due_at));
        inner.sink.append(&line).map_err(StoreError::Write)?;
        inner.next_id += 1;
        let reminder = Reminder {
            id,
            created_at: now,
            due_at,
            message: message.to_string(),
            state: ReminderState::Pending,
        };
        inner.reminders.insert(id, reminder.clone());
        Ok(reminder)
    }

    pub fn fire(&self, id: ReminderId, now: DateTime<Utc>) -> Result<Reminder, StoreError> {
        self.transition(id, now, "fire", ReminderState::Fired)
    }

    pub fn cancel(&self, id: ReminderId, now: DateTime<Utc>) -> Result<Reminder, StoreError> {
        self.transition(id, now, "cancel", ReminderState::Cancelled)
    }

    fn transition(
        &self,
        id: ReminderId,
        now: DateTime<Utc>,
        kind: &str,
        to: ReminderState,
    ) -> Result<Reminder, StoreError> {
        let mut inner = self.inner.lock();
        let state = inner
            .reminders
            .get(&id)
            .ok_or(StoreError::NoSuchReminder(id))?
            .state;
        if state != ReminderState::Pending {
            return Err(StoreError::NotPending { id, state });
        }
        inner
            .sink
            .append(&format!("v1|{kind}|{id}|{}|", ts(now)))
            .map_err(StoreError::Write)?;
        let r = inner.reminders.get_mut(&id).expect("checked above");
        r.state = to;
        Ok(r.clone())
    }

    pub fn get(&self, id: ReminderId) -> Option<Reminder> {
        self.inner.lock().reminders.get(&id).cloned()
    }

    pub fn all(&self) -> Vec<Reminder> {
        self.inner.lock().reminders.values().cloned().collect()
    }

    /// Pending reminders due at or before `now`, ordered by due time then id.
    pub fn due(&self, now: DateTime<Utc>) -> Vec<Reminder> {
        let mut due: Vec<Reminder> = self
            .inner
            .lock()
            .reminders
            .values()
            .filter(|r| r.state == ReminderState::Pending && r.due_at <= now)
            .cloned()
            .collect();
        due.sort_by_key(|r| (r.due_at, r.id));
        due
    }
}

/// Receives fired reminders for delivery, typically the speak queue.
pub trait Announcer: Send + Sync {
    fn announce(&self, reminder: &Reminder);
}

impl<F: Fn(&Reminder) + Send + Sync> Announcer for F {
    fn announce(&self, reminder: &Reminder) {
        self(reminder)
    }
}

/// Spoken form of a fired reminder.
pub fn announcement_text(reminder: &Reminder) -> String {
    if reminder.message == super::ALARM_MESSAGE {
        "alarm".to_string()
    } else {
        format!("reminder: {}", reminder.message)
    }
}

/// Fires every due reminder once. A reminder whose fire record cannot be
/// journaled stays pending and is neither announced nor returned.
pub fn reminder_tick(store: &ReminderStore, clock: &dyn Clock, announcer: &dyn Announcer) -> Vec<Reminder> {
    let now = clock.now().with_timezone(&Utc);
    let mut fired = Vec::new();
    for r in store.due(now) {
        match store.fire(r.id, now) {
            Ok(r) => {
                announcer.announce(&r);
                fired.push(r);
            }
            // cancelled concurrently
            Err(StoreError::NotPending { .. }) => {}
            Err(e) => warn!(id = %r.id, error = %e, "reminder stays pending"),
        }
    }
    fired
}

/// Periodic background driver for [`reminder_tick`].
pub struct ReminderTicker {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl ReminderTicker {
    pub const DEFAULT_PERIOD: Duration = Duration::from_secs(1);

    pub fn spawn(
        store: Arc<ReminderStore>,
        clock: Arc<dyn Clock>,
        announcer: Arc<dyn Announcer>,
        period: Duration,
    ) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::spawn(move || {
            while !flag.load(Ordering::Acquire) {
                reminder_tick(&store, clock.as_ref(), announcer.as_ref());
                thread::park_timeout(period);
            }
        });
        Self {
            stop,
            handle: Some(handle),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            h.thread().unpark();
            let _ = h.join();
        }
    }
}

impl Drop for ReminderTicker {
    fn drop(&mut self) {
        self.shutdown();
    }
}
