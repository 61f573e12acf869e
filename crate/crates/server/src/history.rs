//! Capacity-bounded, seq-numbered event store with live subscribers.

use std::collections::VecDeque;
use std::sync::Arc;

use parking_lot::Mutex;
use serde_json::Value;
use tokio::sync::mpsc;
use voxd_core::exec::{HistoryKind, HistoryRecord};
use voxd_core::Clock;

pub const DEFAULT_CAPACITY: usize = 1000;

struct Inner {
    ring: VecDeque<HistoryRecord>,
    next_seq: u64,
    subscribers: Vec<mpsc::UnboundedSender<HistoryRecord>>,
}

/// Appends are serialized under one lock, which also covers subscriber
/// registration, so a new subscriber sees each record exactly once: either
/// in its replay snapshot or on its channel.
pub struct History {
    inner: Mutex<Inner>,
    capacity: usize,
    clock: Arc<dyn Clock>,
}

pub struct Subscription {
    pub replay: Vec<HistoryRecord>,
    pub live: mpsc::UnboundedReceiver<HistoryRecord>,
}

impl History {
    pub fn new(capacity: usize, clock: Arc<dyn Clock>) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            inner: Mutex::new(Inner {
                ring: VecDeque::with_capacity(capacity),
                next_seq: 1,
                subscribers: Vec::new(),
            }),
            capacity,
            clock,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn append(&self, kind: HistoryKind, payload: Value) -> HistoryRecord {
        let at = self.clock.now_ms();
        let mut inner = self.inner.lock();
        let record = HistoryRecord {
            kind,
            payload,
            seq: inner.next_seq,
            at,
        };
        inner.next_seq += 1;
        if inner.ring.len() == self.capacity {
            inner.ring.pop_front();
        }
        inner.ring.push_back(record.clone());
        inner.subscribers.retain(|tx| tx.send(record.clone()).is_ok());
        record
    }

    /// Most recent `limit` records in ascending seq.
    pub fn recent(&self, limit: usize) -> Vec<HistoryRecord> {
        let inner = self.inner.lock();
        let skip = inner.ring.len().saturating_sub(limit);
        inner.ring.iter().skip(skip).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subscribe(&self, replay_count: usize) -> Subscription {
        let (tx, live) = mpsc::unbounded_channel();
        let mut inner = self.inner.lock();
        let skip = inner.ring.len().saturating_sub(replay_count);
        let replay = inner.ring.iter().skip(skip).cloned().collect();
        inner.subscribers.push(tx);
        Subscription { replay, live }
    }

    pub fn subscriber_count(&self) -> usize {
        let mut inner = self.inner.lock();
        inner.subscribers.retain(|tx| !tx.is_closed());
        inner.subscribers.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use voxd_core::SystemClock;

    fn history(cap: usize) -> History {
        History::new(cap, Arc::new(SystemClock))
    }

    #[test]
    fn evicts_oldest_and_keeps_seq() {
        let h = history(3);
        for i in 0..5 {
            h.append(HistoryKind::Execution, json!(i));
        }
        let seqs: Vec<u64> = h.recent(10).iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![3, 4, 5]);
        assert_eq!(h.recent(2).iter().map(|r| r.seq).collect::<Vec<_>>(), vec![4, 5]);
        assert!(history(1).recent(5).is_empty());
    }

    #[test]
    fn subscription_has_no_gap_or_overlap() {
        let h = history(10);
        h.append(HistoryKind::Reminder, json!("a"));
        let mut sub = h.subscribe(5);
        h.append(HistoryKind::Reminder, json!("b"));
        assert_eq!(sub.replay.len(), 1);
        assert_eq!(sub.live.try_recv().unwrap().seq, 2);
        assert!(sub.live.try_recv().is_err());
        drop(sub);
        h.append(HistoryKind::Reminder, json!("c"));
        assert_eq!(h.subscriber_count(), 0);
    }

    #[test]
    fn concurrent_appends_get_distinct_increasing_seq() {
        let h = Arc::new(history(1000));
        let mut sub = h.subscribe(0);
        let threads: Vec<_> = (0..8)
            .map(|_| {
                let h = h.clone();
                std::thread::spawn(move || {
                    (0..100)
                        .map(|i| h.append(HistoryKind::Execution, json!(i)).seq)
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for t in threads {
            let seqs = t.join().unwrap();
            assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
        let mut delivered = Vec::new();
        while let Ok(r) = sub.live.try_recv() {
            delivered.push(r.seq);
        }
        assert_eq!(delivered, (1..=800).collect::<Vec<_>>());
    }
}
