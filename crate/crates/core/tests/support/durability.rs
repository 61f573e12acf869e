//! Randomized crash-restart schedules against a file-backed reminder store.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::Mutex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use voxd_core::skills::reminders::{reminder_tick, Reminder, ReminderId, ReminderState, ReminderStore};
use voxd_core::{Clock, ManualClock};

/// Creations, ticks and crashes interleaved at random. A crash drops the
/// store without shutdown and may leave a torn partial line. After the last
/// crash the store stays down past every due time, then restarts; every
/// acknowledged reminder must have been announced exactly once.
pub fn run_schedule(seed: u64) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("reminders.journal");
    let mut rng = StdRng::seed_from_u64(seed);
    let clock = ManualClock::parse("2026-03-01T09:00:00Z").unwrap();
    let announced: Arc<Mutex<BTreeMap<ReminderId, u32>>> = Arc::default();
    let mut acknowledged: BTreeMap<ReminderId, DateTime<Utc>> = BTreeMap::new();
    let open = || ReminderStore::open(&path).map_err(|e| format!("seed {seed}: reopen: {e}"));
    let mut store = open()?;
    let announce = {
        let announced = announced.clone();
        move |r: &Reminder| *announced.lock().entry(r.id).or_default() += 1
    };

    for step in 0..rng.gen_range(20..80) {
        match rng.gen_range(0..10) {
            0..=3 => {
                let now = clock.now().with_timezone(&Utc);
                let due = now + TimeDelta::seconds(rng.gen_range(0..300));
                let r = store
                    .create(&format!("task {step}"), due, now)
                    .map_err(|e| e.to_string())?;
                acknowledged.insert(r.id, due);
            }
            4..=6 => {
                clock.advance(TimeDelta::seconds(rng.gen_range(1..90)));
                reminder_tick(&store, &clock, &announce);
            }
            7 => {
                drop(store);
                if rng.gen_bool(0.5) {
                    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
                    f.write_all(b"v1|create|r999|2026-03-01T09:").unwrap();
                }
                store = open()?;
            }
            _ => clock.advance(TimeDelta::seconds(rng.gen_range(1..30))),
        }
    }
    drop(store);
    clock.advance(TimeDelta::seconds(400));
    let store = open()?;
    reminder_tick(&store, &clock, &announce);
    reminder_tick(&store, &clock, &announce);

    let announced = announced.lock();
    let journal = std::fs::read_to_string(&path).unwrap();
    for id in acknowledged.keys() {
        if announced.get(id) != Some(&1) {
            return Err(format!("seed {seed}: {id} announced {:?} times", announced.get(id)));
        }
        if store.get(*id).map(|r| r.state) != Some(ReminderState::Fired) {
            return Err(format!("seed {seed}: {id} not marked fired"));
        }
        let fires = journal
            .lines()
            .filter(|l| l.starts_with(&format!("v1|fire|{id}|")))
            .count();
        if fires != 1 {
            return Err(format!("seed {seed}: {id} has {fires} fire records"));
        }
    }
    if announced.len() != acknowledged.len() {
        return Err(format!("seed {seed}: announcement for an unacknowledged reminder"));
    }
    Ok(())
}
