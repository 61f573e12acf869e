use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration as TimeDelta, FixedOffset, NaiveTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::clients::{ClientError, EncyclopediaClient, MailAdapter, NewsClient, WeatherClient};
use super::reminders::ReminderStore;
use super::{EmptyInput, SkillRegistry, SkillResult, ALARM_MESSAGE};
use crate::clock::Clock;
use crate::grammar::{normalize, Intent, IntentKind};

/// Longest encyclopedia summary read aloud, in characters.
pub const SUMMARY_LIMIT: usize = 500;
/// Headlines read per news request.
pub const HEADLINES: usize = 3;

/// RFC 3986 unreserved characters stay literal; everything else is encoded.
const QUERY: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

pub fn time_of_day(now: DateTime<FixedOffset>) -> SkillResult {
    let hhmm = now.format("%H:%M").to_string();
    SkillResult::ok(format!("it is {hhmm}"), hhmm)
}

pub fn weather(
    location: Option<&str>,
    default_location: &str,
    client: &dyn WeatherClient,
    now: DateTime<FixedOffset>,
) -> SkillResult {
    let location = location.unwrap_or(default_location);
    match client.current(location, now) {
        Ok(report) => {
            let text = format!(
                "it is {} degrees and {} in {}",
                report.temperature_c, report.conditions, report.location
            );
            SkillResult::ok(text.clone(), text)
        }
        Err(ClientError::NotFound) => SkillResult::user_error(
            format!("sorry, i have no weather report for {location}"),
            format!("no weather data for `{location}`"),
        ),
        Err(e) => SkillResult::backend_error(
            "sorry, the weather service is not available",
            e.to_string(),
        ),
    }
}

/// First paragraph, whitespace-collapsed and cut to [`SUMMARY_LIMIT`]
/// characters at a word boundary.
pub fn summarize(text: &str) -> String {
    let paragraph = text
        .trim()
        .split("\n\n")
        .next()
        .unwrap_or("")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    if paragraph.chars().count() <= SUMMARY_LIMIT {
        return paragraph;
    }
    let cut = paragraph
        .char_indices()
        .nth(SUMMARY_LIMIT)
        .map_or(paragraph.len(), |(i, _)| i);
    // the character at `cut` is the first one dropped
    let head = &paragraph[..cut];
    if paragraph[cut..].starts_with(' ') {
        return head.to_string();
    }
    match head.rfind(' ') {
        Some(space) => head[..space].to_string(),
        None => head.to_string(),
    }
}

pub fn wikipedia(query: &str, client: &dyn EncyclopediaClient) -> Result<SkillResult, EmptyInput> {
    if query.trim().is_empty() {
        return Err(EmptyInput);
    }
    Ok(match client.summary(query) {
        Ok(text) => {
            let summary = summarize(&text);
            if summary.is_empty() {
                SkillResult::user_error(
                    format!("sorry, i found nothing about {query}"),
                    format!("empty article for `{query}`"),
                )
            } else {
                SkillResult::ok(summary.clone(), summary)
            }
        }
        Err(ClientError::NotFound) => SkillResult::user_error(
            format!("sorry, i found nothing about {query}"),
            format!("no article for `{query}`"),
        ),
        Err(e) => SkillResult::backend_error(
            "sorry, the encyclopedia is not available",
            e.to_string(),
        ),
    })
}

pub fn search_url(search_base: &str, query: &str) -> String {
    format!("{search_base}{}", utf8_percent_encode(query, QUERY))
}

pub fn web_search(query: &str, search_base: &str, browser_command: &str) -> Result<SkillResult, EmptyInput> {
    if query.trim().is_empty() {
        return Err(EmptyInput);
    }
    let url = search_url(search_base, query);
    Ok(SkillResult::ok(format!("searching the web for {query}"), url.clone())
        .with_command(format!("{browser_command} {url}")))
}

pub fn play_media(item: Option<&str>, media_dir: &Path, player_command: &str) -> SkillResult {
    let mut names: Vec<String> = match std::fs::read_dir(media_dir) {
        Ok(entries) => entries
            .filter_map(Result::ok)
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .filter_map(|e| e.file_name().into_string().ok())
            .collect(),
        Err(e) => {
            return SkillResult::backend_error(
                "sorry, i cannot reach the media library",
                format!("{}: {e}", media_dir.display()),
            )
        }
    };
    names.sort();
    let chosen = match item {
        None => names.first(),
        Some(item) => {
            let needle = item.to_lowercase();
            names.iter().find(|n| n.to_lowercase().contains(&needle))
        }
    };
    match chosen {
        Some(name) => {
            let path = media_dir.join(name);
            SkillResult::ok(format!("playing {name}"), format!("playing {}", path.display()))
                .with_command(format!("{player_command} {}", path.display()))
        }
        None => SkillResult::user_error(
            "sorry, i found no matching media",
            match item {
                Some(item) => format!("no media matching `{item}`"),
                None => "media library is empty".to_string(),
            },
        ),
    }
}

pub fn open_application(app: &str, app_map: &BTreeMap<String, String>) -> Result<SkillResult, EmptyInput> {
    let Ok(name) = normalize(app) else {
        return Err(EmptyInput);
    };
    Ok(match app_map.get(&name) {
        Some(command) => SkillResult::ok(format!("opening {name}"), format!("opening {name}"))
            .with_command(command.clone()),
        None => SkillResult::user_error(
            format!("sorry, i do not know an application called {name}"),
            format!("unknown application `{name}`"),
        ),
    })
}

pub fn run_command(command: &str) -> Result<SkillResult, EmptyInput> {
    let command = command.trim();
    if command.is_empty() {
        return Err(EmptyInput);
    }
    Ok(SkillResult::ok(format!("running {command}"), format!("$ {command}")).with_command(command))
}

fn minutes_label(n: u32) -> String {
    if n == 1 {
        "1 minute".to_string()
    } else {
        format!("{n} minutes")
    }
}

pub fn set_reminder(
    message: &str,
    minutes: &str,
    store: &ReminderStore,
    now: DateTime<Utc>,
) -> Result<SkillResult, EmptyInput> {
    if message.trim().is_empty() {
        return Err(EmptyInput);
    }
    let parsed = minutes
        .bytes()
        .all(|b| b.is_ascii_digit())
        .then(|| minutes.parse::<u32>().ok())
        .flatten()
        .filter(|&m| m > 0);
    let Some(n) = parsed else {
        return Ok(SkillResult::user_error(
            "sorry, the delay must be a positive number of minutes, spoken as digits",
            format!("invalid delay `{minutes}`"),
        ));
    };
    let due = now + TimeDelta::minutes(i64::from(n));
    Ok(match store.create(message, due, now) {
        Ok(r) => SkillResult::ok(
            format!("okay, i will remind you to {message} in {}", minutes_label(n)),
            format!("reminder {} due {}: {message}", r.id, due.to_rfc3339()),
        ),
        Err(e) => SkillResult::backend_error("sorry, i could not save the reminder", e.to_string()),
    })
}

/// Accepts `HH MM`, `HHMM` or `HH` (normalization turns `07:30` into `07 30`).
pub fn parse_alarm_time(text: &str) -> Option<NaiveTime> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if !tokens.iter().all(|t| t.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    let (h, m) = match tokens.as_slice() {
        [hm] if hm.len() == 4 => (&hm[..2], &hm[2..]),
        [h] if h.len() <= 2 => (*h, "0"),
        [h, m] if h.len() <= 2 && m.len() <= 2 => (*h, *m),
        _ => return None,
    };
    NaiveTime::from_hms_opt(h.parse().ok()?, m.parse().ok()?, 0)
}

/// Next occurrence of `at` strictly after `now`, in `now`'s offset.
pub fn next_occurrence(at: NaiveTime, now: DateTime<FixedOffset>) -> DateTime<FixedOffset> {
    let today = now
        .date_naive()
        .and_time(at)
        .and_local_timezone(*now.offset())
        .single()
        .expect("fixed offsets are unambiguous");
    if today > now {
        today
    } else {
        today + TimeDelta::days(1)
    }
}

pub fn set_alarm(time: &str, store: &ReminderStore, now: DateTime<FixedOffset>) -> SkillResult {
    let Some(at) = parse_alarm_time(time) else {
        return SkillResult::user_error(
            "sorry, please say the alarm time as hours and minutes",
            format!("invalid alarm time `{time}`"),
        );
    };
    let due = next_occurrence(at, now);
    let hhmm = at.format("%H:%M");
    match store.create(ALARM_MESSAGE, due.with_timezone(&Utc), now.with_timezone(&Utc)) {
        Ok(r) => SkillResult::ok(
            format!("alarm set for {hhmm}"),
            format!("alarm {} due {}", r.id, due.to_rfc3339()),
        ),
        Err(e) => SkillResult::backend_error("sorry, i could not save the alarm", e.to_string()),
    }
}

pub fn check_mail(adapter: Option<&dyn MailAdapter>) -> SkillResult {
    let Some(adapter) = adapter else {
        return SkillResult::backend_error("sorry, mail is not set up", "no mail adapter configured");
    };
    match adapter.unread_count() {
        Ok(1) => SkillResult::ok("you have 1 unread message", "1 unread"),
        Ok(n) => SkillResult::ok(format!("you have {n} unread messages"), format!("{n} unread")),
        Err(e) => SkillResult::backend_error("sorry, mail is not available", e.to_string()),
    }
}

pub fn read_news(client: Option<&dyn NewsClient>) -> SkillResult {
    let Some(client) = client else {
        return SkillResult::backend_error("sorry, news is not set up", "no news feed configured");
    };
    match client.headlines() {
        Ok(titles) if titles.is_empty() => SkillResult::ok("there is no news right now", "no headlines"),
        Ok(titles) => {
            let top: Vec<&str> = titles.iter().take(HEADLINES).map(String::as_str).collect();
            SkillResult::ok(format!("here are the headlines. {}", top.join(". ")), top.join("\n"))
        }
        Err(e) => SkillResult::backend_error("sorry, news is not available", e.to_string()),
    }
}

/// Everything the built-in skills depend on.
#[derive(Clone)]
pub struct SkillsConfig {
    pub clock: Arc<dyn Clock>,
    pub weather: Arc<dyn WeatherClient>,
    pub encyclopedia: Arc<dyn EncyclopediaClient>,
    pub news: Option<Arc<dyn NewsClient>>,
    pub mail: Option<Arc<dyn MailAdapter>>,
    pub reminders: Arc<ReminderStore>,
    pub default_location: String,
    pub search_base: String,
    pub browser_command: String,
    pub media_dir: PathBuf,
    pub player_command: String,
    /// Keys are normalized application names.
    pub app_map: BTreeMap<String, String>,
}

fn precondition(_: EmptyInput) -> SkillResult {
    SkillResult::user_error("sorry, something is missing from that request", "empty argument")
}

/// A registry with a handler for every dispatchable intent kind.
pub fn builtin_registry(cfg: SkillsConfig) -> SkillRegistry {
    let cfg = Arc::new(cfg);
    let mut reg = SkillRegistry::new();
    let c = cfg.clone();
    reg.register(IntentKind::GetTime, Arc::new(move |_: &Intent| time_of_day(c.clock.now())));
    let c = cfg.clone();
    reg.register(
        IntentKind::Weather,
        Arc::new(move |i: &Intent| {
            weather(i.slot("location"), &c.default_location, c.weather.as_ref(), c.clock.now())
        }),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::WikipediaSearch,
        Arc::new(move |i: &Intent| {
            wikipedia(i.slot("query").unwrap_or(""), c.encyclopedia.as_ref()).unwrap_or_else(precondition)
        }),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::WebSearch,
        Arc::new(move |i: &Intent| {
            web_search(i.slot("query").unwrap_or(""), &c.search_base, &c.browser_command)
                .unwrap_or_else(precondition)
        }),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::PlayMedia,
        Arc::new(move |i: &Intent| play_media(i.slot("item"), &c.media_dir, &c.player_command)),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::OpenApplication,
        Arc::new(move |i: &Intent| {
            open_application(i.slot("app").unwrap_or(""), &c.app_map).unwrap_or_else(precondition)
        }),
    );
    reg.register(
        IntentKind::RunCommand,
        Arc::new(|i: &Intent| run_command(i.slot("command").unwrap_or("")).unwrap_or_else(precondition)),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::SetReminder,
        Arc::new(move |i: &Intent| {
            let now = c.clock.now().with_timezone(&Utc);
            set_reminder(i.slot("message").unwrap_or(""), i.slot("n").unwrap_or(""), &c.reminders, now)
                .unwrap_or_else(precondition)
        }),
    );
    let c = cfg.clone();
    reg.register(
        IntentKind::SetAlarm,
        Arc::new(move |i: &Intent| set_alarm(i.slot("time").unwrap_or(""), &c.reminders, c.clock.now())),
    );
    let c = cfg.clone();
    reg.register(IntentKind::CheckMail, Arc::new(move |_: &Intent| check_mail(c.mail.as_deref())));
    let c = cfg;
    reg.register(IntentKind::ReadNews, Arc::new(move |_: &Intent| read_news(c.news.as_deref())));
    reg.register(IntentKind::Exit, Arc::new(|_: &Intent| SkillResult::ok("goodbye", "goodbye")));
    reg
}
