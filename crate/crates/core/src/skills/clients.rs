//! External-service client interfaces and their fixture-file implementations.

use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("not found")]
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherReport {
    pub location: String,
    pub temperature_c: f64,
    pub conditions: String,
    pub fetched_at: DateTime<FixedOffset>,
}

impl WeatherReport {
    pub const MIN_C: f64 = -90.0;
    pub const MAX_C: f64 = 60.0;

    /// Parses the two-line text format: temperature in Celsius, then conditions.
    pub fn parse(location: &str, text: &str, fetched_at: DateTime<FixedOffset>) -> Result<Self, ClientError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let temperature_c: f64 = lines
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| ClientError::Unavailable("malformed weather temperature".into()))?;
        if !(Self::MIN_C..=Self::MAX_C).contains(&temperature_c) {
            return Err(ClientError::Unavailable(format!(
                "implausible temperature {temperature_c}"
            )));
        }
        let conditions = lines
            .next()
            .ok_or_else(|| ClientError::Unavailable("missing weather conditions".into()))?
            .to_string();
        Ok(Self {
            location: location.to_string(),
            temperature_c,
            conditions,
            fetched_at,
        })
    }
}

pub trait WeatherClient: Send + Sync {
    fn current(&self, location: &str, now: DateTime<FixedOffset>) -> Result<WeatherReport, ClientError>;
}

pub trait EncyclopediaClient: Send + Sync {
    /// Summary text for `query`; may hold several paragraphs.
    fn summary(&self, query: &str) -> Result<String, ClientError>;
}

pub trait NewsClient: Send + Sync {
    fn headlines(&self) -> Result<Vec<String>, ClientError>;
}

pub trait MailAdapter: Send + Sync {
    fn unread_count(&self) -> Result<usize, ClientError>;
}

/// Lowercase ASCII alphanumerics with single `-` between words.
pub fn slugify(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

/// Parses a feed body: one title per line.
pub fn parse_feed(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn read_fixture(root: &Path, rel: &Path) -> Result<String, ClientError> {
    if !root.is_dir() {
        return Err(ClientError::Unavailable(format!(
            "fixture directory {} missing",
            root.display()
        )));
    }
    let path = root.join(rel);
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ClientError::NotFound),
        Err(e) => Err(ClientError::Unavailable(format!("{}: {e}", path.display()))),
    }
}

/// Reads `weather/<location>.txt`, `wiki/<slug>.txt` and `news/feed.txt`
/// under one fixture root.
#[derive(Debug, Clone)]
pub struct Fixtures {
    root: PathBuf,
}

impl Fixtures {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl WeatherClient for Fixtures {
    fn current(&self, location: &str, now: DateTime<FixedOffset>) -> Result<WeatherReport, ClientError> {
        let rel = Path::new("weather").join(format!("{}.txt", slugify(location)));
        WeatherReport::parse(location, &read_fixture(&self.root, &rel)?, now)
    }
}

impl EncyclopediaClient for Fixtures {
    fn summary(&self, query: &str) -> Result<String, ClientError> {
        read_fixture(&self.root, &Path::new("wiki").join(format!("{}.txt", slugify(query))))
    }
}

impl NewsClient for Fixtures {
    fn headlines(&self) -> Result<Vec<String>, ClientError> {
        match read_fixture(&self.root, Path::new("news/feed.txt")) {
            Err(ClientError::NotFound) => Err(ClientError::Unavailable("no news feed fixture".into())),
            other => other.map(|t| parse_feed(&t)),
        }
    }
}

/// Mail adapter with a configured unread count.
#[derive(Debug, Clone, Copy)]
pub struct MockMail {
    pub unread: usize,
}

impl MailAdapter for MockMail {
    fn unread_count(&self) -> Result<usize, ClientError> {
        Ok(self.unread)
    }
}
