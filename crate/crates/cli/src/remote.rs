//! HTTP adapters: the remote command executor, session event forwarding and
//! live external-service clients.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, FixedOffset};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::json;
use tracing::warn;
use voxd_core::dialog::{EventSink, SessionEvent};
use voxd_core::exec::{CommandExecutor, ExecRequest, ExecResponse, ExecutorError};
use voxd_core::skills::clients::{parse_feed, ClientError, EncyclopediaClient, NewsClient, WeatherClient, WeatherReport};
use voxd_core::skills::search_url;
use voxd_core::Clock;

const CLIENT_TIMEOUT: Duration = Duration::from_secs(5);

fn client(timeout: Duration) -> Client {
    Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client builds")
}

/// Sends commands to a remote execution server.
pub struct HttpExecutor {
    http: Client,
    base: String,
    client_id: String,
    session: String,
    clock: Arc<dyn Clock>,
    next: AtomicU64,
}

impl HttpExecutor {
    /// `exec_timeout` is the server-side limit; the HTTP wait allows a margin on top.
    pub fn new(base: &str, client_id: &str, exec_timeout: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            http: client(exec_timeout + CLIENT_TIMEOUT),
            base: base.to_string(),
            client_id: client_id.to_string(),
            session: uuid::Uuid::new_v4().simple().to_string(),
            clock,
            next: AtomicU64::new(1),
        }
    }
}

impl CommandExecutor for HttpExecutor {
    fn execute(&self, command: &str) -> Result<ExecResponse, ExecutorError> {
        let req = ExecRequest {
            request_id: format!("{}-{}", self.session, self.next.fetch_add(1, Ordering::Relaxed)),
            client_id: self.client_id.clone(),
            command: command.to_string(),
            issued_at: self.clock.now_ms(),
        };
        let resp = self
            .http
            .post(format!("{}/v1/execute", self.base))
            .json(&req)
            .send()
            .map_err(|e| ExecutorError(format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status();
        match status {
            StatusCode::OK | StatusCode::FORBIDDEN | StatusCode::INTERNAL_SERVER_ERROR => resp
                .json::<ExecResponse>()
                .map_err(|e| ExecutorError(format!("bad response body: {e}"))),
            _ => Err(ExecutorError(format!(
                "server answered {status}: {}",
                resp.text().unwrap_or_default()
            ))),
        }
    }
}

/// Forwards session events to the server history. Delivery failures are
/// logged and otherwise ignored.
pub struct HttpEventSink {
    http: Client,
    url: String,
    client_id: String,
}

impl HttpEventSink {
    pub fn new(base: &str, client_id: &str) -> Self {
        Self {
            http: client(CLIENT_TIMEOUT),
            url: format!("{base}/v1/events-ingest"),
            client_id: client_id.to_string(),
        }
    }
}

impl EventSink for HttpEventSink {
    fn emit(&mut self, event: &SessionEvent) {
        let body = json!({ "client_id": self.client_id, "event": event });
        match self.http.post(&self.url).json(&body).send() {
            Ok(r) if r.status().is_success() => {}
            Ok(r) => warn!(status = %r.status(), "event not accepted"),
            Err(e) => warn!(error = %e, "event not delivered"),
        }
    }
}

/// GET of a URL template with `{query}` replaced by the percent-encoded query.
struct TextSource {
    http: Client,
    template: String,
}

impl TextSource {
    fn new(template: &str) -> Self {
        Self {
            http: client(CLIENT_TIMEOUT),
            template: template.to_string(),
        }
    }

    fn fetch(&self, query: &str) -> Result<String, ClientError> {
        let url = match self.template.split_once("{query}") {
            Some((head, tail)) => format!("{}{tail}", search_url(head, query)),
            None => self.template.clone(),
        };
        let resp = self
            .http
            .get(&url)
            .send()
            .map_err(|e| ClientError::Unavailable(e.to_string()))?;
        match resp.status() {
            StatusCode::NOT_FOUND => Err(ClientError::NotFound),
            s if s.is_success() => resp.text().map_err(|e| ClientError::Unavailable(e.to_string())),
            s => Err(ClientError::Unavailable(format!("{url} answered {s}"))),
        }
    }
}

/// Weather from a service answering with temperature and conditions on two
/// lines, e.g. `+31°C` then `Clear`.
pub struct LiveWeather(TextSource);

impl LiveWeather {
    pub fn new(template: &str) -> Self {
        Self(TextSource::new(template))
    }
}

impl WeatherClient for LiveWeather {
    fn current(&self, location: &str, now: DateTime<FixedOffset>) -> Result<WeatherReport, ClientError> {
        let body = self.0.fetch(location)?;
        let cleaned: Vec<&str> = body
            .lines()
            .map(|l| l.trim().trim_start_matches('+').trim_end_matches("°C").trim())
            .collect();
        WeatherReport::parse(location, &cleaned.join("\n"), now)
    }
}

/// Page summaries; JSON bodies are read from their `extract` field.
pub struct LiveWiki(TextSource);

impl LiveWiki {
    pub fn new(template: &str) -> Self {
        Self(TextSource::new(template))
    }
}

impl EncyclopediaClient for LiveWiki {
    fn summary(&self, query: &str) -> Result<String, ClientError> {
        let body = self.0.fetch(query)?;
        match serde_json::from_str::<serde_json::Value>(&body) {
            Ok(v) => v["extract"]
                .as_str()
                .map(str::to_string)
                .ok_or(ClientError::NotFound),
            Err(_) => Ok(body),
        }
    }
}

/// Headlines from a plain-text feed, one per line.
pub struct LiveNews(TextSource);

impl LiveNews {
    pub fn new(url: &str) -> Self {
        Self(TextSource::new(url))
    }
}

impl NewsClient for LiveNews {
    fn headlines(&self) -> Result<Vec<String>, ClientError> {
        Ok(parse_feed(&self.0.fetch("")?))
    }
}
