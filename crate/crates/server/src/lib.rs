//! HTTP execution server: allow-listed command execution, typed utterances,
//! history and the live event stream for the web console.

pub mod exec;
pub mod history;

use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio_stream::wrappers::UnboundedReceiverStream;
use tower_http::services::ServeDir;
use tracing::{info, warn};
use voxd_core::dialog::SessionEvent;
use voxd_core::exec::{ExecRequest, ExecStatus, HistoryKind, HistoryRecord};
use voxd_core::grammar::{IntentKind, Source};
use voxd_core::skills::reminders::{announcement_text, Announcer, Reminder};
use voxd_core::skills::{DispatchError, Dispatcher, SkillResult, SkillStatus};
use voxd_core::{Clock, Grammar, Utterance};

pub use exec::{ExecService, ServerExecutor, DEFAULT_MAX_CONCURRENT};
pub use history::{History, Subscription, DEFAULT_CAPACITY};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8746";
pub const DEFAULT_REPLAY_COUNT: usize = 50;
pub const DEFAULT_HEARTBEAT: Duration = Duration::from_secs(15);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub replay_count: usize,
    pub heartbeat: Duration,
    /// Static console bundle; a placeholder page is served when absent.
    pub console_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            replay_count: DEFAULT_REPLAY_COUNT,
            heartbeat: DEFAULT_HEARTBEAT,
            console_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("address {addr} unavailable: {source}")]
    AddressInUse {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Typed-utterance pipeline run server-side.
pub struct Assistant {
    pub grammar: Arc<Grammar>,
    pub dispatcher: Arc<Dispatcher>,
}

#[derive(Clone)]
pub struct AppState {
    pub exec: Arc<ExecService>,
    pub history: Arc<History>,
    pub assistant: Option<Arc<Assistant>>,
    pub clock: Arc<dyn Clock>,
    config: Arc<ServerConfig>,
    shutdown: watch::Receiver<bool>,
}

/// Appends fired reminders to the history.
pub struct HistoryAnnouncer(pub Arc<History>);

impl Announcer for HistoryAnnouncer {
    fn announce(&self, reminder: &Reminder) {
        self.0.append(
            HistoryKind::Reminder,
            json!({
                "id": reminder.id,
                "message": reminder.message,
                "due_at": reminder.due_at,
                "text": announcement_text(reminder),
            }),
        );
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn execute(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ExecRequest = parse_body(&body)?;
    req.validate()
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let resp = state.exec.execute(req).await;
    let code = match resp.status {
        ExecStatus::Ok => StatusCode::OK,
        ExecStatus::Rejected => StatusCode::FORBIDDEN,
        ExecStatus::Error => StatusCode::INTERNAL_SERVER_ERROR,
    };
    Ok((code, Json(resp)).into_response())
}

#[derive(Deserialize)]
struct UtteranceBody {
    #[serde(default = "default_client")]
    client_id: String,
    text: String,
}

fn default_client() -> String {
    "console".into()
}

#[derive(Serialize)]
struct UtteranceReply {
    kind: IntentKind,
    slots: std::collections::BTreeMap<String, String>,
    spoken_text: String,
    display_text: String,
    status: SkillStatus,
    seq: u64,
}

async fn utterance(State(state): State<AppState>, body: Bytes) -> Result<Json<UtteranceReply>, ApiError> {
    let body: UtteranceBody = parse_body(&body)?;
    let Some(assistant) = state.assistant.clone() else {
        return Err(ApiError(StatusCode::SERVICE_UNAVAILABLE, "no assistant configured".into()));
    };
    let utt = Utterance::new(&body.text, 1.0, Source::Typed, state.clock.now_ms())
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let (intent, result) = tokio::task::spawn_blocking(move || {
        let intent = assistant.grammar.parse(&utt);
        let result = match assistant.dispatcher.dispatch(&intent) {
            Ok(d) => d.result,
            Err(DispatchError::UnknownIntent) => SkillResult::user_error(
                "sorry, i did not understand that",
                format!("no rule matches \"{}\"", utt.text()),
            ),
            Err(e) => SkillResult::backend_error("sorry, something went wrong", e.to_string()),
        };
        (intent, result)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let record = state.history.append(
        HistoryKind::Utterance,
        json!({
            "client_id": body.client_id,
            "text": body.text,
            "intent": intent,
            "result": result,
        }),
    );
    Ok(Json(UtteranceReply {
        kind: intent.kind,
        slots: intent.slots,
        spoken_text: result.spoken_text,
        display_text: result.display_text,
        status: result.status,
        seq: record.seq,
    }))
}

#[derive(Deserialize)]
struct IngestBody {
    client_id: String,
    event: SessionEvent,
}

async fn ingest(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: IngestBody = parse_body(&body)?;
    let record = state.history.append(
        HistoryKind::Session,
        json!({ "client_id": body.client_id, "event": body.event }),
    );
    Ok((StatusCode::ACCEPTED, Json(json!({ "seq": record.seq }))).into_response())
}

#[derive(Deserialize)]
struct HistoryQuery {
    limit: Option<String>,
}

async fn history(
    State(state): State<AppState>,
    Query(q): Query<HistoryQuery>,
) -> Result<Json<Vec<HistoryRecord>>, ApiError> {
    let cap = state.history.capacity();
    let limit = match q.limit {
        None => cap,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=cap).contains(n))
            .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("limit must be in 1..={cap}")))?,
    };
    Ok(Json(state.history.recent(limit)))
}

fn sse_event(record: &HistoryRecord) -> Event {
    Event::default()
        .event(record.kind.as_str())
        .data(serde_json::to_string(record).expect("history records serialize"))
}

async fn events(State(state): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let Subscription { replay, live } = state.history.subscribe(state.config.replay_count);
    let mut shutdown = state.shutdown.clone();
    let stop = async move {
        let _ = shutdown.wait_for(|s| *s).await;
    };
    let stream = futures::stream::iter(replay)
        .chain(UnboundedReceiverStream::new(live))
        .map(|r| Ok(sse_event(&r)))
        .take_until(Box::pin(stop));
    Sse::new(stream).keep_alive(KeepAlive::new().interval(state.config.heartbeat).text("heartbeat"))
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>voxd</title></head>\n<body><h1>voxd</h1><p>No console bundle configured. Event stream at <a href=\"/v1/events\">/v1/events</a>, history at <a href=\"/v1/history\">/v1/history</a>.</p></body></html>\n";

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/v1/execute", post(execute))
        .route("/v1/utterance", post(utterance))
        .route("/v1/events-ingest", post(ingest))
        .route("/v1/history", get(history))
        .route("/v1/events", get(events))
        .route("/healthz", get(|| async { "ok" }));
    let api = match &state.config.console_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { ([(header::CACHE_CONTROL, "no-store")], Html(PLACEHOLDER)) })),
    };
    api.with_state(state)
}

/// A bound server ready to run.
pub struct Server {
    listener: TcpListener,
    state: AppState,
    shutdown_tx: watch::Sender<bool>,
}

impl Server {
    pub async fn bind(
        addr: SocketAddr,
        config: ServerConfig,
        exec: Arc<ExecService>,
        history: Arc<History>,
        assistant: Option<Arc<Assistant>>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServerError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServerError::AddressInUse { addr, source })?;
        let (shutdown_tx, shutdown) = watch::channel(false);
        Ok(Self {
            listener,
            state: AppState {
                exec,
                history,
                assistant,
                clock,
                config: Arc::new(config),
                shutdown,
            },
            shutdown_tx,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until `signal` resolves, then closes event streams and waits
    /// for in-flight requests to finish.
    pub async fn run(self, signal: impl Future<Output = ()> + Send + 'static) -> Result<(), ServerError> {
        let addr = self.local_addr();
        let app = router(self.state);
        let tx = self.shutdown_tx;
        info!(%addr, "listening");
        axum::serve(self.listener, app)
            .with_graceful_shutdown(async move {
                signal.await;
                info!("shutting down");
                let _ = tx.send(true);
            })
            .await?;
        Ok(())
    }
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        if let Err(e) = tokio::signal::ctrl_c().await {
            warn!(error = %e, "ctrl-c handler unavailable");
            futures::future::pending::<()>().await;
        }
    };
    #[cfg(unix)]
    {
        let mut term = match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => return ctrl_c.await,
        };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}
