//! Layered configuration: flag > `VOXD_<KEY>` environment variable > config
//! file > built-in default, resolved key by key.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, FixedOffset};
use thiserror::Error;
use voxd_core::dialog::SessionConfig;

pub const ENV_PREFIX: &str = "VOXD_";

/// Every recognized scalar key with its default. `None` means unset.
const KEYS: &[(&str, Option<&str>)] = &[
    ("listen_timeout_ms", Some("5000")),
    ("max_retries", Some("3")),
    ("min_confidence", Some("0.0")),
    ("voice", Some("female")),
    ("reprompt_text", Some("please say that again")),
    ("abort_text", Some("sorry, i could not understand you")),
    ("server_url", None),
    ("listen", Some("127.0.0.1:8746")),
    ("allow_list", None),
    ("grammar", None),
    ("media_dir", None),
    ("fixtures_dir", None),
    ("weather_mode", Some("fixture")),
    ("wiki_mode", Some("fixture")),
    ("news_mode", Some("fixture")),
    ("weather_url", Some("https://wttr.in/{query}?format=%t%0A%C")),
    ("wiki_url", Some("https://en.wikipedia.org/api/rest_v1/page/summary/{query}")),
    ("news_url", None),
    ("mail_unread", None),
    ("exec_timeout_ms", Some("10000")),
    ("default_location", Some("kanpur")),
    ("search_base", Some("https://duckduckgo.com/?q=")),
    ("browser_command", Some("xdg-open")),
    ("player_command", Some("xdg-open")),
    ("stt", Some("mock")),
    ("script", None),
    ("stt_command", None),
    ("stt_wav", None),
    ("tts", Some("mock")),
    ("tts_command", None),
    ("tts_log", None),
    ("journal", None),
    ("history_capacity", Some("1000")),
    ("replay_count", Some("50")),
    ("max_concurrent_exec", Some("4")),
    ("heartbeat_ms", Some("15000")),
    ("client_id", Some("voxd")),
    ("clock", None),
    ("console_dir", None),
];

/// Names of all scalar keys.
pub fn keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

pub fn default_value(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d)
}

const APP_MAP_PREFIX: &str = "app_map.";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Syntax {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("`{key}` is required when {when}")]
    Missing { key: &'static str, when: &'static str },
    #[error("path for `{key}` does not exist: {path}")]
    MissingPath { key: &'static str, path: PathBuf },
    #[error("invalid session settings: {0}")]
    Session(#[from] voxd_core::dialog::ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientMode {
    Fixture,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SttMode {
    Mock,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtsMode {
    Mock,
    External,
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub session: SessionConfig,
    pub server_url: Option<String>,
    pub listen: SocketAddr,
    pub allow_list: Option<PathBuf>,
    pub grammar: Option<PathBuf>,
    pub media_dir: Option<PathBuf>,
    pub app_map: BTreeMap<String, String>,
    pub fixtures_dir: Option<PathBuf>,
    pub weather_mode: ClientMode,
    pub wiki_mode: ClientMode,
    pub news_mode: ClientMode,
    pub weather_url: String,
    pub wiki_url: String,
    pub news_url: Option<String>,
    pub mail_unread: Option<usize>,
    pub exec_timeout: Duration,
    pub default_location: String,
    pub search_base: String,
    pub browser_command: String,
    pub player_command: String,
    pub stt: SttMode,
    pub script: Option<PathBuf>,
    pub stt_command: Option<String>,
    pub stt_wav: Option<PathBuf>,
    pub tts: TtsMode,
    pub tts_command: Option<String>,
    pub tts_log: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub history_capacity: usize,
    pub replay_count: usize,
    pub max_concurrent_exec: usize,
    pub heartbeat: Duration,
    pub client_id: String,
    pub clock: Option<DateTime<FixedOffset>>,
    pub console_dir: Option<PathBuf>,
}

/// Raw key/value layers before typing.
#[derive(Debug, Default, Clone)]
pub struct Layers {
    pub file: BTreeMap<String, String>,
    pub env: BTreeMap<String, String>,
    pub flags: BTreeMap<String, String>,
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
        || key.strip_prefix(APP_MAP_PREFIX).is_some_and(|name| !name.is_empty())
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_file(path: &Path, text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |reason: &str| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: reason.to_string(),
        };
        let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(syntax("empty key"));
        }
        if !is_known(key) {
            return Err(syntax(&format!("unknown key `{key}`")));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl Layers {
    /// Reads the file layer (if any) and picks `VOXD_*` variables for known keys.
    pub fn gather(
        config_path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self, ConfigError> {
        let file = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                parse_file(path, &text)?
            }
            None => BTreeMap::new(),
        };
        let env = env
            .into_iter()
            .filter_map(|(name, value)| {
                let key = name.strip_prefix(ENV_PREFIX)?.to_lowercase();
                KEYS.iter().any(|(k, _)| *k == key).then_some((key, value))
            })
            .collect();
        for key in flags.keys() {
            if !is_known(key) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        Ok(Self { file, env, flags })
    }

    /// Effective raw value of `key`, or `None` when unset at every layer.
    pub fn resolve(&self, key: &str) -> Option<String> {
        let default = default_value(key);
        self.flags
            .get(key)
            .or_else(|| self.env.get(key))
            .or_else(|| self.file.get(key))
            .cloned()
            .or_else(|| default.map(str::to_string))
            .filter(|v| !v.is_empty())
    }

    pub fn app_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        for layer in [&self.file, &self.env, &self.flags] {
            for (k, v) in layer {
                if let Some(name) = k.strip_prefix(APP_MAP_PREFIX) {
                    map.insert(name.to_lowercase(), v.clone());
                }
            }
        }
        map
    }

    pub fn build(&self) -> Result<AppConfig, ConfigError> {
        let get = |key: &str| self.resolve(key);
        let server_url = get("server_url").map(|u| u.trim_end_matches('/').to_string());
        let session = SessionConfig {
            listen_timeout_ms: parse(&get, "listen_timeout_ms")?.expect("defaulted"),
            max_retries: parse(&get, "max_retries")?.expect("defaulted"),
            min_confidence: parse(&get, "min_confidence")?.expect("defaulted"),
            voice: parse(&get, "voice")?.expect("defaulted"),
            reprompt_text: get("reprompt_text").unwrap_or_default(),
            abort_text: get("abort_text").unwrap_or_default(),
            server_url: server_url.clone(),
        };
        session.validate()?;
        let mode = |key: &str| -> Result<ClientMode, ConfigError> {
            match get(key).as_deref() {
                Some("fixture") | None => Ok(ClientMode::Fixture),
                Some("live") => Ok(ClientMode::Live),
                Some(other) => Err(invalid(key, other, "expected `fixture` or `live`")),
            }
        };
        let stt = match get("stt").as_deref() {
            Some("mock") | None => SttMode::Mock,
            Some("external") => SttMode::External,
            Some(other) => return Err(invalid("stt", other, "expected `mock` or `external`")),
        };
        let tts = match get("tts").as_deref() {
            Some("mock") | None => TtsMode::Mock,
            Some("external") => TtsMode::External,
            Some(other) => return Err(invalid("tts", other, "expected `mock` or `external`")),
        };
        let clock = match get("clock") {
            None => None,
            Some(raw) => Some(
                DateTime::parse_from_rfc3339(&raw).map_err(|e| invalid("clock", &raw, &e.to_string()))?,
            ),
        };
        let positive = |key: &str| -> Result<usize, ConfigError> {
            let n: usize = parse(&get, key)?.expect("defaulted");
            if n == 0 {
                return Err(invalid(key, "0", "must be positive"));
            }
            Ok(n)
        };
        let config = AppConfig {
            session,
            server_url,
            listen: parse(&get, "listen")?.expect("defaulted"),
            allow_list: get("allow_list").map(PathBuf::from),
            grammar: get("grammar").map(PathBuf::from),
            media_dir: get("media_dir").map(PathBuf::from),
            app_map: self.app_map(),
            fixtures_dir: get("fixtures_dir").map(PathBuf::from),
            weather_mode: mode("weather_mode")?,
            wiki_mode: mode("wiki_mode")?,
            news_mode: mode("news_mode")?,
            weather_url: get("weather_url").unwrap_or_default(),
            wiki_url: get("wiki_url").unwrap_or_default(),
            news_url: get("news_url"),
            mail_unread: parse(&get, "mail_unread")?,
            exec_timeout: Duration::from_millis(positive("exec_timeout_ms")? as u64),
            default_location: get("default_location").unwrap_or_default(),
            search_base: get("search_base").unwrap_or_default(),
            browser_command: get("browser_command").unwrap_or_default(),
            player_command: get("player_command").unwrap_or_default(),
            stt,
            script: get("script").map(PathBuf::from),
            stt_command: get("stt_command"),
            stt_wav: get("stt_wav").map(PathBuf::from),
            tts,
            tts_command: get("tts_command"),
            tts_log: get("tts_log").map(PathBuf::from),
            journal: get("journal").map(PathBuf::from),
            history_capacity: positive("history_capacity")?,
            replay_count: parse(&get, "replay_count")?.expect("defaulted"),
            max_concurrent_exec: positive("max_concurrent_exec")?,
            heartbeat: Duration::from_millis(positive("heartbeat_ms")? as u64),
            client_id: get("client_id").unwrap_or_default(),
            clock,
            console_dir: get("console_dir").map(PathBuf::from),
        };
        config.check()?;
        Ok(config)
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse<T>(get: &dyn Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e: T::Err| invalid(key, &raw, &e.to_string())),
    }
}

impl AppConfig {
    /// Fails on the first configured input path that does not exist, and on
    /// output paths whose directory does not exist.
    fn check(&self) -> Result<(), ConfigError> {
        let inputs: [(&'static str, &Option<PathBuf>); 7] = [
            ("allow_list", &self.allow_list),
            ("grammar", &self.grammar),
            ("media_dir", &self.media_dir),
            ("fixtures_dir", &self.fixtures_dir),
            ("script", &self.script),
            ("stt_wav", &self.stt_wav),
            ("console_dir", &self.console_dir),
        ];
        for (key, path) in inputs {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(ConfigError::MissingPath { key, path: p.clone() });
                }
            }
        }
        for (key, path) in [("journal", &self.journal), ("tts_log", &self.tts_log)] {
            if let Some(p) = path {
                let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                if !dir.is_dir() {
                    return Err(ConfigError::MissingPath {
                        key,
                        path: dir.to_path_buf(),
                    });
                }
            }
        }
        if self.stt == SttMode::External && self.stt_command.is_none() {
            return Err(ConfigError::Missing {
                key: "stt_command",
                when: "stt = external",
            });
        }
        if self.tts == TtsMode::External && self.tts_command.is_none() {
            return Err(ConfigError::Missing {
                key: "tts_command",
                when: "tts = external",
            });
        }
        if self.news_mode == ClientMode::Live && self.news_url.is_none() {
            return Err(ConfigError::Missing {
                key: "news_url",
                when: "news_mode = live",
            });
        }
        Ok(())
    }
}
