//! Builds the runtime pieces from an [`AppConfig`] and runs the subcommands.

use std::io::Write;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use voxd_core::dialog::{
    worst_status, EventPayload, EventSink, FanoutSink, LogSink, MemorySink, RunEnd, Session, SessionEvent,
    SpeechOutput,
};
use voxd_core::exec::{AllowList, CommandExecutor, CommandPolicy, LocalExecutor, ProcessRunner, DEFAULT_ALLOW_LIST};
use voxd_core::grammar::{parse_grammar_file, Source, DEFAULT_GRAMMAR};
use voxd_core::skills::clients::{EncyclopediaClient, Fixtures, MockMail, NewsClient, WeatherClient};
use voxd_core::skills::reminders::{ReminderStore, ReminderTicker};
use voxd_core::skills::{builtin_registry, DispatchError, Dispatcher, SkillStatus, SkillsConfig};
use voxd_core::speech::vad::VadParams;
use voxd_core::speech::{ExternalStt, ExternalTts, MockStt, MockTts, SpeechToText, TextToSpeech, TtsError, Voice};
use voxd_core::{Clock, Grammar, ManualClock, SystemClock, Utterance};
use voxd_server::{Assistant, ExecService, History, HistoryAnnouncer, Server, ServerConfig, ServerExecutor};

use crate::config::{AppConfig, ClientMode, SttMode, TtsMode};
use crate::remote::{HttpEventSink, HttpExecutor, LiveNews, LiveWeather, LiveWiki};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USER_ERROR: u8 = 1;
pub const EXIT_SETUP: u8 = 2;
pub const EXIT_BACKEND_ERROR: u8 = 3;

pub fn clock(cfg: &AppConfig) -> Arc<dyn Clock> {
    match cfg.clock {
        Some(t) => Arc::new(ManualClock::new(t)),
        None => Arc::new(SystemClock),
    }
}

pub fn grammar(cfg: &AppConfig) -> Result<Grammar> {
    let (text, origin) = match &cfg.grammar {
        Some(p) => (
            std::fs::read_to_string(p).with_context(|| format!("reading grammar {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (DEFAULT_GRAMMAR.to_string(), "built-in grammar".to_string()),
    };
    parse_grammar_file(&text).with_context(|| format!("loading {origin}"))
}

pub fn allow_list(cfg: &AppConfig) -> Result<AllowList> {
    match &cfg.allow_list {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading allow-list {}", p.display()))?;
            AllowList::parse(&text).with_context(|| format!("bad allow-list {}", p.display()))
        }
        None => Ok(AllowList::parse(DEFAULT_ALLOW_LIST)?),
    }
}

fn policy(cfg: &AppConfig) -> Result<Arc<CommandPolicy>> {
    Ok(Arc::new(CommandPolicy::new(
        allow_list(cfg)?,
        Arc::new(ProcessRunner),
        cfg.exec_timeout,
    )))
}

pub fn reminders(cfg: &AppConfig) -> Result<Arc<ReminderStore>> {
    Ok(Arc::new(match &cfg.journal {
        Some(p) => ReminderStore::open(p).with_context(|| format!("opening journal {}", p.display()))?,
        None => ReminderStore::in_memory(),
    }))
}

pub fn skills_config(cfg: &AppConfig, clock: Arc<dyn Clock>, reminders: Arc<ReminderStore>) -> SkillsConfig {
    let fixtures = Arc::new(Fixtures::new(cfg.fixtures_dir.clone().unwrap_or_default()));
    let weather: Arc<dyn WeatherClient> = match cfg.weather_mode {
        ClientMode::Fixture => fixtures.clone(),
        ClientMode::Live => Arc::new(LiveWeather::new(&cfg.weather_url)),
    };
    let encyclopedia: Arc<dyn EncyclopediaClient> = match cfg.wiki_mode {
        ClientMode::Fixture => fixtures.clone(),
        ClientMode::Live => Arc::new(LiveWiki::new(&cfg.wiki_url)),
    };
    let news: Arc<dyn NewsClient> = match (cfg.news_mode, &cfg.news_url) {
        (ClientMode::Live, Some(url)) => Arc::new(LiveNews::new(url)),
        _ => fixtures,
    };
    SkillsConfig {
        clock,
        weather,
        encyclopedia,
        news: Some(news),
        mail: cfg.mail_unread.map(|n| Arc::new(MockMail { unread: n }) as _),
        reminders,
        default_location: cfg.default_location.clone(),
        search_base: cfg.search_base.clone(),
        browser_command: cfg.browser_command.clone(),
        media_dir: cfg.media_dir.clone().unwrap_or_default(),
        player_command: cfg.player_command.clone(),
        app_map: cfg.app_map.clone(),
    }
}

/// Remote executor when a server is configured, otherwise local execution
/// through the same allow-list policy.
pub fn client_dispatcher(cfg: &AppConfig, clock: Arc<dyn Clock>, reminders: Arc<ReminderStore>) -> Result<Dispatcher> {
    let executor: Arc<dyn CommandExecutor> = match &cfg.server_url {
        Some(url) => Arc::new(HttpExecutor::new(url, &cfg.client_id, cfg.exec_timeout, clock.clone())),
        None => Arc::new(LocalExecutor::new(policy(cfg)?, cfg.client_id.clone(), clock.clone())),
    };
    Ok(Dispatcher::new(
        builtin_registry(skills_config(cfg, clock, reminders)),
        Some(executor),
    ))
}

pub fn stt(cfg: &AppConfig, script: Option<&std::path::Path>, clock: Arc<dyn Clock>) -> Result<Box<dyn SpeechToText>> {
    match (cfg.stt, script.or(cfg.script.as_deref())) {
        (SttMode::Mock, Some(path)) => Ok(Box::new(MockStt::from_file(path, clock)?)),
        (SttMode::Mock, None) => bail!("mock speech input needs a script (--script <path>)"),
        (SttMode::External, _) => {
            let template = cfg.stt_command.clone().unwrap_or_default();
            let stt = ExternalStt::new(template, Arc::new(ProcessRunner), clock)?;
            Ok(Box::new(match &cfg.stt_wav {
                Some(wav) => stt.with_wav(wav, VadParams::default()),
                None => stt,
            }))
        }
    }
}

/// Prints mock speech to standard output.
struct ConsoleTts;

impl TextToSpeech for ConsoleTts {
    fn synthesize(&mut self, text: &str, voice: Voice) -> Result<(), TtsError> {
        if text.is_empty() {
            return Err(TtsError::EmptyText);
        }
        println!("{}", MockTts::line(text, voice));
        Ok(())
    }
}

/// `console` selects where mock speech goes when no log file is configured.
fn tts(cfg: &AppConfig, console: bool) -> Result<Box<dyn TextToSpeech>> {
    Ok(match (cfg.tts, &cfg.tts_log) {
        (TtsMode::External, _) => Box::new(ExternalTts::new(
            cfg.tts_command.clone().unwrap_or_default(),
            Arc::new(ProcessRunner),
            cfg.exec_timeout,
        )),
        (TtsMode::Mock, Some(log)) => {
            Box::new(MockTts::to_file(log).with_context(|| format!("opening {}", log.display()))?)
        }
        (TtsMode::Mock, None) if console => Box::new(ConsoleTts),
        (TtsMode::Mock, None) => Box::new(MockTts::in_memory().0),
    })
}

/// Prints the display text of each dispatch.
struct DisplaySink;

impl EventSink for DisplaySink {
    fn emit(&mut self, event: &SessionEvent) {
        if let EventPayload::Dispatch { result, .. } = &event.payload {
            println!("{}", result.display_text);
        }
    }
}

fn sinks(cfg: &AppConfig, mut extra: Vec<Box<dyn EventSink>>) -> Box<dyn EventSink> {
    extra.push(Box::new(LogSink));
    if let Some(url) = &cfg.server_url {
        extra.push(Box::new(HttpEventSink::new(url, &cfg.client_id)));
    }
    Box::new(FanoutSink(extra))
}

/// One report line: `<index> <EventKind> <payload json>`.
pub fn report_line(index: usize, event: &SessionEvent) -> String {
    format!(
        "{index} {} {}",
        event.kind.as_str(),
        serde_json::to_string(&event.payload).expect("payloads serialize")
    )
}

fn exit_for(status: Option<SkillStatus>) -> u8 {
    match status {
        Some(SkillStatus::BackendError) => EXIT_BACKEND_ERROR,
        Some(SkillStatus::UserError) => EXIT_USER_ERROR,
        _ => EXIT_OK,
    }
}

pub fn cmd_say(cfg: &AppConfig, text: &str) -> Result<u8> {
    let clock = clock(cfg);
    let grammar = grammar(cfg)?;
    let dispatcher = client_dispatcher(cfg, clock.clone(), reminders(cfg)?)?;
    let Ok(utt) = Utterance::new(text, 1.0, Source::Typed, clock.now_ms()) else {
        eprintln!("voxd: nothing to say");
        return Ok(EXIT_USER_ERROR);
    };
    let intent = grammar.parse(&utt);
    println!("intent: {}", intent.kind);
    println!("slots: {}", serde_json::to_string(&intent.slots)?);
    match dispatcher.dispatch(&intent) {
        Ok(d) => {
            println!("{}", d.result.display_text);
            Ok(exit_for(Some(d.result.status)))
        }
        Err(DispatchError::UnknownIntent) => {
            println!("no rule matches \"{}\"", utt.text());
            Ok(EXIT_USER_ERROR)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_script(cfg: &AppConfig, path: &std::path::Path) -> Result<u8> {
    let clock = clock(cfg);
    let stt = MockStt::from_file(path, clock.clone())?;
    if stt.remaining() == 0 {
        return Ok(EXIT_OK);
    }
    let grammar = Arc::new(grammar(cfg)?);
    let dispatcher = Arc::new(client_dispatcher(cfg, clock.clone(), reminders(cfg)?)?);
    let memory = MemorySink::new();
    let speech = SpeechOutput::new(tts(cfg, false)?, cfg.session.voice);
    let mut session = Session::start(
        cfg.session.clone(),
        Box::new(stt),
        speech,
        grammar,
        dispatcher,
        sinks(cfg, vec![Box::new(memory.clone())]),
        clock,
    )?;
    session.run()?;
    let events = memory.events();
    let mut out = std::io::stdout().lock();
    for (i, event) in events.iter().enumerate() {
        writeln!(out, "{}", report_line(i + 1, event))?;
    }
    Ok(match worst_status(&events) {
        Some(SkillStatus::BackendError) => EXIT_BACKEND_ERROR,
        _ => EXIT_OK,
    })
}

pub fn cmd_run(cfg: &AppConfig, script: Option<&std::path::Path>) -> Result<u8> {
    let clock = clock(cfg);
    let stt = stt(cfg, script, clock.clone())?;
    let grammar = Arc::new(grammar(cfg)?);
    let store = reminders(cfg)?;
    let dispatcher = Arc::new(client_dispatcher(cfg, clock.clone(), store.clone())?);
    let speech = SpeechOutput::new(tts(cfg, true)?, cfg.session.voice);
    let ticker = ReminderTicker::spawn(store, clock.clone(), Arc::new(speech.clone()), ReminderTicker::DEFAULT_PERIOD);
    let mut session = Session::start(
        cfg.session.clone(),
        stt,
        speech,
        grammar,
        dispatcher,
        sinks(cfg, vec![Box::new(DisplaySink)]),
        clock,
    )?;
    let end = session.run();
    ticker.stop();
    Ok(match end? {
        RunEnd::Exited => EXIT_OK,
        RunEnd::InputExhausted => {
            eprintln!("voxd: input ended before an exit command");
            EXIT_USER_ERROR
        }
    })
}

pub fn cmd_serve(cfg: &AppConfig) -> Result<u8> {
    let clock = clock(cfg);
    let history = Arc::new(History::new(cfg.history_capacity, clock.clone()));
    let exec = Arc::new(ExecService::new(policy(cfg)?, cfg.max_concurrent_exec, history.clone()));
    let store = reminders(cfg)?;
    let dispatcher = Dispatcher::new(
        builtin_registry(skills_config(cfg, clock.clone(), store.clone())),
        Some(Arc::new(ServerExecutor::new(exec.clone(), clock.clone()))),
    );
    let assistant = Arc::new(Assistant {
        grammar: Arc::new(grammar(cfg)?),
        dispatcher: Arc::new(dispatcher),
    });
    let ticker = ReminderTicker::spawn(
        store,
        clock.clone(),
        Arc::new(HistoryAnnouncer(history.clone())),
        ReminderTicker::DEFAULT_PERIOD,
    );
    let server_config = ServerConfig {
        replay_count: cfg.replay_count,
        heartbeat: cfg.heartbeat,
        console_dir: cfg.console_dir.clone(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    let result = runtime.block_on(async {
        let server = Server::bind(cfg.listen, server_config, exec, history, Some(assistant), clock).await?;
        eprintln!("voxd: listening on http://{}", server.local_addr());
        server.run(voxd_server::shutdown_signal()).await
    });
    ticker.stop();
    result?;
    Ok(EXIT_OK)
}
