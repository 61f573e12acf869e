use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use voxd::app;
use voxd::config::Layers;

#[derive(Parser)]
#[command(name = "voxd", version, about = "Voice assistant with a remote command server")]
struct Cli {
    /// Config file of `key = value` lines
    #[arg(long, global = true, env = "VOXD_CONFIG")]
    config: Option<PathBuf>,
    /// Speech input: mock or external
    #[arg(long, global = true)]
    stt: Option<String>,
    /// Mock speech-input script
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    #[arg(long, global = true)]
    voice: Option<String>,
    /// Listen window in milliseconds
    #[arg(long, global = true)]
    listen_timeout: Option<String>,
    #[arg(long, global = true)]
    max_retries: Option<String>,
    /// Execution server base URL; commands run locally when unset
    #[arg(long, global = true)]
    server_url: Option<String>,
    /// Pin the clock to an RFC 3339 instant
    #[arg(long, global = true)]
    clock: Option<String>,
    /// Server listen address
    #[arg(long, global = true)]
    listen: Option<String>,
    /// Set any configuration key
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the command execution server
    Serve,
    /// Run an interactive voice session
    Run,
    /// Handle one typed command
    Say {
        #[arg(required = true, num_args = 1..)]
        text: Vec<String>,
    },
    /// Feed a mock speech script through a session and print an event report
    Script { path: PathBuf },
}

impl Cli {
    fn flags(&self) -> anyhow::Result<BTreeMap<String, String>> {
        let mut flags = BTreeMap::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{item}`"))?;
            flags.insert(k.trim().to_string(), v.trim().to_string());
        }
        let named = [
            ("stt", self.stt.clone()),
            ("script", self.script.as_ref().map(|p| p.display().to_string())),
            ("voice", self.voice.clone()),
            ("listen_timeout_ms", self.listen_timeout.clone()),
            ("max_retries", self.max_retries.clone()),
            ("server_url", self.server_url.clone()),
            ("clock", self.clock.clone()),
            ("listen", self.listen.clone()),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                flags.insert(k.to_string(), v);
            }
        }
        Ok(flags)
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let layers = Layers::gather(cli.config.as_deref(), std::env::vars(), cli.flags()?)?;
    let cfg = layers.build()?;
    match &cli.command {
        Command::Serve => app::cmd_serve(&cfg),
        Command::Run => app::cmd_run(&cfg, None),
        Command::Say { text } => app::cmd_say(&cfg, &text.join(" ")),
        Command::Script { path } => app::cmd_script(&cfg, path),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("VOXD_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("voxd: {e:#}");
            ExitCode::from(app::EXIT_SETUP)
        }
    }
}
