//! Acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/durability.rs"]
mod durability;
#[path = "../../core/tests/support/grammar_gen.rs"]
mod grammar_gen;
#[path = "../../core/tests/support/grammar_oracle.rs"]
mod grammar_oracle;
#[path = "../../core/tests/support/vad_oracle.rs"]
mod vad_oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use voxd_core::dialog::{MemorySink, Session, SessionConfig, SpeechOutput, START_PROMPT};
use voxd_core::exec::{
    AllowList, CommandPolicy, CommandRunner, ExecRequest, ExecResponse, ProcessRunner, RunOutput, RunnerError,
};
use voxd_core::grammar::{IntentKind, Source};
use voxd_core::skills::{Dispatcher, SkillRegistry, SkillResult};
use voxd_core::speech::vad::{detect_speech, frame_rms, AudioFrame, VadParams, FRAME_LEN, SAMPLE_RATE_HZ};
use voxd_core::speech::{MockStt, MockTts, Voice};
use voxd_core::{Clock, Grammar, Intent, ManualClock, Utterance};
use voxd_server::{ExecService, History, Server, ServerConfig};

type Outcome = Result<(), String>;
type Criterion = (u8, &'static str, fn() -> Outcome);
type ParseCase = (&'static str, IntentKind, &'static [(&'static str, &'static str)]);

const CLOCK: &str = "2026-03-01T14:05:00+05:30";

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn voxd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_voxd"));
    cmd.current_dir(manifest());
    for (k, _) in std::env::vars() {
        if k.starts_with("VOXD_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(["--config", "tests/data/golden.conf", "--clock", CLOCK]);
    cmd
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_script(dir: &Path, lines: &[String], extra: &[&str]) -> Result<(String, Option<i32>), String> {
    let path = dir.join("s.script");
    std::fs::write(&path, lines.join("\n")).map_err(|e| e.to_string())?;
    let o = voxd()
        .args(extra)
        .arg("script")
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((String::from_utf8_lossy(&o.stdout).into_owned(), o.status.code()))
}

fn kinds(report: &str, kind: &str) -> usize {
    report
        .lines()
        .filter(|l| l.split(' ').nth(1) == Some(kind))
        .count()
}

fn golden_end_to_end() -> Outcome {
    let started = Instant::now();
    let o = voxd()
        .args(["script", "tests/data/golden.script"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let golden = std::fs::read(manifest().join("tests/data/golden.report")).map_err(|e| e.to_string())?;
    ensure(o.status.code() == Some(0), || format!("exit {:?}", o.status.code()))?;
    ensure(o.stdout == golden, || {
        let got = String::from_utf8_lossy(&o.stdout);
        let want = String::from_utf8_lossy(&golden);
        let first = got
            .lines()
            .zip(want.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| got.lines().count().min(want.lines().count()));
        format!("report differs from golden at line {}", first + 1)
    })?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    let report = String::from_utf8_lossy(&o.stdout);
    for kind in IntentKind::dispatchable() {
        let needle = format!("\"kind\":\"{kind}\"");
        let covered = report
            .lines()
            .any(|l| l.split(' ').nth(1) == Some("SkillDispatched") && l.contains(&needle));
        ensure(covered, || format!("{kind} never dispatched"))?;
    }
    Ok(())
}

fn retry_law() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for max in 0..=3u32 {
        let max_flag = max.to_string();
        for k in 0..=max + 1 {
            let mut lines: Vec<String> = (0..k).map(|_| "!fail".to_string()).collect();
            if k <= max {
                lines.push("what time is it".into());
            }
            let (report, _) = run_script(dir.path(), &lines, &["--max-retries", &max_flag])?;
            let failed = kinds(&report, "RecognitionFailed");
            let reprompts = report.matches("{\"text\":\"please say that again\"").count();
            let dispatched = kinds(&report, "SkillDispatched");
            let exhausted = kinds(&report, "RetryExhausted");
            let ok = if k <= max {
                failed == k as usize && reprompts == k as usize && dispatched == 1 && exhausted == 0
            } else {
                exhausted == 1 && dispatched == 0 && failed == max as usize && reprompts == max as usize
            };
            ensure(ok, || {
                format!("max_retries={max} k={k}: {failed} failed, {reprompts} reprompts, {dispatched} dispatched, {exhausted} exhausted")
            })?;
        }
    }
    Ok(())
}

struct Counting(AtomicUsize);

impl CommandRunner for Counting {
    fn run(&self, _: &str, args: &[String], timeout: Duration) -> Result<RunOutput, RunnerError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        let _ = timeout;
        Ok(RunOutput {
            exit_code: Some(0),
            stdout: args.join(" ").into_bytes(),
            stderr: Vec::new(),
            timed_out: false,
            duration: Duration::ZERO,
        })
    }
}

fn allow_list_safety() -> Outcome {
    let allowed = ["echo", "date", "uname"];
    let runner = Arc::new(Counting(AtomicUsize::new(0)));
    let policy = Arc::new(CommandPolicy::new(
        AllowList::from_names(allowed).map_err(|e| e.to_string())?,
        runner.clone(),
        Duration::from_secs(5),
    ));
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::parse(CLOCK).unwrap());
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let base = rt.block_on(async {
        let history = Arc::new(History::new(100, clock.clone()));
        let exec = Arc::new(ExecService::new(policy, 4, history.clone()));
        let server = Server::bind(
            "127.0.0.1:0".parse().unwrap(),
            ServerConfig::default(),
            exec,
            history,
            None,
            clock,
        )
        .await
        .map_err(|e| e.to_string())?;
        let base = format!("http://{}", server.local_addr());
        tokio::spawn(server.run(async {
            let _ = stop_rx.await;
        }));
        Ok::<_, String>(base)
    })?;

    let heads = [
        "echo", "date", "uname", "rm", "sh", "bash", "curl", "/bin/echo", "./echo", "Echo", "ECHO", "echo;",
        "dated", "ech", "python3", "sudo", "env",
    ];
    let args = ["-rf", "/", "hello", "; rm -rf /", "$(whoami)", "|", "&&", "`id`", "-a", "x y"];
    let mut rng = StdRng::seed_from_u64(7);
    let http = reqwest::blocking::Client::new();
    let mut expected = 0;
    for i in 0..1000 {
        let head = heads.choose(&mut rng).unwrap();
        let mut command = format!("{}{head}", " ".repeat(rng.gen_range(0..2)));
        for _ in 0..rng.gen_range(0..4) {
            command.push(' ');
            command.push_str(args.choose(&mut rng).unwrap());
        }
        let first = command.split_whitespace().next().unwrap();
        let permitted = allowed.contains(&first);
        expected += usize::from(permitted);
        let req = ExecRequest {
            request_id: format!("fuzz-{i}"),
            client_id: "acceptance".into(),
            command: command.clone(),
            issued_at: 0,
        };
        let resp = http
            .post(format!("{base}/v1/execute"))
            .json(&req)
            .send()
            .map_err(|e| e.to_string())?;
        let code = resp.status().as_u16();
        let body: Value = resp.json().map_err(|e| e.to_string())?;
        ensure(body["request_id"] == req.request_id.as_str(), || format!("request id not echoed for `{command}`"))?;
        if permitted {
            ensure(code == 200 && body["status"] == "ok", || format!("`{command}` -> {code} {body}"))?;
        } else {
            ensure(
                code == 403
                    && body["status"] == "rejected"
                    && body["stdout"] == ""
                    && body["stderr"] == ""
                    && body.get("exit_code").is_none(),
                || format!("`{command}` -> {code} {body}"),
            )?;
        }
    }
    let _ = stop_tx.send(());
    let spawned = runner.0.load(Ordering::SeqCst);
    ensure(spawned == expected, || format!("{spawned} spawns for {expected} permitted requests"))
}

fn parser_properties() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&(grammar_gen::case(), proptest::num::u64::ANY), |((rules, text), seed)| {
        let forward: Vec<usize> = (0..rules.len()).collect();
        let g = grammar_gen::build(&rules, &forward);
        let u = Utterance::new(&text, 1.0, Source::Typed, 0).unwrap();
        let a = g.parse(&u);
        proptest::prop_assert_eq!(&a, &g.parse(&u), "determinism");
        match grammar_oracle::best(&g, u.text()) {
            None => proptest::prop_assert!(a.is_unknown()),
            Some((id, slots)) => {
                proptest::prop_assert_eq!(a.matched_rule_id.as_deref(), Some(id.as_str()));
                proptest::prop_assert_eq!(&a.slots, &slots.into_iter().collect::<BTreeMap<_, _>>());
                let rebuilt = grammar_gen::reconstruct(&g, u.text());
                proptest::prop_assert_eq!(rebuilt.as_deref(), Some(u.text()), "slot totality");
            }
        }
        let distinct = grammar_gen::distinct_keys(rules);
        let forward: Vec<usize> = (0..distinct.len()).collect();
        let mut shuffled = forward.clone();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        proptest::prop_assert_eq!(
            grammar_gen::build(&distinct, &forward).parse(&u),
            grammar_gen::build(&distinct, &shuffled).parse(&u),
            "registration order"
        );
        Ok(())
    });
    result.map_err(|e| e.to_string())?;

    let g = Grammar::default_rules();
    let hand: [ParseCase; 3] = [
        ("search wikipedia for alan turing", IntentKind::WikipediaSearch, &[("query", "alan turing")]),
        (
            "remind me to check in with bob in 2 minutes",
            IntentKind::SetReminder,
            &[("message", "check in with bob"), ("n", "2")],
        ),
        ("fnord gibberish", IntentKind::Unknown, &[]),
    ];
    for (text, kind, slots) in hand {
        let intent = g.parse(&Utterance::new(text, 1.0, Source::Voice, 0).unwrap());
        let want: BTreeMap<String, String> = slots.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ensure(intent.kind == kind && intent.slots == want, || format!("`{text}` -> {intent:?}"))?;
    }
    Ok(())
}

fn vad_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    for case in 0..100 {
        let k = rng.gen_range(1..5);
        let m = rng.gen_range(1..30);
        let mut loud = Vec::new();
        for _ in 0..rng.gen_range(0..25) {
            let l = rng.gen_bool(0.5);
            loud.extend(std::iter::repeat_n(l, rng.gen_range(1..m + 6)));
        }
        let frames: Vec<AudioFrame<f64>> = loud
            .iter()
            .map(|&l| {
                let amp = if l { rng.gen_range(0.03..1.0) } else { rng.gen_range(0.0..0.019) };
                let samples = (0..FRAME_LEN).map(|i| if i % 2 == 0 { amp } else { -amp }).collect();
                AudioFrame::new(samples).unwrap()
            })
            .collect();
        let params = VadParams::new(0.02, k, m).map_err(|e| e.to_string())?;
        let got: Vec<(usize, usize)> = detect_speech(&frames, &params)
            .into_iter()
            .map(|s| (s.start_frame, s.end_frame))
            .collect();
        let want = vad_oracle::segments(&loud, k, m);
        ensure(got == want, || format!("signal {case} (k={k}, m={m}): {got:?} != {want:?}"))?;
    }
    let sine: Vec<f64> = (0..FRAME_LEN)
        .map(|n| 0.8 * (2.0 * PI * 500.0 * n as f64 / f64::from(SAMPLE_RATE_HZ)).sin())
        .collect();
    let rms = frame_rms(&AudioFrame::new(sine).unwrap());
    ensure((rms - 0.8 / 2f64.sqrt()).abs() < 1e-3, || format!("sine rms {rms}"))
}

fn reminder_durability() -> Outcome {
    for seed in 0..50 {
        durability::run_schedule(seed)?;
    }
    killed_process_fires_once()
}

/// Real processes: a reminder is acknowledged by one process, a second is
/// killed before it is due, a third is killed after announcing it, and a
/// fourth must not announce it again.
fn killed_process_fires_once() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = dir.path().join("reminders.journal");
    let tts_log = dir.path().join("tts.log");
    let base = |clock: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_voxd"));
        cmd.current_dir(manifest())
            .args(["--clock", clock, "--set"])
            .arg(format!("journal={}", journal.display()))
            .arg("--set")
            .arg(format!("tts_log={}", tts_log.display()));
        cmd
    };
    let o = base("2026-03-01T09:00:00Z")
        .args(["say", "remind me to stretch in 1 minutes"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("say failed: {}", String::from_utf8_lossy(&o.stderr)))?;

    let announcements = || {
        std::fs::read_to_string(&tts_log)
            .unwrap_or_default()
            .matches("reminder: stretch")
            .count()
    };
    // runs a listening session until `stop` holds or `limit` passes, then kills it
    let listen = |clock: &str, limit: Duration, stop: &dyn Fn() -> bool| -> Outcome {
        let mut child = base(clock)
            .args(["--stt", "external", "--set", "stt_command=sleep 30", "run"])
            .spawn()
            .map_err(|e| e.to_string())?;
        let started = Instant::now();
        while started.elapsed() < limit && !stop() {
            std::thread::sleep(Duration::from_millis(50));
        }
        child.kill().map_err(|e| e.to_string())?;
        child.wait().map_err(|e| e.to_string())?;
        Ok(())
    };
    let settle = Duration::from_millis(1500);
    listen("2026-03-01T09:00:30Z", settle, &|| false)?;
    ensure(announcements() == 0, || "fired before due".into())?;
    listen("2026-03-01T09:02:00Z", Duration::from_secs(10), &|| announcements() > 0)?;
    ensure(announcements() == 1, || format!("{} announcements after due", announcements()))?;
    listen("2026-03-01T09:03:00Z", settle, &|| false)?;
    ensure(announcements() == 1, || format!("{} announcements after restart", announcements()))?;
    let text = std::fs::read_to_string(&journal).map_err(|e| e.to_string())?;
    ensure(text.lines().filter(|l| l.starts_with("v1|fire|")).count() == 1, || text.clone())
}

fn protocol_goldens() -> Outcome {
    let dir = manifest().join("tests/data/protocol");
    for case in ["echo-ok", "rm-rejected", "sleep-timeout"] {
        let read = |name: String| std::fs::read_to_string(dir.join(&name)).map_err(|e| format!("{name}: {e}"));
        let req: ExecRequest = serde_json::from_str(&read(format!("{case}.request.json"))?).map_err(|e| e.to_string())?;
        let resp: ExecResponse =
            serde_json::from_str(&read(format!("{case}.response.json"))?).map_err(|e| e.to_string())?;
        let req_bytes = format!("{}\n", serde_json::to_string(&req).unwrap());
        let resp_bytes = format!("{}\n", serde_json::to_string(&resp).unwrap());
        ensure(req_bytes == read(format!("{case}.request.golden"))?, || format!("{case} request: {req_bytes}"))?;
        ensure(resp_bytes == read(format!("{case}.response.golden"))?, || format!("{case} response: {resp_bytes}"))?;
    }
    // the live policy agrees with the golden on everything except timing
    let policy = CommandPolicy::new(
        AllowList::from_names(["echo"]).unwrap(),
        Arc::new(ProcessRunner),
        Duration::from_secs(5),
    );
    for case in ["echo-ok", "rm-rejected"] {
        let req: ExecRequest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{case}.request.json"))).unwrap()).unwrap();
        let mut live = serde_json::to_value(policy.execute(&req)).unwrap();
        let mut golden: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{case}.response.golden"))).unwrap())
                .unwrap();
        live["duration_ms"] = json!(0);
        golden["duration_ms"] = json!(0);
        ensure(live == golden, || format!("{case}: live {live} vs golden {golden}"))?;
    }
    Ok(())
}

fn prompt_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (report, _) = run_script(dir.path(), &["exit".to_string()], &[])?;
    let first = report.lines().next().unwrap_or_default();
    ensure(first == "1 PromptIssued {\"text\":\"Start to speak\"}", || format!("first line: {first}"))?;

    let clock: Arc<dyn Clock> = Arc::new(ManualClock::parse(CLOCK).unwrap());
    let (tts, spoken) = MockTts::in_memory();
    let mut registry = SkillRegistry::new();
    for kind in IntentKind::dispatchable() {
        registry.register(kind, Arc::new(|_: &Intent| SkillResult::ok("ok", "ok")));
    }
    let sink = MemorySink::new();
    Session::start(
        SessionConfig::default(),
        Box::new(MockStt::from_script("exit", clock.clone())),
        SpeechOutput::new(Box::new(tts), Voice::Female),
        Arc::new(Grammar::default_rules()),
        Arc::new(Dispatcher::new(registry, None)),
        Box::new(sink.clone()),
        clock,
    )
    .map_err(|e| e.to_string())?;
    let events = sink.events();
    ensure(events.first().and_then(|e| e.text()) == Some(START_PROMPT), || format!("{:?}", events.first()))?;
    ensure(START_PROMPT == "Start to speak", || START_PROMPT.into())?;
    let spoken = spoken.lock();
    ensure(spoken.first().map(String::as_str) == Some("[TTS voice=female] Start to speak"), || format!("{spoken:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "golden end-to-end script report", golden_end_to_end),
        (2, "retry law for max_retries 0..=3", retry_law),
        (3, "allow-list safety over 1000 fuzzed requests", allow_list_safety),
        (4, "parser properties over 10000 generated pairs", parser_properties),
        (5, "VAD oracle equivalence and sine RMS", vad_equivalence),
        (6, "reminder durability across crash-restart schedules", reminder_durability),
        (7, "protocol goldens", protocol_goldens),
        (8, "prompt fidelity", prompt_fidelity),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {p:?}")));
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("criterion {n}: PASS  {name} ({ms} ms)"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n}: FAIL  {name} ({ms} ms): {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
