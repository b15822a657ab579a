use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use wavcraft::workspace::Workspace;
use wavcraft::{llm_from_spec, router, seed_from_env, server, workspace_from_env, AppState};
use wavcraft_core::backend::BackendRegistry;
use wavcraft_core::dsp::read_wav;
use wavcraft_core::eval::pool::{pool_from_dir, procedural_pool};
use wavcraft_core::eval::{parse_kinds, run_suite, synthesize_suite, EngineMode, SuiteOptions};
use wavcraft_core::orchestrator::{add_input, run_round, Engine, FailureKind, LlmClient, RoundRecord, SessionState};

#[derive(Parser)]
#[command(name = "wavcraft", version, about = "Edit audio with natural-language instructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instruction over the given inputs and write the result.
    Edit {
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        instruction: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// `scripted:FILE` or `openai`.
        #[arg(long)]
        llm: Option<String>,
        /// Keep the session in this workspace instead of a temporary one.
        #[arg(long)]
        workspace: Option<PathBuf>,
    },
    /// Multi-round session reading one instruction per line from stdin.
    Repl {
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// Resume an existing session instead of creating one.
        #[arg(long)]
        session: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        llm: Option<String>,
        #[arg(long)]
        workspace: Option<PathBuf>,
        /// Also write each round's output as OUTPUT{k}_WAV.wav here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Synthesize editing tasks, run them and write a report.
    Eval {
        /// Tasks per kind.
        #[arg(long, default_value_t = 50)]
        tasks: usize,
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory of WAV files used instead of the built-in pool.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Record per-task wall time (makes reports non-reproducible).
        #[arg(long)]
        timings: bool,
        /// Ask a model instead of running golden scripts.
        #[arg(long)]
        llm: Option<String>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        workspace: Option<PathBuf>,
        #[arg(long)]
        llm: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve every generative operation from the local stubs over HTTP.
    BackendStub {
        #[arg(long, default_value = "127.0.0.1:8090")]
        addr: String,
    },
    /// Check that every artifact a workspace refers to exists.
    Fsck {
        #[arg(long)]
        workspace: Option<PathBuf>,
    },
}

enum Failure {
    User(String),
    Internal(String),
}

type Outcome = Result<(), Failure>;

fn user(e: impl std::fmt::Display) -> Failure {
    Failure::User(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Edit { inputs, instruction, out, seed, llm, workspace } => {
            edit(&inputs, &instruction, &out, seed, llm.as_deref(), workspace)
        }
        Command::Repl { inputs, session, seed, llm, workspace, out_dir } => {
            repl(&inputs, session, seed, llm.as_deref(), workspace, out_dir)
        }
        Command::Eval { tasks, kind, seed, report, pool, workers, timings, llm } => {
            eval(tasks, &kind, seed, report, pool, workers, timings, llm.as_deref())
        }
        Command::Serve { addr, workspace, llm, seed } => serve(&addr, workspace, llm.as_deref(), seed),
        Command::BackendStub { addr } => run_async(server::serve(server::stub_backend_router(), &addr)),
        Command::Fsck { workspace } => fsck(workspace),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(message)) => {
            eprintln!("internal error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run_async(work: impl std::future::Future<Output = std::io::Result<()>>) -> Outcome {
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime.block_on(work).map_err(user)
}

fn load_llm(spec: Option<&str>) -> Result<Arc<dyn LlmClient>, Failure> {
    llm_from_spec(spec).map_err(user)
}

fn seed_or_env(seed: Option<u64>) -> Result<u64, Failure> {
    seed.map_or_else(|| seed_from_env().map_err(Failure::User), Ok)
}

fn open_workspace(dir: Option<PathBuf>) -> Result<Workspace, Failure> {
    Workspace::open(dir.unwrap_or_else(workspace_from_env)).map_err(user)
}

fn read_input(path: &Path) -> Result<wavcraft_core::dsp::Waveform, Failure> {
    let bytes = std::fs::read(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    read_wav(&bytes).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn new_session(ws: &Workspace, engine: &Engine, inputs: &[PathBuf], seed: u64) -> Result<SessionState, Failure> {
    let mut session = SessionState::new(uuid::Uuid::new_v4().to_string(), seed);
    let store = ws.store(&session.session_id).map_err(internal)?;
    for path in inputs {
        let wav = read_input(path)?;
        let record = add_input(&mut session, &wav, &engine.backends, &store).map_err(internal)?;
        eprintln!("{}: {} ({})", record.name, record.caption, path.display());
    }
    ws.save(&session).map_err(internal)?;
    Ok(session)
}

fn print_round(record: &RoundRecord) {
    println!("# round {} [{:?}]", record.index, record.status);
    if let Some(code) = &record.code {
        println!("{code}");
    }
    for diagnostic in &record.diagnostics {
        println!("# ! {diagnostic}");
    }
    if let Some(error) = &record.error {
        println!("# ! {error}");
    }
}

fn round_failure(record: &RoundRecord) -> Outcome {
    let message = record.error.clone().unwrap_or_else(|| "round failed".into());
    match record.failure {
        None => Ok(()),
        Some(FailureKind::Llm | FailureKind::Backend) => Err(Failure::Internal(message)),
        Some(FailureKind::Validation | FailureKind::Execution) => Err(Failure::User(message)),
    }
}

fn edit(
    inputs: &[PathBuf],
    instruction: &str,
    out: &Path,
    seed: Option<u64>,
    llm: Option<&str>,
    workspace: Option<PathBuf>,
) -> Outcome {
    let llm = load_llm(llm)?;
    let engine = Engine::new(BackendRegistry::from_env());
    let temp;
    let ws = match workspace {
        Some(dir) => Workspace::open(dir).map_err(user)?,
        None => {
            temp = tempfile::tempdir().map_err(internal)?;
            Workspace::open(temp.path()).map_err(internal)?
        }
    };
    let mut session = new_session(&ws, &engine, inputs, seed_or_env(seed)?)?;
    let store = ws.store(&session.session_id).map_err(internal)?;
    let record = run_round(&mut session, instruction, llm.as_ref(), &engine, &store).clone();
    ws.save(&session).map_err(internal)?;
    print_round(&record);
    round_failure(&record)?;
    let id = record.output.as_deref().ok_or_else(|| internal("round produced no output"))?;
    let bytes = store.wav_bytes(id).ok_or_else(|| internal(format!("artifact {id} missing")))?;
    std::fs::write(out, bytes).map_err(|e| user(format!("{}: {e}", out.display())))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn repl(
    inputs: &[PathBuf],
    session_id: Option<String>,
    seed: Option<u64>,
    llm: Option<&str>,
    workspace: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Outcome {
    let llm = load_llm(llm)?;
    let engine = Engine::new(BackendRegistry::from_env());
    let ws = open_workspace(workspace)?;
    let mut session = match session_id {
        Some(id) => {
            let mut session = ws.load(&id).map_err(user)?;
            let store = ws.store(&id).map_err(internal)?;
            for path in inputs {
                add_input(&mut session, &read_input(path)?, &engine.backends, &store).map_err(internal)?;
            }
            ws.save(&session).map_err(internal)?;
            session
        }
        None => new_session(&ws, &engine, inputs, seed_or_env(seed)?)?,
    };
    let store = ws.store(&session.session_id).map_err(internal)?;
    eprintln!("session {} in {}; one instruction per line, :quit to leave", session.session_id, ws.root().display());
    let stdin = std::io::stdin();
    let mut last = Ok(());
    loop {
        eprint!("> ");
        let _ = std::io::stderr().flush();
        let mut line = String::new();
        if stdin.lock().read_line(&mut line).map_err(internal)? == 0 {
            break;
        }
        let instruction = line.trim();
        if instruction.is_empty() {
            continue;
        }
        if matches!(instruction, ":quit" | ":q" | ":exit") {
            break;
        }
        let record = run_round(&mut session, instruction, llm.as_ref(), &engine, &store).clone();
        ws.save(&session).map_err(internal)?;
        print_round(&record);
        if let Some(id) = &record.output {
            let stored = store.path_of(id).map(|p| p.display().to_string()).unwrap_or_default();
            println!("# OUTPUT{}_WAV = {stored}", record.index + 1);
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir).map_err(user)?;
                let path = dir.join(format!("OUTPUT{}_WAV.wav", record.index + 1));
                std::fs::write(&path, store.wav_bytes(id).unwrap_or_default()).map_err(user)?;
            }
        }
        last = round_failure(&record);
    }
    last
}

#[allow(clippy::too_many_arguments)]
fn eval(
    per_kind: usize,
    kind: &str,
    seed: u64,
    report: Option<PathBuf>,
    pool: Option<PathBuf>,
    workers: Option<usize>,
    timings: bool,
    llm: Option<&str>,
) -> Outcome {
    let kinds = parse_kinds(kind).map_err(user)?;
    let pool = match pool {
        Some(dir) => pool_from_dir(&dir).map_err(user)?,
        None => procedural_pool(seed),
    };
    let tasks = synthesize_suite(&kinds, per_kind, &pool, seed).map_err(user)?;
    let engine = Engine::new(BackendRegistry::from_env());
    let client = llm.map(|spec| load_llm(Some(spec))).transpose()?;
    let mode = match (&client, llm) {
        (Some(c), Some(spec)) if spec.starts_with("scripted:") => EngineMode::ScriptedLlm(c.as_ref()),
        (Some(c), _) => EngineMode::LiveLlm(c.as_ref()),
        (None, _) => EngineMode::Golden,
    };
    let mut options = SuiteOptions { timings, ..SuiteOptions::default() };
    if let Some(workers) = workers {
        options.workers = workers.max(1);
    }
    let result = run_suite(&tasks, &mode, &engine, options).map_err(user)?;
    println!("{:<18} {:>6} {:>9} {:>12}", "kind", "tasks", "failures", "mean_lsd");
    for (kind, summary) in &result.summary {
        let mean = summary.mean_lsd.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!("{:<18} {:>6} {:>9} {:>12}", kind.name(), summary.tasks, summary.failures, mean);
    }
    if let Some(path) = report {
        result.write(&path).map_err(user)?;
        eprintln!("wrote {} and {}", path.display(), path.with_extension("csv").display());
    }
    Ok(())
}

fn serve(addr: &str, workspace: Option<PathBuf>, llm: Option<&str>, seed: Option<u64>) -> Outcome {
    let llm = load_llm(llm)?;
    let ws = open_workspace(workspace)?;
    let state = AppState::new(ws, Engine::new(BackendRegistry::from_env()), llm, seed_or_env(seed)?);
    run_async(server::serve(router(Arc::new(state)), addr))
}

fn fsck(workspace: Option<PathBuf>) -> Outcome {
    let ws = open_workspace(workspace)?;
    let report = ws.fsck();
    println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?);
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::User(format!("workspace {} has problems", ws.root().display())))
    }
}
