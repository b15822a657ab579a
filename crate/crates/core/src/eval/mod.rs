//! Editing-task synthesis and scoring.

pub mod pool;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{stub, BackendError, REF_LUFS};
use crate::dsp::{
    concat, lsd, lsd_band_limited, mix, normalize_lufs, resample, seconds_to_samples, DspError, Waveform, WORKING_RATE,
};
use crate::exec::{execute, ArtifactStore, ExecContext, SeedPolicy};
use crate::orchestrator::{add_input, run_round, Engine, LlmClient, SessionState};
use crate::script::{compile, input_name, input_names, Expr, Program, Stmt, Target, OUTPUT_NAME};
use pool::Clip;

/// Rate of the degraded input in super-resolution tasks.
pub const SR_INPUT_RATE: u32 = 8000;
/// Super-resolution outputs are scored below this frequency.
pub const SR_SCORE_MAX_HZ: f64 = 4000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Add,
    Removal,
    Replacement,
    SuperResolution,
    Infilling,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] =
        [TaskKind::Add, TaskKind::Removal, TaskKind::Replacement, TaskKind::SuperResolution, TaskKind::Infilling];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Add => "add",
            TaskKind::Removal => "removal",
            TaskKind::Replacement => "replacement",
            TaskKind::SuperResolution => "super_resolution",
            TaskKind::Infilling => "infilling",
        }
    }

    /// Distinct source clips a task of this kind draws.
    pub fn clips_needed(self) -> usize {
        match self {
            TaskKind::Add | TaskKind::Removal => 2,
            TaskKind::Replacement => 3,
            TaskKind::SuperResolution | TaskKind::Infilling => 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<TaskKind, EvalError> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match wanted.as_str() {
            "sr" => "super_resolution",
            "inpainting" => "infilling",
            other => other,
        };
        TaskKind::ALL.into_iter().find(|k| k.name() == alias).ok_or_else(|| EvalError::UnknownKind(s.to_string()))
    }
}

/// Parses `all` or a comma-separated list of kinds.
pub fn parse_kinds(spec: &str) -> Result<Vec<TaskKind>, EvalError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(TaskKind::ALL.to_vec());
    }
    let mut kinds = spec.split(',').map(TaskKind::from_str).collect::<Result<Vec<_>, _>>()?;
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{kind} task needs {need} distinct clips, the pool has {have}")]
    PoolTooSmall { kind: TaskKind, need: usize, have: usize },
    #[error("no tasks to run")]
    EmptySuite,
    #[error("unknown task kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Captions and positions a task was built from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub c_a: String,
    pub c_b: Option<String>,
    pub c_m: Option<String>,
    /// Masked region for infilling, replaced slot for replacement.
    pub onset_s: Option<f64>,
    pub offset_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditingTask {
    pub id: String,
    pub kind: TaskKind,
    /// Bound to `INPUT_WAV0..` in order.
    pub inputs: Vec<Waveform>,
    /// Role of each input: `A`, `B` or `M`.
    pub roles: Vec<String>,
    pub instruction: String,
    pub ground_truth: Waveform,
    pub meta: TaskMeta,
    pub seed: u64,
}

/// The pool with every clip brought to the same integrated loudness.
/// Clips too short or quiet to measure are kept as they are.
pub fn level_pool(pool: &[Clip]) -> Vec<Clip> {
    pool.iter()
        .map(|clip| Clip {
            caption: clip.caption.clone(),
            wav: normalize_lufs(&clip.wav, REF_LUFS).unwrap_or_else(|_| clip.wav.clone()),
        })
        .collect()
}

fn pick_distinct(pool: &[Clip], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    while picked.len() < count {
        let i = rng.random_range(0..pool.len());
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked
}

/// A time in whole hundredths of a second drawn from `[lo, hi]`.
fn centiseconds(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo * 100.0).ceil() as i64, (hi * 100.0).floor() as i64);
    rng.random_range(a..=b.max(a)) as f64 / 100.0
}

fn truncate(wav: &Waveform, len: usize) -> Waveform {
    Waveform::new(wav.samples[..len.min(wav.len())].to_vec(), wav.sample_rate)
}

/// Builds one task of `kind` from clips of `pool`, used at their given
/// levels (see [`level_pool`]). Sources are mixed at onset 0 unless the
/// kind places them.
pub fn synthesize_task(
    kind: TaskKind,
    pool: &[Clip],
    rng: &mut ChaCha8Rng,
    id: &str,
) -> Result<EditingTask, EvalError> {
    let need = kind.clips_needed();
    if pool.len() < need {
        return Err(EvalError::PoolTooSmall { kind, need, have: pool.len() });
    }
    let picked = pick_distinct(pool, need, rng);
    let seed = rng.random::<u64>() >> 11;
    let clip = |k: usize| &pool[picked[k]];
    let caption = |k: usize| clip(k).caption.clone();
    let role = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let task = |inputs, roles, instruction, ground_truth, meta| EditingTask {
        id: id.to_string(),
        kind,
        inputs,
        roles,
        instruction,
        ground_truth,
        meta,
        seed,
    };
    Ok(match kind {
        TaskKind::Add => {
            let (a, b) = (clip(0).wav.clone(), clip(1).wav.clone());
            let ground_truth = mix(&[(a.clone(), 0.0), (b.clone(), 0.0)])?;
            let meta = TaskMeta { c_a: caption(0), c_b: Some(caption(1)), ..TaskMeta::default() };
            let instruction = format!("Add {} in the background of {}", meta.c_a, caption(1));
            task(vec![a, b], role(&["A", "B"]), instruction, ground_truth, meta)
        }
        TaskKind::Removal => {
            let (a0, b0) = (clip(0).wav.clone(), clip(1).wav.clone());
            let mixture = mix(&[(a0, 0.0), (b0, 0.0)])?;
            // A and B are the separator's view of the mixture, so M = A + B
            // holds exactly.
            let (a, b) = stub::separate(&mixture, &caption(0))?;
            let c_m = format!("{} and {}", caption(0), caption(1));
            let instruction = format!("Remove {} from {}", caption(0), c_m);
            let meta = TaskMeta { c_a: caption(0), c_b: Some(caption(1)), c_m: Some(c_m), ..TaskMeta::default() };
            task(vec![mixture, a], role(&["M", "A"]), instruction, b, meta)
        }
        TaskKind::Replacement => {
            let (a0, b0, c0) = (clip(0).wav.clone(), clip(1).wav.clone(), clip(2).wav.clone());
            let slack = (c0.duration_seconds() - b0.duration_seconds()).max(0.0);
            let onset = centiseconds(rng, 0.0, slack);
            let mixture = mix(&[(c0, 0.0), (b0.clone(), onset)])?;
            let (b, c) = stub::separate(&mixture, &caption(1))?;
            let a = truncate(&a0, b0.len());
            let ground_truth = mix(&[(c, 0.0), (a.clone(), onset)])?;
            let c_m = format!("{} and {}", caption(2), caption(1));
            let instruction = format!("Replace {} with {}", caption(1), caption(0));
            let meta = TaskMeta {
                c_a: caption(0),
                c_b: Some(caption(1)),
                c_m: Some(c_m),
                onset_s: Some(onset),
                offset_s: Some(onset + b0.duration_seconds()),
            };
            task(vec![mixture, b, a], role(&["M", "B", "A"]), instruction, ground_truth, meta)
        }
        TaskKind::SuperResolution => {
            let ground_truth = resample(&clip(0).wav, WORKING_RATE);
            let input = resample(&ground_truth, SR_INPUT_RATE);
            let instruction = format!("Increase resolution of {}", caption(0));
            task(
                vec![input],
                role(&["A"]),
                instruction,
                ground_truth,
                TaskMeta { c_a: caption(0), ..TaskMeta::default() },
            )
        }
        TaskKind::Infilling => {
            let ground_truth = clip(0).wav.clone();
            let duration = ground_truth.duration_seconds();
            let length = centiseconds(rng, 0.5, 1.5_f64.min(duration / 3.0));
            let onset = centiseconds(rng, 0.2, duration - length - 0.2);
            let offset = onset + length;
            let offset = (offset * 100.0).round() / 100.0;
            let (start, end) = mask_bounds(&ground_truth, onset, offset);
            let mut samples = ground_truth.samples.to_vec();
            samples[start..end].iter_mut().for_each(|s| *s = 0.0);
            let input = Waveform::new(samples, ground_truth.sample_rate);
            let instruction = format!("Inpaint {}", caption(0));
            let meta =
                TaskMeta { c_a: caption(0), onset_s: Some(onset), offset_s: Some(offset), ..TaskMeta::default() };
            task(vec![input], role(&["A"]), instruction, ground_truth, meta)
        }
    })
}

fn mask_bounds(wav: &Waveform, onset: f64, offset: f64) -> (usize, usize) {
    let start = seconds_to_samples(onset, wav.sample_rate).min(wav.len());
    (start, seconds_to_samples(offset, wav.sample_rate).clamp(start, wav.len()))
}

/// `per_kind` tasks of every kind in `kinds`, in kind order, from one seed,
/// drawn from the leveled pool.
pub fn synthesize_suite(
    kinds: &[TaskKind],
    per_kind: usize,
    pool: &[Clip],
    seed: u64,
) -> Result<Vec<EditingTask>, EvalError> {
    let pool = level_pool(pool);
    let mut tasks = Vec::with_capacity(kinds.len() * per_kind);
    for &kind in kinds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for i in 0..per_kind {
            tasks.push(synthesize_task(kind, &pool, &mut rng, &format!("{kind}-{i:03}"))?);
        }
    }
    Ok(tasks)
}

/// Canonical program solving `task` from its inputs.
pub fn golden_script(task: &EditingTask) -> Program {
    let input = |i: usize| Expr::var(input_name(i));
    let output = || vec![Target::Name(OUTPUT_NAME.into())];
    let entry = |wav: Expr, onset: f64| Expr::Tuple { items: vec![wav, Expr::num(onset)] };
    let text = |s: &str| ("text", Expr::string(s));
    let statements = match task.kind {
        TaskKind::Add => {
            vec![Stmt::new(
                output(),
                Expr::call("MIX", vec![Expr::List { items: vec![entry(input(0), 0.0), entry(input(1), 0.0)] }], vec![]),
            )]
        }
        TaskKind::Removal => vec![Stmt::new(
            vec![Target::Wildcard, Target::Name(OUTPUT_NAME.into())],
            Expr::call("TSS", vec![input(0)], vec![text(&task.meta.c_a)]),
        )],
        TaskKind::Replacement => {
            let c_b = task.meta.c_b.as_deref().unwrap_or_default();
            let onset = task.meta.onset_s.unwrap_or(0.0);
            vec![
                Stmt::new(
                    vec![Target::Wildcard, Target::Name("WAV0".into())],
                    Expr::call("TSS", vec![input(0)], vec![text(c_b)]),
                ),
                Stmt::new(
                    output(),
                    Expr::call(
                        "MIX",
                        vec![Expr::List { items: vec![entry(Expr::var("WAV0"), 0.0), entry(input(2), onset)] }],
                        vec![],
                    ),
                ),
            ]
        }
        TaskKind::SuperResolution => vec![Stmt::new(output(), Expr::call("SR", vec![input(0)], vec![]))],
        TaskKind::Infilling => vec![Stmt::new(
            output(),
            Expr::call(
                "INPAINT",
                vec![input(0)],
                vec![
                    text(&task.meta.c_a),
                    ("onset", Expr::num(task.meta.onset_s.unwrap_or(0.0))),
                    ("offset", Expr::num(task.meta.offset_s.unwrap_or(0.0))),
                ],
            ),
        )],
    };
    Program::from_statements(statements)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    pub lsd: f64,
    /// Largest sample difference outside the masked region (infilling).
    pub unmasked_max_abs_diff: Option<f64>,
}

/// Scores an engine output against the task's ground truth.
pub fn score(task: &EditingTask, output: &Waveform) -> Result<Score, EvalError> {
    let truth = &task.ground_truth;
    match task.kind {
        TaskKind::SuperResolution => {
            let at_truth_rate = resample(output, truth.sample_rate);
            Ok(Score { lsd: lsd_band_limited(&at_truth_rate, truth, SR_SCORE_MAX_HZ)?, unmasked_max_abs_diff: None })
        }
        TaskKind::Infilling => {
            let output = resample(output, truth.sample_rate);
            let (start, end) = mask_bounds(truth, task.meta.onset_s.unwrap_or(0.0), task.meta.offset_s.unwrap_or(0.0));
            let outside = |w: &Waveform| -> Result<Waveform, DspError> {
                let tail = w.samples.get(end..).unwrap_or_default().to_vec();
                concat(&[truncate(w, start), Waveform::new(tail, w.sample_rate)])
            };
            let (a, b) = (outside(&output)?, outside(truth)?);
            let diff = if a.len() == b.len() {
                a.samples.iter().zip(b.samples.iter()).map(|(x, y)| (x - y).abs() as f64).fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            Ok(Score { lsd: lsd(&a, &b)?, unmasked_max_abs_diff: Some(diff) })
        }
        _ => Ok(Score { lsd: lsd(output, truth)?, unmasked_max_abs_diff: None }),
    }
}

/// How each task's program is obtained.
pub enum EngineMode<'a> {
    /// The task's golden script.
    Golden,
    /// A transcript replayed in task order; tasks run one at a time.
    ScriptedLlm(&'a dyn LlmClient),
    /// A live model; tasks run in parallel.
    LiveLlm(&'a dyn LlmClient),
}

impl EngineMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EngineMode::Golden => "golden",
            EngineMode::ScriptedLlm(_) => "scripted-llm",
            EngineMode::LiveLlm(_) => "live-llm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub workers: usize,
    /// Record wall time per task. Off by default so reports are
    /// byte-reproducible.
    pub timings: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { workers: std::thread::available_parallelism().map_or(1, |n| n.get()), timings: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub kind: TaskKind,
    pub task_id: String,
    pub lsd: Option<f64>,
    pub runtime_ms: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unmasked_max_abs_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub tasks: usize,
    pub failures: usize,
    pub mean_lsd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_unmasked_abs_diff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub tasks: Vec<TaskResult>,
    pub summary: BTreeMap<TaskKind, KindSummary>,
}

impl EvalReport {
    pub fn from_results(mode: &str, tasks: Vec<TaskResult>) -> EvalReport {
        let mut summary = BTreeMap::new();
        for kind in TaskKind::ALL {
            let rows: Vec<&TaskResult> = tasks.iter().filter(|t| t.kind == kind).collect();
            if rows.is_empty() {
                continue;
            }
            let scored: Vec<f64> = rows.iter().filter(|r| r.status == "ok").filter_map(|r| r.lsd).collect();
            let diffs: Vec<f64> = rows.iter().filter_map(|r| r.unmasked_max_abs_diff).collect();
            summary.insert(
                kind,
                KindSummary {
                    tasks: rows.len(),
                    failures: rows.iter().filter(|r| r.status != "ok").count(),
                    mean_lsd: (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64),
                    max_unmasked_abs_diff: (!diffs.is_empty()).then(|| diffs.iter().copied().fold(0.0, f64::max)),
                },
            );
        }
        EvalReport { mode: mode.to_string(), tasks, summary }
    }

    pub fn failures(&self) -> usize {
        self.summary.values().map(|s| s.failures).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        #[derive(Serialize)]
        struct Row<'a> {
            kind: TaskKind,
            task_id: &'a str,
            lsd: Option<f64>,
            runtime_ms: u64,
            status: &'a str,
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        for t in &self.tasks {
            writer.serialize(Row {
                kind: t.kind,
                task_id: &t.task_id,
                lsd: t.lsd,
                runtime_ms: t.runtime_ms,
                status: &t.status,
            })?;
        }
        let bytes = writer.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Writes the JSON report to `path` and the CSV next to it.
    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json())?;
        std::fs::write(path.with_extension("csv"), self.to_csv()?)?;
        Ok(())
    }
}

fn run_golden(task: &EditingTask, engine: &Engine) -> Result<Waveform, String> {
    let program = golden_script(task);
    let validated =
        compile(&program.source, &engine.table, &input_names(task.inputs.len())).map_err(|d| format!("{d:?}"))?;
    let inputs: BTreeMap<String, Waveform> =
        task.inputs.iter().enumerate().map(|(i, w)| (input_name(i), w.clone())).collect();
    let store = ArtifactStore::new();
    let ctx = ExecContext {
        table: &engine.table,
        backends: &engine.backends,
        store: &store,
        limits: engine.limits,
        seeds: SeedPolicy::new(task.seed),
    };
    execute(&validated, &inputs, &ctx, 0).map(|e| e.output.wav).map_err(|e| e.to_string())
}

fn run_with_llm(task: &EditingTask, engine: &Engine, llm: &dyn LlmClient) -> Result<Waveform, String> {
    let store = ArtifactStore::new();
    let mut session = SessionState::new(task.id.clone(), task.seed);
    for wav in &task.inputs {
        add_input(&mut session, wav, &engine.backends, &store).map_err(|e| e.to_string())?;
    }
    let record = run_round(&mut session, &task.instruction, llm, engine, &store);
    match &record.output {
        Some(id) if record.succeeded() => store.get(id).ok_or_else(|| format!("artifact {id} missing")),
        _ => Err(record.error.clone().unwrap_or_else(|| "round failed".into())),
    }
}

fn run_task(task: &EditingTask, mode: &EngineMode, engine: &Engine, timings: bool) -> TaskResult {
    let started = Instant::now();
    let output = match mode {
        EngineMode::Golden => run_golden(task, engine),
        EngineMode::ScriptedLlm(llm) | EngineMode::LiveLlm(llm) => run_with_llm(task, engine, *llm),
    };
    let scored = output.and_then(|wav| score(task, &wav).map_err(|e| e.to_string()));
    let runtime_ms = if timings { started.elapsed().as_millis() as u64 } else { 0 };
    let (lsd, unmasked_max_abs_diff, status, error) = match scored {
        Ok(s) => (Some(s.lsd), s.unmasked_max_abs_diff, "ok", None),
        Err(e) => (None, None, "failed", Some(e)),
    };
    TaskResult {
        kind: task.kind,
        task_id: task.id.clone(),
        lsd,
        runtime_ms,
        status: status.to_string(),
        unmasked_max_abs_diff,
        error,
    }
}

/// Runs every task and scores it. Failing tasks are recorded, not fatal.
pub fn run_suite(
    tasks: &[EditingTask],
    mode: &EngineMode,
    engine: &Engine,
    options: SuiteOptions,
) -> Result<EvalReport, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let workers = match mode {
        EngineMode::ScriptedLlm(_) => 1,
        _ => options.workers.clamp(1, tasks.len()),
    };
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(tasks.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let result = run_task(task, mode, engine, options.timings);
                results.lock().expect("results lock poisoned").push((i, result));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock poisoned");
    results.sort_by_key(|(i, _)| *i);
    Ok(EvalReport::from_results(mode.name(), results.into_iter().map(|(_, r)| r).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::ScriptedLlm;
    use crate::script::{format, validate};
    use pool::procedural_pool;

    fn tasks(kind: TaskKind, n: usize) -> Vec<EditingTask> {
        static POOL: std::sync::OnceLock<Vec<Clip>> = std::sync::OnceLock::new();
        let pool = POOL.get_or_init(|| level_pool(&procedural_pool(1)));
        let mut rng = ChaCha8Rng::seed_from_u64(kind as u64);
        (0..n).map(|i| synthesize_task(kind, pool, &mut rng, &format!("{kind}-{i}")).unwrap()).collect()
    }

    #[test]
    fn instructions_follow_templates() {
        let add = &tasks(TaskKind::Add, 1)[0];
        assert_eq!(
            add.instruction,
            format!("Add {} in the background of {}", add.meta.c_a, add.meta.c_b.as_ref().unwrap())
        );
        let sr = &tasks(TaskKind::SuperResolution, 1)[0];
        assert_eq!(sr.instruction, format!("Increase resolution of {}", sr.meta.c_a));
        assert!(tasks(TaskKind::Removal, 1)[0].instruction.starts_with("Remove "));
        assert!(tasks(TaskKind::Replacement, 1)[0].instruction.starts_with("Replace "));
        assert!(tasks(TaskKind::Infilling, 1)[0].instruction.starts_with("Inpaint "));
    }

    #[test]
    fn construction_laws() {
        for task in tasks(TaskKind::Removal, 4) {
            let (m, a) = (&task.inputs[0], &task.inputs[1]);
            for ((m, a), b) in m.samples.iter().zip(a.samples.iter()).zip(task.ground_truth.samples.iter()) {
                assert_eq!(m - a, *b);
            }
        }
        for task in tasks(TaskKind::Infilling, 4) {
            let (start, end) = mask_bounds(&task.ground_truth, task.meta.onset_s.unwrap(), task.meta.offset_s.unwrap());
            assert!(end > start);
            for (i, (x, y)) in task.inputs[0].samples.iter().zip(task.ground_truth.samples.iter()).enumerate() {
                if (start..end).contains(&i) {
                    assert_eq!(*x, 0.0);
                } else {
                    assert_eq!(x, y);
                }
            }
        }
        let sr = &tasks(TaskKind::SuperResolution, 1)[0];
        assert_eq!(sr.inputs[0].sample_rate, SR_INPUT_RATE);
        assert_eq!(sr.ground_truth.sample_rate, WORKING_RATE);
    }

    #[test]
    fn golden_scripts_validate_and_round_trip() {
        let table = crate::script::SignatureTable::standard();
        for kind in TaskKind::ALL {
            for task in tasks(kind, 3) {
                let program = golden_script(&task);
                let reparsed = crate::script::parse(&format(&program)).unwrap();
                assert!(program.same_structure(&reparsed), "{}", program.source);
                assert!(validate(&reparsed, &table, &input_names(task.inputs.len())).is_ok(), "{}", program.source);
            }
        }
        let removal = &tasks(TaskKind::Removal, 1)[0];
        assert_eq!(
            golden_script(removal).source.trim(),
            format!("_, OUTPUT_WAV = TSS(INPUT_WAV0, text=\"{}\")", removal.meta.c_a)
        );
        assert_eq!(golden_script(&tasks(TaskKind::Add, 1)[0]).statements.len(), 1);
    }

    #[test]
    fn exact_kinds_score_zero() {
        let engine = Engine::stubs();
        let mut all = tasks(TaskKind::Add, 3);
        all.extend(tasks(TaskKind::Removal, 3));
        all.extend(tasks(TaskKind::Replacement, 3));
        all.extend(tasks(TaskKind::Infilling, 3));
        let report = run_suite(&all, &EngineMode::Golden, &engine, SuiteOptions::default()).unwrap();
        assert_eq!(report.failures(), 0, "{}", report.to_json());
        for kind in [TaskKind::Add, TaskKind::Removal, TaskKind::Replacement] {
            assert!(report.summary[&kind].mean_lsd.unwrap() < 1e-6, "{kind}: {:?}", report.summary[&kind]);
        }
        assert_eq!(report.summary[&TaskKind::Infilling].max_unmasked_abs_diff, Some(0.0));
    }

    #[test]
    fn report_is_reproducible() {
        let engine = Engine::stubs();
        let all = synthesize_suite(&TaskKind::ALL, 2, &procedural_pool(2), 4).unwrap();
        let a = run_suite(&all, &EngineMode::Golden, &engine, SuiteOptions { workers: 4, timings: false }).unwrap();
        let b = run_suite(&all, &EngineMode::Golden, &engine, SuiteOptions { workers: 1, timings: false }).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert!(a.to_csv().unwrap().starts_with("kind,task_id,lsd,runtime_ms,status\nadd,add-000,"));
        assert_eq!(a.tasks.len(), 10);
    }

    #[test]
    fn scripted_mode_and_failures() {
        let engine = Engine::stubs();
        let all = tasks(TaskKind::Add, 2);
        let llm = ScriptedLlm::new([golden_script(&all[0]).source, "no code here".to_string()]);
        let report = run_suite(&all, &EngineMode::ScriptedLlm(&llm), &engine, SuiteOptions::default()).unwrap();
        assert_eq!(report.mode, "scripted-llm");
        assert_eq!(report.tasks[0].status, "ok");
        assert!(report.tasks[0].lsd.unwrap() < 1e-6);
        assert_eq!(report.tasks[1].status, "failed");
        assert_eq!(report.summary[&TaskKind::Add].failures, 1);
        assert!(matches!(
            run_suite(&[], &EngineMode::Golden, &engine, SuiteOptions::default()),
            Err(EvalError::EmptySuite)
        ));
    }

    #[test]
    fn small_pool_and_kind_parsing() {
        let pool = procedural_pool(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            synthesize_task(TaskKind::Replacement, &pool[..2], &mut rng, "x"),
            Err(EvalError::PoolTooSmall { need: 3, have: 2, .. })
        ));
        assert_eq!(parse_kinds("all").unwrap().len(), 5);
        assert_eq!(parse_kinds("sr,add").unwrap(), vec![TaskKind::Add, TaskKind::SuperResolution]);
        assert!(parse_kinds("louder").is_err());
    }
}
