//! Interpreter for validated programs.

mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{BackendError, BackendRegistry, GenerativeRequest};
use crate::dsp::{
    self, resample, sample_range, sample_rolloff, DspError, FilterKind, FilterParams, ParamRange, RoomSpec, Waveform,
};
use crate::script::{
    BinOpKind, Expr, ParamDefault, SemanticType, Signature, SignatureTable, Target, ValidatedProgram, OUTPUT_NAME,
};

pub use store::{artifact_id, is_artifact_id, ArtifactStore};

/// Image-source reflection order used by ROOM_SIMULATE.
pub const ROOM_MAX_ORDER: u32 = 10;
const ROOM_SAMPLING_ATTEMPTS: usize = 200;
const MAX_LIST_ITEMS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceLimits {
    pub max_statements: usize,
    pub max_total_audio_seconds: f64,
    pub max_wall_ms: u64,
    pub max_single_audio_seconds: f64,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            max_statements: 64,
            max_total_audio_seconds: 600.0,
            max_wall_ms: 120_000,
            max_single_audio_seconds: 300.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub session_seed: u64,
}

impl SeedPolicy {
    pub fn new(session_seed: u64) -> SeedPolicy {
        SeedPolicy { session_seed }
    }

    /// Seed for the call on `line` of round `round`. Independent of the
    /// statement's content, so editing one line leaves the others stable.
    pub fn seed(&self, round: u64, line: usize) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.session_seed.to_le_bytes());
        hasher.update(round.to_le_bytes());
        hasher.update((line as u64).to_le_bytes());
        // Keep seeds exactly representable as JSON numbers.
        u64::from_le_bytes(hasher.finalize()[..8].try_into().expect("8 bytes")) >> 11
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    pub id: String,
    pub wav: Waveform,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Audio(Audio),
    Num(f64),
    Text(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Audio(_) => "audio",
            Value::Num(_) => "number",
            Value::Text(_) => "text",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
        }
    }

    /// Every audio artifact inside the value, depth first.
    pub fn audio(&self) -> Vec<&Audio> {
        let mut out = Vec::new();
        fn walk<'a>(v: &'a Value, out: &mut Vec<&'a Audio>) {
            match v {
                Value::Audio(a) => out.push(a),
                Value::List(items) | Value::Tuple(items) => items.iter().for_each(|i| walk(i, out)),
                Value::Num(_) | Value::Text(_) => {}
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn summary(&self) -> String {
        match self {
            Value::Audio(a) => format!("{} ({:.2} s @ {} Hz)", &a.id[..8], a.wav.duration_seconds(), a.wav.sample_rate),
            Value::Num(v) => format!("{v}"),
            Value::Text(t) => format!("{t:?}"),
            Value::List(items) => format!("[{}]", items.iter().map(Value::summary).collect::<Vec<_>>().join(", ")),
            Value::Tuple(items) => format!("({})", items.iter().map(Value::summary).collect::<Vec<_>>().join(", ")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub line: usize,
    pub comment: Option<String>,
    pub op: Option<String>,
    pub targets: Vec<String>,
    pub inputs: String,
    pub outputs: Vec<String>,
    pub elapsed_ms: u64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Error)]
pub enum ExecErrorKind {
    #[error("missing input {0}")]
    MissingInput(String),
    #[error("{0}")]
    Arithmetic(String),
    #[error("{0}")]
    Arity(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("{0}")]
    Bounds(String),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    /// Should be unreachable for validated programs.
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Error)]
pub struct ExecError {
    pub line: usize,
    pub kind: ExecErrorKind,
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

/// Everything an execution needs besides the program and its inputs.
pub struct ExecContext<'a> {
    pub table: &'a SignatureTable,
    pub backends: &'a BackendRegistry,
    pub store: &'a ArtifactStore,
    pub limits: ResourceLimits,
    pub seeds: SeedPolicy,
}

#[derive(Clone, Debug)]
pub struct Execution {
    pub bindings: BTreeMap<String, Value>,
    pub output: Audio,
    pub trace: ExecutionTrace,
}

/// Runs `program` statement by statement. Every generative or randomized
/// call on line `l` is seeded with `seeds.seed(round, l)`.
pub fn execute(
    program: &ValidatedProgram,
    inputs: &BTreeMap<String, Waveform>,
    ctx: &ExecContext,
    round: u64,
) -> Result<Execution, ExecError> {
    let statements = program.statements();
    if let Some(stmt) = statements.get(ctx.limits.max_statements) {
        return Err(ExecError {
            line: stmt.line,
            kind: ExecErrorKind::Limit(format!("more than {} statements", ctx.limits.max_statements)),
        });
    }
    let mut env: BTreeMap<String, Value> = BTreeMap::new();
    for name in program.program.free_variables() {
        let wav = inputs.get(&name).ok_or_else(|| ExecError {
            line: first_use(program, &name),
            kind: ExecErrorKind::MissingInput(name.clone()),
        })?;
        env.insert(name, Value::Audio(Audio { id: ctx.store.put(wav), wav: wav.clone() }));
    }
    let started = Instant::now();
    let mut total_audio = 0.0;
    let mut trace = ExecutionTrace::default();
    for stmt in statements {
        let at = |kind: ExecErrorKind| ExecError { line: stmt.line, kind };
        let elapsed = started.elapsed().as_millis() as u64;
        if elapsed > ctx.limits.max_wall_ms {
            return Err(at(ExecErrorKind::Limit(format!("wall time {elapsed} ms over {} ms", ctx.limits.max_wall_ms))));
        }
        let step_start = Instant::now();
        let mut frame =
            Frame { ctx, env: &env, seed: ctx.seeds.seed(round, stmt.line), seed_used: None, summary: None };
        let value = frame.eval(&stmt.value).map_err(at)?;
        let (seed_used, summary) = (frame.seed_used, frame.summary.take());
        let produced = value.audio();
        // Only calls create audio; plain references and lists reuse it.
        let created = if matches!(stmt.value, Expr::Call { .. }) { produced.as_slice() } else { &[] };
        for audio in created {
            let seconds = audio.wav.duration_seconds();
            if seconds > ctx.limits.max_single_audio_seconds {
                return Err(at(ExecErrorKind::Limit(format!(
                    "clip of {seconds:.1} s over {} s",
                    ctx.limits.max_single_audio_seconds
                ))));
            }
            total_audio += seconds;
        }
        if total_audio > ctx.limits.max_total_audio_seconds {
            return Err(at(ExecErrorKind::Limit(format!(
                "{total_audio:.1} s of audio produced, over {} s",
                ctx.limits.max_total_audio_seconds
            ))));
        }
        let outputs = produced.iter().map(|a| a.id.clone()).collect();
        bind(&mut env, &stmt.targets, value).map_err(at)?;
        trace.steps.push(TraceStep {
            line: stmt.line,
            comment: stmt.comment.clone(),
            op: stmt.op().map(str::to_string),
            targets: stmt.targets.iter().map(|t| t.name().unwrap_or("_").to_string()).collect(),
            inputs: summary.unwrap_or_else(|| crate::script::format_expr(&stmt.value)),
            outputs,
            elapsed_ms: step_start.elapsed().as_millis() as u64,
            seed: seed_used,
        });
    }
    let output = match env.get(OUTPUT_NAME) {
        Some(Value::Audio(audio)) => audio.clone(),
        Some(other) => {
            return Err(ExecError {
                line: statements.last().map_or(0, |s| s.line),
                kind: ExecErrorKind::Internal(format!("{OUTPUT_NAME} holds a {}", other.kind())),
            })
        }
        None => {
            return Err(ExecError {
                line: statements.last().map_or(0, |s| s.line),
                kind: ExecErrorKind::Internal(format!("{OUTPUT_NAME} was never assigned")),
            })
        }
    };
    Ok(Execution { bindings: env, output, trace })
}

fn first_use(program: &ValidatedProgram, name: &str) -> usize {
    program
        .statements()
        .iter()
        .find(|s| {
            let mut found = false;
            s.value.walk(&mut |e| found |= matches!(e, Expr::Var { name: n } if n == name));
            found
        })
        .map_or(0, |s| s.line)
}

fn bind(env: &mut BTreeMap<String, Value>, targets: &[Target], value: Value) -> Result<(), ExecErrorKind> {
    if let [target] = targets {
        if let Some(name) = target.name() {
            env.insert(name.to_string(), value);
        }
        return Ok(());
    }
    let items = match value {
        Value::Tuple(items) | Value::List(items) => items,
        other => return Err(ExecErrorKind::Internal(format!("cannot unpack a {}", other.kind()))),
    };
    if items.len() != targets.len() {
        return Err(ExecErrorKind::Arity(format!(
            "cannot unpack {} values into {} targets",
            items.len(),
            targets.len()
        )));
    }
    for (target, item) in targets.iter().zip(items) {
        if let Some(name) = target.name() {
            env.insert(name.to_string(), item);
        }
    }
    Ok(())
}

/// Evaluation state for one statement.
struct Frame<'a, 'b> {
    ctx: &'a ExecContext<'b>,
    env: &'a BTreeMap<String, Value>,
    seed: u64,
    seed_used: Option<u64>,
    summary: Option<String>,
}

type EvalResult = Result<Value, ExecErrorKind>;

fn internal(message: impl Into<String>) -> ExecErrorKind {
    ExecErrorKind::Internal(message.into())
}

impl Frame<'_, '_> {
    fn eval(&mut self, expr: &Expr) -> EvalResult {
        match expr {
            Expr::Var { name } => {
                self.env.get(name).cloned().ok_or_else(|| internal(format!("unbound variable `{name}`")))
            }
            Expr::Num { value } => Ok(Value::Num(value.to_f64())),
            Expr::Str { value } => Ok(Value::Text(value.clone())),
            Expr::List { items } => Ok(Value::List(items.iter().map(|i| self.eval(i)).collect::<Result<_, _>>()?)),
            Expr::Tuple { items } => Ok(Value::Tuple(items.iter().map(|i| self.eval(i)).collect::<Result<_, _>>()?)),
            Expr::BinOp { op, lhs, rhs } => {
                let (a, b) = (self.eval(lhs)?, self.eval(rhs)?);
                binop(*op, a, b)
            }
            Expr::Call { op, positional, keyword } => {
                let sig = self.ctx.table.get(op).ok_or_else(|| internal(format!("unknown operation `{op}`")))?;
                let bound = sig.bind(positional, keyword).map_err(internal)?;
                let mut args = Vec::with_capacity(sig.params.len());
                for (param, slot) in sig.params.iter().zip(&bound.slots) {
                    let value = match (slot, &param.default) {
                        (Some(expr), _) => Some(self.eval(expr)?),
                        (None, ParamDefault::Num(v)) => Some(Value::Num(*v)),
                        (None, ParamDefault::Text(t)) => Some(Value::Text(t.clone())),
                        (None, ParamDefault::Absent) => None,
                        (None, ParamDefault::Required) => return Err(internal(format!("{op} lacks `{}`", param.name))),
                    };
                    args.push(value);
                }
                self.summary = Some(call_summary(sig, &args));
                self.call(sig, Args { sig, values: args })
            }
        }
    }

    fn rng(&mut self) -> ChaCha8Rng {
        self.seed_used = Some(self.seed);
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn call(&mut self, sig: &Signature, args: Args) -> EvalResult {
        if sig.generative {
            return self.generate(sig, &args);
        }
        let store = self.ctx.store;
        let audio = |wav: Waveform| Value::Audio(Audio { id: store.put(&wav), wav });
        match sig.name.as_str() {
            "LEN" => Ok(Value::Num(args.audio("wav")?.duration_seconds())),
            "MIX" => {
                let mut entries = Vec::new();
                for item in args.list("wavs")? {
                    match item {
                        Value::Tuple(pair) if pair.len() == 2 => {
                            let onset = as_num(&pair[1])?;
                            entries.push((as_audio(&pair[0])?.clone(), onset));
                        }
                        other => return Err(internal(format!("MIX entry is a {}", other.kind()))),
                    }
                }
                let rate = entries.iter().map(|(w, _)| w.sample_rate).max().unwrap_or(dsp::WORKING_RATE);
                let entries: Vec<(Waveform, f64)> = entries.into_iter().map(|(w, o)| (resample(&w, rate), o)).collect();
                Ok(audio(dsp::mix(&entries)?))
            }
            "CAT" => {
                let wavs: Vec<Waveform> =
                    args.list("wavs")?.iter().map(|v| as_audio(v).cloned()).collect::<Result<_, _>>()?;
                let rate = wavs.iter().map(|w| w.sample_rate).max().unwrap_or(dsp::WORKING_RATE);
                let wavs: Vec<Waveform> = wavs.iter().map(|w| resample(w, rate)).collect();
                Ok(audio(dsp::concat(&wavs)?))
            }
            "SPLIT" => {
                let points: Vec<f64> = args.list("break_points")?.iter().map(as_num).collect::<Result<_, _>>()?;
                let parts = dsp::split(args.audio("wav")?, &points)?;
                Ok(Value::List(parts.into_iter().map(audio).collect()))
            }
            "CLIP" => {
                let wav = args.audio("wav")?;
                let (onset, offset) = (args.num("onset")?, args.num("offset")?);
                let duration = wav.duration_seconds();
                if !(onset >= 0.0 && onset < offset && offset <= duration + 0.5 / wav.sample_rate as f64) {
                    return Err(ExecErrorKind::Bounds(format!(
                        "CLIP range [{onset}, {offset}] s does not fit a {duration:.3} s clip"
                    )));
                }
                Ok(audio(dsp::clip(wav, onset, offset)?))
            }
            "ADJUST_VOL" => Ok(audio(dsp::adjust_gain_db(args.audio("wav")?, args.num("volume")?)?)),
            "ADD_NOISE" => {
                let mut rng = self.rng();
                let snr = sample_range(args.range("min_snr_db", "max_snr_db")?, &mut rng)?;
                let wav = args.audio("wav")?;
                if wav.is_silent() {
                    return Ok(audio(wav.clone()));
                }
                Ok(audio(dsp::add_noise_snr(wav, snr, &mut rng)?))
            }
            "LOW_PASS" | "HIGH_PASS" => {
                let mut rng = self.rng();
                let cutoff = sample_range(args.range("min_cutoff_freq", "max_cutoff_freq")?, &mut rng)?;
                let rolloff = sample_rolloff(args.range("min_rolloff", "max_rolloff")?, &mut rng)?;
                let wav = args.audio("wav")?;
                let nyquist = wav.sample_rate as f64 / 2.0;
                let kind = if sig.name == "LOW_PASS" { FilterKind::LowPass } else { FilterKind::HighPass };
                // A low-pass at or above Nyquist passes everything.
                if kind == FilterKind::LowPass && cutoff >= nyquist {
                    return Ok(audio(wav.clone()));
                }
                let params = FilterParams { kind, cutoff_hz: cutoff, rolloff_db_per_octave: rolloff };
                Ok(audio(dsp::biquad_filter(wav, &params)?))
            }
            "ADD_RIR" => {
                let wav = args.audio("wav")?;
                let ir = resample(args.audio("ir")?, wav.sample_rate);
                Ok(audio(dsp::convolve_rir(wav, &ir)?))
            }
            "ROOM_SIMULATE" => {
                let mut ranges = [ParamRange::new(0.0, 0.0); 10];
                for (range, (name, _, _)) in ranges.iter_mut().zip(crate::script::ROOM_DEFAULTS) {
                    *range = args.range(&format!("min_{name}"), &format!("max_{name}"))?;
                }
                let mut rng = self.rng();
                let wav = args.audio("wav")?;
                for _ in 0..ROOM_SAMPLING_ATTEMPTS {
                    let spec = RoomSpec::sample(&ranges, &mut rng)?;
                    if spec.check().is_ok() {
                        return Ok(audio(dsp::simulate_room(wav, &spec, ROOM_MAX_ORDER)?));
                    }
                }
                Err(ExecErrorKind::Bounds(format!(
                    "no room drawn in {ROOM_SAMPLING_ATTEMPTS} attempts keeps source and microphone inside"
                )))
            }
            other => Err(internal(format!("no interpreter for {other}"))),
        }
    }

    fn generate(&mut self, sig: &Signature, args: &Args) -> EvalResult {
        let mut request = GenerativeRequest::new(&sig.name);
        for (param, value) in sig.params.iter().zip(&args.values) {
            match value {
                None => {}
                Some(Value::Text(t)) if param.name == "text" => request.text = Some(t.clone()),
                Some(Value::Text(t)) => request = request.with_param_text(&param.name, t),
                Some(Value::Num(v)) => request = request.with_num(&param.name, *v),
                Some(Value::Audio(a)) => request = request.with_input(a.wav.clone()),
                Some(other) => {
                    return Err(internal(format!("{} got a {} for `{}`", sig.name, other.kind(), param.name)))
                }
            }
        }
        if let Some(length) = request.num("length") {
            if length > self.ctx.limits.max_single_audio_seconds {
                return Err(ExecErrorKind::Limit(format!(
                    "{} length {length} s over {} s",
                    sig.name, self.ctx.limits.max_single_audio_seconds
                )));
            }
        }
        // A user-supplied seed (SR) wins over the derived one.
        let seed = match request.num("seed") {
            Some(s) if s >= 0.0 && s.fract() == 0.0 && s < 2f64.powi(53) => s as u64,
            Some(s) => return Err(ExecErrorKind::Bounds(format!("seed {s} must be a non-negative integer"))),
            None => self.seed,
        };
        self.seed_used = Some(seed);
        request = request.with_num("seed", seed as f64);
        let response = self.ctx.backends.dispatch(&request)?;
        let store = self.ctx.store;
        let mut outputs: Vec<Value> =
            response.outputs.into_iter().map(|wav| Value::Audio(Audio { id: store.put(&wav), wav })).collect();
        match sig.result.semantic_type() {
            SemanticType::TupleOf(_) => Ok(Value::Tuple(outputs)),
            _ if outputs.len() == 1 => Ok(outputs.remove(0)),
            _ => Err(internal(format!("{} returned {} outputs", sig.name, outputs.len()))),
        }
    }
}

/// Argument values by parameter slot, defaults filled in.
struct Args<'s> {
    sig: &'s Signature,
    values: Vec<Option<Value>>,
}

impl Args<'_> {
    fn get(&self, name: &str) -> Result<&Value, ExecErrorKind> {
        let (idx, _) = self.sig.param(name).ok_or_else(|| internal(format!("{} has no `{name}`", self.sig.name)))?;
        self.values[idx].as_ref().ok_or_else(|| internal(format!("{} lacks `{name}`", self.sig.name)))
    }

    fn audio(&self, name: &str) -> Result<&Waveform, ExecErrorKind> {
        as_audio(self.get(name)?)
    }

    fn num(&self, name: &str) -> Result<f64, ExecErrorKind> {
        as_num(self.get(name)?)
    }

    fn list(&self, name: &str) -> Result<&[Value], ExecErrorKind> {
        match self.get(name)? {
            Value::List(items) => Ok(items),
            other => Err(internal(format!("`{name}` is a {}, expected a list", other.kind()))),
        }
    }

    fn range(&self, min: &str, max: &str) -> Result<ParamRange, ExecErrorKind> {
        Ok(ParamRange::new(self.num(min)?, self.num(max)?))
    }
}

fn as_audio(value: &Value) -> Result<&Waveform, ExecErrorKind> {
    match value {
        Value::Audio(a) => Ok(&a.wav),
        other => Err(internal(format!("expected audio, got a {}", other.kind()))),
    }
}

fn as_num(value: &Value) -> Result<f64, ExecErrorKind> {
    match value {
        Value::Num(v) => Ok(*v),
        other => Err(internal(format!("expected a number, got a {}", other.kind()))),
    }
}

fn call_summary(sig: &Signature, args: &[Option<Value>]) -> String {
    let parts: Vec<String> = sig
        .params
        .iter()
        .zip(args)
        .filter_map(|(p, v)| v.as_ref().map(|v| format!("{}={}", p.name, v.summary())))
        .collect();
    format!("{}({})", sig.name, parts.join(", "))
}

fn binop(op: BinOpKind, a: Value, b: Value) -> EvalResult {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => {
            let v = match op {
                BinOpKind::Add => x + y,
                BinOpKind::Sub => x - y,
                BinOpKind::Mul => x * y,
                BinOpKind::Div if y == 0.0 => return Err(ExecErrorKind::Arithmetic("division by zero".into())),
                BinOpKind::Div => x / y,
            };
            if !v.is_finite() {
                return Err(ExecErrorKind::Arithmetic(format!("{x} {} {y} is not finite", op.symbol())));
            }
            Ok(Value::Num(v))
        }
        (Value::List(items), Value::Num(n)) | (Value::Num(n), Value::List(items)) if op == BinOpKind::Mul => {
            if n < 0.0 || n.fract() != 0.0 {
                return Err(ExecErrorKind::Arithmetic(format!(
                    "list repetition count {n} must be a non-negative integer"
                )));
            }
            if n * items.len() as f64 > MAX_LIST_ITEMS as f64 {
                return Err(ExecErrorKind::Limit(format!("list of more than {MAX_LIST_ITEMS} items")));
            }
            let count = n as usize;
            let mut out = Vec::with_capacity(items.len() * count);
            for _ in 0..count {
                out.extend(items.iter().cloned());
            }
            Ok(Value::List(out))
        }
        (a, b) => Err(internal(format!("operator `{}` on a {} and a {}", op.symbol(), a.kind(), b.kind()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::noise;
    use crate::script::{compile, input_names};

    fn run(source: &str, inputs: &[Waveform]) -> Result<Execution, ExecError> {
        run_with(source, inputs, ResourceLimits::default())
    }

    fn run_with(source: &str, inputs: &[Waveform], limits: ResourceLimits) -> Result<Execution, ExecError> {
        let table = SignatureTable::standard();
        let backends = BackendRegistry::stubs();
        let store = ArtifactStore::new();
        let ctx = ExecContext { table: &table, backends: &backends, store: &store, limits, seeds: SeedPolicy::new(1) };
        let program = compile(source, &table, &input_names(inputs.len())).expect("valid program");
        let named = inputs.iter().enumerate().map(|(i, w)| (crate::script::input_name(i), w.clone())).collect();
        execute(&program, &named, &ctx, 0)
    }

    #[test]
    fn single_entry_mix_is_identity() {
        let input = noise(1, 1.0, 16000, 0.5);
        let out = run("OUTPUT_WAV = MIX([(INPUT_WAV0, 0)])", std::slice::from_ref(&input)).unwrap();
        assert_eq!(out.output.wav, input);
        assert_eq!(out.trace.steps.len(), 1);
    }

    #[test]
    fn arithmetic_and_repetition() {
        let input = noise(2, 0.5, 16000, 0.5);
        let out = run("N = 2 + 3\nL = [INPUT_WAV0] * N\nOUTPUT_WAV = CAT(L)", std::slice::from_ref(&input)).unwrap();
        assert_eq!(out.bindings["N"], Value::Num(5.0));
        assert_eq!(out.output.wav.len(), 5 * input.len());
        let err = run(
            "Z = LEN(INPUT_WAV0) - LEN(INPUT_WAV0)\nN = 1 / Z\nOUTPUT_WAV = INPUT_WAV0",
            std::slice::from_ref(&input),
        )
        .unwrap_err();
        assert!(matches!(err.kind, ExecErrorKind::Arithmetic(_)));
        assert_eq!(err.line, 2);
        let err = run("L = [INPUT_WAV0] * (0 - 4 * LEN(INPUT_WAV0))\nOUTPUT_WAV = CAT(L)", &[input]).unwrap_err();
        assert!(matches!(err.kind, ExecErrorKind::Arithmetic(_)));
    }

    #[test]
    fn statement_limit_names_the_line() {
        let source: String = (0..70).map(|i| format!("X{i} = 1\n")).collect::<String>() + "OUTPUT_WAV = INPUT_WAV0\n";
        let err = run(&source, &[noise(3, 0.1, 16000, 0.5)]).unwrap_err();
        assert!(matches!(err.kind, ExecErrorKind::Limit(_)));
        assert_eq!(err.line, 65);
    }

    #[test]
    fn generation_limits() {
        let err = run("OUTPUT_WAV = TTA(\"rain\", length=400)", &[]).unwrap_err();
        assert!(matches!(err.kind, ExecErrorKind::Limit(_)));
        let limits = ResourceLimits { max_total_audio_seconds: 10.0, ..ResourceLimits::default() };
        let source = "A = TTA(\"rain\", length=4)\nB = TTA(\"wind\", length=4)\nOUTPUT_WAV = TTA(\"dog\", length=4)";
        let err = run_with(source, &[], limits).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn seeds_depend_on_round_and_line_only() {
        let seeds = SeedPolicy::new(9);
        assert_eq!(seeds.seed(0, 3), SeedPolicy::new(9).seed(0, 3));
        assert_ne!(seeds.seed(0, 3), seeds.seed(1, 3));
        assert_ne!(seeds.seed(0, 3), seeds.seed(0, 4));
        assert!(seeds.seed(5, 5) < 1 << 53);
    }

    #[test]
    fn user_seed_is_forwarded() {
        let input = noise(4, 0.5, 16000, 0.3);
        let out = run("OUTPUT_WAV = SR(INPUT_WAV0, seed=77)", &[input]).unwrap();
        assert_eq!(out.trace.steps[0].seed, Some(77));
        assert_eq!(out.output.wav.sample_rate, 48000);
    }

    #[test]
    fn clip_bounds() {
        let input = noise(5, 1.0, 16000, 0.3);
        let err = run("OUTPUT_WAV = CLIP(INPUT_WAV0, onset=0.5, offset=2)", &[input]).unwrap_err();
        assert!(matches!(err.kind, ExecErrorKind::Bounds(_)));
    }

    #[test]
    fn mixed_rates_are_aligned() {
        let input = noise(6, 0.5, 16000, 0.3);
        let out = run("HI = SR(INPUT_WAV0)\nOUTPUT_WAV = MIX([(HI, 0), (INPUT_WAV0, 0.1)])", &[input]).unwrap();
        assert_eq!(out.output.wav.sample_rate, 48000);
        assert_eq!(out.output.wav.len(), 48000 * 6 / 10);
    }

    #[test]
    fn randomized_ops_are_seeded() {
        let input = noise(7, 1.0, 16000, 0.3);
        let source = "A = ADD_NOISE(INPUT_WAV0)\nB = LOW_PASS(A)\nC = HIGH_PASS(B)\nOUTPUT_WAV = ROOM_SIMULATE(C)";
        let a = run(source, std::slice::from_ref(&input)).unwrap();
        let b = run(source, &[input]).unwrap();
        assert_eq!(a.output, b.output);
        assert!(a.trace.steps.iter().all(|s| s.seed.is_some()));
    }
}
