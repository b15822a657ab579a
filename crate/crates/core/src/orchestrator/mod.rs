//! Instruction-to-audio rounds: captioning, prompting, code repair and
//! execution, with the per-session history that follow-up rounds build on.

pub mod llm;
pub mod prompt;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{stub, BackendRegistry, GenerativeRequest};
use crate::dsp::Waveform;
use crate::exec::{execute, ArtifactStore, ExecContext, ExecErrorKind, ExecutionTrace, ResourceLimits, SeedPolicy};
use crate::script::{compile, extract_code, input_name, input_names, render, Program, SignatureTable};

pub use llm::{ChatMessage, LlmClient, LlmConfig, LlmError, OpenAiClient, ScriptedLlm};
pub use prompt::{build_first_prompt, build_followup_prompt, repair_message, PromptBundle};

/// Question put to the captioning backend for every input.
pub const CAPTION_QUESTION: &str = "write an audio caption to describe the sound";

/// Re-prompts allowed after the first response fails to parse or validate.
pub const MAX_REPAIRS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub name: String,
    pub artifact_id: String,
    pub caption: String,
    pub sample_rate: u32,
    pub duration_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Ok,
    Repaired,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// No response yielded a program that parses and validates.
    Validation,
    /// The language model could not be reached or answered nothing.
    Llm,
    /// A validated program failed while running.
    Execution,
    /// A generative backend failed while the program ran.
    Backend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub user_instruction: String,
    pub prompt_sent: String,
    /// Every response received, the last one being the one used.
    pub llm_responses: Vec<String>,
    pub code: Option<String>,
    pub program: Option<Program>,
    pub trace: Option<ExecutionTrace>,
    /// Id of the OUTPUT_WAV artifact.
    pub output: Option<String>,
    /// Every artifact created by the round, in trace order.
    pub artifacts: Vec<String>,
    pub status: RoundStatus,
    pub repair_attempts: usize,
    /// Parser or validator messages from the last failed attempt.
    pub diagnostics: Vec<String>,
    pub failure: Option<FailureKind>,
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

impl RoundRecord {
    pub fn llm_response(&self) -> Option<&str> {
        self.llm_responses.last().map(String::as_str)
    }

    pub fn succeeded(&self) -> bool {
        self.status != RoundStatus::Failed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub session_seed: u64,
    pub inputs: Vec<InputRecord>,
    pub rounds: Vec<RoundRecord>,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, session_seed: u64) -> SessionState {
        SessionState { session_id: session_id.into(), session_seed, inputs: Vec::new(), rounds: Vec::new() }
    }

    pub fn captions(&self) -> Vec<(String, String)> {
        self.inputs.iter().map(|i| (i.name.clone(), i.caption.clone())).collect()
    }

    pub fn instructions(&self) -> Vec<String> {
        self.rounds.iter().map(|r| r.user_instruction.clone()).collect()
    }

    /// Prompt for the next round given the history so far.
    pub fn next_prompt(&self, instruction: &str, scriptwriting: bool) -> PromptBundle {
        if self.rounds.is_empty() {
            prompt::first_prompt_bundle(&self.captions(), instruction, scriptwriting)
        } else {
            prompt::followup_prompt_bundle(&self.captions(), &self.instructions(), instruction, scriptwriting)
        }
    }

    /// Every artifact id the session refers to.
    pub fn referenced_artifacts(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inputs.iter().map(|i| i.artifact_id.clone()).collect();
        for round in &self.rounds {
            ids.extend(round.artifacts.iter().cloned());
            ids.extend(round.output.iter().cloned());
        }
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Settings shared by every round.
pub struct Engine {
    pub table: SignatureTable,
    pub backends: BackendRegistry,
    pub limits: ResourceLimits,
    pub max_repairs: usize,
    pub scriptwriting: bool,
}

impl Engine {
    pub fn new(backends: BackendRegistry) -> Engine {
        Engine {
            table: SignatureTable::standard(),
            backends,
            limits: ResourceLimits::default(),
            max_repairs: MAX_REPAIRS,
            scriptwriting: false,
        }
    }

    /// Engine with stub backends.
    pub fn stubs() -> Engine {
        Engine::new(BackendRegistry::stubs())
    }
}

/// Captions one clip through the CAPTION backend, falling back to the
/// stub captioner when the backend fails.
pub fn caption_one(backends: &BackendRegistry, wav: &Waveform, seed: u64) -> String {
    let request = GenerativeRequest::new("CAPTION")
        .with_text(CAPTION_QUESTION)
        .with_num("seed", seed as f64)
        .with_input(wav.clone());
    match backends.dispatch(&request) {
        Ok(response) => match response.caption() {
            Some(caption) if !caption.trim().is_empty() => caption.trim().to_string(),
            _ => stub::caption(wav),
        },
        Err(err) => {
            log::warn!("captioning backend failed, using stub caption: {err}");
            stub::caption(wav)
        }
    }
}

/// One caption per clip, keyed `INPUT_WAVn` in order.
pub fn caption_inputs(backends: &BackendRegistry, inputs: &[Waveform], seed: u64) -> BTreeMap<String, String> {
    inputs.iter().enumerate().map(|(i, wav)| (input_name(i), caption_one(backends, wav, seed))).collect()
}

/// Registers `wav` as the next `INPUT_WAVn`, storing and captioning it.
pub fn add_input<'s>(
    session: &'s mut SessionState,
    wav: &Waveform,
    backends: &BackendRegistry,
    store: &ArtifactStore,
) -> std::io::Result<&'s InputRecord> {
    let artifact_id = store.try_put(wav)?;
    let caption = caption_one(backends, wav, session.session_seed);
    session.inputs.push(InputRecord {
        name: input_name(session.inputs.len()),
        artifact_id,
        caption,
        sample_rate: wav.sample_rate,
        duration_s: wav.duration_seconds(),
    });
    Ok(session.inputs.last().expect("just pushed"))
}

/// Runs one instruction against the session and appends its record,
/// whatever the outcome. Only the original inputs are visible to the
/// program; earlier outputs are reached by regenerating from them.
pub fn run_round<'s>(
    session: &'s mut SessionState,
    instruction: &str,
    llm: &dyn LlmClient,
    engine: &Engine,
    store: &ArtifactStore,
) -> &'s RoundRecord {
    let started = Instant::now();
    let index = session.rounds.len();
    let prompt = session.next_prompt(instruction, engine.scriptwriting).render();
    let mut record = RoundRecord {
        index,
        user_instruction: instruction.trim().to_string(),
        prompt_sent: prompt.clone(),
        llm_responses: Vec::new(),
        code: None,
        program: None,
        trace: None,
        output: None,
        artifacts: Vec::new(),
        status: RoundStatus::Failed,
        repair_attempts: 0,
        diagnostics: Vec::new(),
        failure: None,
        error: None,
        elapsed_ms: 0,
    };
    let allowed = input_names(session.inputs.len());
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut validated = None;
    for attempt in 0..=engine.max_repairs {
        record.repair_attempts = attempt;
        let response = match llm.chat(&messages) {
            Ok(response) => response,
            Err(err) => {
                record.failure = Some(FailureKind::Llm);
                record.error = Some(err.to_string());
                break;
            }
        };
        record.llm_responses.push(response.clone());
        let diagnostics = match extract_code(&response) {
            Err(err) => err.to_string(),
            Ok(code) => {
                record.code = Some(code.clone());
                match compile(&code, &engine.table, &allowed) {
                    Ok(program) => {
                        record.diagnostics.clear();
                        validated = Some(program);
                        break;
                    }
                    Err(diags) => {
                        record.diagnostics = diags.iter().map(ToString::to_string).collect();
                        render(&diags)
                    }
                }
            }
        };
        if record.diagnostics.is_empty() {
            record.diagnostics.push(diagnostics.clone());
        }
        messages.push(ChatMessage::assistant(response));
        messages.push(ChatMessage::user(repair_message(&diagnostics)));
    }

    match validated {
        None => {
            if record.failure.is_none() {
                record.failure = Some(FailureKind::Validation);
                record.error = Some(format!("no valid program after {} attempt(s)", record.llm_responses.len()));
            }
        }
        Some(program) => {
            record.program = Some(program.program.clone());
            let inputs: BTreeMap<String, Waveform> =
                session.inputs.iter().filter_map(|i| store.get(&i.artifact_id).map(|w| (i.name.clone(), w))).collect();
            let ctx = ExecContext {
                table: &engine.table,
                backends: &engine.backends,
                store,
                limits: engine.limits,
                seeds: SeedPolicy::new(session.session_seed),
            };
            match execute(&program, &inputs, &ctx, index as u64) {
                Ok(execution) => {
                    let mut artifacts: Vec<String> = Vec::new();
                    for step in &execution.trace.steps {
                        for id in &step.outputs {
                            if !artifacts.contains(id) {
                                artifacts.push(id.clone());
                            }
                        }
                    }
                    record.output = Some(execution.output.id.clone());
                    record.artifacts = artifacts;
                    record.trace = Some(execution.trace);
                    record.status = if record.repair_attempts == 0 { RoundStatus::Ok } else { RoundStatus::Repaired };
                }
                Err(err) => {
                    let backend = matches!(err.kind, ExecErrorKind::Backend(_));
                    record.failure = Some(if backend { FailureKind::Backend } else { FailureKind::Execution });
                    record.error = Some(err.to_string());
                }
            }
        }
    }
    record.elapsed_ms = started.elapsed().as_millis() as u64;
    session.rounds.push(record);
    session.rounds.last().expect("just pushed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::pool::fixture_inputs;
    use crate::script::fixtures::EXAMPLES;
    use crate::script::OUTPUT_NAME;

    fn session_with_input() -> (SessionState, Engine, ArtifactStore) {
        let engine = Engine::stubs();
        let store = ArtifactStore::new();
        let mut session = SessionState::new("s", 7);
        add_input(&mut session, &fixture_inputs(1, 0)[0], &engine.backends, &store).unwrap();
        (session, engine, store)
    }

    #[test]
    fn captions_keyed_by_input_name() {
        let backends = BackendRegistry::stubs();
        let wavs = fixture_inputs(2, 0);
        let captions = caption_inputs(&backends, &wavs, 1);
        assert_eq!(captions.keys().cloned().collect::<Vec<_>>(), vec!["INPUT_WAV0", "INPUT_WAV1"]);
        assert_eq!(captions, caption_inputs(&backends, &wavs, 1));
        assert!(caption_inputs(&backends, &[], 1).is_empty());
    }

    #[test]
    fn child_speech_round_succeeds() {
        let (mut session, engine, store) = session_with_input();
        let example = EXAMPLES.iter().find(|e| e.name == "child_speech").unwrap();
        let llm = ScriptedLlm::new([format!("Code:\n{}", example.code)]);
        let record = run_round(&mut session, example.instruction, &llm, &engine, &store).clone();
        assert_eq!(record.status, RoundStatus::Ok);
        assert_eq!(record.repair_attempts, 0);
        let output = record.output.unwrap();
        assert!(store.contains(&output));
        assert!(record.artifacts.contains(&output));
        assert!(record.prompt_sent.ends_with("\nCode:"));
    }

    #[test]
    fn output_as_input_is_repaired() {
        let (mut session, engine, store) = session_with_input();
        let first = ScriptedLlm::new(["OUTPUT_WAV = ADJUST_VOL(INPUT_WAV0, volume=-3)"]);
        run_round(&mut session, "Make it quieter", &first, &engine, &store);
        let llm = ScriptedLlm::new([
            "OUTPUT_WAV = MIX([(OUTPUT_WAV, 0), (TTA(\"cheers\", length=2), 8)])",
            "```\nWAV0 = ADJUST_VOL(INPUT_WAV0, volume=-3)\nOUTPUT_WAV = MIX([(WAV0, 0), (TTA(\"cheers\", length=2), 8)])\n```",
        ]);
        let record = run_round(&mut session, "Add cheers in the end", &llm, &engine, &store).clone();
        assert_eq!(record.status, RoundStatus::Repaired);
        assert_eq!(record.repair_attempts, 1);
        assert_eq!(record.index, 1);
        let calls = llm.calls();
        assert_eq!(calls.len(), 2);
        assert!(calls[1][2].content.starts_with("The previous code failed validation: "));
        assert!(calls[1][2].content.contains("output-as-input"));
        let program = record.program.unwrap();
        assert!(!program.free_variables().contains(OUTPUT_NAME));
        assert!(record.prompt_sent.contains(prompt::FOLLOWUP_TEXT));
    }

    #[test]
    fn prose_three_times_fails() {
        let (mut session, engine, store) = session_with_input();
        let llm = ScriptedLlm::new(["", "  ", "\n"]);
        let record = run_round(&mut session, "do something", &llm, &engine, &store).clone();
        assert_eq!(record.status, RoundStatus::Failed);
        assert_eq!(record.failure, Some(FailureKind::Validation));
        assert_eq!(record.llm_responses.len(), 3);
        assert_eq!(session.rounds.len(), 1);

        let exhausted = ScriptedLlm::new(Vec::<String>::new());
        let record = run_round(&mut session, "again", &exhausted, &engine, &store);
        assert_eq!(record.failure, Some(FailureKind::Llm));
        assert_eq!(session.rounds.len(), 2);
    }

    #[test]
    fn execution_failure_is_recorded() {
        let (mut session, engine, store) = session_with_input();
        let llm =
            ScriptedLlm::new(["OUTPUT_WAV = CLIP(INPUT_WAV0, onset=LEN(INPUT_WAV0) + 5, offset=LEN(INPUT_WAV0) + 6)"]);
        let record = run_round(&mut session, "clip", &llm, &engine, &store);
        assert_eq!(record.status, RoundStatus::Failed);
        assert_eq!(record.failure, Some(FailureKind::Execution));
        assert!(record.program.is_some());
    }

    #[test]
    fn same_program_same_round_same_audio() {
        let code = "OUTPUT_WAV = MIX([(INPUT_WAV0, 0), (TTA(\"rain\", length=1), 0)])";
        let run = |rounds: usize| {
            let (mut session, engine, store) = session_with_input();
            let mut last = None;
            for _ in 0..rounds {
                last = run_round(&mut session, "x", &ScriptedLlm::new([code]), &engine, &store).output.clone();
            }
            last.unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }
}
