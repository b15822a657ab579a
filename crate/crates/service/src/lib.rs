//! Session service, workspace persistence and the pieces the command line
//! is built from.

pub mod api;
pub mod server;
pub mod workspace;

use std::path::PathBuf;
use std::sync::Arc;

use wavcraft_core::orchestrator::{LlmClient, LlmConfig, LlmError, OpenAiClient, ScriptedLlm};

pub use api::{router, AppState};
pub use workspace::Workspace;

pub const DEFAULT_WORKSPACE: &str = "wavcraft-workspace";

/// Language model named by `spec`: `scripted:FILE` replays a JSON list of
/// responses, `openai` or no spec uses the `WAVCRAFT_LLM_*` variables.
pub fn llm_from_spec(spec: Option<&str>) -> Result<Arc<dyn LlmClient>, LlmError> {
    match spec.map(str::trim) {
        Some(s) if s.starts_with("scripted:") => {
            Ok(Arc::new(ScriptedLlm::from_file(&PathBuf::from(&s["scripted:".len()..]))?))
        }
        None | Some("openai") => match LlmConfig::from_env()? {
            Some(config) => Ok(Arc::new(OpenAiClient::new(config))),
            None => Err(LlmError::Config(
                "no language model configured: pass --llm scripted:FILE or set WAVCRAFT_LLM_BASE_URL".into(),
            )),
        },
        Some(other) => Err(LlmError::Config(format!("unknown --llm value {other:?}; use scripted:FILE or openai"))),
    }
}

/// `WAVCRAFT_SEED`, or 0.
pub fn seed_from_env() -> Result<u64, String> {
    match std::env::var("WAVCRAFT_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("WAVCRAFT_SEED={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

/// `WAVCRAFT_WORKSPACE`, or a directory in the current one.
pub fn workspace_from_env() -> PathBuf {
    std::env::var_os("WAVCRAFT_WORKSPACE").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE))
}
