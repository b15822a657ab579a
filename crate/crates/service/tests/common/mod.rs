#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;
use tempfile::TempDir;
use wavcraft::server::{spawn, ServerHandle};
use wavcraft::workspace::Workspace;
use wavcraft::{router, AppState};
use wavcraft_core::dsp::write_wav;
use wavcraft_core::eval::pool::fixture_inputs;
use wavcraft_core::orchestrator::{ChatMessage, Engine, LlmClient, LlmError};

pub struct App {
    pub server: ServerHandle,
    pub dir: TempDir,
}

impl App {
    pub fn start(llm: Arc<dyn LlmClient>) -> App {
        let dir = tempfile::tempdir().unwrap();
        let server = App::serve_dir(dir.path(), llm);
        App { server, dir }
    }

    pub fn serve_dir(dir: &std::path::Path, llm: Arc<dyn LlmClient>) -> ServerHandle {
        let state = AppState::new(Workspace::open(dir).unwrap(), Engine::stubs(), llm, 5);
        spawn(router(Arc::new(state)), "127.0.0.1:0").unwrap()
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::open(self.dir.path()).unwrap()
    }
}

pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn reply(response: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
    let mut response = response.expect("server reachable");
    let content_type =
        response.headers().get("content-type").and_then(|v| v.to_str().ok()).unwrap_or_default().to_string();
    Reply {
        status: response.status().as_u16(),
        content_type,
        body: response.body_mut().with_config().limit(1 << 30).read_to_vec().unwrap(),
    }
}

pub fn get(url: &str) -> Reply {
    reply(agent().get(url).call())
}

pub fn delete(url: &str) -> Reply {
    reply(agent().delete(url).call())
}

pub fn post_json(url: &str, body: &Value) -> Reply {
    reply(agent().post(url).header("content-type", "application/json").send(serde_json::to_vec(body).unwrap()))
}

pub fn post_bytes(url: &str, content_type: &str, body: &[u8]) -> Reply {
    reply(agent().post(url).header("content-type", content_type).send(body))
}

pub fn scene_wav() -> Vec<u8> {
    write_wav(&fixture_inputs(1, 3)[0])
}

/// Creates a session with one uploaded input; returns its id.
pub fn session_with_input(app: &App) -> String {
    let created = post_json(&app.url("/v1/sessions"), &Value::Null);
    assert_eq!(created.status, 201);
    let id = created.json()["session_id"].as_str().unwrap().to_string();
    let uploaded = post_bytes(&app.url(&format!("/v1/sessions/{id}/inputs")), "audio/wav", &scene_wav());
    assert_eq!(uploaded.status, 201, "{}", String::from_utf8_lossy(&uploaded.body));
    id
}

/// Answers every call with the same program after a pause.
pub struct SlowLlm {
    pub delay: Duration,
    pub code: String,
}

impl LlmClient for SlowLlm {
    fn chat(&self, _messages: &[ChatMessage]) -> Result<String, LlmError> {
        std::thread::sleep(self.delay);
        Ok(self.code.clone())
    }
}
