//! Dispatch of generative and analysis operations to local stubs or remote
//! model servers.

pub mod conformance;
pub mod protocol;
mod remote;
pub mod stub;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{normalize_lufs, DspError, Waveform, SR_RATE, WORKING_RATE};

pub use remote::remote_call;

/// Loudness that generated material is normalized to before the volume
/// offset is applied.
pub const REF_LUFS: f64 = -23.0;

/// Operations a backend can serve. EXTRACT and DROP are served by TSS.
pub const BACKEND_OPS: [&str; 7] = ["TTA", "TTS", "TTM", "TSS", "SR", "INPAINT", "CAPTION"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            ParamValue::Num(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeRequest {
    pub op: String,
    pub text: Option<String>,
    pub params: BTreeMap<String, ParamValue>,
    pub inputs: Vec<Waveform>,
}

impl GenerativeRequest {
    pub fn new(op: &str) -> GenerativeRequest {
        GenerativeRequest { op: op.to_string(), text: None, params: BTreeMap::new(), inputs: Vec::new() }
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.text = Some(text.to_string());
        self
    }

    pub fn with_num(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), ParamValue::Num(value));
        self
    }

    pub fn with_param_text(mut self, name: &str, value: &str) -> Self {
        self.params.insert(name.to_string(), ParamValue::Text(value.to_string()));
        self
    }

    pub fn with_input(mut self, wav: Waveform) -> Self {
        self.inputs.push(wav);
        self
    }

    pub fn num(&self, name: &str) -> Option<f64> {
        self.params.get(name).and_then(ParamValue::as_num)
    }

    pub fn param_text(&self, name: &str) -> Option<&str> {
        self.params.get(name).and_then(ParamValue::as_text)
    }

    pub fn seed(&self) -> Option<u64> {
        self.num("seed").filter(|s| s.is_finite() && *s >= 0.0).map(|s| s as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeResponse {
    pub outputs: Vec<Waveform>,
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl GenerativeResponse {
    pub fn new(outputs: Vec<Waveform>) -> GenerativeResponse {
        GenerativeResponse { outputs, meta: serde_json::Map::new() }
    }

    pub fn caption(&self) -> Option<&str> {
        self.meta.get("caption").and_then(|v| v.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub op: String,
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub retries: u32,
}

impl BackendDescriptor {
    pub fn stub(op: &str) -> BackendDescriptor {
        BackendDescriptor { op: op.to_string(), kind: BackendKind::Stub, endpoint: None, timeout_s: 60.0, retries: 2 }
    }

    pub fn remote(op: &str, endpoint: &str) -> BackendDescriptor {
        BackendDescriptor {
            op: op.to_string(),
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.trim_end_matches('/').to_string()),
            timeout_s: 60.0,
            retries: 2,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration, retries: u32) -> Self {
        self.timeout_s = timeout.as_secs_f64();
        self.retries = retries;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("operation {0} has no registered backend")]
    Unregistered(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("network error: {0}")]
    Network(String),
    #[error("backend returned HTTP {status} ({code}): {message}")]
    Status { status: u16, code: String, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// One active backend per operation.
#[derive(Clone, Debug, PartialEq)]
pub struct BackendRegistry {
    descriptors: BTreeMap<String, BackendDescriptor>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        BackendRegistry::stubs()
    }
}

impl BackendRegistry {
    /// Every operation served by its local stub.
    pub fn stubs() -> BackendRegistry {
        let descriptors = BACKEND_OPS.iter().map(|op| (op.to_string(), BackendDescriptor::stub(op))).collect();
        BackendRegistry { descriptors }
    }

    /// Stubs, except where `WAVCRAFT_BACKEND_{OP}_URL` names a server.
    pub fn from_env() -> BackendRegistry {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> BackendRegistry {
        let mut registry = BackendRegistry::stubs();
        for op in BACKEND_OPS {
            if let Some(url) = lookup(&format!("WAVCRAFT_BACKEND_{op}_URL")).filter(|u| !u.trim().is_empty()) {
                registry.set(BackendDescriptor::remote(op, url.trim()));
            }
        }
        registry
    }

    pub fn set(&mut self, descriptor: BackendDescriptor) {
        self.descriptors.insert(descriptor.op.clone(), descriptor);
    }

    pub fn with(mut self, descriptor: BackendDescriptor) -> Self {
        self.set(descriptor);
        self
    }

    pub fn descriptor(&self, op: &str) -> Option<&BackendDescriptor> {
        self.descriptors.get(op)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &BackendDescriptor> {
        self.descriptors.values()
    }

    /// Routes a request, then checks and post-processes the outputs.
    pub fn dispatch(&self, request: &GenerativeRequest) -> Result<GenerativeResponse, BackendError> {
        let projection = match request.op.as_str() {
            "EXTRACT" => Some(0),
            "DROP" => Some(1),
            _ => None,
        };
        let mut routed = request.clone();
        if projection.is_some() {
            routed.op = "TSS".into();
        }
        let descriptor =
            self.descriptors.get(&routed.op).ok_or_else(|| BackendError::Unregistered(request.op.clone()))?;
        check_request(&routed)?;
        let started = Instant::now();
        let mut response = match descriptor.kind {
            BackendKind::Stub => stub::run(&routed)?,
            BackendKind::Remote => {
                let endpoint = descriptor.endpoint.as_deref().ok_or_else(|| {
                    BackendError::InvalidRequest(format!("remote backend for {} has no endpoint", routed.op))
                })?;
                remote_call(endpoint, &routed, Duration::from_secs_f64(descriptor.timeout_s), descriptor.retries)?
            }
        };
        check_response(&routed, &response)?;
        if matches!(routed.op.as_str(), "TTA" | "TTM" | "TTS") {
            let volume = routed.num("volume").unwrap_or(0.0);
            let out = &response.outputs[0];
            // Material too short or too quiet to measure is left as is.
            if let Ok(normalized) = normalize_lufs(out, REF_LUFS + volume) {
                response.outputs[0] = normalized;
            }
        }
        if let Some(index) = projection {
            let chosen = response.outputs.swap_remove(index);
            response.outputs = vec![chosen];
        }
        let backend = match descriptor.kind {
            BackendKind::Stub => "stub".to_string(),
            BackendKind::Remote => format!("remote:{}", descriptor.endpoint.as_deref().unwrap_or("")),
        };
        response.meta.insert("backend".into(), backend.into());
        response.meta.insert("elapsed_ms".into(), (started.elapsed().as_millis() as u64).into());
        Ok(response)
    }
}

/// Declared number of audio outputs.
pub fn output_arity(op: &str) -> usize {
    match op {
        "TSS" => 2,
        "CAPTION" => 0,
        _ => 1,
    }
}

fn input_arity(op: &str) -> std::ops::RangeInclusive<usize> {
    match op {
        "TTA" | "TTS" => 0..=0,
        "TTM" => 0..=1,
        _ => 1..=1,
    }
}

fn check_request(request: &GenerativeRequest) -> Result<(), BackendError> {
    let op = request.op.as_str();
    if !BACKEND_OPS.contains(&op) {
        return Err(BackendError::Unregistered(op.to_string()));
    }
    if request.seed().is_none() {
        return Err(BackendError::InvalidRequest(format!("{op} request carries no seed")));
    }
    let range = input_arity(op);
    if !range.contains(&request.inputs.len()) {
        return Err(BackendError::InvalidRequest(format!(
            "{op} takes {}..={} input(s), got {}",
            range.start(),
            range.end(),
            request.inputs.len()
        )));
    }
    if let Some(speaker) = request.param_text("speaker") {
        if !crate::script::SPEAKERS.contains(&speaker) {
            return Err(BackendError::InvalidRequest(format!("unknown speaker {speaker}")));
        }
    }
    Ok(())
}

fn check_response(request: &GenerativeRequest, response: &GenerativeResponse) -> Result<(), BackendError> {
    let op = request.op.as_str();
    let expected = output_arity(op);
    if response.outputs.len() != expected {
        return Err(BackendError::Protocol(format!(
            "{op} must return {expected} output(s), got {}",
            response.outputs.len()
        )));
    }
    let rate = match op {
        "SR" => Some(SR_RATE),
        "TTA" | "TTM" | "TTS" => Some(WORKING_RATE),
        "TSS" | "INPAINT" => Some(request.inputs[0].sample_rate),
        _ => None,
    };
    for out in &response.outputs {
        if let Some(rate) = rate {
            if out.sample_rate != rate {
                return Err(BackendError::Protocol(format!(
                    "{op} output at {} Hz, expected {rate} Hz",
                    out.sample_rate
                )));
            }
        }
        if out.samples.iter().any(|s| !s.is_finite()) {
            return Err(BackendError::Protocol(format!("{op} output has non-finite samples")));
        }
    }
    if matches!(op, "TSS" | "INPAINT") {
        let len = request.inputs[0].len();
        if response.outputs.iter().any(|o| o.len() != len) {
            return Err(BackendError::Protocol(format!("{op} output length differs from its input")));
        }
    }
    if op == "CAPTION" && response.caption().is_none() {
        return Err(BackendError::Protocol("CAPTION response has no meta.caption string".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{measure_lufs, testutil::noise};

    fn seeded(op: &str) -> GenerativeRequest {
        GenerativeRequest::new(op).with_num("seed", 42.0)
    }

    #[test]
    fn tta_length_and_loudness() {
        let registry = BackendRegistry::stubs();
        let request = seeded("TTA").with_text("dog barking").with_num("length", 4.0).with_num("volume", 4.0);
        let response = registry.dispatch(&request).unwrap();
        assert_eq!(response.outputs.len(), 1);
        let out = &response.outputs[0];
        assert_eq!(out.sample_rate, 16000);
        assert_eq!(out.duration_seconds(), 4.0);
        assert!((measure_lufs(out).unwrap() - (REF_LUFS + 4.0)).abs() < 0.5);
        assert_eq!(response.meta["backend"], "stub");
    }

    #[test]
    fn volume_rule_for_all_generators() {
        let registry = BackendRegistry::stubs();
        for (op, volume) in [("TTA", -6.0), ("TTM", 5.0), ("TTS", 2.0)] {
            let request =
                seeded(op).with_text("happy saxophone solo").with_num("length", 3.0).with_num("volume", volume);
            let out = &registry.dispatch(&request).unwrap().outputs[0];
            let lufs = measure_lufs(out).unwrap();
            assert!((lufs - (REF_LUFS + volume)).abs() < 0.5, "{op}: {lufs}");
        }
    }

    #[test]
    fn separation_projections() {
        let registry = BackendRegistry::stubs();
        let input = noise(3, 1.0, 16000, 0.5);
        let tss = registry.dispatch(&seeded("TSS").with_text("dog").with_input(input.clone())).unwrap();
        let (fg, bg) = (&tss.outputs[0], &tss.outputs[1]);
        for i in 0..input.len() {
            assert_eq!(fg.samples[i] as f64 + bg.samples[i] as f64, input.samples[i] as f64);
        }
        let extract = registry.dispatch(&seeded("EXTRACT").with_text("dog").with_input(input.clone())).unwrap();
        assert_eq!(extract.outputs, tss.outputs[..1]);
        let drop = registry.dispatch(&seeded("DROP").with_text("dog").with_input(input)).unwrap();
        assert_eq!(drop.outputs, tss.outputs[1..]);
    }

    #[test]
    fn request_errors() {
        let registry = BackendRegistry::stubs();
        assert!(matches!(registry.dispatch(&seeded("FOO")), Err(BackendError::Unregistered(_))));
        let unseeded = GenerativeRequest::new("TTA").with_text("x");
        assert!(matches!(registry.dispatch(&unseeded), Err(BackendError::InvalidRequest(_))));
        assert!(matches!(registry.dispatch(&seeded("TSS").with_text("x")), Err(BackendError::InvalidRequest(_))));
        let bad_speaker = seeded("TTS").with_text("hi").with_param_text("speaker", "Robot");
        assert!(matches!(registry.dispatch(&bad_speaker), Err(BackendError::InvalidRequest(_))));
    }

    #[test]
    fn arity_table_holds_for_every_op() {
        let registry = BackendRegistry::stubs();
        let input = noise(9, 1.0, 16000, 0.3);
        for op in BACKEND_OPS.iter().chain(&["EXTRACT", "DROP"]) {
            let mut request = seeded(op).with_text("a rain sound");
            if !matches!(*op, "TTA" | "TTS" | "TTM") {
                request = request.with_input(input.clone());
            }
            if *op == "INPAINT" {
                request = request.with_num("onset", 0.2).with_num("offset", 0.6);
            }
            let response = registry.dispatch(&request).unwrap();
            let expected = match *op {
                "EXTRACT" | "DROP" => 1,
                other => output_arity(other),
            };
            assert_eq!(response.outputs.len(), expected, "{op}");
        }
    }

    #[test]
    fn registry_from_environment() {
        let registry = BackendRegistry::from_lookup(|key| {
            (key == "WAVCRAFT_BACKEND_TSS_URL").then(|| "http://127.0.0.1:9/".to_string())
        });
        let tss = registry.descriptor("TSS").unwrap();
        assert_eq!(tss.kind, BackendKind::Remote);
        assert_eq!(tss.endpoint.as_deref(), Some("http://127.0.0.1:9"));
        assert_eq!(registry.descriptor("TTA").unwrap().kind, BackendKind::Stub);
    }
}
