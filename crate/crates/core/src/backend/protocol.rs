//! JSON wire format spoken between the gateway and model servers.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, GenerativeRequest, GenerativeResponse, ParamValue};
use crate::dsp::Waveform;

pub const ENCODING: &str = "f32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireAudio {
    pub sample_rate: u32,
    pub encoding: String,
    pub data_b64: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub request_id: String,
    pub op: String,
    pub text: Option<String>,
    pub params: BTreeMap<String, ParamValue>,
    pub inputs: Vec<WireAudio>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub outputs: Vec<WireAudio>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub error: WireErrorBody,
}

impl WireError {
    pub fn new(code: &str, message: impl Into<String>) -> WireError {
        WireError { error: WireErrorBody { code: code.to_string(), message: message.into() } }
    }
}

pub fn encode_audio(wav: &Waveform) -> WireAudio {
    let mut bytes = Vec::with_capacity(wav.len() * 4);
    for s in wav.samples.iter() {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    WireAudio { sample_rate: wav.sample_rate, encoding: ENCODING.to_string(), data_b64: BASE64.encode(bytes) }
}

pub fn decode_audio(audio: &WireAudio) -> Result<Waveform, BackendError> {
    if audio.encoding != ENCODING {
        return Err(BackendError::Protocol(format!("unsupported audio encoding {:?}", audio.encoding)));
    }
    if audio.sample_rate == 0 {
        return Err(BackendError::Protocol("audio with zero sample rate".into()));
    }
    let bytes = BASE64.decode(&audio.data_b64).map_err(|e| BackendError::Protocol(format!("bad base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(BackendError::Protocol(format!("{} bytes is not a whole number of f32 samples", bytes.len())));
    }
    let mut samples = Vec::with_capacity(bytes.len() / 4);
    for chunk in bytes.chunks_exact(4) {
        let s = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !s.is_finite() {
            return Err(BackendError::Protocol("audio contains a non-finite sample".into()));
        }
        samples.push(s);
    }
    Ok(Waveform::new(samples, audio.sample_rate))
}

/// Content hash of a request; retries of the same request share it.
pub fn request_id(request: &GenerativeRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.op.as_bytes());
    hasher.update([0]);
    if let Some(text) = &request.text {
        hasher.update(text.as_bytes());
    }
    hasher.update([0]);
    hasher.update(serde_json::to_vec(&request.params).unwrap_or_default());
    for wav in &request.inputs {
        hasher.update(wav.sample_rate.to_le_bytes());
        hasher.update((wav.len() as u64).to_le_bytes());
        for s in wav.samples.iter() {
            hasher.update(s.to_le_bytes());
        }
    }
    hex(&hasher.finalize()[..16])
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_request(request: &GenerativeRequest) -> WireRequest {
    WireRequest {
        request_id: request_id(request),
        op: request.op.clone(),
        text: request.text.clone(),
        params: request.params.clone(),
        inputs: request.inputs.iter().map(encode_audio).collect(),
    }
}

pub fn decode_request(wire: &WireRequest) -> Result<GenerativeRequest, BackendError> {
    Ok(GenerativeRequest {
        op: wire.op.clone(),
        text: wire.text.clone(),
        params: wire.params.clone(),
        inputs: wire.inputs.iter().map(decode_audio).collect::<Result<_, _>>()?,
    })
}

pub fn encode_response(response: &GenerativeResponse) -> WireResponse {
    WireResponse { outputs: response.outputs.iter().map(encode_audio).collect(), meta: response.meta.clone() }
}

pub fn decode_response(wire: &WireResponse) -> Result<GenerativeResponse, BackendError> {
    Ok(GenerativeResponse {
        outputs: wire.outputs.iter().map(decode_audio).collect::<Result<_, _>>()?,
        meta: wire.meta.clone(),
    })
}

/// Server side of the protocol: answers a request for `op` by running the
/// local stub. Returns an HTTP status and JSON body.
pub fn serve_stub(op: &str, body: &[u8]) -> (u16, serde_json::Value) {
    let error = |status: u16, code: &str, message: String| {
        (status, serde_json::to_value(WireError::new(code, message)).expect("serializable"))
    };
    let wire: WireRequest = match serde_json::from_slice(body) {
        Ok(wire) => wire,
        Err(e) => return error(400, "bad_request", format!("malformed request: {e}")),
    };
    if wire.op != op {
        return error(400, "bad_request", format!("path names {op} but body names {}", wire.op));
    }
    let request = match decode_request(&wire) {
        Ok(request) => request,
        Err(e) => return error(400, "bad_request", e.to_string()),
    };
    match super::stub::run(&request) {
        Ok(response) => (200, serde_json::to_value(encode_response(&response)).expect("serializable")),
        Err(BackendError::Unregistered(op)) => error(404, "unknown_op", format!("no such operation {op}")),
        Err(e @ BackendError::InvalidRequest(_)) => error(422, "invalid_request", e.to_string()),
        Err(e) => error(500, "internal", e.to_string()),
    }
}
