//! HTTP client for model servers speaking the JSON wire format.

use std::thread::sleep;
use std::time::Duration;

use ureq::Agent;

use super::protocol::{decode_response, encode_request, WireError, WireResponse};
use super::{BackendError, GenerativeRequest, GenerativeResponse};

const MAX_BODY_BYTES: u64 = 1 << 30;
const BACKOFF_BASE: Duration = Duration::from_millis(100);

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn transient(err: &BackendError) -> bool {
    match err {
        BackendError::Timeout { .. } | BackendError::Network(_) => true,
        BackendError::Status { status, .. } => *status >= 500,
        _ => false,
    }
}

/// POSTs the request to `{endpoint}/v1/ops/{op}`. Timeouts, connection
/// failures and 5xx answers are retried up to `retries` times with
/// exponential backoff.
pub fn remote_call(
    endpoint: &str,
    request: &GenerativeRequest,
    timeout: Duration,
    retries: u32,
) -> Result<GenerativeResponse, BackendError> {
    let url = format!("{}/v1/ops/{}", endpoint.trim_end_matches('/'), request.op);
    let body = encode_request(request);
    let agent = agent(timeout);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match attempt_once(&agent, &url, &body) {
            Ok(response) => return Ok(response),
            Err(BackendError::Timeout { .. }) if attempt > retries => {
                return Err(BackendError::Timeout { attempts: attempt })
            }
            Err(err) if transient(&err) && attempt <= retries => {
                log::warn!("attempt {attempt} at {url} failed: {err}; retrying");
                sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            Err(err) => return Err(err),
        }
    }
}

fn attempt_once(
    agent: &Agent,
    url: &str,
    body: &super::protocol::WireRequest,
) -> Result<GenerativeResponse, BackendError> {
    let mut response = agent.post(url).send_json(body).map_err(transport_error)?;
    let status = response.status().as_u16();
    let reader = response.body_mut().with_config().limit(MAX_BODY_BYTES);
    if status != 200 {
        let text = reader.read_to_string().unwrap_or_default();
        return Err(match serde_json::from_str::<WireError>(&text) {
            Ok(wire) => BackendError::Status { status, code: wire.error.code, message: wire.error.message },
            Err(_) => {
                BackendError::Status { status, code: "unknown".into(), message: text.chars().take(200).collect() }
            }
        });
    }
    let wire: WireResponse = reader.read_json().map_err(|e| match e {
        ureq::Error::Timeout(_) => BackendError::Timeout { attempts: 1 },
        other => BackendError::Protocol(format!("malformed response body: {other}")),
    })?;
    decode_response(&wire)
}

fn transport_error(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) => BackendError::Timeout { attempts: 1 },
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            BackendError::Network(err.to_string())
        }
        other => BackendError::Protocol(other.to_string()),
    }
}
