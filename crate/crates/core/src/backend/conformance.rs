//! Checks a backend deployment against the local stubs: output arity,
//! lossless audio transport and error mapping.

use std::time::Duration;

use super::{output_arity, remote_call, stub, BackendError, BackendRegistry, GenerativeRequest, BACKEND_OPS};
use crate::dsp::{Waveform, WORKING_RATE};

/// Largest sample difference tolerated between a backend and the stub.
pub const ENCODING_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

fn probe_input() -> Waveform {
    let samples: Vec<f32> = (0..WORKING_RATE as usize * 2)
        .map(|i| {
            let t = i as f32 / WORKING_RATE as f32;
            0.4 * (2.0 * std::f32::consts::PI * 330.0 * t).sin() + 0.2 * (2.0 * std::f32::consts::PI * 2100.0 * t).sin()
        })
        .collect();
    Waveform::new(samples, WORKING_RATE)
}

/// One representative request per operation, including the TSS views.
pub fn probe_requests() -> Vec<GenerativeRequest> {
    let base = |op: &str| GenerativeRequest::new(op).with_num("seed", 7.0);
    let input = probe_input();
    let mut requests = Vec::new();
    for op in BACKEND_OPS.iter().copied().chain(["EXTRACT", "DROP"]) {
        let request = match op {
            "TTA" => base(op).with_text("rain on a tin roof").with_num("length", 1.5).with_num("volume", 2.0),
            "TTM" => base(op).with_text("calm piano").with_num("length", 1.5).with_num("volume", 0.0),
            "TTS" => base(op)
                .with_text("hello there friend")
                .with_param_text("speaker", "Female1_En")
                .with_num("volume", 0.0),
            "TSS" | "EXTRACT" | "DROP" => base(op).with_text("a high whistle").with_input(input.clone()),
            "SR" => base(op).with_num("ddim_steps", 50.0).with_num("guidance_scale", 3.5).with_input(input.clone()),
            "INPAINT" => {
                base(op).with_text("a hum").with_num("onset", 0.5).with_num("offset", 1.0).with_input(input.clone())
            }
            "CAPTION" => base(op).with_text("write an audio caption to describe the sound").with_input(input.clone()),
            _ => continue,
        };
        requests.push(request);
    }
    requests
}

fn max_abs_diff(a: &Waveform, b: &Waveform) -> f64 {
    a.samples.iter().zip(b.samples.iter()).map(|(x, y)| (*x as f64 - *y as f64).abs()).fold(0.0, f64::max)
}

/// Runs every probe through `registry` and compares with the stubs.
pub fn check_registry(registry: &BackendRegistry) -> Vec<Check> {
    let reference = BackendRegistry::stubs();
    let mut checks = Vec::new();
    for request in probe_requests() {
        let op = request.op.clone();
        let got = registry.dispatch(&request);
        let want = reference.dispatch(&request).expect("stubs accept every probe");
        let got = match got {
            Ok(got) => got,
            Err(err) => {
                checks.push(Check::new(format!("{op} dispatch"), false, err.to_string()));
                continue;
            }
        };
        let arity = output_arity(&op);
        checks.push(Check::new(
            format!("{op} arity"),
            got.outputs.len() == arity,
            format!("{} output(s), expected {arity}", got.outputs.len()),
        ));
        let same_shape = got.outputs.len() == want.outputs.len()
            && got.outputs.iter().zip(&want.outputs).all(|(g, w)| g.len() == w.len() && g.sample_rate == w.sample_rate);
        let diff = got.outputs.iter().zip(&want.outputs).map(|(g, w)| max_abs_diff(g, w)).fold(0.0, f64::max);
        checks.push(Check::new(
            format!("{op} encoding"),
            same_shape && diff <= ENCODING_TOLERANCE,
            format!("max abs diff {diff:e}, shapes match: {same_shape}"),
        ));
        if op == "CAPTION" {
            checks.push(Check::new(
                "CAPTION text",
                got.caption() == want.caption(),
                format!("{:?} vs {:?}", got.caption(), want.caption()),
            ));
        }
    }
    checks
}

/// Error answers of a server at `endpoint`, seen through the client.
pub fn check_error_mapping(endpoint: &str) -> Vec<Check> {
    let call = |request: &GenerativeRequest| remote_call(endpoint, request, Duration::from_secs(30), 0);
    let expect_status = |name: &str, result: Result<_, BackendError>, status: u16, code: &str| match result {
        Err(BackendError::Status { status: s, code: c, .. }) if s == status && c == code => {
            Check::new(name, true, format!("HTTP {s} {c}"))
        }
        Err(other) => Check::new(name, false, format!("expected HTTP {status} {code}, got {other}")),
        Ok(_) => Check::new(name, false, format!("expected HTTP {status} {code}, got a response")),
    };
    let unknown = GenerativeRequest::new("NOPE").with_num("seed", 1.0);
    let invalid = GenerativeRequest::new("TSS").with_num("seed", 1.0).with_text("dog");
    let bad_speaker =
        GenerativeRequest::new("TTS").with_num("seed", 1.0).with_text("hi").with_param_text("speaker", "Robot");
    let mut checks = vec![
        expect_status("unknown operation", call(&unknown), 404, "unknown_op"),
        expect_status("missing input", call(&invalid), 422, "invalid_request"),
        expect_status("unknown speaker", call(&bad_speaker), 422, "invalid_request"),
    ];
    let stub_answer = stub::run(&probe_requests()[0]).map(|r| r.outputs.len()).unwrap_or(0);
    let direct = call(&probe_requests()[0]).map(|r| r.outputs.len()).unwrap_or(usize::MAX);
    checks.push(Check::new("direct call", direct == stub_answer, format!("{direct} output(s)")));
    checks
}
