use std::collections::BTreeMap;
use std::time::Duration;

use wavcraft::server::{spawn, stub_backend_router};
use wavcraft_core::backend::conformance::{check_error_mapping, check_registry};
use wavcraft_core::backend::{BackendDescriptor, BackendRegistry, BACKEND_OPS};
use wavcraft_core::dsp::Waveform;
use wavcraft_core::eval::pool::fixture_inputs;
use wavcraft_core::exec::{execute, ArtifactStore, ExecContext, ResourceLimits, SeedPolicy};
use wavcraft_core::script::{compile, fixtures::EXAMPLES, input_name, input_names, SignatureTable};

fn remote_registry(url: &str) -> BackendRegistry {
    let mut registry = BackendRegistry::stubs();
    for op in BACKEND_OPS {
        registry.set(BackendDescriptor::remote(op, url).with_timeout(Duration::from_secs(60), 1));
    }
    registry
}

fn run_examples(backends: &BackendRegistry) -> Vec<Waveform> {
    let table = SignatureTable::standard();
    EXAMPLES
        .iter()
        .map(|example| {
            let store = ArtifactStore::new();
            let ctx = ExecContext {
                table: &table,
                backends,
                store: &store,
                limits: ResourceLimits::default(),
                seeds: SeedPolicy::new(21),
            };
            let program = compile(example.code, &table, &input_names(example.inputs)).unwrap();
            let inputs: BTreeMap<String, Waveform> =
                fixture_inputs(example.inputs, 2).into_iter().enumerate().map(|(i, w)| (input_name(i), w)).collect();
            execute(&program, &inputs, &ctx, 0).unwrap().output.wav
        })
        .collect()
}

#[test]
fn loopback_server_passes_conformance() {
    let server = spawn(stub_backend_router(), "127.0.0.1:0").unwrap();
    let registry = remote_registry(&server.url());
    for check in check_registry(&registry).into_iter().chain(check_error_mapping(&server.url())) {
        assert!(check.passed, "{}: {}", check.name, check.detail);
    }
}

#[test]
fn loopback_server_replaces_stubs_in_programs() {
    let server = spawn(stub_backend_router(), "127.0.0.1:0").unwrap();
    let remote = run_examples(&remote_registry(&server.url()));
    let local = run_examples(&BackendRegistry::stubs());
    assert_eq!(remote, local);
}

#[test]
fn malformed_bodies_are_rejected() {
    let server = spawn(stub_backend_router(), "127.0.0.1:0").unwrap();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut response = agent.post(&format!("{}/v1/ops/TTA", server.url())).send("{not json").unwrap();
    assert_eq!(response.status().as_u16(), 400);
    let body: serde_json::Value = response.body_mut().read_json().unwrap();
    assert_eq!(body["error"]["code"], "bad_request");
}

#[test]
fn unreachable_backend_is_a_network_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let registry =
        BackendRegistry::stubs().with(BackendDescriptor::remote("TTA", &url).with_timeout(Duration::from_secs(2), 1));
    let failed = check_registry(&registry).into_iter().find(|c| !c.passed).unwrap();
    assert_eq!(failed.name, "TTA dispatch");
    assert!(failed.detail.contains("network"), "{}", failed.detail);
}
