use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use wavcraft_core::backend::BackendRegistry;
use wavcraft_core::dsp::Waveform;
use wavcraft_core::eval::pool::{fixture_inputs, procedural_clip};
use wavcraft_core::exec::{execute, ArtifactStore, ExecContext, ExecErrorKind, Execution, ResourceLimits, SeedPolicy};
use wavcraft_core::script::{compile, fixtures::EXAMPLES, input_name, input_names, SignatureTable};

fn run_source(source: &str, inputs: &[Waveform], seed: u64) -> Result<Execution, String> {
    let table = SignatureTable::standard();
    let backends = BackendRegistry::stubs();
    let store = ArtifactStore::new();
    let ctx = ExecContext {
        table: &table,
        backends: &backends,
        store: &store,
        limits: ResourceLimits::default(),
        seeds: SeedPolicy::new(seed),
    };
    let program = compile(source, &table, &input_names(inputs.len())).map_err(|d| format!("{d:?}"))?;
    let named: BTreeMap<String, Waveform> =
        inputs.iter().enumerate().map(|(i, w)| (input_name(i), w.clone())).collect();
    let out = execute(&program, &named, &ctx, 0).map_err(|e| e.to_string())?;
    for step in &out.trace.steps {
        for id in &step.outputs {
            assert!(store.contains(id), "trace references missing artifact {id}");
        }
    }
    Ok(out)
}

#[test]
fn worked_examples_run_deterministically() {
    for example in EXAMPLES {
        let inputs = fixture_inputs(example.inputs, 11);
        let started = Instant::now();
        let first = run_source(example.code, &inputs, 5).unwrap_or_else(|e| panic!("{}: {e}", example.name));
        let elapsed = started.elapsed();
        let second = run_source(example.code, &inputs, 5).unwrap();
        assert_eq!(first.output.wav, second.output.wav, "{}", example.name);
        assert!(!first.output.wav.is_empty());
        assert!(elapsed.as_secs_f64() < 5.0, "{} took {elapsed:?}", example.name);
        let statements = example.code.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
        assert_eq!(first.trace.steps.len(), statements, "{}", example.name);
    }
}

#[test]
fn child_speech_example() {
    let example = EXAMPLES.iter().find(|e| e.name == "child_speech").unwrap();
    let out = run_source(example.code, &fixture_inputs(1, 11), 5).unwrap();
    assert_eq!(out.output.wav.len(), 160000);
    assert_eq!(out.trace.steps.len(), 6);
    assert!(out.trace.steps.iter().all(|s| s.comment.is_some()));
    assert_eq!(out.trace.steps[2].comment.as_deref(), Some("Drop the sound of 'machine sound' from the mixture"));
    assert_eq!(out.trace.steps[0].op.as_deref(), Some("TSS"));
    assert_eq!(out.trace.steps[0].targets, vec!["WAV0", "WAV1"]);
}

#[test]
fn session_seed_changes_generated_audio() {
    let source = "OUTPUT_WAV = TTA(\"rain\", length=1)";
    let a = run_source(source, &[], 1).unwrap();
    let b = run_source(source, &[], 2).unwrap();
    assert_ne!(a.output.wav, b.output.wav);
    assert_eq!(a.output.wav, run_source(source, &[], 1).unwrap().output.wav);
}

#[test]
fn editing_one_line_keeps_other_lines_stable() {
    let before = "A = TTA(\"rain\", length=1)\nB = TTA(\"dog\", length=1)\nOUTPUT_WAV = MIX([(A, 0), (B, 0)])";
    let after = "A = TTA(\"rain\", length=1)\nB = TTA(\"a cat\", length=1)\nOUTPUT_WAV = MIX([(A, 0), (B, 0)])";
    let x = run_source(before, &[], 3).unwrap();
    let y = run_source(after, &[], 3).unwrap();
    assert_eq!(x.bindings["A"], y.bindings["A"]);
    assert_ne!(x.bindings["B"], y.bindings["B"]);
}

#[test]
fn missing_input_is_reported() {
    let table = SignatureTable::standard();
    let backends = BackendRegistry::stubs();
    let store = ArtifactStore::new();
    let ctx = ExecContext {
        table: &table,
        backends: &backends,
        store: &store,
        limits: ResourceLimits::default(),
        seeds: SeedPolicy::new(0),
    };
    let program = compile("OUTPUT_WAV = INPUT_WAV1", &table, &input_names(2)).unwrap();
    let err = execute(&program, &BTreeMap::new(), &ctx, 0).unwrap_err();
    assert!(matches!(err.kind, ExecErrorKind::MissingInput(_)));
}

/// Random statement sources over a small vocabulary. Some are ill-typed or
/// reference unknown names on purpose; only validated ones are executed.
fn statement(index: usize) -> impl Strategy<Value = String> {
    let var = move |k: usize| {
        if k.is_multiple_of(4) || index == 0 {
            "INPUT_WAV0".to_string()
        } else {
            format!("W{}", k % index)
        }
    };
    let num =
        prop_oneof![Just("0.2".to_string()), Just("0.5".to_string()), Just("1".to_string()), Just("-3".to_string())];
    (0usize..15, 0usize..64, 0usize..64, num).prop_map(move |(op, a, b, n)| {
        let (x, y) = (var(a), var(b));
        let value = match op {
            0 => format!("MIX([({x}, 0), ({y}, {n})])"),
            1 => format!("CAT([{x}, {y}])"),
            2 => format!("CLIP({x}, onset=0.1, offset={n})"),
            3 => format!("ADJUST_VOL({x}, volume={n})"),
            4 => format!("EXTRACT({x}, text=\"dog\")"),
            5 => format!("DROP({y}, text=\"rain\")"),
            6 => format!("LOW_PASS({x})"),
            7 => format!("HIGH_PASS({x}, min_cutoff_freq=100, max_cutoff_freq=300)"),
            8 => format!("ADD_NOISE({x}, min_snr_db=10, max_snr_db=20)"),
            9 => format!("TTA(\"wind\", length={n})"),
            10 => format!("CAT([{x}] * 2)"),
            11 => format!("ADJUST_VOL({x}, volume=LEN({y}))"),
            12 => format!("MIX([({x}, LEN({y}) / 2)])"),
            13 => format!("TTS(\"hi there\", volume={n})"),
            _ => format!("LEN({x})"),
        };
        format!("W{index} = {value}")
    })
}

fn program_source() -> impl Strategy<Value = String> {
    (1usize..6).prop_flat_map(|n| {
        let statements: Vec<_> = (0..n).map(statement).collect();
        (statements, 0usize..n).prop_map(|(lines, out)| format!("{}\nOUTPUT_WAV = W{out}\n", lines.join("\n")))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn validated_programs_never_fail_internally(source in program_source()) {
        let table = SignatureTable::standard();
        let Ok(program) = compile(&source, &table, &input_names(1)) else { return Ok(()); };
        let backends = BackendRegistry::stubs();
        let store = ArtifactStore::new();
        let ctx = ExecContext { table: &table, backends: &backends, store: &store, limits: ResourceLimits::default(), seeds: SeedPolicy::new(0) };
        let inputs = BTreeMap::from([(input_name(0), procedural_clip(1, 0.5, 0).wav)]);
        if let Err(err) = execute(&program, &inputs, &ctx, 0) {
            prop_assert!(
                !matches!(err.kind, ExecErrorKind::Internal(_) | ExecErrorKind::MissingInput(_)),
                "{source}\n{err}"
            );
        }
    }
}
