//! Protocol tests for the external-process backend, served by a stub
//! responder so no model checkpoint is needed. The stub mirrors
//! `scripts/mlm_bridge.py`'s framing and error behavior with
//! deterministic hash-based scores.

use std::io::Write;
use std::sync::Arc;

use scriptprobe::prompting::{Bindings, PromptSet, TaskKind, Verbalizer};
use scriptprobe::scorer::{ExternalLm, ExternalLmConfig, ScorerBackend, ScorerError};
use scriptprobe::tasks::Prober;
use scriptprobe::SubEvent;

const STUB: &str = r#"
import json, sys, hashlib

def h(*parts):
    digest = hashlib.sha256("\x1f".join(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**63 - 1.0

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    try:
        req = json.loads(line)
        op = req["op"]
        if op == "ping":
            resp = {"ok": True, "model": "stub-lm"}
        elif op == "mask_scores":
            resp = {"ok": True, "scores": {c: h("mask", req["text"], c) for c in req["candidates"]}}
        elif op == "sequence_score":
            resp = {"ok": True, "score": h("seq", req["text"])}
        elif op == "vocab_check":
            resp = {"ok": True, "single_token": {
                t: t.isalpha() and t.islower() for t in req["tokens"]}}
        else:
            resp = {"ok": False, "error": "unknown op %r" % op}
    except Exception as exc:
        resp = {"ok": False, "error": str(exc)}
    print(json.dumps(resp), flush=True)
"#;

fn stub_backend() -> Option<(tempfile::TempDir, ExternalLm)> {
    if std::process::Command::new("python3")
        .arg("--version")
        .output()
        .is_err()
    {
        eprintln!("skipping: python3 not available");
        return None;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stub_bridge.py");
    std::fs::File::create(&path)
        .unwrap()
        .write_all(STUB.as_bytes())
        .unwrap();
    let backend = ExternalLm::start(&ExternalLmConfig {
        command: vec![
            "python3".into(),
            path.to_string_lossy().into_owned(),
        ],
        cache_dir: None,
    })
    .expect("stub bridge should start");
    Some((dir, backend))
}

#[test]
fn handshake_reports_the_model() {
    let Some((_dir, backend)) = stub_backend() else { return };
    assert_eq!(backend.model(), "stub-lm");
}

#[test]
fn mask_scoring_roundtrips_and_is_deterministic() {
    let Some((_dir, backend)) = stub_backend() else { return };
    let q = PromptSet::default()
        .render(TaskKind::Temporal, &Bindings::pair("wash the cup.", "dry the cup."))
        .unwrap();
    let cands = vec!["before".to_string(), "after".to_string()];
    let a = backend.score_mask_candidates(&q, &cands).unwrap();
    let b = backend.score_mask_candidates(&q, &cands).unwrap();
    assert_eq!(a, b);
    assert!(a.get("before").unwrap().is_finite());
    assert!(a.get("after").unwrap().is_finite());
}

#[test]
fn sequence_scoring_roundtrips() {
    let Some((_dir, backend)) = stub_backend() else { return };
    let q = PromptSet::default()
        .render(TaskKind::Start, &Bindings::main_sub("Taking bus", "finding bus stop"))
        .unwrap();
    let s1 = backend.score_sequence(&q).unwrap();
    let s2 = backend.score_sequence(&q).unwrap();
    assert_eq!(s1, s2);
    assert!(s1.is_finite());
}

#[test]
fn vocab_check_drives_verbalizer_validation() {
    let Some((_dir, backend)) = stub_backend() else { return };
    assert!(backend.is_single_token("include").unwrap());
    assert!(!backend.is_single_token("Commences-With").unwrap());
    let report = scriptprobe::prompting::validate_verbalizer_with(&Verbalizer::default(), |s| {
        backend.is_single_token(s).unwrap()
    });
    assert!(report.passed());
}

#[test]
fn contract_errors_stay_on_the_rust_side() {
    let Some((_dir, backend)) = stub_backend() else { return };
    let maskless = PromptSet::default()
        .render(TaskKind::Start, &Bindings::main_sub("m", "s"))
        .unwrap();
    assert!(matches!(
        backend.score_mask_candidates(&maskless, &["include".into()]),
        Err(ScorerError::MissingMask)
    ));
}

#[test]
fn full_pipeline_runs_over_the_bridge() {
    let Some((_dir, backend)) = stub_backend() else { return };
    let prober = Prober::new(Arc::new(backend), PromptSet::default());
    let pool: Vec<SubEvent> = (0..6)
        .map(|i| SubEvent::new(format!("candidate step {i}")).unwrap())
        .collect();
    let induced = scriptprobe::induction::induce_script(&prober, "stub routine", &pool).unwrap();
    // stub scores are arbitrary but the pipeline must stay total
    assert_eq!(induced.provenance.inclusive.len(), 6);
    if !induced.degenerate {
        assert_eq!(induced.events[0], *induced.start_event.as_ref().unwrap());
    }
}

#[test]
fn broken_bridge_command_is_a_clean_error() {
    match ExternalLm::start(&ExternalLmConfig {
        command: vec!["definitely-not-a-real-program-xyz".into()],
        cache_dir: None,
    }) {
        Err(ScorerError::Bridge(msg)) => assert!(msg.contains("spawn")),
        Err(other) => panic!("unexpected error kind: {other}"),
        Ok(_) => panic!("spawn of a missing program succeeded"),
    }
}
