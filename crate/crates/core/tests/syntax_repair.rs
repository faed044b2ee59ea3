use std::path::PathBuf;

use xlat_core::c::project::analyze_source;
use xlat_core::llm::{Gateway, MockTable};
use xlat_core::syntax::rules::RuleContext;
use xlat_core::syntax::{repair_loop, RepairOptions, Stage, Workspace};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/repair").join(name)
}

fn repair(name: &str) -> (xlat_core::syntax::RepairSession, usize) {
    let dir = fixture(name);
    let c = std::fs::read_to_string(dir.join("program.c")).unwrap();
    let rs = std::fs::read_to_string(dir.join("input.rs")).unwrap();
    let structure = analyze_source(name, &c).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let ws = Workspace::create(tmp.path().join(name), name, &rs)
        .unwrap()
        .with_target_dir(std::env::temp_dir().join("xlat-test-target"));
    let gw = Gateway::mock(MockTable::default());
    let s = repair_loop(&ws, &rs, name, &RuleContext::new(&structure.symbols), &gw, &RepairOptions::default()).unwrap();
    (s, gw.total_calls())
}

#[test]
fn seeded_workspaces_repair_without_model_calls() {
    for name in ["resolve", "type", "import", "rename", "unsafe"] {
        let (s, calls) = repair(name);
        assert!(s.success, "{name}: {:#?}\n{}", s.final_errors, s.source());
        assert_eq!(calls, 0, "{name}");
        assert!(s.ledger.iter().all(|e| e.stage == Stage::Rule), "{name}");
        assert!(!s.ledger.is_empty(), "{name}");
        assert!(s.ledger.iter().all(|e| e.id.starts_with(&format!("{name}/"))), "{name}: {:?}", s.ledger);
    }
}
