//! Byte-level regression for a pinned convergence trace. Set
//! `AFFINEPR_BLESS=1` to regenerate the reference after an intended change.

use std::path::Path;

use affinepr_core::ensemble::ModelKind;
use affinepr_core::lab::{self, ExperimentSpec, OutputFormat};

#[test]
fn pinned_convergence_trace_matches_reference() {
    let spec = ExperimentSpec {
        n: 8,
        trials: 2,
        base_seed: 2024,
        ..ExperimentSpec::convergence(ModelKind::Gaussian)
    };
    let dir = tempfile::tempdir().unwrap();
    let result = lab::run_experiment(&spec).unwrap();
    lab::write_results(&result, dir.path(), &[OutputFormat::Csv]).unwrap();
    let produced = std::fs::read(dir.path().join("convergence.csv")).unwrap();
    let reference = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/convergence_n8.csv");
    if std::env::var_os("AFFINEPR_BLESS").is_some() {
        std::fs::write(&reference, &produced).unwrap();
    }
    let expected = std::fs::read(&reference).expect("reference trace; run with AFFINEPR_BLESS=1 to create");
    assert_eq!(String::from_utf8(produced).unwrap(), String::from_utf8(expected).unwrap());
}
