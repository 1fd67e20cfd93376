//! Bit-for-bit reproducibility: every experiment result serializes to
//! exactly the committed JSON. Regenerate with BLESS=1 after an intentional
//! change and review the diff.

use auditcert::harness::{self, ExperimentResult};
use auditcert::rational::q;
use std::fs;
use std::path::PathBuf;

fn check_golden(name: &str, result: &ExperimentResult) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"));
    let rendered = serde_json::to_string_pretty(result).expect("serializable") + "\n";
    if std::env::var_os("BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &rendered).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {name}.json; run with BLESS=1"));
    assert_eq!(rendered, expected, "golden drift in {name}");
}

#[test]
fn deterministic_result_is_stable() {
    check_golden("deterministic", &harness::run_deterministic());
}

#[test]
fn hatecheck_result_is_stable() {
    check_golden("hatecheck", &harness::run_hatecheck());
}

#[test]
fn protocol_sensitivity_result_is_stable() {
    check_golden("protocol_sensitivity", &harness::run_protocol_sensitivity());
}

#[test]
fn sweep_result_is_stable() {
    check_golden("sweep", &harness::run_sensitivity_sweep());
}

#[test]
fn grid_result_is_stable() {
    check_golden("grid", &harness::run_grid(20));
}

#[test]
fn mdp_result_is_stable() {
    check_golden("mdp", &harness::run_mdp());
}

#[test]
fn smt_result_is_stable() {
    check_golden("smt", &harness::run_smt(&[]));
}

#[test]
fn random_small_result_is_stable() {
    check_golden("random_25", &harness::run_random(25, &q(1, 5), 7));
}
