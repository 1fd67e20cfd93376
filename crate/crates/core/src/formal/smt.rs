//! SMT-LIB2 emission for the three metric properties, plus a subprocess
//! harness for external QF_LRA solvers.

use super::sexp::{apply, atom, list, Sexp};
use crate::catalog::Catalog;
use crate::certify::coverage;
use crate::metric::envelope_lift;
use crate::rational::Q;
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Default per-query wall-clock budget for external solvers.
pub const SOLVER_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmtProperty {
    EnvelopeInvariance,
    FragilityWitness,
    Certification,
}

impl SmtProperty {
    pub const ALL: [SmtProperty; 3] = [
        SmtProperty::EnvelopeInvariance,
        SmtProperty::FragilityWitness,
        SmtProperty::Certification,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            SmtProperty::EnvelopeInvariance => "envelope_invariance",
            SmtProperty::FragilityWitness => "fragility_witness",
            SmtProperty::Certification => "certification",
        }
    }
}

impl fmt::Display for SmtProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedVerdict {
    Sat,
    Unsat,
}

impl fmt::Display for ExpectedVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpectedVerdict::Sat => "sat",
            ExpectedVerdict::Unsat => "unsat",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SmtQuery {
    pub property: SmtProperty,
    /// Always QF_LRA: rational constants, linear (in)equalities over reals.
    pub logic: &'static str,
    pub text: String,
    pub expected_verdict: ExpectedVerdict,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormalError {
    #[error("certification queries require alpha > 0")]
    AlphaNotPositive,
}

fn smt_rational(x: &Q) -> Sexp {
    if x.is_integer() {
        atom(format!("{}.0", x.numer()))
    } else {
        list([
            atom("/"),
            atom(x.numer().to_string()),
            atom(x.denom().to_string()),
        ])
    }
}

fn var_name(prefix: &str, id: &str) -> String {
    let sanitized: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{prefix}_{sanitized}")
}

/// (declare-const v Real), (assert (>= v 0.0)) per variable, total mass 1.
fn simplex_block(commands: &mut Vec<Sexp>, names: &[String]) {
    for name in names {
        commands.push(list([
            atom("declare-const"),
            atom(name.clone()),
            atom("Real"),
        ]));
    }
    for name in names {
        commands.push(list([
            atom("assert"),
            list([atom(">="), atom(name.clone()), atom("0.0")]),
        ]));
    }
    commands.push(list([
        atom("assert"),
        list([
            atom("="),
            apply("+", names.iter().map(|n| atom(n.clone())).collect()),
            atom("1.0"),
        ]),
    ]));
}

fn weighted_sum(names: &[String], weights: &[Q]) -> Sexp {
    apply(
        "+",
        names
            .iter()
            .zip(weights)
            .map(|(n, w)| list([atom("*"), smt_rational(w), atom(n.clone())]))
            .collect(),
    )
}

/// |left − right| > margin as two strict linear inequalities.
fn absolute_gap(left: Sexp, right: Sexp, margin: Sexp) -> Sexp {
    list([
        atom("or"),
        list([
            atom(">"),
            list([atom("-"), left.clone(), right.clone()]),
            margin.clone(),
        ]),
        list([atom(">"), list([atom("-"), right, left]), margin]),
    ])
}

/// Encodes one of the three metric properties over `catalog` as a
/// satisfiability query with a structurally computed expected verdict.
///
/// Invariance asks for two strategies with identical class masses but
/// different envelope-metric values (unsatisfiable by construction).
/// Fragility asks the same of the raw per-variant metric with a strict
/// 10^-8 gap (satisfiable exactly when some class scores unevenly).
/// Certification asks for a strategy with alpha * H(x) > Env(x)
/// (unsatisfiable whenever alpha is at most the global coverage).
pub fn emit_smt(
    catalog: &Catalog,
    property: SmtProperty,
    alpha: &Q,
) -> Result<SmtQuery, FormalError> {
    if property == SmtProperty::Certification && !alpha.is_positive() {
        return Err(FormalError::AlphaNotPositive);
    }

    let variants = catalog.variants();
    let x_names: Vec<String> = variants
        .iter()
        .map(|v| var_name("x", v.id.as_str()))
        .collect();
    let envelope = envelope_lift(catalog);
    let envelope_weights: Vec<Q> = variants
        .iter()
        .map(|v| envelope.value(&v.id).expect("lift covers catalog").clone())
        .collect();

    let expected_verdict = match property {
        SmtProperty::EnvelopeInvariance => ExpectedVerdict::Unsat,
        SmtProperty::FragilityWitness => {
            let uneven_class = catalog.classes().iter().any(|c| {
                let mut scores = catalog.members(c).map(|v| &v.score);
                match scores.next() {
                    Some(first) => scores.any(|s| s != first),
                    None => false,
                }
            });
            if uneven_class {
                ExpectedVerdict::Sat
            } else {
                ExpectedVerdict::Unsat
            }
        }
        SmtProperty::Certification => {
            // alpha * H - Env is linear, so its simplex maximum sits on a
            // vertex: unsat exactly when alpha <= alpha_c for every harmful
            // class, i.e. alpha <= global coverage
            match coverage(catalog, &Q::zero()).global_alpha {
                Some(global) if *alpha > global => ExpectedVerdict::Sat,
                _ => ExpectedVerdict::Unsat,
            }
        }
    };

    let mut commands = vec![
        list([atom("set-logic"), atom("QF_LRA")]),
        list([
            atom("set-info"),
            atom(":status"),
            atom(expected_verdict.to_string()),
        ]),
    ];
    simplex_block(&mut commands, &x_names);

    match property {
        SmtProperty::EnvelopeInvariance | SmtProperty::FragilityWitness => {
            let y_names: Vec<String> = variants
                .iter()
                .map(|v| var_name("y", v.id.as_str()))
                .collect();
            simplex_block(&mut commands, &y_names);
            for class in catalog.classes() {
                let of = |names: &[String]| {
                    apply(
                        "+",
                        variants
                            .iter()
                            .zip(names)
                            .filter(|(v, _)| v.class_id == class.id)
                            .map(|(_, n)| atom(n.clone()))
                            .collect(),
                    )
                };
                commands.push(list([
                    atom("assert"),
                    list([atom("="), of(&x_names), of(&y_names)]),
                ]));
            }
            let (weights, margin) = match property {
                SmtProperty::EnvelopeInvariance => (envelope_weights.clone(), atom("0.0")),
                _ => (
                    variants.iter().map(|v| v.score.clone()).collect(),
                    list([atom("/"), atom("1"), atom("100000000")]),
                ),
            };
            commands.push(list([
                atom("assert"),
                absolute_gap(
                    weighted_sum(&x_names, &weights),
                    weighted_sum(&y_names, &weights),
                    margin,
                ),
            ]));
        }
        SmtProperty::Certification => {
            let harm = apply(
                "+",
                variants
                    .iter()
                    .zip(&x_names)
                    .filter(|(v, _)| {
                        catalog
                            .class(&v.class_id)
                            .map(|c| c.audited_label)
                            .unwrap_or(false)
                    })
                    .map(|(_, n)| atom(n.clone()))
                    .collect(),
            );
            commands.push(list([
                atom("assert"),
                list([
                    atom(">"),
                    list([atom("*"), smt_rational(alpha), harm]),
                    weighted_sum(&x_names, &envelope_weights),
                ]),
            ]));
        }
    }
    commands.push(list([atom("check-sat")]));

    let text = commands
        .iter()
        .map(Sexp::to_string)
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    Ok(SmtQuery {
        property,
        logic: "QF_LRA",
        text,
        expected_verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverOutcome {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    /// Solver exited but printed something other than a verdict.
    UnknownOutput,
    /// Executable missing or unlaunchable; recorded, never treated as a pass.
    Unavailable,
}

impl SolverOutcome {
    pub fn matches(&self, expected: ExpectedVerdict) -> bool {
        matches!(
            (self, expected),
            (SolverOutcome::Sat, ExpectedVerdict::Sat)
                | (SolverOutcome::Unsat, ExpectedVerdict::Unsat)
        )
    }
}

impl fmt::Display for SolverOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverOutcome::Sat => "sat",
            SolverOutcome::Unsat => "unsat",
            SolverOutcome::Unknown => "unknown",
            SolverOutcome::Timeout => "timeout",
            SolverOutcome::UnknownOutput => "unknown-output",
            SolverOutcome::Unavailable => "external solver unavailable",
        })
    }
}

#[derive(Debug)]
pub struct SolverRun {
    pub outcome: SolverOutcome,
    pub elapsed: Duration,
    /// Captured stdout, kept verbatim for unknown-output diagnosis.
    pub raw_output: String,
}

/// Runs `solver_path <query file>` with a hard wall-clock limit, parsing the
/// first output token as the verdict.
pub fn run_external_solver(query: &SmtQuery, solver_path: &Path, timeout: Duration) -> SolverRun {
    let started = Instant::now();
    let unavailable = |raw: String| SolverRun {
        outcome: SolverOutcome::Unavailable,
        elapsed: started.elapsed(),
        raw_output: raw,
    };

    let mut file = match tempfile::Builder::new().suffix(".smt2").tempfile() {
        Ok(f) => f,
        Err(e) => return unavailable(format!("temp file: {e}")),
    };
    if let Err(e) = file.write_all(query.text.as_bytes()) {
        return unavailable(format!("temp file: {e}"));
    }

    let mut child = match Command::new(solver_path)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return unavailable(e.to_string()),
    };

    let deadline = started + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return SolverRun {
                        outcome: SolverOutcome::Timeout,
                        elapsed: started.elapsed(),
                        raw_output: String::new(),
                    };
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return unavailable(e.to_string()),
        }
    }

    let mut raw_output = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        use std::io::Read;
        let _ = stdout.read_to_string(&mut raw_output);
    }
    let outcome = match raw_output.split_whitespace().next() {
        Some("sat") => SolverOutcome::Sat,
        Some("unsat") => SolverOutcome::Unsat,
        Some("unknown") => SolverOutcome::Unknown,
        _ => SolverOutcome::UnknownOutput,
    };
    SolverRun {
        outcome,
        elapsed: started.elapsed(),
        raw_output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{class, six_variant_model, variant};
    use crate::catalog::Catalog;
    use crate::formal::sexp::parse_all;
    use crate::rational::q;

    fn singleton_catalog() -> Catalog {
        Catalog::new(
            vec![
                variant("a", "A", (1, 2), (1, 2), false),
                variant("h", "H", (3, 4), (1, 2), true),
            ],
            vec![class("A", &["a"], false), class("H", &["h"], true)],
        )
    }

    #[test]
    fn six_variant_expected_verdicts() {
        let model = six_variant_model();
        let alpha = q(85, 100);
        let verdicts: Vec<ExpectedVerdict> = SmtProperty::ALL
            .iter()
            .map(|p| {
                emit_smt(&model.catalog, *p, &alpha)
                    .unwrap()
                    .expected_verdict
            })
            .collect();
        assert_eq!(
            verdicts,
            vec![
                ExpectedVerdict::Unsat,
                ExpectedVerdict::Sat,
                ExpectedVerdict::Unsat
            ]
        );
    }

    #[test]
    fn all_singleton_catalog_has_no_fragility_witness() {
        let catalog = singleton_catalog();
        let query = emit_smt(&catalog, SmtProperty::FragilityWitness, &q(1, 2)).unwrap();
        assert_eq!(query.expected_verdict, ExpectedVerdict::Unsat);
    }

    #[test]
    fn overclaimed_coverage_is_expected_satisfiable() {
        let model = six_variant_model();
        let query = emit_smt(&model.catalog, SmtProperty::Certification, &q(9, 10)).unwrap();
        assert_eq!(query.expected_verdict, ExpectedVerdict::Sat);
        let query = emit_smt(&model.catalog, SmtProperty::Certification, &q(85, 100)).unwrap();
        assert_eq!(query.expected_verdict, ExpectedVerdict::Unsat);
    }

    #[test]
    fn certification_requires_positive_alpha() {
        let model = six_variant_model();
        assert_eq!(
            emit_smt(&model.catalog, SmtProperty::Certification, &q(0, 1)).unwrap_err(),
            FormalError::AlphaNotPositive
        );
    }

    #[test]
    fn emitted_text_round_trips_through_the_parser() {
        let model = six_variant_model();
        for property in SmtProperty::ALL {
            let query = emit_smt(&model.catalog, property, &q(85, 100)).unwrap();
            let parsed = parse_all(&query.text).unwrap();
            let rendered = parsed
                .iter()
                .map(Sexp::to_string)
                .collect::<Vec<_>>()
                .join("\n")
                + "\n";
            assert_eq!(rendered, query.text);
            assert_eq!(parsed.first().unwrap().to_string(), "(set-logic QF_LRA)");
            assert_eq!(parsed.last().unwrap().to_string(), "(check-sat)");
            let declared = parsed
                .iter()
                .filter(|s| matches!(s, Sexp::List(items) if items.first() == Some(&atom("declare-const"))))
                .count();
            let pairwise = property != SmtProperty::Certification;
            assert_eq!(declared, if pairwise { 12 } else { 6 });
        }
    }

    #[test]
    fn fragility_margin_appears_in_the_script() {
        let model = six_variant_model();
        let query = emit_smt(&model.catalog, SmtProperty::FragilityWitness, &q(1, 1)).unwrap();
        assert!(query.text.contains("(/ 1 100000000)"));
        let query = emit_smt(&model.catalog, SmtProperty::EnvelopeInvariance, &q(1, 1)).unwrap();
        assert!(!query.text.contains("100000000"));
    }

    #[cfg(unix)]
    fn fake_solver(body: &str) -> tempfile::TempPath {
        use std::os::unix::fs::PermissionsExt;
        let mut file = tempfile::Builder::new().suffix(".sh").tempfile().unwrap();
        writeln!(file, "#!/bin/sh\n{body}").unwrap();
        let path = file.into_temp_path();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    #[test]
    fn missing_solver_reports_unavailable() {
        let model = six_variant_model();
        let query = emit_smt(&model.catalog, SmtProperty::Certification, &q(85, 100)).unwrap();
        let run = run_external_solver(
            &query,
            Path::new("/nonexistent/solver-binary"),
            Duration::from_secs(1),
        );
        assert_eq!(run.outcome, SolverOutcome::Unavailable);
        assert!(!run.outcome.matches(query.expected_verdict));
    }

    #[test]
    #[cfg(unix)]
    fn scripted_solver_verdicts_are_parsed() {
        let model = six_variant_model();
        let query = emit_smt(&model.catalog, SmtProperty::Certification, &q(85, 100)).unwrap();

        let unsat = fake_solver("echo unsat");
        let run = run_external_solver(&query, &unsat, Duration::from_secs(5));
        assert_eq!(run.outcome, SolverOutcome::Unsat);
        assert!(run.outcome.matches(query.expected_verdict));

        let garbled = fake_solver("echo segfault near line 3");
        let run = run_external_solver(&query, &garbled, Duration::from_secs(5));
        assert_eq!(run.outcome, SolverOutcome::UnknownOutput);
        assert_eq!(run.raw_output, "segfault near line 3\n");
    }

    #[test]
    #[cfg(unix)]
    fn slow_solver_times_out() {
        let model = six_variant_model();
        let query = emit_smt(&model.catalog, SmtProperty::Certification, &q(85, 100)).unwrap();
        let sleeper = fake_solver("sleep 30");
        let run = run_external_solver(&query, &sleeper, Duration::from_millis(200));
        assert_eq!(run.outcome, SolverOutcome::Timeout);
        assert!(run.elapsed < Duration::from_secs(5));
    }
}
