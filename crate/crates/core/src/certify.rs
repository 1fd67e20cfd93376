//! Coverage profiles and harmful-exposure certificates.
//!
//! A certificate publishes a per-class score floor `P_c`, turning a metric
//! budget into a harm ceiling: if every harmful class keeps coverage at
//! least ε, any strategy passing `M(x) ≤ τ` has harmful exposure at most
//! `τ/ε + β`, where β absorbs disagreement slack. Coverage is the envelope
//! value of a harmful class, so the envelope-backed certificate uses
//! ε = α̂, the minimum harmful-class coverage.

use crate::catalog::{exposure_report, Catalog, CatalogError, ClassId, Strategy};
use crate::metric::{evaluate, lift, ScoreFunction, ScoreKind};
use crate::rational::{display_exact, Q};
use num::{BigInt, One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CertifyError {
    #[error("some harmful class has zero coverage; no metric-level certificate exists")]
    Uncertifiable { zero_coverage: Vec<ClassId> },
    #[error("catalog has no harmful classes; coverage is undefined")]
    UndefinedCoverage,
    #[error("strictness floor is zero for class `{0}`; ceiling would be unbounded")]
    ZeroStrictness(ClassId),
    #[error("class `{0}` reports a positive error rate but no sample size")]
    MissingSampleSize(ClassId),
    #[error("confidence level delta must lie strictly inside (0, 1), got {0}")]
    DeltaRange(String),
    #[error("error rate for class `{0}` outside [0, 1]")]
    EpsRange(ClassId),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Published coverage of the harmful classes: per-class maximum detector
/// score and its minimum, the global α̂.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageProfile {
    /// α_c per audited-harmful class.
    pub alpha: BTreeMap<ClassId, Q>,
    /// min over harmful classes; `None` when there are none.
    pub global_alpha: Option<Q>,
    /// Harmful classes with α_c below the detection floor.
    pub flagged_below: BTreeSet<ClassId>,
    /// Harmful classes with α_c = 0; these defeat any multiplier.
    pub zero_coverage: BTreeSet<ClassId>,
}

/// Computes the coverage profile from raw detector scores, flagging classes
/// below `eta_detect`.
pub fn coverage(catalog: &Catalog, eta_detect: &Q) -> CoverageProfile {
    let mut alpha = BTreeMap::new();
    for class in catalog.harmful_classes() {
        let max = catalog
            .members(class)
            .map(|v| v.score.clone())
            .max()
            .unwrap_or_else(Q::zero);
        alpha.insert(class.id.clone(), max);
    }
    let global_alpha = alpha.values().min().cloned();
    let flagged_below = alpha
        .iter()
        .filter(|(_, a)| *a < eta_detect)
        .map(|(c, _)| c.clone())
        .collect();
    let zero_coverage = alpha
        .iter()
        .filter(|(_, a)| a.is_zero())
        .map(|(c, _)| c.clone())
        .collect();
    CoverageProfile {
        alpha,
        global_alpha,
        flagged_below,
        zero_coverage,
    }
}

/// A published harm-ceiling certificate `H(x) ≤ γ·M(x) + β` with its
/// strictness floor profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Metric the floor profile was computed from.
    pub metric: ScoreKind,
    /// Multiplier 1/ε.
    pub gamma: Q,
    /// Additive disagreement slack η̄.
    pub beta: Q,
    /// Strictness: minimum published floor over harmful classes.
    pub epsilon: Q,
    /// Published per-class floors P_c (harmful classes only).
    pub profile: BTreeMap<ClassId, Q>,
    /// Audit budget τ.
    pub budget: Q,
    /// min(1, τ·γ + β).
    pub ceiling: Q,
    /// Whether the unclipped ceiling is below 1.
    pub useful: bool,
}

fn assemble_certificate(
    metric: ScoreKind,
    profile: BTreeMap<ClassId, Q>,
    tau: &Q,
    eta_bar: &Q,
) -> Result<Certificate, CertifyError> {
    let epsilon = match profile.values().min() {
        Some(e) => e.clone(),
        None => return Err(CertifyError::UndefinedCoverage),
    };
    if epsilon.is_zero() {
        let zero_coverage = profile
            .iter()
            .filter(|(_, p)| p.is_zero())
            .map(|(c, _)| c.clone())
            .collect();
        return Err(CertifyError::Uncertifiable { zero_coverage });
    }
    let gamma = epsilon.recip();
    let raw = tau * &gamma + eta_bar;
    let useful = raw < Q::one();
    Ok(Certificate {
        metric,
        gamma,
        beta: eta_bar.clone(),
        epsilon,
        profile,
        budget: tau.clone(),
        ceiling: raw.min(Q::one()),
        useful,
    })
}

/// Envelope-backed certificate from a coverage profile: γ = 1/α̂, β = η̄.
pub fn make_certificate(
    profile: &CoverageProfile,
    tau: &Q,
    eta_bar: &Q,
) -> Result<Certificate, CertifyError> {
    match &profile.global_alpha {
        None => Err(CertifyError::UndefinedCoverage),
        Some(a) if a.is_zero() => Err(CertifyError::Uncertifiable {
            zero_coverage: profile.zero_coverage.iter().cloned().collect(),
        }),
        Some(_) => assemble_certificate(ScoreKind::Envelope, profile.alpha.clone(), tau, eta_bar),
    }
}

/// Strictness certificate for any of the three metrics. The published floor
/// is the guaranteed minimum lifted score of a harmful class: the class
/// minimum for the fragile metric (the platform picks the variant), the
/// class maximum for the envelope, and the mean for the class-mean lift.
pub fn eps_strict_certificate(
    catalog: &Catalog,
    kind: ScoreKind,
    tau: &Q,
    eta_bar: &Q,
) -> Result<Certificate, CertifyError> {
    let score = lift(catalog, kind);
    let mut profile = BTreeMap::new();
    for class in catalog.harmful_classes() {
        let floor = catalog
            .members(class)
            .filter_map(|v| score.value(&v.id))
            .min()
            .cloned()
            .unwrap_or_else(Q::zero);
        profile.insert(class.id.clone(), floor);
    }
    assemble_certificate(kind, profile, tau, eta_bar)
}

/// Certificate violation of one strategy: `Ĥ(x) − (γ·M(x) + β)`.
/// A positive value witnesses a broken certificate.
pub fn check_certificate(
    catalog: &Catalog,
    score: &ScoreFunction,
    cert: &Certificate,
    x: &Strategy,
) -> Result<Q, CertifyError> {
    let measured = evaluate(score, x)?;
    let report = exposure_report(catalog, x)?;
    Ok(report.audited_harm - (&measured * &cert.gamma + &cert.beta))
}

/// One cell of the certified-ceiling sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CeilingCell {
    pub alpha: Q,
    pub eta: Q,
    /// min(1, τ/α + η).
    pub ceiling: Q,
    /// Whether α clears the meaningfulness boundary τ/(1−η).
    pub meaningful: bool,
}

/// Ceiling grid over coverage and slack values at a fixed budget. A cell is
/// meaningful when its unclipped ceiling is below 1, i.e. α > τ/(1−η).
pub fn ceiling_sweep(tau: &Q, alphas: &[Q], etas: &[Q]) -> Vec<CeilingCell> {
    let mut cells = Vec::with_capacity(alphas.len() * etas.len());
    for eta in etas {
        for alpha in alphas {
            let raw = tau / alpha + eta;
            let meaningful = if *eta >= Q::one() {
                false
            } else {
                *alpha > tau / (Q::one() - eta)
            };
            cells.push(CeilingCell {
                alpha: alpha.clone(),
                eta: eta.clone(),
                ceiling: raw.min(Q::one()),
                meaningful,
            });
        }
    }
    cells
}

/// Exact lower binomial tail `P[Bin(n, p) ≤ k]`.
fn binomial_tail(n: u64, k: u64, p: &Q) -> Q {
    // tail = Σ_{j≤k} C(n,j) a^j b^{n-j} / d^n   with p = a/d, b = d − a
    let a = p.numer();
    let d = p.denom();
    let b = d - a;
    // term(0) = b^n; term(j+1) = term(j) · (n−j)·a / ((j+1)·b), exact division
    let mut term = b.pow(u32::try_from(n).expect("sample size fits u32"));
    let mut sum = term.clone();
    for j in 0..k.min(n) {
        term = term * BigInt::from(n - j) * a / (BigInt::from(j + 1) * &b);
        sum += &term;
    }
    // new_raw skips gcd reduction of two huge coprime-in-practice integers;
    // callers only compare, never display, this value.
    Q::new_raw(sum, d.pow(u32::try_from(n).expect("sample size fits u32")))
}

/// One-sided Clopper–Pearson upper confidence bound: the smallest `p` with
/// `P[Bin(n, p) ≤ k] ≤ δ`, bracketed by exact-rational bisection to width
/// 2^-40 and returned as the conservative upper end of the bracket.
pub fn clopper_pearson_upper(errors: u64, samples: u64, delta: &Q) -> Q {
    debug_assert!(samples > 0);
    if errors >= samples {
        return Q::one();
    }
    let mut lo = Q::zero();
    let mut hi = Q::one();
    let half = Q::new(BigInt::one(), BigInt::from(2));
    for _ in 0..40 {
        let mid = (&lo + &hi) * &half;
        if binomial_tail(samples, errors, &mid) <= *delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn ceil_to_u64(x: &Q) -> u64 {
    x.ceil().to_integer().try_into().unwrap_or(u64::MAX)
}

/// Turns per-class annotation error rates into the two published slack
/// readings: `eta_expected` is the worst-case expected disagreement
/// `max_c ε_c`; `eta_hp` replaces each rate with its Clopper–Pearson upper
/// bound at level 1−δ, treating `ε_c·n_c` (rounded up) as the observed error
/// count in `n_c` samples. A class with ε_c = 0 and no sample size is read
/// as a deterministic zero claim and contributes no slack.
pub fn expected_and_hp_slack(
    per_class_eps: &BTreeMap<ClassId, Q>,
    delta: &Q,
    sample_sizes: &BTreeMap<ClassId, u64>,
) -> Result<(Q, Q), CertifyError> {
    if !(delta.is_positive() && *delta < Q::one()) {
        return Err(CertifyError::DeltaRange(display_exact(delta)));
    }
    let mut eta_expected = Q::zero();
    let mut eta_hp = Q::zero();
    for (class, eps) in per_class_eps {
        if eps.is_negative() || *eps > Q::one() {
            return Err(CertifyError::EpsRange(class.clone()));
        }
        eta_expected = eta_expected.max(eps.clone());
        match sample_sizes.get(class) {
            Some(&n) if n > 0 => {
                let errors = ceil_to_u64(&(eps * Q::from_integer(n.into())));
                eta_hp = eta_hp.max(clopper_pearson_upper(errors, n, delta));
            }
            _ if eps.is_zero() => {}
            _ => return Err(CertifyError::MissingSampleSize(class.clone())),
        }
    }
    Ok((eta_expected, eta_hp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{deterministic_catalog, six_variant_model};
    use crate::metric::fragile;
    use crate::rational::{q, qi, round3, round_dec};

    fn cid(s: &str) -> ClassId {
        ClassId::from(s)
    }

    #[test]
    fn calibration_catalog_coverage() {
        let profile = coverage(&deterministic_catalog(), &q(1, 5));
        assert_eq!(profile.alpha[&cid("H1")], q(95, 100));
        assert_eq!(profile.alpha[&cid("H2")], q(85, 100));
        assert_eq!(profile.alpha[&cid("H3")], q(90, 100));
        assert_eq!(profile.global_alpha, Some(q(85, 100)));
        assert!(profile.flagged_below.is_empty());
        assert!(profile.zero_coverage.is_empty());
    }

    #[test]
    fn low_coverage_class_is_flagged_and_pulls_global_down() {
        let mut catalog = deterministic_catalog();
        let mut variants = catalog.variants().to_vec();
        for v in &mut variants {
            if v.class_id == cid("H3") {
                v.score = q(5, 100);
            }
        }
        catalog = Catalog::new(variants, catalog.classes().to_vec());
        let profile = coverage(&catalog, &q(1, 5));
        assert_eq!(profile.global_alpha, Some(q(5, 100)));
        assert_eq!(profile.flagged_below.len(), 1);
        assert!(profile.flagged_below.contains(&cid("H3")));
    }

    #[test]
    fn envelope_certificate_ceilings() {
        let profile = coverage(&deterministic_catalog(), &q(1, 5));
        let cert = make_certificate(&profile, &q(20, 100), &Q::zero()).unwrap();
        assert_eq!(cert.ceiling, q(4, 17));
        assert_eq!(round3(&cert.ceiling), "0.235");
        assert!(cert.useful);
        assert_eq!(cert.epsilon, q(85, 100));

        let worked = CoverageProfile {
            alpha: BTreeMap::from([(cid("c"), q(9, 10))]),
            global_alpha: Some(q(9, 10)),
            flagged_below: BTreeSet::new(),
            zero_coverage: BTreeSet::new(),
        };
        let cert = make_certificate(&worked, &q(20, 100), &q(18, 100)).unwrap();
        assert_eq!(round3(&cert.ceiling), "0.402");
    }

    #[test]
    fn vacuous_and_impossible_certificates() {
        let low = CoverageProfile {
            alpha: BTreeMap::from([(cid("c"), q(1, 10))]),
            global_alpha: Some(q(1, 10)),
            flagged_below: BTreeSet::from([cid("c")]),
            zero_coverage: BTreeSet::new(),
        };
        let cert = make_certificate(&low, &q(20, 100), &Q::zero()).unwrap();
        assert_eq!(cert.ceiling, qi(1));
        assert!(!cert.useful);

        let zero = CoverageProfile {
            alpha: BTreeMap::from([(cid("c"), Q::zero())]),
            global_alpha: Some(Q::zero()),
            flagged_below: BTreeSet::from([cid("c")]),
            zero_coverage: BTreeSet::from([cid("c")]),
        };
        assert!(matches!(
            make_certificate(&zero, &q(20, 100), &Q::zero()),
            Err(CertifyError::Uncertifiable { .. })
        ));

        let empty = coverage(&Catalog::new(Vec::new(), Vec::new()), &q(1, 5));
        assert_eq!(empty.global_alpha, None);
        assert!(matches!(
            make_certificate(&empty, &q(20, 100), &Q::zero()),
            Err(CertifyError::UndefinedCoverage)
        ));
    }

    #[test]
    fn strictness_floors_for_the_three_metrics() {
        let catalog = deterministic_catalog();
        let tau = q(20, 100);
        let env = eps_strict_certificate(&catalog, ScoreKind::Envelope, &tau, &Q::zero()).unwrap();
        assert_eq!(env.epsilon, q(85, 100));
        assert_eq!(round3(&env.ceiling), "0.235");
        assert!(env.useful);

        let frag = eps_strict_certificate(&catalog, ScoreKind::Fragile, &tau, &Q::zero()).unwrap();
        assert_eq!(frag.epsilon, q(10, 100));
        assert_eq!(frag.ceiling, qi(1));
        assert!(!frag.useful);

        let mean =
            eps_strict_certificate(&catalog, ScoreKind::ClassMean, &tau, &Q::zero()).unwrap();
        assert_eq!(mean.epsilon, q(475, 1000));
        assert_eq!(round3(&mean.ceiling), "0.421");
        assert!(mean.useful);
    }

    #[test]
    fn fragile_point_mass_breaks_the_envelope_rate_certificate() {
        let model = six_variant_model();
        let profile = coverage(&model.catalog, &q(1, 5));
        let cert = make_certificate(&profile, &q(20, 100), &Q::zero()).unwrap();
        let frag = fragile(&model.catalog);
        let violation =
            check_certificate(&model.catalog, &frag, &cert, &Strategy::point("h2_manip")).unwrap();
        assert_eq!(violation, q(15, 17));
        assert_eq!(round3(&violation), "0.882");

        let benign =
            check_certificate(&model.catalog, &frag, &cert, &Strategy::point("b1")).unwrap();
        assert!(benign.is_negative());
    }

    #[test]
    fn sweep_spot_values_and_meaningfulness_boundary() {
        let tau = q(20, 100);
        let cells = ceiling_sweep(&tau, &[q(85, 100)], &[q(1, 10), q(2, 10)]);
        assert_eq!(round3(&cells[0].ceiling), "0.335");
        assert_eq!(round3(&cells[1].ceiling), "0.435");
        assert!(cells.iter().all(|c| c.meaningful));

        // at η = 0.20 meaningfulness requires α > 0.25
        let boundary = ceiling_sweep(&tau, &[q(25, 100), q(26, 100)], &[q(2, 10)]);
        assert!(!boundary[0].meaningful);
        assert!(boundary[1].meaningful);
        assert_eq!(boundary[0].ceiling, qi(1));
    }

    #[test]
    fn ceiling_monotone_in_each_argument() {
        let tau = q(20, 100);
        let cells = ceiling_sweep(&tau, &[q(5, 10), q(6, 10)], &[q(0, 1), q(1, 10)]);
        assert!(cells[0].ceiling > cells[1].ceiling); // alpha up, ceiling down
        assert!(cells[0].ceiling < cells[2].ceiling); // eta up, ceiling up
        let tighter = ceiling_sweep(&q(10, 100), &[q(5, 10)], &[q(0, 1)]);
        assert!(tighter[0].ceiling < cells[0].ceiling); // tau down, ceiling down
    }

    #[test]
    fn zero_failure_clopper_pearson_bound() {
        let bound = clopper_pearson_upper(0, 30, &q(5, 100));
        assert_eq!(round_dec(&bound, 4), "0.0950");
        // independent tail oracle: the bound is the tight bracket end
        assert!(binomial_tail(30, 0, &bound) <= q(5, 100));
        let slightly_less = &bound - q(1, 1_000_000_000);
        assert!(binomial_tail(30, 0, &slightly_less) > q(5, 100));
    }

    #[test]
    fn slack_readings() {
        let eps = BTreeMap::from([(cid("c1"), q(5, 100)), (cid("c2"), q(18, 100))]);
        let sizes = BTreeMap::from([(cid("c1"), 200), (cid("c2"), 200)]);
        let (expected, hp) = expected_and_hp_slack(&eps, &q(5, 100), &sizes).unwrap();
        assert_eq!(expected, q(18, 100));
        assert!(hp > expected); // upper confidence bound exceeds the point rate
        assert!(hp < q(25, 100));

        let zeros = BTreeMap::from([(cid("c1"), Q::zero())]);
        let (expected, hp) = expected_and_hp_slack(&zeros, &q(5, 100), &BTreeMap::new()).unwrap();
        assert!(expected.is_zero() && hp.is_zero());

        let missing = BTreeMap::from([(cid("c1"), q(1, 10))]);
        assert_eq!(
            expected_and_hp_slack(&missing, &q(5, 100), &BTreeMap::new()),
            Err(CertifyError::MissingSampleSize(cid("c1")))
        );
    }
}
