//! Build-gating property suites: exact identities checked over large
//! random families, with zero tolerated violations. The counted suites live
//! in the shared testkit so the acceptance target runs the identical code.

use auditcert::catalog::{class_mass, Strategy};
use auditcert::metric::{class_mean_lift, envelope_lift, evaluate, fragile};
use auditcert::protocol::{apply_partition, induce_partition, CandidateEdge, ProtocolSpec};
use auditcert::rational::{q, Q};
use auditcert_testkit::gen::{random_strategy, singleton_catalog, varied_catalog};
use auditcert_testkit::oracle::{simplex_best_utility, simplex_max};
use auditcert_testkit::suites;
use num::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn classwise_envelope_identity_and_global_certificate() {
    let (identity, certificate) = suites::envelope_identity_and_certificate(10_000);
    assert_eq!(identity, Vec::<String>::new());
    assert_eq!(certificate, Vec::<String>::new());
}

#[test]
fn disagreement_inequality_with_mislabeled_classes() {
    assert_eq!(suites::disagreement_inequality(2_000), Vec::<String>::new());
}

#[test]
fn envelope_minimality_against_random_conservative_functions() {
    assert_eq!(suites::envelope_minimality(1_000), Vec::<String>::new());
}

#[test]
fn best_response_matches_simplex_and_brackets_dense_grid() {
    assert_eq!(suites::lp_oracle_agreement(100), Vec::<String>::new());
}

#[test]
fn refinement_monotonicity_over_random_threshold_pairs() {
    assert_eq!(suites::refinement_monotonicity(500), Vec::<String>::new());
}

/// Simplex oracle cross-checked on full generated catalogs, all three
/// metrics, three budgets.
#[test]
fn best_response_matches_simplex_on_generated_catalogs() {
    use auditcert::bestresponse::{solve, BestResponseError, BudgetedLp};
    use auditcert::metric::{lift, ScoreKind};
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    for i in 0..60u64 {
        let catalog = varied_catalog(&mut rng, 30_000 + i);
        for tau in [q(1, 10), q(1, 5), q(1, 2)] {
            for kind in [
                ScoreKind::Fragile,
                ScoreKind::Envelope,
                ScoreKind::ClassMean,
            ] {
                let score = lift(&catalog, kind);
                let lp = BudgetedLp::new(&catalog, score.clone(), tau.clone());
                match (
                    solve(&catalog, &lp),
                    simplex_best_utility(&catalog, &score, &tau),
                ) {
                    (Ok(b), Some(opt)) => assert_eq!(b.utility, opt, "seed {i}"),
                    (Err(BestResponseError::Infeasible), None) => {}
                    other => panic!("oracle disagreement at seed {i}: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn simplex_oracle_solves_known_programs() {
    // max x0 + 2 x1, x0 + x1 = 1, x1 <= 1/4  ->  x = (3/4, 1/4), value 5/4
    let value = simplex_max(
        &[Q::one(), q(2, 1)],
        &[(vec![Q::one(), Q::one()], Q::one())],
        &[(vec![Q::zero(), Q::one()], q(1, 4))],
    );
    assert_eq!(value, Some(q(5, 4)));
    // infeasible: x0 + x1 = 1 with x0 + x1 <= 1/2
    let value = simplex_max(
        &[Q::one(), Q::one()],
        &[(vec![Q::one(), Q::one()], Q::one())],
        &[(vec![Q::one(), Q::one()], q(1, 2))],
    );
    assert_eq!(value, None);
    // degenerate equality pair keeps phase 1 honest
    let value = simplex_max(
        &[q(3, 1), Q::one()],
        &[
            (vec![Q::one(), Q::one()], Q::one()),
            (vec![Q::one(), -Q::one()], Q::zero()),
        ],
        &[],
    );
    assert_eq!(value, Some(q(2, 1)));
}

/// For classwise-constant score functions, the metric depends on the
/// strategy only through class masses: any within-class redistribution
/// leaves it unchanged.
#[test]
fn classwise_constant_metrics_ignore_within_class_redistribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(406);
    for i in 0..2_000u64 {
        let catalog = varied_catalog(&mut rng, 40_000 + i);
        let x = random_strategy(&mut rng, &catalog);
        let masses = class_mass(&catalog, &x).unwrap();

        // redistribute each class's mass over its members with fresh weights
        let mut reassigned = Vec::new();
        for class in catalog.classes() {
            let total = &masses[&class.id];
            if total.is_zero() {
                continue;
            }
            let weights: Vec<u64> = class
                .member_ids
                .iter()
                .map(|_| rng.random_range(1..=5))
                .collect();
            let weight_sum: u64 = weights.iter().sum();
            for (id, w) in class.member_ids.iter().zip(weights) {
                reassigned.push((id.clone(), total * q(w as i64, weight_sum as i64)));
            }
        }
        let y = Strategy::new(reassigned).unwrap();

        assert_eq!(masses, class_mass(&catalog, &y).unwrap());
        for score in [envelope_lift(&catalog), class_mean_lift(&catalog)] {
            assert_eq!(
                evaluate(&score, &x).unwrap(),
                evaluate(&score, &y).unwrap(),
                "seed {i}"
            );
        }
    }
}

/// fragile <= envelope and class_mean <= envelope pointwise.
#[test]
fn envelope_pointwise_dominates_fragile_and_class_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(407);
    for i in 0..500u64 {
        let catalog = varied_catalog(&mut rng, 50_000 + i);
        let frag = fragile(&catalog);
        let env = envelope_lift(&catalog);
        let mean = class_mean_lift(&catalog);
        for v in catalog.variants() {
            assert!(
                frag.value(&v.id).unwrap() <= env.value(&v.id).unwrap(),
                "seed {i}"
            );
            assert!(
                mean.value(&v.id).unwrap() <= env.value(&v.id).unwrap(),
                "seed {i}"
            );
        }
    }
}

proptest! {
    /// Proptest variant of refinement monotonicity: arbitrary edge lists
    /// and threshold pairs rather than the fixed ChaCha family.
    #[test]
    fn envelope_monotone_under_threshold_refinement(
        n in 3usize..8,
        scores in proptest::collection::vec(0u8..=100, 8),
        edges in proptest::collection::vec((0usize..8, 0usize..8, 1u8..=20), 0..12),
        lo in 0u8..=20,
        hi in 0u8..=20,
    ) {
        let catalog = singleton_catalog(&scores[..n]);
        let ids = catalog.variant_ids();
        let candidate_edges: Vec<CandidateEdge> = edges
            .iter()
            .filter(|(a, b, _)| *a < n && *b < n && a != b)
            .map(|(a, b, conf)| CandidateEdge {
                v: ids[*a].clone(),
                u: ids[*b].clone(),
                attribute_ok: true,
                confidence: q(*conf as i64, 20),
            })
            .collect();
        let spec = ProtocolSpec::new(candidate_edges, Q::zero());
        let (rho_lo, rho_hi) = (q(lo.min(hi) as i64, 20), q(lo.max(hi) as i64, 20));

        let coarse = induce_partition(&spec.at_threshold(rho_lo), &ids).unwrap();
        let fine = induce_partition(&spec.at_threshold(rho_hi), &ids).unwrap();

        // refinement: every fine cell sits inside one coarse cell
        for cell in fine.cells() {
            let hosts = coarse
                .cells()
                .iter()
                .filter(|c| cell.iter().all(|id| c.contains(id)))
                .count();
            prop_assert_eq!(hosts, 1);
        }

        let (coarse_catalog, _) = apply_partition(&catalog, &coarse).unwrap();
        let (fine_catalog, _) = apply_partition(&catalog, &fine).unwrap();
        let env_coarse = envelope_lift(&coarse_catalog);
        let env_fine = envelope_lift(&fine_catalog);
        for id in &ids {
            prop_assert!(env_fine.value(id).unwrap() <= env_coarse.value(id).unwrap());
        }
    }
}
