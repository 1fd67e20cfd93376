//! The build-gating property suites. Each returns a list of violation
//! descriptions; an empty list is a pass. Seeds are fixed so every run
//! covers the identical family.

use crate::gen::{random_strategy, singleton_catalog, small_random_catalog, varied_catalog};
use crate::oracle::{dense_grid_best_utility, simplex_best_utility};
use auditcert::bestresponse::{solve, BestResponseError, BudgetedLp};
use auditcert::catalog::{class_mass, exposure_report, Catalog, SemanticClass};
use auditcert::certify::coverage;
use auditcert::metric::{envelope_lift, evaluate, lift, ScoreKind};
use auditcert::protocol::{apply_partition, induce_partition, CandidateEdge, ProtocolSpec};
use auditcert::rational::{q, Q};
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_REPORTED: usize = 5;

fn note(violations: &mut Vec<String>, text: String) {
    if violations.len() < MAX_REPORTED {
        violations.push(text);
    }
}

/// Over `pairs` random (catalog, strategy) pairs: per class,
/// sum_{v in c} x_v Env(m)(v) = (max member score) * class mass; and
/// globally, H(x) <= M_Env(x) / alpha-hat. Both right-hand sides are
/// recomputed from raw scores and latent harm, independent of the lift and
/// certify modules.
pub fn envelope_identity_and_certificate(pairs: usize) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let mut identity = Vec::new();
    let mut certificate = Vec::new();
    for i in 0..pairs as u64 {
        let catalog = varied_catalog(&mut rng, i);
        let x = random_strategy(&mut rng, &catalog);
        let env = envelope_lift(&catalog);
        let masses = class_mass(&catalog, &x).unwrap();

        for class in catalog.classes() {
            let lhs: Q = class
                .member_ids
                .iter()
                .map(|id| x.mass(id) * env.value(id).unwrap())
                .sum();
            let alpha_c: Q = class
                .member_ids
                .iter()
                .map(|id| catalog.variant(id).unwrap().score.clone())
                .max()
                .unwrap();
            if lhs != alpha_c * &masses[&class.id] {
                note(
                    &mut identity,
                    format!("classwise identity fails at pair {i}, class {}", class.id),
                );
            }
        }

        let alpha_hat: Q = catalog
            .classes()
            .iter()
            .filter(|c| c.audited_label)
            .map(|c| {
                c.member_ids
                    .iter()
                    .map(|id| catalog.variant(id).unwrap().score.clone())
                    .max()
                    .unwrap()
            })
            .min()
            .expect("generated catalogs have harmful classes");
        if Some(&alpha_hat) != coverage(&catalog, &Q::zero()).global_alpha.as_ref() {
            note(
                &mut certificate,
                format!("coverage disagrees with raw alpha-hat at pair {i}"),
            );
        }
        let ideal_harm: Q = catalog
            .variants()
            .iter()
            .filter(|v| v.latent_harm)
            .map(|v| x.mass(&v.id))
            .sum();
        let measured = evaluate(&env, &x).unwrap();
        if ideal_harm > measured / alpha_hat {
            note(
                &mut certificate,
                format!("global certificate violated at pair {i}"),
            );
        }
    }
    (identity, certificate)
}

/// H*(x) <= H-hat(x) + Delta(x) when audited labels are flipped on a random
/// subset of classes; terms recomputed from raw fields and cross-checked
/// against the exposure report.
pub fn disagreement_inequality(cases: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let mut violations = Vec::new();
    for i in 0..cases as u64 {
        let clean = varied_catalog(&mut rng, 10_000 + i);
        let classes: Vec<SemanticClass> = clean
            .classes()
            .iter()
            .map(|c| {
                let mut flipped = c.clone();
                if rng.random_range(0..3) == 0 {
                    flipped.audited_label = !flipped.audited_label;
                }
                flipped
            })
            .collect();
        let catalog = Catalog::new(clean.variants().to_vec(), classes);
        let x = random_strategy(&mut rng, &catalog);

        let true_harm: Q = catalog
            .variants()
            .iter()
            .filter(|v| v.latent_harm)
            .map(|v| x.mass(&v.id))
            .sum();
        let audited_harm: Q = catalog
            .variants()
            .iter()
            .filter(|v| catalog.class_of(&v.id).unwrap().audited_label)
            .map(|v| x.mass(&v.id))
            .sum();
        let disagreement: Q = catalog
            .variants()
            .iter()
            .filter(|v| {
                let class = catalog.class_of(&v.id).unwrap();
                class
                    .ideal_label
                    .is_some_and(|ideal| ideal != class.audited_label)
            })
            .map(|v| x.mass(&v.id))
            .sum();
        if true_harm > &audited_harm + &disagreement {
            note(&mut violations, format!("inequality fails at case {i}"));
        }

        let report = exposure_report(&catalog, &x).unwrap();
        if report.true_harm != true_harm
            || report.audited_harm != audited_harm
            || report.disagreement_mass != disagreement
        {
            note(
                &mut violations,
                format!("exposure report disagrees with raw terms at case {i}"),
            );
        }
    }
    violations
}

/// Envelope is the pointwise minimum of the conservative classwise-constant
/// family: any g constant on classes with g >= m pointwise dominates
/// Env(m) everywhere.
pub fn envelope_minimality(functions: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(403);
    let mut violations = Vec::new();
    for i in 0..functions as u64 {
        let catalog = varied_catalog(&mut rng, 20_000 + i);
        let env = envelope_lift(&catalog);
        for class in catalog.classes() {
            let max_score: Q = class
                .member_ids
                .iter()
                .map(|id| catalog.variant(id).unwrap().score.clone())
                .max()
                .unwrap();
            // conservative classwise-constant value: class max plus noise
            let g = max_score + q(rng.random_range(0..=50), 100);
            for id in &class.member_ids {
                if g < *env.value(id).unwrap() {
                    note(
                        &mut violations,
                        format!("g fails to dominate the envelope at function {i}"),
                    );
                }
            }
        }
    }
    violations
}

/// The enumeration solver agrees with the two-phase simplex exactly and
/// brackets the dense strategy-grid optimum:
/// grid <= lp <= grid + (u_max - u_min)/k, on small random instances under
/// the fragile and envelope metrics.
pub fn lp_oracle_agreement(instances: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = Vec::new();
    let k = 50u64;
    for i in 0..instances as u64 {
        let catalog = small_random_catalog(&mut rng, 4);
        let scores: Vec<Q> = catalog.variants().iter().map(|v| v.score.clone()).collect();
        let tau = (scores.iter().min().unwrap() + scores.iter().max().unwrap()) / q(2, 1);
        let utilities: Vec<Q> = catalog
            .variants()
            .iter()
            .map(|v| v.utility.clone())
            .collect();
        let spread = utilities.iter().max().unwrap() - utilities.iter().min().unwrap();

        for kind in [ScoreKind::Fragile, ScoreKind::Envelope] {
            let score = lift(&catalog, kind);
            let lp = BudgetedLp::new(&catalog, score.clone(), tau.clone());
            let solved = solve(&catalog, &lp);
            let oracle = simplex_best_utility(&catalog, &score, &tau);
            let grid = dense_grid_best_utility(&catalog, &score, &tau, k);
            match (&solved, oracle, grid) {
                (Ok(b), Some(opt), Some(grid_best)) => {
                    if b.utility != opt {
                        note(
                            &mut violations,
                            format!("simplex disagrees at instance {i}"),
                        );
                    }
                    if grid_best > b.utility {
                        note(&mut violations, format!("grid beat the LP at instance {i}"));
                    }
                    if b.utility > grid_best + &spread / q(k as i64, 1) {
                        note(
                            &mut violations,
                            format!("LP exceeds the grid bracket at instance {i}"),
                        );
                    }
                }
                (Err(BestResponseError::Infeasible), None, None) => {}
                _ => note(
                    &mut violations,
                    format!("feasibility disagreement at instance {i}"),
                ),
            }
        }
    }
    violations
}

/// Raising the validation threshold refines the partition and can only
/// lower the envelope, pointwise. Random protocols over singleton-class
/// catalogs, random threshold pairs.
pub fn refinement_monotonicity(cases: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    let mut violations = Vec::new();
    for i in 0..cases as u64 {
        let n = rng.random_range(3..=8usize);
        let scores: Vec<u8> = (0..n).map(|_| rng.random_range(0..=100)).collect();
        let catalog = singleton_catalog(&scores);
        let ids = catalog.variant_ids();
        let n_edges = rng.random_range(0..=12usize);
        let candidate_edges: Vec<CandidateEdge> = (0..n_edges)
            .filter_map(|_| {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let conf = rng.random_range(1..=20i64);
                (a != b).then(|| CandidateEdge {
                    v: ids[a].clone(),
                    u: ids[b].clone(),
                    attribute_ok: rng.random_range(0..10) != 0,
                    confidence: q(conf, 20),
                })
            })
            .collect();
        let spec = ProtocolSpec::new(candidate_edges, Q::zero());
        let mut pair = [rng.random_range(0..=20i64), rng.random_range(0..=20i64)];
        pair.sort();
        let coarse = induce_partition(&spec.at_threshold(q(pair[0], 20)), &ids).unwrap();
        let fine = induce_partition(&spec.at_threshold(q(pair[1], 20)), &ids).unwrap();

        for cell in fine.cells() {
            let hosts = coarse
                .cells()
                .iter()
                .filter(|c| cell.iter().all(|id| c.contains(id)))
                .count();
            if hosts != 1 {
                note(&mut violations, format!("not a refinement at case {i}"));
            }
        }

        let (coarse_catalog, _) = apply_partition(&catalog, &coarse).unwrap();
        let (fine_catalog, _) = apply_partition(&catalog, &fine).unwrap();
        let env_coarse = envelope_lift(&coarse_catalog);
        let env_fine = envelope_lift(&fine_catalog);
        for id in &ids {
            if env_fine.value(id).unwrap() > env_coarse.value(id).unwrap() {
                note(
                    &mut violations,
                    format!("envelope rises under refinement at case {i}"),
                );
            }
        }
    }
    violations
}
