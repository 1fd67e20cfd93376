//! Exact adversarial best response: the utility-maximizing platform
//! strategy under an audit budget, solved by vertex enumeration.
//!
//! With one budget row on top of the probability simplex, every basic
//! feasible solution has at most two nonzero coordinates: a feasible point
//! mass, or a two-variant mixture pinned exactly to the budget boundary.
//! Enumerating those candidates in rational arithmetic gives the exact
//! optimum with no LP solver dependency.

use crate::catalog::{exposure_report, Catalog, ExposureReport, Strategy, VariantId};
use crate::metric::{evaluate, ScoreFunction};
use crate::rational::Q;
use num::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Utility maximization `max Σ x_v u(v)` subject to `Σ x_v score(v) ≤ budget`
/// over the probability simplex.
#[derive(Debug, Clone)]
pub struct BudgetedLp {
    pub scores: ScoreFunction,
    pub utilities: BTreeMap<VariantId, Q>,
    pub budget: Q,
}

impl BudgetedLp {
    /// LP over a catalog's own utilities and the given lifted scores.
    pub fn new(catalog: &Catalog, scores: ScoreFunction, budget: Q) -> BudgetedLp {
        BudgetedLp {
            scores,
            utilities: catalog
                .variants()
                .iter()
                .map(|v| (v.id.clone(), v.utility.clone()))
                .collect(),
            budget,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BestResponseError {
    #[error("every variant scores above the budget; the audit constraint is infeasible")]
    Infeasible,
    #[error("no utility defined for variant `{0}`")]
    MissingUtility(VariantId),
    #[error("no score defined for variant `{0}`")]
    MissingScore(VariantId),
}

/// The solved optimum with its exposure accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub strategy: Strategy,
    pub utility: Q,
    /// Metric value at the optimum; ≤ budget by construction.
    pub measured: Q,
    pub report: ExposureReport,
    /// Support variant ids, at most two.
    pub support: Vec<VariantId>,
    /// Number of enumerated candidates attaining the optimal utility.
    /// Greater than one means the deterministic tie-break chose.
    pub tied_optima: usize,
}

struct Candidate {
    utility: Q,
    true_harm: Q,
    support: Vec<(VariantId, Q)>,
}

/// Solves the budgeted LP exactly.
///
/// Candidates are every feasible point mass and every two-variant mixture
/// sitting exactly on the budget boundary (which requires the two scores to
/// straddle the budget strictly). Ties on utility prefer smaller true harm,
/// then the lexicographically smallest support.
pub fn solve(catalog: &Catalog, lp: &BudgetedLp) -> Result<BestResponse, BestResponseError> {
    let mut rows: Vec<(&VariantId, &Q, &Q, Q)> = Vec::with_capacity(catalog.variants().len());
    for v in catalog.variants() {
        let score = lp
            .scores
            .value(&v.id)
            .ok_or_else(|| BestResponseError::MissingScore(v.id.clone()))?;
        let utility = lp
            .utilities
            .get(&v.id)
            .ok_or_else(|| BestResponseError::MissingUtility(v.id.clone()))?;
        let harm = if v.latent_harm { Q::one() } else { Q::zero() };
        rows.push((&v.id, score, utility, harm));
    }

    let mut best: Option<Candidate> = None;
    let mut tied = 0usize;
    let mut consider = |candidate: Candidate| match &best {
        None => {
            tied = 1;
            best = Some(candidate);
        }
        Some(current) => {
            if candidate.utility > current.utility {
                tied = 1;
                best = Some(candidate);
            } else if candidate.utility == current.utility {
                tied += 1;
                let support_ids = |c: &Candidate| {
                    let mut ids: Vec<&VariantId> = c.support.iter().map(|(id, _)| id).collect();
                    ids.sort();
                    ids.into_iter().cloned().collect::<Vec<_>>()
                };
                if candidate.true_harm < current.true_harm
                    || (candidate.true_harm == current.true_harm
                        && support_ids(&candidate) < support_ids(current))
                {
                    best = Some(candidate);
                }
            }
        }
    };

    for (id, score, utility, harm) in &rows {
        if **score <= lp.budget {
            consider(Candidate {
                utility: (*utility).clone(),
                true_harm: harm.clone(),
                support: vec![((*id).clone(), Q::one())],
            });
        }
    }
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            // boundary mixture needs the scores strictly on opposite sides
            let (hi, lo) = if a.1 > b.1 { (a, b) } else { (b, a) };
            if !(*lo.1 < lp.budget && lp.budget < *hi.1) {
                continue;
            }
            let lambda = (&lp.budget - lo.1) / (hi.1 - lo.1);
            let co = Q::one() - &lambda;
            consider(Candidate {
                utility: &lambda * hi.2 + &co * lo.2,
                true_harm: &lambda * &hi.3 + &co * &lo.3,
                support: vec![(hi.0.clone(), lambda), (lo.0.clone(), co)],
            });
        }
    }

    let Some(winner) = best else {
        return Err(BestResponseError::Infeasible);
    };
    let strategy = Strategy::new(winner.support.clone()).expect("candidate masses sum to 1");
    let measured = evaluate(&lp.scores, &strategy).expect("scores cover the support");
    let report = exposure_report(catalog, &strategy).expect("support drawn from the catalog");
    let mut support: Vec<VariantId> = winner.support.into_iter().map(|(id, _)| id).collect();
    support.sort();
    Ok(BestResponse {
        utility: winner.utility,
        measured,
        report,
        support,
        strategy,
        tied_optima: tied,
    })
}

/// One point of a utility–harm trajectory; `None` marks an infeasible budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: Q,
    pub utility: Option<Q>,
    pub true_harm: Option<Q>,
}

/// Best responses across a sweep of budgets, infeasible budgets reported as
/// gaps rather than errors.
pub fn trajectory(
    catalog: &Catalog,
    score: &ScoreFunction,
    taus: &[Q],
) -> Result<Vec<TrajectoryPoint>, BestResponseError> {
    let mut points = Vec::with_capacity(taus.len());
    for tau in taus {
        let lp = BudgetedLp::new(catalog, score.clone(), tau.clone());
        match solve(catalog, &lp) {
            Ok(best) => points.push(TrajectoryPoint {
                tau: tau.clone(),
                utility: Some(best.utility),
                true_harm: Some(best.report.true_harm),
            }),
            Err(BestResponseError::Infeasible) => points.push(TrajectoryPoint {
                tau: tau.clone(),
                utility: None,
                true_harm: None,
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(points)
}
