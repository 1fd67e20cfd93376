//! Exhaustive finite-state verification over grid strategies.
//!
//! Every probability vector with coordinates in steps of 1/k is visited
//! exactly once as a weak composition of k into n parts. Violations of the
//! certificate inequality and failures of manipulation invariance are linear
//! in the strategy, so the grid maximum is a certified lower bound on the
//! simplex supremum, and equals it when the maximizer is a vertex.

use crate::catalog::{Catalog, Strategy, VariantId};
use crate::metric::ScoreFunction;
use crate::rational::Q;
use num::{BigInt, Integer, One, Signed, Zero};
use std::collections::HashMap;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Enumeration budget: C(k+n−1, n−1) must stay within this many strategies.
pub const GRID_GUARD: u128 = 100_000_000;

/// Grid resolution: step 1/k over an n-variant catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub step_denominator: u64,
    pub dimension: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid has {estimated} strategies, above the {GRID_GUARD} guard")]
    TooLarge { estimated: u128 },
    #[error("step denominator must be at least 1")]
    ZeroStep,
    #[error("grid dimension {spec} does not match the catalog's {catalog} variants")]
    DimensionMismatch { spec: usize, catalog: usize },
    #[error("score function does not cover variant `{0}`")]
    MissingScore(VariantId),
    #[error("coverage multiplier requires alpha > 0")]
    AlphaNotPositive,
}

impl GridSpec {
    pub fn new(step_denominator: u64, dimension: usize) -> GridSpec {
        GridSpec {
            step_denominator,
            dimension,
        }
    }

    /// Exact strategy count C(k+n−1, n−1), `None` on u128 overflow.
    pub fn count(&self) -> Option<u128> {
        let k = self.step_denominator as u128;
        let n = self.dimension as u128;
        if n == 0 {
            return Some(0);
        }
        // C(k+n-1, n-1) built incrementally; each prefix is itself binomial,
        // so dividing after each multiplication stays exact.
        let mut acc: u128 = 1;
        for i in 1..n {
            acc = acc.checked_mul(k + i)? / i;
        }
        Some(acc)
    }

    fn check(&self) -> Result<(), GridError> {
        if self.step_denominator == 0 {
            return Err(GridError::ZeroStep);
        }
        match self.count() {
            Some(c) if c <= GRID_GUARD => Ok(()),
            Some(c) => Err(GridError::TooLarge { estimated: c }),
            None => Err(GridError::TooLarge {
                estimated: u128::MAX,
            }),
        }
    }
}

/// Streams every weak composition of `k` into `n` parts, starting from
/// (k, 0, …, 0) with each successor lexicographically smaller.
pub struct Compositions {
    current: Option<Vec<u64>>,
}

pub fn compositions(k: u64, n: usize) -> Compositions {
    if n == 0 {
        return Compositions { current: None };
    }
    let mut first = vec![0; n];
    first[0] = k;
    Compositions {
        current: Some(first),
    }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.current.take()?;
        let n = current.len();
        // successor: move one unit right from the last movable position and
        // pull everything after it back behind that position
        let mut next = current.clone();
        let tail = next[n - 1];
        match (0..n - 1).rev().find(|&j| next[j] > 0) {
            Some(j) => {
                next[j] -= 1;
                next[n - 1] = 0;
                next[j + 1] = tail + 1;
                self.current = Some(next);
            }
            None => self.current = None,
        }
        Some(current)
    }
}

/// Grid strategies over `catalog`'s variants, in enumeration order.
pub fn enumerate_grid<'a>(
    catalog: &'a Catalog,
    spec: &GridSpec,
) -> Result<impl Iterator<Item = Strategy> + 'a, GridError> {
    let n = catalog.variants().len();
    if spec.dimension != n {
        return Err(GridError::DimensionMismatch {
            spec: spec.dimension,
            catalog: n,
        });
    }
    spec.check()?;
    let k = spec.step_denominator;
    Ok(compositions(k, n).map(move |c| composition_strategy(catalog, &c, k)))
}

fn composition_strategy(catalog: &Catalog, composition: &[u64], k: u64) -> Strategy {
    Strategy::new(
        catalog
            .variants()
            .iter()
            .zip(composition)
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v.id.clone(), Q::new(BigInt::from(c), BigInt::from(k)))),
    )
    .expect("composition masses sum to k/k")
}

/// Per-variant weights integerized onto a common denominator, so a grid scan
/// only adds and compares integers.
struct IntWeights {
    /// weight(v) = numerators[v] / denominator, denominator > 0.
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

fn integerize(weights: &[Q]) -> IntWeights {
    let mut denominator = BigInt::one();
    for w in weights {
        denominator = denominator.lcm(w.denom());
    }
    let numerators = weights
        .iter()
        .map(|w| w.numer() * (&denominator / w.denom()))
        .collect();
    IntWeights {
        numerators,
        denominator,
    }
}

fn scan_max(weights: &IntWeights, k: u64, n: usize) -> (BigInt, Vec<u64>) {
    let mut best: Option<(BigInt, Vec<u64>)> = None;
    for c in compositions(k, n) {
        let mut acc = BigInt::zero();
        for (count, w) in c.iter().zip(&weights.numerators) {
            if *count > 0 {
                acc += w * BigInt::from(*count);
            }
        }
        // strict comparison keeps the first maximizer in enumeration order
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, c));
        }
    }
    best.expect("grid is nonempty")
}

fn violation_weights(
    catalog: &Catalog,
    score: &ScoreFunction,
    alpha: &Q,
) -> Result<Vec<Q>, GridError> {
    if !alpha.is_positive() {
        return Err(GridError::AlphaNotPositive);
    }
    catalog
        .variants()
        .iter()
        .map(|v| {
            let m = score
                .value(&v.id)
                .ok_or_else(|| GridError::MissingScore(v.id.clone()))?;
            let audited = catalog
                .class(&v.class_id)
                .map(|c| c.audited_label)
                .unwrap_or(false);
            let harm = if audited { Q::one() } else { Q::zero() };
            Ok(harm - m / alpha)
        })
        .collect()
}

/// Maximum of `H(x) − M(x)/α` over the grid, with the first maximizing
/// strategy in enumeration order as witness.
pub fn max_violation(
    catalog: &Catalog,
    score: &ScoreFunction,
    alpha: &Q,
    spec: &GridSpec,
) -> Result<(Q, Strategy), GridError> {
    #[cfg(feature = "parallel")]
    {
        max_violation_parallel(catalog, score, alpha, spec)
    }
    #[cfg(not(feature = "parallel"))]
    {
        max_violation_sequential(catalog, score, alpha, spec)
    }
}

fn violation_scan_prepare(
    catalog: &Catalog,
    score: &ScoreFunction,
    alpha: &Q,
    spec: &GridSpec,
) -> Result<IntWeights, GridError> {
    let n = catalog.variants().len();
    if spec.dimension != n {
        return Err(GridError::DimensionMismatch {
            spec: spec.dimension,
            catalog: n,
        });
    }
    spec.check()?;
    Ok(integerize(&violation_weights(catalog, score, alpha)?))
}

fn finish_violation(
    catalog: &Catalog,
    weights: &IntWeights,
    k: u64,
    best: (BigInt, Vec<u64>),
) -> (Q, Strategy) {
    let (numer, composition) = best;
    let value = Q::new(numer, &weights.denominator * BigInt::from(k));
    (value, composition_strategy(catalog, &composition, k))
}

/// Single-threaded scan; always available for baseline comparison.
pub fn max_violation_sequential(
    catalog: &Catalog,
    score: &ScoreFunction,
    alpha: &Q,
    spec: &GridSpec,
) -> Result<(Q, Strategy), GridError> {
    let weights = violation_scan_prepare(catalog, score, alpha, spec)?;
    let n = catalog.variants().len();
    let best = scan_max(&weights, spec.step_denominator, n);
    Ok(finish_violation(
        catalog,
        &weights,
        spec.step_denominator,
        best,
    ))
}

/// Scan partitioned by the first coordinate; partitions merge by maximum
/// value and, on ties, by the earlier partition in enumeration order, which
/// reproduces the sequential witness exactly.
#[cfg(feature = "parallel")]
pub fn max_violation_parallel(
    catalog: &Catalog,
    score: &ScoreFunction,
    alpha: &Q,
    spec: &GridSpec,
) -> Result<(Q, Strategy), GridError> {
    let weights = violation_scan_prepare(catalog, score, alpha, spec)?;
    let n = catalog.variants().len();
    let k = spec.step_denominator;
    if n == 1 {
        return max_violation_sequential(catalog, score, alpha, spec);
    }
    // first coordinate descends over partitions, matching enumeration order
    let best = (0..=k)
        .into_par_iter()
        .map(|descending| k - descending)
        .map(|first| {
            let head = &weights.numerators[0] * BigInt::from(first);
            let tail = IntWeights {
                numerators: weights.numerators[1..].to_vec(),
                denominator: weights.denominator.clone(),
            };
            let (value, mut composition) = scan_max(&tail, k - first, n - 1);
            composition.insert(0, first);
            (value + head, composition, first)
        })
        .reduce_with(|a, b| {
            // ties resolve toward the larger first coordinate: the earlier
            // partition in descending-lex enumeration order
            if a.0 > b.0 || (a.0 == b.0 && a.2 > b.2) {
                a
            } else {
                b
            }
        })
        .expect("at least one partition");
    Ok(finish_violation(catalog, &weights, k, (best.0, best.1)))
}

/// A manipulation exhibited on the grid: two strategies with identical
/// class-mass vectors but different metric values.
pub fn grid_invariance_check(
    catalog: &Catalog,
    score: &ScoreFunction,
    spec: &GridSpec,
) -> Result<Option<(Strategy, Strategy)>, GridError> {
    let n = catalog.variants().len();
    if spec.dimension != n {
        return Err(GridError::DimensionMismatch {
            spec: spec.dimension,
            catalog: n,
        });
    }
    spec.check()?;
    let k = spec.step_denominator;
    let scores: Vec<Q> = catalog
        .variants()
        .iter()
        .map(|v| {
            score
                .value(&v.id)
                .cloned()
                .ok_or_else(|| GridError::MissingScore(v.id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let weights = integerize(&scores);
    let class_index: HashMap<&crate::catalog::ClassId, usize> = catalog
        .classes()
        .iter()
        .enumerate()
        .map(|(i, c)| (&c.id, i))
        .collect();
    let variant_class: Vec<usize> = catalog
        .variants()
        .iter()
        .map(|v| class_index[&v.class_id])
        .collect();

    let mut seen: HashMap<Vec<u64>, (BigInt, Vec<u64>)> = HashMap::new();
    for c in compositions(k, n) {
        let mut key = vec![0u64; catalog.classes().len()];
        let mut metric = BigInt::zero();
        for (i, count) in c.iter().enumerate() {
            if *count > 0 {
                key[variant_class[i]] += count;
                metric += &weights.numerators[i] * BigInt::from(*count);
            }
        }
        match seen.get(&key) {
            None => {
                seen.insert(key, (metric, c));
            }
            Some((previous_metric, previous)) if *previous_metric != metric => {
                return Ok(Some((
                    composition_strategy(catalog, previous, k),
                    composition_strategy(catalog, &c, k),
                )));
            }
            Some(_) => {}
        }
    }
    Ok(None)
}
