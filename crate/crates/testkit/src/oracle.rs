//! Independent oracles for the optimization paths: a from-scratch two-phase
//! tableau simplex and an integerized dense-grid search. Both are separate
//! implementations from the library's candidate-enumeration solver, so
//! agreement is evidence rather than tautology.

use auditcert::catalog::Catalog;
use auditcert::metric::ScoreFunction;
use auditcert::rational::Q;
use num::{BigInt, One, Signed, ToPrimitive, Zero};

/// Maximizes `c . x` subject to `eq` rows (`a . x = b`), `ub` rows
/// (`a . x <= b`), and `x >= 0`, by two-phase tableau simplex with Bland's
/// rule. Requires every right-hand side nonnegative. Returns the optimal
/// value, or None when infeasible. Panics on an unbounded program; the
/// callers here always include a total-mass equality, which bounds the
/// feasible set.
pub fn simplex_max(c: &[Q], eq: &[(Vec<Q>, Q)], ub: &[(Vec<Q>, Q)]) -> Option<Q> {
    let n = c.len();
    let n_slack = ub.len();
    let n_art = eq.len();
    let cols = n + n_slack + n_art;
    let m = eq.len() + ub.len();

    let mut a = vec![vec![Q::zero(); cols]; m];
    let mut b = vec![Q::zero(); m];
    let mut basis = vec![0usize; m];
    for (i, (row, rhs)) in eq.iter().enumerate() {
        assert!(!rhs.is_negative(), "standard form wants b >= 0");
        assert_eq!(row.len(), n);
        a[i][..n].clone_from_slice(row);
        a[i][n + n_slack + i] = Q::one();
        b[i] = rhs.clone();
        basis[i] = n + n_slack + i;
    }
    for (j, (row, rhs)) in ub.iter().enumerate() {
        assert!(!rhs.is_negative(), "standard form wants b >= 0");
        assert_eq!(row.len(), n);
        let r = eq.len() + j;
        a[r][..n].clone_from_slice(row);
        a[r][n + j] = Q::one();
        b[r] = rhs.clone();
        basis[r] = n + j;
    }

    // entering restricted to `usable` columns so phase 2 never re-admits an
    // artificial
    fn optimize(
        a: &mut [Vec<Q>],
        b: &mut [Q],
        basis: &mut [usize],
        cost: &[Q],
        usable: usize,
    ) -> Q {
        loop {
            // reduced costs at the current basis: cost_B . tableau - cost
            let entering = (0..usable).find(|&j| {
                let z: Q = basis
                    .iter()
                    .zip(a.iter())
                    .map(|(&bi, row)| &cost[bi] * &row[j])
                    .sum();
                z - &cost[j] < Q::zero()
            });
            let Some(col) = entering else {
                return basis
                    .iter()
                    .zip(b.iter())
                    .map(|(&bi, rhs)| &cost[bi] * rhs)
                    .sum();
            };
            let mut leave: Option<usize> = None;
            for r in 0..a.len() {
                if a[r][col].is_positive() {
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let cur = &b[l] / &a[l][col];
                            let cand = &b[r] / &a[r][col];
                            cand < cur || (cand == cur && basis[r] < basis[l])
                        }
                    };
                    if better {
                        leave = Some(r);
                    }
                }
            }
            let r = leave.expect("bounded by the total-mass equality");
            let pivot = a[r][col].clone();
            for x in a[r].iter_mut() {
                *x /= &pivot;
            }
            b[r] /= &pivot;
            for i in 0..a.len() {
                if i != r && !a[i][col].is_zero() {
                    let factor = a[i][col].clone();
                    for j in 0..a[i].len() {
                        let delta = &factor * &a[r][j];
                        a[i][j] -= delta;
                    }
                    let delta = &factor * &b[r];
                    b[i] -= delta;
                }
            }
            basis[r] = col;
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![Q::zero(); cols];
        for j in n + n_slack..cols {
            phase1[j] = -Q::one();
        }
        let infeasibility = optimize(&mut a, &mut b, &mut basis, &phase1, cols);
        if !infeasibility.is_zero() {
            return None;
        }
    }
    let mut phase2 = vec![Q::zero(); cols];
    phase2[..n].clone_from_slice(c);
    Some(optimize(&mut a, &mut b, &mut basis, &phase2, n + n_slack))
}

/// Best response oracle: maximize utility subject to the measured-score
/// budget on the exact simplex.
pub fn simplex_best_utility(catalog: &Catalog, score: &ScoreFunction, tau: &Q) -> Option<Q> {
    let utilities: Vec<Q> = catalog
        .variants()
        .iter()
        .map(|v| v.utility.clone())
        .collect();
    let scores: Vec<Q> = catalog
        .variants()
        .iter()
        .map(|v| score.value(&v.id).expect("score covers catalog").clone())
        .collect();
    let ones = vec![Q::one(); utilities.len()];
    simplex_max(&utilities, &[(ones, Q::one())], &[(scores, tau.clone())])
}

/// Exhaustive search over all strategies with masses in multiples of 1/k:
/// the best utility among grid points meeting the budget, or None when no
/// grid point is feasible. Integerized to i128; values must have
/// denominators whose lcm keeps products in range (true for every catalog
/// in these tests).
pub fn dense_grid_best_utility(
    catalog: &Catalog,
    score: &ScoreFunction,
    tau: &Q,
    k: u64,
) -> Option<Q> {
    let n = catalog.variants().len();
    let mut denom_lcm = BigInt::one();
    let mut collect = |value: &Q| {
        denom_lcm = num::integer::lcm(denom_lcm.clone(), value.denom().clone());
    };
    for v in catalog.variants() {
        collect(&v.utility);
        collect(score.value(&v.id).expect("score covers catalog"));
    }
    collect(tau);

    let scale = |value: &Q| -> i128 {
        (value * Q::new(denom_lcm.clone(), BigInt::one()))
            .to_integer()
            .to_i128()
            .expect("scaled test values fit i128")
    };
    let utilities: Vec<i128> = catalog
        .variants()
        .iter()
        .map(|v| scale(&v.utility))
        .collect();
    let scores: Vec<i128> = catalog
        .variants()
        .iter()
        .map(|v| scale(score.value(&v.id).unwrap()))
        .collect();
    let budget = scale(tau) * k as i128;

    let mut best: Option<i128> = None;
    let mut counts = vec![0u64; n];
    counts[0] = k;
    loop {
        let measured: i128 = counts
            .iter()
            .zip(&scores)
            .map(|(&c, &s)| c as i128 * s)
            .sum();
        if measured <= budget {
            let utility: i128 = counts
                .iter()
                .zip(&utilities)
                .map(|(&c, &u)| c as i128 * u)
                .sum();
            best = Some(best.map_or(utility, |b| b.max(utility)));
        }
        // descending-lex successor over weak compositions of k
        let Some(j) = (0..n - 1).rev().find(|&j| counts[j] > 0) else {
            break;
        };
        let tail = counts[n - 1];
        counts[j] -= 1;
        counts[n - 1] = 0;
        counts[j + 1] = tail + 1;
    }
    best.map(|u| Q::new(BigInt::from(u), BigInt::from(k)) / Q::new(denom_lcm, BigInt::one()))
}
