//! Bounded sequential-audit MDP: internal exhaustive solution and PRISM
//! model emission.
//!
//! The adversary commits, per round, a harmful mass cell from a finite grid
//! and a variant (original or manipulated). The audit passes when the
//! metric-dependent cost stays within the budget, and a one-shot reward
//! equal to the committed harmful mass fires on the first passing round.
//! Because the reward fires once, the 3-round value equals the best single
//! cell, which the internal solver finds by enumeration; the emitted model
//! keeps the round structure for external replay.

use crate::rational::{display_exact, exact_decimal, Q};
use num::{BigInt, One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSetting {
    Fragile,
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSetting {
    Orig,
    Manip,
}

impl fmt::Display for MetricSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricSetting::Fragile => "fragile",
            MetricSetting::Envelope => "envelope",
        })
    }
}

impl fmt::Display for VariantSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantSetting::Orig => "orig",
            VariantSetting::Manip => "manip",
        })
    }
}

/// Audit game configuration. Costs are the per-unit metric charges: the
/// fragile metric charges each variant its own detector score, the envelope
/// metric charges the class maximum regardless of the variant played.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditMdp {
    pub metric_setting: MetricSetting,
    pub variant_setting: VariantSetting,
    /// Mass grid {i/d : 0 <= i <= d}; d = 20 gives the 21-point grid.
    pub grid_denominator: u64,
    pub benign_cost: Q,
    pub orig_cost: Q,
    pub manip_cost: Q,
    pub envelope_cost: Q,
    pub budget: Q,
    pub rounds: u32,
}

impl AuditMdp {
    /// One benign class at cost 0.10, one harmful class with original cost
    /// 0.90 and manipulated cost 0.10, envelope cost 0.90, budget 0.20,
    /// three rounds over the 21-point grid.
    pub fn standard(metric_setting: MetricSetting, variant_setting: VariantSetting) -> AuditMdp {
        let c = |n: i64, d: i64| Q::new(BigInt::from(n), BigInt::from(d));
        AuditMdp {
            metric_setting,
            variant_setting,
            grid_denominator: 20,
            benign_cost: c(1, 10),
            orig_cost: c(9, 10),
            manip_cost: c(1, 10),
            envelope_cost: c(9, 10),
            budget: c(1, 5),
            rounds: 3,
        }
    }

    pub fn with_budget(mut self, budget: Q) -> AuditMdp {
        self.budget = budget;
        self
    }

    pub fn with_grid_denominator(mut self, d: u64) -> AuditMdp {
        self.grid_denominator = d;
        self
    }

    pub fn mass_grid(&self) -> impl Iterator<Item = Q> + '_ {
        let d = self.grid_denominator;
        (0..=d).map(move |i| Q::new(BigInt::from(i), BigInt::from(d)))
    }

    fn variant_cost(&self, variant: VariantSetting) -> &Q {
        match (self.metric_setting, variant) {
            (MetricSetting::Fragile, VariantSetting::Orig) => &self.orig_cost,
            (MetricSetting::Fragile, VariantSetting::Manip) => &self.manip_cost,
            (MetricSetting::Envelope, _) => &self.envelope_cost,
        }
    }

    /// Measured cost of playing harmful mass `m` with the configured
    /// variant, the rest benign.
    fn cell_cost(&self, m: &Q, variant: VariantSetting) -> Q {
        m * self.variant_cost(variant) + (Q::one() - m) * &self.benign_cost
    }
}

/// Adversary-optimal true-harm exposure: the largest grid mass whose audit
/// cost stays within budget, zero when no cell passes.
pub fn solve_mdp(mdp: &AuditMdp) -> Q {
    mdp.mass_grid()
        .filter(|m| mdp.cell_cost(m, mdp.variant_setting) <= mdp.budget)
        .max()
        .unwrap_or_else(Q::zero)
}

#[derive(Debug, Clone)]
pub struct PrismModel {
    pub model: String,
    pub properties: String,
    /// Reachable-state and transition counts of the emitted encoding,
    /// reported informationally.
    pub states: usize,
    pub transitions: usize,
}

fn prism_rat(x: &Q) -> String {
    exact_decimal(x).unwrap_or_else(|| display_exact(x))
}

/// Emits the audit game as a PRISM MDP plus four reachability-reward
/// queries, one per (metric, variant) setting. Rewards are action-labeled
/// and restricted to the first round, so each query's optimal value equals
/// the internal enumeration.
pub fn emit_prism(mdp: &AuditMdp) -> PrismModel {
    let d = mdp.grid_denominator;
    let rounds = mdp.rounds;
    let variants = [VariantSetting::Orig, VariantSetting::Manip];

    let mut model = String::new();
    model.push_str("mdp\n\n");
    model.push_str("// sequential audit: each round the adversary commits a harmful mass\n");
    model.push_str("// cell and a variant; the budget check is folded into the rewards\n");
    model.push_str("module audit\n");
    model.push_str(&format!("  round : [0..{rounds}] init 0;\n\n"));
    for i in 0..=d {
        for v in variants {
            model.push_str(&format!(
                "  [mass{i}_{v}] round<{rounds} -> 1 : (round'=round+1);\n"
            ));
        }
    }
    model.push_str("endmodule\n\n");
    model.push_str(&format!("label \"done\" = round={rounds};\n"));

    let mut properties = String::new();
    for metric in [MetricSetting::Fragile, MetricSetting::Envelope] {
        for variant in variants {
            let name = format!("harm_{metric}_{variant}");
            let mut setting = mdp.clone();
            setting.metric_setting = metric;
            setting.variant_setting = variant;
            model.push_str(&format!("\nrewards \"{name}\"\n"));
            for (i, m) in setting.mass_grid().enumerate() {
                // one-shot: the reward fires only on a first-round pass
                if setting.cell_cost(&m, variant) <= setting.budget && !m.is_zero() {
                    model.push_str(&format!(
                        "  [mass{i}_{variant}] round=0 : {};\n",
                        prism_rat(&m)
                    ));
                }
            }
            model.push_str("endrewards\n");
            properties.push_str(&format!("R{{\"{name}\"}}max=? [ F \"done\" ]\n"));
        }
    }

    let cells = (d + 1) as usize * variants.len();
    PrismModel {
        model,
        properties,
        states: rounds as usize + 1,
        transitions: cells * rounds as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi, round3};

    fn value(metric: MetricSetting, variant: VariantSetting) -> Q {
        solve_mdp(&AuditMdp::standard(metric, variant))
    }

    #[test]
    fn default_config_reproduces_the_four_values() {
        assert_eq!(
            value(MetricSetting::Fragile, VariantSetting::Orig),
            q(1, 10)
        );
        assert_eq!(value(MetricSetting::Fragile, VariantSetting::Manip), qi(1));
        assert_eq!(
            value(MetricSetting::Envelope, VariantSetting::Orig),
            q(1, 10)
        );
        assert_eq!(
            value(MetricSetting::Envelope, VariantSetting::Manip),
            q(1, 10)
        );
    }

    #[test]
    fn fragile_gap_is_exactly_nine_tenths() {
        let gap = value(MetricSetting::Fragile, VariantSetting::Manip)
            - value(MetricSetting::Fragile, VariantSetting::Orig);
        assert_eq!(gap, q(9, 10));
        assert_eq!(round3(&gap), "0.900");
    }

    #[test]
    fn zero_budget_passes_nothing() {
        for metric in [MetricSetting::Fragile, MetricSetting::Envelope] {
            for variant in [VariantSetting::Orig, VariantSetting::Manip] {
                let mdp = AuditMdp::standard(metric, variant).with_budget(Q::zero());
                assert!(solve_mdp(&mdp).is_zero());
            }
        }
    }

    #[test]
    fn two_point_grid_keeps_the_manipulated_optimum() {
        let mdp = AuditMdp::standard(MetricSetting::Fragile, VariantSetting::Manip)
            .with_grid_denominator(1);
        assert_eq!(solve_mdp(&mdp), qi(1));
    }

    #[test]
    fn envelope_value_is_variant_invariant_everywhere() {
        for denominator in [1, 2, 5, 20, 40] {
            for budget_twentieths in 0..=20 {
                let budget = q(budget_twentieths, 20);
                let orig = AuditMdp::standard(MetricSetting::Envelope, VariantSetting::Orig)
                    .with_grid_denominator(denominator)
                    .with_budget(budget.clone());
                let manip = AuditMdp::standard(MetricSetting::Envelope, VariantSetting::Manip)
                    .with_grid_denominator(denominator)
                    .with_budget(budget);
                assert_eq!(solve_mdp(&orig), solve_mdp(&manip));
            }
        }
    }

    #[test]
    fn emitted_model_has_the_documented_shape() {
        let mdp = AuditMdp::standard(MetricSetting::Fragile, VariantSetting::Orig);
        let prism = emit_prism(&mdp);
        assert_eq!(prism.states, 4);
        assert_eq!(prism.transitions, 126);
        // 42 module commands plus 2 + 20 + 2 + 2 passing reward cells
        assert_eq!(prism.model.matches("[mass").count(), 68);
        assert_eq!(prism.properties.lines().count(), 4);
        assert!(prism
            .properties
            .contains("R{\"harm_fragile_manip\"}max=? [ F \"done\" ]"));
        assert!(prism.model.contains("label \"done\" = round=3;"));
    }

    #[test]
    fn reward_structures_encode_the_budget_frontier() {
        let mdp = AuditMdp::standard(MetricSetting::Fragile, VariantSetting::Orig);
        let prism = emit_prism(&mdp);
        // fragile/orig passes only masses 0.05 and 0.10; fragile/manip passes all
        let fragile_orig = prism
            .model
            .split("rewards \"harm_fragile_orig\"")
            .nth(1)
            .unwrap()
            .split("endrewards")
            .next()
            .unwrap();
        assert_eq!(fragile_orig.matches("[mass").count(), 2);
        assert!(fragile_orig.contains("[mass2_orig] round=0 : 0.1;"));
        let fragile_manip = prism
            .model
            .split("rewards \"harm_fragile_manip\"")
            .nth(1)
            .unwrap()
            .split("endrewards")
            .next()
            .unwrap();
        assert_eq!(fragile_manip.matches("[mass").count(), 20);
        assert!(fragile_manip.contains("[mass20_manip] round=0 : 1;"));
    }
}
