//! Random harm-pure catalog sampling for stress tests and scalability
//! sweeps.
//!
//! Sampling is deterministic given (seed, config): draws come from
//! ChaCha8 seeded with the config seed, and every draw is an integer in
//! 0..=10^4 mapped to `lo + (hi - lo) * k / 10^4`, so sampled catalogs are
//! exact rationals and reproduce byte-for-byte across platforms.

use crate::catalog::{Catalog, SemanticClass, Variant, VariantId};
use crate::rational::{display_exact, Q};
use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in output metadata so seeds keep their meaning
/// across releases.
pub const GENERATOR_ALGORITHM: &str = "chacha8";

/// Frozen seed for the size-sweep family.
pub const SCALABILITY_SEED: u64 = 1729;

/// Inclusive uniform range with exact rational endpoints.
pub type Range = (Q, Q);

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub benign_classes: usize,
    pub harmful_classes: usize,
    pub seed: u64,
    pub orig_score: Range,
    pub manip_score: Range,
    pub benign_score: Range,
    pub benign_utility: Range,
    pub orig_utility: Range,
    /// Added to the original variant's utility, so manipulation strictly
    /// improves the adversary's payoff.
    pub manip_utility_bump: Range,
}

fn r(lo: (i64, i64), hi: (i64, i64)) -> Range {
    let f = |(n, d): (i64, i64)| Q::new(BigInt::from(n), BigInt::from(d));
    (f(lo), f(hi))
}

impl GeneratorConfig {
    /// Five benign and five harmful classes with the declared default
    /// ranges: original scores U[0.75, 0.95], manipulated scores
    /// U[0.05, 0.15], benign scores U[0.03, 0.15], benign utilities
    /// U[0.50, 0.70], original utilities U[0.70, 0.85], and a manipulation
    /// utility bump U[0.02, 0.06].
    pub fn with_seed(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            benign_classes: 5,
            harmful_classes: 5,
            seed,
            orig_score: r((3, 4), (19, 20)),
            manip_score: r((1, 20), (3, 20)),
            benign_score: r((3, 100), (3, 20)),
            benign_utility: r((1, 2), (7, 10)),
            orig_utility: r((7, 10), (17, 20)),
            manip_utility_bump: r((1, 50), (3, 50)),
        }
    }

    /// Key/value pairs for experiment output headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let range = |(lo, hi): &Range| format!("[{}, {}]", display_exact(lo), display_exact(hi));
        vec![
            ("generator".into(), GENERATOR_ALGORITHM.into()),
            ("seed".into(), self.seed.to_string()),
            ("benign_classes".into(), self.benign_classes.to_string()),
            ("harmful_classes".into(), self.harmful_classes.to_string()),
            ("orig_score".into(), range(&self.orig_score)),
            ("manip_score".into(), range(&self.manip_score)),
            ("benign_score".into(), range(&self.benign_score)),
            ("benign_utility".into(), range(&self.benign_utility)),
            ("orig_utility".into(), range(&self.orig_utility)),
            ("manip_utility_bump".into(), range(&self.manip_utility_bump)),
        ]
    }
}

const DRAW_GRID: i64 = 10_000;

fn draw(rng: &mut ChaCha8Rng, (lo, hi): &Range) -> Q {
    debug_assert!(lo <= hi, "range endpoints out of order");
    let k = rng.random_range(0..=DRAW_GRID);
    lo + (hi - lo) * Q::new(BigInt::from(k), BigInt::from(DRAW_GRID))
}

/// Samples a harm-pure catalog: `benign_classes` singleton benign classes,
/// then `harmful_classes` original/manipulated pairs where the manipulated
/// variant scores low and strictly improves utility.
///
/// Draw order is part of the format: each benign class draws (score,
/// utility); each harmful class then draws (original score, manipulated
/// score, original utility, utility bump).
pub fn sample_catalog(cfg: &GeneratorConfig) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut variants = Vec::new();
    let mut classes = Vec::new();

    for i in 1..=cfg.benign_classes {
        let score = draw(&mut rng, &cfg.benign_score);
        let utility = draw(&mut rng, &cfg.benign_utility);
        let id = format!("b{i}");
        variants.push(Variant {
            id: VariantId::from(id.as_str()),
            class_id: format!("B{i}").as_str().into(),
            score,
            utility,
            latent_harm: false,
        });
        classes.push(SemanticClass {
            id: format!("B{i}").as_str().into(),
            member_ids: vec![VariantId::from(id.as_str())],
            audited_label: false,
            ideal_label: Some(false),
        });
    }

    for j in 1..=cfg.harmful_classes {
        let orig_score = draw(&mut rng, &cfg.orig_score);
        let manip_score = draw(&mut rng, &cfg.manip_score);
        let orig_utility = draw(&mut rng, &cfg.orig_utility);
        let bump = draw(&mut rng, &cfg.manip_utility_bump);
        let orig_id = format!("h{j}_orig");
        let manip_id = format!("h{j}_manip");
        variants.push(Variant {
            id: VariantId::from(orig_id.as_str()),
            class_id: format!("H{j}").as_str().into(),
            score: orig_score,
            utility: orig_utility.clone(),
            latent_harm: true,
        });
        variants.push(Variant {
            id: VariantId::from(manip_id.as_str()),
            class_id: format!("H{j}").as_str().into(),
            score: manip_score,
            utility: orig_utility + bump,
            latent_harm: true,
        });
        classes.push(SemanticClass {
            id: format!("H{j}").as_str().into(),
            member_ids: vec![
                VariantId::from(orig_id.as_str()),
                VariantId::from(manip_id.as_str()),
            ],
            audited_label: true,
            ideal_label: Some(true),
        });
    }

    Catalog::new(variants, classes)
}

/// Fixed-seed family for size sweeps: 5 benign classes plus `n_harmful`
/// original/manipulated pairs, 5 + 2n variants in total.
pub fn scalability_family(n_harmful: usize) -> Catalog {
    let mut cfg = GeneratorConfig::with_seed(SCALABILITY_SEED);
    cfg.harmful_classes = n_harmful;
    sample_catalog(&cfg)
}
