//! Random instance builders for the property suites.

use auditcert::catalog::{Catalog, ClassId, SemanticClass, Strategy, Variant, VariantId};
use auditcert::generator::{sample_catalog, GeneratorConfig};
use auditcert::rational::q;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Generated catalog with randomized class counts.
pub fn varied_catalog(rng: &mut ChaCha8Rng, seed: u64) -> Catalog {
    let mut cfg = GeneratorConfig::with_seed(seed);
    cfg.benign_classes = rng.random_range(1..=6);
    cfg.harmful_classes = rng.random_range(1..=6);
    sample_catalog(&cfg)
}

/// Uniform-weight random strategy: integer weights 0..=6 per variant,
/// renormalized exactly.
pub fn random_strategy(rng: &mut ChaCha8Rng, catalog: &Catalog) -> Strategy {
    let ids = catalog.variant_ids();
    loop {
        let weights: Vec<u64> = ids.iter().map(|_| rng.random_range(0..=6)).collect();
        let total: u64 = weights.iter().sum();
        if total == 0 {
            continue;
        }
        let masses = ids
            .iter()
            .cloned()
            .zip(weights.iter().map(|&w| q(w as i64, total as i64)));
        return Strategy::new(masses).expect("weights normalize to a simplex point");
    }
}

/// Small random catalog with hundredth-grained scores and utilities and a
/// random class structure; every class is nonempty.
pub fn small_random_catalog(rng: &mut ChaCha8Rng, max_variants: usize) -> Catalog {
    let n = rng.random_range(2..=max_variants);
    let n_classes = rng.random_range(1..=n.min(2));
    let mut variants = Vec::new();
    let mut members: Vec<Vec<VariantId>> = vec![Vec::new(); n_classes];
    for i in 0..n {
        let class = if i < n_classes {
            i // every class nonempty
        } else {
            rng.random_range(0..n_classes)
        };
        let id = VariantId::new(format!("v{i}"));
        members[class].push(id.clone());
        variants.push(Variant {
            id,
            class_id: ClassId::new(format!("c{class}")),
            score: q(rng.random_range(0..=100), 100),
            utility: q(rng.random_range(0..=100), 100),
            latent_harm: rng.random_range(0..2) == 1,
        });
    }
    let classes = members
        .into_iter()
        .enumerate()
        .map(|(i, member_ids)| SemanticClass {
            id: ClassId::new(format!("c{i}")),
            member_ids,
            audited_label: rng.random_range(0..2) == 1,
            ideal_label: None,
        })
        .collect();
    Catalog::new(variants, classes)
}

/// Catalog of singleton classes over `scores` (hundredths), for partition
/// experiments.
pub fn singleton_catalog(scores: &[u8]) -> Catalog {
    let variants: Vec<Variant> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| Variant {
            id: VariantId::new(format!("v{i}")),
            class_id: ClassId::new(format!("s{i}")),
            score: q(s as i64, 100),
            utility: q(1, 2),
            latent_harm: false,
        })
        .collect();
    let classes = scores
        .iter()
        .enumerate()
        .map(|(i, _)| SemanticClass {
            id: ClassId::new(format!("s{i}")),
            member_ids: vec![VariantId::new(format!("v{i}"))],
            audited_label: false,
            ideal_label: None,
        })
        .collect();
    Catalog::new(variants, classes)
}
