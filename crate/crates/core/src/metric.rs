//! Score functions and their classwise lifts.
//!
//! The fragile metric scores each variant directly and is gameable by
//! within-class swaps. The semantic-envelope lift replaces every score with
//! its class maximum, restoring manipulation invariance at the least
//! conservative cost; the class-mean lift is the non-conservative comparison
//! repair. `invariance_witness` exhibits the manipulation when one exists.

use crate::catalog::{Catalog, CatalogError, Strategy, VariantId};
use crate::rational::Q;
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Fragile,
    Envelope,
    ClassMean,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Fragile => "fragile",
            ScoreKind::Envelope => "envelope",
            ScoreKind::ClassMean => "class_mean",
        })
    }
}

/// A fully materialized score function over one catalog's variants.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFunction {
    pub kind: ScoreKind,
    values: BTreeMap<VariantId, Q>,
}

impl ScoreFunction {
    pub fn value(&self, id: &VariantId) -> Option<&Q> {
        self.values.get(id)
    }

    pub fn values(&self) -> impl Iterator<Item = (&VariantId, &Q)> {
        self.values.iter()
    }
}

/// The raw per-variant detector scores, unchanged.
pub fn fragile(catalog: &Catalog) -> ScoreFunction {
    ScoreFunction {
        kind: ScoreKind::Fragile,
        values: catalog
            .variants()
            .iter()
            .map(|v| (v.id.clone(), v.score.clone()))
            .collect(),
    }
}

/// Classwise maximum of the detector score.
pub fn envelope_lift(catalog: &Catalog) -> ScoreFunction {
    let mut class_max: BTreeMap<&crate::catalog::ClassId, Q> = BTreeMap::new();
    for v in catalog.variants() {
        class_max
            .entry(&v.class_id)
            .and_modify(|m| {
                if v.score > *m {
                    *m = v.score.clone();
                }
            })
            .or_insert_with(|| v.score.clone());
    }
    ScoreFunction {
        kind: ScoreKind::Envelope,
        values: catalog
            .variants()
            .iter()
            .map(|v| (v.id.clone(), class_max[&v.class_id].clone()))
            .collect(),
    }
}

/// Classwise arithmetic mean of the detector score.
pub fn class_mean_lift(catalog: &Catalog) -> ScoreFunction {
    let mut sums: BTreeMap<&crate::catalog::ClassId, (Q, u32)> = BTreeMap::new();
    for v in catalog.variants() {
        let entry = sums.entry(&v.class_id).or_insert((Q::zero(), 0));
        entry.0 += &v.score;
        entry.1 += 1;
    }
    let means: BTreeMap<_, Q> = sums
        .into_iter()
        .map(|(c, (sum, n))| (c, sum / Q::from_integer(n.into())))
        .collect();
    ScoreFunction {
        kind: ScoreKind::ClassMean,
        values: catalog
            .variants()
            .iter()
            .map(|v| (v.id.clone(), means[&v.class_id].clone()))
            .collect(),
    }
}

/// Builds the lift named by `kind` over `catalog`.
pub fn lift(catalog: &Catalog, kind: ScoreKind) -> ScoreFunction {
    match kind {
        ScoreKind::Fragile => fragile(catalog),
        ScoreKind::Envelope => envelope_lift(catalog),
        ScoreKind::ClassMean => class_mean_lift(catalog),
    }
}

/// Exact metric value `M(x) = Σ x_v score(v)`.
pub fn evaluate(score: &ScoreFunction, x: &Strategy) -> Result<Q, CatalogError> {
    let mut total = Q::zero();
    for (id, mass) in x.support() {
        match score.value(id) {
            Some(s) => total += mass * s,
            None => return Err(CatalogError::UnknownVariant(id.clone())),
        }
    }
    Ok(total)
}

/// A constructive manipulation witness: two strategies with identical class
/// masses but different metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceWitness {
    pub x: Strategy,
    pub y: Strategy,
    pub metric_gap: Q,
}

/// Searches for a manipulation witness against `score` on `catalog`.
///
/// Point-mass pairs within a class suffice: a classwise-constant score admits
/// no witness at all, and any within-class non-constancy is exposed by the
/// two variants that differ. Classes are scanned in catalog order and the
/// first unequal pair wins, so the result is deterministic.
pub fn invariance_witness(catalog: &Catalog, score: &ScoreFunction) -> Option<InvarianceWitness> {
    for class in catalog.classes() {
        for (i, a) in class.member_ids.iter().enumerate() {
            for b in &class.member_ids[i + 1..] {
                let (sa, sb) = (score.value(a)?, score.value(b)?);
                if sa != sb {
                    let (high, low) = if sa > sb { (a, b) } else { (b, a) };
                    return Some(InvarianceWitness {
                        x: Strategy::point(high.clone()),
                        y: Strategy::point(low.clone()),
                        metric_gap: (sa - sb).abs(),
                    });
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{deterministic_catalog, six_variant_model};
    use crate::protocol::{apply_partition, induce_partition};
    use crate::rational::{q, round3};

    fn vid(s: &str) -> VariantId {
        VariantId::from(s)
    }

    #[test]
    fn envelope_lifts_manipulated_variants_to_the_class_max() {
        let catalog = deterministic_catalog();
        let env = envelope_lift(&catalog);
        assert_eq!(env.value(&vid("h1_manip")), Some(&q(95, 100)));
        assert_eq!(env.value(&vid("h3_manip")), Some(&q(90, 100)));
        assert_eq!(env.value(&vid("b2")), Some(&q(8, 100)));
        let frag = fragile(&catalog);
        for (id, value) in env.values() {
            assert!(value >= frag.value(id).unwrap());
        }
    }

    #[test]
    fn class_mean_sits_between_fragile_and_envelope() {
        let catalog = deterministic_catalog();
        let mean = class_mean_lift(&catalog);
        assert_eq!(mean.value(&vid("h2_orig")), Some(&q(475, 1000)));
        assert_eq!(mean.value(&vid("h2_manip")), Some(&q(475, 1000)));
        assert_eq!(mean.value(&vid("h1_orig")), Some(&q(55, 100)));
        assert_eq!(mean.value(&vid("b3")), Some(&q(10, 100)));
        let env = envelope_lift(&catalog);
        for (id, value) in mean.values() {
            assert!(value <= env.value(id).unwrap());
        }
    }

    #[test]
    fn evaluate_is_the_exact_inner_product() {
        let catalog = deterministic_catalog();
        let frag = fragile(&catalog);
        let x = Strategy::point("h2_manip");
        assert_eq!(evaluate(&frag, &x).unwrap(), q(10, 100));
        assert_eq!(round3(&evaluate(&frag, &x).unwrap()), "0.100");

        let mix = Strategy::two_point(vid("b4"), q(25, 27), vid("h1_manip")).unwrap();
        let env = envelope_lift(&catalog);
        assert_eq!(evaluate(&env, &mix).unwrap(), q(20, 100));
    }

    #[test]
    fn evaluate_rejects_foreign_strategies() {
        let catalog = deterministic_catalog();
        let frag = fragile(&catalog);
        assert!(evaluate(&frag, &Strategy::point("ghost")).is_err());
    }

    #[test]
    fn fragile_metric_has_a_point_mass_witness() {
        let catalog = deterministic_catalog();
        let witness = invariance_witness(&catalog, &fragile(&catalog)).unwrap();
        assert_eq!(witness.x, Strategy::point("h1_orig"));
        assert_eq!(witness.y, Strategy::point("h1_manip"));
        assert_eq!(witness.metric_gap, q(80, 100));
    }

    #[test]
    fn classwise_constant_metrics_have_no_witness() {
        let catalog = deterministic_catalog();
        assert!(invariance_witness(&catalog, &envelope_lift(&catalog)).is_none());
        assert!(invariance_witness(&catalog, &class_mean_lift(&catalog)).is_none());
    }

    #[test]
    fn all_singleton_catalog_admits_no_witness() {
        let catalog = crate::builtin::hatecheck_catalog();
        // ident_neutral_nh is a singleton; restrict to it via a one-class view.
        let singleton = Catalog::new(
            catalog
                .variants()
                .iter()
                .filter(|v| v.class_id.as_str() == "ident_neutral_nh")
                .cloned()
                .collect(),
            catalog
                .classes()
                .iter()
                .filter(|c| c.id.as_str() == "ident_neutral_nh")
                .cloned()
                .collect(),
        );
        assert!(invariance_witness(&singleton, &fragile(&singleton)).is_none());
    }

    #[test]
    fn refinement_weakly_lowers_the_envelope_pointwise() {
        let model = six_variant_model();
        let universe = model.catalog.variant_ids();
        let coarse = induce_partition(&model.protocol, &universe).unwrap();
        let fine = induce_partition(&model.protocol.at_threshold(q(90, 100)), &universe).unwrap();
        let (coarse_catalog, _) = apply_partition(&model.catalog, &coarse).unwrap();
        let (fine_catalog, _) = apply_partition(&model.catalog, &fine).unwrap();
        let env_coarse = envelope_lift(&coarse_catalog);
        let env_fine = envelope_lift(&fine_catalog);
        for id in &universe {
            assert!(env_fine.value(id).unwrap() <= env_coarse.value(id).unwrap());
        }
        assert!(
            env_fine.value(&vid("h2_manip")).unwrap() < env_coarse.value(&vid("h2_manip")).unwrap()
        );
    }
}
