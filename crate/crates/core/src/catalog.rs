//! The audited universe: content variants, semantic classes, platform
//! strategies, and the exposure aggregations every other module consumes.
//!
//! A [`Catalog`] is a finite list of variants partitioned into semantic
//! classes. Variants carry a detector score `m(v)`, a platform utility
//! `u(v)`, and a latent harm bit; classes carry the audited harm label and,
//! when harm-purity is declared, an ideal label. A [`Strategy`] is an exact
//! rational point on the probability simplex over the variants.

use crate::rational::Q;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

/// Opaque variant identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariantId(pub String);

impl VariantId {
    pub fn new(id: impl Into<String>) -> Self {
        VariantId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VariantId {
    fn from(s: &str) -> Self {
        VariantId(s.to_string())
    }
}

/// Opaque semantic-class identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

impl ClassId {
    pub fn new(id: impl Into<String>) -> Self {
        ClassId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_string())
    }
}

/// One content variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub id: VariantId,
    pub class_id: ClassId,
    /// Detector score `m(v)`, in `[0, 1]`.
    pub score: Q,
    /// Platform utility `u(v)`, nonnegative.
    pub utility: Q,
    /// Latent variant-level harm `h*(v)`.
    pub latent_harm: bool,
}

/// One semantic class of the published partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticClass {
    pub id: ClassId,
    /// Member variant ids, in catalog order.
    pub member_ids: Vec<VariantId>,
    /// Audited harm label `ĥ(c)`.
    pub audited_label: bool,
    /// Ideal-case label `h(c)`; present only under declared harm-purity.
    pub ideal_label: Option<bool>,
}

/// Finite variant universe with its class partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    variants: Vec<Variant>,
    classes: Vec<SemanticClass>,
    variant_index: HashMap<VariantId, usize>,
    class_index: HashMap<ClassId, usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("strategy references unknown variant `{0}`")]
    UnknownVariant(VariantId),
    #[error("strategy mass for `{id}` is negative")]
    NegativeMass { id: VariantId },
    #[error("strategy masses sum to {sum}, expected exactly 1")]
    MassSum { sum: String },
}

impl Catalog {
    /// Assembles a catalog and its lookup indexes. Invalid data (duplicate
    /// ids, dangling classes, range violations) is representable; run
    /// [`validate_catalog`] to obtain the violation list.
    pub fn new(variants: Vec<Variant>, classes: Vec<SemanticClass>) -> Catalog {
        let mut variant_index = HashMap::new();
        for (i, v) in variants.iter().enumerate() {
            variant_index.entry(v.id.clone()).or_insert(i);
        }
        let mut class_index = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            class_index.entry(c.id.clone()).or_insert(i);
        }
        Catalog {
            variants,
            classes,
            variant_index,
            class_index,
        }
    }

    pub fn variants(&self) -> &[Variant] {
        &self.variants
    }

    pub fn classes(&self) -> &[SemanticClass] {
        &self.classes
    }

    pub fn variant(&self, id: &VariantId) -> Option<&Variant> {
        self.variant_index.get(id).map(|&i| &self.variants[i])
    }

    pub fn class(&self, id: &ClassId) -> Option<&SemanticClass> {
        self.class_index.get(id).map(|&i| &self.classes[i])
    }

    /// Class containing `id`, when both the variant and its class exist.
    pub fn class_of(&self, id: &VariantId) -> Option<&SemanticClass> {
        self.variant(id).and_then(|v| self.class(&v.class_id))
    }

    /// Classes with audited label 1, in catalog order.
    pub fn harmful_classes(&self) -> impl Iterator<Item = &SemanticClass> {
        self.classes.iter().filter(|c| c.audited_label)
    }

    /// Members of `class`, in catalog order.
    pub fn members<'a>(&'a self, class: &'a SemanticClass) -> impl Iterator<Item = &'a Variant> {
        class.member_ids.iter().filter_map(|id| self.variant(id))
    }

    pub fn variant_ids(&self) -> Vec<VariantId> {
        self.variants.iter().map(|v| v.id.clone()).collect()
    }

    /// True when every class declares an ideal label.
    pub fn is_harm_purity_declared(&self) -> bool {
        self.classes.iter().all(|c| c.ideal_label.is_some())
    }
}

/// Exact rational probability distribution over variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    mass: BTreeMap<VariantId, Q>,
}

impl Strategy {
    /// Validates nonnegativity and exact sum-to-one.
    pub fn new(mass: impl IntoIterator<Item = (VariantId, Q)>) -> Result<Strategy, CatalogError> {
        let mut map = BTreeMap::new();
        let mut sum = Q::zero();
        for (id, m) in mass {
            if m.is_negative() {
                return Err(CatalogError::NegativeMass { id });
            }
            sum += &m;
            if !m.is_zero() {
                *map.entry(id).or_insert_with(Q::zero) += m;
            }
        }
        if !sum.is_one() {
            return Err(CatalogError::MassSum {
                sum: crate::rational::display_exact(&sum),
            });
        }
        Ok(Strategy { mass: map })
    }

    /// Unit mass on a single variant.
    pub fn point(id: impl Into<VariantId>) -> Strategy {
        let mut mass = BTreeMap::new();
        mass.insert(id.into(), Q::one());
        Strategy { mass }
    }

    /// Two-point mixture `weight_a` on `a` and `1 - weight_a` on `b`.
    pub fn two_point(a: VariantId, weight_a: Q, b: VariantId) -> Result<Strategy, CatalogError> {
        let rest = Q::one() - &weight_a;
        Strategy::new([(a, weight_a), (b, rest)])
    }

    pub fn mass(&self, id: &VariantId) -> Q {
        self.mass.get(id).cloned().unwrap_or_else(Q::zero)
    }

    /// Variants with strictly positive mass, in id order.
    pub fn support(&self) -> impl Iterator<Item = (&VariantId, &Q)> {
        self.mass.iter()
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }
}

/// Exposure aggregates of one strategy over one catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureReport {
    /// Latent harmful exposure `H*(x)`.
    pub true_harm: Q,
    /// Audit-estimated harmful exposure `Ĥ(x)`.
    pub audited_harm: Q,
    /// Ideal-case harmful exposure `H(x)`, when every class declares
    /// an ideal label.
    pub ideal_harm: Option<Q>,
    /// Platform utility `U(x)`.
    pub utility: Q,
    /// Disagreement mass `Δ(x)`.
    pub disagreement_mass: Q,
    /// Induced mass per semantic class; sums to 1.
    pub class_masses: BTreeMap<ClassId, Q>,
}

fn check_strategy_domain(catalog: &Catalog, x: &Strategy) -> Result<(), CatalogError> {
    for (id, _) in x.support() {
        if catalog.variant(id).is_none() {
            return Err(CatalogError::UnknownVariant(id.clone()));
        }
    }
    Ok(())
}

/// Mass induced on each semantic class: `Σ_{v:[v]=c} x_v`.
///
/// Every class appears in the result, zero-mass classes included.
pub fn class_mass(catalog: &Catalog, x: &Strategy) -> Result<BTreeMap<ClassId, Q>, CatalogError> {
    check_strategy_domain(catalog, x)?;
    let mut masses: BTreeMap<ClassId, Q> = catalog
        .classes()
        .iter()
        .map(|c| (c.id.clone(), Q::zero()))
        .collect();
    for v in catalog.variants() {
        let m = x.mass(&v.id);
        if !m.is_zero() {
            *masses.entry(v.class_id.clone()).or_insert_with(Q::zero) += m;
        }
    }
    Ok(masses)
}

/// Full exposure aggregation of `x` over `catalog`.
pub fn exposure_report(catalog: &Catalog, x: &Strategy) -> Result<ExposureReport, CatalogError> {
    check_strategy_domain(catalog, x)?;
    let mut true_harm = Q::zero();
    let mut audited_harm = Q::zero();
    let mut ideal_harm = Q::zero();
    let mut utility = Q::zero();
    let mut disagreement = Q::zero();
    let purity_declared = catalog.is_harm_purity_declared();
    for v in catalog.variants() {
        let m = x.mass(&v.id);
        if m.is_zero() {
            continue;
        }
        let class = catalog.class(&v.class_id);
        let audited = class.map(|c| c.audited_label).unwrap_or(false);
        if v.latent_harm {
            true_harm += &m;
        }
        if audited {
            audited_harm += &m;
        }
        if v.latent_harm != audited {
            disagreement += &m;
        }
        if purity_declared {
            if let Some(true) = class.and_then(|c| c.ideal_label) {
                ideal_harm += &m;
            }
        }
        utility += &m * &v.utility;
    }
    Ok(ExposureReport {
        true_harm,
        audited_harm,
        ideal_harm: purity_declared.then_some(ideal_harm),
        utility,
        disagreement_mass: disagreement,
        class_masses: class_mass(catalog, x)?,
    })
}

/// One broken catalog invariant. Violations are data, not errors: a catalog
/// holding them is representable and reportable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateVariantId(VariantId),
    DuplicateClassId(ClassId),
    UnknownClass {
        variant: VariantId,
        class: ClassId,
    },
    /// Class lists a member that does not exist or is assigned elsewhere.
    MembershipMismatch {
        class: ClassId,
        member: VariantId,
    },
    /// Variant's class exists but does not list it.
    Uncovered(VariantId),
    EmptyClass(ClassId),
    ScoreRange {
        variant: VariantId,
        score: Q,
    },
    NegativeUtility {
        variant: VariantId,
        utility: Q,
    },
    /// Ideal label declared but some member's latent harm differs.
    HarmPurity {
        class: ClassId,
        member: VariantId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVariantId(id) => write!(f, "duplicate variant id `{id}`"),
            Violation::DuplicateClassId(id) => write!(f, "duplicate class id `{id}`"),
            Violation::UnknownClass { variant, class } => {
                write!(f, "variant `{variant}` references unknown class `{class}`")
            }
            Violation::MembershipMismatch { class, member } => write!(
                f,
                "class `{class}` lists member `{member}` that is missing or assigned elsewhere"
            ),
            Violation::Uncovered(id) => {
                write!(f, "variant `{id}` is not listed by its class")
            }
            Violation::EmptyClass(id) => write!(f, "class `{id}` has no members"),
            Violation::ScoreRange { variant, score } => write!(
                f,
                "variant `{variant}` score {} outside [0, 1]",
                crate::rational::display_exact(score)
            ),
            Violation::NegativeUtility { variant, utility } => write!(
                f,
                "variant `{variant}` utility {} is negative",
                crate::rational::display_exact(utility)
            ),
            Violation::HarmPurity { class, member } => write!(
                f,
                "class `{class}` declares an ideal label but member `{member}` disagrees"
            ),
        }
    }
}

/// Checks every type invariant; an empty list means the catalog is valid.
pub fn validate_catalog(catalog: &Catalog) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_variants = HashMap::new();
    for v in catalog.variants() {
        if seen_variants.insert(v.id.clone(), ()).is_some() {
            violations.push(Violation::DuplicateVariantId(v.id.clone()));
        }
    }
    let mut seen_classes = HashMap::new();
    for c in catalog.classes() {
        if seen_classes.insert(c.id.clone(), ()).is_some() {
            violations.push(Violation::DuplicateClassId(c.id.clone()));
        }
        if c.member_ids.is_empty() {
            violations.push(Violation::EmptyClass(c.id.clone()));
        }
        for member in &c.member_ids {
            match catalog.variant(member) {
                Some(v) if v.class_id == c.id => {}
                _ => violations.push(Violation::MembershipMismatch {
                    class: c.id.clone(),
                    member: member.clone(),
                }),
            }
        }
        if let Some(ideal) = c.ideal_label {
            for member in &c.member_ids {
                if let Some(v) = catalog.variant(member) {
                    if v.latent_harm != ideal {
                        violations.push(Violation::HarmPurity {
                            class: c.id.clone(),
                            member: member.clone(),
                        });
                    }
                }
            }
        }
    }
    for v in catalog.variants() {
        match catalog.class(&v.class_id) {
            None => violations.push(Violation::UnknownClass {
                variant: v.id.clone(),
                class: v.class_id.clone(),
            }),
            Some(c) => {
                if !c.member_ids.contains(&v.id) {
                    violations.push(Violation::Uncovered(v.id.clone()));
                }
            }
        }
        if v.score.is_negative() || v.score > Q::one() {
            violations.push(Violation::ScoreRange {
                variant: v.id.clone(),
                score: v.score.clone(),
            });
        }
        if v.utility.is_negative() {
            violations.push(Violation::NegativeUtility {
                variant: v.id.clone(),
                utility: v.utility.clone(),
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::deterministic_catalog;
    use crate::rational::{q, qi};

    #[test]
    fn point_mass_class_distribution() {
        let catalog = deterministic_catalog();
        let x = Strategy::point("h1_orig");
        let masses = class_mass(&catalog, &x).unwrap();
        assert_eq!(masses[&ClassId::from("H1")], qi(1));
        let total: Q = masses.values().sum();
        assert_eq!(total, qi(1));
        for (class, mass) in &masses {
            if class.as_str() != "H1" {
                assert!(mass.is_zero());
            }
        }
    }

    #[test]
    fn uniform_strategy_splits_by_class_size() {
        let catalog = deterministic_catalog();
        let x = Strategy::new(catalog.variant_ids().into_iter().map(|id| (id, q(1, 10)))).unwrap();
        let masses = class_mass(&catalog, &x).unwrap();
        for benign in ["B1", "B2", "B3", "B4"] {
            assert_eq!(masses[&ClassId::from(benign)], q(1, 10));
        }
        for harmful in ["H1", "H2", "H3"] {
            assert_eq!(masses[&ClassId::from(harmful)], q(2, 10));
        }
    }

    #[test]
    fn exposure_report_matches_published_rows() {
        let catalog = deterministic_catalog();
        let report = exposure_report(&catalog, &Strategy::point("h2_manip")).unwrap();
        assert_eq!(report.true_harm, qi(1));
        assert_eq!(report.utility, q(76, 100));

        let report = exposure_report(&catalog, &Strategy::point("b1")).unwrap();
        assert_eq!(report.true_harm, qi(0));
        assert_eq!(report.utility, q(55, 100));
    }

    #[test]
    fn harm_pure_catalog_has_zero_disagreement() {
        let catalog = deterministic_catalog();
        let x = Strategy::new(catalog.variant_ids().into_iter().map(|id| (id, q(1, 10)))).unwrap();
        let report = exposure_report(&catalog, &x).unwrap();
        assert!(report.disagreement_mass.is_zero());
        assert_eq!(report.true_harm, report.audited_harm);
        assert_eq!(report.ideal_harm.as_ref(), Some(&report.true_harm));
    }

    #[test]
    fn strategy_rejects_bad_masses() {
        assert!(matches!(
            Strategy::new([
                (VariantId::from("a"), q(-1, 2)),
                (VariantId::from("b"), q(3, 2))
            ]),
            Err(CatalogError::NegativeMass { .. })
        ));
        assert!(matches!(
            Strategy::new([(VariantId::from("a"), q(1, 2))]),
            Err(CatalogError::MassSum { .. })
        ));
    }

    #[test]
    fn unknown_variant_in_strategy_is_rejected() {
        let catalog = deterministic_catalog();
        let x = Strategy::point("nonexistent");
        assert_eq!(
            class_mass(&catalog, &x),
            Err(CatalogError::UnknownVariant(VariantId::from("nonexistent")))
        );
    }

    #[test]
    fn validate_flags_impure_class_and_score_range() {
        let catalog = deterministic_catalog();
        assert!(validate_catalog(&catalog).is_empty());

        let mut variants: Vec<Variant> = catalog.variants().to_vec();
        variants[4].latent_harm = false; // h1_orig inside ideal-labeled H1
        variants[0].score = q(12, 10);
        let broken = Catalog::new(variants, catalog.classes().to_vec());
        let violations = validate_catalog(&broken);
        assert!(violations.iter().any(|v| matches!(
            v,
            Violation::HarmPurity { class, .. } if class.as_str() == "H1"
        )));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::ScoreRange { .. })));
    }
}
