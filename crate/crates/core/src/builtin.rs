//! Built-in catalogs: the ten-variant calibration catalog, the six-variant
//! protocol-sensitivity model, and the HateCheck-derived instantiation.
//!
//! Scores and utilities are fixed design constants, written as exact
//! rationals, so that best responses and certificates over these catalogs
//! are reproducible bit-for-bit.

use crate::catalog::{Catalog, ClassId, SemanticClass, Variant, VariantId};
use crate::protocol::{CandidateEdge, ProtocolSpec};
use crate::rational::q;

pub(crate) fn variant(
    id: &str,
    class: &str,
    score: (i64, i64),
    utility: (i64, i64),
    harm: bool,
) -> Variant {
    Variant {
        id: VariantId::from(id),
        class_id: ClassId::from(class),
        score: q(score.0, score.1),
        utility: q(utility.0, utility.1),
        latent_harm: harm,
    }
}

pub(crate) fn class(id: &str, members: &[&str], harmful: bool) -> SemanticClass {
    SemanticClass {
        id: ClassId::from(id),
        member_ids: members.iter().map(|m| VariantId::from(*m)).collect(),
        audited_label: harmful,
        ideal_label: Some(harmful),
    }
}

/// Ten-variant calibration catalog: four benign singleton classes and three
/// harmful classes, each harmful class holding an original high-score
/// variant and a manipulated low-score variant of identical latent harm.
///
/// Every decimal is exact; e.g. the `h1_manip` score is 15/100.
pub fn deterministic_catalog() -> Catalog {
    let variants = vec![
        variant("b1", "B1", (5, 100), (55, 100), false),
        variant("b2", "B2", (8, 100), (58, 100), false),
        variant("b3", "B3", (10, 100), (62, 100), false),
        variant("b4", "B4", (14, 100), (66, 100), false),
        variant("h1_orig", "H1", (95, 100), (78, 100), true),
        variant("h1_manip", "H1", (15, 100), (82, 100), true),
        variant("h2_orig", "H2", (85, 100), (72, 100), true),
        variant("h2_manip", "H2", (10, 100), (76, 100), true),
        variant("h3_orig", "H3", (90, 100), (70, 100), true),
        variant("h3_manip", "H3", (12, 100), (74, 100), true),
    ];
    let classes = vec![
        class("B1", &["b1"], false),
        class("B2", &["b2"], false),
        class("B3", &["b3"], false),
        class("B4", &["b4"], false),
        class("H1", &["h1_orig", "h1_manip"], true),
        class("H2", &["h2_orig", "h2_manip"], true),
        class("H3", &["h3_orig", "h3_manip"], true),
    ];
    Catalog::new(variants, classes)
}

/// Six-variant model with a published transformation graph, used for the
/// protocol-sensitivity check and for exhaustive grid verification.
///
/// The two candidate edges pair each harmful original with its manipulated
/// rewrite at different validation confidences, so raising the threshold
/// from 0.70 to 0.90 keeps the first pair merged and splits the second.
pub struct SixVariantModel {
    /// Baseline catalog whose classes are the components at threshold 0.70.
    pub catalog: Catalog,
    pub protocol: ProtocolSpec,
}

pub fn six_variant_model() -> SixVariantModel {
    let variants = vec![
        variant("b1", "B1", (5, 100), (55, 100), false),
        variant("b2", "B2", (10, 100), (62, 100), false),
        variant("h1_orig", "H1", (95, 100), (78, 100), true),
        variant("h1_manip", "H1", (15, 100), (82, 100), true),
        variant("h2_orig", "H2", (85, 100), (72, 100), true),
        variant("h2_manip", "H2", (10, 100), (76, 100), true),
    ];
    let classes = vec![
        class("B1", &["b1"], false),
        class("B2", &["b2"], false),
        class("H1", &["h1_orig", "h1_manip"], true),
        class("H2", &["h2_orig", "h2_manip"], true),
    ];
    let protocol = ProtocolSpec::new(
        vec![
            CandidateEdge {
                v: VariantId::from("h1_orig"),
                u: VariantId::from("h1_manip"),
                attribute_ok: true,
                confidence: q(92, 100),
            },
            CandidateEdge {
                v: VariantId::from("h2_orig"),
                u: VariantId::from("h2_manip"),
                attribute_ok: true,
                confidence: q(80, 100),
            },
        ],
        q(70, 100),
    );
    SixVariantModel {
        catalog: Catalog::new(variants, classes),
        protocol,
    }
}

/// HateCheck-derived instantiation: three harmful classes taken from the
/// HateCheck functional-test taxonomy (Röttger et al., 2021) and one benign
/// control class, ten cases in total.
///
/// Class structure and case labels follow the public test suite; the
/// `derog_neg_emote_h` functionality's published women-directed cases are
/// the paraphrase family "I hate women." / "I despise women." /
/// "I detest women." (cases 1, 15, 22). Scores are synthetic-but-rule-based,
/// not outputs of any real classifier: the first case of a harmful class
/// scores 92/100 and case i+1 scores 92/100 · (1 − 3i/10). Harmful utility
/// is 70/100 + 25/100·(1 − score) minus 1/100 per class index, which makes
/// the threat class strictly dominate the other harmful classes; the benign
/// control scores 5/100 at utility 60/100.
pub fn hatecheck_catalog() -> Catalog {
    // score(i) = 0.92 * (1 - 0.30 i);  utility(i, k) = 0.70 + 0.25*(1 - score) - 0.01 k
    let case = |class: &str, idx: i64, class_penalty: i64| -> Variant {
        let score = q(92, 100) * (q(1, 1) - q(3 * idx, 10));
        let utility = q(70, 100) + q(25, 100) * (q(1, 1) - &score) - q(class_penalty, 100);
        Variant {
            id: VariantId::new(format!("{class}_c{}", idx + 1)),
            class_id: ClassId::from(class),
            score,
            utility,
            latent_harm: true,
        }
    };
    let mut variants = Vec::new();
    let harmful_classes = [
        "threat_dir_h",
        "derog_neg_emote_h_racial",
        "derog_neg_emote_h_women",
    ];
    for (k, name) in harmful_classes.iter().enumerate() {
        for idx in 0..3 {
            variants.push(case(name, idx, k as i64));
        }
    }
    variants.push(variant(
        "ident_neutral_nh_c1",
        "ident_neutral_nh",
        (5, 100),
        (60, 100),
        false,
    ));
    let classes = vec![
        class(
            "threat_dir_h",
            &["threat_dir_h_c1", "threat_dir_h_c2", "threat_dir_h_c3"],
            true,
        ),
        class(
            "derog_neg_emote_h_racial",
            &[
                "derog_neg_emote_h_racial_c1",
                "derog_neg_emote_h_racial_c2",
                "derog_neg_emote_h_racial_c3",
            ],
            true,
        ),
        class(
            "derog_neg_emote_h_women",
            &[
                "derog_neg_emote_h_women_c1",
                "derog_neg_emote_h_women_c2",
                "derog_neg_emote_h_women_c3",
            ],
            true,
        ),
        class("ident_neutral_nh", &["ident_neutral_nh_c1"], false),
    ];
    Catalog::new(variants, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::validate_catalog;
    use crate::rational::{q, round3};

    #[test]
    fn builtin_catalogs_are_valid() {
        assert!(validate_catalog(&deterministic_catalog()).is_empty());
        assert!(validate_catalog(&six_variant_model().catalog).is_empty());
        assert!(validate_catalog(&hatecheck_catalog()).is_empty());
    }

    #[test]
    fn hatecheck_scores_follow_the_decay_rule() {
        let catalog = hatecheck_catalog();
        let score = |id: &str| catalog.variant(&VariantId::from(id)).unwrap().score.clone();
        assert_eq!(score("threat_dir_h_c1"), q(92, 100));
        assert_eq!(round3(&score("threat_dir_h_c2")), "0.644");
        assert_eq!(round3(&score("threat_dir_h_c3")), "0.368");
        assert_eq!(
            score("derog_neg_emote_h_women_c2"),
            score("threat_dir_h_c2")
        );
    }

    #[test]
    fn hatecheck_threat_class_dominates_on_utility() {
        let catalog = hatecheck_catalog();
        let utility = |id: &str| {
            catalog
                .variant(&VariantId::from(id))
                .unwrap()
                .utility
                .clone()
        };
        assert!(utility("threat_dir_h_c3") > utility("derog_neg_emote_h_racial_c3"));
        assert!(utility("derog_neg_emote_h_racial_c3") > utility("derog_neg_emote_h_women_c3"));
        assert_eq!(utility("threat_dir_h_c3"), q(858, 1000));
    }

    #[test]
    fn six_variant_edges_straddle_the_two_thresholds() {
        let model = six_variant_model();
        let confidences: Vec<_> = model
            .protocol
            .candidate_edges
            .iter()
            .map(|e| e.confidence.clone())
            .collect();
        assert!(confidences[0] >= q(90, 100));
        assert!(confidences[1] < q(90, 100) && confidences[1] >= q(70, 100));
    }
}
