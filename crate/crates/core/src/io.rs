//! File formats: catalog tables, protocol edge tables, experiment CSV.
//!
//! Rationals render as short exact decimals when the denominator divides
//! 10^6 and as `numer/denom` otherwise, so parsing a written file always
//! recovers the exact value. Lines starting with `#` carry metadata and are
//! skipped on read.

use crate::catalog::{Catalog, SemanticClass, Variant, VariantId};
use crate::protocol::{CandidateEdge, ProtocolSpec};
use crate::rational::{display_exact, exact_decimal, parse_rational, ParseRationalError, Q};
use num::BigInt;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {source}")]
    Rational {
        row: usize,
        source: ParseRationalError,
    },
    #[error("row {row}: invalid boolean `{value}`")]
    Boolean { row: usize, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Shape {
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// Exact text form used in every table field.
pub fn render_rational(value: &Q) -> String {
    let million = BigInt::from(1_000_000);
    if (&million % value.denom()) == BigInt::from(0) {
        exact_decimal(value).expect("denominator divides 10^6")
    } else {
        display_exact(value)
    }
}

fn parse_bool(text: &str, row: usize) -> Result<bool, IoError> {
    match text.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(IoError::Boolean {
            row,
            value: other.to_string(),
        }),
    }
}

fn parse_field(text: &str, row: usize) -> Result<Q, IoError> {
    parse_rational(text).map_err(|source| IoError::Rational { row, source })
}

fn metadata_header(metadata: &[(String, String)]) -> String {
    metadata
        .iter()
        .map(|(k, v)| format!("# {k}: {v}\n"))
        .collect()
}

/// Variant table: id, class_id, latent_harm, score, utility.
pub fn write_variants_csv(catalog: &Catalog, metadata: &[(String, String)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "class_id", "latent_harm", "score", "utility"])
        .expect("in-memory write");
    for v in catalog.variants() {
        w.write_record([
            v.id.as_str(),
            v.class_id.as_str(),
            if v.latent_harm { "true" } else { "false" },
            &render_rational(&v.score),
            &render_rational(&v.utility),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8");
    metadata_header(metadata) + &body
}

/// Class table: class_id, audited_label, ideal_label (blank when
/// undeclared). Membership is recovered from the variant table.
pub fn write_classes_csv(catalog: &Catalog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class_id", "audited_label", "ideal_label"])
        .expect("in-memory write");
    for c in catalog.classes() {
        let ideal = match c.ideal_label {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        w.write_record([
            c.id.as_str(),
            if c.audited_label { "true" } else { "false" },
            ideal,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(text.as_bytes())
}

/// Reads the two catalog tables back. Classes keep table order; member
/// lists come from variant order, matching write_* exactly.
pub fn read_catalog_csv(variants_text: &str, classes_text: &str) -> Result<Catalog, IoError> {
    let mut variants = Vec::new();
    for (row, record) in reader(variants_text).records().enumerate() {
        let record = record?;
        if record.len() != 5 {
            return Err(IoError::Shape {
                row,
                expected: 5,
                found: record.len(),
            });
        }
        variants.push(Variant {
            id: VariantId::from(&record[0]),
            class_id: record[1].into(),
            latent_harm: parse_bool(&record[2], row)?,
            score: parse_field(&record[3], row)?,
            utility: parse_field(&record[4], row)?,
        });
    }

    let mut members: BTreeMap<String, Vec<VariantId>> = BTreeMap::new();
    for v in &variants {
        members
            .entry(v.class_id.as_str().to_string())
            .or_default()
            .push(v.id.clone());
    }

    let mut classes = Vec::new();
    for (row, record) in reader(classes_text).records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(IoError::Shape {
                row,
                expected: 3,
                found: record.len(),
            });
        }
        let ideal_label = match record[2].trim() {
            "" => None,
            text => Some(parse_bool(text, row)?),
        };
        classes.push(SemanticClass {
            id: record[0].into(),
            member_ids: members.remove(&record[0]).unwrap_or_default(),
            audited_label: parse_bool(&record[1], row)?,
            ideal_label,
        });
    }
    Ok(Catalog::new(variants, classes))
}

/// Edge table: v, u, attribute_ok, confidence. The threshold comes from the
/// caller so one file serves a whole sensitivity sweep.
pub fn write_protocol_csv(spec: &ProtocolSpec) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["v", "u", "attribute_ok", "confidence"])
        .expect("in-memory write");
    for e in &spec.candidate_edges {
        w.write_record([
            e.v.as_str(),
            e.u.as_str(),
            if e.attribute_ok { "true" } else { "false" },
            &render_rational(&e.confidence),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

pub fn read_protocol_csv(text: &str, threshold: Q) -> Result<ProtocolSpec, IoError> {
    let mut edges = Vec::new();
    for (row, record) in reader(text).records().enumerate() {
        let record = record?;
        if record.len() != 4 {
            return Err(IoError::Shape {
                row,
                expected: 4,
                found: record.len(),
            });
        }
        edges.push(CandidateEdge {
            v: VariantId::from(&record[0]),
            u: VariantId::from(&record[1]),
            attribute_ok: parse_bool(&record[2], row)?,
            confidence: parse_field(&record[3], row)?,
        });
    }
    Ok(ProtocolSpec::new(edges, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{deterministic_catalog, hatecheck_catalog, six_variant_model};
    use crate::catalog::validate_catalog;
    use crate::generator::{sample_catalog, GeneratorConfig};
    use crate::rational::q;

    fn round_trip(catalog: &Catalog, metadata: &[(String, String)]) {
        let variants = write_variants_csv(catalog, metadata);
        let classes = write_classes_csv(catalog);
        let back = read_catalog_csv(&variants, &classes).unwrap();
        assert_eq!(back.variants(), catalog.variants());
        assert_eq!(back.classes(), catalog.classes());
    }

    #[test]
    fn builtin_catalogs_round_trip() {
        round_trip(&deterministic_catalog(), &[]);
        round_trip(&hatecheck_catalog(), &[]);
        round_trip(&six_variant_model().catalog, &[]);
    }

    #[test]
    fn generated_catalog_round_trips_with_metadata() {
        let cfg = GeneratorConfig::with_seed(12);
        let catalog = sample_catalog(&cfg);
        round_trip(&catalog, &cfg.metadata());
        let text = write_variants_csv(&catalog, &cfg.metadata());
        assert!(text.starts_with("# generator: chacha8\n"));
    }

    #[test]
    fn rationals_render_short_and_exact() {
        assert_eq!(render_rational(&q(19, 20)), "0.95");
        assert_eq!(render_rational(&q(1, 8)), "0.125");
        assert_eq!(render_rational(&q(15, 17)), "15/17");
        assert_eq!(render_rational(&q(3, 1)), "3");
        for value in [q(19, 20), q(15, 17), q(-7, 12)] {
            assert_eq!(parse_rational(&render_rational(&value)).unwrap(), value);
        }
    }

    #[test]
    fn protocol_edges_round_trip() {
        let model = six_variant_model();
        let text = write_protocol_csv(&model.protocol);
        let back = read_protocol_csv(&text, model.protocol.threshold.clone()).unwrap();
        assert_eq!(back.candidate_edges, model.protocol.candidate_edges);
        assert_eq!(back.threshold, model.protocol.threshold);
    }

    #[test]
    fn malformed_rows_are_rejected_with_positions() {
        let bad_bool = "id,class_id,latent_harm,score,utility\nv1,C,maybe,0.5,0.5\n";
        let classes = "class_id,audited_label,ideal_label\nC,false,\n";
        match read_catalog_csv(bad_bool, classes) {
            Err(IoError::Boolean { row: 0, value }) => assert_eq!(value, "maybe"),
            other => panic!("expected boolean error, got {other:?}"),
        }
        let bad_score = "id,class_id,latent_harm,score,utility\nv1,C,true,half,0.5\n";
        assert!(matches!(
            read_catalog_csv(bad_score, classes),
            Err(IoError::Rational { row: 0, .. })
        ));
    }

    #[test]
    fn undeclared_ideal_labels_stay_undeclared() {
        let variants = "id,class_id,latent_harm,score,utility\nv1,C,true,0.5,0.5\n";
        let classes = "class_id,audited_label,ideal_label\nC,true,\n";
        let catalog = read_catalog_csv(variants, classes).unwrap();
        assert_eq!(catalog.classes()[0].ideal_label, None);
        assert!(validate_catalog(&catalog).is_empty());
    }
}
