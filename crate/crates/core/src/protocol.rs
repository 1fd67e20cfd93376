//! Published audit protocols: a candidate transformation graph with
//! attribute checks and validation confidences, thresholded into admissible
//! edges whose equivalence closure induces the semantic classes.
//!
//! Raising the threshold can only drop edges, so the induced partition
//! refines monotonically; `diagnostics` reports the per-class transitive
//! path length and weakest edge so the cost of merging stays visible.

use crate::catalog::{Catalog, ClassId, SemanticClass, VariantId};
use crate::rational::Q;
use num::{One, Signed};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

/// One candidate pair from the published transformation family, with its
/// attribute-preservation verdict and validation confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEdge {
    pub v: VariantId,
    pub u: VariantId,
    pub attribute_ok: bool,
    pub confidence: Q,
}

/// Published protocol: candidate edges plus the acceptance threshold.
///
/// An edge is admissible when its attribute check passed and its confidence
/// is at least the threshold (closed comparison).
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub candidate_edges: Vec<CandidateEdge>,
    pub threshold: Q,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("edge endpoint `{0}` is not in the variant universe")]
    DanglingEndpoint(VariantId),
    #[error("threshold {0} outside [0, 1]")]
    ThresholdRange(String),
    #[error("confidence for ({v}, {u}) outside [0, 1]")]
    ConfidenceRange { v: VariantId, u: VariantId },
    #[error("partitions cover different variant universes")]
    MismatchedUniverses,
    #[error("partition does not cover the catalog's variants")]
    PartitionMismatch,
}

/// Partition of a variant universe into disjoint cells. Cells are ordered by
/// smallest member id; members are sorted within each cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<VariantId>>,
}

impl Partition {
    pub fn cells(&self) -> &[Vec<VariantId>] {
        &self.cells
    }

    fn universe(&self) -> HashSet<&VariantId> {
        self.cells.iter().flatten().collect()
    }
}

impl ProtocolSpec {
    pub fn new(candidate_edges: Vec<CandidateEdge>, threshold: Q) -> ProtocolSpec {
        ProtocolSpec {
            candidate_edges,
            threshold,
        }
    }

    /// Same graph under a different acceptance threshold.
    pub fn at_threshold(&self, threshold: Q) -> ProtocolSpec {
        ProtocolSpec {
            candidate_edges: self.candidate_edges.clone(),
            threshold,
        }
    }

    fn check_ranges(&self) -> Result<(), ProtocolError> {
        if self.threshold.is_negative() || self.threshold > Q::one() {
            return Err(ProtocolError::ThresholdRange(
                crate::rational::display_exact(&self.threshold),
            ));
        }
        for e in &self.candidate_edges {
            if e.confidence.is_negative() || e.confidence > Q::one() {
                return Err(ProtocolError::ConfidenceRange {
                    v: e.v.clone(),
                    u: e.u.clone(),
                });
            }
        }
        Ok(())
    }

    /// Edges that survive the attribute check and the threshold.
    pub fn admissible_edges(&self) -> impl Iterator<Item = &CandidateEdge> {
        self.candidate_edges
            .iter()
            .filter(|e| e.attribute_ok && e.confidence >= self.threshold)
    }
}

/// Union-find over variant indices; the representative of a set is always
/// the member with the smallest variant id.
struct UnionFind<'a> {
    parent: Vec<usize>,
    ids: &'a [VariantId],
}

impl<'a> UnionFind<'a> {
    fn new(ids: &'a [VariantId]) -> UnionFind<'a> {
        UnionFind {
            parent: (0..ids.len()).collect(),
            ids,
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.ids[ra] <= self.ids[rb] {
            self.parent[rb] = ra;
        } else {
            self.parent[ra] = rb;
        }
    }
}

/// Connected components of the symmetrized admissible edge set over
/// `variant_ids`; variants touched by no admissible edge form singletons.
pub fn induce_partition(
    spec: &ProtocolSpec,
    variant_ids: &[VariantId],
) -> Result<Partition, ProtocolError> {
    spec.check_ranges()?;
    let index: HashMap<&VariantId, usize> = variant_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    for e in &spec.candidate_edges {
        for endpoint in [&e.v, &e.u] {
            if !index.contains_key(endpoint) {
                return Err(ProtocolError::DanglingEndpoint(endpoint.clone()));
            }
        }
    }
    let mut uf = UnionFind::new(variant_ids);
    for e in spec.admissible_edges() {
        uf.union(index[&e.v], index[&e.u]);
    }
    let mut cells: BTreeMap<VariantId, Vec<VariantId>> = BTreeMap::new();
    for (i, id) in variant_ids.iter().enumerate() {
        let root = uf.find(i);
        cells
            .entry(variant_ids[root].clone())
            .or_default()
            .push(id.clone());
    }
    let mut cells: Vec<Vec<VariantId>> = cells.into_values().collect();
    for cell in &mut cells {
        cell.sort();
    }
    Ok(Partition { cells })
}

/// True iff every cell of `fine` is contained in some cell of `coarse`.
pub fn refines(fine: &Partition, coarse: &Partition) -> Result<bool, ProtocolError> {
    if fine.universe() != coarse.universe() {
        return Err(ProtocolError::MismatchedUniverses);
    }
    let mut cell_of: HashMap<&VariantId, usize> = HashMap::new();
    for (i, cell) in coarse.cells.iter().enumerate() {
        for id in cell {
            cell_of.insert(id, i);
        }
    }
    for cell in &fine.cells {
        let target = cell_of[&cell[0]];
        if cell.iter().any(|id| cell_of[id] != target) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Transitive-merging cost report for one partition cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagnostics {
    /// Smallest member id; names the cell.
    pub representative: VariantId,
    pub size: usize,
    /// Longest shortest path between member pairs in the admissible
    /// subgraph (unweighted); 0 for singletons.
    pub max_path_length: usize,
    /// Minimum confidence over admissible edges inside the cell; 1 for
    /// singletons by convention.
    pub weakest_edge_confidence: Q,
}

/// Per-cell diagnostics, aligned with the partition's cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionDiagnostics {
    pub per_class: Vec<ClassDiagnostics>,
}

/// Reports, per cell, the maximum path length and weakest edge confidence
/// among admissible edges with both endpoints inside the cell.
pub fn diagnostics(spec: &ProtocolSpec, partition: &Partition) -> PartitionDiagnostics {
    let mut per_class = Vec::with_capacity(partition.cells.len());
    for cell in &partition.cells {
        let members: HashSet<&VariantId> = cell.iter().collect();
        let mut adjacency: HashMap<&VariantId, Vec<&VariantId>> = HashMap::new();
        let mut weakest: Option<Q> = None;
        for e in spec.admissible_edges() {
            if members.contains(&e.v) && members.contains(&e.u) {
                adjacency.entry(&e.v).or_default().push(&e.u);
                adjacency.entry(&e.u).or_default().push(&e.v);
                if weakest.as_ref().is_none_or(|w| e.confidence < *w) {
                    weakest = Some(e.confidence.clone());
                }
            }
        }
        let mut max_path = 0;
        for start in cell {
            // BFS eccentricity from each member; the cell is connected by
            // construction, so every member is reached.
            let mut dist: HashMap<&VariantId, usize> = HashMap::new();
            dist.insert(start, 0);
            let mut queue = VecDeque::from([start]);
            while let Some(node) = queue.pop_front() {
                let d = dist[node];
                for &next in adjacency.get(node).into_iter().flatten() {
                    if !dist.contains_key(next) {
                        dist.insert(next, d + 1);
                        queue.push_back(next);
                    }
                }
            }
            max_path = max_path.max(dist.values().copied().max().unwrap_or(0));
        }
        per_class.push(ClassDiagnostics {
            representative: cell[0].clone(),
            size: cell.len(),
            max_path_length: max_path,
            weakest_edge_confidence: weakest.unwrap_or_else(Q::one),
        });
    }
    PartitionDiagnostics { per_class }
}

/// Rebuilds a catalog's class structure from an induced partition.
///
/// Cell labels: a cell identical to an old class keeps that class id; a cell
/// split out of one old class is named `{old}:{representative}`; a cell
/// spanning several old classes joins their ids with `+`. The audited label
/// of a new cell is the disjunction of the overlapped old labels (a split
/// cell inherits its parent's label; merges stay conservative). The ideal
/// label survives only where every overlapped old class declared one and the
/// cell's members agree on latent harm. Every non-trivial relabeling is
/// described in the returned notes.
pub fn apply_partition(
    catalog: &Catalog,
    partition: &Partition,
) -> Result<(Catalog, Vec<String>), ProtocolError> {
    let catalog_ids: HashSet<&VariantId> = catalog.variants().iter().map(|v| &v.id).collect();
    if partition.universe() != catalog_ids {
        return Err(ProtocolError::PartitionMismatch);
    }
    let position: HashMap<&VariantId, usize> = catalog
        .variants()
        .iter()
        .enumerate()
        .map(|(i, v)| (&v.id, i))
        .collect();
    let mut cells: Vec<&Vec<VariantId>> = partition.cells.iter().collect();
    cells.sort_by_key(|cell| cell.iter().map(|id| position[id]).min());

    let mut notes = Vec::new();
    let mut classes = Vec::with_capacity(cells.len());
    let mut class_of_variant: HashMap<VariantId, ClassId> = HashMap::new();
    for cell in cells {
        let mut old_ids: Vec<ClassId> = Vec::new();
        for id in cell {
            let old = &catalog.variant(id).expect("covered above").class_id;
            if !old_ids.contains(old) {
                old_ids.push(old.clone());
            }
        }
        old_ids.sort();
        let overlapped: Vec<&SemanticClass> = old_ids
            .iter()
            .filter_map(|cid| catalog.class(cid))
            .collect();
        let exact_match = overlapped.len() == 1 && {
            let mut old_members = overlapped[0].member_ids.clone();
            old_members.sort();
            old_members == *cell
        };
        let id = if exact_match {
            overlapped[0].id.clone()
        } else if overlapped.len() == 1 {
            let id = ClassId::new(format!("{}:{}", overlapped[0].id, cell[0]));
            notes.push(format!(
                "class `{id}` split from `{}`; audited label inherited",
                overlapped[0].id
            ));
            id
        } else {
            let joined = old_ids
                .iter()
                .map(|c| c.as_str())
                .collect::<Vec<_>>()
                .join("+");
            let id = ClassId::new(joined);
            notes.push(format!(
                "class `{id}` merges {} old classes; audited label is their disjunction",
                overlapped.len()
            ));
            id
        };
        let audited_label = overlapped.iter().any(|c| c.audited_label);
        let member_harms: Vec<bool> = cell
            .iter()
            .map(|v| catalog.variant(v).expect("covered above").latent_harm)
            .collect();
        let harms_agree = member_harms.windows(2).all(|w| w[0] == w[1]);
        let ideal_label = if harms_agree && overlapped.iter().all(|c| c.ideal_label.is_some()) {
            Some(member_harms[0])
        } else {
            if !harms_agree {
                notes.push(format!(
                    "class `{id}` mixes latent harm labels; ideal label dropped"
                ));
            }
            None
        };
        let mut member_ids = cell.clone();
        member_ids.sort_by_key(|id| position[id]);
        for m in &member_ids {
            class_of_variant.insert(m.clone(), id.clone());
        }
        classes.push(SemanticClass {
            id,
            member_ids,
            audited_label,
            ideal_label,
        });
    }
    let variants = catalog
        .variants()
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.class_id = class_of_variant[&v.id].clone();
            v
        })
        .collect();
    Ok((Catalog::new(variants, classes), notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::six_variant_model;
    use crate::catalog::validate_catalog;
    use crate::rational::q;

    fn ids(raw: &[&str]) -> Vec<VariantId> {
        raw.iter().map(|s| VariantId::from(*s)).collect()
    }

    #[test]
    fn coarse_threshold_merges_both_pairs() {
        let model = six_variant_model();
        let partition = induce_partition(&model.protocol, &model.catalog.variant_ids()).unwrap();
        assert_eq!(
            partition.cells(),
            &[
                ids(&["b1"]),
                ids(&["b2"]),
                ids(&["h1_manip", "h1_orig"]),
                ids(&["h2_manip", "h2_orig"]),
            ]
        );
    }

    #[test]
    fn strict_threshold_splits_the_low_confidence_pair() {
        let model = six_variant_model();
        let strict = model.protocol.at_threshold(q(90, 100));
        let partition = induce_partition(&strict, &model.catalog.variant_ids()).unwrap();
        assert_eq!(
            partition.cells(),
            &[
                ids(&["b1"]),
                ids(&["b2"]),
                ids(&["h1_manip", "h1_orig"]),
                ids(&["h2_manip"]),
                ids(&["h2_orig"]),
            ]
        );
    }

    #[test]
    fn strict_partition_refines_coarse() {
        let model = six_variant_model();
        let universe = model.catalog.variant_ids();
        let coarse = induce_partition(&model.protocol, &universe).unwrap();
        let fine = induce_partition(&model.protocol.at_threshold(q(90, 100)), &universe).unwrap();
        assert!(refines(&fine, &coarse).unwrap());
        assert!(!refines(&coarse, &fine).unwrap());
        assert!(refines(&coarse, &coarse).unwrap());
    }

    #[test]
    fn crossing_partitions_do_not_refine() {
        let left = Partition {
            cells: vec![ids(&["a", "b"]), ids(&["c"])],
        };
        let right = Partition {
            cells: vec![ids(&["a"]), ids(&["b", "c"])],
        };
        assert!(!refines(&left, &right).unwrap());
        assert!(!refines(&right, &left).unwrap());
        let other = Partition {
            cells: vec![ids(&["a", "d"])],
        };
        assert_eq!(
            refines(&left, &other),
            Err(ProtocolError::MismatchedUniverses)
        );
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let spec = ProtocolSpec::new(
            vec![CandidateEdge {
                v: VariantId::from("a"),
                u: VariantId::from("ghost"),
                attribute_ok: true,
                confidence: q(9, 10),
            }],
            q(1, 2),
        );
        assert_eq!(
            induce_partition(&spec, &ids(&["a", "b"])),
            Err(ProtocolError::DanglingEndpoint(VariantId::from("ghost")))
        );
    }

    #[test]
    fn failed_attribute_check_drops_the_edge() {
        let spec = ProtocolSpec::new(
            vec![CandidateEdge {
                v: VariantId::from("a"),
                u: VariantId::from("b"),
                attribute_ok: false,
                confidence: q(99, 100),
            }],
            q(1, 2),
        );
        let partition = induce_partition(&spec, &ids(&["a", "b"])).unwrap();
        assert_eq!(partition.cells().len(), 2);
    }

    #[test]
    fn chain_diagnostics_report_diameter_and_weakest_edge() {
        let edge = |v: &str, u: &str, conf: (i64, i64)| CandidateEdge {
            v: VariantId::from(v),
            u: VariantId::from(u),
            attribute_ok: true,
            confidence: q(conf.0, conf.1),
        };
        let spec = ProtocolSpec::new(
            vec![edge("a", "b", (9, 10)), edge("b", "c", (75, 100))],
            q(1, 2),
        );
        let partition = induce_partition(&spec, &ids(&["a", "b", "c", "d"])).unwrap();
        let diag = diagnostics(&spec, &partition);
        let chain = &diag.per_class[0];
        assert_eq!(chain.representative, VariantId::from("a"));
        assert_eq!(chain.max_path_length, 2);
        assert_eq!(chain.weakest_edge_confidence, q(75, 100));
        let singleton = &diag.per_class[1];
        assert_eq!(singleton.max_path_length, 0);
        assert_eq!(singleton.weakest_edge_confidence, q(1, 1));
    }

    #[test]
    fn edge_orientation_does_not_change_the_partition() {
        let model = six_variant_model();
        let mut reversed = model.protocol.clone();
        for e in &mut reversed.candidate_edges {
            std::mem::swap(&mut e.v, &mut e.u);
        }
        let universe = model.catalog.variant_ids();
        assert_eq!(
            induce_partition(&model.protocol, &universe).unwrap(),
            induce_partition(&reversed, &universe).unwrap()
        );
    }

    #[test]
    fn split_classes_inherit_the_audited_label() {
        let model = six_variant_model();
        let strict = model.protocol.at_threshold(q(90, 100));
        let partition = induce_partition(&strict, &model.catalog.variant_ids()).unwrap();
        let (relabeled, notes) = apply_partition(&model.catalog, &partition).unwrap();
        assert!(validate_catalog(&relabeled).is_empty());
        assert_eq!(relabeled.classes().len(), 5);
        let split: Vec<_> = relabeled
            .classes()
            .iter()
            .filter(|c| c.id.as_str().starts_with("H2:"))
            .collect();
        assert_eq!(split.len(), 2);
        for class in split {
            assert!(class.audited_label);
            assert_eq!(class.ideal_label, Some(true));
        }
        assert_eq!(notes.len(), 2);
    }

    #[test]
    fn identity_partition_round_trips_the_catalog() {
        let model = six_variant_model();
        let partition = induce_partition(&model.protocol, &model.catalog.variant_ids()).unwrap();
        let (relabeled, notes) = apply_partition(&model.catalog, &partition).unwrap();
        assert_eq!(relabeled, model.catalog);
        assert!(notes.is_empty());
    }
}
