//! Normalized certainty penalty adapted to relational plus textual data.
//!
//! Per record, relational loss is the mean over quasi-identifiers of a
//! range-width penalty (numeric) or a described-values penalty (categorical
//! and dates), textual loss is the share of the record's terms that were
//! suppressed, and the two combine as a weighted mean. Dataset loss is the
//! plain mean over person records, summed in record order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AnnotationSet, PersonView};
use crate::model::RecodedCell;
use crate::partition::{Extent, Extents, SplitStats};
use crate::recode::{class_of_person, DateDgh, EquivalenceClass, Recoder};
use crate::schema::AttributeKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NcpWeights {
    pub w_a: f64,
    pub w_x: f64,
}

impl NcpWeights {
    pub fn new(w_a: f64, w_x: f64) -> Result<Self> {
        if !(w_a >= 0.0 && w_x >= 0.0 && w_a + w_x > 0.0 && (w_a + w_x).is_finite()) {
            return Err(Error::Config(format!(
                "weights must be non-negative with a positive sum, got ({w_a}, {w_x})"
            )));
        }
        Ok(NcpWeights { w_a, w_x })
    }
}

impl Default for NcpWeights {
    fn default() -> Self {
        NcpWeights { w_a: 1.0, w_x: 1.0 }
    }
}

/// `(hi − lo) / global_width`; zero for unchanged values or a zero-width
/// attribute.
pub fn ncp_num(cell: &RecodedCell, global_width: f64) -> f64 {
    match cell {
        RecodedCell::NumericRange { lo, hi } if global_width > 0.0 => (hi - lo) / global_width,
        _ => 0.0,
    }
}

/// Number of original values a recoded cell stands for. Dates count the
/// hierarchy leaves below the node.
pub fn described_values(cell: &RecodedCell, dgh: Option<&DateDgh>) -> usize {
    match cell {
        RecodedCell::CategorySet(v) => v.len(),
        RecodedCell::DateNode(n) => dgh.map_or(1, |h| h.leaf_count(n)),
        RecodedCell::Scalar(_) => 1,
        RecodedCell::NumericRange { .. } => 1,
    }
}

/// 0 when the cell describes one value, else `|u| / global_count`.
pub fn ncp_cat(cell: &RecodedCell, global_count: usize, dgh: Option<&DateDgh>) -> f64 {
    let u = described_values(cell, dgh);
    if u <= 1 || global_count == 0 {
        0.0
    } else {
        u as f64 / global_count as f64
    }
}

/// Global denominators for every quasi-identifier.
#[derive(Debug, Clone)]
pub struct LossContext {
    names: Vec<String>,
    attributes: Vec<AttributeLoss>,
}

#[derive(Debug, Clone)]
enum AttributeLoss {
    Numeric { width: f64 },
    Categorical { distinct: usize },
    Date { dgh: DateDgh },
}

impl LossContext {
    pub fn new(view: &PersonView) -> Self {
        let extents = Extents::of(view);
        let recoder = Recoder::new(view);
        let attributes = view
            .quasi
            .iter()
            .enumerate()
            .map(|(q, attr)| match (attr.kind, &extents.attributes[q]) {
                (AttributeKind::QuasiDate, _) => AttributeLoss::Date {
                    dgh: recoder.dgh(q).expect("date hierarchy").clone(),
                },
                (_, Extent::Distinct(n)) => AttributeLoss::Categorical { distinct: *n },
                (_, e) => AttributeLoss::Numeric { width: e.width() },
            })
            .collect();
        LossContext {
            names: view.quasi.iter().map(|q| q.name.clone()).collect(),
            attributes,
        }
    }

    pub fn ncp_attribute(&self, q: usize, cell: &RecodedCell) -> f64 {
        match &self.attributes[q] {
            AttributeLoss::Numeric { width } => ncp_num(cell, *width),
            AttributeLoss::Categorical { distinct } => ncp_cat(cell, *distinct, None),
            AttributeLoss::Date { dgh } => ncp_cat(cell, dgh.leaf_total(), Some(dgh)),
        }
    }

    pub fn dgh(&self, q: usize) -> Option<&DateDgh> {
        match &self.attributes[q] {
            AttributeLoss::Date { dgh } => Some(dgh),
            _ => None,
        }
    }
}

/// Mean of the per-attribute penalties of a class's cells.
pub fn ncp_record_relational(ctx: &LossContext, class: &EquivalenceClass) -> f64 {
    if class.cells.is_empty() {
        return 0.0;
    }
    let sum: f64 = class
        .cells
        .iter()
        .enumerate()
        .map(|(q, c)| ctx.ncp_attribute(q, c))
        .sum();
    sum / class.cells.len() as f64
}

/// Share of the record's terms suppressed by its class; 0 for an empty
/// term set.
pub fn ncp_record_textual(view: &PersonView, record: usize, class: &EquivalenceClass) -> f64 {
    let terms = &view.records[record].terms;
    if terms.is_empty() {
        return 0.0;
    }
    let suppressed = terms.iter().filter(|t| !class.retains(**t)).count();
    suppressed as f64 / terms.len() as f64
}

pub fn ncp_record(weights: NcpWeights, relational: f64, textual: f64) -> f64 {
    (weights.w_a * relational + weights.w_x * textual) / (weights.w_a + weights.w_x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionStats {
    pub count: usize,
    pub mean_size: f64,
    /// Population standard deviation.
    pub std_size: f64,
}

pub fn partition_stats(sizes: &[usize]) -> PartitionStats {
    let count = sizes.len();
    if count == 0 {
        return PartitionStats {
            count,
            mean_size: 0.0,
            std_size: 0.0,
        };
    }
    let mean = sizes.iter().sum::<usize>() as f64 / count as f64;
    let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / count as f64;
    PartitionStats {
        count,
        mean_size: mean,
        std_size: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub ncp_total: f64,
    pub ncp_relational: f64,
    pub ncp_textual: f64,
    /// Mean penalty of each quasi-identifier over records.
    pub per_attribute: BTreeMap<String, f64>,
    /// Suppressed share of non-redundant term occurrences, per entity type.
    pub per_entity_type: BTreeMap<String, f64>,
    pub partitions: PartitionStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitStats>,
}

impl LossReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Dataset-level loss: means over person records of every component.
pub fn ncp_dataset(
    ctx: &LossContext,
    view: &PersonView,
    annotations: &AnnotationSet,
    classes: &[EquivalenceClass],
    weights: NcpWeights,
    splits: Option<SplitStats>,
) -> LossReport {
    let class_of = class_of_person(view, classes);
    let n = view.len();
    let mut total = 0.0;
    let mut relational = 0.0;
    let mut textual = 0.0;
    let mut per_attr = vec![0.0; view.quasi.len()];
    for (r, &c) in class_of.iter().enumerate() {
        let class = &classes[c];
        let a = ncp_record_relational(ctx, class);
        let x = ncp_record_textual(view, r, class);
        relational += a;
        textual += x;
        total += ncp_record(weights, a, x);
        for (q, cell) in class.cells.iter().enumerate() {
            per_attr[q] += ctx.ncp_attribute(q, cell);
        }
    }
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };

    let mut occurrences: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for term in annotations.terms().iter().filter(|t| !t.is_redundant()) {
        let class = &classes[class_of[view.row_person[term.row_id]]];
        let kept = view.term_id(&term.key()).is_some_and(|id| class.retains(id));
        let e = occurrences.entry(term.entity_type.clone()).or_insert((0, 0));
        e.0 += usize::from(!kept);
        e.1 += 1;
    }

    LossReport {
        ncp_total: mean(total),
        ncp_relational: mean(relational),
        ncp_textual: mean(textual),
        per_attribute: ctx.names.iter().cloned().zip(per_attr.into_iter().map(mean)).collect(),
        per_entity_type: occurrences
            .into_iter()
            .map(|(et, (s, t))| (et, s as f64 / t as f64))
            .collect(),
        partitions: partition_stats(&classes.iter().map(|c| c.members.len()).collect::<Vec<_>>()),
        splits,
    }
}
