//! Turning partitions into equivalence classes and writing the release.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AnnotationSet, Dataset, PersonView};
use crate::model::{
    category_order, format_number, CellSet, DateNode, Partition, RecodedCell, SensitiveTerm, TermId, TermKey,
};
use crate::schema::AttributeKind;

/// Date hierarchy generated from the distinct dates of one column: day
/// leaves under year-months, under years, under a root range of years.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateDgh {
    leaves: BTreeSet<NaiveDate>,
}

impl DateDgh {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        DateDgh {
            leaves: dates.into_iter().collect(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.leaves.contains(&date)
    }

    pub fn leaf_total(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> Option<DateNode> {
        let first = self.leaves.first()?;
        let last = self.leaves.last()?;
        Some(DateNode::YearRange {
            from: first.year(),
            to: last.year(),
        })
    }

    /// Number of dataset dates below `node`.
    pub fn leaf_count(&self, node: &DateNode) -> usize {
        match *node {
            DateNode::YearRange { .. } if Some(*node) == self.root() => self.leaves.len(),
            _ => self.leaves.iter().filter(|d| node.covers(**d)).count(),
        }
    }

    /// Deepest node covering every value.
    pub fn covering_node(&self, values: &[NaiveDate]) -> Result<DateNode> {
        if let Some(missing) = values.iter().find(|d| !self.contains(**d)) {
            return Err(Error::Config(format!("date {missing} is not a leaf of the hierarchy")));
        }
        let first = *values
            .first()
            .ok_or_else(|| Error::Config("no dates to recode".into()))?;
        let node = if values.iter().all(|d| *d == first) {
            DateNode::Day(first)
        } else if values
            .iter()
            .all(|d| d.year() == first.year() && d.month() == first.month())
        {
            DateNode::Month {
                year: first.year(),
                month: first.month(),
            }
        } else if values.iter().all(|d| d.year() == first.year()) {
            DateNode::Year(first.year())
        } else {
            self.root().expect("non-empty hierarchy")
        };
        Ok(node)
    }
}

/// Range of the values, or the value itself when all are equal.
pub fn recode_numeric(values: &[f64]) -> Option<RecodedCell> {
    let lo = values.iter().copied().reduce(f64::min)?;
    let hi = values.iter().copied().reduce(f64::max)?;
    Some(if lo == hi {
        RecodedCell::Scalar(format_number(lo))
    } else {
        RecodedCell::NumericRange { lo, hi }
    })
}

/// Set of distinct values, or the value itself when there is only one.
pub fn recode_categorical<'a>(values: impl IntoIterator<Item = &'a str>) -> Option<RecodedCell> {
    let mut distinct: Vec<&str> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    match distinct.len() {
        0 => None,
        1 => Some(RecodedCell::Scalar(distinct[0].to_string())),
        _ => {
            distinct.sort_by(|a, b| category_order(a, b));
            Some(RecodedCell::CategorySet(
                distinct.into_iter().map(str::to_string).collect(),
            ))
        }
    }
}

pub fn recode_date(values: &[NaiveDate], dgh: &DateDgh) -> Result<RecodedCell> {
    dgh.covering_node(values).map(RecodedCell::DateNode)
}

/// Terms present in every member are retained; every other term occurring
/// in some member is suppressed.
pub fn decide_term_retention(view: &PersonView, members: &[usize]) -> (Vec<TermId>, Vec<TermId>) {
    let mut counts: BTreeMap<TermId, usize> = BTreeMap::new();
    for &m in members {
        for &t in &view.records[m].terms {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let (retained, suppressed): (Vec<_>, Vec<_>) = counts.into_iter().partition(|(_, c)| *c == members.len());
    (
        retained.into_iter().map(|(t, _)| t).collect(),
        suppressed.into_iter().map(|(t, _)| t).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClass {
    pub members: Vec<usize>,
    /// One cell per quasi-identifier.
    pub cells: Vec<RecodedCell>,
    pub retained: Vec<TermId>,
    pub suppressed: Vec<TermId>,
}

impl EquivalenceClass {
    pub fn retains(&self, term: TermId) -> bool {
        self.retained.binary_search(&term).is_ok()
    }
}

/// Per-view recoding state: one date hierarchy per date column.
#[derive(Debug, Clone)]
pub struct Recoder {
    dghs: Vec<Option<DateDgh>>,
}

impl Recoder {
    pub fn new(view: &PersonView) -> Self {
        let dghs = view
            .quasi
            .iter()
            .enumerate()
            .map(|(q, attr)| {
                (attr.kind == AttributeKind::QuasiDate).then(|| {
                    DateDgh::new(view.records.iter().flat_map(|r| match &r.cells[q] {
                        CellSet::Date(v) => v.clone(),
                        _ => Vec::new(),
                    }))
                })
            })
            .collect();
        Recoder { dghs }
    }

    pub fn dgh(&self, q: usize) -> Option<&DateDgh> {
        self.dghs[q].as_ref()
    }

    pub fn recode_cell(&self, view: &PersonView, members: &[usize], q: usize) -> RecodedCell {
        let cells = members.iter().map(|&m| &view.records[m].cells[q]);
        match view.quasi[q].kind {
            AttributeKind::QuasiNumeric => {
                let values: Vec<f64> = cells
                    .flat_map(|c| match c {
                        CellSet::Numeric(v) => v.clone(),
                        _ => Vec::new(),
                    })
                    .collect();
                recode_numeric(&values).expect("non-empty partition")
            }
            AttributeKind::QuasiDate => {
                let values: Vec<NaiveDate> = cells
                    .flat_map(|c| match c {
                        CellSet::Date(v) => v.clone(),
                        _ => Vec::new(),
                    })
                    .collect();
                recode_date(&values, self.dgh(q).expect("date hierarchy")).expect("dates come from the view")
            }
            _ => recode_categorical(cells.flat_map(|c| match c {
                CellSet::Categorical(v) => v.iter().map(String::as_str).collect(),
                _ => Vec::new(),
            }))
            .expect("non-empty partition"),
        }
    }

    pub fn recode_partition(&self, view: &PersonView, members: &[usize]) -> EquivalenceClass {
        let cells = (0..view.quasi.len())
            .map(|q| self.recode_cell(view, members, q))
            .collect();
        let (retained, suppressed) = decide_term_retention(view, members);
        EquivalenceClass {
            members: members.to_vec(),
            cells,
            retained,
            suppressed,
        }
    }

    /// Recodes partitions independently; output order follows the input.
    pub fn recode_all(&self, view: &PersonView, partitions: &[Partition]) -> Vec<EquivalenceClass> {
        partitions
            .par_iter()
            .map(|p| self.recode_partition(view, &p.members))
            .collect()
    }
}

/// What happens to one annotated span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanRewrite {
    Keep,
    /// Lower-case entity type; capitalized at the start of a sentence.
    Placeholder(String),
    Replace(String),
}

/// Rewrite of a term of a member of `class`.
pub fn plan_rewrite(view: &PersonView, class: &EquivalenceClass, term: &SensitiveTerm) -> SpanRewrite {
    if let Some(r) = term.redundancy {
        let Some(q) = view.quasi_position(r.attribute) else {
            return SpanRewrite::Keep;
        };
        let cell = &class.cells[q];
        if !cell.is_generalized() {
            return SpanRewrite::Keep;
        }
        let chars: Vec<char> = term.text.chars().collect();
        let mut out: String = chars[..r.start].iter().collect();
        out.push_str(&cell.to_string());
        out.extend(&chars[r.end..]);
        return SpanRewrite::Replace(out);
    }
    match view.term_id(&term.key()) {
        Some(id) if class.retains(id) => SpanRewrite::Keep,
        _ => SpanRewrite::Placeholder(term.entity_type.to_lowercase()),
    }
}

/// Applies span rewrites right to left. Characters outside spans are copied
/// unchanged.
pub fn rewrite_text(text: &str, edits: &[(&SensitiveTerm, SpanRewrite)]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut order: Vec<usize> = (0..edits.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(edits[i].0.start));
    let mut out = chars.clone();
    let mut previous_start = usize::MAX;
    for i in order {
        let (term, action) = &edits[i];
        assert!(term.end <= previous_start, "overlapping spans");
        previous_start = term.start;
        let replacement: Vec<char> = match action {
            SpanRewrite::Keep => continue,
            SpanRewrite::Replace(s) => s.chars().collect(),
            SpanRewrite::Placeholder(p) => {
                if starts_sentence(&chars, term.start) {
                    capitalize(p).chars().collect()
                } else {
                    p.chars().collect()
                }
            }
        };
        out.splice(term.start..term.end, replacement);
    }
    out.into_iter().collect()
}

fn starts_sentence(chars: &[char], pos: usize) -> bool {
    chars[..pos]
        .iter()
        .rev()
        .find(|c| !c.is_whitespace())
        .is_none_or(|c| matches!(c, '.' | '!' | '?'))
}

fn capitalize(s: &str) -> String {
    let mut it = s.chars();
    match it.next() {
        Some(c) => c.to_uppercase().chain(it).collect(),
        None => String::new(),
    }
}

/// The anonymized table, one row per input tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Release {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Release { header, rows })
    }
}

/// Class index of every person record.
pub fn class_of_person(view: &PersonView, classes: &[EquivalenceClass]) -> Vec<usize> {
    let mut out = vec![usize::MAX; view.len()];
    for (c, class) in classes.iter().enumerate() {
        for &m in &class.members {
            out[m] = c;
        }
    }
    assert!(out.iter().all(|&c| c != usize::MAX), "every person belongs to a class");
    out
}

/// Expands classes back to tuple granularity, in original row order and
/// original column order.
pub fn expand_release(
    dataset: &Dataset,
    annotations: &AnnotationSet,
    view: &PersonView,
    classes: &[EquivalenceClass],
    drop_direct_id: bool,
) -> Release {
    let schema = dataset.schema();
    let class_of = class_of_person(view, classes);
    let columns: Vec<(usize, usize)> = dataset
        .column_attributes()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, a)| !(drop_direct_id && schema.attributes[*a].kind == AttributeKind::DirectIdentifier))
        .collect();
    let header = columns.iter().map(|(c, _)| dataset.header()[*c].clone()).collect();
    let rendered: Vec<Vec<String>> = classes
        .iter()
        .map(|c| c.cells.iter().map(|x| x.to_string()).collect())
        .collect();

    let rows = dataset
        .rows()
        .iter()
        .map(|row| {
            let class = &classes[class_of[view.row_person[row.row_id]]];
            let cells = &rendered[class_of[view.row_person[row.row_id]]];
            columns
                .iter()
                .map(|&(_, a)| match schema.attributes[a].kind {
                    AttributeKind::Textual => {
                        let terms = annotations.for_cell(row.row_id, a);
                        let edits: Vec<_> = terms.into_iter().map(|t| (t, plan_rewrite(view, class, t))).collect();
                        rewrite_text(&row.cells[a], &edits)
                    }
                    k if k.is_quasi() => {
                        let q = view.quasi_position(a).expect("quasi attribute");
                        cells[q].clone()
                    }
                    _ => row.cells[a].clone(),
                })
                .collect()
        })
        .collect();
    Release { header, rows }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEntry {
    pub members: Vec<String>,
    pub cells: BTreeMap<String, String>,
    pub retained_terms: Vec<TermKey>,
    pub suppressed_terms: usize,
}

pub fn class_report(view: &PersonView, classes: &[EquivalenceClass]) -> Vec<ClassEntry> {
    classes
        .iter()
        .map(|c| ClassEntry {
            members: view.pids(&c.members).map(str::to_string).collect(),
            cells: view
                .quasi
                .iter()
                .zip(&c.cells)
                .map(|(q, cell)| (q.name.clone(), cell.to_string()))
                .collect(),
            retained_terms: c.retained.iter().map(|t| view.term(*t).clone()).collect(),
            suppressed_terms: c.suppressed.len(),
        })
        .collect()
}
