//! Types shared by ingestion, partitioning, recoding and metrics.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// One annotated span of a textual cell. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveTerm {
    pub row_id: usize,
    pub attribute: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub entity_type: String,
    /// Set when the term repeats the value of its linked relational column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<Redundancy>,
}

impl SensitiveTerm {
    pub fn is_redundant(&self) -> bool {
        self.redundancy.is_some()
    }

    pub fn key(&self) -> TermKey {
        TermKey::new(&self.text, &self.entity_type)
    }
}

/// Where a redundant term repeats a relational value: the schema index of the
/// linked column and the character range of the repeated value inside the
/// term text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Redundancy {
    pub attribute: usize,
    pub start: usize,
    pub end: usize,
}

/// Identity of a sensitive term in a person's term set: lower-cased text plus
/// entity type. Orders lexicographically on `(text, entity_type)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermKey {
    pub text: String,
    pub entity_type: String,
}

impl TermKey {
    pub fn new(text: &str, entity_type: &str) -> Self {
        TermKey {
            text: text.trim().to_lowercase(),
            entity_type: entity_type.to_string(),
        }
    }
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.text, self.entity_type)
    }
}

/// Index into a [`crate::ingest::PersonView`]'s term vocabulary. Ids are
/// assigned in [`TermKey`] order, so comparing ids compares keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Distinct values of one quasi-identifier across a person's tuples, sorted
/// ascending.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSet {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Date(Vec<NaiveDate>),
}

impl CellSet {
    pub fn len(&self) -> usize {
        match self {
            CellSet::Numeric(v) => v.len(),
            CellSet::Categorical(v) => v.len(),
            CellSet::Date(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position on the attribute's numeric axis (dates in days). `None` for
    /// categorical cells.
    pub fn ordinals(&self) -> Option<Vec<f64>> {
        match self {
            CellSet::Numeric(v) => Some(v.clone()),
            CellSet::Date(v) => Some(v.iter().map(|d| date_ordinal(*d)).collect()),
            CellSet::Categorical(_) => None,
        }
    }

    /// Smallest element on the numeric axis.
    pub fn min_ordinal(&self) -> Option<f64> {
        match self {
            CellSet::Numeric(v) => v.first().copied(),
            CellSet::Date(v) => v.first().map(|d| date_ordinal(*d)),
            CellSet::Categorical(_) => None,
        }
    }

    pub fn max_ordinal(&self) -> Option<f64> {
        match self {
            CellSet::Numeric(v) => v.last().copied(),
            CellSet::Date(v) => v.last().map(|d| date_ordinal(*d)),
            CellSet::Categorical(_) => None,
        }
    }

    pub fn min_category(&self) -> Option<&str> {
        match self {
            CellSet::Categorical(v) => v.first().map(String::as_str),
            _ => None,
        }
    }
}

pub fn date_ordinal(d: NaiveDate) -> f64 {
    f64::from(d.num_days_from_ce())
}

/// One row of the person-centric view.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub pid: String,
    /// One entry per quasi-identifier, in schema order.
    pub cells: Vec<CellSet>,
    /// Non-redundant terms, sorted by id.
    pub terms: Vec<TermId>,
    pub tuple_ids: Vec<usize>,
}

impl PersonRecord {
    pub fn has_term(&self, term: TermId) -> bool {
        self.terms.binary_search(&term).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "on", rename_all = "kebab-case")]
pub enum SplitDescriptor {
    Attribute { name: String },
    Term { text: String, entity_type: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// A group of person-record indices and the splits that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub members: Vec<usize>,
    pub lineage: Vec<(SplitDescriptor, Side)>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Node of the date hierarchy: day leaves, months, years and the root range
/// of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DateNode {
    Day(NaiveDate),
    Month { year: i32, month: u32 },
    Year(i32),
    YearRange { from: i32, to: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DateLevel {
    Day,
    Month,
    Year,
    YearRange,
}

impl DateNode {
    pub fn level(&self) -> DateLevel {
        match self {
            DateNode::Day(_) => DateLevel::Day,
            DateNode::Month { .. } => DateLevel::Month,
            DateNode::Year(_) => DateLevel::Year,
            DateNode::YearRange { .. } => DateLevel::YearRange,
        }
    }

    /// Whether `date` is a leaf below this node.
    pub fn covers(&self, date: NaiveDate) -> bool {
        match *self {
            DateNode::Day(d) => d == date,
            DateNode::Month { year, month } => date.year() == year && date.month() == month,
            DateNode::Year(y) => date.year() == y,
            DateNode::YearRange { from, to } => (from..=to).contains(&date.year()),
        }
    }

    /// Parses a rendered label back into a node.
    pub fn parse_label(label: &str) -> Option<DateNode> {
        let label = label.trim();
        if let Some(inner) = label.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let (a, b) = inner.split_once('-')?;
            return Some(DateNode::YearRange {
                from: a.parse().ok()?,
                to: b.parse().ok()?,
            });
        }
        let parts: Vec<&str> = label.split('-').collect();
        match parts.as_slice() {
            [y] if y.len() == 4 => Some(DateNode::Year(y.parse().ok()?)),
            [y, m] if y.len() == 4 && m.len() == 2 => {
                let year = y.parse().ok()?;
                let month: u32 = m.parse().ok()?;
                (1..=12).contains(&month).then_some(DateNode::Month { year, month })
            }
            [_, _, _] => NaiveDate::parse_from_str(label, "%Y-%m-%d").ok().map(DateNode::Day),
            _ => None,
        }
    }
}

impl fmt::Display for DateNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DateNode::Day(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            DateNode::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            DateNode::Year(y) => write!(f, "{y:04}"),
            DateNode::YearRange { from, to } => write!(f, "[{from:04}-{to:04}]"),
        }
    }
}

/// Generalized value of one quasi-identifier for an equivalence class.
#[derive(Debug, Clone, PartialEq)]
pub enum RecodedCell {
    NumericRange {
        lo: f64,
        hi: f64,
    },
    /// Distinct values in descending byte order.
    CategorySet(Vec<String>),
    DateNode(DateNode),
    Scalar(String),
}

impl RecodedCell {
    /// False when the cell still shows an original value unchanged.
    pub fn is_generalized(&self) -> bool {
        match self {
            RecodedCell::NumericRange { .. } | RecodedCell::CategorySet(_) => true,
            RecodedCell::DateNode(n) => n.level() != DateLevel::Day,
            RecodedCell::Scalar(_) => false,
        }
    }
}

impl fmt::Display for RecodedCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecodedCell::NumericRange { lo, hi } => {
                write!(f, "[{}-{}]", format_number(*lo), format_number(*hi))
            }
            RecodedCell::CategorySet(values) => write!(f, "({})", values.join(",")),
            RecodedCell::DateNode(n) => write!(f, "{n}"),
            RecodedCell::Scalar(v) => f.write_str(v),
        }
    }
}

/// Integers print without a fractional part.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Descending byte order, the order category sets are rendered in.
pub(crate) fn category_order(a: &str, b: &str) -> Ordering {
    b.cmp(a)
}
