use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::SensitiveTerm;
use crate::schema::AttributeKind;

/// Wire format of one annotation line.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    row_id: usize,
    attribute: String,
    start: usize,
    end: usize,
    text: String,
    label: String,
}

/// Sensitive terms of a dataset, ordered by `(row_id, attribute, start)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    terms: Vec<SensitiveTerm>,
    /// Schema index of each term's attribute.
    columns: Vec<usize>,
}

impl AnnotationSet {
    /// Validates terms against the dataset and sorts them.
    pub fn new(dataset: &Dataset, terms: Vec<SensitiveTerm>) -> Result<Self> {
        Self::build(dataset, terms.into_iter().enumerate().map(|(i, t)| (i + 1, t)))
    }

    fn build(dataset: &Dataset, terms: impl Iterator<Item = (usize, SensitiveTerm)>) -> Result<Self> {
        let schema = dataset.schema();
        let mut located = Vec::new();
        for (line, term) in terms {
            let err = |reason: String| Error::Annotation { line, reason };
            if term.row_id >= dataset.len() {
                return Err(err(format!(
                    "row_id {} out of range (dataset has {} rows)",
                    term.row_id,
                    dataset.len()
                )));
            }
            let column = schema
                .position(&term.attribute)
                .filter(|&i| schema.attributes[i].kind == AttributeKind::Textual)
                .ok_or_else(|| err(format!("attribute {:?} is not textual", term.attribute)))?;
            if term.start >= term.end {
                return Err(err("empty span".into()));
            }
            let cell = dataset.cell(term.row_id, column);
            let span = char_slice(cell, term.start, term.end).ok_or_else(|| {
                err(format!(
                    "span [{}, {}) exceeds cell length {}",
                    term.start,
                    term.end,
                    cell.chars().count()
                ))
            })?;
            if span != term.text {
                return Err(err(format!(
                    "span/text mismatch: span holds {span:?}, annotation says {:?}",
                    term.text
                )));
            }
            located.push((line, column, term));
        }
        located.sort_by_key(|(_, c, t)| (t.row_id, *c, t.start));
        for pair in located.windows(2) {
            let (_, ca, a) = &pair[0];
            let (line, cb, b) = &pair[1];
            if a.row_id == b.row_id && ca == cb && b.start < a.end {
                return Err(Error::Annotation {
                    line: *line,
                    reason: format!(
                        "span [{}, {}) overlaps [{}, {}) in row {}",
                        b.start, b.end, a.start, a.end, a.row_id
                    ),
                });
            }
        }
        let (columns, terms) = located.into_iter().map(|(_, c, t)| (c, t)).unzip();
        Ok(AnnotationSet { terms, columns })
    }

    pub fn from_reader<R: Read>(reader: R, dataset: &Dataset) -> Result<Self> {
        let mut parsed = Vec::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Annotation {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawAnnotation = serde_json::from_str(&line).map_err(|e| Error::Annotation {
                line: line_no,
                reason: e.to_string(),
            })?;
            parsed.push((
                line_no,
                SensitiveTerm {
                    row_id: raw.row_id,
                    attribute: raw.attribute,
                    start: raw.start,
                    end: raw.end,
                    text: raw.text,
                    entity_type: raw.label,
                    redundancy: None,
                },
            ));
        }
        Self::build(dataset, parsed.into_iter())
    }

    pub fn terms(&self) -> &[SensitiveTerm] {
        &self.terms
    }

    /// Schema index of the textual column holding `terms()[i]`.
    pub fn column(&self, i: usize) -> usize {
        self.columns[i]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Index range of the terms annotated in `row_id`.
    pub fn row_range(&self, row_id: usize) -> std::ops::Range<usize> {
        let lo = self.terms.partition_point(|t| t.row_id < row_id);
        let hi = self.terms.partition_point(|t| t.row_id <= row_id);
        lo..hi
    }

    pub fn for_row(&self, row_id: usize) -> &[SensitiveTerm] {
        &self.terms[self.row_range(row_id)]
    }

    /// Terms of one textual cell.
    pub fn for_cell(&self, row_id: usize, column: usize) -> Vec<&SensitiveTerm> {
        self.row_range(row_id)
            .filter(|&i| self.columns[i] == column)
            .map(|i| &self.terms[i])
            .collect()
    }

    /// Keeps only terms whose entity type is in `types`.
    pub fn retain_entity_types(&self, types: &BTreeSet<String>) -> AnnotationSet {
        let (columns, terms) = self
            .columns
            .iter()
            .zip(&self.terms)
            .filter(|(_, t)| types.contains(&t.entity_type))
            .map(|(c, t)| (*c, t.clone()))
            .unzip();
        AnnotationSet { terms, columns }
    }

    pub(crate) fn terms_mut(&mut self) -> &mut [SensitiveTerm] {
        &mut self.terms
    }

    /// Writes the set in the JSON-lines wire format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            let line = serde_json::json!({
                "row_id": t.row_id,
                "attribute": t.attribute,
                "start": t.start,
                "end": t.end,
                "text": t.text,
                "label": t.entity_type,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Reads and validates a JSON-lines annotation file against `dataset`.
pub fn load_annotations(path: impl AsRef<Path>, dataset: &Dataset) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    AnnotationSet::from_reader(file, dataset)
}

/// Substring by Unicode scalar offsets.
pub(crate) fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    let mut indices = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&s[b_start..b_end])
}
