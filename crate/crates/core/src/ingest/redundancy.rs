//! Flags terms that repeat a relational value of their own tuple.
//!
//! A term matches a relational value when, ignoring case and surrounding
//! whitespace, the two strings are equal or the value occurs inside the term
//! as a whole token ("36 years old" repeats age "36"). Date columns also
//! match on the year and year-month prefixes of the cell, so "2004" repeats
//! "2004-01-19".

use rayon::prelude::*;

use crate::ingest::{AnnotationSet, Dataset};
use crate::model::{format_number, Redundancy, SensitiveTerm};
use crate::schema::AttributeKind;

/// Returns a copy of `annotations` with redundancy flags set.
pub fn detect_redundant(dataset: &Dataset, annotations: &AnnotationSet) -> AnnotationSet {
    let mut out = annotations.clone();
    out.terms_mut()
        .par_iter_mut()
        .for_each(|term| term.redundancy = find_redundancy(dataset, term));
    out
}

fn find_redundancy(dataset: &Dataset, term: &SensitiveTerm) -> Option<Redundancy> {
    let schema = dataset.schema();
    let attribute = schema.linked_attribute(&term.entity_type)?;
    let (start, end) = relational_values(dataset, term.row_id, attribute)
        .iter()
        .find_map(|v| match_value(&term.text, v))?;
    Some(Redundancy { attribute, start, end })
}

/// Renderings of a relational cell a text may repeat, longest first.
fn relational_values(dataset: &Dataset, row_id: usize, attribute: usize) -> Vec<String> {
    let raw = dataset.cell(row_id, attribute).to_string();
    let mut values = vec![raw.clone()];
    match dataset.schema().attributes[attribute].kind {
        AttributeKind::QuasiNumeric => {
            if let Some(v) = dataset.numeric(row_id, attribute) {
                values.push(format_number(v));
            }
        }
        AttributeKind::QuasiDate => {
            if let Some(d) = dataset.date(row_id, attribute) {
                values.push(d.format("%Y-%m-%d").to_string());
                values.push(d.format("%Y-%m").to_string());
                values.push(d.format("%Y").to_string());
            }
        }
        _ => {}
    }
    let mut seen = std::collections::HashSet::new();
    values.retain(|v| !v.is_empty() && seen.insert(v.clone()));
    values.sort_by_key(|v| std::cmp::Reverse(v.chars().count()));
    values
}

/// Character range of `value` inside `term`, matched case-insensitively
/// either as the whole (trimmed) term or as a whole-token occurrence.
pub fn match_value(term: &str, value: &str) -> Option<(usize, usize)> {
    let chars: Vec<char> = term.chars().collect();
    let needle: Vec<char> = value.trim().chars().collect();
    if needle.is_empty() {
        return None;
    }
    let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
    let trail = chars[lead..].iter().rev().take_while(|c| c.is_whitespace()).count();
    let core = &chars[lead..chars.len() - trail];
    if eq_ignore_case(core, &needle) {
        return Some((lead, lead + core.len()));
    }
    if needle.len() > chars.len() {
        return None;
    }
    (0..=chars.len() - needle.len()).find_map(|i| {
        let j = i + needle.len();
        let left_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let right_ok = j == chars.len() || !chars[j].is_alphanumeric();
        (left_ok && right_ok && eq_ignore_case(&chars[i..j], &needle)).then_some((i, j))
    })
}

fn eq_ignore_case(a: &[char], b: &[char]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x == y || x.to_lowercase().eq(y.to_lowercase()))
}
