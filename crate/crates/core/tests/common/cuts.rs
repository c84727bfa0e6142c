//! Exhaustive search for an allowable cut of a partition, written against
//! the plain record data rather than the engine's split functions.

use std::collections::{BTreeMap, BTreeSet};

use hetanon::ingest::PersonView;
use hetanon::model::CellSet;

#[derive(Debug, Clone, Copy)]
pub struct Families {
    pub relational: bool,
    pub textual: bool,
}

/// Sort key of a record's cell: its smallest element.
fn representative(cell: &CellSet) -> Key {
    match cell {
        CellSet::Numeric(v) => Key::Num(v.iter().cloned().fold(f64::INFINITY, f64::min)),
        CellSet::Date(v) => Key::Text(v.iter().min().unwrap().format("%Y-%m-%d").to_string()),
        CellSet::Categorical(v) => Key::Text(v.iter().min().unwrap().clone()),
    }
}

#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum Key {
    Num(f64),
    Text(String),
}

fn sides<F: Fn(&Key) -> bool>(keys: &[Key], left: F) -> (usize, usize) {
    let l = keys.iter().filter(|k| left(k)).count();
    (l, keys.len() - l)
}

/// Describes an allowable cut of `members`, if one exists among the median
/// cuts of each attribute and the presence/absence cuts of each term.
pub fn find_allowable_cut(view: &PersonView, members: &[usize], k: usize, families: Families) -> Option<String> {
    let n = members.len();
    let ok = |(l, r): (usize, usize)| l >= k && r >= k;
    if families.relational {
        for (q, attr) in view.quasi.iter().enumerate() {
            let keys: Vec<Key> = members
                .iter()
                .map(|&m| representative(&view.records[m].cells[q]))
                .collect();
            let categorical = matches!(view.records[members[0]].cells[q], CellSet::Categorical(_));
            let cut = if categorical {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for key in &keys {
                    if let Key::Text(s) = key {
                        *counts.entry(s.clone()).or_default() += 1;
                    }
                }
                let values: Vec<(String, usize)> = counts.into_iter().collect();
                let mut best: Option<(usize, usize)> = None;
                let mut acc = 0;
                for (i, (_, c)) in values.iter().enumerate().take(values.len().saturating_sub(1)) {
                    acc += c;
                    let gap = (2 * acc).abs_diff(n);
                    if best.is_none_or(|(g, _)| gap < g) {
                        best = Some((gap, i));
                    }
                }
                best.map(|(_, i)| {
                    let last = Key::Text(values[i].0.clone());
                    sides(&keys, |k| *k <= last)
                })
            } else {
                let mut sorted = keys.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = sorted[n / 2].clone();
                let strict = sides(&keys, |k| *k < median);
                let cut = if strict.0 > 0 {
                    strict
                } else {
                    sides(&keys, |k| *k <= median)
                };
                (cut.0 > 0 && cut.1 > 0).then_some(cut)
            };
            if let Some(c) = cut.filter(|c| ok(*c)) {
                return Some(format!("attribute {} splits {}|{}", attr.name, c.0, c.1));
            }
        }
    }
    if families.textual {
        let terms: BTreeSet<_> = members.iter().flat_map(|&m| view.records[m].terms.iter()).collect();
        for t in terms {
            let f = members.iter().filter(|&&m| view.records[m].terms.contains(t)).count();
            if ok((f, n - f)) {
                return Some(format!("term {:?} splits {}|{}", view.term(*t).text, f, n - f));
            }
        }
    }
    None
}
