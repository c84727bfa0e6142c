//! Independent check of a written release against the original inputs.
//!
//! The audit does not look at partitions. It aligns release rows with input
//! rows, parses every recoded cell, recovers what each annotated span became
//! by matching the untouched text around it, and then checks that every
//! group of persons sharing the same released quasi-identifiers and the same
//! kept terms has at least `k` members.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AnnotationSet, Dataset, PersonView};
use crate::model::{CellSet, DateNode, RecodedCell, SensitiveTerm, TermId, TermKey};
use crate::recode::{EquivalenceClass, Release};
use crate::schema::AttributeKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AuditViolation {
    /// A released cell that cannot be parsed or does not cover the original.
    BadCell { row: usize, column: String, value: String },
    /// A column copied verbatim that differs from the input.
    AlteredValue { row: usize, column: String },
    /// A person whose rows carry different quasi-identifier values.
    InconsistentPerson { pid: String },
    /// A text whose spans could not be matched to an allowed rewrite.
    UnexpectedText { row: usize, column: String },
    /// A group of persons with identical released data smaller than k.
    SmallGroup { size: usize, members: Vec<String> },
    /// A kept term shared by fewer than k persons with the same quasi cells.
    TermLeak { pid: String, term: String, support: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub k: usize,
    pub passed: bool,
    pub persons: usize,
    pub groups: usize,
    pub min_group_size: usize,
    pub kept_terms: usize,
    pub suppressed_terms: usize,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// What the audit recovered for one person.
#[derive(Debug, Clone, Default)]
struct PersonState {
    cells: Option<Vec<String>>,
    kept: BTreeSet<TermKey>,
}

/// Released data regrouped per person.
#[derive(Debug, Clone)]
pub struct ReleaseView {
    /// Released quasi cells of each person record, in quasi order.
    pub cells: Vec<Vec<RecodedCell>>,
    /// Non-redundant terms each person still shows.
    pub kept: Vec<BTreeSet<TermKey>>,
    pub violations: Vec<AuditViolation>,
    kept_count: usize,
    suppressed_count: usize,
}

/// Parses a released quasi cell of the given kind. `domain` lists the
/// attribute's distinct input values, which disambiguates category sets
/// whose members contain commas.
pub fn parse_cell(kind: AttributeKind, text: &str, domain: &BTreeSet<String>) -> Option<RecodedCell> {
    match kind {
        AttributeKind::QuasiNumeric => parse_numeric(text),
        AttributeKind::QuasiDate => DateNode::parse_label(text).map(RecodedCell::DateNode),
        _ => parse_categorical(text, domain),
    }
}

fn parse_numeric(text: &str) -> Option<RecodedCell> {
    let text = text.trim();
    if let Some(inner) = text.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        // The separator is the first '-' that leaves two numbers.
        return inner.char_indices().skip(1).find_map(|(i, c)| {
            if c != '-' {
                return None;
            }
            let lo: f64 = inner[..i].parse().ok()?;
            let hi: f64 = inner[i + 1..].parse().ok()?;
            (lo < hi).then_some(RecodedCell::NumericRange { lo, hi })
        });
    }
    text.parse::<f64>().ok().map(|_| RecodedCell::Scalar(text.to_string()))
}

fn parse_categorical(text: &str, domain: &BTreeSet<String>) -> Option<RecodedCell> {
    if domain.contains(text) {
        return Some(RecodedCell::Scalar(text.to_string()));
    }
    let inner = text.strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').collect();
    // Fewest-pieces segmentation of the comma-separated parts into domain
    // values; best[i] is the segmentation of parts[..i].
    let mut best: Vec<Option<Vec<String>>> = vec![None; parts.len() + 1];
    best[0] = Some(Vec::new());
    for end in 1..=parts.len() {
        for start in 0..end {
            let Some(prefix) = &best[start] else { continue };
            let value = parts[start..end].join(",");
            if domain.contains(&value) && best[end].as_ref().is_none_or(|b| b.len() > prefix.len() + 1) {
                let mut v = prefix.clone();
                v.push(value);
                best[end] = Some(v);
            }
        }
    }
    let values = best.pop().flatten()?;
    let distinct: BTreeSet<&String> = values.iter().collect();
    (values.len() >= 2 && distinct.len() == values.len()).then_some(RecodedCell::CategorySet(values))
}

fn cell_covers(cell: &RecodedCell, original: &CellSet) -> bool {
    match (cell, original) {
        (RecodedCell::NumericRange { lo, hi }, CellSet::Numeric(v)) => v.iter().all(|x| lo <= x && x <= hi),
        (RecodedCell::Scalar(s), CellSet::Numeric(v)) => {
            let s: f64 = s.parse().unwrap_or(f64::NAN);
            v.iter().all(|x| *x == s)
        }
        (RecodedCell::CategorySet(set), CellSet::Categorical(v)) => v.iter().all(|x| set.contains(x)),
        (RecodedCell::Scalar(s), CellSet::Categorical(v)) => v.iter().all(|x| x == s),
        (RecodedCell::DateNode(n), CellSet::Date(v)) => v.iter().all(|d| n.covers(*d)),
        _ => false,
    }
}

/// Allowed renderings of a span, each tagged with whether it keeps the term.
fn candidates(term: &SensitiveTerm, linked_cell: Option<(&RecodedCell, &str)>) -> Vec<(String, bool)> {
    if let Some(r) = term.redundancy {
        let Some((cell, rendered)) = linked_cell else {
            return Vec::new();
        };
        if !cell.is_generalized() {
            return vec![(term.text.clone(), false)];
        }
        let chars: Vec<char> = term.text.chars().collect();
        let mut out: String = chars[..r.start].iter().collect();
        out.push_str(rendered);
        out.extend(&chars[r.end..]);
        return vec![(out, false)];
    }
    let placeholder = term.entity_type.to_lowercase();
    let mut capital = placeholder.chars();
    let capital: String = capital
        .next()
        .map(|c| c.to_uppercase().chain(capital).collect())
        .unwrap_or_default();
    let mut out = vec![(placeholder, false), (capital, false), (term.text.clone(), true)];
    let mut seen = BTreeSet::new();
    out.retain(|(s, _)| seen.insert(s.clone()));
    out
}

/// Finds, for each span, which candidate the released text used. Segments
/// between spans must appear verbatim.
fn recover_spans(released: &[char], segments: &[Vec<char>], options: &[Vec<(String, bool)>]) -> Option<Vec<bool>> {
    fn go(
        released: &[char],
        pos: usize,
        i: usize,
        segments: &[Vec<char>],
        options: &[Vec<(String, bool)>],
        out: &mut Vec<bool>,
    ) -> bool {
        let seg = &segments[i];
        if !released[pos..].starts_with(seg) {
            return false;
        }
        let pos = pos + seg.len();
        if i == options.len() {
            return pos == released.len();
        }
        for (text, kept) in &options[i] {
            let c: Vec<char> = text.chars().collect();
            if released[pos..].starts_with(&c) {
                out.push(*kept);
                if go(released, pos + c.len(), i + 1, segments, options, out) {
                    return true;
                }
                out.pop();
            }
        }
        false
    }
    let mut out = Vec::with_capacity(options.len());
    go(released, 0, 0, segments, options, &mut out).then_some(out)
}

/// Splits `text` around the spans into the literal segments between them.
fn literal_segments(text: &str, spans: &[&SensitiveTerm]) -> Vec<Vec<char>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::with_capacity(spans.len() + 1);
    let mut pos = 0;
    for s in spans {
        out.push(chars[pos..s.start].to_vec());
        pos = s.end;
    }
    out.push(chars[pos..].to_vec());
    out
}

/// Reads a release back into per-person released data, collecting every
/// structural problem found on the way.
pub fn read_release(
    dataset: &Dataset,
    annotations: &AnnotationSet,
    view: &PersonView,
    release: &Release,
) -> Result<ReleaseView> {
    let schema = dataset.schema();
    if release.rows.len() != dataset.len() {
        return Err(Error::Release(format!(
            "{} rows released for {} input rows",
            release.rows.len(),
            dataset.len()
        )));
    }
    let mut column_of: HashMap<usize, usize> = HashMap::new();
    for (c, name) in release.header.iter().enumerate() {
        let a = schema
            .position(name)
            .ok_or_else(|| Error::Release(format!("unknown column {name:?}")))?;
        if column_of.insert(a, c).is_some() {
            return Err(Error::Release(format!("duplicate column {name:?}")));
        }
    }
    for &a in dataset.column_attributes() {
        let kind = schema.attributes[a].kind;
        if kind != AttributeKind::DirectIdentifier && !column_of.contains_key(&a) {
            return Err(Error::Release(format!(
                "column {:?} missing from the release",
                schema.attributes[a].name
            )));
        }
    }
    if let Some((i, _)) = release
        .rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != release.header.len())
    {
        return Err(Error::Release(format!("row {i} has the wrong number of fields")));
    }

    let domains: Vec<BTreeSet<String>> = view
        .quasi
        .iter()
        .map(|q| dataset.rows().iter().map(|r| r.cells[q.index].clone()).collect())
        .collect();

    let mut violations = Vec::new();
    let mut persons = vec![PersonState::default(); view.len()];
    let mut kept_count = 0;
    let mut suppressed_count = 0;

    for (row, released) in dataset.rows().iter().zip(&release.rows) {
        let p = view.row_person[row.row_id];
        let rid = row.row_id;
        let mut parsed: Vec<Option<(RecodedCell, &str)>> = Vec::with_capacity(view.quasi.len());
        for (q, attr) in view.quasi.iter().enumerate() {
            let value = released[column_of[&attr.index]].as_str();
            let cell = parse_cell(attr.kind, value, &domains[q]).filter(|c| cell_covers(c, &view.records[p].cells[q]));
            if cell.is_none() {
                violations.push(AuditViolation::BadCell {
                    row: rid,
                    column: attr.name.clone(),
                    value: value.to_string(),
                });
            }
            parsed.push(cell.map(|c| (c, value)));
        }
        let rendered: Vec<String> = view
            .quasi
            .iter()
            .map(|attr| released[column_of[&attr.index]].clone())
            .collect();
        match &persons[p].cells {
            None => persons[p].cells = Some(rendered),
            Some(prev) if *prev != rendered => {
                violations.push(AuditViolation::InconsistentPerson {
                    pid: view.records[p].pid.clone(),
                });
            }
            Some(_) => {}
        }

        for (a, attr) in schema.attributes.iter().enumerate() {
            let Some(&c) = column_of.get(&a) else { continue };
            match attr.kind {
                AttributeKind::DirectIdentifier | AttributeKind::Insensitive => {
                    if released[c] != row.cells[a] {
                        violations.push(AuditViolation::AlteredValue {
                            row: rid,
                            column: attr.name.clone(),
                        });
                    }
                }
                AttributeKind::Textual => {
                    let spans = annotations.for_cell(rid, a);
                    let options: Vec<_> = spans
                        .iter()
                        .map(|t| {
                            let linked = t.redundancy.and_then(|r| {
                                let q = view.quasi_position(r.attribute)?;
                                parsed[q].as_ref().map(|(c, s)| (c, *s))
                            });
                            candidates(t, linked)
                        })
                        .collect();
                    let released_chars: Vec<char> = released[c].chars().collect();
                    let segments = literal_segments(&row.cells[a], &spans);
                    match recover_spans(&released_chars, &segments, &options) {
                        Some(kept) => {
                            for (t, k) in spans.iter().zip(kept) {
                                if t.is_redundant() {
                                    continue;
                                }
                                if k {
                                    kept_count += 1;
                                    persons[p].kept.insert(t.key());
                                } else {
                                    suppressed_count += 1;
                                }
                            }
                        }
                        None => {
                            violations.push(AuditViolation::UnexpectedText {
                                row: rid,
                                column: attr.name.clone(),
                            });
                            // Assume the worst: every term shows through.
                            for t in spans.iter().filter(|t| !t.is_redundant()) {
                                persons[p].kept.insert(t.key());
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let cells = persons
        .iter()
        .map(|s| {
            let rendered = s.cells.as_ref().expect("every person has a row");
            view.quasi
                .iter()
                .enumerate()
                .map(|(q, attr)| {
                    parse_cell(attr.kind, &rendered[q], &domains[q])
                        .unwrap_or_else(|| RecodedCell::Scalar(rendered[q].clone()))
                })
                .collect()
        })
        .collect();
    Ok(ReleaseView {
        cells,
        kept: persons.into_iter().map(|s| s.kept).collect(),
        violations,
        kept_count,
        suppressed_count,
    })
}

impl ReleaseView {
    /// Persons grouped by identical released cells and kept terms, in order
    /// of first appearance.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut index: BTreeMap<(String, &BTreeSet<TermKey>), usize> = BTreeMap::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for p in 0..self.cells.len() {
            let key = (render(&self.cells[p]), &self.kept[p]);
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(p);
        }
        groups
    }

    /// Equivalence classes as seen from the release, for loss computation.
    pub fn classes(&self, view: &PersonView) -> Vec<EquivalenceClass> {
        self.groups()
            .into_iter()
            .map(|members| {
                let first = members[0];
                let retained: Vec<TermId> = self.kept[first].iter().filter_map(|k| view.term_id(k)).collect();
                let suppressed: BTreeSet<TermId> = members
                    .iter()
                    .flat_map(|&m| view.records[m].terms.iter().copied())
                    .filter(|t| retained.binary_search(t).is_err())
                    .collect();
                EquivalenceClass {
                    cells: self.cells[first].clone(),
                    members,
                    retained,
                    suppressed: suppressed.into_iter().collect(),
                }
            })
            .collect()
    }
}

fn render(cells: &[RecodedCell]) -> String {
    cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\u{1f}")
}

/// Full audit of `release` at level `k`.
pub fn audit_release(
    dataset: &Dataset,
    annotations: &AnnotationSet,
    view: &PersonView,
    release: &Release,
    k: usize,
) -> Result<AuditReport> {
    let rv = read_release(dataset, annotations, view, release)?;
    let mut violations = rv.violations.clone();
    let groups = rv.groups();
    for g in &groups {
        if g.len() < k {
            violations.push(AuditViolation::SmallGroup {
                size: g.len(),
                members: view.pids(g).map(str::to_string).collect(),
            });
        }
    }

    // Term support among persons sharing the same released quasi cells.
    let mut by_cells: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for p in 0..view.len() {
        by_cells.entry(render(&rv.cells[p])).or_default().push(p);
    }
    for peers in by_cells.values() {
        let mut support: BTreeMap<&TermKey, usize> = BTreeMap::new();
        for &p in peers {
            for t in &rv.kept[p] {
                *support.entry(t).or_insert(0) += 1;
            }
        }
        for &p in peers {
            for t in &rv.kept[p] {
                if support[t] < k {
                    violations.push(AuditViolation::TermLeak {
                        pid: view.records[p].pid.clone(),
                        term: t.text.clone(),
                        support: support[t],
                    });
                }
            }
        }
    }

    Ok(AuditReport {
        k,
        passed: violations.is_empty(),
        persons: view.len(),
        groups: groups.len(),
        min_group_size: groups.iter().map(Vec::len).min().unwrap_or(0),
        kept_terms: rv.kept_count,
        suppressed_terms: rv.suppressed_count,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_numeric_cells() {
        let none = BTreeSet::new();
        let p = |s| parse_cell(AttributeKind::QuasiNumeric, s, &none);
        assert_eq!(p("[24-36]"), Some(RecodedCell::NumericRange { lo: 24.0, hi: 36.0 }));
        assert_eq!(p("[-5--2]"), Some(RecodedCell::NumericRange { lo: -5.0, hi: -2.0 }));
        assert_eq!(p("[1.5-2]"), Some(RecodedCell::NumericRange { lo: 1.5, hi: 2.0 }));
        assert_eq!(p("24"), Some(RecodedCell::Scalar("24".into())));
        assert_eq!(p("[36-24]"), None);
        assert_eq!(p("abc"), None);
    }

    #[test]
    fn parses_category_sets_against_the_domain() {
        let d = domain(&["Student", "Education", "a,b", "c"]);
        let p = |s| parse_cell(AttributeKind::QuasiCategorical, s, &d);
        assert_eq!(
            p("(Student,Education)"),
            Some(RecodedCell::CategorySet(vec!["Student".into(), "Education".into()]))
        );
        assert_eq!(
            p("(c,a,b)"),
            Some(RecodedCell::CategorySet(vec!["c".into(), "a,b".into()]))
        );
        assert_eq!(p("Student"), Some(RecodedCell::Scalar("Student".into())));
        assert_eq!(p("(Student,Nope)"), None);
        assert_eq!(p("(Student)"), None);
    }

    #[test]
    fn recovers_span_choices() {
        let seg = |s: &str| s.chars().collect::<Vec<_>>();
        let released: Vec<char> = "Date, I met person. Ben said hi!".chars().collect();
        let segments = vec![seg(""), seg(", I met "), seg(". "), seg(" said hi!")];
        let opt = |text: &str, label: &str| {
            vec![
                (label.to_lowercase(), false),
                (text.to_string(), true),
                (
                    {
                        let mut c = label.to_lowercase();
                        c[..1].make_ascii_uppercase();
                        c
                    },
                    false,
                ),
            ]
        };
        let options = vec![opt("Four days ago", "DATE"), opt("Ben", "PERSON"), opt("Ben", "PERSON")];
        assert_eq!(
            recover_spans(&released, &segments, &options),
            Some(vec![false, false, true])
        );
        let tampered: Vec<char> = "Date, I met Bob. Ben said hi!".chars().collect();
        assert_eq!(recover_spans(&tampered, &segments, &options), None);
    }
}
