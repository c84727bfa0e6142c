//! Strict top-down partitioning of the person-centric view.
//!
//! Two strategies share one recursive driver: Mondrian, which splits on
//! whichever of the widest relational attribute or the most frequent term
//! wins the λ-weighted comparison of normalized spans, and GDF, which only
//! splits on presence/absence of the most frequent term.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::PersonView;
use crate::model::{Partition, Side, SplitDescriptor, TermId};
use crate::schema::AttributeKind;

/// Global extent of each quasi-identifier, the denominator of spans.
#[derive(Debug, Clone, PartialEq)]
pub enum Extent {
    Range { min: f64, max: f64 },
    Distinct(usize),
}

impl Extent {
    pub fn width(&self) -> f64 {
        match self {
            Extent::Range { min, max } => max - min,
            Extent::Distinct(n) => *n as f64,
        }
    }
}

/// Global extents of the view, computed once per run.
#[derive(Debug, Clone)]
pub struct Extents {
    pub attributes: Vec<Extent>,
    pub terms: usize,
}

impl Extents {
    pub fn of(view: &PersonView) -> Self {
        let all: Vec<usize> = (0..view.len()).collect();
        let attributes = (0..view.quasi.len())
            .map(|q| match view.quasi[q].kind {
                AttributeKind::QuasiCategorical => Extent::Distinct(distinct_categories(view, &all, q)),
                _ => {
                    let (min, max) = ordinal_bounds(view, &all, q).unwrap_or((0.0, 0.0));
                    Extent::Range { min, max }
                }
            })
            .collect();
        Extents {
            attributes,
            terms: view.vocab.len(),
        }
    }
}

fn ordinal_bounds(view: &PersonView, members: &[usize], q: usize) -> Option<(f64, f64)> {
    members.iter().fold(None, |acc, &m| {
        let cell = &view.records[m].cells[q];
        let (lo, hi) = (cell.min_ordinal()?, cell.max_ordinal()?);
        Some(match acc {
            None => (lo, hi),
            Some((a, b)) => (f64::min(a, lo), f64::max(b, hi)),
        })
    })
}

fn distinct_categories(view: &PersonView, members: &[usize], q: usize) -> usize {
    let mut seen = BTreeSet::new();
    for &m in members {
        if let crate::model::CellSet::Categorical(v) = &view.records[m].cells[q] {
            seen.extend(v.iter().map(String::as_str));
        }
    }
    seen.len()
}

/// Width of quasi-identifier `q` within `members` relative to its global
/// width. Set-valued cells contribute every element.
pub fn normalized_span(view: &PersonView, extents: &Extents, members: &[usize], q: usize) -> f64 {
    let global = extents.attributes[q].width();
    if global <= 0.0 || members.is_empty() {
        return 0.0;
    }
    let local = match extents.attributes[q] {
        Extent::Distinct(_) => distinct_categories(view, members, q) as f64,
        Extent::Range { .. } => ordinal_bounds(view, members, q).map_or(0.0, |(lo, hi)| hi - lo),
    };
    local / global
}

/// Distinct terms among the members' term sets relative to the global count.
pub fn textual_span(view: &PersonView, extents: &Extents, members: &[usize]) -> f64 {
    if extents.terms == 0 {
        return 0.0;
    }
    let distinct: BTreeSet<TermId> = members
        .iter()
        .flat_map(|&m| view.records[m].terms.iter().copied())
        .collect();
    distinct.len() as f64 / extents.terms as f64
}

/// Document frequency of each term within a partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermFrequencyIndex {
    counts: BTreeMap<TermId, usize>,
}

impl TermFrequencyIndex {
    pub fn build(view: &PersonView, members: &[usize]) -> Self {
        let mut counts = BTreeMap::new();
        for &m in members {
            for &t in &view.records[m].terms {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        TermFrequencyIndex { counts }
    }

    pub fn get(&self, term: TermId) -> usize {
        self.counts.get(&term).copied().unwrap_or(0)
    }

    pub fn remove(&mut self, term: TermId) {
        self.counts.remove(&term);
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Terms by descending frequency, ties by ascending key.
    pub fn ranked(&self) -> Vec<(TermId, usize)> {
        let mut v: Vec<(TermId, usize)> = self.counts.iter().map(|(t, c)| (*t, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// The most frequent term, ties broken lexicographically. `None` when the
/// index is exhausted.
pub fn next_term(index: &TermFrequencyIndex) -> Option<(TermId, usize)> {
    index
        .counts
        .iter()
        .fold(None, |best: Option<(TermId, usize)>, (&t, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((t, c)),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unsplittable;

/// Median cut on a relational attribute.
///
/// Numeric and date cells are represented by their minimum; records below
/// the element at index `n / 2` of the sorted representatives go left. If
/// none are strictly below, the cut falls just above the median instead.
/// Categorical cells are represented by their smallest category; the sorted
/// categories are cut at the prefix whose record count is closest to half.
pub fn split_relational(
    view: &PersonView,
    members: &[usize],
    q: usize,
) -> std::result::Result<(Vec<usize>, Vec<usize>), Unsplittable> {
    if view.quasi[q].kind == AttributeKind::QuasiCategorical {
        let reps: Vec<&str> = members
            .iter()
            .map(|&m| view.records[m].cells[q].min_category().expect("categorical"))
            .collect();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &reps {
            *counts.entry(r).or_insert(0) += 1;
        }
        if counts.len() < 2 {
            return Err(Unsplittable);
        }
        let n = members.len();
        let mut cumulative = 0;
        let mut best: Option<(usize, &str)> = None;
        for (value, c) in counts.iter().take(counts.len() - 1) {
            cumulative += c;
            let gap = (2 * cumulative).abs_diff(n);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, value));
            }
        }
        let (_, last_left) = best.expect("at least two categories");
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (&m, r) in members.iter().zip(&reps) {
            if *r <= last_left {
                left.push(m);
            } else {
                right.push(m);
            }
        }
        return Ok((left, right));
    }

    let reps: Vec<f64> = members
        .iter()
        .map(|&m| view.records[m].cells[q].min_ordinal().expect("ordinal"))
        .collect();
    let mut sorted = reps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let below = reps.iter().any(|&r| r < median);
    let goes_left = |r: f64| if below { r < median } else { r <= median };
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (&m, &r) in members.iter().zip(&reps) {
        if goes_left(r) {
            left.push(m);
        } else {
            right.push(m);
        }
    }
    if left.is_empty() || right.is_empty() {
        return Err(Unsplittable);
    }
    Ok((left, right))
}

/// Presence/absence cut on a term.
pub fn split_textual(view: &PersonView, members: &[usize], term: TermId) -> (Vec<usize>, Vec<usize>) {
    members.iter().partition(|&&m| view.records[m].has_term(term))
}

pub fn allowable(left: &[usize], right: &[usize], k: usize) -> bool {
    left.len() >= k && right.len() >= k
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitChoice {
    Relational {
        attribute: usize,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    Textual {
        term: TermId,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    None,
}

/// Best allowable relational cut: widest span first, then schema order.
fn best_relational(
    view: &PersonView,
    extents: &Extents,
    members: &[usize],
    k: usize,
) -> Option<(f64, usize, Vec<usize>, Vec<usize>)> {
    let mut order: Vec<(f64, usize)> = (0..view.quasi.len())
        .map(|q| (normalized_span(view, extents, members, q), q))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    order.into_iter().find_map(|(span, q)| {
        let (l, r) = split_relational(view, members, q).ok()?;
        allowable(&l, &r, k).then_some((span, q, l, r))
    })
}

/// Most frequent term whose presence/absence cut is allowable.
fn best_textual(
    view: &PersonView,
    members: &[usize],
    k: usize,
    excluded: &[TermId],
) -> Option<(TermId, Vec<usize>, Vec<usize>)> {
    let n = members.len();
    let mut index = TermFrequencyIndex::build(view, members);
    for t in excluded {
        index.remove(*t);
    }
    index
        .ranked()
        .into_iter()
        .find(|&(_, f)| f >= k && n - f >= k)
        .map(|(t, _)| {
            let (l, r) = split_textual(view, members, t);
            (t, l, r)
        })
}

/// Picks the split family by comparing `λ·s_r` with `(1−λ)·s_x`, where
/// `s_r` is the span of the best allowable relational cut and `s_x` the
/// textual span of the partition. A family with weight zero is never used.
pub fn choose_split(view: &PersonView, extents: &Extents, members: &[usize], k: usize, lambda: f64) -> SplitChoice {
    let relational = if lambda > 0.0 {
        best_relational(view, extents, members, k)
    } else {
        None
    };
    let textual = if lambda < 1.0 {
        best_textual(view, members, k, &[])
    } else {
        None
    };
    let prefer_relational = match (&relational, &textual) {
        (Some((s_r, ..)), Some(_)) => lambda * s_r >= (1.0 - lambda) * textual_span(view, extents, members),
        (Some(_), None) => true,
        (None, _) => false,
    };
    match (relational, textual) {
        (Some((_, attribute, left, right)), _) if prefer_relational => {
            SplitChoice::Relational { attribute, left, right }
        }
        (_, Some((term, left, right))) => SplitChoice::Textual { term, left, right },
        _ => SplitChoice::None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub relational_splits: usize,
    pub textual_splits: usize,
    /// Relational splits per attribute name.
    pub per_attribute: BTreeMap<String, usize>,
    /// Textual splits per entity type of the split term.
    pub per_entity_type: BTreeMap<String, usize>,
}

impl SplitStats {
    pub fn total(&self) -> usize {
        self.relational_splits + self.textual_splits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub id: usize,
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub children: Option<[usize; 2]>,
    /// Person ids, on leaves only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<String>>,
}

/// The recursion tree; node 0 is the root.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PartitionTree {
    pub nodes: Vec<TreeNode>,
}

impl PartitionTree {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Number of internal nodes.
    pub fn splits(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOutcome {
    pub partitions: Vec<Partition>,
    pub stats: SplitStats,
    pub tree: PartitionTree,
}

enum Cut {
    Attribute(usize),
    Term(TermId),
}

fn check_inputs(view: &PersonView, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if view.len() < k {
        return Err(Error::TooFewRecords { persons: view.len(), k });
    }
    Ok(())
}

/// Shared top-down driver. `decide` sees a partition of size ≥ 2k together
/// with the terms already split on along its path.
fn drive<F>(view: &PersonView, k: usize, mut decide: F) -> PartitionOutcome
where
    F: FnMut(&[usize], &[TermId]) -> Option<(Cut, Vec<usize>, Vec<usize>)>,
{
    struct Pending {
        node: usize,
        members: Vec<usize>,
        lineage: Vec<(SplitDescriptor, Side)>,
        used_terms: Vec<TermId>,
    }

    let mut tree = PartitionTree::default();
    let mut stats = SplitStats::default();
    let mut partitions = Vec::new();
    let new_node = |tree: &mut PartitionTree, size: usize| {
        let id = tree.nodes.len();
        tree.nodes.push(TreeNode {
            id,
            size,
            split: None,
            children: None,
            members: None,
        });
        id
    };

    let root = new_node(&mut tree, view.len());
    let mut stack = vec![Pending {
        node: root,
        members: (0..view.len()).collect(),
        lineage: Vec::new(),
        used_terms: Vec::new(),
    }];

    while let Some(p) = stack.pop() {
        let decision = if p.members.len() < 2 * k {
            None
        } else {
            decide(&p.members, &p.used_terms)
        };
        let Some((cut, left, right)) = decision else {
            tree.nodes[p.node].members = Some(view.pids(&p.members).map(str::to_string).collect());
            partitions.push(Partition {
                members: p.members,
                lineage: p.lineage,
            });
            continue;
        };

        let mut used_terms = p.used_terms;
        let descriptor = match cut {
            Cut::Attribute(q) => {
                let name = view.quasi[q].name.clone();
                stats.relational_splits += 1;
                *stats.per_attribute.entry(name.clone()).or_insert(0) += 1;
                SplitDescriptor::Attribute { name }
            }
            Cut::Term(t) => {
                let key = view.term(t);
                stats.textual_splits += 1;
                *stats.per_entity_type.entry(key.entity_type.clone()).or_insert(0) += 1;
                used_terms.push(t);
                SplitDescriptor::Term {
                    text: key.text.clone(),
                    entity_type: key.entity_type.clone(),
                }
            }
        };
        let l = new_node(&mut tree, left.len());
        let r = new_node(&mut tree, right.len());
        tree.nodes[p.node].split = Some(descriptor.clone());
        tree.nodes[p.node].children = Some([l, r]);

        let mut l_lineage = p.lineage.clone();
        l_lineage.push((descriptor.clone(), Side::Left));
        let mut r_lineage = p.lineage;
        r_lineage.push((descriptor, Side::Right));
        // Right is pushed first so the left subtree is emitted first.
        stack.push(Pending {
            node: r,
            members: right,
            lineage: r_lineage,
            used_terms: used_terms.clone(),
        });
        stack.push(Pending {
            node: l,
            members: left,
            lineage: l_lineage,
            used_terms,
        });
    }

    PartitionOutcome {
        partitions,
        stats,
        tree,
    }
}

/// Mondrian partitioning with relational/textual weight `lambda`.
pub fn mondrian_partition(view: &PersonView, k: usize, lambda: f64) -> Result<PartitionOutcome> {
    check_inputs(view, k)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let extents = Extents::of(view);
    Ok(drive(view, k, |members, _| {
        match choose_split(view, &extents, members, k, lambda) {
            SplitChoice::Relational { attribute, left, right } => Some((Cut::Attribute(attribute), left, right)),
            SplitChoice::Textual { term, left, right } => Some((Cut::Term(term), left, right)),
            SplitChoice::None => None,
        }
    }))
}

/// GDF partitioning: split on the most frequent term whose presence/absence
/// cut is allowable; terms already split on above a node are not
/// reconsidered below it.
pub fn gdf_partition(view: &PersonView, k: usize) -> Result<PartitionOutcome> {
    check_inputs(view, k)?;
    Ok(drive(view, k, |members, used| {
        let n = members.len();
        let mut index = TermFrequencyIndex::build(view, members);
        for t in used {
            index.remove(*t);
        }
        while let Some((term, freq)) = next_term(&index) {
            if freq >= k && n - freq >= k {
                let (l, r) = split_textual(view, members, term);
                return Some((Cut::Term(term), l, r));
            }
            index.remove(term);
        }
        None
    }))
}
