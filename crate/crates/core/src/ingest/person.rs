use std::collections::{BTreeSet, HashMap};

use crate::ingest::{AnnotationSet, Dataset};
use crate::model::{CellSet, PersonRecord, TermId, TermKey};
use crate::schema::AttributeKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiAttribute {
    /// Position in the schema.
    pub index: usize,
    pub name: String,
    pub kind: AttributeKind,
}

/// The dataset grouped by direct identifier: one record per person with
/// set-valued quasi-identifiers and the union of their non-redundant terms.
#[derive(Debug, Clone)]
pub struct PersonView {
    pub quasi: Vec<QuasiAttribute>,
    pub records: Vec<PersonRecord>,
    /// Term vocabulary in key order; `TermId(i)` names `vocab[i]`.
    pub vocab: Vec<TermKey>,
    /// Record index of each dataset row.
    pub row_person: Vec<usize>,
}

impl PersonView {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn term(&self, id: TermId) -> &TermKey {
        &self.vocab[id.index()]
    }

    pub fn term_id(&self, key: &TermKey) -> Option<TermId> {
        self.vocab.binary_search(key).ok().map(|i| TermId(i as u32))
    }

    /// Position of schema attribute `index` among the quasi-identifiers.
    pub fn quasi_position(&self, index: usize) -> Option<usize> {
        self.quasi.iter().position(|q| q.index == index)
    }

    pub fn pids<'a>(&'a self, members: &'a [usize]) -> impl Iterator<Item = &'a str> + 'a {
        members.iter().map(|&m| self.records[m].pid.as_str())
    }
}

enum Accumulator {
    Numeric(Vec<f64>),
    Categorical(BTreeSet<String>),
    Date(BTreeSet<chrono::NaiveDate>),
}

/// Groups rows by direct identifier. Records appear in order of each
/// person's first row.
pub fn build_person_view(dataset: &Dataset, annotations: &AnnotationSet) -> PersonView {
    let schema = dataset.schema();
    let quasi: Vec<QuasiAttribute> = schema
        .quasi_identifiers()
        .map(|i| QuasiAttribute {
            index: i,
            name: schema.attributes[i].name.clone(),
            kind: schema.attributes[i].kind,
        })
        .collect();

    let mut index_of: HashMap<&str, usize> = HashMap::new();
    let mut pids: Vec<String> = Vec::new();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut accs: Vec<Vec<Accumulator>> = Vec::new();
    let mut keys: Vec<BTreeSet<TermKey>> = Vec::new();
    let mut row_person = Vec::with_capacity(dataset.len());

    for row in dataset.rows() {
        let pid = dataset.person_id(row.row_id);
        let p = *index_of.entry(pid).or_insert_with(|| {
            pids.push(pid.to_string());
            tuples.push(Vec::new());
            keys.push(BTreeSet::new());
            accs.push(
                quasi
                    .iter()
                    .map(|q| match q.kind {
                        AttributeKind::QuasiNumeric => Accumulator::Numeric(Vec::new()),
                        AttributeKind::QuasiDate => Accumulator::Date(BTreeSet::new()),
                        _ => Accumulator::Categorical(BTreeSet::new()),
                    })
                    .collect(),
            );
            pids.len() - 1
        });
        row_person.push(p);
        tuples[p].push(row.row_id);
        for (q, acc) in quasi.iter().zip(accs[p].iter_mut()) {
            match acc {
                Accumulator::Numeric(v) => v.push(dataset.numeric(row.row_id, q.index).expect("parsed")),
                Accumulator::Date(v) => {
                    v.insert(dataset.date(row.row_id, q.index).expect("parsed"));
                }
                Accumulator::Categorical(v) => {
                    v.insert(row.cells[q.index].clone());
                }
            }
        }
        for term in annotations.for_row(row.row_id) {
            if !term.is_redundant() {
                keys[p].insert(term.key());
            }
        }
    }

    let vocab: Vec<TermKey> = keys
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let id_of = |k: &TermKey| TermId(vocab.binary_search(k).expect("in vocab") as u32);

    let records = pids
        .into_iter()
        .zip(accs)
        .zip(keys.iter().zip(tuples))
        .map(|((pid, accs), (keys, tuple_ids))| PersonRecord {
            pid,
            cells: accs
                .into_iter()
                .map(|a| match a {
                    Accumulator::Numeric(mut v) => {
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                        CellSet::Numeric(v)
                    }
                    Accumulator::Categorical(v) => CellSet::Categorical(v.into_iter().collect()),
                    Accumulator::Date(v) => CellSet::Date(v.into_iter().collect()),
                })
                .collect(),
            // BTreeSet iteration is in key order, so ids come out sorted.
            terms: keys.iter().map(id_of).collect(),
            tuple_ids,
        })
        .collect();

    PersonView {
        quasi,
        records,
        vocab,
        row_person,
    }
}
