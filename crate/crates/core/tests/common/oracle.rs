//! Brute-force information loss computed straight from the raw CSV text,
//! the annotation lines and known redundancy flags. Shares no code with the
//! engine beyond the csv and chrono parsers.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Table {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().unwrap().iter().map(|s| s.trim().to_string()).collect();
        let rows = rdr
            .records()
            .map(|r| r.unwrap().iter().map(|s| s.trim().to_string()).collect())
            .collect();
        Table { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap()
    }
}

pub struct Columns<'a> {
    pub id: &'a str,
    pub numeric: &'a [&'a str],
    pub categorical: &'a [&'a str],
    pub dates: &'a [&'a str],
}

pub const SYNTHETIC_COLUMNS: Columns<'static> = Columns {
    id: "id",
    numeric: &["age"],
    categorical: &["gender", "job"],
    dates: &["joined"],
};

pub const RUNNING_EXAMPLE_COLUMNS: Columns<'static> = Columns {
    id: "id",
    numeric: &["age"],
    categorical: &["gender", "topic", "sign"],
    dates: &["date"],
};

pub struct Mention {
    pub row: usize,
    pub text: String,
    pub label: String,
    pub redundant: bool,
}

pub fn mentions(jsonl: &str, redundant: &[bool]) -> Vec<Mention> {
    jsonl
        .lines()
        .filter(|l| !l.trim().is_empty())
        .zip(redundant)
        .map(|(line, &redundant)| {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            Mention {
                row: v["row_id"].as_u64().unwrap() as usize,
                text: v["text"].as_str().unwrap().to_string(),
                label: v["label"].as_str().unwrap().to_string(),
                redundant,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub total: f64,
    pub relational: f64,
    pub textual: f64,
    /// (relational, textual) per person id.
    pub per_person: BTreeMap<String, (f64, f64)>,
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Loss of the classes `groups` (lists of person ids).
pub fn loss(table: &Table, cols: &Columns, mentions: &[Mention], groups: &[Vec<String>], wa: f64, wx: f64) -> Loss {
    let id = table.col(cols.id);
    let rows_of = |pids: &[String]| -> Vec<usize> {
        (0..table.rows.len())
            .filter(|&r| pids.contains(&table.rows[r][id]))
            .collect()
    };
    let n_attrs = cols.numeric.len() + cols.categorical.len() + cols.dates.len();

    let mut terms: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
    for r in &table.rows {
        terms.entry(r[id].clone()).or_default();
    }
    for m in mentions.iter().filter(|m| !m.redundant) {
        terms
            .get_mut(&table.rows[m.row][id])
            .unwrap()
            .insert((m.text.trim().to_lowercase(), m.label.clone()));
    }

    let mut per_person = BTreeMap::new();
    for group in groups {
        let rows = rows_of(group);
        let mut a = 0.0;
        for name in cols.numeric {
            let c = table.col(name);
            let all: Vec<f64> = table.rows.iter().map(|r| r[c].parse().unwrap()).collect();
            let mine: Vec<f64> = rows.iter().map(|&r| table.rows[r][c].parse().unwrap()).collect();
            let width = all.iter().cloned().fold(f64::MIN, f64::max) - all.iter().cloned().fold(f64::MAX, f64::min);
            let local = mine.iter().cloned().fold(f64::MIN, f64::max) - mine.iter().cloned().fold(f64::MAX, f64::min);
            if width > 0.0 && local > 0.0 {
                a += local / width;
            }
        }
        for name in cols.categorical {
            let c = table.col(name);
            let all: BTreeSet<&str> = table.rows.iter().map(|r| r[c].as_str()).collect();
            let mine: BTreeSet<&str> = rows.iter().map(|&r| table.rows[r][c].as_str()).collect();
            if mine.len() > 1 {
                a += mine.len() as f64 / all.len() as f64;
            }
        }
        for name in cols.dates {
            let c = table.col(name);
            let all: BTreeSet<NaiveDate> = table.rows.iter().map(|r| date(&r[c])).collect();
            let mine: BTreeSet<NaiveDate> = rows.iter().map(|&r| date(&table.rows[r][c])).collect();
            if mine.len() > 1 {
                let first = *mine.first().unwrap();
                let same_year = mine.iter().all(|d| d.year() == first.year());
                let same_month = same_year && mine.iter().all(|d| d.month() == first.month());
                let leaves = all
                    .iter()
                    .filter(|d| {
                        if same_month {
                            d.year() == first.year() && d.month() == first.month()
                        } else if same_year {
                            d.year() == first.year()
                        } else {
                            true
                        }
                    })
                    .count();
                a += leaves as f64 / all.len() as f64;
            }
        }
        let a = a / n_attrs as f64;

        let shared: BTreeSet<(String, String)> = group
            .iter()
            .map(|p| terms[p].clone())
            .reduce(|x, y| x.intersection(&y).cloned().collect())
            .unwrap();
        for p in group {
            let mine = &terms[p];
            let x = if mine.is_empty() {
                0.0
            } else {
                mine.difference(&shared).count() as f64 / mine.len() as f64
            };
            per_person.insert(p.clone(), (a, x));
        }
    }

    let n = per_person.len() as f64;
    let relational = per_person.values().map(|v| v.0).sum::<f64>() / n;
    let textual = per_person.values().map(|v| v.1).sum::<f64>() / n;
    let total = per_person
        .values()
        .map(|v| (wa * v.0 + wx * v.1) / (wa + wx))
        .sum::<f64>()
        / n;
    Loss {
        total,
        relational,
        textual,
        per_person,
    }
}
