#![allow(dead_code)]

pub mod cuts;
pub mod oracle;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hetanon::ingest::{AnnotationSet, Dataset};
use hetanon::pipeline::Prepared;
use hetanon::schema::Schema;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn running_example() -> Prepared {
    let schema = Schema::load(fixture("example_schema.json")).unwrap();
    let dataset = hetanon::ingest::load_dataset(fixture("example.csv"), &schema).unwrap();
    let annotations = hetanon::ingest::load_annotations(fixture("example_annotations.jsonl"), &dataset).unwrap();
    Prepared::new(dataset, &annotations, None)
}

pub const SCHEMA: &str = r#"{
  "attributes": [
    {"name": "id", "kind": "direct-identifier"},
    {"name": "gender", "kind": "quasi-categorical"},
    {"name": "age", "kind": "quasi-numeric", "entity_type": "AGE"},
    {"name": "job", "kind": "quasi-categorical", "entity_type": "JOB"},
    {"name": "joined", "kind": "quasi-date", "entity_type": "DATE"},
    {"name": "text", "kind": "textual"}
  ]
}"#;

const WORDS: [&str; 40] = [
    "Alder", "Birch", "Cedar", "Dover", "Elm", "Fjord", "Galway", "Harbor", "Iona", "Jasper", "Kestrel", "Lima",
    "Moss", "Nile", "Oslo", "Perth", "Quill", "Rhine", "Sable", "Tyne", "Umber", "Vale", "Wren", "Xenia", "York",
    "Zinc", "Arden", "Brook", "Corin", "Delta", "Ember", "Flint", "Grove", "Heath", "Isle", "Juno", "Kirk", "Lorne",
    "Marsh", "Nash",
];
const TYPES: [&str; 4] = ["PERSON", "LOCATION", "ORG", "PRODUCT"];
const JOBS: [&str; 8] = [
    "nurse", "teacher", "pilot", "baker", "chemist", "lawyer", "farmer", "editor",
];
const GENDERS: [&str; 3] = ["female", "male", "other"];

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub persons: usize,
    pub max_rows: usize,
    /// Number of distinct terms to draw from.
    pub vocab: usize,
    /// Inclusion probability of the most frequent term; later terms decay.
    pub head: f64,
}

impl Params {
    pub fn large() -> Self {
        Params {
            persons: 200,
            max_rows: 3,
            vocab: 32,
            head: 0.6,
        }
    }

    pub fn small(persons: usize) -> Self {
        Params {
            persons,
            max_rows: 3,
            vocab: 6,
            head: 0.8,
        }
    }
}

/// A generated dataset with the ground truth about every annotation.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub csv: String,
    pub annotations: String,
    /// Whether each annotation line repeats a value of its own row.
    pub redundant: Vec<bool>,
}

struct Span {
    row: usize,
    start: usize,
    end: usize,
    text: String,
    label: String,
    redundant: bool,
}

struct Text {
    body: String,
    len: usize,
}

impl Text {
    fn push(&mut self, s: &str) {
        self.body.push_str(s);
        self.len += s.chars().count();
    }

    /// Appends `s` and returns its char range.
    fn mark(&mut self, s: &str) -> (usize, usize) {
        let start = self.len;
        self.push(s);
        (start, self.len)
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn generate(seed: u64, p: Params) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,gender,age,job,joined,text\n");
    let mut spans: Vec<Span> = Vec::new();
    let mut row = 0;
    for person in 0..p.persons {
        let pid = format!("p{person:03}");
        let gender = GENDERS[rng.gen_range(0..GENDERS.len())];
        let age: u32 = rng.gen_range(18..70);
        let base_job = JOBS[rng.gen_range(0..JOBS.len())];
        let latent: Vec<usize> = (0..p.vocab)
            .filter(|&i| rng.gen_bool(p.head / (1.0 + i as f64 / 3.0)))
            .collect();
        let rows = rng.gen_range(1..=p.max_rows);
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for &t in &latent {
            assigned[rng.gen_range(0..rows)].push(t);
            if rng.gen_bool(0.2) {
                assigned[rng.gen_range(0..rows)].push(t);
            }
        }
        for terms in assigned.iter_mut() {
            terms.shuffle(&mut rng);
            let job = if rng.gen_bool(0.1) {
                JOBS[rng.gen_range(0..JOBS.len())]
            } else {
                base_job
            };
            let year = rng.gen_range(2003..=2006);
            let month = rng.gen_range(1..=12);
            let day = rng.gen_range(1..=28);
            let date = format!("{year:04}-{month:02}-{day:02}");

            let mut text = Text {
                body: String::new(),
                len: 0,
            };
            let mut span = |text: &mut Text, s: &str, label: &str, redundant: bool| {
                let (start, end) = text.mark(s);
                spans.push(Span {
                    row,
                    start,
                    end,
                    text: s.to_string(),
                    label: label.to_string(),
                    redundant,
                });
            };
            for (i, &t) in terms.iter().enumerate() {
                if i == 0 && rng.gen_bool(0.3) {
                    span(&mut text, WORDS[t], TYPES[t % TYPES.len()], false);
                    text.push(" was there. ");
                } else {
                    text.push("Saw ");
                    span(&mut text, WORDS[t], TYPES[t % TYPES.len()], false);
                    text.push(" today. ");
                }
            }
            if rng.gen_bool(0.3) {
                text.push("I am ");
                span(&mut text, &format!("{age} years old"), "AGE", true);
                text.push(". ");
            }
            if rng.gen_bool(0.3) {
                text.push("Work as a ");
                span(&mut text, job, "JOB", true);
                text.push(". ");
            }
            if rng.gen_bool(0.2) {
                text.push("Here since ");
                span(&mut text, &year.to_string(), "DATE", true);
                text.push(". ");
            }
            if rng.gen_bool(0.1) {
                span(&mut text, "Last week", "DATE", false);
                text.push(" it rained.");
            }
            if text.len == 0 {
                text.push("Nothing to report.");
            }
            let body = text.body.trim_end().to_string();
            csv.push_str(&format!("{pid},{gender},{age},{job},{date},{}\n", quote(&body)));
            row += 1;
        }
    }
    let annotations = spans
        .iter()
        .map(|s| {
            serde_json::json!({
                "row_id": s.row,
                "attribute": "text",
                "start": s.start,
                "end": s.end,
                "text": s.text,
                "label": s.label,
            })
            .to_string()
                + "\n"
        })
        .collect();
    Synthetic {
        csv,
        annotations,
        redundant: spans.iter().map(|s| s.redundant).collect(),
    }
}

impl Synthetic {
    pub fn schema() -> Schema {
        Schema::from_json(SCHEMA).unwrap()
    }

    pub fn load(&self) -> (Dataset, AnnotationSet) {
        let dataset = Dataset::from_reader(self.csv.as_bytes(), Self::schema()).unwrap();
        let annotations = AnnotationSet::from_reader(self.annotations.as_bytes(), &dataset).unwrap();
        (dataset, annotations)
    }

    pub fn prepared(&self) -> Prepared {
        let (dataset, annotations) = self.load();
        Prepared::new(dataset, &annotations, None)
    }

    /// Writes schema.json, data.csv and annotations.jsonl into `dir`.
    pub fn write_to(&self, dir: &Path) {
        std::fs::write(dir.join("schema.json"), SCHEMA).unwrap();
        std::fs::write(dir.join("data.csv"), &self.csv).unwrap();
        std::fs::write(dir.join("annotations.jsonl"), &self.annotations).unwrap();
    }
}

/// The three fixed synthetic fixtures used across suites.
pub fn fixtures() -> Vec<(&'static str, Synthetic)> {
    vec![
        ("dense-200", generate(7, Params::large())),
        (
            "sparse-120",
            generate(
                11,
                Params {
                    persons: 120,
                    max_rows: 4,
                    vocab: 40,
                    head: 0.35,
                },
            ),
        ),
        (
            "single-row-60",
            generate(
                13,
                Params {
                    persons: 60,
                    max_rows: 1,
                    vocab: 20,
                    head: 0.7,
                },
            ),
        ),
    ]
}
