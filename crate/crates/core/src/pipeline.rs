//! End-to-end runs: load, partition, recode, release, audit, measure.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::audit::{audit_release, read_release, AuditReport};
use crate::error::{Error, Result};
use crate::ingest::{
    build_person_view, detect_redundant, load_annotations, load_dataset, load_joined, AnnotationSet, Dataset,
    PersonView,
};
use crate::metrics::{ncp_dataset, LossContext, LossReport, NcpWeights};
use crate::partition::{gdf_partition, mondrian_partition, PartitionOutcome};
use crate::recode::{class_report, expand_release, ClassEntry, EquivalenceClass, Recoder, Release};
use crate::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Mondrian,
    Gdf,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Mondrian => "mondrian",
            Strategy::Gdf => "gdf",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mondrian" => Ok(Strategy::Mondrian),
            "gdf" => Ok(Strategy::Gdf),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Parameters of one anonymization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub lambda: f64,
    pub strategy: Strategy,
    /// Entity types to anonymize; `None` keeps every annotated type.
    pub entity_types: Option<BTreeSet<String>>,
    pub weights: NcpWeights,
    pub drop_direct_id: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 2,
            lambda: 0.5,
            strategy: Strategy::Mondrian,
            entity_types: None,
            weights: NcpWeights::default(),
            drop_direct_id: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.entity_types.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err(Error::Config("entity type filter is empty".into()));
        }
        NcpWeights::new(self.weights.w_a, self.weights.w_x)?;
        Ok(())
    }
}

/// A loaded dataset with redundancy-flagged annotations and its person
/// view, ready to be anonymized under any configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub annotations: AnnotationSet,
    pub view: PersonView,
}

impl Prepared {
    pub fn new(dataset: Dataset, annotations: &AnnotationSet, entity_types: Option<&BTreeSet<String>>) -> Self {
        let filtered = match entity_types {
            Some(types) => annotations.retain_entity_types(types),
            None => annotations.clone(),
        };
        let annotations = detect_redundant(&dataset, &filtered);
        let view = build_person_view(&dataset, &annotations);
        Prepared {
            dataset,
            annotations,
            view,
        }
    }
}

/// Input file locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inputs {
    pub schema: PathBuf,
    pub data: PathBuf,
    /// Optional per-person table joined onto `data` by the direct identifier.
    pub persons: Option<PathBuf>,
    pub annotations: PathBuf,
}

impl Inputs {
    pub fn load(&self) -> Result<(Dataset, AnnotationSet)> {
        let schema = Schema::load(&self.schema)?;
        let dataset = match &self.persons {
            Some(p) => load_joined(p, &self.data, &schema)?,
            None => load_dataset(&self.data, &schema)?,
        };
        let annotations = load_annotations(&self.annotations, &dataset)?;
        Ok((dataset, annotations))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcome: PartitionOutcome,
    pub classes: Vec<EquivalenceClass>,
    pub release: Release,
    pub audit: AuditReport,
    pub loss: LossReport,
}

impl RunOutput {
    pub fn class_report(&self, prepared: &Prepared) -> Vec<ClassEntry> {
        class_report(&prepared.view, &self.classes)
    }
}

/// Partitions, recodes, releases, audits and measures one configuration.
pub fn run(prepared: &Prepared, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let view = &prepared.view;
    let outcome = match config.strategy {
        Strategy::Mondrian => mondrian_partition(view, config.k, config.lambda)?,
        Strategy::Gdf => gdf_partition(view, config.k)?,
    };
    let classes = Recoder::new(view).recode_all(view, &outcome.partitions);
    let release = expand_release(
        &prepared.dataset,
        &prepared.annotations,
        view,
        &classes,
        config.drop_direct_id,
    );
    let audit = audit_release(&prepared.dataset, &prepared.annotations, view, &release, config.k)?;
    let loss = ncp_dataset(
        &LossContext::new(view),
        view,
        &prepared.annotations,
        &classes,
        config.weights,
        Some(outcome.stats.clone()),
    );
    Ok(RunOutput {
        outcome,
        classes,
        release,
        audit,
        loss,
    })
}

/// Loss of an existing release, measured on the classes it exhibits.
pub fn evaluate(
    prepared: &Prepared,
    release: &Release,
    k: usize,
    weights: NcpWeights,
) -> Result<(AuditReport, LossReport)> {
    let view = &prepared.view;
    let audit = audit_release(&prepared.dataset, &prepared.annotations, view, release, k)?;
    let classes = read_release(&prepared.dataset, &prepared.annotations, view, release)?.classes(view);
    let loss = ncp_dataset(
        &LossContext::new(view),
        view,
        &prepared.annotations,
        &classes,
        weights,
        None,
    );
    Ok((audit, loss))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes release.csv, classes.json, loss.json, loss.csv, audit.json and
/// partition_tree.json into `out`.
pub fn write_outputs(out: &Path, prepared: &Prepared, config: &RunConfig, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("release.csv"), &output.release.to_csv())?;
    let classes = serde_json::to_string_pretty(&output.class_report(prepared))?;
    write(&out.join("classes.json"), &classes)?;
    write(&out.join("loss.json"), &output.loss.to_json())?;
    let row = LossRow::new(config, output);
    write(
        &out.join("loss.csv"),
        &loss_csv(&[row], &entity_columns(&prepared.annotations)),
    )?;
    write(&out.join("audit.json"), &output.audit.to_json())?;
    write(&out.join("partition_tree.json"), &output.outcome.tree.to_json())?;
    Ok(())
}

/// One line of a loss table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub k: usize,
    /// Absent for strategies that ignore it.
    pub lambda: Option<f64>,
    pub strategy: Strategy,
    pub loss: LossReport,
    pub audit_passed: bool,
}

impl LossRow {
    pub fn new(config: &RunConfig, output: &RunOutput) -> Self {
        LossRow {
            k: config.k,
            lambda: (config.strategy == Strategy::Mondrian).then_some(config.lambda),
            strategy: config.strategy,
            loss: output.loss.clone(),
            audit_passed: output.audit.passed,
        }
    }
}

/// Entity types present in the annotations, in order.
pub fn entity_columns(annotations: &AnnotationSet) -> Vec<String> {
    annotations
        .terms()
        .iter()
        .map(|t| t.entity_type.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Flat CSV of loss rows with one suppression-rate column per entity type.
/// The column is empty when every occurrence of the type was redundant.
pub fn loss_csv(rows: &[LossRow], entity_types: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = [
        "k",
        "lambda",
        "strategy",
        "ncp_total",
        "ncp_relational",
        "ncp_textual",
        "partitions",
        "mean_size",
        "std_size",
        "relational_splits",
        "textual_splits",
    ]
    .map(String::from)
    .to_vec();
    header.extend(entity_types.iter().map(|e| format!("suppressed_{e}")));
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let splits = r.loss.splits.clone().unwrap_or_default();
        let mut rec = vec![
            r.k.to_string(),
            r.lambda.map(|l| l.to_string()).unwrap_or_default(),
            r.strategy.to_string(),
            r.loss.ncp_total.to_string(),
            r.loss.ncp_relational.to_string(),
            r.loss.ncp_textual.to_string(),
            r.loss.partitions.count.to_string(),
            r.loss.partitions.mean_size.to_string(),
            r.loss.partitions.std_size.to_string(),
            splits.relational_splits.to_string(),
            splits.textual_splits.to_string(),
        ];
        rec.extend(
            entity_types
                .iter()
                .map(|e| r.loss.per_entity_type.get(e).map(f64::to_string).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Grid of configurations for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub entity_types: Option<BTreeSet<String>>,
    pub weights: NcpWeights,
}

impl SweepGrid {
    /// Configurations in output order: for each k, Mondrian once per λ,
    /// then GDF once.
    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &k in &self.ks {
            for &strategy in &self.strategies {
                let lambdas: &[f64] = match strategy {
                    Strategy::Mondrian => &self.lambdas,
                    Strategy::Gdf => &[0.5],
                };
                for &lambda in lambdas {
                    out.push(RunConfig {
                        k,
                        lambda,
                        strategy,
                        entity_types: self.entity_types.clone(),
                        weights: self.weights,
                        drop_direct_id: false,
                    });
                }
            }
        }
        out
    }
}

/// Runs every configuration of `grid` on `jobs` threads. Rows come back in
/// grid order whatever the thread count.
pub fn sweep(prepared: &Prepared, grid: &SweepGrid, jobs: usize) -> Result<Vec<LossRow>> {
    let configs = grid.configs();
    for c in &configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let out = run(prepared, c)?;
                Ok(LossRow::new(c, &out))
            })
            .collect()
    })
}
