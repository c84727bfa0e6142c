//! Python bindings: load inputs once into an `Anonymizer`, then run,
//! sweep or evaluate releases from it.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hetanon_core::metrics::{self, NcpWeights};
use hetanon_core::model::RecodedCell;
use hetanon_core::pipeline::{self, Inputs, LossRow, Prepared, RunConfig, RunOutput, Strategy, SweepGrid};
use hetanon_core::recode::Release;
use hetanon_core::schema::{validate_schema as validate, Schema};
use hetanon_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Outcome of one anonymization run.
#[pyclass(frozen, module = "hetanon")]
struct RunResult {
    output: RunOutput,
    classes_json: String,
    pids: Vec<Vec<String>>,
}

#[pymethods]
impl RunResult {
    #[getter]
    fn release_csv(&self) -> String {
        self.output.release.to_csv()
    }

    #[getter]
    fn classes_json(&self) -> String {
        self.classes_json.clone()
    }

    #[getter]
    fn loss_json(&self) -> String {
        self.output.loss.to_json()
    }

    #[getter]
    fn audit_json(&self) -> String {
        self.output.audit.to_json()
    }

    #[getter]
    fn tree_json(&self) -> String {
        self.output.outcome.tree.to_json()
    }

    #[getter]
    fn audit_passed(&self) -> bool {
        self.output.audit.passed
    }

    #[getter]
    fn ncp_total(&self) -> f64 {
        self.output.loss.ncp_total
    }

    #[getter]
    fn ncp_relational(&self) -> f64 {
        self.output.loss.ncp_relational
    }

    #[getter]
    fn ncp_textual(&self) -> f64 {
        self.output.loss.ncp_textual
    }

    #[getter]
    fn relational_splits(&self) -> usize {
        self.output.outcome.stats.relational_splits
    }

    #[getter]
    fn textual_splits(&self) -> usize {
        self.output.outcome.stats.textual_splits
    }

    /// Person ids of each partition, in output order.
    #[getter]
    fn partitions(&self) -> Vec<Vec<String>> {
        self.pids.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(partitions={}, ncp_total={:.6}, audit_passed={})",
            self.pids.len(),
            self.output.loss.ncp_total,
            self.output.audit.passed
        )
    }
}

/// A dataset with its annotations, ready to be anonymized.
#[pyclass(frozen, module = "hetanon")]
struct Anonymizer {
    prepared: Prepared,
}

fn strategy(s: &str) -> PyResult<Strategy> {
    s.parse().map_err(to_py)
}

#[pymethods]
impl Anonymizer {
    #[new]
    #[pyo3(signature = (schema, data, annotations, persons=None, entities=None))]
    fn new(
        schema: PathBuf,
        data: PathBuf,
        annotations: PathBuf,
        persons: Option<PathBuf>,
        entities: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let inputs = Inputs {
            schema,
            data,
            persons,
            annotations,
        };
        let (dataset, annotations) = inputs.load().map_err(to_py)?;
        let types: Option<BTreeSet<String>> = entities.map(|v| v.into_iter().collect());
        if types.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err(PyValueError::new_err("entity type filter is empty"));
        }
        Ok(Anonymizer {
            prepared: Prepared::new(dataset, &annotations, types.as_ref()),
        })
    }

    #[getter]
    fn persons(&self) -> usize {
        self.prepared.view.len()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.prepared.dataset.len()
    }

    /// Annotations with redundancy flags, as JSON lines.
    #[getter]
    fn annotations_jsonl(&self) -> String {
        self.prepared.annotations.to_jsonl()
    }

    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (k, strategy="mondrian", lambda_=0.5, wa=1.0, wx=1.0, drop_direct_id=false))]
    fn run(
        &self,
        py: Python<'_>,
        k: usize,
        strategy: &str,
        lambda_: f64,
        wa: f64,
        wx: f64,
        drop_direct_id: bool,
    ) -> PyResult<RunResult> {
        let config = RunConfig {
            k,
            lambda: lambda_,
            strategy: self::strategy(strategy)?,
            entity_types: None,
            weights: NcpWeights::new(wa, wx).map_err(to_py)?,
            drop_direct_id,
        };
        let prepared = &self.prepared;
        let output = py.detach(|| pipeline::run(prepared, &config)).map_err(to_py)?;
        let classes_json = serde_json::to_string_pretty(&output.class_report(prepared))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let pids = output
            .outcome
            .partitions
            .iter()
            .map(|p| prepared.view.pids(&p.members).map(str::to_string).collect())
            .collect();
        Ok(RunResult {
            output,
            classes_json,
            pids,
        })
    }

    /// Loss table of a k × λ × strategy grid as CSV.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (ks, lambdas, strategies=vec!["mondrian".to_string(), "gdf".to_string()], jobs=1, wa=1.0, wx=1.0))]
    fn sweep(
        &self,
        py: Python<'_>,
        ks: Vec<usize>,
        lambdas: Vec<f64>,
        strategies: Vec<String>,
        jobs: usize,
        wa: f64,
        wx: f64,
    ) -> PyResult<String> {
        let grid = SweepGrid {
            ks,
            lambdas,
            strategies: strategies.iter().map(|s| strategy(s)).collect::<PyResult<_>>()?,
            entity_types: None,
            weights: NcpWeights::new(wa, wx).map_err(to_py)?,
        };
        let prepared = &self.prepared;
        let rows: Vec<LossRow> = py.detach(|| pipeline::sweep(prepared, &grid, jobs)).map_err(to_py)?;
        Ok(pipeline::loss_csv(
            &rows,
            &pipeline::entity_columns(&prepared.annotations),
        ))
    }

    /// Audits a release given as CSV text; returns (audit JSON, loss JSON).
    #[pyo3(signature = (release_csv, k, wa=1.0, wx=1.0))]
    fn evaluate(&self, release_csv: &str, k: usize, wa: f64, wx: f64) -> PyResult<(String, String)> {
        let release = Release::from_csv(release_csv.as_bytes()).map_err(to_py)?;
        let weights = NcpWeights::new(wa, wx).map_err(to_py)?;
        let (audit, loss) = pipeline::evaluate(&self.prepared, &release, k, weights).map_err(to_py)?;
        Ok((audit.to_json(), loss.to_json()))
    }
}

/// Problems of a schema (JSON text) against a header, as messages.
#[pyfunction]
fn validate_schema(schema_json: &str, header: Vec<String>) -> PyResult<Vec<String>> {
    let schema = Schema::from_json(schema_json).map_err(to_py)?;
    Ok(validate(&schema, &header)
        .violations
        .iter()
        .map(ToString::to_string)
        .collect())
}

/// Penalty of the numeric range [lo, hi] on an attribute of width `width`.
#[pyfunction]
fn ncp_num(lo: f64, hi: f64, width: f64) -> f64 {
    metrics::ncp_num(&RecodedCell::NumericRange { lo, hi }, width)
}

/// Penalty of a cell describing `described` of `total` distinct values.
#[pyfunction]
fn ncp_cat(described: usize, total: usize) -> f64 {
    let cell = RecodedCell::CategorySet(vec![String::new(); described]);
    metrics::ncp_cat(&cell, total, None)
}

#[pymodule]
fn hetanon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Anonymizer>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(validate_schema, m)?)?;
    m.add_function(wrap_pyfunction!(ncp_num, m)?)?;
    m.add_function(wrap_pyfunction!(ncp_cat, m)?)?;
    Ok(())
}
