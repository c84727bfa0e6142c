use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetanon::metrics::NcpWeights;
use hetanon::pipeline::{
    entity_columns, evaluate, loss_csv, run, sweep, write_outputs, Inputs, LossRow, Prepared, RunConfig, Strategy,
    SweepGrid,
};
use hetanon::recode::Release;
use hetanon::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_AUDIT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hetanon",
    version,
    about = "k-anonymize relational data with free-text columns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anonymize a dataset and write the release with its reports.
    Anonymize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value = "mondrian")]
        strategy: Strategy,
        /// Leave the direct identifier column out of the release.
        #[arg(long)]
        drop_direct_id: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of k, lambda and strategy values and tabulate the loss.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,10,15,20")]
        k_list: Vec<usize>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
        )]
        lambda_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "mondrian,gdf")]
        strategies: Vec<Strategy>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit an existing release and measure its information loss.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long)]
        release: PathBuf,
        #[arg(long)]
        k: usize,
        /// Directory for audit.json and loss.json; printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Flattened dataset, or the event table when --persons is given.
    #[arg(long)]
    data: PathBuf,
    /// Per-person table joined onto --data by the direct identifier.
    #[arg(long)]
    persons: Option<PathBuf>,
    /// Sensitive-term annotations, one JSON object per line.
    #[arg(long)]
    annotations: PathBuf,
    /// Comma-separated entity types to anonymize; all when absent.
    #[arg(long, value_delimiter = ',')]
    entities: Option<Vec<String>>,
}

#[derive(Args)]
struct LossArgs {
    /// Weight of relational loss.
    #[arg(long, default_value_t = 1.0)]
    wa: f64,
    /// Weight of textual loss.
    #[arg(long, default_value_t = 1.0)]
    wx: f64,
}

impl InputArgs {
    fn prepare(&self) -> Result<Prepared, Error> {
        let inputs = Inputs {
            schema: self.schema.clone(),
            data: self.data.clone(),
            persons: self.persons.clone(),
            annotations: self.annotations.clone(),
        };
        let (dataset, annotations) = inputs.load()?;
        Ok(Prepared::new(dataset, &annotations, self.entity_types().as_ref()))
    }

    fn entity_types(&self) -> Option<BTreeSet<String>> {
        self.entities.as_ref().map(|v| {
            v.iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_AUDIT),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Returns whether every audit passed.
fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Anonymize {
            input,
            loss,
            k,
            lambda,
            strategy,
            drop_direct_id,
            out,
        } => {
            let config = RunConfig {
                k,
                lambda,
                strategy,
                entity_types: input.entity_types(),
                weights: NcpWeights::new(loss.wa, loss.wx)?,
                drop_direct_id,
            };
            config.validate()?;
            let prepared = input.prepare()?;
            let output = run(&prepared, &config)?;
            write_outputs(&out, &prepared, &config, &output)?;
            println!(
                "{} persons in {} classes, NCP {:.6} (relational {:.6}, textual {:.6})",
                prepared.view.len(),
                output.classes.len(),
                output.loss.ncp_total,
                output.loss.ncp_relational,
                output.loss.ncp_textual
            );
            report_audit(output.audit.passed, output.audit.violations.len());
            Ok(output.audit.passed)
        }
        Command::Sweep {
            input,
            loss,
            k_list,
            lambda_list,
            strategies,
            jobs,
            out,
        } => {
            let grid = SweepGrid {
                ks: k_list,
                lambdas: lambda_list,
                strategies,
                entity_types: input.entity_types(),
                weights: NcpWeights::new(loss.wa, loss.wx)?,
            };
            let prepared = input.prepare()?;
            let rows: Vec<LossRow> = sweep(&prepared, &grid, jobs)?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            write(
                &out.join("sweep.csv"),
                &loss_csv(&rows, &entity_columns(&prepared.annotations)),
            )?;
            write(&out.join("sweep.json"), &serde_json::to_string_pretty(&rows)?)?;
            let failed = rows.iter().filter(|r| !r.audit_passed).count();
            println!("{} runs written to {}", rows.len(), out.display());
            report_audit(failed == 0, failed);
            Ok(failed == 0)
        }
        Command::Evaluate {
            input,
            loss,
            release,
            k,
            out,
        } => {
            let weights = NcpWeights::new(loss.wa, loss.wx)?;
            let prepared = input.prepare()?;
            let file = std::fs::File::open(&release).map_err(|source| Error::Io {
                path: release.clone(),
                source,
            })?;
            let release = Release::from_csv(std::io::BufReader::new(file))?;
            let (audit, loss) = evaluate(&prepared, &release, k, weights)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
                        path: dir.clone(),
                        source,
                    })?;
                    write(&dir.join("audit.json"), &audit.to_json())?;
                    write(&dir.join("loss.json"), &loss.to_json())?;
                }
                None => println!("{}", loss.to_json()),
            }
            report_audit(audit.passed, audit.violations.len());
            Ok(audit.passed)
        }
    }
}

fn report_audit(passed: bool, problems: usize) {
    if passed {
        println!("audit: PASS");
    } else {
        println!("audit: FAIL ({problems} problems)");
    }
}
