//! `tcnad` command line.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tcnad_core::scenarios::catalog;

use crate::config::{artifact, RunConfig};
use crate::error::{Error, Result, Stage};
use crate::{formats, pipeline};

#[derive(Debug, Parser)]
#[command(
    name = "tcnad",
    version,
    about = "TCN forecaster with Mahalanobis anomaly scoring for vehicle telemetry"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON); defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; sub-seeds not pinned in the config are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact directory (overrides `paths.out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Observation CSV (overrides `paths.data`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic drive cycle to the data path.
    Generate,
    /// Fit the forecaster and error model; write the bundle.
    Train,
    /// Inject anomalies into the test split, score and write the report.
    Evaluate,
    /// Print a saved report.
    Report {
        /// Report file (defaults to report.json in the artifact directory).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the injection scenario catalog.
    Catalog {
        #[arg(long)]
        json: bool,
    },
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(o) = &self.out {
            cfg.paths.out_dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.paths.data = d.clone();
        }
        Ok(cfg)
    }
}

fn init_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("cannot start {n} worker threads: {e}")))
}

/// Runs a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.common.threads)?;
    let cfg = cli.common.resolve()?;
    match cli.command {
        Command::Generate => {
            let rows = pipeline::generate_to_disk(&cfg)?;
            println!("rows={rows} path={}", cfg.paths.data.display());
        }
        Command::Train => {
            let trained = pipeline::train_to_disk(&cfg)?;
            let t = &trained.bundle.training;
            println!(
                "val_loss={:e} best_epoch={} epochs={} bundle={}",
                t.best_val_loss,
                t.best_epoch,
                t.epochs_run,
                cfg.artifact(artifact::BUNDLE).display()
            );
        }
        Command::Evaluate => {
            let ev = pipeline::evaluate_to_disk(&cfg)?;
            let m = &ev.report.metrics;
            println!(
                "auc={} accuracy={} tpr={} fpr={} threshold={} report={}",
                m.auc,
                m.accuracy,
                m.tpr,
                m.fpr,
                m.threshold,
                cfg.artifact(artifact::REPORT).display()
            );
        }
        Command::Report { input } => {
            let path = input.unwrap_or_else(|| cfg.artifact(artifact::REPORT));
            print!("{}", render_report(&formats::read_report(&path)?));
        }
        Command::Catalog { json } => {
            if json {
                let text = serde_json::to_string_pretty(&catalog())
                    .map_err(|e| Error::format(Stage::Report, "catalog", e.to_string()))?;
                println!("{text}");
            } else {
                print!("{}", render_catalog());
            }
        }
    }
    Ok(())
}

pub fn render_report(r: &formats::ReportFile) -> String {
    let m = &r.metrics;
    let c = &m.confusion;
    let mut s = String::new();
    s.push_str(&format!(
        "threshold source   {:?}\ntest windows       {}\nevaluated windows  {}\ninjected windows   {}\n",
        r.threshold_source, r.test_windows, r.evaluated_windows, r.injected_windows
    ));
    s.push_str(&format!(
        "threshold          {:.6}\nG-mean             {:.4}\nAUC                {:.4}\naccuracy           {:.4}\nTPR (recall)       {:.4}\nFPR                {:.4}\nridge lambda       {:e}\nreceptive field    {}\n\n",
        m.threshold, m.g_mean, m.auc, m.accuracy, m.tpr, m.fpr, r.lambda, r.receptive_field
    ));
    s.push_str("                 predicted normal  predicted anomaly\n");
    s.push_str(&format!("actual normal    {:>16}  {:>17}\n", c.tn, c.fp));
    s.push_str(&format!("actual anomaly   {:>16}  {:>17}\n\n", c.fn_, c.tp));
    s.push_str("scenario  injected  detected  missed  miss rate\n");
    for (id, t) in &m.per_scenario {
        s.push_str(&format!(
            "{id:>8}  {:>8}  {:>8}  {:>6}  {:>9.4}\n",
            t.injected,
            t.detected,
            t.missed,
            t.miss_rate()
        ));
    }
    s
}

pub fn render_catalog() -> String {
    let mut s = String::new();
    let mut last = 0;
    for case in catalog() {
        if case.scenario_id != last {
            last = case.scenario_id;
            let names: Vec<&str> = case.directions.iter().map(|(n, _)| n.as_str()).collect();
            s.push_str(&format!("scenario {}: {}\n", last, names.join(", ")));
        }
        let arrows: Vec<String> = case
            .directions
            .iter()
            .map(|(_, d)| d.symbol().to_string())
            .collect();
        s.push_str(&format!(
            "  case {}  {}  {}\n",
            case.case_id,
            arrows.join(" "),
            if case.is_anomaly { "anomaly" } else { "normal" }
        ));
    }
    s
}
