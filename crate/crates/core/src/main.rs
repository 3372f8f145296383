use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use proxystream::clustering::mean_medoid_gap;
use proxystream::experiment::{self, Manifest, RunConfig, RunStatus, SweepGrid};
use proxystream::ingestion::{filter_invoice_cases, generate, read_event_log, write_event_log, LogSchema, SyntheticSpec};
use proxystream::metrics::Metric;
use proxystream::pipeline::{ClusterMethod, RunOutput};

#[derive(Parser)]
#[command(name = "proxystream", version, about = "Cluster-and-average streaming prediction experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic event log and its ground truth.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a rho/tau/seed grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Distance between sample mean and medoid of uniform points.
    MeanMedoid {
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 5, 10, 20, 50, 100])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10])]
        d: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Keep invoice cases that satisfy the milestone and date rules.
    FilterBpic {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Column bindings; the 2019 export layout when absent.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Report path; `<output>.report.json` when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> proxystream::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn cmd_gen(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut spec = SyntheticSpec::from_toml_str(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (store, truth) = generate(&spec)?;
    fs::create_dir_all(out)?;
    experiment::write_atomic(&out.join("events.csv"), &csv_bytes(|b| write_event_log(&store, b))?)?;
    experiment::write_atomic(&out.join("truth.csv"), &csv_bytes(|b| truth.write_csv(b))?)?;
    fs::write(out.join("schema.toml"), LogSchema::for_store(&store).to_toml_string())?;
    println!("{} entities, {} events -> {}", store.num_entities(), store.len(), out.display());
    Ok(())
}

fn write_run(out: &Path, id: &str, run: &RunOutput) -> Result<()> {
    let results = csv_bytes(|b| experiment::write_results(b, &[(id.to_owned(), run)]))?;
    let steps = csv_bytes(|b| experiment::write_step_log(b, run))?;
    experiment::write_atomic(&out.join("results.csv"), &results)?;
    experiment::write_atomic(&out.join("steps.csv"), &steps)?;
    Ok(())
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = RunConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let run = experiment::execute(&cfg, &config_dir(config))?;
    fs::create_dir_all(out)?;
    let id = cfg.run_id();
    write_run(out, &id, &run)?;
    let status = RunStatus { run_id: id.clone(), config_hash: experiment::config_hash(&cfg), seed: cfg.pipeline.seed, error: None };
    Manifest::new(&cfg, vec![status]).write(&out.join("manifest.json"))?;
    for m in Metric::ALL {
        println!("{id} {m} {}", proxystream::metrics::format_value(run.report.mean(m)));
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, jobs: usize) -> Result<()> {
    let grid = SweepGrid::from_path(config)?;
    let outcome = experiment::run_sweep(&grid, &config_dir(config), jobs)?;
    let ok = outcome.succeeded();
    fs::create_dir_all(out)?;
    experiment::write_atomic(&out.join("results.csv"), &csv_bytes(|b| experiment::write_results(b, &ok))?)?;
    let mut methods: Vec<ClusterMethod> = Vec::new();
    for (_, r) in &ok {
        if !methods.contains(&r.config.method) {
            methods.push(r.config.method);
        }
    }
    for &method in &methods {
        let runs: Vec<&RunOutput> = ok.iter().map(|(_, r)| *r).filter(|r| r.config.method == method).collect();
        let prefix = match method {
            ClusterMethod::KMedoids => String::new(),
            m => format!("{}_", serde_json::to_value(m)?.as_str().unwrap_or("method")),
        };
        for m in Metric::ALL {
            let bytes = csv_bytes(|b| experiment::write_pivot(b, &runs, m))?;
            experiment::write_atomic(&out.join(format!("pivot_{prefix}{m}.csv")), &bytes)?;
        }
    }
    let statuses = outcome.statuses();
    let failed = statuses.iter().filter(|s| s.error.is_some()).count();
    Manifest::new(&grid, statuses).write(&out.join("manifest.json"))?;
    println!("{} runs, {} failed -> {}", outcome.runs.len(), failed, out.display());
    if failed == outcome.runs.len() {
        bail!("every run failed; see manifest.json");
    }
    Ok(())
}

fn cmd_mean_medoid(ns: &[usize], ds: &[usize], samples: usize, seed: u64, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "d", "samples", "seed", "gap"])?;
    for &d in ds {
        for &n in ns {
            let gap = mean_medoid_gap(n, d, samples, seed)?;
            w.write_record([n.to_string(), d.to_string(), samples.to_string(), seed.to_string(), gap.to_string()])?;
        }
    }
    fs::create_dir_all(out)?;
    experiment::write_atomic(&out.join("mean_medoid.csv"), &w.into_inner()?)?;
    Ok(())
}

fn cmd_filter(input: &Path, output: &Path, schema: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let schema = match schema {
        Some(p) => LogSchema::from_path(p)?,
        None => LogSchema::bpic2019(),
    };
    let store = read_event_log(input, &schema)?;
    let (kept, rep) = filter_invoice_cases(&store)?;
    experiment::write_atomic(output, &csv_bytes(|b| write_event_log(&kept, b))?)?;
    fs::write(output.with_extension("schema.toml"), LogSchema::for_store(&kept).to_toml_string())?;
    let report_path = report.map(Path::to_path_buf).unwrap_or_else(|| output.with_extension("report.json"));
    fs::write(&report_path, serde_json::to_string_pretty(&rep)?)?;
    println!("kept {} of {} cases, {} events, {} labels", rep.cases_kept, rep.cases_in, rep.events_kept, rep.labels_kept);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Gen { config, seed, out } => cmd_gen(&config, seed, &out),
        Cmd::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Cmd::Sweep { config, out, jobs } => cmd_sweep(&config, &out, jobs),
        Cmd::MeanMedoid { n, d, samples, seed, out } => cmd_mean_medoid(&n, &d, samples, seed, &out),
        Cmd::FilterBpic { input, output, schema, report } => cmd_filter(&input, &output, schema.as_deref(), report.as_deref()),
    }
}
