//! Run and sweep configuration, execution and result files.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::event_model::EventStore;
use crate::ingestion::{filter_invoice_cases, generate, read_event_log, LogSchema, SyntheticSpec};
use crate::metrics::{format_value, Metric};
use crate::pipeline::{run_stream, ClusterMethod, PipelineConfig, Rho, RunOutput, UseCaseKind};

pub const RESULTS_HEADER: [&str; 8] = ["run_id", "use_case", "rho", "tau", "seed", "step", "metric", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaPreset {
    Bpic2019,
}

/// Where the events come from: a CSV log or an inline generator spec.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// TOML file with a `LogSchema`.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub preset: Option<SchemaPreset>,
    /// Apply the invoice case filter after reading.
    #[serde(default)]
    pub filter_invoices: bool,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl DataSource {
    fn validate(&self) -> Result<()> {
        match (&self.path, &self.synthetic) {
            (Some(_), Some(_)) => Err(Error::Config("data: give either `path` or `synthetic`, not both".into())),
            (None, None) => Err(Error::Config("data: missing `path` or `synthetic`".into())),
            _ => Ok(()),
        }
    }

    fn resolve(&self, p: &Path, base: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            base.join(p)
        }
    }

    /// Load the store. Relative paths are taken from `base`; `seed`
    /// replaces the generator seed when given.
    pub fn load(&self, base: &Path, seed: Option<u64>) -> Result<EventStore> {
        self.validate()?;
        let store = if let Some(spec) = &self.synthetic {
            let mut spec = spec.clone();
            if let Some(s) = seed {
                spec.seed = s;
            }
            generate(&spec)?.0
        } else {
            let path = self.resolve(self.path.as_ref().expect("validated"), base);
            let schema = match (&self.schema, self.preset) {
                (Some(_), Some(_)) => return Err(Error::Config("data: give either `schema` or `preset`, not both".into())),
                (Some(s), None) => LogSchema::from_path(&self.resolve(s, base))?,
                (None, Some(SchemaPreset::Bpic2019)) => LogSchema::bpic2019(),
                (None, None) => LogSchema::default(),
            };
            read_event_log(&path, &schema)?
        };
        if self.filter_invoices {
            let (kept, report) = filter_invoice_cases(&store)?;
            log::info!("filter kept {} of {} cases", report.cases_kept, report.cases_in);
            return Ok(kept);
        }
        Ok(store)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    pub data: DataSource,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.data.validate()?;
        c.pipeline.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Override the seed of both the pipeline and a synthetic data source.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pipeline.seed = seed;
        if let Some(s) = self.data.synthetic.as_mut() {
            s.seed = seed;
        }
        self
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| default_run_id(&self.pipeline))
    }
}

pub fn default_run_id(p: &PipelineConfig) -> String {
    let tau = p.use_case.tau().map_or_else(|| "NA".to_owned(), |t| t.to_string());
    let mut id = format!("{}_rho{}_tau{}_s{}", p.use_case.name(), p.rho, tau, p.seed);
    match p.method {
        ClusterMethod::KMedoids => {}
        ClusterMethod::Random => id.push_str("_random"),
        ClusterMethod::Bypass => id.push_str("_bypass"),
    }
    id
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub rho: Vec<Rho>,
    /// Journey lengths; ignored for invoices. Empty keeps the base value.
    #[serde(default)]
    pub tau: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Clustering methods; empty keeps the base value.
    #[serde(default)]
    pub methods: Vec<ClusterMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub grid: GridAxes,
    pub base: RunConfig,
}

fn dedup<T: PartialEq + Copy + std::fmt::Display>(axis: &str, values: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for &v in values {
        if out.contains(&v) {
            warn!("duplicate {axis} value {v} dropped from the grid");
        } else {
            out.push(v);
        }
    }
    out
}

impl SweepGrid {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let g: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.rho.is_empty() || self.grid.seeds.is_empty() {
            return Err(Error::Config("grid needs at least one rho and one seed".into()));
        }
        self.grid.rho.iter().try_for_each(|r| r.validate())?;
        if self.grid.tau.iter().any(|&t| t < 2) {
            return Err(Error::Config("grid tau values must be at least 2".into()));
        }
        self.base.data.validate()?;
        self.base.pipeline.validate()
    }

    /// One run config per grid point, duplicates removed, in
    /// seed-major, then tau, rho and method order.
    pub fn expand(&self) -> Vec<RunConfig> {
        let rhos = dedup("rho", &self.grid.rho);
        let seeds = dedup("seed", &self.grid.seeds);
        let taus: Vec<Option<usize>> = match self.base.pipeline.use_case {
            UseCaseKind::Supermarket { .. } if !self.grid.tau.is_empty() => dedup("tau", &self.grid.tau).into_iter().map(Some).collect(),
            UseCaseKind::Supermarket { tau } => vec![Some(tau)],
            UseCaseKind::PaintFactory => {
                if !self.grid.tau.is_empty() {
                    warn!("tau values ignored for the invoice use case");
                }
                vec![None]
            }
        };
        let methods = if self.grid.methods.is_empty() {
            vec![self.base.pipeline.method]
        } else {
            let mut m = Vec::new();
            for &x in &self.grid.methods {
                if m.contains(&x) {
                    warn!("duplicate method {x:?} dropped from the grid");
                } else {
                    m.push(x);
                }
            }
            m
        };
        let mut out = Vec::new();
        for &seed in &seeds {
            for &tau in &taus {
                for &rho in &rhos {
                    for &method in &methods {
                        let mut c = self.base.clone().with_seed(seed);
                        c.run_id = None;
                        if let Some(tau) = tau {
                            c.pipeline.use_case = UseCaseKind::Supermarket { tau };
                        }
                        c.pipeline.rho = rho;
                        c.pipeline.method = method;
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Long-format rows of one run: per step, then the time averages.
pub fn result_rows(run_id: &str, out: &RunOutput) -> Vec<[String; 8]> {
    let p = &out.config;
    let uc = p.use_case.name().to_owned();
    let rho = p.rho.to_string();
    let tau = p.use_case.tau().map_or_else(|| "NA".to_owned(), |t| t.to_string());
    let seed = p.seed.to_string();
    let row = |step: String, m: Metric, v: Option<f64>| {
        [run_id.to_owned(), uc.clone(), rho.clone(), tau.clone(), seed.clone(), step, m.name().to_owned(), format_value(v)]
    };
    let mut rows = Vec::new();
    for s in &out.report.steps {
        for m in Metric::ALL {
            rows.push(row(s.step.to_string(), m, s.get(m)));
        }
    }
    for m in Metric::ALL {
        rows.push(row("mean".into(), m, out.report.mean(m)));
    }
    rows
}

pub fn write_results<W: Write>(w: W, runs: &[(String, &RunOutput)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(RESULTS_HEADER)?;
    for (id, out) in runs {
        for r in result_rows(id, out) {
            csv.write_record(&r)?;
        }
    }
    csv.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn write_step_log<W: Write>(w: W, out: &RunOutput) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["step", "n_train", "k_train", "n_pred", "k_pred", "cold", "resolved"])?;
    for s in &out.steps {
        csv.write_record([
            s.t.to_string(),
            s.n_train.to_string(),
            s.k_train.to_string(),
            s.n_pred.to_string(),
            s.k_pred.to_string(),
            s.cold.to_string(),
            s.metrics.resolved_entities.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<step log>", e))?;
    Ok(())
}

/// One pivot row: the τ label and one cell per ρ column.
pub type PivotRow = (String, Vec<Option<f64>>);

/// τ rows × ρ columns of the time-averaged metric, averaged over seeds.
/// `τ` is `NA` for the invoice use case.
pub fn pivot(runs: &[&RunOutput], metric: Metric) -> (Vec<Rho>, Vec<PivotRow>) {
    let mut rhos: Vec<Rho> = Vec::new();
    let mut cells: BTreeMap<(Option<usize>, Rho), Vec<f64>> = BTreeMap::new();
    let mut taus: Vec<Option<usize>> = Vec::new();
    for out in runs {
        let tau = out.config.use_case.tau();
        if !rhos.contains(&out.config.rho) {
            rhos.push(out.config.rho);
        }
        if !taus.contains(&tau) {
            taus.push(tau);
        }
        let e = cells.entry((tau, out.config.rho)).or_default();
        if let Some(v) = out.report.mean(metric) {
            e.push(v);
        }
    }
    rhos.sort();
    taus.sort();
    let rows = taus
        .into_iter()
        .map(|tau| {
            let label = tau.map_or_else(|| "NA".to_owned(), |t| t.to_string());
            let vals = rhos
                .iter()
                .map(|&r| cells.get(&(tau, r)).filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            (label, vals)
        })
        .collect();
    (rhos, rows)
}

pub fn write_pivot<W: Write>(w: W, runs: &[&RunOutput], metric: Metric) -> Result<()> {
    let (rhos, rows) = pivot(runs, metric);
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["tau".to_owned()];
    header.extend(rhos.iter().map(|r| format!("rho_{r}")));
    csv.write_record(&header)?;
    for (tau, vals) in rows {
        let mut rec = vec![tau];
        rec.extend(vals.into_iter().map(format_value));
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(|e| Error::io("<pivot>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub created: String,
    pub config_hash: String,
    pub runs: Vec<RunStatus>,
}

impl Manifest {
    pub fn new<T: Serialize>(config: &T, runs: Vec<RunStatus>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            created: chrono::Utc::now().to_rfc3339(),
            config_hash: config_hash(config),
            runs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Write `bytes` to `path` through a temporary sibling, so a failed run
/// leaves no partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Load the data and run one config.
pub fn execute(config: &RunConfig, base: &Path) -> Result<RunOutput> {
    let store = config.data.load(base, Some(config.pipeline.seed))?;
    run_stream(&store, &config.pipeline)
}

pub struct SweepOutcome {
    pub runs: Vec<(RunConfig, Result<RunOutput>)>,
}

impl SweepOutcome {
    pub fn succeeded(&self) -> Vec<(String, &RunOutput)> {
        self.runs.iter().filter_map(|(c, r)| r.as_ref().ok().map(|o| (c.run_id(), o))).collect()
    }

    pub fn statuses(&self) -> Vec<RunStatus> {
        self.runs
            .iter()
            .map(|(c, r)| RunStatus {
                run_id: c.run_id(),
                config_hash: config_hash(c),
                seed: c.pipeline.seed,
                error: r.as_ref().err().map(|e| e.to_string()),
            })
            .collect()
    }
}

/// Run every grid point on `jobs` worker threads. Stores are loaded once
/// per distinct data seed. Failed runs are kept with their error.
pub fn run_sweep(grid: &SweepGrid, base: &Path, jobs: usize) -> Result<SweepOutcome> {
    grid.validate()?;
    let configs = grid.expand();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        let seeds: Vec<u64> = {
            let mut s: Vec<u64> = configs.iter().map(|c| c.pipeline.seed).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let stores: HashMap<u64, Result<EventStore>> = seeds.par_iter().map(|&s| (s, grid.base.data.load(base, Some(s)))).collect();
        let runs = configs
            .into_par_iter()
            .map(|c| {
                let r = match &stores[&c.pipeline.seed] {
                    Ok(store) => run_stream(store, &c.pipeline),
                    Err(e) => Err(Error::Config(format!("data for seed {}: {e}", c.pipeline.seed))),
                };
                if let Err(e) = &r {
                    warn!("run {} failed: {e}", c.run_id());
                }
                (c, r)
            })
            .collect();
        Ok(SweepOutcome { runs })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[data.synthetic]
flavor = "shopper"
n_entities = 60
n_archetypes = 3
noise_scale = 1.0
horizon = 8

[pipeline]
rho = 2
use_case = { kind = "supermarket", tau = 3 }
"#;

    fn grid(axes: &str) -> SweepGrid {
        let base = BASE.replace("[data.synthetic]", "[base.data.synthetic]").replace("[pipeline]", "[base.pipeline]");
        SweepGrid::from_toml_str(&format!("[grid]\n{axes}\n{base}")).unwrap()
    }

    #[test]
    fn full_grid_sizes() {
        let rhos: Vec<String> = std::iter::once("1".to_owned()).chain((1..=17).step_by(2).map(|e| (1u64 << e).to_string())).chain(std::iter::once("\"all\"".into())).collect();
        assert_eq!(rhos.len(), 11);
        let g = grid(&format!("rho = [{}]\ntau = [2,3,4,5,6,7,8,9]\nseeds = [0]", rhos.join(",")));
        assert_eq!(g.expand().len(), 88);

        let paint = BASE
            .replace("flavor = \"shopper\"", "flavor = \"invoice\"")
            .replace("use_case = { kind = \"supermarket\", tau = 3 }", "use_case = { kind = \"paint_factory\" }")
            .replace("[data.synthetic]", "[base.data.synthetic]")
            .replace("[pipeline]", "[base.pipeline]");
        let rhos: Vec<String> = (1..=178).map(|r| r.to_string()).chain(std::iter::once("\"all\"".into())).collect();
        let g = SweepGrid::from_toml_str(&format!("[grid]\nrho = [{}]\nseeds = [1]\n{paint}", rhos.join(","))).unwrap();
        assert_eq!(g.expand().len(), 179);
    }

    #[test]
    fn duplicates_are_dropped() {
        let g = grid("rho = [1, 2, 2, \"all\", \"all\"]\nseeds = [3, 3]");
        let runs = g.expand();
        assert_eq!(runs.len(), 3);
        let ids: Vec<String> = runs.iter().map(RunConfig::run_id).collect();
        assert_eq!(ids, ["supermarket_rho1_tau3_s3", "supermarket_rho2_tau3_s3", "supermarket_rhoall_tau3_s3"]);
    }

    #[test]
    fn sweep_matches_single_runs_and_is_pool_independent() {
        let g = grid("rho = [1, 4]\nseeds = [5, 6]");
        let a = run_sweep(&g, Path::new("."), 1).unwrap();
        let b = run_sweep(&g, Path::new("."), 3).unwrap();
        let csv = |o: &SweepOutcome| {
            let mut buf = Vec::new();
            write_results(&mut buf, &o.succeeded()).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&b));
        for (c, r) in &a.runs {
            let alone = execute(c, Path::new(".")).unwrap();
            let mut x = Vec::new();
            let mut y = Vec::new();
            write_results(&mut x, &[(c.run_id(), &alone)]).unwrap();
            write_results(&mut y, &[(c.run_id(), r.as_ref().unwrap())]).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn results_layout() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        let out = execute(&c, Path::new(".")).unwrap();
        let rows = result_rows(&c.run_id(), &out);
        assert_eq!(rows.len(), 4 * (out.report.steps.len() + 1));
        let means: Vec<&[String; 8]> = rows.iter().filter(|r| r[5] == "mean").collect();
        assert_eq!(means.len(), 4);
        assert!(rows.iter().any(|r| r[7] == "NA"));
        let (rhos, pv) = pivot(&[&out], Metric::EntityRmse);
        assert_eq!(rhos, vec![Rho::Fixed(2)]);
        assert_eq!(pv[0].0, "3");
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::from_toml_str("[pipeline]\nrho = 1\nuse_case = { kind = \"paint_factory\" }\n[data]\n").is_err());
        assert!(RunConfig::from_toml_str(&BASE.replace("tau = 3", "tau = 1")).is_err());
        let missing = BASE.replace("[data.synthetic]", "[data]\npath = \"nope.csv\"\n[unused]");
        assert!(RunConfig::from_toml_str(&missing).is_err());
        let missing = "[data]\npath = \"/nonexistent/events.csv\"\n[pipeline]\nrho = 1\nuse_case = { kind = \"paint_factory\" }\n";
        let c = RunConfig::from_toml_str(missing).unwrap();
        assert!(matches!(execute(&c, Path::new(".")), Err(Error::Io { .. })));
    }

    #[test]
    fn hash_is_stable() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(config_hash(&c), config_hash(&c.clone()));
        assert_ne!(config_hash(&c), config_hash(&c.clone().with_seed(9)));
        assert_eq!(config_hash(&c).len(), 64);
    }
}
