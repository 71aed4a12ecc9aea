//! Experiment configs, per-seed runs, trace files and run comparison.
//!
//! A config is a TOML file:
//!
//! ```toml
//! name = "demo"
//! seeds = [1, 2, 3]
//!
//! [problem]
//! data = { kind = "synthetic", n = 200, d = 50, sparsity = 0.3, norm_law = { law = "uniform" }, seed = 7 }
//! loss = { kind = "logistic" }
//! regularizer = { kind = "l2" }
//! lambda_n = 1.0          # lambda = lambda_n / n; or give `lambda` directly
//!
//! [method]
//! id = "quartz"
//!
//! [sampling]
//! kind = "bucket_importance"
//! tau = 4
//!
//! [budget]
//! max_epochs = 50
//! target_gap = 1e-8
//! ```
//!
//! Traces land under `$SPARSECD_OUT` (default `runs`).

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset, NormLaw, SyntheticSpec};
use crate::dual::{self, AdaPlus, PlusOption};
use crate::error::{Error, Result};
use crate::eso;
use crate::loss::{Loss, Problem, Regularizer};
use crate::primal;
use crate::rng::{self, purpose};
use crate::sampling::{self, Partition, Sampling};
use crate::trace::{RunOptions, Status, Trace, TraceRow};

pub const OUT_ENV: &str = "SPARSECD_OUT";
pub const INDEX_FILE: &str = "index.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        d: Option<usize>,
    },
    Synthetic {
        n: usize,
        d: usize,
        sparsity: f64,
        norm_law: NormLaw,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub data: DataSource,
    pub loss: Loss,
    #[serde(default = "default_reg")]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// `lambda = lambda_n / n`
    #[serde(default)]
    pub lambda_n: Option<f64>,
    #[serde(default)]
    pub normalize: bool,
}

fn default_reg() -> Regularizer {
    Regularizer::L2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Sdca,
    Adasdca,
    AdasdcaPlus {
        #[serde(default = "default_m")]
        m: f64,
        #[serde(default = "default_option")]
        option: PlusOption,
    },
    Quartz,
    Dfsdca,
    /// Primal coordinate descent; the sampling ranges over features.
    Nsync,
}

fn default_m() -> f64 {
    AdaPlus::default().m
}

fn default_option() -> PlusOption {
    AdaPlus::default().option
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Sdca => "sdca",
            MethodSpec::Adasdca => "adasdca",
            MethodSpec::AdasdcaPlus { .. } => "adasdca_plus",
            MethodSpec::Quartz => "quartz",
            MethodSpec::Dfsdca => "dfsdca",
            MethodSpec::Nsync => "nsync",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingSpec {
    Uniform,
    /// `p_j ~ v_j + n lambda gamma`
    Importance,
    TauNice {
        tau: usize,
    },
    /// Random equal-size buckets, uniform within each.
    BucketUniform {
        tau: usize,
    },
    /// Random buckets with the practical within-bucket importance weights.
    BucketImportance {
        tau: usize,
    },
    /// Naive chunks of the coordinates, `tau` of them per iteration.
    Chunked {
        tau: usize,
    },
    FullBatch,
    /// Residue-driven probabilities of the adaptive methods.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_epochs")]
    pub max_epochs: f64,
    #[serde(default)]
    pub target_gap: Option<f64>,
}

fn default_epochs() -> f64 {
    100.0
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_epochs: default_epochs(),
            target_gap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Iterations between checkpoints; one epoch when absent.
    #[serde(default)]
    pub checkpoint_iters: Option<u64>,
    /// Directory under the output root; `<name>-<hash>` when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub problem: ProblemConfig,
    pub method: MethodSpec,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub budget: Budget,
}

fn default_name() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_sampling() -> SamplingSpec {
    SamplingSpec::Uniform
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DataSource::Libsvm { path: p, .. } = &mut cfg.problem.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        match (self.problem.lambda, self.problem.lambda_n) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either lambda or lambda_n, not both".into(),
                ))
            }
            (None, None) => return Err(Error::Config("missing lambda (or lambda_n)".into())),
            _ => {}
        }
        if !(self.budget.max_epochs > 0.0) {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.checkpoint_iters == Some(0) {
            return Err(Error::Config("checkpoint_iters must be positive".into()));
        }
        use SamplingSpec as S;
        let ok = match self.method {
            MethodSpec::Sdca => matches!(self.sampling, S::Uniform | S::Importance),
            MethodSpec::Adasdca | MethodSpec::AdasdcaPlus { .. } => self.sampling == S::Adaptive,
            MethodSpec::Quartz | MethodSpec::Dfsdca | MethodSpec::Nsync => {
                self.sampling != S::Adaptive
            }
        };
        if !ok {
            return Err(Error::Config(format!(
                "method {} does not accept sampling {:?}",
                self.method.name(),
                self.sampling
            )));
        }
        if self.problem.regularizer != Regularizer::L2 {
            return Err(Error::Config(
                "every ERM method here needs the L2 regularizer".into(),
            ));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("configs serialize");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_dir(&self, root: &Path) -> PathBuf {
        match &self.output {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join(format!("{}-{}", self.name, &self.hash()[..12])),
        }
    }
}

/// Output root: `$SPARSECD_OUT` or `runs`.
pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn load_dataset(src: &DataSource) -> Result<Dataset> {
    match src {
        DataSource::Libsvm { path, d } => {
            let f = std::fs::File::open(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            data::parse_libsvm(std::io::BufReader::new(f), *d)
        }
        DataSource::Synthetic {
            n,
            d,
            sparsity,
            norm_law,
            seed,
        } => data::generate_synthetic(&SyntheticSpec {
            n: *n,
            d: *d,
            sparsity: *sparsity,
            norm_law: norm_law.clone(),
            seed: *seed,
        }),
    }
}

pub fn build_problem(cfg: &ProblemConfig) -> Result<Problem> {
    let mut ds = load_dataset(&cfg.data)?;
    if cfg.normalize {
        ds = data::normalize_by_avg_col_norm(&ds)?;
    }
    let lambda = match (cfg.lambda, cfg.lambda_n) {
        (Some(l), None) => l,
        (None, Some(c)) => c / ds.n() as f64,
        _ => return Err(Error::Config("give exactly one of lambda, lambda_n".into())),
    };
    Problem::new(ds, cfg.loss, cfg.regularizer, lambda)
}

/// The sampling a method runs with. Dual methods sample examples; NSync
/// samples features. Bucket partitions come from the run seed.
pub fn build_sampling(
    problem: &Problem,
    method: MethodSpec,
    spec: SamplingSpec,
    seed: u64,
) -> Result<Option<Sampling>> {
    // coordinates are the columns of `coords`
    let owned;
    let coords = if method == MethodSpec::Nsync {
        owned = problem.data.x.transpose();
        &owned
    } else {
        &problem.data.x
    };
    let m = coords.n();
    let nlg = problem.nlg();
    let buckets = |tau: usize| -> Result<Partition> {
        sampling::random_buckets(m, tau, &mut rng::stream(seed, purpose::PARTITION))
    };
    let s = match spec {
        SamplingSpec::Adaptive => return Ok(None),
        SamplingSpec::Uniform => Sampling::uniform(m),
        SamplingSpec::Importance => {
            Sampling::serial(sampling::importance_probs(&eso::v_serial(coords), nlg))?
        }
        SamplingSpec::TauNice { tau } => Sampling::tau_nice(m, tau)?,
        SamplingSpec::FullBatch => Sampling::tau_nice(m, m)?,
        SamplingSpec::BucketUniform { tau } => {
            let b = buckets(tau)?;
            let mut p = vec![0.0; m];
            for g in b.groups() {
                for &j in g {
                    p[j] = 1.0 / g.len() as f64;
                }
            }
            Sampling::bucket(b, p)?
        }
        SamplingSpec::BucketImportance { tau } => {
            let b = buckets(tau)?;
            let p = sampling::bucket_probs_practical(&eso::v_unif(coords, &b), nlg, &b);
            Sampling::bucket(b, p)?
        }
        SamplingSpec::Chunked { tau } => {
            let nnz = coords.col_stats().nnz;
            let g = sampling::naive_chunks(&nnz)?;
            if tau == 0 || tau > g.len() {
                return Err(Error::invalid(format!(
                    "tau = {tau} but only {} chunks",
                    g.len()
                )));
            }
            Sampling::chunked(g, tau)?
        }
    };
    Ok(Some(s))
}

pub fn run_seed(cfg: &ExperimentConfig, problem: &Problem, seed: u64) -> Result<Trace> {
    let opts = RunOptions {
        seed,
        max_epochs: cfg.budget.max_epochs,
        target_gap: cfg.budget.target_gap,
        checkpoint_iters: cfg.checkpoint_iters,
        ..RunOptions::default()
    };
    let s = build_sampling(problem, cfg.method, cfg.sampling, seed)?;
    let need = || {
        s.as_ref()
            .ok_or_else(|| Error::Config("method needs a fixed sampling".into()))
    };
    match cfg.method {
        MethodSpec::Sdca => {
            let p = need()?
                .marginals()
                .ok_or_else(|| Error::invalid("serial sampling without marginals"))?;
            dual::sdca_run(problem, p, &opts)
        }
        MethodSpec::Adasdca => dual::adasdca_run(problem, &opts),
        MethodSpec::AdasdcaPlus { m, option } => dual::adasdca_plus_run(
            problem,
            AdaPlus {
                m,
                option,
                ..AdaPlus::default()
            },
            &opts,
        ),
        MethodSpec::Quartz => dual::quartz_run(problem, need()?, &opts),
        MethodSpec::Dfsdca => primal::dfsdca_run(problem, need()?, &opts),
        MethodSpec::Nsync => primal::nsync_run(problem, need()?, &opts),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub name: String,
    pub seed: u64,
    pub method: String,
    pub rows: usize,
    pub iterations: u64,
    pub status: Status,
    pub epochs_to_target: Option<f64>,
    pub passes_to_target: Option<f64>,
    pub final_gap: Option<f64>,
    pub theta: Option<f64>,
    pub version: String,
    pub notes: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub dir: PathBuf,
    pub summaries: Vec<RunSummary>,
    pub traces: Vec<Trace>,
}

/// Writes `bytes` to `path` through a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, hash: &str, seed: u64, t: &Trace) -> RunSummary {
    let (epochs, passes) = match cfg.budget.target_gap {
        Some(g) => (t.epochs_to(g), t.passes_to(g)),
        None => (None, None),
    };
    RunSummary {
        config_hash: hash.to_string(),
        name: cfg.name.clone(),
        seed,
        method: cfg.method.name().into(),
        rows: t.rows.len(),
        iterations: t.iterations,
        status: t.status,
        epochs_to_target: epochs,
        passes_to_target: passes,
        final_gap: t.last().gap,
        theta: t.theta,
        version: env!("CARGO_PKG_VERSION").into(),
        notes: t.notes.clone(),
    }
}

/// Runs every seed (concurrently), writes `seed-<s>.csv`, `seed-<s>.json`
/// and a `seed-<s>.meta.json` sidecar with timings, then appends one row to
/// the index under `root`.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentResult> {
    cfg.validate()?;
    let problem = build_problem(&cfg.problem)?;
    let hash = cfg.hash();
    let dir = cfg.out_dir(root);
    std::fs::create_dir_all(&dir)?;
    let results: Vec<Result<(Trace, f64)>> = std::thread::scope(|sc| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let problem = &problem;
                sc.spawn(move || {
                    let start = std::time::Instant::now();
                    run_seed(cfg, problem, seed).map(|t| (t, start.elapsed().as_secs_f64()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    for (&seed, r) in cfg.seeds.iter().zip(results) {
        let (t, secs) = r?;
        let s = summarize(cfg, &hash, seed, &t);
        write_atomic(
            &dir.join(format!("seed-{seed}.csv")),
            t.to_csv()?.as_bytes(),
        )?;
        write_atomic(
            &dir.join(format!("seed-{seed}.json")),
            serde_json::to_string_pretty(&s)?.as_bytes(),
        )?;
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = serde_json::json!({
            "finished_unix": stamp,
            "elapsed_seconds": secs,
            "measured_seconds": t.measured_seconds,
        });
        write_atomic(
            &dir.join(format!("seed-{seed}.meta.json")),
            serde_json::to_string_pretty(&meta)?.as_bytes(),
        )?;
        summaries.push(s);
        traces.push(t);
    }
    append_index(root, cfg, &hash, &dir, &summaries)?;
    Ok(ExperimentResult {
        dir,
        summaries,
        traces,
    })
}

pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

const INDEX_HEADER: [&str; 9] = [
    "config_hash",
    "name",
    "method",
    "dir",
    "seeds",
    "reached",
    "mean_epochs",
    "std_epochs",
    "epochs_per_seed",
];

fn append_index(
    root: &Path,
    cfg: &ExperimentConfig,
    hash: &str,
    dir: &Path,
    s: &[RunSummary],
) -> Result<()> {
    let path = root.join(INDEX_FILE);
    let mut text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    if text.is_empty() {
        w.write_record(INDEX_HEADER)?;
    }
    let reached: Vec<f64> = s.iter().filter_map(|r| r.epochs_to_target).collect();
    let ms = mean_std(&reached);
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let per_seed = s
        .iter()
        .map(|r| {
            format!(
                "{}={}",
                r.seed,
                r.epochs_to_target
                    .map_or("censored".into(), |e| e.to_string())
            )
        })
        .collect::<Vec<_>>()
        .join(";");
    w.write_record([
        hash.to_string(),
        cfg.name.clone(),
        cfg.method.name().to_string(),
        dir.display().to_string(),
        s.len().to_string(),
        reached.len().to_string(),
        fmt(ms.map(|m| m.0)),
        fmt(ms.map(|m| m.1)),
        per_seed,
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    text.push_str(std::str::from_utf8(&bytes).expect("utf-8"));
    write_atomic(&path, text.as_bytes())
}

/// Passes at the first row whose gap (or primal when no gap) is at most `target`.
pub fn passes_to(rows: &[TraceRow], target: f64) -> Option<f64> {
    rows.iter()
        .find(|r| r.gap.unwrap_or(r.primal) <= target)
        .map(|r| r.effective_passes)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadedTrace {
    pub path: PathBuf,
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub rows: Vec<TraceRow>,
}

/// Loads every trace CSV matching `pattern`, with seed and rate from the
/// JSON summary next to it when present.
pub fn load_traces(pattern: &str) -> Result<Vec<LoadedTrace>> {
    let paths =
        glob::glob(pattern).map_err(|e| Error::invalid(format!("bad glob `{pattern}`: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| Error::Io(e.into()))?;
        if p.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let rows = Trace::from_csv(&std::fs::read_to_string(&p)?)?;
        let summary: Option<RunSummary> = std::fs::read_to_string(p.with_extension("json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let seed = summary
            .as_ref()
            .map(|s| s.seed)
            .or_else(|| p.file_stem()?.to_str()?.strip_prefix("seed-")?.parse().ok());
        out.push(LoadedTrace {
            path: p,
            seed,
            theta: summary.and_then(|s| s.theta),
            rows,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no trace files match `{pattern}`")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairResult {
    pub seed: Option<u64>,
    pub passes_a: Option<f64>,
    pub passes_b: Option<f64>,
    /// `passes_b / passes_a`; `None` when either side is censored.
    pub ratio: Option<f64>,
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub target: f64,
    pub pairs: Vec<PairResult>,
    pub censored: usize,
    pub mean_ratio: Option<f64>,
    pub std_ratio: Option<f64>,
    /// `mean theta_a / mean theta_b` when both sides carry a rate.
    pub theoretical_ratio: Option<f64>,
}

/// Pairs traces by seed (by position when the seed sets differ) and reports
/// how many times fewer passes set A needed to reach `target`.
pub fn compare_runs(a: &[LoadedTrace], b: &[LoadedTrace], target: f64) -> Result<CompareReport> {
    let seeds = |v: &[LoadedTrace]| {
        let mut s: Vec<Option<u64>> = v.iter().map(|t| t.seed).collect();
        s.sort();
        s
    };
    let by_seed = seeds(a) == seeds(b) && a.iter().all(|t| t.seed.is_some());
    let mut a: Vec<&LoadedTrace> = a.iter().collect();
    let mut b: Vec<&LoadedTrace> = b.iter().collect();
    if by_seed {
        a.sort_by_key(|t| t.seed);
        b.sort_by_key(|t| t.seed);
    } else if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "cannot pair {} traces with {}",
            a.len(),
            b.len()
        )));
    }
    let pairs: Vec<PairResult> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            let (pa, pb) = (passes_to(&x.rows, target), passes_to(&y.rows, target));
            let ratio = match (pa, pb) {
                (Some(pa), Some(pb)) if pa > 0.0 => Some(pb / pa),
                (Some(_), Some(_)) => Some(1.0),
                _ => None,
            };
            PairResult {
                seed: x.seed,
                passes_a: pa,
                passes_b: pb,
                ratio,
                censored: ratio.is_none(),
            }
        })
        .collect();
    let ratios: Vec<f64> = pairs.iter().filter_map(|p| p.ratio).collect();
    let ms = mean_std(&ratios);
    let theta = |v: &[&LoadedTrace]| -> Option<f64> {
        let t: Option<Vec<f64>> = v.iter().map(|x| x.theta).collect();
        t.and_then(|t| mean_std(&t)).map(|m| m.0)
    };
    let theoretical_ratio = match (theta(&a), theta(&b)) {
        (Some(ta), Some(tb)) if tb > 0.0 => Some(ta / tb),
        _ => None,
    };
    Ok(CompareReport {
        target,
        censored: pairs.iter().filter(|p| p.censored).count(),
        pairs,
        mean_ratio: ms.map(|m| m.0),
        std_ratio: ms.map(|m| m.1),
        theoretical_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(method: &str, sampling: &str, extra: &str) -> String {
        format!(
            r#"
name = "t"
seeds = [1, 2]
{extra}
[problem]
data = {{ kind = "synthetic", n = 40, d = 12, sparsity = 0.4, norm_law = {{ law = "uniform" }}, seed = 3 }}
loss = {{ kind = "quadratic" }}
lambda_n = 1.0

[method]
{method}

[sampling]
{sampling}

[budget]
max_epochs = 60
target_gap = 1e-8
"#
        )
    }

    #[test]
    fn parses_and_hashes() {
        let a = ExperimentConfig::from_toml(&config(
            "id = \"quartz\"",
            "kind = \"tau_nice\"\ntau = 4",
            "",
        ))
        .unwrap();
        assert_eq!(a.sampling, SamplingSpec::TauNice { tau: 4 });
        assert_eq!(a.hash().len(), 64);
        let b = ExperimentConfig::from_toml(&config(
            "id = \"quartz\"",
            "kind = \"tau_nice\"\ntau = 5",
            "",
        ))
        .unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(
            a.hash(),
            ExperimentConfig::from_toml(&config(
                "id = \"quartz\"",
                "kind = \"tau_nice\"\ntau = 4",
                ""
            ))
            .unwrap()
            .hash()
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let e = ExperimentConfig::from_toml(&config("id = \"adasdca\"", "kind = \"uniform\"", ""))
            .unwrap_err();
        assert!(e.is_validation() && e.to_string().contains("adasdca"));
        let e = ExperimentConfig::from_toml(&config(
            "id = \"sdca\"",
            "kind = \"tau_nice\"\ntau = 2",
            "",
        ))
        .unwrap_err();
        assert!(e.is_validation());
        let e = ExperimentConfig::from_toml(&config(
            "id = \"quartz\"",
            "kind = \"uniform\"",
            "bogus = 1",
        ))
        .unwrap_err();
        assert!(e.is_validation());
        let e = ExperimentConfig::from_toml("seeds = [1]").unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn runs_are_deterministic_and_indexed() {
        let root = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(&config(
            "id = \"quartz\"",
            "kind = \"bucket_importance\"\ntau = 4",
            "",
        ))
        .unwrap();
        let r1 = run_experiment(&cfg, root.path()).unwrap();
        let first = std::fs::read(r1.dir.join("seed-1.csv")).unwrap();
        let first_json = std::fs::read(r1.dir.join("seed-1.json")).unwrap();
        let r2 = run_experiment(&cfg, root.path()).unwrap();
        assert_eq!(first, std::fs::read(r2.dir.join("seed-1.csv")).unwrap());
        assert_eq!(
            first_json,
            std::fs::read(r2.dir.join("seed-1.json")).unwrap()
        );
        for s in &r1.summaries {
            assert_eq!(s.status, Status::Converged);
            assert!(s.final_gap.unwrap() <= 1e-8);
        }
        let index = std::fs::read_to_string(root.path().join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 3);
        assert!(index.starts_with("config_hash,"));
        let t = load_traces(&format!("{}/seed-*.csv", r1.dir.display())).unwrap();
        assert_eq!(t.len(), 2);
        let rep = compare_runs(&t, &t, 1e-8).unwrap();
        assert_eq!(rep.mean_ratio, Some(1.0));
        assert_eq!(rep.theoretical_ratio, Some(1.0));
        assert_eq!(rep.censored, 0);
    }

    #[test]
    fn every_method_runs() {
        let cases = [
            ("id = \"sdca\"", "kind = \"importance\""),
            ("id = \"adasdca\"", "kind = \"adaptive\""),
            ("id = \"adasdca_plus\"", "kind = \"adaptive\""),
            ("id = \"quartz\"", "kind = \"chunked\"\ntau = 2"),
            ("id = \"dfsdca\"", "kind = \"bucket_uniform\"\ntau = 3"),
            ("id = \"nsync\"", "kind = \"importance\""),
            ("id = \"nsync\"", "kind = \"full_batch\""),
        ];
        for (m, s) in cases {
            let cfg = ExperimentConfig::from_toml(&config(m, s, "")).unwrap();
            let p = build_problem(&cfg.problem).unwrap();
            let t = run_seed(&cfg, &p, 1).unwrap();
            assert!(t.rows.len() >= 2, "{m} {s}");
            let g = t.last().gap.unwrap();
            assert!(g < t.rows[0].gap.unwrap() && g >= -1e-9, "{m} {s}: {g}");
        }
    }

    #[test]
    fn censored_pairs_are_marked() {
        let row = |passes: f64, gap: f64| TraceRow {
            epoch: passes,
            effective_passes: passes,
            wall_seconds: 0.0,
            simulated_parallel_cost: 0.0,
            primal: 1.0,
            dual: None,
            gap: Some(gap),
            extra: BTreeMap::new(),
        };
        let t = |seed, rows| LoadedTrace {
            path: PathBuf::new(),
            seed: Some(seed),
            theta: None,
            rows,
        };
        let a = vec![
            t(1, vec![row(0.0, 1.0), row(2.0, 1e-9)]),
            t(2, vec![row(0.0, 1.0), row(3.0, 1e-3)]),
        ];
        let b = vec![
            t(1, vec![row(0.0, 1.0), row(5.0, 1e-9)]),
            t(2, vec![row(0.0, 1.0), row(3.0, 1e-9)]),
        ];
        let r = compare_runs(&a, &b, 1e-8).unwrap();
        assert_eq!(r.pairs[0].ratio, Some(2.5));
        assert!(r.pairs[1].censored && r.pairs[1].ratio.is_none());
        assert_eq!(r.censored, 1);
        assert_eq!(r.mean_ratio, Some(2.5));
        assert_eq!(r.theoretical_ratio, None);
    }

    #[test]
    fn libsvm_paths_resolve_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.svm"), "1 1:0.5 2:1\n-1 2:2\n1 1:1\n").unwrap();
        let text = r#"
[problem]
data = { kind = "libsvm", path = "d.svm" }
loss = { kind = "logistic" }
lambda = 0.1
[method]
id = "sdca"
"#;
        let cfg_path = dir.path().join("c.toml");
        std::fs::write(&cfg_path, text).unwrap();
        let cfg = ExperimentConfig::load(&cfg_path).unwrap();
        let p = build_problem(&cfg.problem).unwrap();
        assert_eq!((p.d(), p.n()), (2, 3));
    }
}
