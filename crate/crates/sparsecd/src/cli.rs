//! Command-line surface. Every command prints one JSON line first, then a
//! short human summary. Exit codes: 0 success, 1 bad input, 2 runtime failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::data::{self, SyntheticSpec};
use crate::error::{Error, Result};
use crate::faceoff::{self, SerialKind};
use crate::harness::{self, ExperimentConfig, MethodSpec, SamplingSpec};
use crate::loss::{Loss, Problem, Regularizer};
use crate::{eso, rng};

#[derive(Parser, Debug)]
#[command(
    name = "sparsecd",
    version,
    about = "Coordinate descent for sparse regularized ERM"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FaceoffSampling {
    Uniform,
    Importance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EsoSampling {
    Uniform,
    Importance,
    TauNice,
    BucketUniform,
    BucketImportance,
    Chunked,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run an experiment config (TOML) for every listed seed.
    Run {
        config: PathBuf,
        /// Output root; overrides $SPARSECD_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Primal vs dual total complexity on a LIBSVM file.
    Faceoff {
        data: PathBuf,
        /// Defaults to 1/n.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 4.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = FaceoffSampling::Importance)]
        sampling: FaceoffSampling,
        #[arg(long)]
        normalize: bool,
    },
    /// Monte Carlo check of the ESO inequality for a sampling of the examples.
    EsoCheck {
        data: PathBuf,
        #[arg(long, value_enum)]
        sampling: EsoSampling,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        h_draws: usize,
        /// Multiplies the ESO vector before checking.
        #[arg(long, default_value_t = 1.0)]
        v_scale: f64,
        /// Used by the importance samplings; defaults to 1/n.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extremal C_P, C_D for binary d x n matrices with alpha nonzeros.
    Bounds {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: u64,
    },
    /// Write a synthetic dataset (spec in TOML) as LIBSVM.
    GenSynthetic {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Pass ratios between two sets of trace CSVs at a target gap.
    Compare {
        a: String,
        b: String,
        #[arg(long)]
        target: f64,
    },
}

fn read_data(path: &PathBuf) -> Result<data::Dataset> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    data::parse_libsvm(std::io::BufReader::new(f), None)
}

fn emit(out: &mut dyn std::io::Write, value: &serde_json::Value, human: &str) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(value)?)?;
    writeln!(out, "{human}")?;
    Ok(())
}

pub fn execute(cmd: Command, out: &mut dyn std::io::Write) -> Result<()> {
    match cmd {
        Command::Run { config, out: root } => {
            let cfg = ExperimentConfig::load(&config)?;
            let root = root.unwrap_or_else(harness::out_root);
            let res = harness::run_experiment(&cfg, &root)?;
            let reached: Vec<f64> = res
                .summaries
                .iter()
                .filter_map(|s| s.epochs_to_target)
                .collect();
            let human = match harness::mean_std(&reached) {
                Some((m, s)) => format!(
                    "{} seeds, {} reached the target; epochs {m:.3} +- {s:.3}; traces in {}",
                    res.summaries.len(),
                    reached.len(),
                    res.dir.display()
                ),
                None => format!(
                    "{} seeds, none reached a target; traces in {}",
                    res.summaries.len(),
                    res.dir.display()
                ),
            };
            emit(
                out,
                &json!({ "dir": res.dir, "runs": res.summaries }),
                &human,
            )
        }
        Command::Faceoff {
            data,
            lambda,
            gamma,
            sampling,
            normalize,
        } => {
            let mut ds = read_data(&data)?;
            if normalize {
                ds = data::normalize_by_avg_col_norm(&ds)?;
            }
            let lambda = lambda.unwrap_or(1.0 / ds.n() as f64);
            let kind = match sampling {
                FaceoffSampling::Uniform => SerialKind::Uniform,
                FaceoffSampling::Importance => SerialKind::Importance,
            };
            let r = faceoff::total_complexities(&ds.x, lambda, gamma, kind)?;
            let side = match r.recommended {
                faceoff::Side::Primal => "primal",
                faceoff::Side::Dual => "dual",
            };
            let human = format!("T_P/T_D = {:.4}; recommended: {side}", r.ratio);
            emit(out, &serde_json::to_value(&r)?, &human)
        }
        Command::EsoCheck {
            data,
            sampling,
            tau,
            trials,
            h_draws,
            v_scale,
            lambda,
            seed,
        } => {
            let ds = read_data(&data)?;
            let lambda = lambda.unwrap_or(1.0 / ds.n() as f64);
            let problem = Problem::new(ds, Loss::Quadratic, Regularizer::L2, lambda)?;
            let spec = match sampling {
                EsoSampling::Uniform => SamplingSpec::Uniform,
                EsoSampling::Importance => SamplingSpec::Importance,
                EsoSampling::TauNice => SamplingSpec::TauNice { tau },
                EsoSampling::BucketUniform => SamplingSpec::BucketUniform { tau },
                EsoSampling::BucketImportance => SamplingSpec::BucketImportance { tau },
                EsoSampling::Chunked => SamplingSpec::Chunked { tau },
            };
            let s = harness::build_sampling(&problem, MethodSpec::Quartz, spec, seed)?
                .ok_or_else(|| Error::invalid("sampling has no ESO"))?;
            let v: Vec<f64> = eso::v_for(&problem.data.x, &s)?
                .iter()
                .map(|x| x * v_scale)
                .collect();
            let mut r = rng::stream(seed, rng::purpose::PROBE);
            let rep = eso::eso_mc_check(&problem.data.x, &s, &v, trials, h_draws, &mut r)?;
            let human = format!(
                "{}: max z = {:.3} over {} directions ({})",
                s.name(),
                rep.max_z,
                rep.h_draws,
                if rep.pass {
                    "ESO holds"
                } else {
                    "ESO violated"
                }
            );
            let mut value = serde_json::to_value(&rep)?;
            value["sampling"] = json!(s.name());
            value["v_scale"] = json!(v_scale);
            emit(out, &value, &human)
        }
        Command::Bounds { d, n, alpha } => {
            let r = faceoff::check_regime_theorems(d, n, alpha)?;
            let b = r.bounds;
            let value = json!({
                "d": d, "n": n, "alpha": alpha,
                // u128 does not fit JSON numbers in general
                "min_c_d": b.min_c_d.to_string(), "max_c_d": b.max_c_d.to_string(),
                "min_c_p": b.min_c_p.to_string(), "max_c_p": b.max_c_p.to_string(),
                "r_dn": b.r_dn, "r_nd": b.r_nd,
                "primal_can_win": r.primal_can_win, "dual_can_win": r.dual_can_win,
                "primal_always_at_alpha": r.primal_always_at_alpha, "dual_always_at_alpha": r.dual_always_at_alpha,
                "primal_always": r.primal_always, "dual_always": r.dual_always,
            });
            let human = format!(
                "C_D in [{}, {}], C_P in [{}, {}]; C_P/C_D in [{:.4}, {:.4}]",
                b.min_c_d,
                b.max_c_d,
                b.min_c_p,
                b.max_c_p,
                1.0 / b.r_nd,
                b.r_dn
            );
            emit(out, &value, &human)
        }
        Command::GenSynthetic { spec, output } => {
            let text = std::fs::read_to_string(&spec)?;
            let spec: SyntheticSpec =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let ds = data::generate_synthetic(&spec)?;
            harness::write_atomic(&output, data::to_libsvm(&ds).as_bytes())?;
            let sigma = eso::speedup_sigma(&ds.x)?;
            let value = json!({ "path": output, "n": ds.n(), "d": ds.d(), "nnz": ds.x.nnz(), "sigma": sigma });
            emit(
                out,
                &value,
                &format!(
                    "wrote {} examples, {} features to {}",
                    ds.n(),
                    ds.d(),
                    output.display()
                ),
            )
        }
        Command::Compare { a, b, target } => {
            let ra = harness::load_traces(&a)?;
            let rb = harness::load_traces(&b)?;
            let rep = harness::compare_runs(&ra, &rb, target)?;
            let human = match rep.mean_ratio {
                Some(m) => format!(
                    "B needs {m:.3}x the passes of A ({} pairs, {} censored){}",
                    rep.pairs.len(),
                    rep.censored,
                    rep.theoretical_ratio
                        .map(|t| format!("; theory {t:.3}"))
                        .unwrap_or_default()
                ),
                None => format!("all {} pairs censored", rep.pairs.len()),
            };
            emit(out, &serde_json::to_value(&rep)?, &human)
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli.cmd, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
