//! Run traces, work accounting and the options every solver shares.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampling::Block;

pub const CSV_HEADER: [&str; 8] = [
    "epoch",
    "effective_passes",
    "wall_seconds",
    "simulated_parallel_cost",
    "primal",
    "dual",
    "gap",
    "extra",
];

/// Seconds charged per counted operation by the deterministic clock.
pub const SECONDS_PER_OP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallClock {
    /// `wall_seconds` is the operation count times `SECONDS_PER_OP`.
    #[default]
    Proxy,
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: f64,
    pub effective_passes: f64,
    pub wall_seconds: f64,
    pub simulated_parallel_cost: f64,
    pub primal: f64,
    pub dual: Option<f64>,
    pub gap: Option<f64>,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Target reached.
    Converged,
    BudgetExhausted,
    /// Every dual residue vanished.
    Optimal,
    /// The forcing function hit zero away from a known optimum.
    Stationary,
    /// A non-finite value showed up; the last row is diagnostic.
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub status: Status,
    pub iterations: u64,
    /// The rate constant the method runs with, when it has one.
    pub theta: Option<f64>,
    /// Elapsed seconds at each row; kept out of the CSV.
    pub measured_seconds: Vec<f64>,
    pub notes: BTreeMap<String, String>,
}

impl Trace {
    pub(crate) fn new() -> Self {
        Trace {
            rows: Vec::new(),
            status: Status::BudgetExhausted,
            iterations: 0,
            theta: None,
            measured_seconds: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn last(&self) -> &TraceRow {
        self.rows
            .last()
            .expect("traces always hold the initial row")
    }

    /// First row whose gap (or primal value when there is no gap) is at most `target`.
    pub fn first_below(&self, target: f64) -> Option<&TraceRow> {
        self.rows
            .iter()
            .find(|r| r.gap.unwrap_or(r.primal) <= target)
    }

    pub fn epochs_to(&self, target: f64) -> Option<f64> {
        self.first_below(target).map(|r| r.epoch)
    }

    pub fn passes_to(&self, target: f64) -> Option<f64> {
        self.first_below(target).map(|r| r.effective_passes)
    }

    pub fn extra_series(&self, key: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.extra.get(key).copied())
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let extra = r
                .extra
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.epoch.to_string(),
                r.effective_passes.to_string(),
                r.wall_seconds.to_string(),
                r.simulated_parallel_cost.to_string(),
                r.primal.to_string(),
                opt(r.dual),
                opt(r.gap),
                extra,
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Vec<TraceRow>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(crate::Error::invalid(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| crate::Error::invalid(format!("bad number `{s}` in trace")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut extra = BTreeMap::new();
            for kv in rec[7].split(';').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| crate::Error::invalid(format!("bad extra field `{kv}`")))?;
                extra.insert(k.to_string(), num(v)?);
            }
            rows.push(TraceRow {
                epoch: num(&rec[0])?,
                effective_passes: num(&rec[1])?,
                wall_seconds: num(&rec[2])?,
                simulated_parallel_cost: num(&rec[3])?,
                primal: num(&rec[4])?,
                dual: opt(&rec[5])?,
                gap: opt(&rec[6])?,
                extra,
            });
        }
        Ok(rows)
    }
}

/// Known optimum, supplied by tests to trace distance-type potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub max_epochs: f64,
    pub target_gap: Option<f64>,
    /// Iterations between checkpoints; one epoch when `None`.
    pub checkpoint_iters: Option<u64>,
    pub wall_clock: WallClock,
    /// Starting iterate: `alpha` for dual-type methods, `w` for NSync.
    pub init: Option<Vec<f64>>,
    pub optimum: Option<Optimum>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            max_epochs: 100.0,
            target_gap: None,
            checkpoint_iters: None,
            wall_clock: WallClock::Proxy,
            init: None,
            optimum: None,
        }
    }
}

/// Work accounting for one run.
#[derive(Clone, Debug)]
pub struct Meter {
    nnz_total: f64,
    /// Nonzeros read by coordinate updates and residue passes.
    pub visited: u64,
    /// Arithmetic operations, the unit of the deterministic clock.
    pub ops: u64,
    pub parallel_cost: f64,
    start: Instant,
}

impl Meter {
    pub fn new(nnz_total: usize) -> Self {
        Meter {
            nnz_total: nnz_total.max(1) as f64,
            visited: 0,
            ops: 0,
            parallel_cost: 0.0,
            start: Instant::now(),
        }
    }

    #[inline]
    pub fn visit(&mut self, nnz: usize) {
        self.visited += nnz as u64;
        self.ops += nnz as u64;
    }

    #[inline]
    pub fn ops(&mut self, k: u64) {
        self.ops += k;
    }

    /// Charges the slowest parallel unit of `block`, counted in nonzeros.
    pub fn parallel(&mut self, block: &Block, nnz: impl Fn(usize) -> usize) {
        self.parallel_cost += unit_cost(block, &nnz);
    }

    pub fn passes(&self) -> f64 {
        self.visited as f64 / self.nnz_total
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

pub(crate) fn unit_cost(block: &Block, nnz: &impl Fn(usize) -> usize) -> f64 {
    block
        .units
        .iter()
        .map(|u| u.iter().map(|&j| nnz(j)).sum::<usize>())
        .max()
        .unwrap_or(0) as f64
}

/// Checkpoint bookkeeping shared by the solvers.
pub(crate) struct Recorder {
    pub trace: Trace,
    pub meter: Meter,
    pub epoch_len: u64,
    pub every: u64,
    pub max_iters: u64,
    target: Option<f64>,
    clock: WallClock,
}

impl Recorder {
    pub fn new(opts: &RunOptions, nnz_total: usize, expected_block: f64, n: usize) -> Self {
        let epoch_len = ((n as f64 / expected_block).ceil() as u64).max(1);
        let every = opts.checkpoint_iters.unwrap_or(epoch_len).max(1);
        let max_iters = (opts.max_epochs * epoch_len as f64).ceil() as u64;
        Recorder {
            trace: Trace::new(),
            meter: Meter::new(nnz_total),
            epoch_len,
            every,
            max_iters,
            target: opts.target_gap,
            clock: opts.wall_clock,
        }
    }

    pub fn due(&self, iter: u64) -> bool {
        iter % self.every == 0 || iter == self.max_iters
    }

    /// Appends a row; returns the status that should stop the run, if any.
    pub fn record(
        &mut self,
        iter: u64,
        primal: f64,
        dual: Option<f64>,
        extra: BTreeMap<String, f64>,
    ) -> Option<Status> {
        let gap = dual.map(|d| primal - d);
        let measured = self.meter.elapsed();
        let wall = match self.clock {
            WallClock::Proxy => self.meter.ops as f64 * SECONDS_PER_OP,
            WallClock::Measured => measured,
        };
        self.trace.rows.push(TraceRow {
            epoch: iter as f64 / self.epoch_len as f64,
            effective_passes: self.meter.passes(),
            wall_seconds: wall,
            simulated_parallel_cost: self.meter.parallel_cost,
            primal,
            dual,
            gap,
            extra,
        });
        self.trace.measured_seconds.push(measured);
        self.trace.iterations = iter;
        if !primal.is_finite() || dual.is_some_and(|d| d.is_nan()) {
            return Some(Status::NonFinite);
        }
        match (self.target, gap) {
            (Some(t), Some(g)) if g <= t => Some(Status::Converged),
            (Some(t), None) if primal <= t => Some(Status::Converged),
            _ => None,
        }
    }

    pub fn finish(mut self, status: Status) -> Trace {
        self.trace.status = status;
        self.trace
    }
}
