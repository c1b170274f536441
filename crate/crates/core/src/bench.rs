//! Experiment grids, the training pipeline and CSV reports.
//!
//! Every cell `(n, p, instance)` derives its graph seed from
//! `(master seed, n, p, instance)` and its initial-parameter seed from the
//! graph seed, so results do not depend on scheduling or thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bilinear::{depth_progressive_run, random_init_run, DepthRunConfig, Extrapolation};
use crate::checkpoint::{gru_hidden_size, load_cnn, load_gru, save_cnn, save_gru};
use crate::cnn::{make_depth2_labels, train_cnn, CnnWeights, Depth2Dataset, LabelConfig, TrainCnnConfig};
use crate::error::{Error, Result};
use crate::graph::{generate_erdos_renyi, MAX_NODES};
use crate::meta_gru::{gru_depth1, GruConfig, GruWeights, TrainGruConfig};
use crate::optimizers::{maximize, MaximizeConfig, Method, OptimizationTrace};
use crate::rng::{derive_seed, SeedStream};
use crate::simulator::{QaoaParams, QaoaProblem};

/// Overrides the worker thread count.
pub const THREADS_ENV: &str = "QAOA_THREADS";
/// Overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "QAOA_OUTPUT_DIR";

pub const CSV_HEADER: &str = "experiment,n,p,seed,depth,method,energy,c_max,ratio,grad_evals,iters,wall_ms";
pub const AGGREGATE_HEADER: &str = "experiment,n,p,depth,method,count,mean_ratio,std_ratio";

pub const GRU_CHECKPOINT: &str = "gru.json";
pub const CNN_CHECKPOINT: &str = "cnn.json";
pub const LABELS_FILE: &str = "labels.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Depth 1 over a node range.
    Depth1Sweep,
    /// Depth 1 over edge probabilities.
    EdgeprobSweep,
    /// GRU at depth 1 against GRU-CNN at depth 2.
    Depth2Compare,
    /// Every depth of the progressive run up to `depth`.
    BilinearSweep,
    /// Bilinear against random starts at the target depth only.
    StrategyCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Depth1Sweep,
        ExperimentKind::EdgeprobSweep,
        ExperimentKind::Depth2Compare,
        ExperimentKind::BilinearSweep,
        ExperimentKind::StrategyCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Depth1Sweep => "depth1-sweep",
            ExperimentKind::EdgeprobSweep => "edgeprob-sweep",
            ExperimentKind::Depth2Compare => "depth2-compare",
            ExperimentKind::BilinearSweep => "bilinear-sweep",
            ExperimentKind::StrategyCompare => "strategy-compare",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// An initialization strategy as it appears in the `method` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Adam,
    Rmsprop,
    Adagrad,
    /// GRU proposal refined at depth 1.
    Gru,
    /// CNN prediction from the GRU angles, refined at depth 2.
    GruCnn,
    /// Full progressive run: GRU, CNN, then extrapolation.
    Bilinear,
    /// Uniform start at the target depth plus the refinement.
    Random,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 7] = [
        BenchMethod::Adam,
        BenchMethod::Rmsprop,
        BenchMethod::Adagrad,
        BenchMethod::Gru,
        BenchMethod::GruCnn,
        BenchMethod::Bilinear,
        BenchMethod::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Adam => "adam",
            BenchMethod::Rmsprop => "rmsprop",
            BenchMethod::Adagrad => "adagrad",
            BenchMethod::Gru => "gru",
            BenchMethod::GruCnn => "gru-cnn",
            BenchMethod::Bilinear => "bilinear",
            BenchMethod::Random => "random",
        }
    }

    fn optimizer(self) -> Option<Method> {
        match self {
            BenchMethod::Adam => Some(Method::Adam),
            BenchMethod::Rmsprop => Some(Method::RmsProp),
            BenchMethod::Adagrad => Some(Method::Adagrad),
            _ => None,
        }
    }

    fn needs_gru(self) -> bool {
        matches!(self, BenchMethod::Gru | BenchMethod::GruCnn | BenchMethod::Bilinear)
    }

    fn needs_cnn(self) -> bool {
        matches!(self, BenchMethod::GruCnn | BenchMethod::Bilinear)
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub nodes: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub instances: usize,
    pub methods: Vec<BenchMethod>,
    /// Target depth for `bilinear-sweep` and `strategy-compare`.
    pub depth: usize,
    /// Depth-1 baselines: `method` is taken from the benchmarked optimizer.
    pub baseline: MaximizeConfig,
    /// Refinement of GRU proposals at depth 1.
    pub depth1_refine: MaximizeConfig,
    /// Refinement at depth 2 and beyond, shared by all depth >= 2 strategies.
    pub refine: MaximizeConfig,
    pub gru: GruConfig,
    pub extrapolation: Extrapolation,
    pub seed: u64,
    pub gru_checkpoint: Option<PathBuf>,
    pub cnn_checkpoint: Option<PathBuf>,
    /// Also write every instance in the graph text format.
    pub save_graphs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Depth1Sweep,
            nodes: (4..=14).collect(),
            probabilities: vec![0.5],
            instances: 10,
            methods: vec![BenchMethod::Adam, BenchMethod::Rmsprop, BenchMethod::Adagrad, BenchMethod::Gru],
            depth: 10,
            baseline: MaximizeConfig::baseline(Method::Adam),
            depth1_refine: MaximizeConfig::baseline(Method::Adam),
            refine: MaximizeConfig::refinement(),
            gru: GruConfig::default(),
            extrapolation: Extrapolation::Diagonal,
            seed: 0,
            gru_checkpoint: None,
            cnn_checkpoint: None,
            save_graphs: false,
        }
    }
}

impl ExperimentConfig {
    /// Reasonable defaults for each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            ..Self::default()
        };
        match kind {
            ExperimentKind::Depth1Sweep => base,
            ExperimentKind::EdgeprobSweep => Self {
                nodes: vec![10],
                probabilities: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                ..base
            },
            ExperimentKind::Depth2Compare => Self {
                probabilities: vec![0.6],
                methods: vec![BenchMethod::Gru, BenchMethod::GruCnn],
                ..base
            },
            ExperimentKind::BilinearSweep => Self {
                nodes: vec![8, 10, 12],
                methods: vec![BenchMethod::Bilinear],
                depth: 12,
                ..base
            },
            ExperimentKind::StrategyCompare => Self {
                nodes: vec![8],
                probabilities: vec![0.6],
                methods: vec![BenchMethod::Bilinear, BenchMethod::Random],
                depth: 10,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Config("instances per cell must be at least 1".into()));
        }
        if self.nodes.is_empty() || self.probabilities.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("nodes, probabilities and methods must be nonempty".into()));
        }
        if let Some(&n) = self.nodes.iter().find(|&&n| n > MAX_NODES) {
            return Err(Error::ResourceLimit(format!(
                "{n} nodes exceeds the simulator limit of {MAX_NODES}"
            )));
        }
        if let Some(&n) = self.nodes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("node count {n} is below 2")));
        }
        if let Some(p) = self.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
        let deep = matches!(self.experiment, ExperimentKind::BilinearSweep | ExperimentKind::StrategyCompare);
        if deep && self.depth < 2 {
            return Err(Error::Config("target depth must be at least 2".into()));
        }
        let allowed: &[BenchMethod] = match self.experiment {
            ExperimentKind::Depth1Sweep | ExperimentKind::EdgeprobSweep => &[
                BenchMethod::Adam,
                BenchMethod::Rmsprop,
                BenchMethod::Adagrad,
                BenchMethod::Gru,
                BenchMethod::Random,
            ],
            ExperimentKind::Depth2Compare => &BenchMethod::ALL,
            ExperimentKind::BilinearSweep | ExperimentKind::StrategyCompare => &[
                BenchMethod::Adam,
                BenchMethod::Rmsprop,
                BenchMethod::Adagrad,
                BenchMethod::Bilinear,
                BenchMethod::Random,
            ],
        };
        if let Some(m) = self.methods.iter().find(|m| !allowed.contains(m)) {
            return Err(Error::Config(format!("method `{m}` is not part of {}", self.experiment)));
        }
        Ok(())
    }
}

/// One row of the raw results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub p: f64,
    /// Graph seed of the instance.
    pub seed: u64,
    pub depth: usize,
    pub method: String,
    pub energy: f64,
    pub c_max: f64,
    pub ratio: f64,
    pub grad_evals: usize,
    pub iters: usize,
    pub wall_ms: f64,
}

impl BenchmarkRecord {
    fn sort_key(&self) -> (ExperimentKind, usize, u64, u64, usize, &str) {
        (
            self.experiment,
            self.n,
            ordered_bits(self.p),
            self.seed,
            self.depth,
            &self.method,
        )
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.n,
            format_real(self.p),
            self.seed,
            self.depth,
            self.method,
            format_real(self.energy),
            format_real(self.c_max),
            format_real(self.ratio),
            self.grad_evals,
            self.iters,
            format_real(self.wall_ms)
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 12 {
            return Err(Error::invalid(format!("expected 12 fields, got {}: `{line}`", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|_| Error::invalid(format!("bad number `{}` in `{line}`", f[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse().map_err(|_| Error::invalid(format!("bad integer `{}` in `{line}`", f[i])))
        };
        Ok(Self {
            experiment: f[0].parse()?,
            n: int(1)? as usize,
            p: num(2)?,
            seed: int(3)?,
            depth: int(4)? as usize,
            method: f[5].to_owned(),
            energy: num(6)?,
            c_max: num(7)?,
            ratio: num(8)?,
            grad_evals: int(9)? as usize,
            iters: int(10)? as usize,
            wall_ms: num(11)?,
        })
    }
}

/// Total order on finite floats that agrees with `<`.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// `%.12g`: 12 significant digits, trailing zeros removed.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn graph_seed(master: u64, n: usize, p: f64, instance: usize) -> u64 {
    derive_seed(&[master, n as u64, p.to_bits(), instance as u64])
}

pub fn init_seed(graph_seed: u64) -> u64 {
    derive_seed(&[graph_seed, 1])
}

/// Frozen networks used by the neural methods.
#[derive(Debug, Clone)]
pub struct Models {
    pub gru: GruWeights,
    pub cnn: Option<CnnWeights>,
}

/// Loads the checkpoints the configured methods need.
pub fn load_models(cfg: &ExperimentConfig) -> Result<Option<Models>> {
    let need_gru = cfg.methods.iter().any(|m| m.needs_gru());
    let need_cnn = cfg.methods.iter().any(|m| m.needs_cnn());
    if !need_gru {
        return Ok(None);
    }
    let gru_path = cfg
        .gru_checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("GRU checkpoint required but not configured".into()))?;
    if !gru_path.exists() {
        return Err(Error::Config(format!("GRU checkpoint {} does not exist", gru_path.display())));
    }
    let hidden = gru_hidden_size(gru_path)?;
    if hidden != cfg.gru.hidden {
        return Err(Error::Config(format!(
            "GRU checkpoint has hidden size {hidden}, config says {}",
            cfg.gru.hidden
        )));
    }
    let (gru, _) = load_gru(gru_path, hidden)?;
    let cnn = if need_cnn {
        let path = cfg
            .cnn_checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("CNN checkpoint required but not configured".into()))?;
        if !path.exists() {
            return Err(Error::Config(format!("CNN checkpoint {} does not exist", path.display())));
        }
        Some(load_cnn(path)?.0)
    } else {
        None
    };
    Ok(Some(Models { gru, cnn }))
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    p: f64,
    instance: usize,
}

struct Outcome {
    depth: usize,
    energy: f64,
    grad_evals: usize,
    iters: usize,
    wall_ms: f64,
}

impl Outcome {
    fn from_trace(depth: usize, trace: &OptimizationTrace, extra_evals: usize) -> Self {
        Self {
            depth,
            energy: trace.best().energy,
            grad_evals: trace.grad_evals + extra_evals,
            iters: trace.iterations(),
            wall_ms: trace.wall.as_secs_f64() * 1e3,
        }
    }
}

fn run_method(
    cfg: &ExperimentConfig,
    models: Option<&Models>,
    problem: &QaoaProblem,
    seed: u64,
    method: BenchMethod,
) -> Result<Vec<Outcome>> {
    let kind = cfg.experiment;
    let depth1 = matches!(kind, ExperimentKind::Depth1Sweep | ExperimentKind::EdgeprobSweep);
    let target = match kind {
        ExperimentKind::Depth1Sweep | ExperimentKind::EdgeprobSweep => 1,
        ExperimentKind::Depth2Compare => 2,
        ExperimentKind::BilinearSweep | ExperimentKind::StrategyCompare => cfg.depth,
    };
    let neural = || models.ok_or_else(|| Error::Config("neural method without loaded models".into()));
    let cnn = || {
        neural()?
            .cnn
            .as_ref()
            .ok_or_else(|| Error::Config("CNN checkpoint not loaded".into()))
    };
    let run_cfg = DepthRunConfig {
        gru: cfg.gru,
        depth1_refine: cfg.depth1_refine,
        refine: cfg.refine,
        extrapolation: cfg.extrapolation,
        seed,
    };

    if let Some(opt) = method.optimizer() {
        let mc = if depth1 {
            MaximizeConfig { method: opt, ..cfg.baseline }
        } else {
            MaximizeConfig { method: opt, ..cfg.refine }
        };
        let trace = maximize(problem, &QaoaParams::random(target, seed), &mc)?;
        return Ok(vec![Outcome::from_trace(target, &trace, 0)]);
    }
    match method {
        BenchMethod::Random => {
            let mc = if depth1 { cfg.baseline } else { cfg.refine };
            let e = random_init_run(problem, target, seed, &mc)?;
            Ok(vec![Outcome {
                depth: target,
                energy: e.energy,
                grad_evals: e.grad_evals,
                iters: e.iters,
                wall_ms: e.wall.as_secs_f64() * 1e3,
            }])
        }
        BenchMethod::Gru => {
            let d = gru_depth1(&neural()?.gru, problem, seed, &cfg.gru, &cfg.depth1_refine)?;
            Ok(vec![Outcome::from_trace(1, &d.refined, d.episode.horizon())])
        }
        BenchMethod::GruCnn | BenchMethod::Bilinear => {
            let max_depth = if method == BenchMethod::GruCnn { 2 } else { target };
            let schedule = depth_progressive_run(problem, max_depth, &neural()?.gru, cnn()?, &run_cfg)?;
            let keep = |d: usize| match (method, kind) {
                (BenchMethod::GruCnn, _) => d == 2,
                (_, ExperimentKind::BilinearSweep) => true,
                _ => d == target,
            };
            Ok(schedule
                .entries
                .iter()
                .filter(|e| keep(e.depth))
                .map(|e| Outcome {
                    depth: e.depth,
                    energy: e.energy,
                    grad_evals: e.grad_evals,
                    iters: e.iters,
                    wall_ms: e.wall.as_secs_f64() * 1e3,
                })
                .collect())
        }
        BenchMethod::Adam | BenchMethod::Rmsprop | BenchMethod::Adagrad => unreachable!(),
    }
}

/// Runs every `(n, p, instance) x method` combination of the grid, using
/// `models` for the neural methods. Records come back sorted.
pub fn run_experiment_with(cfg: &ExperimentConfig, models: Option<&Models>) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let cells: Vec<Cell> = cfg
        .nodes
        .iter()
        .flat_map(|&n| {
            cfg.probabilities
                .iter()
                .flat_map(move |&p| (0..cfg.instances).map(move |instance| Cell { n, p, instance }))
        })
        .collect();
    let jobs: Vec<(Cell, BenchMethod)> = cells
        .iter()
        .flat_map(|&c| cfg.methods.iter().map(move |&m| (c, m)))
        .collect();
    let results: Vec<Result<Vec<BenchmarkRecord>>> = jobs
        .par_iter()
        .map(|&(cell, method)| {
            let gseed = graph_seed(cfg.seed, cell.n, cell.p, cell.instance);
            let problem = QaoaProblem::new(generate_erdos_renyi(cell.n, cell.p, gseed)?)?;
            let outcomes = run_method(cfg, models, &problem, init_seed(gseed), method)?;
            outcomes
                .into_iter()
                .map(|o| {
                    Ok(BenchmarkRecord {
                        experiment: cfg.experiment,
                        n: cell.n,
                        p: cell.p,
                        seed: gseed,
                        depth: o.depth,
                        method: method.name().into(),
                        energy: o.energy,
                        c_max: problem.c_max(),
                        ratio: problem.ratio(o.energy)?,
                        grad_evals: o.grad_evals,
                        iters: o.iters,
                        wall_ms: o.wall_ms,
                    })
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    sort_records(&mut records);
    Ok(records)
}

/// Loads the configured checkpoints, then runs the grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let models = load_models(cfg)?;
    run_experiment_with(cfg, models.as_ref())
}

pub fn sort_records(records: &mut [BenchmarkRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Writes every instance of the grid as `graphs/n{n}_p{p}_i{instance}.txt`.
pub fn save_graphs(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = dir.join("graphs");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths = Vec::new();
    for &n in &cfg.nodes {
        for &p in &cfg.probabilities {
            for i in 0..cfg.instances {
                let g = generate_erdos_renyi(n, p, graph_seed(cfg.seed, n, p, i))?;
                let path = dir.join(format!("n{n}_p{}_i{i}.txt", format_real(p)));
                fs::write(&path, g.to_text()).map_err(|e| Error::io(&path, e))?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// Mean and sample standard deviation of the ratio per
/// `(experiment, n, p, depth, method)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub p: f64,
    pub depth: usize,
    pub method: String,
    pub count: usize,
    pub mean_ratio: f64,
    pub std_ratio: f64,
}

impl AggregateRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.n,
            format_real(self.p),
            self.depth,
            self.method,
            self.count,
            format_real(self.mean_ratio),
            format_real(self.std_ratio)
        )
    }
}

pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<AggregateRow> {
    type Key = (ExperimentKind, usize, u64, usize, String);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.experiment, r.n, ordered_bits(r.p), r.depth, r.method.clone()))
            .or_insert_with(|| (r.p, Vec::new()))
            .1
            .push(r.ratio);
    }
    groups
        .into_iter()
        .map(|((experiment, n, _, depth, method), (p, ratios))| {
            let count = ratios.len();
            let mean = ratios.iter().sum::<f64>() / count as f64;
            let var = if count > 1 {
                ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            AggregateRow {
                experiment,
                n,
                p,
                depth,
                method,
                count,
                mean_ratio: mean,
                std_ratio: var.sqrt(),
            }
        })
        .collect()
}

pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_records_csv(text: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::invalid("missing or unexpected CSV header")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(BenchmarkRecord::from_csv_row)
        .collect()
}

/// `results.csv` -> `results.aggregate.csv`.
pub fn aggregate_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}.aggregate.csv"))
}

/// Writes the sorted raw CSV at `path` and the aggregate CSV next to it;
/// returns the aggregate path.
pub fn write_results(records: &[BenchmarkRecord], path: &Path) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(Error::invalid("no records to write"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, records_to_csv(records)).map_err(|e| Error::io(path, e))?;
    let agg = aggregate_path(path);
    fs::write(&agg, aggregate_to_csv(&aggregate(records))).map_err(|e| Error::io(&agg, e))?;
    Ok(agg)
}

/// Settings for the GRU, label and CNN stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Number of random training graphs; the GRU trains on them and the
    /// CNN labels are computed for the same set.
    pub graphs: usize,
    /// Inclusive node range of the training graphs.
    pub nodes: [usize; 2],
    /// Edge probability drawn uniformly from this interval per graph.
    pub probability_range: [f64; 2],
    pub gru_init_scale: f64,
    pub gru: TrainGruConfig,
    pub labels: LabelConfig,
    pub cnn: TrainCnnConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            graphs: 100,
            nodes: [4, 14],
            probability_range: [0.5, 1.0],
            gru_init_scale: 0.08,
            gru: TrainGruConfig::default(),
            labels: LabelConfig::default(),
            cnn: TrainCnnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.nodes;
        if lo < 2 || lo > hi {
            return Err(Error::Config(format!("bad node range [{lo}, {hi}]")));
        }
        if hi > MAX_NODES {
            return Err(Error::ResourceLimit(format!("{hi} nodes exceeds {MAX_NODES}")));
        }
        let [a, b] = self.probability_range;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::Config(format!("bad probability range [{a}, {b}]")));
        }
        if self.graphs == 0 {
            return Err(Error::Config("training sets must be nonempty".into()));
        }
        Ok(())
    }
}

/// Random training instances: `n` uniform in `nodes`, `p` uniform in
/// `probability_range`, one stream per `(seed, stream)`.
pub fn training_graphs(seed: u64, stream: u64, count: usize, nodes: [usize; 2], probs: [f64; 2]) -> Result<Vec<QaoaProblem>> {
    let mut rng = SeedStream::new(derive_seed(&[seed, stream]));
    (0..count)
        .map(|i| {
            let n = nodes[0] + rng.below(nodes[1] - nodes[0] + 1);
            let p = rng.uniform_range(probs[0], probs[1]);
            QaoaProblem::new(generate_erdos_renyi(n, p, derive_seed(&[seed, stream, i as u64]))?)
        })
        .collect()
}

pub fn train_gru_stage(cfg: &TrainConfig) -> Result<crate::meta_gru::TrainedGru> {
    cfg.validate()?;
    let graphs = training_graphs(cfg.seed, 1, cfg.graphs, cfg.nodes, cfg.probability_range)?;
    let init = GruWeights::random(cfg.gru.gru.hidden, cfg.gru_init_scale, derive_seed(&[cfg.seed, 2]));
    let gru_cfg = TrainGruConfig {
        seed: derive_seed(&[cfg.seed, 3]),
        ..cfg.gru
    };
    crate::meta_gru::train_gru(&init, &graphs, &gru_cfg)
}

pub fn label_stage(cfg: &TrainConfig, gru: &GruWeights) -> Result<Depth2Dataset> {
    cfg.validate()?;
    let graphs = training_graphs(cfg.seed, 1, cfg.graphs, cfg.nodes, cfg.probability_range)?;
    let label_cfg = LabelConfig {
        seed: derive_seed(&[cfg.seed, 5]),
        gru: cfg.gru.gru,
        ..cfg.labels
    };
    make_depth2_labels(&graphs, gru, &label_cfg)
}

pub fn train_cnn_stage(cfg: &TrainConfig, data: &Depth2Dataset) -> Result<crate::cnn::TrainedCnn> {
    let init = CnnWeights::random(derive_seed(&[cfg.seed, 6]));
    let cnn_cfg = TrainCnnConfig {
        seed: derive_seed(&[cfg.seed, 7]),
        ..cfg.cnn
    };
    train_cnn(&init, data, &cnn_cfg)
}

pub fn gru_metadata(cfg: &TrainConfig) -> serde_json::Value {
    json!({
        "hidden": cfg.gru.gru.hidden,
        "horizon": cfg.gru.gru.horizon,
        "input_mode": cfg.gru.gru.input_mode,
        "epochs": cfg.gru.epochs,
        "meta_lr": cfg.gru.meta_lr,
        "batch_size": cfg.gru.batch_size,
        "episodes_per_graph": cfg.gru.episodes_per_graph,
        "graphs": cfg.graphs,
        "seed": cfg.seed,
    })
}

pub fn cnn_metadata(cfg: &TrainConfig, samples: usize) -> serde_json::Value {
    json!({
        "epochs": cfg.cnn.epochs,
        "batch_size": cfg.cnn.batch_size,
        "lr": cfg.cnn.lr,
        "samples": samples,
        "label_restarts": cfg.labels.restarts,
        "seed": cfg.seed,
    })
}

pub fn write_loss_history(path: &Path, losses: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, format_real(*l)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn save_labels(data: &Depth2Dataset, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(data).expect("dataset serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<Depth2Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Paths written by [`train_models`].
#[derive(Debug, Clone)]
pub struct TrainedArtifacts {
    pub gru_checkpoint: PathBuf,
    pub cnn_checkpoint: PathBuf,
    pub labels: PathBuf,
    pub gru_loss: PathBuf,
    pub cnn_loss: PathBuf,
}

/// GRU training, depth-2 labels, CNN training; every artifact lands in `dir`.
pub fn train_models(cfg: &TrainConfig, dir: &Path) -> Result<TrainedArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let art = TrainedArtifacts {
        gru_checkpoint: dir.join(GRU_CHECKPOINT),
        cnn_checkpoint: dir.join(CNN_CHECKPOINT),
        labels: dir.join(LABELS_FILE),
        gru_loss: dir.join("gru_loss.csv"),
        cnn_loss: dir.join("cnn_loss.csv"),
    };
    let gru = train_gru_stage(cfg)?;
    save_gru(&gru.weights, gru_metadata(cfg), &art.gru_checkpoint)?;
    write_loss_history(&art.gru_loss, &gru.loss_history)?;
    let data = label_stage(cfg, &gru.weights)?;
    save_labels(&data, &art.labels)?;
    let cnn = train_cnn_stage(cfg, &data)?;
    save_cnn(&cnn.weights, cnn_metadata(cfg, data.len()), &art.cnn_checkpoint)?;
    write_loss_history(&art.cnn_loss, &cnn.loss_history)?;
    Ok(art)
}

/// Whole-pipeline configuration file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub train: TrainConfig,
    pub experiment: Option<ExperimentConfig>,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the output-directory and thread-count environment overrides.
    pub fn apply_env(&mut self, vars: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(dir) = vars(OUTPUT_DIR_ENV).filter(|s| !s.is_empty()) {
            self.output_dir = Some(PathBuf::from(dir));
        }
        if let Some(t) = vars(THREADS_ENV).filter(|s| !s.is_empty()) {
            let t: usize = t
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{t}`")))?;
            if t == 0 {
                return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
            }
            self.threads = Some(t);
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }
}

/// Sets the size of the global worker pool; a no-op once the pool exists.
pub fn init_thread_pool(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

/// Parses `"4..14"` (inclusive) or `"4,6,8"`.
pub fn parse_node_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad node list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad number list `{s}`"))))
        .collect()
}

pub fn parse_method_list(s: &str) -> Result<Vec<BenchMethod>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

/// Human-readable summary of aggregate rows: one line per row.
pub fn report(rows: &[AggregateRow]) -> String {
    let mut out = format!(
        "{:<17} {:>3} {:>5} {:>5} {:<9} {:>5} {:>10} {:>10}\n",
        "experiment", "n", "p", "depth", "method", "count", "mean R", "std R"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<17} {:>3} {:>5} {:>5} {:<9} {:>5} {:>10.6} {:>10.6}\n",
            r.experiment.name(),
            r.n,
            format_real(r.p),
            r.depth,
            r.method,
            r.count,
            r.mean_ratio,
            r.std_ratio
        ));
    }
    out
}
