//! Depth-progressive initialization by bilinear extrapolation.
//!
//! Depth 1 comes from the GRU, depth 2 from the CNN, and every deeper set of
//! angles is extrapolated from the two previous refined sets:
//!
//! ```text
//! theta_l^j = 2 theta_{l-1}^j - theta_{l-2}^j              j <= l-2
//! theta_l^j = 2 theta_{l-1}^{l-1} - theta_{l-2}^{l-2}      j = l-1, l
//! ```
//!
//! applied to the gamma and beta sequences separately.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cnn::{cnn_forward, CnnWeights};
use crate::error::{Error, Result};
use crate::meta_gru::{gru_depth1, GruConfig, GruWeights};
use crate::optimizers::{maximize, MaximizeConfig, Method, OptimizationTrace};
use crate::simulator::{QaoaParams, QaoaProblem};

/// Rule for the two trailing entries of the extrapolated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Entries `l-1` and `l` both take the diagonal trend
    /// `2 theta_{l-1}^{l-1} - theta_{l-2}^{l-2}`.
    #[default]
    Diagonal,
    /// Entry `l` takes the diagonal trend; entry `l-1` continues along the
    /// index, `2 theta_{l-1}^{l-1} - theta_{l-1}^{l-2}`.
    IndexTrend,
}

fn extrapolate_sequence(prev: &[f64], prev2: &[f64], rule: Extrapolation) -> Vec<f64> {
    let l = prev.len() + 1;
    let mut out: Vec<f64> = (0..l - 2).map(|j| 2.0 * prev[j] - prev2[j]).collect();
    let diagonal = 2.0 * prev[l - 2] - prev2[l - 3];
    let second_last = match rule {
        Extrapolation::Diagonal => diagonal,
        Extrapolation::IndexTrend => 2.0 * prev[l - 2] - prev[l - 3],
    };
    out.push(second_last);
    out.push(diagonal);
    out
}

/// Depth-`l` angles from the depth-`(l-1)` and depth-`(l-2)` angles.
pub fn bilinear_extrapolate(theta_lm1: &QaoaParams, theta_lm2: &QaoaParams) -> Result<QaoaParams> {
    bilinear_extrapolate_with(theta_lm1, theta_lm2, Extrapolation::Diagonal)
}

pub fn bilinear_extrapolate_with(
    theta_lm1: &QaoaParams,
    theta_lm2: &QaoaParams,
    rule: Extrapolation,
) -> Result<QaoaParams> {
    if theta_lm2.depth() == 0 || theta_lm1.depth() != theta_lm2.depth() + 1 {
        return Err(Error::invalid(format!(
            "extrapolation needs depths l-1 and l-2 >= 1, got {} and {}",
            theta_lm1.depth(),
            theta_lm2.depth()
        )));
    }
    QaoaParams::new(
        extrapolate_sequence(theta_lm1.gammas(), theta_lm2.gammas(), rule),
        extrapolate_sequence(theta_lm1.betas(), theta_lm2.betas(), rule),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthRunConfig {
    pub gru: GruConfig,
    /// Refinement of the GRU proposal at depth 1.
    pub depth1_refine: MaximizeConfig,
    /// Refinement at every depth >= 2.
    pub refine: MaximizeConfig,
    pub extrapolation: Extrapolation,
    /// Seed of the GRU episode's random start.
    pub seed: u64,
}

impl Default for DepthRunConfig {
    fn default() -> Self {
        Self {
            gru: GruConfig::default(),
            depth1_refine: MaximizeConfig::baseline(Method::Adam),
            refine: MaximizeConfig::refinement(),
            extrapolation: Extrapolation::Diagonal,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthEntry {
    pub depth: usize,
    pub initial: QaoaParams,
    pub initial_energy: f64,
    /// Best refined angles, gauge-fixed so that consecutive depths sit on
    /// the same symmetry branch.
    pub refined: QaoaParams,
    pub energy: f64,
    pub ratio: f64,
    pub grad_evals: usize,
    pub iters: usize,
    pub wall: Duration,
}

impl DepthEntry {
    fn from_trace(problem: &QaoaProblem, depth: usize, trace: &OptimizationTrace, extra_evals: usize) -> Result<Self> {
        let start = &trace.points[0];
        let best = trace.best();
        Ok(Self {
            depth,
            initial: start.params.clone(),
            initial_energy: start.energy,
            refined: best.params.gauge_fixed(),
            energy: best.energy,
            ratio: problem.ratio(best.energy)?,
            grad_evals: trace.grad_evals + extra_evals,
            iters: trace.iterations(),
            wall: trace.wall,
        })
    }
}

/// One entry per depth, starting at 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthSchedule {
    pub entries: Vec<DepthEntry>,
}

impl DepthSchedule {
    pub fn max_depth(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, depth: usize) -> Option<&DepthEntry> {
        depth.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ratio).collect()
    }

    pub fn last(&self) -> Option<&DepthEntry> {
        self.entries.last()
    }
}

/// GRU at depth 1, CNN at depth 2, extrapolation beyond, one refinement per depth.
pub fn depth_progressive_run(
    problem: &QaoaProblem,
    max_depth: usize,
    gru: &GruWeights,
    cnn: &CnnWeights,
    cfg: &DepthRunConfig,
) -> Result<DepthSchedule> {
    if max_depth < 2 {
        return Err(Error::invalid(format!("max depth must be at least 2, got {max_depth}")));
    }
    let mut entries = Vec::with_capacity(max_depth);

    let d1 = gru_depth1(gru, problem, cfg.seed, &cfg.gru, &cfg.depth1_refine)?;
    let mut e1 = DepthEntry::from_trace(problem, 1, &d1.refined, d1.episode.horizon())?;
    e1.initial = QaoaParams::from_flat(&d1.episode.steps[0].theta)?;
    e1.initial_energy = d1.episode.steps[0].energy;
    entries.push(e1);

    let theta1 = &entries[0].refined;
    let pred = cnn_forward(cnn, [theta1.gammas()[0], theta1.betas()[0]])?;
    let init2 = QaoaParams::from_flat(&pred)?;
    let trace2 = maximize(problem, &init2, &cfg.refine)?;
    entries.push(DepthEntry::from_trace(problem, 2, &trace2, 0)?);

    for l in 3..=max_depth {
        let init = bilinear_extrapolate_with(&entries[l - 2].refined, &entries[l - 3].refined, cfg.extrapolation)?;
        let trace = maximize(problem, &init, &cfg.refine)?;
        entries.push(DepthEntry::from_trace(problem, l, &trace, 0)?);
    }
    Ok(DepthSchedule { entries })
}

/// Uniform start at `depth` followed by the given refinement.
pub fn random_init_run(problem: &QaoaProblem, depth: usize, seed: u64, refine: &MaximizeConfig) -> Result<DepthEntry> {
    if depth == 0 {
        return Err(Error::invalid("depth must be positive"));
    }
    let trace = maximize(problem, &QaoaParams::random(depth, seed), refine)?;
    DepthEntry::from_trace(problem, depth, &trace, 0)
}
