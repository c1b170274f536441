//! GRU meta-optimizer for depth-1 QAOA angles.
//!
//! At every step the cell reads `x_t = (gamma_t, beta_t, E_t / |E|)` and the
//! previous hidden state; a residual linear readout turns the new hidden state
//! into the next proposal:
//!
//! ```text
//! z_t  = sigmoid(W_z x + R_z h + b_z + d_z)
//! r_t  = sigmoid(W_r x + R_r h + b_r + d_r)
//! h~_t = tanh(W_h x + r_t * (R_h h + d_h) + b_h)
//! h_t  = z_t * h + (1 - z_t) * h~_t
//! theta_{t+1} = theta_t + W_out h_t + b_out
//! ```
//!
//! Training minimizes the negated cumulative clipped improvement of the
//! episode energies, differentiating through both the recurrence and the
//! circuit energy (the simulator supplies `dE/dtheta`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{maximize, MaximizeConfig, Method, OptimizationTrace, OptimizerState};
use crate::rng::{derive_seed, SeedStream};
use crate::simulator::{QaoaParams, QaoaProblem};
use crate::tensors::{matvec_add, matvec_t_add, outer_add, ParamSet};

/// `(gamma, beta)` at depth 1.
pub const PARAM_DIM: usize = 2;
/// Angles plus the normalized energy.
pub const INPUT_DIM: usize = PARAM_DIM + 1;

/// Which input vector the gates see at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// `x_t`, the current proposal and its energy.
    #[default]
    Current,
    /// `x_0`, the starting proposal, fed at every step.
    Initial,
}

const W_Z: usize = 0;
const W_R: usize = 1;
const W_H: usize = 2;
const R_Z: usize = 3;
const R_R: usize = 4;
const R_H: usize = 5;
const B_Z: usize = 6;
const B_R: usize = 7;
const B_H: usize = 8;
const D_Z: usize = 9;
const D_R: usize = 10;
const D_H: usize = 11;
const W_OUT: usize = 12;
const B_OUT: usize = 13;

/// Shapes of every GRU array for hidden size `h`, in storage order.
pub fn gru_layout(h: usize) -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("w_z", vec![h, INPUT_DIM]),
        ("w_r", vec![h, INPUT_DIM]),
        ("w_h", vec![h, INPUT_DIM]),
        ("r_z", vec![h, h]),
        ("r_r", vec![h, h]),
        ("r_h", vec![h, h]),
        ("b_z", vec![h]),
        ("b_r", vec![h]),
        ("b_h", vec![h]),
        ("d_z", vec![h]),
        ("d_r", vec![h]),
        ("d_h", vec![h]),
        ("w_out", vec![PARAM_DIM, h]),
        ("b_out", vec![PARAM_DIM]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    hidden: usize,
    params: ParamSet,
}

impl GruWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            params: ParamSet::zeros(gru_layout(hidden)),
        }
    }

    /// Every entry drawn from `uniform(-scale, scale)`.
    pub fn random(hidden: usize, scale: f64, seed: u64) -> Self {
        let mut w = Self::zeros(hidden);
        w.params.fill_uniform(scale, &mut SeedStream::new(seed));
        w
    }

    pub(crate) fn from_params(hidden: usize, params: ParamSet) -> Self {
        Self { hidden, params }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.params.index_of(name).map(|k| self.params.array(k))
    }

    pub fn array_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.params.index_of(name).map(|k| self.params.array_mut(k))
    }

    fn a(&self, k: usize) -> &[f64] {
        self.params.array(k)
    }
}

/// Intermediate values of one cell evaluation, kept for the backward pass.
#[derive(Debug, Clone)]
struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    h_tilde: Vec<f64>,
    h: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn cell(w: &GruWeights, x: &[f64], h_prev: &[f64]) -> CellCache {
    let hd = w.hidden;
    let mut a_z: Vec<f64> = w.a(B_Z).iter().zip(w.a(D_Z)).map(|(b, d)| b + d).collect();
    matvec_add(w.a(W_Z), hd, INPUT_DIM, x, &mut a_z);
    matvec_add(w.a(R_Z), hd, hd, h_prev, &mut a_z);
    let z: Vec<f64> = a_z.into_iter().map(sigmoid).collect();

    let mut a_r: Vec<f64> = w.a(B_R).iter().zip(w.a(D_R)).map(|(b, d)| b + d).collect();
    matvec_add(w.a(W_R), hd, INPUT_DIM, x, &mut a_r);
    matvec_add(w.a(R_R), hd, hd, h_prev, &mut a_r);
    let r: Vec<f64> = a_r.into_iter().map(sigmoid).collect();

    let mut u = w.a(D_H).to_vec();
    matvec_add(w.a(R_H), hd, hd, h_prev, &mut u);

    let mut a_h = w.a(B_H).to_vec();
    matvec_add(w.a(W_H), hd, INPUT_DIM, x, &mut a_h);
    let h_tilde: Vec<f64> = a_h
        .iter()
        .zip(&r)
        .zip(&u)
        .map(|((a, r), u)| (a + r * u).tanh())
        .collect();

    let h = (0..hd)
        .map(|k| z[k] * h_prev[k] + (1.0 - z[k]) * h_tilde[k])
        .collect();
    CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        u,
        h_tilde,
        h,
    }
}

/// Backpropagates `g_h` (adjoint of the cell output) into weight gradients;
/// returns the adjoints of the cell input and of the previous hidden state.
fn cell_backward(w: &GruWeights, c: &CellCache, g_h: &[f64], grads: &mut ParamSet) -> (Vec<f64>, Vec<f64>) {
    let hd = w.hidden;
    let mut g_x = vec![0.0; INPUT_DIM];
    let mut g_hp: Vec<f64> = (0..hd).map(|k| g_h[k] * c.z[k]).collect();

    let g_az: Vec<f64> = (0..hd)
        .map(|k| g_h[k] * (c.h_prev[k] - c.h_tilde[k]) * c.z[k] * (1.0 - c.z[k]))
        .collect();
    let g_ah: Vec<f64> = (0..hd)
        .map(|k| g_h[k] * (1.0 - c.z[k]) * (1.0 - c.h_tilde[k] * c.h_tilde[k]))
        .collect();
    let g_u: Vec<f64> = (0..hd).map(|k| g_ah[k] * c.r[k]).collect();
    let g_ar: Vec<f64> = (0..hd)
        .map(|k| g_ah[k] * c.u[k] * c.r[k] * (1.0 - c.r[k]))
        .collect();

    // candidate
    outer_add(grads.array_mut(W_H), &g_ah, &c.x);
    add(grads.array_mut(B_H), &g_ah);
    matvec_t_add(w.a(W_H), hd, INPUT_DIM, &g_ah, &mut g_x);
    outer_add(grads.array_mut(R_H), &g_u, &c.h_prev);
    add(grads.array_mut(D_H), &g_u);
    matvec_t_add(w.a(R_H), hd, hd, &g_u, &mut g_hp);

    // reset gate
    outer_add(grads.array_mut(W_R), &g_ar, &c.x);
    outer_add(grads.array_mut(R_R), &g_ar, &c.h_prev);
    add(grads.array_mut(B_R), &g_ar);
    add(grads.array_mut(D_R), &g_ar);
    matvec_t_add(w.a(W_R), hd, INPUT_DIM, &g_ar, &mut g_x);
    matvec_t_add(w.a(R_R), hd, hd, &g_ar, &mut g_hp);

    // update gate
    outer_add(grads.array_mut(W_Z), &g_az, &c.x);
    outer_add(grads.array_mut(R_Z), &g_az, &c.h_prev);
    add(grads.array_mut(B_Z), &g_az);
    add(grads.array_mut(D_Z), &g_az);
    matvec_t_add(w.a(W_Z), hd, INPUT_DIM, &g_az, &mut g_x);
    matvec_t_add(w.a(R_Z), hd, hd, &g_az, &mut g_hp);

    (g_x, g_hp)
}

fn add(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn gru_cell_forward(w: &GruWeights, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    if x.len() != INPUT_DIM || h_prev.len() != w.hidden {
        return Err(Error::invalid(format!(
            "GRU cell expects input {INPUT_DIM} / hidden {}, got {} / {}",
            w.hidden,
            x.len(),
            h_prev.len()
        )));
    }
    Ok(cell(w, x, h_prev).h)
}

fn readout(w: &GruWeights, theta: &[f64], h: &[f64]) -> Vec<f64> {
    let mut next = theta.to_vec();
    add(&mut next, w.a(B_OUT));
    matvec_add(w.a(W_OUT), PARAM_DIM, w.hidden, h, &mut next);
    next
}

/// One proposal step: `(theta_{t+1}, h_{t+1}) = GRU(theta_t, h_t, E_t)`.
pub fn gru_meta_step(
    w: &GruWeights,
    theta: &[f64],
    energy: f64,
    energy_scale: f64,
    h: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if theta.len() != PARAM_DIM {
        return Err(Error::invalid(format!(
            "GRU proposes {PARAM_DIM} angles, got {}",
            theta.len()
        )));
    }
    let x = [theta[0], theta[1], energy / energy_scale];
    let h_next = gru_cell_forward(w, &x, h)?;
    Ok((readout(w, theta, &h_next), h_next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruConfig {
    pub hidden: usize,
    pub horizon: usize,
    pub input_mode: InputMode,
}

impl Default for GruConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            horizon: 10,
            input_mode: InputMode::Current,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaEpisode {
    pub steps: Vec<EpisodeStep>,
}

impl MetaEpisode {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn energies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.energy).collect()
    }

    /// Index of the highest-energy proposal (first one on ties).
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (t, s) in self.steps.iter().enumerate() {
            if s.energy > self.steps[best].energy {
                best = t;
            }
        }
        best
    }

    pub fn best_params(&self) -> QaoaParams {
        let theta = &self.steps[self.best_index()].theta;
        QaoaParams::new(vec![theta[0]], vec![theta[1]]).expect("episode angles are finite")
    }

    pub fn best_energy(&self) -> f64 {
        self.steps[self.best_index()].energy
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("episode horizon must be at least 1"));
    }
    Ok(())
}

fn energy_scale(problem: &QaoaProblem) -> f64 {
    problem.n_edges().max(1) as f64
}

fn to_params(theta: &[f64]) -> Result<QaoaParams> {
    QaoaParams::new(vec![theta[0]], vec![theta[1]])
}

/// Rolls the GRU out for `cfg.horizon` proposals from a seeded random start.
pub fn run_episode(w: &GruWeights, problem: &QaoaProblem, seed: u64, cfg: &GruConfig) -> Result<MetaEpisode> {
    check_horizon(cfg.horizon)?;
    let scale = energy_scale(problem);
    let mut theta = QaoaParams::random(1, seed).to_flat();
    let mut h = vec![0.0; w.hidden];
    let mut steps = Vec::with_capacity(cfg.horizon + 1);
    let mut x0 = None;
    for _ in 0..cfg.horizon {
        let energy = problem.energy(&to_params(&theta)?)?;
        let x_t = vec![theta[0], theta[1], energy / scale];
        let x = match cfg.input_mode {
            InputMode::Current => x_t,
            InputMode::Initial => x0.get_or_insert(x_t).clone(),
        };
        let h_next = gru_cell_forward(w, &x, &h)?;
        let theta_next = readout(w, &theta, &h_next);
        steps.push(EpisodeStep {
            theta: std::mem::replace(&mut theta, theta_next),
            energy,
            hidden: std::mem::replace(&mut h, h_next),
        });
    }
    let energy = problem.energy(&to_params(&theta)?)?;
    steps.push(EpisodeStep {
        theta,
        energy,
        hidden: h,
    });
    Ok(MetaEpisode { steps })
}

/// Negated cumulative clipped improvement:
/// `-sum_{t>=1} max(E_t - max_{i<t} E_i, 0)`.
pub fn gru_loss(energies: &[f64]) -> Result<f64> {
    if energies.len() < 2 {
        return Err(Error::invalid("loss needs at least two energies"));
    }
    let mut best = energies[0];
    let mut gain = 0.0;
    for &e in &energies[1..] {
        gain += (e - best).max(0.0);
        best = best.max(e);
    }
    Ok(-gain)
}

/// `dL/dE_t` for [`gru_loss`] (subgradient choosing the earliest maximizer).
fn gru_loss_energy_grad(energies: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; energies.len()];
    let mut best_idx = 0;
    for t in 1..energies.len() {
        if energies[t] > energies[best_idx] {
            g[t] -= 1.0;
            g[best_idx] += 1.0;
            best_idx = t;
        }
    }
    g
}

/// Loss of one episode and its gradient with respect to every GRU weight.
pub fn episode_loss_and_grad(
    w: &GruWeights,
    problem: &QaoaProblem,
    seed: u64,
    cfg: &GruConfig,
) -> Result<(f64, ParamSet)> {
    check_horizon(cfg.horizon)?;
    let scale = energy_scale(problem);
    let horizon = cfg.horizon;
    let mut thetas = vec![QaoaParams::random(1, seed).to_flat()];
    let mut energies = Vec::with_capacity(horizon + 1);
    let mut de_dtheta = Vec::with_capacity(horizon + 1);
    let mut caches = Vec::with_capacity(horizon);
    let mut h = vec![0.0; w.hidden];
    let mut x0: Option<Vec<f64>> = None;

    for t in 0..=horizon {
        let (e, g) = problem.energy_and_gradient(&to_params(&thetas[t])?)?;
        energies.push(e);
        de_dtheta.push(g.to_flat());
        if t == horizon {
            break;
        }
        let x_t = vec![thetas[t][0], thetas[t][1], e / scale];
        let x = match cfg.input_mode {
            InputMode::Current => x_t,
            InputMode::Initial => x0.get_or_insert(x_t).clone(),
        };
        let c = cell(w, &x, &h);
        thetas.push(readout(w, &thetas[t], &c.h));
        h = c.h.clone();
        caches.push(c);
    }

    let loss = gru_loss(&energies)?;
    let dl_de = gru_loss_energy_grad(&energies);
    let mut grads = w.params.zeros_like();

    let mut g_theta: Vec<f64> = de_dtheta[horizon].iter().map(|d| dl_de[horizon] * d).collect();
    let mut g_h = vec![0.0; w.hidden];
    for t in (0..horizon).rev() {
        let c = &caches[t];
        // readout theta_{t+1} = theta_t + W_out h_{t+1} + b_out
        matvec_t_add(w.a(W_OUT), PARAM_DIM, w.hidden, &g_theta, &mut g_h);
        outer_add(grads.array_mut(W_OUT), &g_theta, &c.h);
        add(grads.array_mut(B_OUT), &g_theta);

        let (g_x, g_hp) = cell_backward(w, c, &g_h, &mut grads);
        g_h = g_hp;

        // theta_t reaches the loss through the residual path, its energy, and
        // (in current-input mode) directly through the cell input
        let mut g_e = dl_de[t];
        if cfg.input_mode == InputMode::Current {
            add(&mut g_theta, &g_x[..PARAM_DIM]);
            g_e += g_x[PARAM_DIM] / scale;
        }
        for (gt, d) in g_theta.iter_mut().zip(&de_dtheta[t]) {
            *gt += g_e * d;
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainGruConfig {
    pub gru: GruConfig,
    pub epochs: usize,
    pub meta_lr: f64,
    /// Graphs per weight update.
    pub batch_size: usize,
    /// Random starts per graph in every epoch.
    pub episodes_per_graph: usize,
    pub seed: u64,
}

impl Default for TrainGruConfig {
    fn default() -> Self {
        Self {
            gru: GruConfig::default(),
            epochs: 100,
            meta_lr: 1e-3,
            batch_size: 10,
            episodes_per_graph: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedGru {
    pub weights: GruWeights,
    /// Mean episode loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Adam on the mean episode loss; rollouts in a batch are evaluated in
/// parallel and reduced in index order.
pub fn train_gru(init: &GruWeights, graphs: &[QaoaProblem], cfg: &TrainGruConfig) -> Result<TrainedGru> {
    if graphs.is_empty() {
        return Err(Error::invalid("GRU training set is empty"));
    }
    if cfg.batch_size == 0 || cfg.episodes_per_graph == 0 {
        return Err(Error::invalid("batch size and episodes per graph must be positive"));
    }
    let mut weights = init.clone();
    let mut opt = OptimizerState::new(Method::Adam, cfg.meta_lr, weights.params.len());
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        SeedStream::new(derive_seed(&[cfg.seed, epoch as u64, 0x5_4FF1E])).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let jobs: Vec<(usize, usize)> = batch
                .iter()
                .flat_map(|&g| (0..cfg.episodes_per_graph).map(move |k| (g, k)))
                .collect();
            let results: Vec<Result<(f64, ParamSet)>> = jobs
                .par_iter()
                .map(|&(g, k)| {
                    let seed = derive_seed(&[cfg.seed, epoch as u64, g as u64, k as u64]);
                    episode_loss_and_grad(&weights, &graphs[g], seed, &cfg.gru)
                })
                .collect();
            let mut total = weights.params.zeros_like();
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                total.add_assign(&g);
            }
            total.scale(1.0 / jobs.len() as f64);
            if !batch_loss.is_finite() || !total.all_finite() {
                return Err(Error::Numeric(format!(
                    "GRU training diverged in epoch {epoch} (batch loss {batch_loss})"
                )));
            }
            opt.descend(weights.params.data_mut(), total.data())?;
            epoch_loss += batch_loss;
            epoch_count += jobs.len();
        }
        loss_history.push(epoch_loss / epoch_count as f64);
    }
    Ok(TrainedGru {
        weights,
        loss_history,
    })
}

/// Result of the GRU depth-1 pipeline: best proposal, then local refinement.
#[derive(Debug, Clone)]
pub struct GruDepth1 {
    pub episode: MetaEpisode,
    pub refined: OptimizationTrace,
}

impl GruDepth1 {
    pub fn params(&self) -> &QaoaParams {
        &self.refined.best().params
    }

    pub fn energy(&self) -> f64 {
        self.refined.best().energy
    }
}

pub fn gru_depth1(
    w: &GruWeights,
    problem: &QaoaProblem,
    seed: u64,
    cfg: &GruConfig,
    refine: &MaximizeConfig,
) -> Result<GruDepth1> {
    let episode = run_episode(w, problem, seed, cfg)?;
    let refined = maximize(problem, &episode.best_params(), refine)?;
    Ok(GruDepth1 { episode, refined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_erdos_renyi, Graph};
    use approx::assert_abs_diff_eq;

    fn single_edge() -> QaoaProblem {
        QaoaProblem::new(Graph::new(2, [(0, 1)]).unwrap()).unwrap()
    }

    fn sig(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    #[test]
    fn zero_weights_halve_hidden() {
        let w = GruWeights::zeros(4);
        let h = [0.4, -0.2, 1.0, -1.0];
        let out = gru_cell_forward(&w, &[0.3, 0.1, 0.5], &h).unwrap();
        for (o, v) in out.iter().zip(h) {
            assert_abs_diff_eq!(*o, 0.5 * v, epsilon = 1e-15);
        }
    }

    #[test]
    fn scalar_oracle_h1() {
        // H = 1: hand-evaluate every gate
        let mut w = GruWeights::zeros(1);
        let vals: [(&str, &[f64]); 14] = [
            ("w_z", &[0.2, -0.1, 0.3]),
            ("w_r", &[0.5, 0.4, -0.6]),
            ("w_h", &[-0.3, 0.8, 0.1]),
            ("r_z", &[0.7]),
            ("r_r", &[-0.4]),
            ("r_h", &[0.9]),
            ("b_z", &[0.05]),
            ("b_r", &[-0.02]),
            ("b_h", &[0.1]),
            ("d_z", &[0.01]),
            ("d_r", &[0.03]),
            ("d_h", &[-0.2]),
            ("w_out", &[0.5, -0.25]),
            ("b_out", &[0.01, 0.02]),
        ];
        for (name, v) in vals {
            w.array_mut(name).unwrap().copy_from_slice(v);
        }
        let x = [1.2, 0.4, 0.5];
        let hp = 0.3;

        let z = sig(0.2 * 1.2 - 0.1 * 0.4 + 0.3 * 0.5 + 0.7 * hp + 0.05 + 0.01);
        let r = sig(0.5 * 1.2 + 0.4 * 0.4 - 0.6 * 0.5 - 0.4 * hp - 0.02 + 0.03);
        let ht = (-0.3 * 1.2 + 0.8 * 0.4 + 0.1 * 0.5 + r * (0.9 * hp - 0.2) + 0.1).tanh();
        let h = z * hp + (1.0 - z) * ht;
        let out = gru_cell_forward(&w, &x, &[hp]).unwrap();
        assert_abs_diff_eq!(out[0], h, epsilon = 1e-15);

        // zero previous state: h = (1 - z) tanh(W_h x + r d_h + b_h)
        let z0 = sig(0.2 * 1.2 - 0.1 * 0.4 + 0.3 * 0.5 + 0.05 + 0.01);
        let r0 = sig(0.5 * 1.2 + 0.4 * 0.4 - 0.6 * 0.5 - 0.02 + 0.03);
        let ht0 = (-0.3 * 1.2 + 0.8 * 0.4 + 0.1 * 0.5 + r0 * -0.2 + 0.1).tanh();
        let out0 = gru_cell_forward(&w, &x, &[0.0]).unwrap();
        assert_abs_diff_eq!(out0[0], (1.0 - z0) * ht0, epsilon = 1e-15);

        // meta step with energy scale 2 so that E = 1.0 gives x[2] = 0.5
        let (theta, hn) = gru_meta_step(&w, &[1.2, 0.4], 1.0, 2.0, &[hp]).unwrap();
        assert_abs_diff_eq!(hn[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(theta[0], 1.2 + 0.5 * h + 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(theta[1], 0.4 - 0.25 * h + 0.02, epsilon = 1e-15);
    }

    #[test]
    fn shape_errors() {
        let w = GruWeights::zeros(3);
        assert!(gru_cell_forward(&w, &[0.0; 2], &[0.0; 3]).is_err());
        assert!(gru_cell_forward(&w, &[0.0; 3], &[0.0; 4]).is_err());
        assert!(gru_meta_step(&w, &[0.0; 3], 0.0, 1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn meta_step_identity_and_bias() {
        let mut w = GruWeights::zeros(2);
        let (theta, h) = gru_meta_step(&w, &[0.7, 0.2], 1.3, 2.0, &[0.6, -0.4]).unwrap();
        assert_eq!(theta, vec![0.7, 0.2]);
        assert_eq!(h, vec![0.3, -0.2]);
        w.array_mut("b_out").unwrap().copy_from_slice(&[0.1, -0.1]);
        let (theta, _) = gru_meta_step(&w, &[0.7, 0.2], 1.3, 2.0, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(theta[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(theta[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn hidden_state_stays_bounded() {
        let w = GruWeights::random(8, 3.0, 1);
        let mut h = vec![0.0; 8];
        let mut rng = SeedStream::new(2);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_range(-20.0, 20.0)).collect();
            h = gru_cell_forward(&w, &x, &h).unwrap();
            assert!(h.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn episode_contracts() {
        let problem = single_edge();
        let cfg = GruConfig {
            hidden: 4,
            horizon: 1,
            input_mode: InputMode::Current,
        };
        let ep = run_episode(&GruWeights::random(4, 0.08, 3), &problem, 9, &cfg).unwrap();
        assert_eq!(ep.steps.len(), 2);
        assert_eq!(ep.horizon(), 1);
        assert!(run_episode(&GruWeights::zeros(4), &problem, 9, &GruConfig { horizon: 0, ..cfg }).is_err());

        let g = generate_erdos_renyi(6, 0.7, 4).unwrap();
        let problem = QaoaProblem::new(g).unwrap();
        let cfg = GruConfig { horizon: 6, ..cfg };
        let ep = run_episode(&GruWeights::zeros(4), &problem, 5, &cfg).unwrap();
        assert_eq!(ep.steps.len(), 7);
        for s in &ep.steps {
            assert_eq!(s.theta, ep.steps[0].theta);
            assert_eq!(s.energy, ep.steps[0].energy);
            assert!(s.energy >= 0.0 && s.energy <= problem.c_max());
        }
    }

    #[test]
    fn loss_arithmetic() {
        assert_abs_diff_eq!(gru_loss(&[1.0, 1.5, 1.2, 2.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(gru_loss(&[3.0, 2.0, 2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(gru_loss(&[0.0, 4.0]).unwrap(), -4.0);
        assert!(gru_loss(&[1.0]).is_err());
        assert_eq!(gru_loss_energy_grad(&[1.0, 1.5, 1.2, 2.0]), vec![1.0, 0.0, 0.0, -1.0]);
    }

    fn loss_of(w: &GruWeights, problem: &QaoaProblem, seed: u64, cfg: &GruConfig) -> f64 {
        gru_loss(&run_episode(w, problem, seed, cfg).unwrap().energies()).unwrap()
    }

    fn check_bptt(problem: &QaoaProblem, cfg: GruConfig, seed: u64) {
        let w = GruWeights::random(cfg.hidden, 0.5, 77);
        let (loss, grads) = episode_loss_and_grad(&w, problem, seed, &cfg).unwrap();
        assert_abs_diff_eq!(loss, loss_of(&w, problem, seed, &cfg), epsilon = 1e-12);
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for k in 0..w.params.len() {
            let mut plus = w.clone();
            plus.params.data_mut()[k] += h;
            let mut minus = w.clone();
            minus.params.data_mut()[k] -= h;
            let fd = (loss_of(&plus, problem, seed, &cfg) - loss_of(&minus, problem, seed, &cfg)) / (2.0 * h);
            let an = grads.data()[k];
            let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let cfg = GruConfig {
            hidden: 2,
            horizon: 3,
            input_mode: InputMode::Current,
        };
        check_bptt(&single_edge(), cfg, 11);
        let g = generate_erdos_renyi(5, 0.6, 8).unwrap();
        check_bptt(&QaoaProblem::new(g).unwrap(), GruConfig { hidden: 3, ..cfg }, 4);
    }

    #[test]
    fn bptt_initial_input_mode() {
        let cfg = GruConfig {
            hidden: 2,
            horizon: 3,
            input_mode: InputMode::Initial,
        };
        check_bptt(&single_edge(), cfg, 11);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let w = GruWeights::random(4, 0.08, 1);
        let cfg = TrainGruConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train_gru(&w, &[single_edge()], &cfg).unwrap();
        assert_eq!(out.weights, w);
        assert!(out.loss_history.is_empty());
        assert!(train_gru(&w, &[], &cfg).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainGruConfig {
            gru: GruConfig {
                hidden: 4,
                horizon: 3,
                input_mode: InputMode::Current,
            },
            epochs: 3,
            meta_lr: 1e-2,
            batch_size: 2,
            episodes_per_graph: 2,
            seed: 5,
        };
        let graphs: Vec<QaoaProblem> = (0..3)
            .map(|s| QaoaProblem::new(generate_erdos_renyi(5, 0.7, s).unwrap()).unwrap())
            .collect();
        let w = GruWeights::random(4, 0.08, 2);
        let a = train_gru(&w, &graphs, &cfg).unwrap();
        let b = train_gru(&w, &graphs, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.weights, b.weights);
    }
}
