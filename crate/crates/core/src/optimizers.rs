//! First-order ascent methods and the QAOA refinement loop.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{QaoaParams, QaoaProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adam,
    RmsProp,
    Adagrad,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Adam, Method::RmsProp, Method::Adagrad];

    pub fn name(self) -> &'static str {
        match self {
            Method::Adam => "adam",
            Method::RmsProp => "rmsprop",
            Method::Adagrad => "adagrad",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Method::Adam),
            "rmsprop" => Ok(Method::RmsProp),
            "adagrad" => Ok(Method::Adagrad),
            other => Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Method constants besides the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub beta1: f64,
    pub beta2: f64,
    /// RMSProp squared-gradient decay.
    pub decay: f64,
    pub eps: f64,
}

impl Hyperparameters {
    pub fn defaults(method: Method) -> Self {
        let eps = match method {
            Method::Adagrad => 1e-10,
            Method::Adam | Method::RmsProp => 1e-8,
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            decay: 0.99,
            eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    method: Method,
    learning_rate: f64,
    hyper: Hyperparameters,
    step_count: u64,
    first_moment: Vec<f64>,
    /// Adam/RMSProp second moment, or the Adagrad accumulator.
    second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(method: Method, learning_rate: f64, dim: usize) -> Self {
        Self::with_hyperparameters(method, learning_rate, dim, Hyperparameters::defaults(method))
    }

    pub fn with_hyperparameters(
        method: Method,
        learning_rate: f64,
        dim: usize,
        hyper: Hyperparameters,
    ) -> Self {
        Self {
            method,
            learning_rate,
            hyper,
            step_count: 0,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn dim(&self) -> usize {
        self.first_moment.len()
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One update in the ascent direction: `params += lr * preconditioned(grad)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.dim() || grad.len() != self.dim() {
            return Err(Error::invalid(format!(
                "optimizer dimension {} vs params {} / grad {}",
                self.dim(),
                params.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        let h = self.hyper;
        match self.method {
            Method::Adam => {
                let t = self.step_count as i32;
                let c1 = 1.0 - h.beta1.powi(t);
                let c2 = 1.0 - h.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.first_moment[i] = h.beta1 * self.first_moment[i] + (1.0 - h.beta1) * g;
                    self.second_moment[i] = h.beta2 * self.second_moment[i] + (1.0 - h.beta2) * g * g;
                    let m_hat = self.first_moment[i] / c1;
                    let v_hat = self.second_moment[i] / c2;
                    params[i] += lr * m_hat / (v_hat.sqrt() + h.eps);
                }
            }
            Method::RmsProp => {
                for i in 0..params.len() {
                    let g = grad[i];
                    self.second_moment[i] = h.decay * self.second_moment[i] + (1.0 - h.decay) * g * g;
                    params[i] += lr * g / (self.second_moment[i].sqrt() + h.eps);
                }
            }
            Method::Adagrad => {
                for i in 0..params.len() {
                    let g = grad[i];
                    self.second_moment[i] += g * g;
                    params[i] += lr * g / (self.second_moment[i].sqrt() + h.eps);
                }
            }
        }
        Ok(())
    }

    /// Minimization counterpart of [`OptimizerState::step`], used for network training.
    pub fn descend(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        let negated: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.step(params, &negated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizeConfig {
    pub method: Method,
    pub learning_rate: f64,
    /// Maximum number of optimizer steps.
    pub budget: usize,
    /// Stop once two consecutive energies differ by less than this.
    pub tol: f64,
}

impl MaximizeConfig {
    /// Depth-1 baseline setting: learning rate 0.1, 200 steps, tolerance 1e-6.
    pub fn baseline(method: Method) -> Self {
        Self {
            method,
            learning_rate: 0.1,
            budget: 200,
            tol: 1e-6,
        }
    }

    /// Per-depth refinement after an extrapolated or predicted start.
    pub fn refinement() -> Self {
        Self {
            method: Method::Adam,
            learning_rate: 0.01,
            budget: 300,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub params: QaoaParams,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub points: Vec<TracePoint>,
    pub grad_evals: usize,
    pub wall: Duration,
}

impl OptimizationTrace {
    /// Number of optimizer steps taken.
    pub fn iterations(&self) -> usize {
        self.points.len() - 1
    }

    pub fn best(&self) -> &TracePoint {
        self.points
            .iter()
            .reduce(|best, p| if p.energy > best.energy { p } else { best })
            .expect("trace always holds the initial point")
    }

    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("trace always holds the initial point")
    }

    /// Running maximum of the energy along the trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.points
            .iter()
            .scan(f64::NEG_INFINITY, |best, p| {
                *best = best.max(p.energy);
                Some(*best)
            })
            .collect()
    }
}

/// Gradient ascent on `E(gamma, beta)` from `init`.
pub fn maximize(problem: &QaoaProblem, init: &QaoaParams, cfg: &MaximizeConfig) -> Result<OptimizationTrace> {
    if cfg.budget == 0 {
        return Err(Error::invalid("iteration budget must be at least 1"));
    }
    let start = Instant::now();
    let mut theta = init.to_flat();
    let mut state = OptimizerState::new(cfg.method, cfg.learning_rate, theta.len());
    let (mut energy, mut grad) = problem.energy_and_gradient(init)?;
    let mut grad_evals = 1;
    let mut points = vec![TracePoint {
        params: init.clone(),
        energy,
    }];
    for it in 0..cfg.budget {
        state.step(&mut theta, &grad.to_flat())?;
        let params = QaoaParams::from_flat(&theta)?;
        let previous = energy;
        if it + 1 == cfg.budget {
            energy = problem.energy(&params)?;
        } else {
            let (e, g) = problem.energy_and_gradient(&params)?;
            energy = e;
            grad = g;
            grad_evals += 1;
        }
        points.push(TracePoint { params, energy });
        if (energy - previous).abs() < cfg.tol {
            break;
        }
    }
    Ok(OptimizationTrace {
        points,
        grad_evals,
        wall: start.elapsed(),
    })
}
