//! Convolutional predictor from depth-1 angles to depth-2 angles.
//!
//! The input `(gamma_1; beta_1)` is a single-channel 2x1 image. Two 2x2
//! convolutions with zero padding 1 grow it to 16x3x2 and then 64x4x3 (ReLU
//! after each), and an unpadded 3x2 convolution collapses it to 1x2x2, read
//! row-major as `(gamma_1, gamma_2; beta_1, beta_2)`. All strides are 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta_gru::{gru_depth1, GruConfig, GruWeights};
use crate::optimizers::{maximize, MaximizeConfig, Method, OptimizerState};
use crate::rng::{derive_seed, SeedStream};
use crate::simulator::{QaoaParams, QaoaProblem};
use crate::tensors::ParamSet;
use crate::Graph;

/// `(channels, height, width)` after each stage.
pub const INPUT_SHAPE: [usize; 3] = [1, 2, 1];
pub const CONV1_SHAPE: [usize; 3] = [16, 3, 2];
pub const CONV2_SHAPE: [usize; 3] = [64, 4, 3];
pub const OUTPUT_SHAPE: [usize; 3] = [1, 2, 2];

#[derive(Debug, Clone, Copy)]
struct ConvSpec {
    weight: usize,
    bias: usize,
    c_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    pad: usize,
}

const CONV1: ConvSpec = ConvSpec { weight: 0, bias: 1, c_in: 1, c_out: 16, kh: 2, kw: 2, pad: 1 };
const CONV2: ConvSpec = ConvSpec { weight: 2, bias: 3, c_in: 16, c_out: 64, kh: 2, kw: 2, pad: 1 };
const CONV3: ConvSpec = ConvSpec { weight: 4, bias: 5, c_in: 64, c_out: 1, kh: 3, kw: 2, pad: 0 };

pub fn cnn_layout() -> Vec<(&'static str, Vec<usize>)> {
    let w = |s: ConvSpec| vec![s.c_out, s.c_in, s.kh, s.kw];
    vec![
        ("conv1.weight", w(CONV1)),
        ("conv1.bias", vec![CONV1.c_out]),
        ("conv2.weight", w(CONV2)),
        ("conv2.bias", vec![CONV2.c_out]),
        ("conv3.weight", w(CONV3)),
        ("conv3.bias", vec![CONV3.c_out]),
    ]
}

/// Output size of a stride-1 convolution.
pub fn conv_output_hw(h: usize, w: usize, kh: usize, kw: usize, pad: usize) -> (usize, usize) {
    (h + 2 * pad + 1 - kh, w + 2 * pad + 1 - kw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnWeights {
    params: ParamSet,
}

impl CnnWeights {
    pub fn zeros() -> Self {
        Self {
            params: ParamSet::zeros(cnn_layout()),
        }
    }

    /// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))` per layer, biases included.
    pub fn random(seed: u64) -> Self {
        let mut w = Self::zeros();
        let mut rng = SeedStream::new(seed);
        for spec in [CONV1, CONV2, CONV3] {
            let bound = 1.0 / ((spec.c_in * spec.kh * spec.kw) as f64).sqrt();
            for k in [spec.weight, spec.bias] {
                for v in w.params.array_mut(k) {
                    *v = rng.uniform_range(-bound, bound);
                }
            }
        }
        w
    }

    pub(crate) fn from_params(params: ParamSet) -> Self {
        Self { params }
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
}

/// A `(c, h, w)` activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl FeatureMap {
    fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape[1] + y) * self.shape[2] + x]
    }
}

fn conv_forward(params: &ParamSet, spec: ConvSpec, input: &FeatureMap) -> FeatureMap {
    let [c_in, h, w] = input.shape;
    assert_eq!(c_in, spec.c_in, "conv input channels");
    let (oh, ow) = conv_output_hw(h, w, spec.kh, spec.kw, spec.pad);
    let weight = params.array(spec.weight);
    let bias = params.array(spec.bias);
    let mut out = FeatureMap::zeros([spec.c_out, oh, ow]);
    for o in 0..spec.c_out {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for c in 0..c_in {
                    for i in 0..spec.kh {
                        let yy = (y + i) as isize - spec.pad as isize;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for j in 0..spec.kw {
                            let xx = (x + j) as isize - spec.pad as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let wi = ((o * c_in + c) * spec.kh + i) * spec.kw + j;
                            acc += weight[wi] * input.at(c, yy as usize, xx as usize);
                        }
                    }
                }
                out.data[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient.
fn conv_backward(
    params: &ParamSet,
    spec: ConvSpec,
    input: &FeatureMap,
    g_out: &FeatureMap,
    grads: &mut ParamSet,
) -> FeatureMap {
    let [c_in, h, w] = input.shape;
    let [_, oh, ow] = g_out.shape;
    let weight = params.array(spec.weight);
    let mut g_in = FeatureMap::zeros(input.shape);
    for o in 0..spec.c_out {
        let mut gb = 0.0;
        for y in 0..oh {
            for x in 0..ow {
                let g = g_out.at(o, y, x);
                gb += g;
                if g == 0.0 {
                    continue;
                }
                for c in 0..c_in {
                    for i in 0..spec.kh {
                        let yy = (y + i) as isize - spec.pad as isize;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for j in 0..spec.kw {
                            let xx = (x + j) as isize - spec.pad as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let (yy, xx) = (yy as usize, xx as usize);
                            let wi = ((o * c_in + c) * spec.kh + i) * spec.kw + j;
                            grads.array_mut(spec.weight)[wi] += g * input.at(c, yy, xx);
                            g_in.data[(c * h + yy) * w + xx] += g * weight[wi];
                        }
                    }
                }
            }
        }
        grads.array_mut(spec.bias)[o] += gb;
    }
    g_in
}

fn relu(mut m: FeatureMap) -> FeatureMap {
    m.data.iter_mut().for_each(|v| *v = v.max(0.0));
    m
}

/// Every intermediate map of one forward pass.
#[derive(Debug, Clone)]
pub struct CnnActivations {
    pub input: FeatureMap,
    pub conv1: FeatureMap,
    pub conv2: FeatureMap,
    pub output: FeatureMap,
}

impl CnnWeights {
    pub fn forward_trace(&self, theta1: [f64; 2]) -> Result<CnnActivations> {
        if theta1.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite CNN input".into()));
        }
        let input = FeatureMap {
            shape: INPUT_SHAPE,
            data: theta1.to_vec(),
        };
        let conv1 = relu(conv_forward(&self.params, CONV1, &input));
        assert_eq!(conv1.shape, CONV1_SHAPE);
        let conv2 = relu(conv_forward(&self.params, CONV2, &conv1));
        assert_eq!(conv2.shape, CONV2_SHAPE);
        let output = conv_forward(&self.params, CONV3, &conv2);
        assert_eq!(output.shape, OUTPUT_SHAPE);
        Ok(CnnActivations {
            input,
            conv1,
            conv2,
            output,
        })
    }
}

/// Predicts `[gamma_1, gamma_2, beta_1, beta_2]` from `[gamma_1, beta_1]`.
pub fn cnn_forward(w: &CnnWeights, theta1: [f64; 2]) -> Result<[f64; 4]> {
    let out = w.forward_trace(theta1)?.output.data;
    Ok([out[0], out[1], out[2], out[3]])
}

/// Mean over samples of the squared Euclidean error.
pub fn cnn_loss(predictions: &[[f64; 4]], labels: &[[f64; 4]]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| p.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Loss and weight gradient over `(input, label)` pairs.
pub fn cnn_loss_and_grad(w: &CnnWeights, inputs: &[[f64; 2]], labels: &[[f64; 4]]) -> Result<(f64, ParamSet)> {
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::invalid(format!(
            "{} inputs vs {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut grads = w.params.zeros_like();
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(labels) {
        let act = w.forward_trace(*x)?;
        let mut g_out = FeatureMap::zeros(OUTPUT_SHAPE);
        for k in 0..4 {
            let diff = act.output.data[k] - y[k];
            loss += diff * diff * scale;
            g_out.data[k] = 2.0 * diff * scale;
        }
        let mut g2 = conv_backward(&w.params, CONV3, &act.conv2, &g_out, &mut grads);
        mask_relu(&mut g2, &act.conv2);
        let mut g1 = conv_backward(&w.params, CONV2, &act.conv1, &g2, &mut grads);
        mask_relu(&mut g1, &act.conv1);
        conv_backward(&w.params, CONV1, &act.input, &g1, &mut grads);
    }
    Ok((loss, grads))
}

fn mask_relu(g: &mut FeatureMap, activated: &FeatureMap) {
    for (gv, &a) in g.data.iter_mut().zip(&activated.data) {
        if a <= 0.0 {
            *gv = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depth2Sample {
    pub graph: Graph,
    /// GRU-optimized depth-1 angles `(gamma_1, beta_1)`, gauge-fixed.
    pub theta1: [f64; 2],
    /// Best depth-2 angles found, `(gamma_1, gamma_2, beta_1, beta_2)`, gauge-fixed.
    pub theta2_star: [f64; 4],
    pub label_energy: f64,
    pub c_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Depth2Dataset {
    pub samples: Vec<Depth2Sample>,
}

impl Depth2Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn inputs(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| s.theta1).collect()
    }

    pub fn labels(&self) -> Vec<[f64; 4]> {
        self.samples.iter().map(|s| s.theta2_star).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub restarts: usize,
    pub seed: u64,
    pub gru: GruConfig,
    /// Refinement of the GRU proposal that becomes the CNN input.
    pub depth1_refine: MaximizeConfig,
    /// Optimizer for every depth-2 restart.
    pub depth2_search: MaximizeConfig,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            gru: GruConfig::default(),
            depth1_refine: MaximizeConfig::baseline(Method::Adam),
            depth2_search: MaximizeConfig {
                budget: 300,
                ..MaximizeConfig::baseline(Method::Adam)
            },
        }
    }
}

/// Multi-start depth-2 search for one graph. Restart `k` always uses the same
/// start, so more restarts can only improve the label.
pub fn best_depth2(problem: &QaoaProblem, restarts: usize, seed: u64, search: &MaximizeConfig) -> Result<(QaoaParams, f64)> {
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let mut best: Option<(QaoaParams, f64)> = None;
    for k in 0..restarts {
        let init = QaoaParams::random(2, derive_seed(&[seed, k as u64]));
        let trace = maximize(problem, &init, search)?;
        let top = trace.best();
        if best.as_ref().is_none_or(|(_, e)| top.energy > *e) {
            best = Some((top.params.clone(), top.energy));
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Builds `(theta_1, theta_2*)` pairs: `theta_1` from the GRU pipeline,
/// `theta_2*` from a multi-start depth-2 search.
pub fn make_depth2_labels(graphs: &[QaoaProblem], gru: &GruWeights, cfg: &LabelConfig) -> Result<Depth2Dataset> {
    let samples: Vec<Result<Depth2Sample>> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, problem)| {
            let d1 = gru_depth1(
                gru,
                problem,
                derive_seed(&[cfg.seed, i as u64, 1]),
                &cfg.gru,
                &cfg.depth1_refine,
            )?;
            let theta1 = d1.params().gauge_fixed();
            let (theta2, energy) = best_depth2(problem, cfg.restarts, derive_seed(&[cfg.seed, i as u64, 2]), &cfg.depth2_search)?;
            let theta2 = theta2.gauge_fixed().to_flat();
            Ok(Depth2Sample {
                graph: problem.graph().clone(),
                theta1: [theta1.gammas()[0], theta1.betas()[0]],
                theta2_star: [theta2[0], theta2[1], theta2[2], theta2[3]],
                label_energy: energy,
                c_max: problem.c_max(),
            })
        })
        .collect();
    Ok(Depth2Dataset {
        samples: samples.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCnnConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainCnnConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 6,
            lr: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedCnn {
    pub weights: CnnWeights,
    /// Sample-weighted mean training loss of every epoch.
    pub loss_history: Vec<f64>,
}

pub fn train_cnn(init: &CnnWeights, data: &Depth2Dataset, cfg: &TrainCnnConfig) -> Result<TrainedCnn> {
    if data.is_empty() {
        return Err(Error::invalid("CNN training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let inputs = data.inputs();
    let labels = data.labels();
    let mut weights = init.clone();
    let mut opt = OptimizerState::new(Method::Adam, cfg.lr, weights.params.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        SeedStream::new(derive_seed(&[cfg.seed, epoch as u64])).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x: Vec<[f64; 2]> = batch.iter().map(|&i| inputs[i]).collect();
            let y: Vec<[f64; 4]> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = cnn_loss_and_grad(&weights, &x, &y)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Numeric(format!("CNN training diverged in epoch {epoch}")));
            }
            opt.descend(weights.params.data_mut(), grads.data())?;
            epoch_loss += loss * batch.len() as f64;
        }
        loss_history.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainedCnn {
        weights,
        loss_history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Some ReLU switched on or off between the two perturbed evaluations,
    /// so the central difference straddles a kink and says nothing about the
    /// derivative at the unperturbed weights.
    pub straddles_kink: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub entries: Vec<GradientCheckEntry>,
    /// Largest relative error over entries that do not straddle a kink.
    pub max_relative_error: f64,
}

impl GradientCheckReport {
    pub fn kinks(&self) -> usize {
        self.entries.iter().filter(|e| e.straddles_kink).count()
    }
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-4;

/// Compares backprop against central differences on `count` random weights.
pub fn cnn_weight_gradient_check(w: &CnnWeights, data: &Depth2Dataset, count: usize, seed: u64) -> Result<GradientCheckReport> {
    gradient_check_with(w, data, count, seed, |w, x, y| cnn_loss_and_grad(w, x, y).map(|(_, g)| g))
}

fn relu_pattern(w: &CnnWeights, inputs: &[[f64; 2]]) -> Result<Vec<bool>> {
    let mut pattern = Vec::new();
    for x in inputs {
        let act = w.forward_trace(*x)?;
        pattern.extend(act.conv1.data.iter().chain(&act.conv2.data).map(|&v| v > 0.0));
    }
    Ok(pattern)
}

/// As [`cnn_weight_gradient_check`] with a caller-supplied gradient routine.
pub fn gradient_check_with<F>(w: &CnnWeights, data: &Depth2Dataset, count: usize, seed: u64, grad_fn: F) -> Result<GradientCheckReport>
where
    F: Fn(&CnnWeights, &[[f64; 2]], &[[f64; 4]]) -> Result<ParamSet>,
{
    let inputs = data.inputs();
    let labels = data.labels();
    let analytic = grad_fn(w, &inputs, &labels)?;
    let loss_at = |weights: &CnnWeights| -> Result<f64> {
        let preds = inputs.iter().map(|x| cnn_forward(weights, *x)).collect::<Result<Vec<_>>>()?;
        cnn_loss(&preds, &labels)
    };
    let mut rng = SeedStream::new(seed);
    let mut entries = Vec::with_capacity(count);
    let mut max_relative_error: f64 = 0.0;
    for _ in 0..count {
        let index = rng.below(w.params.len());
        let mut plus = w.clone();
        plus.params.data_mut()[index] += GRADIENT_CHECK_STEP;
        let mut minus = w.clone();
        minus.params.data_mut()[index] -= GRADIENT_CHECK_STEP;
        let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * GRADIENT_CHECK_STEP);
        let straddles_kink = relu_pattern(&plus, &inputs)? != relu_pattern(&minus, &inputs)?;
        let a = analytic.data()[index];
        if !straddles_kink {
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_relative_error = max_relative_error.max(rel);
        }
        entries.push(GradientCheckEntry {
            index,
            analytic: a,
            numeric,
            straddles_kink,
        });
    }
    Ok(GradientCheckReport {
        entries,
        max_relative_error,
    })
}
