//! Noise-free statevector engine for Max-Cut QAOA.
//!
//! The state after `L` layers is
//! `prod_l exp(-i beta_l H_M) exp(-i gamma_l H_C) |+>^N` with
//! `H_M = sum_q X_q` and `H_C` the diagonal cut operator. The cost unitary is
//! applied as a diagonal phase over the precomputed [`CutTable`]; for a single
//! edge this equals the usual `CNOT . RZ . CNOT` sandwich up to a global
//! phase, so the gate-level form is never executed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{basis_cut_table, CutTable, Graph, MAX_NODES};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

pub fn prepare_uniform_state(n: usize) -> Result<StateVector> {
    StateVector::uniform(n)
}

fn check_qubits(n: usize) -> Result<()> {
    if !(1..=MAX_NODES).contains(&n) {
        return Err(Error::ResourceLimit(format!(
            "{n} qubits outside supported range [1, {MAX_NODES}]"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|+>^n`: every amplitude equals `2^(-n/2)`.
    pub fn uniform(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        let a = 1.0 / (dim as f64).sqrt();
        Ok(Self {
            n_qubits: n,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::invalid(format!(
                "{dim} amplitudes is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies every amplitude by `phase`.
    pub fn scale(&mut self, phase: Complex64) {
        for a in &mut self.amps {
            *a *= phase;
        }
    }

    fn check_table(&self, table: &CutTable) -> Result<()> {
        if table.len() != self.amps.len() {
            return Err(Error::invalid(format!(
                "cut table has {} entries, state has {}",
                table.len(),
                self.amps.len()
            )));
        }
        Ok(())
    }

    /// `|psi> <- exp(-i gamma H_C) |psi>`.
    pub fn apply_cost_layer(&mut self, table: &CutTable, gamma: f64) -> Result<()> {
        self.check_table(table)?;
        if gamma == 0.0 {
            return Ok(());
        }
        let phases: Vec<Complex64> = (0..=table.n_edges())
            .map(|k| Complex64::from_polar(1.0, -gamma * k as f64))
            .collect();
        for (a, &c) in self.amps.iter_mut().zip(table.cuts()) {
            *a *= phases[c as usize];
        }
        Ok(())
    }

    /// `exp(-i gamma (1 - Z_i Z_j) / 2)` for a single edge.
    pub fn apply_edge_phase(&mut self, i: usize, j: usize, gamma: f64) {
        let mask = (1usize << i) | (1usize << j);
        let phase = Complex64::from_polar(1.0, -gamma);
        for (b, a) in self.amps.iter_mut().enumerate() {
            if (b & mask).count_ones() == 1 {
                *a *= phase;
            }
        }
    }

    /// `exp(-i beta X_q)` on one qubit.
    pub fn apply_mixer_qubit(&mut self, q: usize, beta: f64) {
        let (s, c) = beta.sin_cos();
        let stride = 1usize << q;
        let ms = Complex64::new(0.0, -s);
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x * c + y * ms;
                *b = x * ms + y * c;
            }
        }
    }

    /// `exp(-i beta sum_q X_q)`.
    pub fn apply_mixer_layer(&mut self, beta: f64) {
        if beta == 0.0 {
            return;
        }
        for q in 0..self.n_qubits {
            self.apply_mixer_qubit(q, beta);
        }
    }

    /// `<psi| H_C |psi>`.
    pub fn expectation(&self, table: &CutTable) -> Result<f64> {
        self.check_table(table)?;
        Ok(self
            .amps
            .iter()
            .zip(table.cuts())
            .map(|(a, &c)| a.norm_sqr() * c as f64)
            .sum())
    }
}

/// Angles of a depth-`L` circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::invalid(format!(
                "{} gammas vs {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite QAOA angle".into()));
        }
        Ok(Self { gammas, betas })
    }

    pub fn zeros(depth: usize) -> Self {
        Self {
            gammas: vec![0.0; depth],
            betas: vec![0.0; depth],
        }
    }

    /// Uniform start on the reporting domain: `gamma in [0, 2pi)`, then
    /// `beta in [0, pi)`, drawn in that order from one stream.
    pub fn random(depth: usize, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed);
        let gammas = (0..depth).map(|_| rng.uniform_range(0.0, TAU)).collect();
        let betas = (0..depth).map(|_| rng.uniform_range(0.0, PI)).collect();
        Self { gammas, betas }
    }

    /// Inverse of [`QaoaParams::to_flat`]: `[gamma_1..gamma_L, beta_1..beta_L]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "flat parameter vector has odd length {}",
                flat.len()
            )));
        }
        let (g, b) = flat.split_at(flat.len() / 2);
        Self::new(g.to_vec(), b.to_vec())
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.gammas.clone();
        v.extend_from_slice(&self.betas);
        v
    }

    /// Reporting domain: `gamma in [0, 2pi)`, `beta in [0, pi)`.
    pub fn canonical(&self) -> Self {
        Self {
            gammas: self.gammas.iter().map(|&g| wrap(g, TAU)).collect(),
            betas: self.betas.iter().map(|&b| wrap(b, PI)).collect(),
        }
    }

    /// Representative of the symmetry class used for learned-model inputs and
    /// labels.
    ///
    /// For unit-weight Max-Cut the energy is invariant under
    /// `gamma_l -> gamma_l + 2pi`, `beta_l -> beta_l + pi/2` (the mixer picks up
    /// `X^N`, which commutes with `H_C`), and `theta -> -theta` (complex
    /// conjugation). The representative has every `gamma` in `(-pi, pi]`,
    /// `gamma_1 >= 0`, and every `beta` in `(-pi/4, pi/4]`. Always a subset of
    /// the energy level set, so `energy(gauge_fixed(t)) == energy(t)`.
    pub fn gauge_fixed(&self) -> Self {
        let mut gammas: Vec<f64> = self.gammas.iter().map(|&g| wrap_centered(g, TAU)).collect();
        let mut betas: Vec<f64> = self.betas.to_vec();
        if gammas.first().is_some_and(|&g| g < 0.0) {
            gammas.iter_mut().for_each(|g| *g = wrap_centered(-*g, TAU));
            betas.iter_mut().for_each(|b| *b = -*b);
        }
        let betas = betas.iter().map(|&b| wrap_centered(b, FRAC_PI_2)).collect();
        Self { gammas, betas }
    }
}

impl fmt::Display for QaoaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma=[")?;
        for (i, g) in self.gammas.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g:.4}")?;
        }
        write!(f, "] beta=[")?;
        for (i, b) in self.betas.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b:.4}")?;
        }
        write!(f, "]")
    }
}

/// Wraps into `[0, period)`.
fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Wraps into `(-period/2, period/2]`.
fn wrap_centered(x: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    let r = half - wrap(half - x, period);
    if r <= -half {
        r + period
    } else {
        r
    }
}

/// Applies the layers of `params` to the uniform state.
pub fn evolve(g: &Graph, params: &QaoaParams) -> Result<StateVector> {
    QaoaProblem::new(g.clone())?.evolve(params)
}

pub fn approximation_ratio(energy: f64, c_max: f64) -> Result<f64> {
    if !(c_max > 0.0) {
        return Err(Error::invalid(format!("maximum cut must be positive, got {c_max}")));
    }
    Ok(energy / c_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Two-point shift rules: per edge for `gamma`, per qubit for `beta`.
    ParameterShift,
    /// Central differences with step [`FINITE_DIFFERENCE_STEP`].
    FiniteDifference,
    /// Reverse-mode sweep over the stored layer sequence; one forward and one
    /// backward pass regardless of depth.
    Adjoint,
}

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

impl FromStr for GradientMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parameter-shift" => Ok(Self::ParameterShift),
            "finite-difference" => Ok(Self::FiniteDifference),
            "adjoint" => Ok(Self::Adjoint),
            other => Err(Error::invalid(format!("unknown gradient method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGradient {
    pub d_gamma: Vec<f64>,
    pub d_beta: Vec<f64>,
}

impl EnergyGradient {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.d_gamma.clone();
        v.extend_from_slice(&self.d_beta);
        v
    }
}

#[derive(Debug, Clone, Copy)]
enum Shift {
    None,
    Edge { layer: usize, edge: usize, delta: f64 },
    Qubit { layer: usize, qubit: usize, delta: f64 },
}

/// A graph together with its cut table, ready for repeated circuit evaluation.
#[derive(Debug, Clone)]
pub struct QaoaProblem {
    graph: Graph,
    table: CutTable,
}

impl QaoaProblem {
    pub fn new(graph: Graph) -> Result<Self> {
        check_qubits(graph.n_nodes())?;
        let table = basis_cut_table(&graph)?;
        Ok(Self { graph, table })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn table(&self) -> &CutTable {
        &self.table
    }

    /// Exact maximum cut (largest diagonal entry of `H_C`).
    pub fn c_max(&self) -> f64 {
        self.table.max()
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn ratio(&self, energy: f64) -> Result<f64> {
        approximation_ratio(energy, self.c_max())
    }

    pub fn evolve(&self, params: &QaoaParams) -> Result<StateVector> {
        self.evolve_shifted(params, Shift::None)
    }

    fn evolve_shifted(&self, params: &QaoaParams, shift: Shift) -> Result<StateVector> {
        let mut state = StateVector::uniform(self.graph.n_nodes())?;
        for (l, (&gamma, &beta)) in params.gammas.iter().zip(&params.betas).enumerate() {
            state.apply_cost_layer(&self.table, gamma)?;
            if let Shift::Edge { layer, edge, delta } = shift {
                if layer == l {
                    let (i, j) = self.graph.edges()[edge];
                    state.apply_edge_phase(i, j, delta);
                }
            }
            state.apply_mixer_layer(beta);
            if let Shift::Qubit { layer, qubit, delta } = shift {
                if layer == l {
                    state.apply_mixer_qubit(qubit, delta);
                }
            }
        }
        Ok(state)
    }

    /// `E_L(gamma, beta) = <phi| H_C |phi>`.
    pub fn energy(&self, params: &QaoaParams) -> Result<f64> {
        self.evolve(params)?.expectation(&self.table)
    }

    fn shifted_energy(&self, params: &QaoaParams, shift: Shift) -> Result<f64> {
        self.evolve_shifted(params, shift)?.expectation(&self.table)
    }

    pub fn gradient(&self, params: &QaoaParams, method: GradientMethod) -> Result<EnergyGradient> {
        if params.depth() == 0 {
            return Err(Error::invalid("gradient needs depth >= 1"));
        }
        match method {
            GradientMethod::Adjoint => Ok(self.energy_and_gradient(params)?.1),
            GradientMethod::ParameterShift => self.parameter_shift_gradient(params),
            GradientMethod::FiniteDifference => self.finite_difference_gradient(params),
        }
    }

    fn parameter_shift_gradient(&self, params: &QaoaParams) -> Result<EnergyGradient> {
        let depth = params.depth();
        let mut d_gamma = vec![0.0; depth];
        let mut d_beta = vec![0.0; depth];
        for layer in 0..depth {
            // generator (1 - ZZ)/2 has spectrum {0, 1}: dE = [E(+pi/2) - E(-pi/2)] / 2
            for edge in 0..self.graph.n_edges() {
                let plus = self.shifted_energy(params, Shift::Edge { layer, edge, delta: FRAC_PI_2 })?;
                let minus = self.shifted_energy(params, Shift::Edge { layer, edge, delta: -FRAC_PI_2 })?;
                d_gamma[layer] += 0.5 * (plus - minus);
            }
            // generator X has spectrum {-1, 1}: dE = E(+pi/4) - E(-pi/4)
            for qubit in 0..self.graph.n_nodes() {
                let plus = self.shifted_energy(params, Shift::Qubit { layer, qubit, delta: FRAC_PI_4 })?;
                let minus = self.shifted_energy(params, Shift::Qubit { layer, qubit, delta: -FRAC_PI_4 })?;
                d_beta[layer] += plus - minus;
            }
        }
        Ok(EnergyGradient { d_gamma, d_beta })
    }

    fn finite_difference_gradient(&self, params: &QaoaParams) -> Result<EnergyGradient> {
        let h = FINITE_DIFFERENCE_STEP;
        let flat = params.to_flat();
        let mut grad = Vec::with_capacity(flat.len());
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let ep = self.energy(&QaoaParams::from_flat(&plus)?)?;
            let em = self.energy(&QaoaParams::from_flat(&minus)?)?;
            grad.push((ep - em) / (2.0 * h));
        }
        let (g, b) = grad.split_at(params.depth());
        Ok(EnergyGradient {
            d_gamma: g.to_vec(),
            d_beta: b.to_vec(),
        })
    }

    /// Energy and exact gradient from one forward and one backward sweep.
    ///
    /// With `lambda = H_C |phi>` carried backwards alongside `|phi>`, the
    /// derivative for a layer `exp(-i theta G)` is `2 Im <lambda| G |psi>`
    /// evaluated just after that layer.
    pub fn energy_and_gradient(&self, params: &QaoaParams) -> Result<(f64, EnergyGradient)> {
        let mut psi = self.evolve(params)?;
        let energy = psi.expectation(&self.table)?;
        let mut lambda = psi.clone();
        for (a, &c) in lambda.amps.iter_mut().zip(self.table.cuts()) {
            *a *= c as f64;
        }
        let depth = params.depth();
        let mut d_gamma = vec![0.0; depth];
        let mut d_beta = vec![0.0; depth];
        for l in (0..depth).rev() {
            d_beta[l] = 2.0 * mixer_overlap(&lambda, &psi).im;
            psi.apply_mixer_layer(-params.betas[l]);
            lambda.apply_mixer_layer(-params.betas[l]);

            let overlap: Complex64 = lambda
                .amps
                .iter()
                .zip(&psi.amps)
                .zip(self.table.cuts())
                .map(|((l, p), &c)| l.conj() * p * c as f64)
                .sum();
            d_gamma[l] = 2.0 * overlap.im;
            psi.apply_cost_layer(&self.table, -params.gammas[l])?;
            lambda.apply_cost_layer(&self.table, -params.gammas[l])?;
        }
        Ok((energy, EnergyGradient { d_gamma, d_beta }))
    }
}

/// `<lambda| sum_q X_q |psi>`.
fn mixer_overlap(lambda: &StateVector, psi: &StateVector) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for q in 0..psi.n_qubits {
        let bit = 1usize << q;
        for (b, l) in lambda.amps.iter().enumerate() {
            total += l.conj() * psi.amps[b ^ bit];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use crate::graph::generate_erdos_renyi;

    fn single_edge() -> QaoaProblem {
        QaoaProblem::new(Graph::new(2, [(0, 1)]).unwrap()).unwrap()
    }

    fn p1(gamma: f64, beta: f64) -> QaoaParams {
        QaoaParams::new(vec![gamma], vec![beta]).unwrap()
    }

    /// Closed form for one edge at depth 1, worked out on the 4-dim space.
    fn single_edge_energy(gamma: f64, beta: f64) -> f64 {
        0.5 * (1.0 + gamma.sin() * (4.0 * beta).sin())
    }

    #[test]
    fn uniform_state_amplitudes() {
        let s = prepare_uniform_state(1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitudes()[0].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, r, epsilon = 1e-15);
        let s2 = prepare_uniform_state(2).unwrap();
        assert!(s2.amplitudes().iter().all(|a| *a == Complex64::new(0.5, 0.0)));
        for n in 1..=12 {
            assert_abs_diff_eq!(prepare_uniform_state(n).unwrap().norm_sqr(), 1.0, epsilon = 1e-15);
        }
        assert!(matches!(prepare_uniform_state(0), Err(Error::ResourceLimit(_))));
        assert!(matches!(prepare_uniform_state(25), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn cost_layer_identities() {
        let g = generate_erdos_renyi(6, 0.6, 1).unwrap();
        let table = basis_cut_table(&g).unwrap();
        let mut s = StateVector::uniform(6).unwrap();
        s.apply_mixer_layer(0.3);
        let before = s.clone();
        s.apply_cost_layer(&table, 0.0).unwrap();
        assert_eq!(s, before);
        s.apply_cost_layer(&table, TAU).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cost_layer_single_edge_quarter_turn() {
        let table = basis_cut_table(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        let mut s = StateVector::uniform(2).unwrap();
        s.apply_cost_layer(&table, FRAC_PI_2).unwrap();
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.5),
            Complex64::new(0.0, -0.5),
            Complex64::new(0.5, 0.0),
        ];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() < 1e-15);
        }
    }

    #[test]
    fn cost_layer_length_mismatch() {
        let table = basis_cut_table(&Graph::complete(3).unwrap()).unwrap();
        let mut s = StateVector::uniform(2).unwrap();
        assert!(matches!(s.apply_cost_layer(&table, 0.1), Err(Error::InvalidArgument(_))));
        assert!(s.expectation(&table).is_err());
    }

    #[test]
    fn mixer_identities() {
        let mut s = StateVector::basis(3, 5).unwrap();
        let before = s.clone();
        s.apply_mixer_layer(0.0);
        assert_eq!(s, before);

        // exp(-i pi/2 X) = -iX on every qubit
        for n in 1..=4 {
            let mut s = StateVector::basis(n, 0).unwrap();
            s.apply_mixer_layer(FRAC_PI_2);
            let all_ones = (1 << n) - 1;
            let phase = Complex64::new(0.0, -1.0).powu(n as u32);
            for (b, a) in s.amplitudes().iter().enumerate() {
                let want = if b == all_ones { phase } else { Complex64::new(0.0, 0.0) };
                assert!((a - want).norm() < 1e-15, "n={n} b={b}");
            }
        }

        // |+>^n is an eigenvector with eigenphase exp(-i beta n)
        let n = 5;
        let beta = 0.731;
        let mut s = StateVector::uniform(n).unwrap();
        s.apply_mixer_layer(beta);
        let phase = Complex64::from_polar(1.0, -beta * n as f64);
        let amp = 1.0 / ((1 << n) as f64).sqrt();
        for a in s.amplitudes() {
            assert!((a - phase * amp).norm() < 1e-14);
        }
    }

    #[test]
    fn evolve_trivial_cases() {
        let g = generate_erdos_renyi(5, 0.7, 3).unwrap();
        let uniform = StateVector::uniform(5).unwrap();
        assert_eq!(evolve(&g, &QaoaParams::zeros(0)).unwrap(), uniform);
        assert_eq!(evolve(&g, &QaoaParams::zeros(4)).unwrap(), uniform);
    }

    #[test]
    fn single_edge_landscape() {
        let problem = single_edge();
        assert_abs_diff_eq!(
            problem.energy(&p1(FRAC_PI_2, PI / 8.0)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        for i in 0..5 {
            for j in 0..5 {
                let (gamma, beta) = (PI * i as f64 / 4.0, PI * j as f64 / 4.0);
                let e = problem.energy(&p1(gamma, beta)).unwrap();
                assert_abs_diff_eq!(e, single_edge_energy(gamma, beta), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn expectation_values() {
        let g = generate_erdos_renyi(7, 0.5, 11).unwrap();
        let table = basis_cut_table(&g).unwrap();
        let e = StateVector::uniform(7).unwrap().expectation(&table).unwrap();
        assert_abs_diff_eq!(e, g.n_edges() as f64 / 2.0, epsilon = 1e-12);

        let edge = basis_cut_table(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        // |01> in the vertex-0-is-LSB convention is basis index 2 (bit 1 set)
        assert_eq!(StateVector::basis(2, 2).unwrap().expectation(&edge).unwrap(), 1.0);
        assert_eq!(StateVector::basis(2, 1).unwrap().expectation(&edge).unwrap(), 1.0);
    }

    #[test]
    fn gradient_examples() {
        let problem = single_edge();
        for method in [GradientMethod::ParameterShift, GradientMethod::FiniteDifference, GradientMethod::Adjoint] {
            let at_opt = problem.gradient(&p1(FRAC_PI_2, PI / 8.0), method).unwrap();
            assert_abs_diff_eq!(at_opt.d_gamma[0], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(at_opt.d_beta[0], 0.0, epsilon = 1e-8);
            let at_zero = problem.gradient(&p1(0.0, PI / 8.0), method).unwrap();
            assert_abs_diff_eq!(at_zero.d_gamma[0], 0.5, epsilon = 1e-8);
            assert_abs_diff_eq!(at_zero.d_beta[0], 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn gradient_method_tags() {
        assert_eq!("parameter-shift".parse::<GradientMethod>().unwrap(), GradientMethod::ParameterShift);
        assert_eq!("finite-difference".parse::<GradientMethod>().unwrap(), GradientMethod::FiniteDifference);
        assert!(matches!("newton".parse::<GradientMethod>(), Err(Error::InvalidArgument(_))));
        assert!(single_edge().gradient(&QaoaParams::zeros(0), GradientMethod::Adjoint).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_abs_diff_eq!(approximation_ratio(1.9, 2.0).unwrap(), 0.95, epsilon = 1e-15);
        assert_eq!(approximation_ratio(3.0, 4.0).unwrap(), 0.75);
        assert!(approximation_ratio(1.0, 0.0).is_err());
        let problem = single_edge();
        let e = problem.energy(&p1(FRAC_PI_2, PI / 8.0)).unwrap();
        assert_abs_diff_eq!(problem.ratio(e).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn params_flat_layout() {
        let p = QaoaParams::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(QaoaParams::from_flat(&p.to_flat()).unwrap(), p);
        assert!(QaoaParams::new(vec![1.0], vec![]).is_err());
        assert!(QaoaParams::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(QaoaParams::from_flat(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn canonical_ranges() {
        let p = QaoaParams::new(vec![-0.5, 7.0], vec![-0.1, 3.5]).unwrap().canonical();
        assert!(p.gammas().iter().all(|g| (0.0..TAU).contains(g)));
        assert!(p.betas().iter().all(|b| (0.0..PI).contains(b)));
        assert_abs_diff_eq!(p.gammas()[0], TAU - 0.5, epsilon = 1e-12);
    }

    fn random_case() -> impl Strategy<Value = (Graph, QaoaParams)> {
        (2usize..=7, 0.3f64..1.0, any::<u64>(), 1usize..=3)
            .prop_filter_map("empty", |(n, p, s, d)| generate_erdos_renyi(n, p, s).ok().map(|g| (g, d, s)))
            .prop_flat_map(|(g, d, _)| {
                let angles = proptest::collection::vec(-4.0f64..4.0, 2 * d);
                (Just(g), angles)
            })
            .prop_map(|(g, a)| (g, QaoaParams::from_flat(&a).unwrap()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_is_preserved((g, params) in random_case()) {
            let s = evolve(&g, &params).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn energy_within_bounds((g, params) in random_case()) {
            let problem = QaoaProblem::new(g).unwrap();
            let e = problem.energy(&params).unwrap();
            prop_assert!(e >= -1e-12 && e <= problem.c_max() + 1e-12);
        }

        #[test]
        fn global_phase_leaves_expectation((g, params) in random_case(), phi in 0.0f64..TAU) {
            let problem = QaoaProblem::new(g).unwrap();
            let mut s = problem.evolve(&params).unwrap();
            let e = s.expectation(problem.table()).unwrap();
            s.scale(Complex64::from_polar(1.0, phi));
            prop_assert!((s.expectation(problem.table()).unwrap() - e).abs() < 1e-12);
        }

        #[test]
        fn gauge_fixing_preserves_energy((g, params) in random_case()) {
            let problem = QaoaProblem::new(g).unwrap();
            let fixed = params.gauge_fixed();
            prop_assert!(fixed.gammas().iter().all(|&g| g > -PI - 1e-12 && g <= PI + 1e-12));
            prop_assert!(fixed.gammas()[0] >= 0.0);
            prop_assert!(fixed.betas().iter().all(|&b| b > -FRAC_PI_4 - 1e-12 && b <= FRAC_PI_4 + 1e-12));
            let diff = problem.energy(&fixed).unwrap() - problem.energy(&params).unwrap();
            prop_assert!(diff.abs() < 1e-10);
            let canon = params.canonical();
            prop_assert!((problem.energy(&canon).unwrap() - problem.energy(&params).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn adjoint_matches_parameter_shift((g, params) in random_case()) {
            let problem = QaoaProblem::new(g).unwrap();
            let shift = problem.gradient(&params, GradientMethod::ParameterShift).unwrap().to_flat();
            let (e, adj) = problem.energy_and_gradient(&params).unwrap();
            prop_assert!((e - problem.energy(&params).unwrap()).abs() < 1e-12);
            for (a, b) in adj.to_flat().iter().zip(&shift) {
                prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
