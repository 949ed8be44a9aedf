//! Block Gibbs sampling over the visible, auxiliary and hidden layers.
//!
//! Given the visible layer, hidden and auxiliary units are conditionally
//! independent, and given both of them the visible units are. One sweep
//! updates `h`, then `a`, then `σ`; the chain's stationary distribution is
//! `p_λ(σ, a, h)` and its `(σ, a)` marginal is `|ψ(σ, a)|²`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::ndo::{NdoParams, ParamSet, Shape};
use crate::qcore::{config_index, index_bits, site_bit, ComplexMatrix};
use crate::rng::{self, Rng};

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_CD_K: usize = 10;
pub const BATCH_MEANS: usize = 30;

/// Log-ratio exponents beyond this are refused by the local estimator.
pub const LOG_RATIO_GUARD: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    pub sigma: Vec<u8>,
    pub aux: Vec<u8>,
    pub hidden: Vec<u8>,
}

/// `P(h_i = 1 | σ) = logistic(W^[i]·σ + c_i)`.
pub fn conditional_hidden(lambda: &ParamSet<'_>, sigma: &[u8]) -> Vec<f64> {
    (0..lambda.n_hidden())
        .map(|i| math::logistic(lambda.hidden_input(i, sigma)))
        .collect()
}

/// `P(a_k = 1 | σ) = logistic(U^[k]·σ + d_k)`.
pub fn conditional_aux(lambda: &ParamSet<'_>, sigma: &[u8]) -> Vec<f64> {
    (0..lambda.n_aux())
        .map(|k| {
            let d = lambda.aux_bias.map_or(0.0, |d| d[k]);
            math::logistic(lambda.mixing_input(k, sigma) + d)
        })
        .collect()
}

/// `P(σ_j = 1 | h, a) = logistic(Σ_i h_i W_ij + Σ_k a_k U_kj + b_j)`.
pub fn conditional_visible(lambda: &ParamSet<'_>, hidden: &[u8], aux: &[u8]) -> Vec<f64> {
    let n = lambda.n_visible;
    (0..n)
        .map(|j| {
            let mut x = lambda.visible_bias[j];
            for (i, &h) in hidden.iter().enumerate() {
                if h != 0 {
                    x += lambda.weights[i * n + j];
                }
            }
            for (k, &a) in aux.iter().enumerate() {
                if a != 0 {
                    x += lambda.mixing[k * n + j];
                }
            }
            math::logistic(x)
        })
        .collect()
}

fn draw(probs: &[f64], out: &mut [u8], rng: &mut Rng) {
    for (o, &p) in out.iter_mut().zip(probs) {
        *o = (rng.random::<f64>() < p) as u8;
    }
}

/// A Markov chain owning its configuration and random stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: SpinConfig,
    pub rng_seed: u64,
    pub stream: u64,
    pub sweep_count: u64,
    rng: Rng,
}

impl ChainState {
    /// Starts from a uniformly random visible configuration.
    pub fn new(shape: Shape, seed: u64, stream: u64) -> Self {
        let mut rng = rng::stream(seed, stream);
        let sigma = (0..shape.n_visible)
            .map(|_| (rng.random::<f64>() < 0.5) as u8)
            .collect();
        Self::with_rng(shape, sigma, seed, stream, rng)
    }

    /// Starts from the given visible configuration.
    pub fn from_sigma(shape: Shape, sigma: &[u8], seed: u64, stream: u64) -> Result<Self> {
        if sigma.len() != shape.n_visible {
            return Err(Error::DimensionMismatch {
                expected: shape.n_visible,
                got: sigma.len(),
            });
        }
        Ok(Self::with_rng(
            shape,
            sigma.to_vec(),
            seed,
            stream,
            rng::stream(seed, stream),
        ))
    }

    fn with_rng(shape: Shape, sigma: Vec<u8>, seed: u64, stream: u64, rng: Rng) -> Self {
        Self {
            config: SpinConfig {
                sigma,
                aux: vec![0; shape.n_aux],
                hidden: vec![0; shape.n_hidden],
            },
            rng_seed: seed,
            stream,
            sweep_count: 0,
            rng,
        }
    }

    /// One block update `h → a → σ`.
    pub fn sweep(&mut self, params: &NdoParams) {
        sweep_config(&mut self.config, &params.lambda(), &mut self.rng);
        self.sweep_count += 1;
    }
}

fn sweep_config(config: &mut SpinConfig, lambda: &ParamSet<'_>, rng: &mut Rng) {
    let ph = conditional_hidden(lambda, &config.sigma);
    draw(&ph, &mut config.hidden, rng);
    let pa = conditional_aux(lambda, &config.sigma);
    draw(&pa, &mut config.aux, rng);
    let pv = conditional_visible(lambda, &config.hidden, &config.aux);
    draw(&pv, &mut config.sigma, rng);
}

/// Advances the chain by one sweep.
pub fn gibbs_sweep(mut state: ChainState, params: &NdoParams) -> ChainState {
    state.sweep(params);
    state
}

/// Contrastive-divergence negative sample: start at `data_sigma` and run `k`
/// sweeps (the first one draws `h` and `a` from their conditionals).
pub fn cd_negative_sample(params: &NdoParams, data_sigma: &[u8], k: usize, rng: &mut Rng) -> Result<SpinConfig> {
    if k == 0 {
        return Err(Error::InvalidArgument("contrastive divergence needs k >= 1".into()));
    }
    let shape = params.shape();
    if data_sigma.len() != shape.n_visible {
        return Err(Error::DimensionMismatch {
            expected: shape.n_visible,
            got: data_sigma.len(),
        });
    }
    let mut config = SpinConfig {
        sigma: data_sigma.to_vec(),
        aux: vec![0; shape.n_aux],
        hidden: vec![0; shape.n_hidden],
    };
    let lambda = params.lambda();
    for _ in 0..k {
        sweep_config(&mut config, &lambda, rng);
    }
    Ok(config)
}

/// Source of matrix elements `O_{σ'σ}` column by column.
pub trait Observable {
    fn n_qubits(&self) -> usize;

    /// Writes the nonzero `(σ', O_{σ'σ})` pairs of column `sigma` into `out`.
    fn column(&self, sigma: usize, out: &mut Vec<(usize, Complex64)>);
}

/// Observable stored as explicit per-configuration nonzero lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservable {
    n_qubits: usize,
    columns: Vec<Vec<(usize, Complex64)>>,
}

impl SparseObservable {
    /// `columns[σ]` lists `(σ', O_{σ'σ})`.
    pub fn new(n_qubits: usize, columns: Vec<Vec<(usize, Complex64)>>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if columns.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: columns.len(),
            });
        }
        if columns.iter().flatten().any(|&(s, _)| s >= dim) {
            return Err(Error::InvalidArgument("observable index out of range".into()));
        }
        Ok(Self { n_qubits, columns })
    }

    pub fn from_dense(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() || !m.rows().is_power_of_two() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let dim = m.rows();
        let columns = (0..dim)
            .map(|s| {
                (0..dim)
                    .filter_map(|sp| {
                        let v = m.get(sp, s);
                        (v != Complex64::new(0.0, 0.0)).then_some((sp, v))
                    })
                    .collect()
            })
            .collect();
        Self::new(dim.trailing_zeros() as usize, columns)
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            columns: (0..1usize << n_qubits)
                .map(|s| vec![(s, Complex64::new(1.0, 0.0))])
                .collect(),
        }
    }
}

impl Observable for SparseObservable {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn column(&self, sigma: usize, out: &mut Vec<(usize, Complex64)>) {
        out.clear();
        out.extend_from_slice(&self.columns[sigma]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis, e.g. `"XX"` or `"ZI"`. `Z` has
/// eigenvalue `+1` on bit 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' | 'i' => Ok(Pauli::I),
                'X' | 'x' => Ok(Pauli::X),
                'Y' | 'y' => Ok(Pauli::Y),
                'Z' | 'z' => Ok(Pauli::Z),
                other => Err(Error::UnknownLabel(other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let dim = 1usize << self.0.len();
        let mut m = ComplexMatrix::zeros(dim, dim);
        let mut col = Vec::new();
        for s in 0..dim {
            self.column(s, &mut col);
            for &(sp, v) in &col {
                m.set(sp, s, v);
            }
        }
        m
    }
}

impl Observable for PauliString {
    fn n_qubits(&self) -> usize {
        self.0.len()
    }

    fn column(&self, sigma: usize, out: &mut Vec<(usize, Complex64)>) {
        let n = self.0.len();
        let mut target = sigma;
        let mut coeff = Complex64::new(1.0, 0.0);
        for (j, p) in self.0.iter().enumerate() {
            let bit = site_bit(sigma, j, n);
            let mask = 1usize << (n - 1 - j);
            match p {
                Pauli::I => {}
                Pauli::X => target ^= mask,
                Pauli::Y => {
                    target ^= mask;
                    // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                    coeff *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        coeff = -coeff;
                    }
                }
            }
        }
        out.clear();
        out.push((target, coeff));
    }
}

/// Local estimator
/// `O_L(σ,a) = Σ_σ' √(p_λ(σ',a)/p_λ(σ,a)) e^{i(φ_μ(σ,a) − φ_μ(σ',a))} O_{σ'σ}`.
pub fn local_observable(
    params: &NdoParams,
    sigma: &[u8],
    aux: &[u8],
    observable: &dyn Observable,
    scratch: &mut Vec<(usize, Complex64)>,
) -> Result<Complex64> {
    let n = sigma.len();
    let lambda = params.lambda();
    let mu = params.mu();
    let sigma_idx = config_index(sigma);
    observable.column(sigma_idx, scratch);
    let lp = lambda.log_marginal(sigma, aux);
    let mp = mu.log_marginal(sigma, aux);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(sp, o) in scratch.iter() {
        if sp == sigma_idx {
            acc += o;
            continue;
        }
        let bits = index_bits(sp, n);
        let log_ratio = 0.5 * (lambda.log_marginal(&bits, aux) - lp);
        if log_ratio.abs() > LOG_RATIO_GUARD {
            return Err(Error::NumericalDomain(format!(
                "amplitude log-ratio {log_ratio} exceeds the ±{LOG_RATIO_GUARD} guard"
            )));
        }
        let phase = 0.5 * (mp - mu.log_marginal(&bits, aux));
        acc += math::cexp(Complex64::new(log_ratio, phase)) * o;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableEstimate {
    pub mean: Complex64,
    /// Batch-means standard error, combining real and imaginary parts.
    pub std_error: f64,
    pub n_samples: usize,
}

/// Monte Carlo estimate of `Tr{ρ O}` from one Gibbs chain: `burn_in` sweeps
/// are discarded, then every sweep contributes one sample.
pub fn estimate_observable(
    params: &NdoParams,
    observable: &dyn Observable,
    n_samples: usize,
    burn_in: usize,
    seed: u64,
) -> Result<ObservableEstimate> {
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if observable.n_qubits() != params.shape().n_visible {
        return Err(Error::DimensionMismatch {
            expected: params.shape().n_visible,
            got: observable.n_qubits(),
        });
    }
    let mut chain = ChainState::new(params.shape(), seed, rng::streams::CHAIN_BASE);
    for _ in 0..burn_in {
        chain.sweep(params);
    }
    let mut scratch = Vec::new();
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        chain.sweep(params);
        samples.push(local_observable(
            params,
            &chain.config.sigma,
            &chain.config.aux,
            observable,
            &mut scratch,
        )?);
    }
    let mean = samples.iter().sum::<Complex64>() / n_samples as f64;
    Ok(ObservableEstimate {
        mean,
        std_error: batch_means_error(&samples),
        n_samples,
    })
}

fn batch_means_error(samples: &[Complex64]) -> f64 {
    let n_batches = BATCH_MEANS.min(samples.len());
    if n_batches < 2 {
        return f64::INFINITY;
    }
    let size = samples.len() / n_batches;
    let means: Vec<Complex64> = samples
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<Complex64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<Complex64>() / n_batches as f64;
    let var: f64 = means.iter().map(|m| (m - grand).norm_sqr()).sum::<f64>() / (n_batches - 1) as f64;
    math::sqrt(var / n_batches as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndo::{materialize, Field, Set};
    use crate::qcore::DensityMatrix;

    fn random_params(shape: Shape, seed: u64) -> NdoParams {
        let mut r = rng::stream(seed, 77);
        let values = (0..shape.len()).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
        NdoParams::from_values(shape, values).unwrap()
    }

    fn exact_trace(rho: &DensityMatrix, o: &ComplexMatrix) -> Complex64 {
        rho.matrix().matmul(o).unwrap().trace()
    }

    /// p_λ(σ, a) / Z over all (σ, a), index = σ·2^{n_a} + a.
    fn exact_sigma_aux(p: &NdoParams) -> Vec<f64> {
        let s = p.shape();
        let mut w = Vec::new();
        for sig in 0..1usize << s.n_visible {
            for a in 0..1usize << s.n_aux {
                w.push(
                    p.lambda()
                        .log_marginal(&index_bits(sig, s.n_visible), &index_bits(a, s.n_aux))
                        .exp(),
                );
            }
        }
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    }

    #[test]
    fn conditionals_at_zero_are_half() {
        let p = NdoParams::zeros(Shape::new(3, 2, 2).unwrap());
        assert_eq!(conditional_hidden(&p.lambda(), &[1, 0, 1]), vec![0.5; 2]);
        assert_eq!(conditional_aux(&p.lambda(), &[1, 0, 1]), vec![0.5; 2]);
        assert_eq!(conditional_visible(&p.lambda(), &[1, 1], &[0, 1]), vec![0.5; 3]);
    }

    #[test]
    fn conditionals_saturate() {
        let mut p = NdoParams::zeros(Shape::new(1, 1, 1).unwrap());
        p.field_mut(Set::Lambda, Field::HiddenBias)[0] = 30.0;
        p.field_mut(Set::Lambda, Field::AuxBias)[0] = 30.0;
        assert!(conditional_hidden(&p.lambda(), &[0])[0] >= 1.0 - 1e-13);
        assert!(conditional_aux(&p.lambda(), &[0])[0] >= 1.0 - 1e-13);
    }

    #[test]
    fn conditional_visible_single_hidden_unit() {
        let mut p = NdoParams::zeros(Shape::new(2, 1, 0).unwrap());
        p.field_mut(Set::Lambda, Field::Weights).copy_from_slice(&[5.0, -5.0]);
        let v = conditional_visible(&p.lambda(), &[1], &[]);
        assert!((v[0] - 1.0 / (1.0 + (-5f64).exp())).abs() < 1e-15);
        assert!((v[1] - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn hidden_draws_match_bernoulli() {
        let mut p = NdoParams::zeros(Shape::new(2, 3, 0).unwrap());
        p.field_mut(Set::Lambda, Field::Weights)
            .copy_from_slice(&[0.8, -0.3, 1.5, 0.2, -2.0, 0.0]);
        p.field_mut(Set::Lambda, Field::HiddenBias)
            .copy_from_slice(&[0.1, -0.4, 0.3]);
        let sigma = [1u8, 1];
        let probs = conditional_hidden(&p.lambda(), &sigma);
        let mut r = rng::stream(5, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut h = [0u8; 3];
        for _ in 0..n {
            draw(&probs, &mut h, &mut r);
            for i in 0..3 {
                counts[i] += h[i] as usize;
            }
        }
        for i in 0..3 {
            let sd = (probs[i] * (1.0 - probs[i]) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - probs[i]).abs() < 3.0 * sd + 1e-12);
        }
    }

    #[test]
    fn one_sweep_preserves_exact_joint() {
        // Explicit 16×16 transition matrix for N = 2, n_h = 1, n_a = 1,
        // states indexed (σ1 σ2 a h).
        let p = random_params(Shape::new(2, 1, 1).unwrap(), 11);
        let lam = p.lambda();
        let (w, u, b, c, d) = (
            lam.weights,
            lam.mixing,
            lam.visible_bias,
            lam.hidden_bias,
            lam.aux_bias.unwrap(),
        );
        let energy = |s: &[u8], a: u8, h: u8| -> f64 {
            let (s0, s1, a, h) = (s[0] as f64, s[1] as f64, a as f64, h as f64);
            h * (w[0] * s0 + w[1] * s1) + c[0] * h + a * (u[0] * s0 + u[1] * s1) + d[0] * a + b[0] * s0 + b[1] * s1
        };
        let states: Vec<(Vec<u8>, u8, u8)> = (0..16)
            .map(|i| (index_bits(i >> 2, 2), ((i >> 1) & 1) as u8, (i & 1) as u8))
            .collect();
        let mut pi: Vec<f64> = states.iter().map(|(s, a, h)| energy(s, *a, *h).exp()).collect();
        let z: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= z);
        let bern = |p1: f64, v: u8| if v == 1 { p1 } else { 1.0 - p1 };
        let mut next = [0.0; 16];
        for (from, (s, _, _)) in states.iter().enumerate() {
            let ph = conditional_hidden(&lam, s)[0];
            let pa = conditional_aux(&lam, s)[0];
            for (to, (s2, a2, h2)) in states.iter().enumerate() {
                let pv = conditional_visible(&lam, &[*h2], &[*a2]);
                let t = bern(ph, *h2) * bern(pa, *a2) * bern(pv[0], s2[0]) * bern(pv[1], s2[1]);
                next[to] += pi[from] * t;
            }
        }
        for i in 0..16 {
            assert!((next[i] - pi[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let p = random_params(Shape::new(3, 2, 2).unwrap(), 2);
        let mut a = ChainState::new(p.shape(), 42, 7);
        let mut b = ChainState::new(p.shape(), 42, 7);
        for _ in 0..100 {
            a.sweep(&p);
            b = gibbs_sweep(b, &p);
            assert_eq!(a.config, b.config);
        }
        assert_eq!(a.sweep_count, 100);
    }

    #[test]
    fn zero_params_chain_is_uniform() {
        let p = NdoParams::zeros(Shape::new(2, 1, 1).unwrap());
        let mut chain = ChainState::new(p.shape(), 3, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            chain.sweep(&p);
            counts[config_index(&chain.config.sigma)] += 1;
        }
        let sd = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn chain_matches_exact_sigma_aux_distribution() {
        let p = random_params(Shape::new(2, 2, 1).unwrap(), 4);
        let exact = exact_sigma_aux(&p);
        let mut chain = ChainState::new(p.shape(), 9, 0);
        let mut counts = vec![0usize; exact.len()];
        let n = 1_000_000;
        for _ in 0..n {
            chain.sweep(&p);
            counts[config_index(&chain.config.sigma) * 2 + chain.config.aux[0] as usize] += 1;
        }
        let tv: f64 = 0.5
            * counts
                .iter()
                .zip(&exact)
                .map(|(&c, &e)| (c as f64 / n as f64 - e).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn cd_sample_is_valid_and_seeded() {
        let p = random_params(Shape::new(3, 2, 2).unwrap(), 6);
        let a = cd_negative_sample(&p, &[1, 0, 1], 1, &mut rng::stream(1, 2)).unwrap();
        let b = cd_negative_sample(&p, &[1, 0, 1], 1, &mut rng::stream(1, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.sigma.len(), a.aux.len(), a.hidden.len()), (3, 2, 2));
        assert!(a.sigma.iter().chain(&a.aux).chain(&a.hidden).all(|&x| x <= 1));
        assert!(cd_negative_sample(&p, &[1, 0, 1], 0, &mut rng::stream(1, 2)).is_err());
    }

    #[test]
    fn identity_estimate_is_exact() {
        let p = random_params(Shape::new(2, 1, 2).unwrap(), 1);
        let est = estimate_observable(&p, &SparseObservable::identity(2), 3000, 100, 1).unwrap();
        assert_eq!(est.mean, Complex64::new(1.0, 0.0));
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn z_estimate_on_uniform_state() {
        let p = NdoParams::zeros(Shape::new(2, 1, 1).unwrap());
        let z = PauliString::parse("ZI").unwrap();
        let est = estimate_observable(&p, &z, 30_000, 100, 2).unwrap();
        assert!(est.mean.norm() <= 3.0 * est.std_error);
    }

    #[test]
    fn xx_estimate_matches_trace() {
        let p = random_params(Shape::new(2, 1, 1).unwrap(), 21);
        let xx = PauliString::parse("XX").unwrap();
        let exact = exact_trace(&materialize(&p).unwrap(), &xx.to_dense());
        let est = estimate_observable(&p, &xx, 100_000, DEFAULT_BURN_IN, 3).unwrap();
        assert!((est.mean - exact).norm() <= 3.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn sparse_from_dense_matches_pauli() {
        let y = PauliString::parse("YZ").unwrap();
        let dense = y.to_dense();
        let sparse = SparseObservable::from_dense(&dense).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..4 {
            y.column(s, &mut a);
            sparse.column(s, &mut b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let p = NdoParams::zeros(Shape::new(2, 1, 1).unwrap());
        assert_eq!(
            estimate_observable(&p, &SparseObservable::identity(2), 0, 10, 0),
            Err(Error::ZeroSamples)
        );
    }
}
