//! Maximum-likelihood tomography over the Cholesky parametrization
//! `ρ = T†T / Tr(T†T)` with `T` lower triangular.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::qcore::{check_qubits, ComplexMatrix, DensityMatrix};
use crate::rng::{self, streams};
use crate::train::Dataset;

pub const DEFAULT_MAX_ITERS: usize = 20_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const INIT_PERTURBATION: f64 = 0.01;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e8;

/// Real coordinates of `T`: the `2^N` real diagonal entries, then
/// `(Re, Im)` of every entry below the diagonal, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParams {
    n_qubits: usize,
    values: Vec<f64>,
}

impl CholeskyParams {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Cholesky coordinates must be finite".into()));
        }
        Ok(Self { n_qubits, values })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut values = alloc::vec![0.0; dim * dim];
        values[..dim].fill(1.0);
        Ok(Self { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position of `Re T_ij` (`i > j`); `Im T_ij` follows it.
    fn offdiag(dim: usize, i: usize, j: usize) -> usize {
        dim + i * (i - 1) + 2 * j
    }

    pub fn lower(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut t = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            t.set(i, i, Complex64::new(self.values[i], 0.0));
            for j in 0..i {
                let k = Self::offdiag(d, i, j);
                t.set(i, j, Complex64::new(self.values[k], self.values[k + 1]));
            }
        }
        t
    }

    fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// `T†T / Tr(T†T)`.
pub fn rho_from_cholesky(t: &CholeskyParams) -> Result<DensityMatrix> {
    let norm = t.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroCholesky);
    }
    let lower = t.lower();
    let m = lower.adjoint().matmul(&lower)?.scale(1.0 / norm).hermitian_part();
    Ok(DensityMatrix::from_trusted(m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxLikConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MaxLikConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxLikFit {
    pub rho: DensityMatrix,
    pub params: CholeskyParams,
    /// Mean log-likelihood per record at the returned point.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Measurement projectors `w = conj(U_b(k,·))` with their counts, so that
/// `p_bk = ‖T w‖² / ‖T‖_F²`.
#[derive(Debug, Clone)]
pub struct Likelihood {
    dim: usize,
    terms: Vec<(Vec<Complex64>, f64)>,
    total: f64,
}

impl Likelihood {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        dataset.check()?;
        let n = dataset.n_qubits();
        check_qubits(n)?;
        let dim = 1usize << n;
        let mut terms = Vec::new();
        for (g, counts) in dataset.groups().iter().zip(dataset.counts()) {
            for (o, c) in counts {
                let w = (0..dim).map(|s| g.basis.element(o, s).conj()).collect();
                terms.push((w, c as f64));
            }
        }
        Ok(Self {
            dim,
            terms,
            total: dataset.n_records() as f64,
        })
    }

    fn check(&self, t: &CholeskyParams) -> Result<()> {
        if t.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.dim(),
            });
        }
        Ok(())
    }

    fn apply(t: &CholeskyParams, w: &[Complex64], v: &mut [Complex64]) {
        let d = w.len();
        for i in 0..d {
            let mut acc = Complex64::new(t.values[i], 0.0) * w[i];
            for j in 0..i {
                let k = CholeskyParams::offdiag(d, i, j);
                acc += Complex64::new(t.values[k], t.values[k + 1]) * w[j];
            }
            v[i] = acc;
        }
    }

    /// Mean log-likelihood; `-∞` if an observed outcome has zero probability.
    pub fn value(&self, t: &CholeskyParams) -> Result<f64> {
        self.check(t)?;
        let norm = t.norm_sqr();
        if norm == 0.0 {
            return Err(Error::ZeroCholesky);
        }
        let mut v = alloc::vec![Complex64::new(0.0, 0.0); self.dim];
        let mut s = 0.0;
        for (w, c) in &self.terms {
            Self::apply(t, w, &mut v);
            let p: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            s += c * math::ln(p);
        }
        Ok(s / self.total - math::ln(norm))
    }

    /// Gradient of [`Likelihood::value`] with respect to the coordinates.
    pub fn gradient(&self, t: &CholeskyParams) -> Result<Vec<f64>> {
        self.check(t)?;
        let norm = t.norm_sqr();
        if norm == 0.0 {
            return Err(Error::ZeroCholesky);
        }
        let d = self.dim;
        let mut g = alloc::vec![0.0; t.values.len()];
        let mut v = alloc::vec![Complex64::new(0.0, 0.0); d];
        for (w, c) in &self.terms {
            Self::apply(t, w, &mut v);
            let p: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let f = 2.0 * c / (self.total * p);
            for i in 0..d {
                let vi = v[i].conj();
                g[i] += f * (vi * w[i]).re;
                for j in 0..i {
                    let k = CholeskyParams::offdiag(d, i, j);
                    let x = vi * w[j];
                    g[k] += f * x.re;
                    g[k + 1] -= f * x.im;
                }
            }
        }
        for (gi, ti) in g.iter_mut().zip(&t.values) {
            *gi -= 2.0 * ti / norm;
        }
        Ok(g)
    }
}

fn normalized(mut values: Vec<f64>) -> Vec<f64> {
    let n = math::sqrt(values.iter().map(|v| v * v).sum());
    for v in values.iter_mut() {
        *v /= n;
    }
    values
}

/// Gradient ascent with backtracking line search on the mean log-likelihood.
/// Running out of iterations is not an error: the fit reports
/// `converged = false` together with the final gradient norm.
pub fn maxlik_fit(dataset: &Dataset, config: &MaxLikConfig) -> Result<MaxLikFit> {
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let lik = Likelihood::new(dataset)?;
    let n = dataset.n_qubits();
    let mut r = rng::stream(config.seed, streams::MAXLIK);
    let mut values = CholeskyParams::identity(n)?.values;
    for v in values.iter_mut() {
        *v += INIT_PERTURBATION * (2.0 * r.random::<f64>() - 1.0);
    }
    let mut t = CholeskyParams::new(n, normalized(values))?;
    let mut value = lik.value(&t)?;
    let mut grad = lik.gradient(&t)?;
    let mut grad_sq: f64 = grad.iter().map(|g| g * g).sum();
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = math::sqrt(grad_sq) < config.tolerance;
    while !converged && iterations < config.max_iters {
        iterations += 1;
        let accepted = loop {
            let trial: Vec<f64> = t.values.iter().zip(&grad).map(|(v, g)| v + step * g).collect();
            let trial = CholeskyParams {
                n_qubits: n,
                values: normalized(trial),
            };
            let tv = lik.value(&trial)?;
            if tv.is_finite() && tv >= value + ARMIJO * step * grad_sq {
                break Some((trial, tv));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            break;
        };
        t = next;
        value = next_value;
        grad = lik.gradient(&t)?;
        grad_sq = grad.iter().map(|g| g * g).sum();
        step = (step * 2.0).min(MAX_STEP);
        converged = math::sqrt(grad_sq) < config.tolerance;
    }
    Ok(MaxLikFit {
        rho: rho_from_cholesky(&t)?,
        params: t,
        log_likelihood: value,
        iterations,
        grad_norm: math::sqrt(grad_sq),
        converged,
    })
}
