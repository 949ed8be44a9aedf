//! The neural density operator.
//!
//! Two RBM parameter sets share one architecture: the amplitude set λ
//! (weights `W`, mixing weights `U`, visible bias `b`, hidden bias `c`,
//! auxiliary bias `d`) and the phase set μ (the same without `d`, which
//! cancels from every matrix element). Matrix elements are evaluated in log
//! space and only exponentiated after the partition function is subtracted.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::qcore::{check_qubits, index_bits, ComplexMatrix, DensityMatrix};
use crate::rng::Rng;

/// Weight width used by [`NdoParams::random_init`] unless overridden.
pub const DEFAULT_INIT_WIDTH: f64 = 0.01;

/// `|1 + e^z|` below this is treated as the logarithm's singularity.
const SINGULARITY_GUARD: f64 = 1e-14;

/// Largest log-magnitude that may be exponentiated without overflow.
const MAX_LOG_MAGNITUDE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub n_aux: usize,
}

/// Which of the two parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Set {
    Lambda,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// `W`, `n_hidden × n_visible`.
    Weights,
    /// `U`, `n_aux × n_visible`.
    Mixing,
    /// `b`, length `n_visible`.
    VisibleBias,
    /// `c`, length `n_hidden`.
    HiddenBias,
    /// `d`, length `n_aux`; amplitude set only.
    AuxBias,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Weights,
        Field::Mixing,
        Field::VisibleBias,
        Field::HiddenBias,
        Field::AuxBias,
    ];
}

impl Shape {
    pub fn new(n_visible: usize, n_hidden: usize, n_aux: usize) -> Result<Self> {
        if n_visible == 0 {
            return Err(Error::InvalidArgument("at least one visible unit is required".into()));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            n_aux,
        })
    }

    fn field_len(&self, field: Field) -> usize {
        let n = self.n_visible;
        match field {
            Field::Weights => self.n_hidden * n,
            Field::Mixing => self.n_aux * n,
            Field::VisibleBias => n,
            Field::HiddenBias => self.n_hidden,
            Field::AuxBias => self.n_aux,
        }
    }

    pub fn lambda_len(&self) -> usize {
        Field::ALL.iter().map(|&f| self.field_len(f)).sum()
    }

    pub fn mu_len(&self) -> usize {
        self.lambda_len() - self.n_aux
    }

    /// Total number of real parameters.
    pub fn len(&self) -> usize {
        self.lambda_len() + self.mu_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of a field in the flat parameter vector, `None` for `d_μ`.
    pub fn range(&self, set: Set, field: Field) -> Option<Range<usize>> {
        if set == Set::Mu && field == Field::AuxBias {
            return None;
        }
        let mut start = match set {
            Set::Lambda => 0,
            Set::Mu => self.lambda_len(),
        };
        for f in Field::ALL {
            let len = self.field_len(f);
            if f == field {
                return Some(start..start + len);
            }
            start += len;
        }
        unreachable!()
    }

    fn layout(&self, set: Set) -> Layout {
        let r = |f| self.range(set, f).map(|r: Range<usize>| r.start).unwrap_or(usize::MAX);
        Layout {
            w: r(Field::Weights),
            u: r(Field::Mixing),
            b: r(Field::VisibleBias),
            c: r(Field::HiddenBias),
            d: r(Field::AuxBias),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Layout {
    pub w: usize,
    pub u: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

/// Borrowed view of one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ParamSet<'a> {
    pub n_visible: usize,
    pub weights: &'a [f64],
    pub mixing: &'a [f64],
    pub visible_bias: &'a [f64],
    pub hidden_bias: &'a [f64],
    pub aux_bias: Option<&'a [f64]>,
}

#[inline]
fn dot_bits(row: &[f64], bits: &[u8]) -> f64 {
    row.iter().zip(bits).map(|(&w, &s)| if s != 0 { w } else { 0.0 }).sum()
}

impl<'a> ParamSet<'a> {
    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn n_aux(&self) -> usize {
        self.mixing.len() / self.n_visible
    }

    /// `W^[i]·σ + c_i`.
    #[inline]
    pub fn hidden_input(&self, i: usize, sigma: &[u8]) -> f64 {
        let n = self.n_visible;
        dot_bits(&self.weights[i * n..(i + 1) * n], sigma) + self.hidden_bias[i]
    }

    /// `U^[k]·σ`.
    #[inline]
    pub fn mixing_input(&self, k: usize, sigma: &[u8]) -> f64 {
        let n = self.n_visible;
        dot_bits(&self.mixing[k * n..(k + 1) * n], sigma)
    }

    /// `Σ_i softplus(W^[i]·σ + c_i) + b·σ`.
    pub fn visible_log_weight(&self, sigma: &[u8]) -> f64 {
        let sp: f64 = (0..self.n_hidden())
            .map(|i| math::softplus(self.hidden_input(i, sigma)))
            .sum();
        sp + dot_bits(self.visible_bias, sigma)
    }

    /// `log p(σ, a)` with the hidden layer summed out.
    pub fn log_marginal(&self, sigma: &[u8], aux: &[u8]) -> f64 {
        let mut acc = self.visible_log_weight(sigma);
        for (k, &a) in aux.iter().enumerate() {
            if a != 0 {
                acc += self.mixing_input(k, sigma);
                if let Some(d) = self.aux_bias {
                    acc += d[k];
                }
            }
        }
        acc
    }
}

/// Parameters of a neural density operator, stored flat as
/// `[W_λ, U_λ, b_λ, c_λ, d_λ, W_μ, U_μ, b_μ, c_μ]` with matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NdoParams {
    shape: Shape,
    values: Vec<f64>,
}

impl NdoParams {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn from_values(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {pos} is not finite")));
        }
        Ok(Self { shape, values })
    }

    /// Weights `W`, `U` uniform in `[-width/2, width/2]`; biases zero.
    pub fn random_init(shape: Shape, width: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(shape);
        for set in [Set::Lambda, Set::Mu] {
            for field in [Field::Weights, Field::Mixing] {
                for v in p.field_mut(set, field) {
                    *v = width * (rng.random::<f64>() - 0.5);
                }
            }
        }
        p
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn field(&self, set: Set, field: Field) -> &[f64] {
        match self.shape.range(set, field) {
            Some(r) => &self.values[r],
            None => &[],
        }
    }

    pub fn field_mut(&mut self, set: Set, field: Field) -> &mut [f64] {
        match self.shape.range(set, field) {
            Some(r) => &mut self.values[r],
            None => &mut [],
        }
    }

    fn set_view(&self, set: Set) -> ParamSet<'_> {
        ParamSet {
            n_visible: self.shape.n_visible,
            weights: self.field(set, Field::Weights),
            mixing: self.field(set, Field::Mixing),
            visible_bias: self.field(set, Field::VisibleBias),
            hidden_bias: self.field(set, Field::HiddenBias),
            aux_bias: match set {
                Set::Lambda => Some(self.field(Set::Lambda, Field::AuxBias)),
                Set::Mu => None,
            },
        }
    }

    pub fn lambda(&self) -> ParamSet<'_> {
        self.set_view(Set::Lambda)
    }

    pub fn mu(&self) -> ParamSet<'_> {
        self.set_view(Set::Mu)
    }

    pub(crate) fn lambda_range(&self) -> Range<usize> {
        0..self.shape.lambda_len()
    }

    pub(crate) fn mu_range(&self) -> Range<usize> {
        self.shape.lambda_len()..self.shape.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `Γ^[±](σ,σ') = ½[Σ softplus(W^[i]σ + c_i) ± Σ softplus(W^[i]σ' + c_i) + b·(σ ± σ')]`.
pub fn gamma(set: &ParamSet<'_>, sigma: &[u8], sigma_prime: &[u8], sign: Sign) -> f64 {
    let a = set.visible_log_weight(sigma);
    let b = set.visible_log_weight(sigma_prime);
    match sign {
        Sign::Plus => 0.5 * (a + b),
        Sign::Minus => 0.5 * (a - b),
    }
}

/// Principal-branch `log(1 + e^z)`.
pub fn complex_softplus(z: Complex64) -> Result<Complex64> {
    if z.re > 1.0 {
        // |1 + e^z| > e - 1, no singularity; rewrite to avoid overflow.
        let e = math::cexp(-z);
        let w = z + math::cln(Complex64::new(1.0 + e.re, e.im));
        return Ok(Complex64::new(w.re, math::wrap_angle(w.im)));
    }
    let e = math::cexp(z);
    let arg = Complex64::new(1.0 + e.re, e.im);
    if arg.norm() < SINGULARITY_GUARD {
        return Err(Error::NumericalDomain(format!(
            "log(1 + e^z) is singular at z = {}{:+}i",
            z.re, z.im
        )));
    }
    Ok(math::cln(arg))
}

/// `d/dz log(1 + e^z) = 1 / (1 + e^{-z})`.
#[inline]
pub(crate) fn complex_logistic(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z.re >= 0.0 {
        one / (one + math::cexp(-z))
    } else {
        let e = math::cexp(z);
        e / (one + e)
    }
}

/// Mixing argument of the k-th auxiliary unit for the pair `(σ, σ')`.
#[inline]
fn mixing_arg(lambda_mix: f64, lambda_mix_p: f64, mu_mix: f64, mu_mix_p: f64, d: f64) -> Complex64 {
    Complex64::new(0.5 * (lambda_mix + lambda_mix_p) + d, 0.5 * (mu_mix - mu_mix_p))
}

/// `Π(σ,σ') = Σ_k log(1 + exp[½U_λ^[k](σ+σ') + (i/2)U_μ^[k](σ−σ') + d_λ^[k]])`.
pub fn pi_term(params: &NdoParams, sigma: &[u8], sigma_prime: &[u8]) -> Result<Complex64> {
    let lambda = params.lambda();
    let mu = params.mu();
    let d = params.field(Set::Lambda, Field::AuxBias);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..params.shape.n_aux {
        let z = mixing_arg(
            lambda.mixing_input(k, sigma),
            lambda.mixing_input(k, sigma_prime),
            mu.mixing_input(k, sigma),
            mu.mixing_input(k, sigma_prime),
            d[k],
        );
        acc += complex_softplus(z)?;
    }
    Ok(acc)
}

fn check_config(params: &NdoParams, sigma: &[u8]) -> Result<()> {
    if sigma.len() != params.shape.n_visible {
        return Err(Error::DimensionMismatch {
            expected: params.shape.n_visible,
            got: sigma.len(),
        });
    }
    Ok(())
}

/// `log ρ̃(σ,σ') = Γ_λ^[+] + iΓ_μ^[−] + Π`; the imaginary part is the phase.
pub fn log_rho_unnormalized(params: &NdoParams, sigma: &[u8], sigma_prime: &[u8]) -> Result<Complex64> {
    check_config(params, sigma)?;
    check_config(params, sigma_prime)?;
    let a = ConfigTerms::new(params, sigma);
    let b = ConfigTerms::new(params, sigma_prime);
    pair_log_rho(params, &a, &b, None)
}

/// `ρ̃(σ,σ')`, the unnormalised matrix element.
pub fn rho_unnormalized(params: &NdoParams, sigma: &[u8], sigma_prime: &[u8]) -> Result<Complex64> {
    let l = log_rho_unnormalized(params, sigma, sigma_prime)?;
    if l.re > MAX_LOG_MAGNITUDE {
        return Err(Error::NumericalDomain(format!(
            "unnormalised element overflows (log magnitude {})",
            l.re
        )));
    }
    Ok(math::cexp(l))
}

/// `log Z_λ = log Σ_σ ρ̃(σ,σ)`.
pub fn log_partition(params: &NdoParams) -> Result<f64> {
    let n = params.shape.n_visible;
    check_qubits(n)?;
    let terms: Vec<ConfigTerms> = (0..1usize << n)
        .map(|s| ConfigTerms::new(params, &index_bits(s, n)))
        .collect();
    log_partition_from_terms(params, &terms)
}

pub(crate) fn log_partition_from_terms(params: &NdoParams, terms: &[ConfigTerms]) -> Result<f64> {
    let diag = terms
        .iter()
        .map(|t| pair_log_rho(params, t, t, None).map(|l| l.re))
        .collect::<Result<Vec<_>>>()?;
    Ok(math::log_sum_exp(&diag))
}

/// `Z_λ`. Depends on the amplitude set only.
pub fn partition(params: &NdoParams) -> Result<f64> {
    let l = log_partition(params)?;
    if l > MAX_LOG_MAGNITUDE {
        return Err(Error::NumericalDomain(format!(
            "partition function overflows (log Z = {l})"
        )));
    }
    Ok(math::exp(l))
}

/// Dense `ρ = ρ̃ / Z_λ`.
pub fn materialize(params: &NdoParams) -> Result<DensityMatrix> {
    let n = params.shape.n_visible;
    check_qubits(n)?;
    let dim = 1usize << n;
    let terms: Vec<ConfigTerms> = (0..dim).map(|s| ConfigTerms::new(params, &index_bits(s, n))).collect();
    let log_z = log_partition_from_terms(params, &terms)?;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let l = pair_log_rho(params, &terms[i], &terms[j], None)?;
            let v = math::cexp(Complex64::new(l.re - log_z, l.im));
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    Ok(DensityMatrix::from_trusted(m))
}

/// `ψ(σ,a) = Z_λ^{-1/2} √p_λ(σ,a) e^{iφ_μ(σ,a)}` with `φ_μ = ½ log p_μ`.
pub fn psi_amplitude(params: &NdoParams, sigma: &[u8], aux: &[u8]) -> Result<Complex64> {
    check_config(params, sigma)?;
    if aux.len() != params.shape.n_aux {
        return Err(Error::DimensionMismatch {
            expected: params.shape.n_aux,
            got: aux.len(),
        });
    }
    let log_z = log_partition(params)?;
    let amp = 0.5 * (params.lambda().log_marginal(sigma, aux) - log_z);
    let phase = 0.5 * params.mu().log_marginal(sigma, aux);
    Ok(math::cexp(Complex64::new(amp, phase)))
}

/// `log p_θ(σ, a)`; the auxiliary bias term only exists for the amplitude set.
pub fn log_marginal(set: &ParamSet<'_>, sigma: &[u8], aux: &[u8]) -> f64 {
    set.log_marginal(sigma, aux)
}

/// Per-configuration quantities reused across every pair that contains it.
#[derive(Debug, Clone)]
pub(crate) struct ConfigTerms {
    pub bits: Vec<u8>,
    pub lambda_log: f64,
    pub lambda_sig: Vec<f64>,
    pub lambda_mix: Vec<f64>,
    pub mu_log: f64,
    pub mu_sig: Vec<f64>,
    pub mu_mix: Vec<f64>,
}

impl ConfigTerms {
    pub fn new(params: &NdoParams, sigma: &[u8]) -> Self {
        let lambda = params.lambda();
        let mu = params.mu();
        let nh = params.shape.n_hidden;
        let na = params.shape.n_aux;
        let sig =
            |set: &ParamSet<'_>| -> Vec<f64> { (0..nh).map(|i| math::logistic(set.hidden_input(i, sigma))).collect() };
        Self {
            bits: sigma.to_vec(),
            lambda_log: lambda.visible_log_weight(sigma),
            lambda_sig: sig(&lambda),
            lambda_mix: (0..na).map(|k| lambda.mixing_input(k, sigma)).collect(),
            mu_log: mu.visible_log_weight(sigma),
            mu_sig: sig(&mu),
            mu_mix: (0..na).map(|k| mu.mixing_input(k, sigma)).collect(),
        }
    }
}

/// `log ρ̃` of a pair; optionally stores the complex logistic of every mixing
/// argument (needed for gradients) into `mix_sig`.
pub(crate) fn pair_log_rho(
    params: &NdoParams,
    a: &ConfigTerms,
    b: &ConfigTerms,
    mut mix_sig: Option<&mut [Complex64]>,
) -> Result<Complex64> {
    let d = params.field(Set::Lambda, Field::AuxBias);
    let mut acc = Complex64::new(0.5 * (a.lambda_log + b.lambda_log), 0.5 * (a.mu_log - b.mu_log));
    for k in 0..params.shape.n_aux {
        let z = mixing_arg(a.lambda_mix[k], b.lambda_mix[k], a.mu_mix[k], b.mu_mix[k], d[k]);
        acc += complex_softplus(z)?;
        if let Some(out) = mix_sig.as_deref_mut() {
            out[k] = complex_logistic(z);
        }
    }
    Ok(acc)
}

/// Adds `Re(q · ∇ log ρ̃(σ,σ'))` for every parameter into `out` (full length).
pub(crate) fn accumulate_log_rho_grad(
    params: &NdoParams,
    a: &ConfigTerms,
    b: &ConfigTerms,
    mix_sig: &[Complex64],
    q: Complex64,
    out: &mut [f64],
) {
    let shape = params.shape;
    let n = shape.n_visible;
    let l = shape.layout(Set::Lambda);
    let m = shape.layout(Set::Mu);
    // Re(q) multiplies the amplitude terms, Re(i q) = -Im(q) the phase terms.
    let qr = q.re;
    let qi = -q.im;
    for i in 0..shape.n_hidden {
        let (la, lb) = (a.lambda_sig[i], b.lambda_sig[i]);
        let (ma, mb) = (a.mu_sig[i], b.mu_sig[i]);
        for j in 0..n {
            let (sa, sb) = (a.bits[j] as f64, b.bits[j] as f64);
            out[l.w + i * n + j] += qr * 0.5 * (la * sa + lb * sb);
            out[m.w + i * n + j] += qi * 0.5 * (ma * sa - mb * sb);
        }
        out[l.c + i] += qr * 0.5 * (la + lb);
        out[m.c + i] += qi * 0.5 * (ma - mb);
    }
    for j in 0..n {
        let (sa, sb) = (a.bits[j] as f64, b.bits[j] as f64);
        out[l.b + j] += qr * 0.5 * (sa + sb);
        out[m.b + j] += qi * 0.5 * (sa - sb);
    }
    for k in 0..shape.n_aux {
        let qs = q * mix_sig[k];
        out[l.d + k] += qs.re;
        for j in 0..n {
            let (sa, sb) = (a.bits[j] as f64, b.bits[j] as f64);
            out[l.u + k * n + j] += qs.re * 0.5 * (sa + sb);
            out[m.u + k * n + j] -= qs.im * 0.5 * (sa - sb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::validate_density;
    use crate::rng;
    use core::f64::consts::{LN_2, PI};

    fn random_params(shape: Shape, scale: f64, seed: u64) -> NdoParams {
        let mut r = rng::stream(seed, 99);
        let values = (0..shape.len())
            .map(|_| scale * (2.0 * r.random::<f64>() - 1.0))
            .collect();
        NdoParams::from_values(shape, values).unwrap()
    }

    fn shape(n: usize, h: usize, a: usize) -> Shape {
        Shape::new(n, h, a).unwrap()
    }

    #[test]
    fn layout_covers_vector_once() {
        let s = shape(3, 2, 4);
        let mut seen = vec![0u8; s.len()];
        for set in [Set::Lambda, Set::Mu] {
            for f in Field::ALL {
                if let Some(r) = s.range(set, f) {
                    for i in r {
                        seen[i] += 1;
                    }
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(s.range(Set::Mu, Field::AuxBias), None);
    }

    #[test]
    fn gamma_zero_params() {
        let p = NdoParams::zeros(shape(2, 3, 1));
        let g = gamma(&p.lambda(), &[1, 0], &[0, 1], Sign::Plus);
        assert!((g - 3.0 * LN_2).abs() < 1e-15);
        assert_eq!(gamma(&p.lambda(), &[1, 0], &[0, 1], Sign::Minus), 0.0);
    }

    #[test]
    fn gamma_scalar_case() {
        let mut p = NdoParams::zeros(shape(2, 1, 0));
        p.field_mut(Set::Lambda, Field::Weights)
            .copy_from_slice(&[3f64.ln(), 0.0]);
        let g = gamma(&p.lambda(), &[1, 0], &[1, 0], Sign::Plus);
        // ½[log 4 + log 4]
        assert!((g - 4f64.ln()).abs() < 1e-12);
        assert!((g - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn pi_zero_params_is_real() {
        let p = NdoParams::zeros(shape(2, 1, 3));
        let v = pi_term(&p, &[0, 1], &[1, 1]).unwrap();
        assert!((v.re - 3.0 * LN_2).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn pi_diagonal_is_real() {
        let p = random_params(shape(3, 2, 2), 1.0, 1);
        for s in 0..8 {
            let bits = index_bits(s, 3);
            assert_eq!(pi_term(&p, &bits, &bits).unwrap().im, 0.0);
        }
    }

    #[test]
    fn pi_quarter_turn() {
        let mut p = NdoParams::zeros(shape(2, 1, 1));
        p.field_mut(Set::Mu, Field::Mixing).copy_from_slice(&[PI, 0.0]);
        let v = pi_term(&p, &[1, 0], &[0, 0]).unwrap();
        assert!((v.re - 0.5 * LN_2).abs() < 1e-14);
        assert!((v.im - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn complex_softplus_principal_branch_for_large_real_part() {
        let z = Complex64::new(5.0, 3.0);
        let w = complex_softplus(z).unwrap();
        let direct = math::cln(Complex64::new(1.0, 0.0) + math::cexp(z));
        assert!((w - direct).norm() < 1e-12);
        assert!(w.im > -PI && w.im <= PI);
    }

    #[test]
    fn complex_softplus_singularity_is_an_error() {
        let z = Complex64::new(0.0, PI);
        assert!(matches!(complex_softplus(z), Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn rho_zero_params_constant() {
        let p = NdoParams::zeros(shape(2, 2, 1));
        for s in 0..4 {
            for t in 0..4 {
                let v = rho_unnormalized(&p, &index_bits(s, 2), &index_bits(t, 2)).unwrap();
                assert!((v - Complex64::new(8.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rho_diagonal_real_positive_and_hermitian_pairs() {
        for seed in 0..100 {
            let p = random_params(shape(3, 2, 2), 1.0, seed);
            for s in 0..8 {
                let bs = index_bits(s, 3);
                let d = rho_unnormalized(&p, &bs, &bs).unwrap();
                assert!(d.re > 0.0 && d.im == 0.0);
                for t in 0..8 {
                    let bt = index_bits(t, 3);
                    let x = rho_unnormalized(&p, &bs, &bt).unwrap();
                    let y = rho_unnormalized(&p, &bt, &bs).unwrap();
                    assert!((x.conj() - y).norm() <= 1e-12 * x.norm().max(1.0));
                }
            }
        }
    }

    /// Σ_{σ,a} p_λ(σ,a) by brute-force enumeration.
    fn partition_bruteforce(p: &NdoParams) -> f64 {
        let s = p.shape();
        let mut z = 0.0;
        for sig in 0..1usize << s.n_visible {
            for a in 0..1usize << s.n_aux {
                z += p
                    .lambda()
                    .log_marginal(&index_bits(sig, s.n_visible), &index_bits(a, s.n_aux))
                    .exp();
            }
        }
        z
    }

    #[test]
    fn partition_zero_params() {
        let p = NdoParams::zeros(shape(2, 1, 1));
        assert!((partition(&p).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_double_enumeration() {
        for seed in 0..20 {
            let p = random_params(shape(3, 2, 2), 1.0, seed);
            let z = partition(&p).unwrap();
            assert!((z - partition_bruteforce(&p)).abs() < 1e-10 * z);
        }
    }

    #[test]
    fn partition_ignores_phase_set() {
        let mut p = random_params(shape(2, 2, 2), 1.0, 3);
        let z = partition(&p).unwrap();
        let mu = p.shape().lambda_len();
        for v in &mut p.values_mut()[mu..] {
            *v += 0.7;
        }
        assert_eq!(partition(&p).unwrap(), z);
    }

    #[test]
    fn materialize_zero_params_is_uniform_pure_state() {
        let rho = materialize(&NdoParams::zeros(shape(2, 1, 1))).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.get(i, j) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
            }
        }
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn materialize_is_pure_without_mixing() {
        for seed in 0..20 {
            let mut p = random_params(shape(3, 2, 2), 1.0, seed);
            p.field_mut(Set::Lambda, Field::Mixing).fill(0.0);
            p.field_mut(Set::Mu, Field::Mixing).fill(0.0);
            let rho = materialize(&p).unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn materialize_is_physical() {
        for seed in 0..100 {
            let p = random_params(
                shape(2 + (seed as usize % 3), 1 + seed as usize % 3, 1 + seed as usize % 2),
                1.0,
                seed,
            );
            let rho = materialize(&p).unwrap();
            validate_density(rho.into_matrix()).unwrap();
        }
    }

    #[test]
    fn materialize_over_cap_errors() {
        let p = NdoParams::zeros(shape(11, 1, 1));
        assert!(matches!(materialize(&p), Err(Error::TooManyQubits { .. })));
    }

    #[test]
    fn psi_zero_params_constant() {
        // |ψ| = 2^{-(N + n_a)/2}; the phase ½ log p_μ = ½ n_h log 2 is global.
        let p = NdoParams::zeros(shape(2, 1, 2));
        for s in 0..4 {
            for a in 0..4 {
                let v = psi_amplitude(&p, &index_bits(s, 2), &index_bits(a, 2)).unwrap();
                assert!((v.norm() - 0.25).abs() < 1e-14, "{v}");
                assert!((v.arg() - 0.5 * LN_2).abs() < 1e-14, "{v}");
            }
        }
    }

    #[test]
    fn purification_reproduces_materialize() {
        for seed in 0..20 {
            let s = shape(1 + seed as usize % 3, 2, 1 + seed as usize % 3);
            let p = random_params(s, 1.0, seed);
            let rho = materialize(&p).unwrap();
            let dim = 1usize << s.n_visible;
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..1usize << s.n_aux {
                        let aux = index_bits(a, s.n_aux);
                        acc += psi_amplitude(&p, &index_bits(i, s.n_visible), &aux).unwrap()
                            * psi_amplitude(&p, &index_bits(j, s.n_visible), &aux).unwrap().conj();
                    }
                    assert!((acc - rho.get(i, j)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn psi_is_normalised() {
        let p = random_params(shape(3, 2, 2), 1.0, 8);
        let mut total = 0.0;
        for s in 0..8 {
            for a in 0..4 {
                total += psi_amplitude(&p, &index_bits(s, 3), &index_bits(a, 2))
                    .unwrap()
                    .norm_sqr();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_marginal_matches_hidden_enumeration() {
        for seed in 0..20 {
            let p = random_params(shape(3, 3, 2), 1.0, seed);
            let lam = p.lambda();
            let (w, u, b, c, d) = (
                lam.weights,
                lam.mixing,
                lam.visible_bias,
                lam.hidden_bias,
                lam.aux_bias.unwrap(),
            );
            for s in 0..8 {
                let sig = index_bits(s, 3);
                for a in 0..4 {
                    let aux = index_bits(a, 2);
                    let mut total = 0.0;
                    for h in 0..8 {
                        let hid = index_bits(h, 3);
                        let mut e = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                e += hid[i] as f64 * w[i * 3 + j] * sig[j] as f64;
                            }
                            e += c[i] * hid[i] as f64;
                        }
                        for k in 0..2 {
                            for j in 0..3 {
                                e += aux[k] as f64 * u[k * 3 + j] * sig[j] as f64;
                            }
                            e += d[k] * aux[k] as f64;
                        }
                        for j in 0..3 {
                            e += b[j] * sig[j] as f64;
                        }
                        total += e.exp();
                    }
                    assert!((lam.log_marginal(&sig, &aux) - total.ln()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn log_marginal_zero_params_and_bias_linearity() {
        let mut p = NdoParams::zeros(shape(2, 2, 1));
        assert!((p.lambda().log_marginal(&[1, 1], &[1]) - 2.0 * LN_2).abs() < 1e-15);
        p.field_mut(Set::Lambda, Field::VisibleBias)
            .copy_from_slice(&[0.3, -0.2]);
        let base = p.lambda().log_marginal(&[1, 1], &[0]);
        p.field_mut(Set::Lambda, Field::VisibleBias)
            .copy_from_slice(&[0.6, -0.4]);
        let doubled = p.lambda().log_marginal(&[1, 1], &[0]);
        assert!((doubled - base - 0.1).abs() < 1e-15);
    }

    #[test]
    fn random_init_respects_width_and_zero_biases() {
        let s = shape(4, 3, 2);
        let p = NdoParams::random_init(s, DEFAULT_INIT_WIDTH, &mut rng::stream(1, 0));
        for set in [Set::Lambda, Set::Mu] {
            for f in [Field::Weights, Field::Mixing] {
                assert!(p.field(set, f).iter().all(|v| v.abs() <= 0.005));
            }
            for f in [Field::VisibleBias, Field::HiddenBias, Field::AuxBias] {
                assert!(p.field(set, f).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn from_values_rejects_non_finite() {
        let s = shape(1, 1, 1);
        let mut v = vec![0.0; s.len()];
        v[2] = f64::NAN;
        assert!(NdoParams::from_values(s, v).is_err());
    }
}
