use alloc::vec::Vec;

use num_complex::Complex64;

use super::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::gibbs::cd_negative_sample;
use crate::math;
use crate::ndo::{accumulate_log_rho_grad, log_partition_from_terms, pair_log_rho, ConfigTerms, NdoParams};
use crate::qcore::{check_qubits, config_index, index_bits, Basis};
use crate::rng::Rng;

/// Smallest `|Σ Q|` accepted as a normalizer.
const MIN_Q_NORM: f64 = 1e-300;

/// Which `(σ,σ')` pairs enter a quasiprobability sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summation {
    /// Only configurations that agree with the outcome on unrotated sites
    /// (`4^t` pairs for `t` rotated sites).
    Restricted,
    /// Every pair of the `4^N` double sum.
    Full,
}

/// How the `⟨∇_λ log ρ̃(σ,σ)⟩_ρ` term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativePhase {
    /// Enumeration over all `2^N` diagonal configurations.
    Exact,
    /// One `k`-sweep Gibbs chain per record, seeded at the record outcome.
    ContrastiveDivergence { k: usize },
}

struct Candidates {
    terms: Vec<ConfigTerms>,
    factors: Vec<Complex64>,
}

fn candidates(params: &NdoParams, basis: &Basis, outcome: usize, summation: Summation) -> Candidates {
    let n = basis.len();
    let configs: Vec<usize> = match summation {
        Summation::Restricted => {
            let rotated = basis.rotated_sites();
            (0..1usize << rotated.len())
                .map(|mask| {
                    let mut s = outcome;
                    for (k, &site) in rotated.iter().enumerate() {
                        let bit = 1usize << (n - 1 - site);
                        if (mask >> (rotated.len() - 1 - k)) & 1 == 1 {
                            s |= bit;
                        } else {
                            s &= !bit;
                        }
                    }
                    s
                })
                .collect()
        }
        Summation::Full => (0..1usize << n).collect(),
    };
    let mut terms = Vec::with_capacity(configs.len());
    let mut factors = Vec::with_capacity(configs.len());
    for s in configs {
        let f = basis.element(outcome, s);
        if f.norm_sqr() == 0.0 {
            continue;
        }
        terms.push(ConfigTerms::new(params, &index_bits(s, n)));
        factors.push(f);
    }
    Candidates { terms, factors }
}

/// `Q(σ,σ') = U_b(σ^b,σ) ρ̃(σ,σ') U_b*(σ^b,σ')` for candidate pairs,
/// stored relative to `e^{log_scale}` so that large `log ρ̃` cannot overflow.
///
/// In Hermitian mode only pairs with `i ≤ j` are kept, each off-diagonal one
/// weighted twice: `Q(σ',σ) = Q(σ,σ')*` and the integrands used with it
/// (`∇ log ρ̃`) conjugate the same way, so real parts of sums are unchanged and
/// the total is exactly real.
struct QSum {
    cand: Candidates,
    pairs: Vec<(usize, usize, Complex64)>,
    mix_sig: Vec<Complex64>,
    log_scale: f64,
    total: Complex64,
}

impl QSum {
    fn new(
        params: &NdoParams,
        basis: &Basis,
        outcome: usize,
        summation: Summation,
        with_sig: bool,
        hermitian: bool,
    ) -> Result<Self> {
        let cand = candidates(params, basis, outcome, summation);
        let na = params.shape().n_aux;
        let m = cand.terms.len();
        let index: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| ((if hermitian { i } else { 0 })..m).map(move |j| (i, j)))
            .collect();
        let mut logs = Vec::with_capacity(index.len());
        let mut mix_sig = if with_sig {
            alloc::vec![Complex64::new(0.0, 0.0); index.len() * na]
        } else {
            Vec::new()
        };
        for (p, &(i, j)) in index.iter().enumerate() {
            let slot = if with_sig {
                Some(&mut mix_sig[p * na..(p + 1) * na])
            } else {
                None
            };
            logs.push(pair_log_rho(params, &cand.terms[i], &cand.terms[j], slot)?);
        }
        let log_scale = logs.iter().fold(f64::NEG_INFINITY, |a, l| a.max(l.re));
        let mut pairs = Vec::with_capacity(index.len());
        let mut total = Complex64::new(0.0, 0.0);
        for (&(i, j), l) in index.iter().zip(&logs) {
            let mut q = cand.factors[i] * math::cexp(Complex64::new(l.re - log_scale, l.im)) * cand.factors[j].conj();
            if hermitian {
                q = if i == j { Complex64::new(q.re, 0.0) } else { q * 2.0 };
                total.re += q.re;
            } else {
                total += q;
            }
            pairs.push((i, j, q));
        }
        let log_norm = math::ln(total.norm()) + log_scale;
        if !(log_norm >= math::ln(MIN_Q_NORM)) {
            return Err(Error::VanishingNormalization(math::exp(log_norm)));
        }
        Ok(Self {
            cand,
            pairs,
            mix_sig,
            log_scale,
            total,
        })
    }

    /// Adds `Re(coef · ⟨∇ log ρ̃⟩_Q)` into `out`.
    fn accumulate_grad(&self, params: &NdoParams, coef: f64, out: &mut [f64]) {
        let na = params.shape().n_aux;
        let inv = coef / self.total;
        for (p, &(i, j, q)) in self.pairs.iter().enumerate() {
            let sig = &self.mix_sig[p * na..(p + 1) * na];
            accumulate_log_rho_grad(params, &self.cand.terms[i], &self.cand.terms[j], sig, q * inv, out);
        }
    }

    fn log_probability(&self, log_z: f64, basis: &Basis, outcome: usize) -> Result<f64> {
        if !(self.total.re > 0.0) {
            return Err(Error::NonPositiveProbability {
                basis: alloc::format!("{basis}"),
                outcome: bit_string(outcome, basis.len()),
                value: self.total.re * math::exp(self.log_scale - log_z),
            });
        }
        Ok(math::ln(self.total.re) + self.log_scale - log_z)
    }
}

fn bit_string(index: usize, n: usize) -> alloc::string::String {
    index_bits(index, n)
        .iter()
        .map(|&b| if b == 1 { '1' } else { '0' })
        .collect()
}

fn outcome_index(basis: &Basis, outcome: &[u8]) -> Result<usize> {
    if outcome.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: outcome.len(),
        });
    }
    if outcome.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument("outcome bits must be 0 or 1".into()));
    }
    Ok(config_index(outcome))
}

fn check_basis(params: &NdoParams, basis: &Basis) -> Result<()> {
    let n = params.shape().n_visible;
    if basis.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.len(),
        });
    }
    Ok(())
}

fn all_terms(params: &NdoParams) -> Result<Vec<ConfigTerms>> {
    let n = params.shape().n_visible;
    check_qubits(n)?;
    Ok((0..1usize << n)
        .map(|s| ConfigTerms::new(params, &index_bits(s, n)))
        .collect())
}

/// `ρ^b(σ^b,σ^b)`: the diagonal of `U_b ρ U_b†` at `outcome`.
pub fn rotated_diagonal(params: &NdoParams, basis: &Basis, outcome: &[u8]) -> Result<Complex64> {
    check_basis(params, basis)?;
    let o = outcome_index(basis, outcome)?;
    let log_z = log_partition_from_terms(params, &all_terms(params)?)?;
    let q = QSum::new(params, basis, o, Summation::Restricted, false, true)?;
    Ok(q.total * math::exp(q.log_scale - log_z))
}

/// `Σ Q·f / Σ Q` over the restricted pair set.
pub fn q_average<F>(params: &NdoParams, basis: &Basis, outcome: &[u8], integrand: F) -> Result<Vec<Complex64>>
where
    F: FnMut(&[u8], &[u8]) -> Vec<Complex64>,
{
    q_average_with(params, basis, outcome, Summation::Restricted, integrand)
}

/// [`q_average`] with an explicit choice of pair set.
pub fn q_average_with<F>(
    params: &NdoParams,
    basis: &Basis,
    outcome: &[u8],
    summation: Summation,
    mut integrand: F,
) -> Result<Vec<Complex64>>
where
    F: FnMut(&[u8], &[u8]) -> Vec<Complex64>,
{
    check_basis(params, basis)?;
    let o = outcome_index(basis, outcome)?;
    let q = QSum::new(params, basis, o, summation, false, false)?;
    let mut acc: Vec<Complex64> = Vec::new();
    for &(i, j, w) in &q.pairs {
        let v = integrand(&q.cand.terms[i].bits, &q.cand.terms[j].bits);
        if acc.is_empty() {
            acc = alloc::vec![Complex64::new(0.0, 0.0); v.len()];
        } else if v.len() != acc.len() {
            return Err(Error::DimensionMismatch {
                expected: acc.len(),
                got: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    for a in acc.iter_mut() {
        *a /= q.total;
    }
    Ok(acc)
}

/// Mean negative log-likelihood `−Σ_b |D_b|⁻¹ Σ_{σ∈D_b} log ρ^b(σ,σ)`.
pub fn nll(dataset: &Dataset, params: &NdoParams) -> Result<f64> {
    dataset.check()?;
    if dataset.n_qubits() != params.shape().n_visible {
        return Err(Error::DimensionMismatch {
            expected: params.shape().n_visible,
            got: dataset.n_qubits(),
        });
    }
    let log_z = log_partition_from_terms(params, &all_terms(params)?)?;
    let mut total = 0.0;
    for (group, counts) in dataset.groups().iter().zip(dataset.counts()) {
        let size = group.outcomes.len() as f64;
        let mut s = 0.0;
        for (o, c) in counts {
            let q = QSum::new(params, &group.basis, o, Summation::Restricted, false, true).map_err(|e| match e {
                Error::VanishingNormalization(v) => Error::NonPositiveProbability {
                    basis: alloc::format!("{}", group.basis),
                    outcome: bit_string(o, group.basis.len()),
                    value: v,
                },
                other => other,
            })?;
            s += c as f64 * q.log_probability(log_z, &group.basis, o)?;
        }
        total -= s / size;
    }
    Ok(total)
}

/// `E_{σ∼ρ(σ,σ)} ∇_λ log ρ̃(σ,σ)` over the full parameter vector (the phase
/// entries stay zero).
fn exact_model_term(params: &NdoParams) -> Result<Vec<f64>> {
    let terms = all_terms(params)?;
    let log_z = log_partition_from_terms(params, &terms)?;
    let na = params.shape().n_aux;
    let mut out = alloc::vec![0.0; params.shape().len()];
    let mut sig = alloc::vec![Complex64::new(0.0, 0.0); na];
    for t in &terms {
        let l = pair_log_rho(params, t, t, Some(&mut sig))?;
        let w = math::exp(l.re - log_z);
        accumulate_log_rho_grad(params, t, t, &sig, Complex64::new(w, 0.0), &mut out);
    }
    Ok(out)
}

/// Gradient of [`nll`] over the whole parameter vector, estimated from
/// `records`. Each record carries weight `|D_b|⁻¹` of its basis and the sum is
/// scaled by `M/B` (dataset size over batch size), so passing every record
/// gives the exact gradient in [`NegativePhase::Exact`] mode.
pub fn nll_gradient(
    dataset: &Dataset,
    records: &[Record],
    params: &NdoParams,
    phase: NegativePhase,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mut out = data_term(dataset, records, params)?;
    let scale = dataset.n_records() as f64 / records.len() as f64;
    let na = params.shape().n_aux;
    match phase {
        NegativePhase::Exact => {
            let weight: f64 = records
                .iter()
                .map(|r| 1.0 / dataset.groups()[r.group].outcomes.len() as f64)
                .sum();
            let model = exact_model_term(params)?;
            for (o, m) in out.iter_mut().zip(model) {
                *o += scale * weight * m;
            }
        }
        NegativePhase::ContrastiveDivergence { k } => {
            let n = params.shape().n_visible;
            let mut sig = alloc::vec![Complex64::new(0.0, 0.0); na];
            for r in records {
                let w = scale / dataset.groups()[r.group].outcomes.len() as f64;
                let sample = cd_negative_sample(params, &index_bits(r.outcome, n), k, rng)?;
                let t = ConfigTerms::new(params, &sample.sigma);
                pair_log_rho(params, &t, &t, Some(&mut sig))?;
                accumulate_log_rho_grad(params, &t, &t, &sig, Complex64::new(w, 0.0), &mut out);
            }
        }
    }
    if let Some(bad) = out.iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericalDomain(alloc::format!(
            "non-finite gradient entry {bad}"
        )));
    }
    Ok(out)
}

/// `−(M/B) Σ_r |D_b|⁻¹ Re⟨∇ log ρ̃⟩_{Q_r}`.
fn data_term(dataset: &Dataset, records: &[Record], params: &NdoParams) -> Result<Vec<f64>> {
    dataset.check()?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.n_qubits() != params.shape().n_visible {
        return Err(Error::DimensionMismatch {
            expected: params.shape().n_visible,
            got: dataset.n_qubits(),
        });
    }
    let scale = dataset.n_records() as f64 / records.len() as f64;
    let mut out = alloc::vec![0.0; params.shape().len()];
    for r in records {
        let group = dataset
            .groups()
            .get(r.group)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("record refers to missing group {}", r.group)))?;
        let q = QSum::new(params, &group.basis, r.outcome, Summation::Restricted, true, true)?;
        q.accumulate_grad(params, -scale / group.outcomes.len() as f64, &mut out);
    }
    Ok(out)
}

/// Amplitude part of [`nll_gradient`], in the layout of the amplitude set.
pub fn grad_lambda(
    dataset: &Dataset,
    records: &[Record],
    params: &NdoParams,
    phase: NegativePhase,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let g = nll_gradient(dataset, records, params, phase, rng)?;
    Ok(g[params.lambda_range()].to_vec())
}

/// Phase part of the gradient. `Z_λ` does not depend on the phase set, so
/// there is no negative phase.
pub fn grad_mu(dataset: &Dataset, records: &[Record], params: &NdoParams) -> Result<Vec<f64>> {
    let g = data_term(dataset, records, params)?;
    Ok(g[params.mu_range()].to_vec())
}
