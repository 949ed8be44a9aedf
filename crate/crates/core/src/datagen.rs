//! Synthetic measurement records drawn from an exact target state.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::qcore::{Axis, Basis, DensityMatrix};
use crate::rng::{self, streams};
use crate::train::Dataset;

/// Probabilities below zero by less than this are rounded up to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-12;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementProtocol {
    pub bases: Vec<Basis>,
    pub samples_per_basis: usize,
    pub seed: u64,
}

impl MeasurementProtocol {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .bases
            .first()
            .ok_or_else(|| Error::InvalidArgument("protocol has no bases".into()))?;
        if let Some(b) = self.bases.iter().find(|b| b.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: b.len(),
            });
        }
        if self.samples_per_basis == 0 {
            return Err(Error::ZeroSamples);
        }
        Ok(())
    }
}

/// The two-qubit tomographically complete set, ordered
/// ZZ, ZX, ZY, XZ, XX, XY, YZ, YX, YY.
pub fn nine_bases() -> Vec<Basis> {
    let axes = [Axis::Z, Axis::X, Axis::Y];
    axes.iter()
        .flat_map(|&a| axes.iter().map(move |&b| Basis::new(alloc::vec![a, b])))
        .collect()
}

/// Diagonal of `U_b ϱ U_b†`.
pub fn outcome_distribution(target: &DensityMatrix, basis: &Basis) -> Result<Vec<f64>> {
    if basis.len() != target.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: target.n_qubits(),
            got: basis.len(),
        });
    }
    let u = basis.rotation()?;
    let rotated = u.matmul(target.matrix())?.matmul(&u.adjoint())?;
    let mut probs = Vec::with_capacity(rotated.rows());
    for (i, p) in rotated.diagonal().into_iter().enumerate() {
        if p.re < -CLAMP_TOLERANCE {
            return Err(Error::NumericalDomain(alloc::format!(
                "outcome {i} in basis {basis} has probability {}",
                p.re
            )));
        }
        probs.push(p.re.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NumericalDomain(alloc::format!(
            "outcome probabilities in basis {basis} sum to {total}"
        )));
    }
    Ok(probs)
}

/// Inverse-CDF draw; `u` is uniform on `[0, 1)`.
fn draw(cdf: &[f64], u: f64) -> usize {
    let x = u * cdf[cdf.len() - 1];
    cdf.iter().position(|&c| x < c).unwrap_or(cdf.len() - 1)
}

/// `samples_per_basis` independent outcomes per basis, in protocol order.
pub fn sample_dataset(target: &DensityMatrix, protocol: &MeasurementProtocol) -> Result<Dataset> {
    protocol.validate()?;
    let mut r = rng::stream(protocol.seed, streams::DATAGEN);
    let mut ds = Dataset::new(target.n_qubits());
    for basis in &protocol.bases {
        let probs = outcome_distribution(target, basis)?;
        let cdf: Vec<f64> = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        for _ in 0..protocol.samples_per_basis {
            ds.push(basis.clone(), draw(&cdf, r.random::<f64>()))?;
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{depolarize, TargetState};
    use crate::Complex64;

    fn bell() -> DensityMatrix {
        DensityMatrix::from_pure(&TargetState::BellPhiPlus.vector()).unwrap()
    }

    #[test]
    fn nine_bases_order_and_uniqueness() {
        let labels: Vec<_> = nine_bases().iter().map(|b| alloc::format!("{b}")).collect();
        assert_eq!(labels, ["ZZ", "ZX", "ZY", "XZ", "XX", "XY", "YZ", "YX", "YY"]);
    }

    #[test]
    fn bell_distributions() {
        for label in ["ZZ", "XX"] {
            let p = outcome_distribution(&bell(), &label.parse().unwrap()).unwrap();
            for (x, e) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
                assert!((x - e).abs() < 1e-12);
            }
        }
        // Y ⊗ Y anti-correlates on the Bell state
        let p = outcome_distribution(&bell(), &"YY".parse().unwrap()).unwrap();
        assert!((p[1] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mixed_state_is_uniform_in_every_basis() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        for b in nine_bases() {
            let p = outcome_distribution(&rho, &b).unwrap();
            assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn pure_state_matches_rotated_amplitudes() {
        let psi = TargetState::PsiI.vector();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        for b in nine_bases() {
            let u = b.rotation().unwrap();
            let p = outcome_distribution(&rho, &b).unwrap();
            for (k, pk) in p.iter().enumerate() {
                let amp: Complex64 = (0..4).map(|s| u.get(k, s) * psi[s]).sum();
                assert!((amp.norm_sqr() - pk).abs() < 1e-10);
            }
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empirical_frequencies_converge() {
        let rho = depolarize(&TargetState::PsiI.vector(), 0.3).unwrap();
        let n_s = 100_000;
        let proto = MeasurementProtocol {
            bases: nine_bases(),
            samples_per_basis: n_s,
            seed: 12,
        };
        let ds = sample_dataset(&rho, &proto).unwrap();
        for g in ds.groups() {
            assert_eq!(g.outcomes.len(), n_s);
            let exact = outcome_distribution(&rho, &g.basis).unwrap();
            let mut freq = [0.0; 4];
            for &o in &g.outcomes {
                freq[o] += 1.0 / n_s as f64;
            }
            let tv: f64 = 0.5 * freq.iter().zip(&exact).map(|(f, e)| (f - e).abs()).sum::<f64>();
            assert!(tv < 0.01, "basis {}: {tv}", g.basis);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let proto = MeasurementProtocol {
            bases: nine_bases(),
            samples_per_basis: 50,
            seed: 4,
        };
        assert_eq!(
            sample_dataset(&bell(), &proto).unwrap(),
            sample_dataset(&bell(), &proto).unwrap()
        );
        let other = MeasurementProtocol {
            seed: 5,
            ..proto.clone()
        };
        assert_ne!(
            sample_dataset(&bell(), &proto).unwrap(),
            sample_dataset(&bell(), &other).unwrap()
        );
    }

    #[test]
    fn invalid_protocols() {
        let bad = MeasurementProtocol {
            bases: Vec::new(),
            samples_per_basis: 1,
            seed: 0,
        };
        assert!(sample_dataset(&bell(), &bad).is_err());
        let zero = MeasurementProtocol {
            bases: nine_bases(),
            samples_per_basis: 0,
            seed: 0,
        };
        assert!(matches!(sample_dataset(&bell(), &zero), Err(Error::ZeroSamples)));
        let mixed = MeasurementProtocol {
            bases: alloc::vec!["ZZ".parse().unwrap(), "Z".parse().unwrap()],
            samples_per_basis: 1,
            seed: 0,
        };
        assert!(mixed.validate().is_err());
    }
}
