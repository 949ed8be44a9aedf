//! Dense complex linear algebra and quantum-state utilities.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// Largest qubit count for which dense `2^N × 2^N` matrices are built.
pub const MAX_QUBITS: usize = 10;

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as numerical noise.
pub const PSD_TOLERANCE: f64 = 1e-10;
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::TooManyQubits { n, cap: MAX_QUBITS })
    } else {
        Ok(())
    }
}

/// Integer index of a configuration; the first site is the most significant bit.
pub fn config_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Inverse of [`config_index`].
pub fn index_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|j| site_bit(index, j, n)).collect()
}

/// Bit of site `site` (0-based from the left) in configuration `index`.
#[inline]
pub fn site_bit(index: usize, site: usize, n: usize) -> u8 {
    ((index >> (n - 1 - site)) & 1) as u8
}

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|m[i][j] - conj(m[j][i])|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self.get(i, j) - self.get(j, i).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        a.get(i / b.rows, j / b.cols) * b.get(i % b.rows, j % b.cols)
    })
}

/// Eigen-decomposition of a Hermitian matrix (only the Hermitian part is used).
/// Eigenvectors are the columns of the returned matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let eig = m.hermitian_part().to_nalgebra().symmetric_eigen();
    let values = eig.eigenvalues.iter().copied().collect();
    Ok((values, ComplexMatrix::from_nalgebra(&eig.eigenvectors)))
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    Ok(m.hermitian_part()
        .to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect())
}

fn clamp_psd(values: &mut [f64]) -> Result<()> {
    for v in values.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(Error::NotPsd(*v));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (mut values, vecs) = hermitian_eigen(m)?;
    clamp_psd(&mut values)?;
    let n = m.rows;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vecs.get(i, k) * vecs.get(j, k).conj() * math::sqrt(values[k]))
            .sum()
    }))
}

/// Measurement axis of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'X' | 'x' => Ok(Axis::X),
            'Y' | 'y' => Ok(Axis::Y),
            'Z' | 'z' => Ok(Axis::Z),
            other => Err(Error::UnknownLabel(other)),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    /// Element `⟨outcome|ref⟩` of the local change of basis: row = outcome in
    /// the measured basis, column = reference (Z) state.
    #[inline]
    pub fn element(self, outcome: u8, reference: u8) -> Complex64 {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        match self {
            Axis::Z => {
                if outcome == reference {
                    ONE
                } else {
                    ZERO
                }
            }
            Axis::X => match (outcome, reference) {
                (1, 1) => Complex64::new(-h, 0.0),
                _ => Complex64::new(h, 0.0),
            },
            Axis::Y => match (outcome, reference) {
                (0, 1) => Complex64::new(0.0, -h),
                (1, 1) => Complex64::new(0.0, h),
                _ => Complex64::new(h, 0.0),
            },
        }
    }

    /// The 2×2 local unitary. Z is the identity, X the Hadamard matrix and
    /// Y maps outcome 0 to the +1 eigenstate of Pauli-Y.
    pub fn local_unitary(self) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| self.element(i as u8, j as u8))
    }
}

/// One measurement axis per qubit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Basis(Vec<Axis>);

impl Basis {
    pub fn new(axes: Vec<Axis>) -> Self {
        Basis(axes)
    }

    pub fn all_z(n: usize) -> Self {
        Basis(vec![Axis::Z; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0
    }

    /// Sites measured in a basis other than Z.
    pub fn rotated_sites(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != Axis::Z)
            .map(|(j, _)| j)
            .collect()
    }

    /// `U_b(outcome, reference)` as a product of local elements.
    #[inline]
    pub fn element(&self, outcome: usize, reference: usize) -> Complex64 {
        let n = self.0.len();
        let mut acc = ONE;
        for (j, axis) in self.0.iter().enumerate() {
            acc *= axis.element(site_bit(outcome, j, n), site_bit(reference, j, n));
            if acc == ZERO {
                break;
            }
        }
        acc
    }

    /// Dense `⊗_j U_{b_j}`.
    pub fn rotation(&self) -> Result<ComplexMatrix> {
        check_qubits(self.0.len())?;
        let mut acc = ComplexMatrix::identity(1);
        for axis in &self.0 {
            acc = kron(&acc, &axis.local_unitary());
        }
        Ok(acc)
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidArgument("empty basis label".into()));
        }
        s.chars().map(Axis::from_char).collect::<Result<Vec<_>>>().map(Basis)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

/// `⊗_j local_unitary(b_j)` for the given basis.
pub fn basis_rotation(basis: &Basis) -> Result<ComplexMatrix> {
    basis.rotation()
}

/// Which density-matrix invariant failed and by how much.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    NotHermitian { max_deviation: f64 },
    Trace { trace: Complex64 },
    NotPsd { min_eigenvalue: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_deviation: f64,
    pub trace: Complex64,
    pub min_eigenvalue: f64,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid density matrix:")?;
        for v in &self.violations {
            match v {
                Violation::NotSquare { rows, cols } => write!(f, " not square ({rows}x{cols});")?,
                Violation::NotHermitian { max_deviation } => {
                    write!(f, " not Hermitian (deviation {max_deviation:e});")?
                }
                Violation::Trace { trace } => write!(f, " trace {}{:+}i != 1;", trace.re, trace.im)?,
                Violation::NotPsd { min_eigenvalue } => write!(f, " not PSD (min eigenvalue {min_eigenvalue:e});")?,
            }
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension `2^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

/// Checks the three density-matrix invariants, returning either the validated
/// state or a report of every violated one.
pub fn validate_density(m: ComplexMatrix) -> core::result::Result<DensityMatrix, ValidationReport> {
    if !m.is_square() {
        return Err(ValidationReport {
            hermiticity_deviation: f64::NAN,
            trace: Complex64::new(f64::NAN, f64::NAN),
            min_eigenvalue: f64::NAN,
            violations: vec![Violation::NotSquare {
                rows: m.rows,
                cols: m.cols,
            }],
        });
    }
    let mut violations = Vec::new();
    let dev = m.hermiticity_deviation();
    if !(dev <= HERMITIAN_TOLERANCE) {
        violations.push(Violation::NotHermitian { max_deviation: dev });
    }
    let trace = m.trace();
    if !((trace - ONE).norm() <= TRACE_TOLERANCE) {
        violations.push(Violation::Trace { trace });
    }
    let min_eig = hermitian_eigenvalues(&m)
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    if !(min_eig >= -PSD_TOLERANCE) {
        violations.push(Violation::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    let dim = m.rows;
    if !violations.is_empty() {
        return Err(ValidationReport {
            hermiticity_deviation: dev,
            trace,
            min_eigenvalue: min_eig,
            violations,
        });
    }
    if !dim.is_power_of_two() {
        return Err(ValidationReport {
            hermiticity_deviation: dev,
            trace,
            min_eigenvalue: min_eig,
            violations: vec![Violation::NotSquare { rows: dim, cols: dim }],
        });
    }
    Ok(DensityMatrix {
        n_qubits: dim.trailing_zeros() as usize,
        matrix: m,
    })
}

impl DensityMatrix {
    /// Wraps a matrix known to satisfy the invariants by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square() && matrix.rows.is_power_of_two());
        Self {
            n_qubits: matrix.rows.trailing_zeros() as usize,
            matrix,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        Ok(Self::from_trusted(ComplexMatrix::identity(d).scale(1.0 / d as f64)))
    }

    /// `|ψ⟩⟨ψ|` for a normalised state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        check_state_vector(psi)?;
        let d = psi.len();
        Ok(Self::from_trusted(ComplexMatrix::from_fn(d, d, |i, j| {
            psi[i] * psi[j].conj()
        })))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix.get(i, j)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix).unwrap_or_default()
    }

    /// `Tr √(√ρ σ √ρ)` with `ρ = self`.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        fidelity(self, other)
    }

    /// `½ Tr|ρ − σ|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let diff = self.matrix.sub(&other.matrix)?;
        let values = hermitian_eigenvalues(&diff)?;
        Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// Uhlmann fidelity `Tr √(√a b √a)`, clamped to `[0, 1]`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let root = psd_sqrt(&a.matrix)?;
    let inner = root.matmul(&b.matrix)?.matmul(&root)?;
    let mut values = hermitian_eigenvalues(&inner)?;
    clamp_psd(&mut values)?;
    let f: f64 = values.iter().map(|&v| math::sqrt(v)).sum();
    if !(f <= 1.0 + 1e-8) {
        return Err(Error::NumericalDomain(alloc::format!("fidelity {f} exceeds 1")));
    }
    Ok(f.clamp(0.0, 1.0))
}

fn check_state_vector(psi: &[Complex64]) -> Result<()> {
    if psi.is_empty() || !psi.len().is_power_of_two() {
        return Err(Error::InvalidArgument(alloc::format!(
            "state vector length {} is not a power of two",
            psi.len()
        )));
    }
    check_qubits(psi.len().trailing_zeros() as usize)?;
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(alloc::format!(
            "state vector is not normalised (norm² = {norm})"
        )));
    }
    Ok(())
}

/// `(1 − p)|ψ⟩⟨ψ| + p·I/2^N`.
pub fn depolarize(psi: &[Complex64], p_dep: f64) -> Result<DensityMatrix> {
    depolarize_density(&DensityMatrix::from_pure(psi)?, p_dep)
}

/// `(1 − p)ρ + p·I/2^N`.
pub fn depolarize_density(rho: &DensityMatrix, p_dep: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p_dep) {
        return Err(Error::InvalidArgument(alloc::format!(
            "depolarizing strength {p_dep} outside [0, 1]"
        )));
    }
    let d = rho.dim();
    let mix = p_dep / d as f64;
    Ok(DensityMatrix::from_trusted(ComplexMatrix::from_fn(d, d, |i, j| {
        let mut v = rho.get(i, j) * (1.0 - p_dep);
        if i == j {
            v += mix;
        }
        v
    })))
}

/// Named two-qubit target states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetState {
    /// `(|00⟩ + |11⟩)/√2`
    BellPhiPlus,
    /// `(|00⟩ + i|11⟩)/√2`
    PsiI,
}

impl TargetState {
    pub fn name(self) -> &'static str {
        match self {
            TargetState::BellPhiPlus => "bell_phi_plus",
            TargetState::PsiI => "psi_i",
        }
    }

    pub fn vector(self) -> Vec<Complex64> {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let last = match self {
            TargetState::BellPhiPlus => Complex64::new(h, 0.0),
            TargetState::PsiI => Complex64::new(0.0, h),
        };
        vec![Complex64::new(h, 0.0), ZERO, ZERO, last]
    }
}

impl FromStr for TargetState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bell_phi_plus" | "bell" | "phi_plus" => Ok(TargetState::BellPhiPlus),
            "psi_i" => Ok(TargetState::PsiI),
            other => Err(Error::UnknownState(other.to_string())),
        }
    }
}

/// State vector of a named target (`bell_phi_plus` or `psi_i`).
pub fn canonical_state(name: &str) -> Result<Vec<Complex64>> {
    name.parse::<TargetState>().map(TargetState::vector)
}
