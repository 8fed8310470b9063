//! Dense complex Hermitian matrices, density matrices and POVMs.
//!
//! Everything here is small (d <= 8) and dense. Hermitian matrices are stored
//! exactly symmetrised, so traces of products between them are real up to
//! rounding.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-9;
pub const RECON_TOL: f64 = 1e-9;
pub const POVM_TOL: f64 = 1e-9;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Order `p` of a Schatten norm, `p >= 1` (infinity allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchattenOrder(f64);

impl SchattenOrder {
    pub const ONE: SchattenOrder = SchattenOrder(1.0);
    pub const TWO: SchattenOrder = SchattenOrder(2.0);
    pub const INFINITY: SchattenOrder = SchattenOrder(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::domain(format!("Schatten order must be >= 1, got {p}")));
        }
        Ok(SchattenOrder(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1/p`, with `1/inf` taken as exactly zero.
    pub fn reciprocal(self) -> f64 {
        if self.0.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

/// Norm order of an attack: the two extreme Schatten orders.
/// Ordered as `One < Infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NormOrder {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "inf")]
    Infinity,
}

impl NormOrder {
    pub fn schatten(self) -> SchattenOrder {
        match self {
            NormOrder::One => SchattenOrder::ONE,
            NormOrder::Infinity => SchattenOrder::INFINITY,
        }
    }

    /// `1/p` with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        self.schatten().reciprocal()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(NormOrder::One),
            "inf" | "infinity" | "∞" => Ok(NormOrder::Infinity),
            other => Err(Error::domain(format!("norm order must be 1 or inf, got {other:?}"))),
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::One => f.write_str("1"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

/// Largest entry-wise deviation `|m_ij - conj(m_ji)|`.
fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl HermitianMatrix {
    /// Validates hermiticity within [`HERM_TOL`] and stores the exact
    /// Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::validation(
                Constraint::Square,
                m.nrows().abs_diff(m.ncols()) as f64,
            ));
        }
        let dev = hermitian_deviation(&m);
        if dev > HERM_TOL {
            return Err(Error::validation(Constraint::Hermitian, dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Hermitian part `(m + m†)/2` without any tolerance check.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix {
            m: (m + adj) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn zeros(d: usize) -> Self {
        HermitianMatrix {
            m: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        HermitianMatrix {
            m: CMatrix::identity(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        HermitianMatrix { m }
    }

    /// Rank-one `|v><v|` (not normalised).
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn pauli_x() -> Self {
        HermitianMatrix {
            m: CMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0]),
        }
    }

    pub fn pauli_y() -> Self {
        HermitianMatrix {
            m: CMatrix::from_row_slice(2, 2, &[C0, -CI, CI, C0]),
        }
    }

    pub fn pauli_z() -> Self {
        HermitianMatrix {
            m: CMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1]),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianMatrix {
            m: &self.m * Complex64::new(s, 0.0),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// `u · self · u†`.
    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(u * &self.m * u.adjoint())
    }

    pub fn checked_add(&self, other: &HermitianMatrix) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(HermitianMatrix {
            m: &self.m + &other.m,
        })
    }

    pub fn checked_sub(&self, other: &HermitianMatrix) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(HermitianMatrix {
            m: &self.m - &other.m,
        })
    }

    pub fn eig(&self) -> EigResult {
        eig_unchecked(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig().max()
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(a, b));
    }
    Ok(())
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;

    /// Panics on dimension mismatch; use [`HermitianMatrix::checked_add`]
    /// for untrusted operands.
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        self.checked_add(rhs).expect("dimension mismatch in Hermitian add")
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        self.checked_sub(rhs).expect("dimension mismatch in Hermitian sub")
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { m: -&self.m }
    }
}

/// Spectral decomposition `m = basis · diag(eigenvalues) · basis†`.
///
/// Eigenvalues ascend. Each eigenvector column has its first non-negligible
/// component real and positive, which makes the basis reproducible for
/// non-degenerate spectra.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub basis: CMatrix,
}

impl EigResult {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Functional calculus: `basis · diag(f(α_i)) · basis†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&a| f(a)).collect();
        self.with_eigenvalues(&vals)
    }

    /// Same eigenbasis, replaced spectrum.
    pub fn with_eigenvalues(&self, vals: &[f64]) -> HermitianMatrix {
        assert_eq!(vals.len(), self.dim());
        let mut scaled = self.basis.clone();
        for (j, &v) in vals.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= Complex64::new(v, 0.0);
        }
        HermitianMatrix::symmetrized(scaled * self.basis.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.with_eigenvalues(&self.eigenvalues)
    }
}

/// Eigendecomposition with input validation.
pub fn hermitian_eig(m: &CMatrix) -> Result<EigResult> {
    let h = HermitianMatrix::new(m.clone())?;
    Ok(h.eig())
}

fn fix_phase(col: &mut nalgebra::DVectorViewMut<'_, Complex64>) {
    let scale = col.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let thresh = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if let Some(z) = col.iter().copied().find(|z| z.norm() > thresh) {
        let phase = z.conj() / z.norm();
        for v in col.iter_mut() {
            *v *= phase;
        }
    }
}

fn eig_unchecked(m: &CMatrix) -> EigResult {
    let d = m.nrows();
    let (eigenvalues, mut basis) = match d {
        0 => (Vec::new(), CMatrix::zeros(0, 0)),
        1 => (vec![m[(0, 0)].re], CMatrix::identity(1, 1)),
        2 => eig_2x2(m),
        _ => eig_general(m),
    };
    for j in 0..d {
        let mut col = basis.column_mut(j);
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
        fix_phase(&mut col);
    }
    EigResult { eigenvalues, basis }
}

/// Closed form for 2x2 Hermitian matrices.
fn eig_2x2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let a = m[(0, 0)].re;
    let c = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + c);
    let half_gap = 0.5 * (a - c);
    let r = half_gap.hypot(b.norm());
    let lo = mean - r;
    if r == 0.0 {
        return (vec![mean, mean], CMatrix::identity(2, 2));
    }
    // Two algebraically equivalent eigenvector candidates for `lo`; keep the
    // better conditioned one.
    let v1 = [b, Complex64::new(lo - a, 0.0)];
    let v2 = [Complex64::new(lo - c, 0.0), b.conj()];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let (mut x, mut y) = if n1 >= n2 {
        (v1[0], v1[1])
    } else {
        (v2[0], v2[1])
    };
    let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
    x /= n;
    y /= n;
    // Orthogonal complement in C^2.
    let basis = CMatrix::from_row_slice(2, 2, &[x, -y.conj(), y, x.conj()]);
    (vec![lo, mean + r], basis)
}

fn eig_general(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let d = m.nrows();
    let se = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut basis = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &se.eigenvectors.column(src));
    }
    (vals, basis)
}

/// `(Σ|α_i|^p)^{1/p}` over the eigenvalues; `max |α_i|` for `p = ∞`.
pub fn schatten_norm(m: &HermitianMatrix, p: SchattenOrder) -> f64 {
    let eig = m.eig();
    schatten_from_spectrum(&eig.eigenvalues, p)
}

pub(crate) fn schatten_from_spectrum(vals: &[f64], p: SchattenOrder) -> f64 {
    let max = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let p = p.value();
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    if p == 1.0 {
        return vals.iter().map(|v| v.abs()).sum();
    }
    // Scale by the largest magnitude so large p cannot overflow.
    let s: f64 = vals.iter().map(|v| (v.abs() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

/// `D_p(a, b) = ‖a − b‖_p`.
pub fn schatten_distance(a: &DensityMatrix, b: &DensityMatrix, p: SchattenOrder) -> Result<f64> {
    let diff = a.as_hermitian().checked_sub(b.as_hermitian())?;
    Ok(schatten_norm(&diff, p))
}

/// Real part of `Tr(a · b)`.
pub fn trace_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok(trace_inner_unchecked(a.matrix(), b.matrix()))
}

pub(crate) fn trace_inner_unchecked(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut acc = C0;
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    debug_assert!(
        acc.im.abs() <= TRACE_TOL * (1.0 + acc.re.abs()) * (d * d) as f64,
        "Tr(AB) of Hermitian operands has imaginary part {}",
        acc.im
    );
    acc.re
}

/// Hermitian, positive semidefinite and unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

/// Validates a density matrix. Eigenvalues in `[-PSD_TOL, 0)` are clamped to
/// zero and the trace renormalised; anything worse is rejected with the
/// largest violation.
pub fn validate_density(m: HermitianMatrix) -> Result<DensityMatrix> {
    let eig = m.eig();
    let tr = m.trace();
    let trace_violation = (tr - 1.0).abs();
    let psd_violation = (-eig.min()).max(0.0);

    let mut worst: Option<(Constraint, f64)> = None;
    if trace_violation > TRACE_TOL {
        worst = Some((Constraint::Trace, trace_violation));
    }
    if psd_violation > PSD_TOL && worst.is_none_or(|(_, w)| psd_violation > w) {
        worst = Some((Constraint::PositiveSemidefinite, psd_violation));
    }
    if let Some((c, mag)) = worst {
        return Err(Error::validation(c, mag));
    }
    if eig.min() < 0.0 {
        let clamped = eig.map_eigenvalues(|a| a.max(0.0));
        let t = clamped.trace();
        return Ok(DensityMatrix(clamped.scaled(1.0 / t)));
    }
    Ok(DensityMatrix(m))
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_density(HermitianMatrix::new(m)?)
    }

    /// Caller guarantees the invariants (up to rounding).
    pub(crate) fn from_hermitian_unchecked(h: HermitianMatrix) -> Self {
        DensityMatrix(h)
    }

    /// `|ψ><ψ|` for a nonzero (not necessarily normalised) vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::domain("state vector must be nonzero and finite"));
        }
        let v = psi / Complex64::new(n, 0.0);
        Ok(DensityMatrix(HermitianMatrix::outer(&v)))
    }

    /// Computational basis projector `|k><k|`.
    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[k] = 1.0;
        DensityMatrix(HermitianMatrix::from_real_diagonal(&diag))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(HermitianMatrix::identity(d).scaled(1.0 / d as f64))
    }

    /// Qubit state `(I + r·σ)/2`; requires `|r| <= 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if len > 1.0 + PSD_TOL {
            return Err(Error::validation(
                Constraint::PositiveSemidefinite,
                (len - 1.0) / 2.0,
            ));
        }
        Ok(DensityMatrix(bloch_operator(0.5, [0.5 * r[0], 0.5 * r[1], 0.5 * r[2]])))
    }

    /// Bloch vector of a qubit state, `None` if `d != 2`.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        (self.dim() == 2).then(|| {
            let (_, a) = bloch_components(self.matrix());
            [2.0 * a[0], 2.0 * a[1], 2.0 * a[2]]
        })
    }

    /// `(1 − q)·ρ + q·I/d`.
    pub fn depolarized(&self, q: f64) -> Self {
        let d = self.dim();
        let mixed = HermitianMatrix::identity(d).scaled(q / d as f64);
        DensityMatrix(&self.0.scaled(1.0 - q) + &mixed)
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn eig(&self) -> EigResult {
        self.0.eig()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.min_eigenvalue()
    }
}

/// `a0·I + a·σ` for a qubit.
pub(crate) fn bloch_operator(a0: f64, a: [f64; 3]) -> HermitianMatrix {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(a0 + a[2], 0.0),
            Complex64::new(a[0], -a[1]),
            Complex64::new(a[0], a[1]),
            Complex64::new(a0 - a[2], 0.0),
        ],
    );
    HermitianMatrix { m }
}

/// Inverse of [`bloch_operator`]: `(a0, a)` with `m = a0·I + a·σ`.
pub(crate) fn bloch_components(m: &CMatrix) -> (f64, [f64; 3]) {
    let a0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let az = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    let off = m[(1, 0)];
    (a0, [off.re, off.im, az])
}

/// Positive operator-valued measure `{Π_c}` with `Σ_c Π_c = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianMatrix>,
}

pub fn validate_povm(elements: Vec<HermitianMatrix>) -> Result<Povm> {
    let first = elements
        .first()
        .ok_or_else(|| Error::domain("a POVM needs at least one element"))?;
    let d = first.dim();
    for e in &elements {
        same_dim(d, e.dim())?;
    }
    let mut worst: Option<(Constraint, f64)> = None;
    for e in &elements {
        let v = (-e.min_eigenvalue()).max(0.0);
        if v > PSD_TOL && worst.is_none_or(|(_, w)| v > w) {
            worst = Some((Constraint::PositiveSemidefinite, v));
        }
    }
    let dev = completeness_deviation(&elements);
    if dev > POVM_TOL && worst.is_none_or(|(_, w)| dev > w) {
        worst = Some((Constraint::PovmCompleteness, dev));
    }
    if let Some((c, mag)) = worst {
        return Err(Error::validation(c, mag));
    }
    Ok(Povm { elements })
}

/// Max-entry distance between `Σ_c Π_c` and the identity.
pub(crate) fn completeness_deviation(elements: &[HermitianMatrix]) -> f64 {
    let d = elements[0].dim();
    let mut sum = CMatrix::zeros(d, d);
    for e in elements {
        sum += e.matrix();
    }
    sum -= CMatrix::identity(d, d);
    sum.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

impl Povm {
    pub(crate) fn from_unchecked(elements: Vec<HermitianMatrix>) -> Self {
        Povm { elements }
    }

    /// Projective measurement in the computational basis, one class per basis state.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|k| DensityMatrix::basis_state(d, k).into_hermitian())
            .collect();
        Povm { elements }
    }

    /// Every element equal to `I/K`.
    pub fn uniform(d: usize, k: usize) -> Self {
        let e = HermitianMatrix::identity(d).scaled(1.0 / k as f64);
        Povm {
            elements: vec![e; k],
        }
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<HermitianMatrix> {
        self.elements
    }

    pub fn element(&self, c: usize) -> Result<&HermitianMatrix> {
        self.elements.get(c).ok_or_else(|| {
            Error::domain(format!(
                "class {c} out of range for a {}-outcome POVM",
                self.elements.len()
            ))
        })
    }

    pub fn num_classes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Born-rule probability `Tr(Π_c ρ)`.
    pub fn probability(&self, c: usize, rho: &DensityMatrix) -> Result<f64> {
        trace_inner(self.element(c)?, rho.as_hermitian())
    }
}
