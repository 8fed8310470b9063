//! Rotation-circuit embedding of a scalar feature, class-conditional Gaussian
//! data on a quantisation grid, and the minimum-eigenvalue floor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Error, Result};
use crate::qmat::{CMatrix, CVector, DensityMatrix, HermitianMatrix, PSD_TOL};
use crate::rng::{self, domain};

/// Tolerance on `Σ_i E_i† E_i = I` for Kraus sets.
pub const KRAUS_TOL: f64 = 1e-9;

/// `x ↦ (1 − q)|x><x| + q·I/d` with `|x> = R_X(x)·Rot_θ·R_X(x)|0>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSpec {
    pub theta: [f64; 3],
    pub q: f64,
    pub dim: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        let a = std::f64::consts::FRAC_PI_4;
        EmbeddingSpec {
            theta: [a, a, a],
            q: 0.05,
            dim: 2,
        }
    }
}

impl EmbeddingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(Error::domain(format!("depolarisation q must lie in [0, 1), got {}", self.q)));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("rotation angles must be finite"));
        }
        Ok(())
    }

    /// Minimum eigenvalue of every embedded state, `q/d`.
    pub fn analytic_floor(&self) -> f64 {
        self.q / self.dim as f64
    }
}

/// `cos‖θ‖·I − i·sin‖θ‖·(θ̂·σ)`, the identity at `θ = 0`.
pub fn rot_gate(theta: [f64; 3]) -> CMatrix {
    let norm = (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]).sqrt();
    if norm == 0.0 {
        return CMatrix::identity(2, 2);
    }
    let (s, c) = norm.sin_cos();
    let [nx, ny, nz] = theta.map(|t| t / norm);
    // -i s (nx σx + ny σy + nz σz)
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, -s * nz),
            Complex64::new(-s * ny, -s * nx),
            Complex64::new(s * ny, -s * nx),
            Complex64::new(c, s * nz),
        ],
    )
}

/// Pure state `R_X(x)·Rot_θ·R_X(x)|0>`.
pub fn embedded_ket(theta: [f64; 3], x: f64) -> CVector {
    let rx = rot_gate([x, 0.0, 0.0]);
    let u = &rx * rot_gate(theta) * &rx;
    u.column(0).into_owned()
}

pub fn embed(spec: &EmbeddingSpec, x: f64) -> Result<DensityMatrix> {
    spec.validate()?;
    if !x.is_finite() {
        return Err(Error::domain("feature value must be finite"));
    }
    Ok(embed_unchecked(spec, x))
}

fn embed_unchecked(spec: &EmbeddingSpec, x: f64) -> DensityMatrix {
    let psi = embedded_ket(spec.theta, x);
    let pure = DensityMatrix::from_hermitian_unchecked(HermitianMatrix::outer(&psi));
    pure.depolarized(spec.q)
}

/// Class-conditional Gaussians `N((−1)^c, σ²)` snapped to a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSpec {
    pub num_classes: usize,
    pub class_std: f64,
    pub quant_lo: f64,
    pub quant_hi: f64,
    pub quant_step: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            num_classes: 2,
            class_std: 1.0,
            quant_lo: -6.0,
            quant_hi: 6.0,
            quant_step: 0.01,
        }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 1 {
            return Err(Error::domain("need at least one class"));
        }
        if !(self.class_std > 0.0 && self.class_std.is_finite()) {
            return Err(Error::domain("class standard deviation must be positive"));
        }
        if !(self.quant_lo.is_finite() && self.quant_hi.is_finite()) || self.quant_lo > self.quant_hi {
            return Err(Error::domain("quantisation grid needs finite quant_lo <= quant_hi"));
        }
        if !(self.quant_step > 0.0 && self.quant_step.is_finite()) {
            return Err(Error::domain("quantisation step must be positive"));
        }
        Ok(())
    }

    /// `μ_c = (−1)^c` for 0-based class labels.
    pub fn class_mean(&self, c: usize) -> f64 {
        if c.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn grid_len(&self) -> usize {
        ((self.quant_hi - self.quant_lo) / self.quant_step + 1e-9).floor() as usize + 1
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        self.quant_lo + i as f64 * self.quant_step
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_len()).map(|i| self.grid_point(i)).collect()
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let n = self.grid_len();
        let k = ((x - self.quant_lo) / self.quant_step).round();
        if k.is_nan() || k <= 0.0 {
            0
        } else {
            (k as usize).min(n - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Position on the quantisation grid.
    pub index: usize,
    pub x: f64,
    /// 0-based class label.
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset from `(x, c)` pairs, requiring every `x` on the grid.
    pub fn from_pairs(data: &DataSpec, pairs: &[(f64, usize)]) -> Result<Self> {
        data.validate()?;
        let mut samples = Vec::with_capacity(pairs.len());
        for &(x, c) in pairs {
            if c >= data.num_classes {
                return Err(Error::domain(format!(
                    "class {c} out of range for {} classes",
                    data.num_classes
                )));
            }
            let index = data.nearest_index(x);
            let off = (data.grid_point(index) - x).abs();
            if !x.is_finite() || off > 1e-6 * data.quant_step {
                return Err(Error::validation(Constraint::Grid, off));
            }
            samples.push(Sample {
                index,
                x: data.grid_point(index),
                c,
            });
        }
        Ok(Dataset { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, usize)> {
        self.samples.iter().map(|s| (s.x, s.c)).collect()
    }
}

/// `t` i.i.d. samples from the substream of `seed` reserved for datasets.
pub fn sample_dataset(data: &DataSpec, t: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::substream(seed, &[domain::DATASET]);
    sample_dataset_with(data, t, &mut rng)
}

pub fn sample_dataset_with<R: Rng + ?Sized>(data: &DataSpec, t: usize, rng: &mut R) -> Result<Dataset> {
    data.validate()?;
    let mut samples = Vec::with_capacity(t);
    for _ in 0..t {
        let c = rng.random_range(0..data.num_classes);
        let normal = Normal::new(data.class_mean(c), data.class_std)
            .map_err(|e| Error::domain(e.to_string()))?;
        let index = data.nearest_index(normal.sample(rng));
        samples.push(Sample {
            index,
            x: data.grid_point(index),
            c,
        });
    }
    Ok(Dataset { samples })
}

/// Discretised class-conditional and marginal distributions on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPrior {
    pub points: Vec<f64>,
    /// `conditional[c][i] = P(x_i | c)`.
    pub conditional: Vec<Vec<f64>>,
    /// `P(x_i) = Σ_c P(x_i | c) / K`.
    pub marginal: Vec<f64>,
}

impl QuantizedPrior {
    /// Joint `P(x_i, c)` with uniform class probabilities.
    pub fn joint(&self, c: usize, i: usize) -> f64 {
        self.conditional[c][i] / self.conditional.len() as f64
    }
}

pub fn quantized_prior(data: &DataSpec) -> Result<QuantizedPrior> {
    data.validate()?;
    let points = data.grid();
    let k = data.num_classes;
    let conditional: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mu = data.class_mean(c);
            let w: Vec<f64> = points
                .iter()
                .map(|x| (-0.5 * ((x - mu) / data.class_std).powi(2)).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        })
        .collect();
    let marginal = (0..points.len())
        .map(|i| conditional.iter().map(|p| p[i]).sum::<f64>() / k as f64)
        .collect();
    Ok(QuantizedPrior {
        points,
        conditional,
        marginal,
    })
}

/// Embedded state at every grid point, in grid order.
pub fn embed_grid(spec: &EmbeddingSpec, data: &DataSpec) -> Result<Vec<DensityMatrix>> {
    spec.validate()?;
    data.validate()?;
    Ok(data.grid().into_iter().map(|x| embed_unchecked(spec, x)).collect())
}

/// Smallest eigenvalue of any embedded grid state.
pub fn eigen_floor(spec: &EmbeddingSpec, data: &DataSpec) -> Result<f64> {
    Ok(embed_grid(spec, data)?
        .iter()
        .map(DensityMatrix::min_eigenvalue)
        .fold(f64::INFINITY, f64::min))
}

fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// `G·G† / Tr(G·G†)` for a complex Gaussian `G`; full rank almost surely.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = complex_gaussian(d, d, rng);
    let h = HermitianMatrix::symmetrized(&g * g.adjoint());
    let t = h.trace();
    DensityMatrix::from_hermitian_unchecked(h.scaled(1.0 / t))
}

/// `(G + G†)/2` for a complex Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::symmetrized(complex_gaussian(d, d, rng))
}

/// Haar-random unitary via QR with the phases of `diag(R)` removed.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = complex_gaussian(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Random CPTP map on `d × d` matrices with `num_kraus` operators: the
/// blocks of a `(num_kraus·d) × d` isometry from a Gaussian QR.
pub fn random_kraus_channel<R: Rng + ?Sized>(d: usize, num_kraus: usize, rng: &mut R) -> Vec<CMatrix> {
    let v = complex_gaussian(num_kraus * d, d, rng).qr().q();
    (0..num_kraus)
        .map(|i| v.view((i * d, 0), (d, d)).into_owned())
        .collect()
}

/// Random mixture of `num_unitaries` Haar unitaries with Dirichlet-like
/// weights. Unital: `Σ_i E_i E_i† = I` as well.
pub fn random_unital_channel<R: Rng + ?Sized>(d: usize, num_unitaries: usize, rng: &mut R) -> Vec<CMatrix> {
    let w: Vec<f64> = (0..num_unitaries).map(|_| rng.random_range(1e-3..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.iter()
        .map(|wi| random_unitary(d, rng) * Complex64::new((wi / z).sqrt(), 0.0))
        .collect()
}

/// Max-entry deviation of `Σ_i E_i E_i†` from the identity; zero exactly
/// for unital channels, which fix the maximally mixed state.
pub fn unitality_deviation(kraus: &[CMatrix]) -> f64 {
    let Some(first) = kraus.first() else {
        return f64::INFINITY;
    };
    let d = first.nrows();
    let mut sum = CMatrix::zeros(d, d);
    for e in kraus {
        sum += e * e.adjoint();
    }
    sum -= CMatrix::identity(d, d);
    sum.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// Kraus operators of qubit amplitude damping with decay probability `gamma`.
pub fn amplitude_damping_kraus(gamma: f64) -> Vec<CMatrix> {
    let c = |re: f64| Complex64::new(re, 0.0);
    vec![
        CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]),
        CMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]),
    ]
}

/// Max-entry deviation of `Σ_i E_i† E_i` from the identity.
fn kraus_deviation(kraus: &[CMatrix]) -> Result<f64> {
    let d = kraus
        .first()
        .ok_or_else(|| Error::domain("a channel needs at least one Kraus operator"))?
        .ncols();
    let mut sum = CMatrix::zeros(d, d);
    for e in kraus {
        if e.nrows() != d || e.ncols() != d {
            return Err(Error::DimensionMismatch(d, if e.ncols() != d { e.ncols() } else { e.nrows() }));
        }
        sum += e.adjoint() * e;
    }
    sum -= CMatrix::identity(d, d);
    Ok(sum.iter().fold(0.0f64, |a, z| a.max(z.norm())))
}

/// `Σ_i E_i ρ E_i†`.
pub fn apply_channel(kraus: &[CMatrix], rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dev = kraus_deviation(kraus)?;
    if dev > KRAUS_TOL {
        return Err(Error::validation(Constraint::KrausCompleteness, dev));
    }
    if kraus[0].ncols() != rho.dim() {
        return Err(Error::DimensionMismatch(kraus[0].ncols(), rho.dim()));
    }
    Ok(apply_unchecked(kraus, rho))
}

fn apply_unchecked(kraus: &[CMatrix], rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let mut out = CMatrix::zeros(d, d);
    for e in kraus {
        out += e * rho.matrix() * e.adjoint();
    }
    DensityMatrix::from_hermitian_unchecked(HermitianMatrix::symmetrized(out))
}

/// Outcome of probing `α_min(Φ(ρ)) ≥ α_min(ρ)` on random inputs.
#[derive(Debug, Clone)]
pub struct FloorReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest observed `α_min(Φ(ρ)) − α_min(ρ)`.
    pub worst_margin: f64,
    /// First input whose floor dropped by more than `PSD_TOL`.
    pub counterexample: Option<DensityMatrix>,
}

impl FloorReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Applies the channel to `trials` random full-rank states.
pub fn channel_floor_check(kraus: &[CMatrix], trials: usize, seed: u64) -> Result<FloorReport> {
    let dev = kraus_deviation(kraus)?;
    if dev > KRAUS_TOL {
        return Err(Error::validation(Constraint::KrausCompleteness, dev));
    }
    let d = kraus[0].ncols();
    let mut rng = rng::substream(seed, &[domain::STATE]);
    let mut report = FloorReport {
        trials,
        violations: 0,
        worst_margin: f64::INFINITY,
        counterexample: None,
    };
    for _ in 0..trials {
        let rho = random_density(d, &mut rng);
        let margin = apply_unchecked(kraus, &rho).min_eigenvalue() - rho.min_eigenvalue();
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -PSD_TOL {
            report.violations += 1;
            report.counterexample.get_or_insert(rho);
        }
    }
    Ok(report)
}

/// Kraus operators of `ρ ↦ (1 − q)ρ + q·I/2` on a qubit.
pub fn depolarizing_kraus(q: f64) -> Vec<CMatrix> {
    let id = (1.0 - 0.75 * q).sqrt();
    let p = (q / 4.0).sqrt();
    vec![
        HermitianMatrix::identity(2).scaled(id).into_matrix(),
        HermitianMatrix::pauli_x().scaled(p).into_matrix(),
        HermitianMatrix::pauli_y().scaled(p).into_matrix(),
        HermitianMatrix::pauli_z().scaled(p).into_matrix(),
    ]
}
