//! Closed-form generalization bounds.
//!
//! The base bound combines the Rényi-2 mutual information of the embedded
//! ensemble with a confidence term. Adversarial variants add a budget-linear
//! increment whose validity depends on the minimum-eigenvalue floor `Δ`.
//! Validity is reported, never enforced.

use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Error, Result};
use crate::qmat::{DensityMatrix, HermitianMatrix, NormOrder};

/// Base of the logarithm in the confidence term `√(2·log(2/δ)/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub k: usize,
    pub t: usize,
    pub delta: f64,
    pub d: usize,
    /// Minimum-eigenvalue floor `Δ` of the embedded states.
    pub floor: f64,
    /// Rényi-2 mutual information in bits.
    pub i2: f64,
    #[serde(default)]
    pub log_base: LogBase,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.t < 1 {
            return Err(Error::domain("training size T must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("confidence delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.k < 2 {
            return Err(Error::domain("need K >= 2 classes"));
        }
        if self.d < 1 {
            return Err(Error::domain("dimension must be >= 1"));
        }
        if !(self.floor >= 0.0 && self.floor <= 1.0 / self.d as f64 + 1e-12) {
            return Err(Error::domain(format!(
                "eigenvalue floor must lie in [0, 1/d], got {}",
                self.floor
            )));
        }
        if !(self.i2 >= -1e-9 && self.i2.is_finite()) {
            return Err(Error::domain(format!("mutual information must be >= 0, got {}", self.i2)));
        }
        Ok(())
    }

    fn kt(&self) -> f64 {
        self.k as f64 / self.t as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub base: f64,
    pub adversarial_increment: f64,
    pub total: f64,
    pub valid: bool,
    pub validity_reason: String,
}

impl BoundReport {
    fn new(base: f64, increment: f64, valid: bool, reason: String) -> Self {
        BoundReport {
            base,
            adversarial_increment: increment,
            total: base + increment,
            valid,
            validity_reason: reason,
        }
    }
}

/// `√(2·log(2/δ)/T)`.
pub fn confidence_term(t: usize, delta: f64, base: LogBase) -> f64 {
    (2.0 * base.log(2.0 / delta) / t as f64).sqrt()
}

/// `2·√(2^{I2}·K/T) + √(2·log(2/δ)/T)`.
pub fn banchi_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(2.0 * (inputs.i2.exp2() * inputs.kt()).sqrt() + confidence_term(inputs.t, inputs.delta, inputs.log_base))
}

fn check_budget(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("budget must be finite and >= 0, got {epsilon}")));
    }
    Ok(())
}

fn floor_verdict(epsilon: f64, limit: f64, label: &str) -> (bool, String) {
    if epsilon <= limit {
        (true, format!("epsilon = {epsilon} <= {label} = {limit}"))
    } else {
        (false, format!("epsilon = {epsilon} > {label} = {limit}; use the general-budget bound"))
    }
}

/// Base bound plus `2·√(K/T)·ε`, valid for `ε ≤ 2Δ`.
pub fn adv_bound_p1(inputs: &BoundInputs, epsilon: f64) -> Result<BoundReport> {
    check_budget(epsilon)?;
    let base = banchi_bound(inputs)?;
    let (valid, reason) = floor_verdict(epsilon, 2.0 * inputs.floor, "2*Delta");
    Ok(BoundReport::new(base, 2.0 * inputs.kt().sqrt() * epsilon, valid, reason))
}

/// Base bound plus `2·d·√(K/T)·ε`, valid for `ε ≤ Δ`.
pub fn adv_bound_pinf(inputs: &BoundInputs, epsilon: f64) -> Result<BoundReport> {
    check_budget(epsilon)?;
    let base = banchi_bound(inputs)?;
    let (valid, reason) = floor_verdict(epsilon, inputs.floor, "Delta");
    Ok(BoundReport::new(
        base,
        2.0 * inputs.d as f64 * inputs.kt().sqrt() * epsilon,
        valid,
        reason,
    ))
}

/// Budget-independent validity: `ε·√(2d(1 + (K−1)/T))` for `p = 1` and
/// `2εd·√(1 + (K−1)/T)` for `p = ∞`.
pub fn adv_bound_general(inputs: &BoundInputs, epsilon: f64, p: NormOrder) -> Result<BoundReport> {
    check_budget(epsilon)?;
    let base = banchi_bound(inputs)?;
    let growth = 1.0 + (inputs.k as f64 - 1.0) / inputs.t as f64;
    let d = inputs.d as f64;
    let increment = match p {
        NormOrder::One => epsilon * (2.0 * d * growth).sqrt(),
        NormOrder::Infinity => 2.0 * epsilon * d * growth.sqrt(),
    };
    Ok(BoundReport::new(
        base,
        increment,
        true,
        "valid for every budget".to_string(),
    ))
}

/// Floor-dependent bound for the given order.
pub fn adv_bound(inputs: &BoundInputs, epsilon: f64, p: NormOrder) -> Result<BoundReport> {
    match p {
        NormOrder::One => adv_bound_p1(inputs, epsilon),
        NormOrder::Infinity => adv_bound_pinf(inputs, epsilon),
    }
}

/// `2·log₂ Tr √(Σ_x P(x)·ρ(x)²)`.
pub fn renyi2_mi(probabilities: &[f64], states: &[DensityMatrix]) -> Result<f64> {
    if probabilities.len() != states.len() {
        return Err(Error::DimensionMismatch(probabilities.len(), states.len()));
    }
    let first = states.first().ok_or_else(|| Error::domain("empty ensemble"))?;
    let d = first.dim();
    if let Some(neg) = probabilities.iter().copied().find(|p| !(*p >= 0.0)) {
        return Err(Error::validation(Constraint::Probability, neg.abs()));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(Constraint::Probability, (total - 1.0).abs()));
    }
    let mut acc = HermitianMatrix::zeros(d);
    for (&p, rho) in probabilities.iter().zip(states) {
        if rho.dim() != d {
            return Err(Error::DimensionMismatch(d, rho.dim()));
        }
        if p == 0.0 {
            continue;
        }
        let sq = HermitianMatrix::symmetrized(rho.matrix() * rho.matrix());
        acc = &acc + &sq.scaled(p);
    }
    let root_trace: f64 = acc.eig().eigenvalues.iter().map(|a| a.max(0.0).sqrt()).sum();
    Ok(2.0 * root_trace.log2())
}

/// Attack order and budget for one side of a mismatched pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub p: NormOrder,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthRelation {
    TrainStronger,
    TestStronger,
    Undetermined,
}

fn dim_pow(d: usize, e: f64) -> f64 {
    (d as f64).powf(e)
}

/// Sufficient condition for the `a`-ball to contain the `b`-ball.
fn dominates(a: Budget, b: Budget, d: usize) -> bool {
    let e = b.p.reciprocal() - a.p.reciprocal();
    if a.p <= b.p {
        b.epsilon < dim_pow(d, e) * a.epsilon
    } else {
        b.epsilon < 2.0 * dim_pow(d, e - 1.0) * a.epsilon
    }
}

pub fn strength_compare(train: Budget, test: Budget, d: usize) -> StrengthRelation {
    if dominates(train, test, d) {
        StrengthRelation::TrainStronger
    } else if dominates(test, train, d) {
        StrengthRelation::TestStronger
    } else {
        StrengthRelation::Undetermined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchSpec {
    pub train: Budget,
    pub test: Budget,
    pub d: usize,
}

/// `d^{1−1/p′}·ε′ + d^{1−1/p}·ε`.
pub fn xi(spec: &MismatchSpec) -> f64 {
    let term = |b: Budget| dim_pow(spec.d, 1.0 - b.p.reciprocal()) * b.epsilon;
    term(spec.test) + term(spec.train)
}

/// Interval for the mismatched generalization error given the matched one.
pub fn mismatch_bounds(g_matched: f64, spec: &MismatchSpec, relation: StrengthRelation) -> Result<(f64, f64)> {
    let w = xi(spec);
    match relation {
        StrengthRelation::TrainStronger => Ok((g_matched - w, g_matched)),
        StrengthRelation::TestStronger => Ok((g_matched, g_matched + w)),
        StrengthRelation::Undetermined => Err(Error::CannotBound),
    }
}
