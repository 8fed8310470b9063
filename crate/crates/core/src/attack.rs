//! Worst-case perturbations inside a Schatten ball.
//!
//! For a POVM element `Π_c` and state `ρ` the adversary solves
//! `max Tr(Π_c(ρ − λ))` over density matrices `λ` with `‖ρ − λ‖_p ≤ ε`.
//! The objective is linear, so every solver here returns an extreme point of
//! the feasible set.
//!
//! Qubit geometry used throughout: with `λ = (I + r·σ)/2` and
//! `Π = a0·I + a·σ`, `Tr(Πλ) = a0 + a·r` and `ρ − λ = (r_ρ − r)·σ/2`, whose
//! eigenvalues are `±|r_ρ − r|/2`. The feasible set is therefore the unit
//! Bloch ball cut by a ball of radius `ε` (`p = 1`) or `2ε` (`p = ∞`)
//! around `r_ρ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    bloch_components, schatten_distance, schatten_from_spectrum, trace_inner_unchecked,
    validate_density, DensityMatrix, HermitianMatrix, NormOrder, Povm,
};

/// Slack allowed on `D_p(ρ, λ*) ≤ ε`.
pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-6;
/// Eigenvalues closer than this are treated as equal.
pub const TIE_TOL: f64 = 1e-12;
pub const DEFAULT_RESOLUTION: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ClosedForm,
    Numerical,
    BruteForce,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverUsed {
    /// Zero budget or a constant POVM element: `λ* = ρ`.
    Trivial,
    ClosedFormP1,
    ClosedFormPinf,
    Numerical,
    /// Two-ball geometry on the Bloch ball.
    QubitExact,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub p: NormOrder,
    pub epsilon: f64,
    #[serde(default)]
    pub solver: Solver,
}

impl AttackSpec {
    pub fn new(p: NormOrder, epsilon: f64) -> Result<Self> {
        let spec = AttackSpec {
            p,
            epsilon,
            solver: Solver::Auto,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_solver(self, solver: Solver) -> Self {
        AttackSpec { solver, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!(
                "attack budget must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Radius of the Bloch-vector ball matching this budget.
    pub fn bloch_radius(&self) -> f64 {
        match self.p {
            NormOrder::One => self.epsilon,
            NormOrder::Infinity => 2.0 * self.epsilon,
        }
    }

    /// Largest budget for which the closed form applies at floor `floor`.
    pub fn closed_form_limit(p: NormOrder, floor: f64) -> f64 {
        match p {
            NormOrder::One => 2.0 * floor,
            NormOrder::Infinity => floor,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub lambda_star: DensityMatrix,
    /// `1 − Tr(Π_c λ*)`.
    pub loss: f64,
    /// `1 − Tr(Π_c ρ)`.
    pub clean_loss: f64,
    /// `Tr(Π_c(ρ − λ*))`.
    pub gain: f64,
    pub solver_used: SolverUsed,
    /// `ε − D_p(ρ, λ*)`; negative only by rounding.
    pub feasibility_slack: f64,
    pub converged: bool,
}

fn check_dims(element: &HermitianMatrix, rho: &DensityMatrix) -> Result<()> {
    if element.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(element.dim(), rho.dim()));
    }
    Ok(())
}

fn check_budget(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!(
            "attack budget must be finite and >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

fn finish(
    element: &HermitianMatrix,
    rho: &DensityMatrix,
    lambda: DensityMatrix,
    p: NormOrder,
    epsilon: f64,
    solver_used: SolverUsed,
    converged: bool,
) -> AttackResult {
    let diff = rho.as_hermitian() - lambda.as_hermitian();
    let gain = trace_inner_unchecked(element.matrix(), diff.matrix());
    let clean_loss = 1.0 - trace_inner_unchecked(element.matrix(), rho.matrix());
    let dist = schatten_distance(rho, &lambda, p.schatten()).expect("dimensions checked");
    AttackResult {
        loss: clean_loss + gain,
        clean_loss,
        gain,
        solver_used,
        feasibility_slack: epsilon - dist,
        converged,
        lambda_star: lambda,
    }
}

fn trivial(element: &HermitianMatrix, rho: &DensityMatrix, p: NormOrder, epsilon: f64) -> AttackResult {
    finish(element, rho, rho.clone(), p, epsilon, SolverUsed::Trivial, true)
}

/// `λ* = ρ − U τ̄ U†` for a diagonal `τ̄` in the eigenbasis `U` of `Π_c`.
fn perturb_in_eigenbasis(rho: &DensityMatrix, basis_of: &HermitianMatrix, tau: &[f64]) -> Result<DensityMatrix> {
    let eig = basis_of.eig();
    let shift = eig.with_eigenvalues(tau);
    validate_density(rho.as_hermitian() - &shift)
}

fn closed_form_guard(rho: &DensityMatrix, p: NormOrder, epsilon: f64) -> Result<()> {
    let limit = AttackSpec::closed_form_limit(p, rho.min_eigenvalue());
    if epsilon > limit + TIE_TOL {
        return Err(Error::Infeasible { epsilon, limit });
    }
    Ok(())
}

/// Trace-norm attack: move `ε/2` of weight from the top eigenvector of
/// `Π_c` to the bottom one. Requires `ε ≤ 2·α_min(ρ)`.
pub fn closed_form_p1(element: &HermitianMatrix, rho: &DensityMatrix, epsilon: f64) -> Result<AttackResult> {
    check_dims(element, rho)?;
    check_budget(epsilon)?;
    closed_form_guard(rho, NormOrder::One, epsilon)?;
    let alpha = element.eig().eigenvalues;
    let d = alpha.len();
    let mut tau = vec![0.0; d];
    let (lo, hi) = (alpha[0], alpha[d - 1]);
    if hi - lo > TIE_TOL {
        let top = alpha.iter().position(|&a| a >= hi - TIE_TOL).expect("max exists");
        tau[top] = 0.5 * epsilon;
        tau[0] = -0.5 * epsilon;
    }
    let lambda = perturb_in_eigenbasis(rho, element, &tau)?;
    Ok(finish(element, rho, lambda, NormOrder::One, epsilon, SolverUsed::ClosedFormP1, true))
}

/// Median of an ascending spectrum.
fn median(alpha: &[f64]) -> f64 {
    let d = alpha.len();
    if d.is_multiple_of(2) {
        0.5 * (alpha[d / 2 - 1] + alpha[d / 2])
    } else {
        alpha[d / 2]
    }
}

/// Signs of `α_i − α_med`; entries tied with the median absorb the
/// imbalance of the rest (in index order) so the signs sum to zero.
fn balanced_signs(alpha: &[f64]) -> Vec<f64> {
    let med = median(alpha);
    let mut signs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if (a - med).abs() <= TIE_TOL {
                0.0
            } else {
                (a - med).signum()
            }
        })
        .collect();
    let mut imbalance: f64 = signs.iter().sum();
    for (i, &a) in alpha.iter().enumerate() {
        if imbalance == 0.0 {
            break;
        }
        if (a - med).abs() <= TIE_TOL {
            signs[i] = -imbalance.signum();
            imbalance += signs[i];
        }
    }
    debug_assert_eq!(imbalance, 0.0);
    signs
}

/// Operator-norm attack: shift every eigen-direction of `Π_c` by `±ε`
/// according to its side of the median eigenvalue. Requires `ε ≤ α_min(ρ)`.
pub fn closed_form_pinf(element: &HermitianMatrix, rho: &DensityMatrix, epsilon: f64) -> Result<AttackResult> {
    check_dims(element, rho)?;
    check_budget(epsilon)?;
    closed_form_guard(rho, NormOrder::Infinity, epsilon)?;
    let alpha = element.eig().eigenvalues;
    let tau: Vec<f64> = balanced_signs(&alpha).into_iter().map(|s| s * epsilon).collect();
    let lambda = perturb_in_eigenbasis(rho, element, &tau)?;
    Ok(finish(
        element,
        rho,
        lambda,
        NormOrder::Infinity,
        epsilon,
        SolverUsed::ClosedFormPinf,
        true,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalOptions {
    /// Defaults to `0.5/‖Π_c − Tr(Π_c)/d·I‖_∞`.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// Upper limit; the inner loop stops once an iterate stops moving.
    pub dykstra_cycles: usize,
    /// Stop once successive iterates differ by less than this (max entry).
    pub tol: f64,
}

impl Default for NumericalOptions {
    fn default() -> Self {
        NumericalOptions {
            step_size: None,
            max_iters: 500,
            dykstra_cycles: 1000,
            tol: 1e-13,
        }
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Threshold `a` with `Σ (v_i − a)⁺ = mass`, for `mass > 0`.
fn upper_threshold(v: &[f64], mass: f64) -> f64 {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut a = u[0] - mass;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - mass) / (j + 1) as f64;
        if uj > t {
            a = t;
        }
    }
    a
}

/// Projection onto `{u : Σu = 0, ‖u‖_p ≤ ε}` for `Σv = 0`.
fn project_traceless_ball(v: &[f64], p: NormOrder, epsilon: f64) -> Vec<f64> {
    match p {
        NormOrder::One => {
            if v.iter().map(|x| x.abs()).sum::<f64>() <= epsilon {
                return v.to_vec();
            }
            // Positive and negative parts each carry ε/2 at the boundary and
            // decouple into two one-sided thresholds.
            let a = upper_threshold(v, 0.5 * epsilon);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let b = -upper_threshold(&neg, 0.5 * epsilon);
            v.iter().map(|&x| (x - a).max(0.0) - (b - x).max(0.0)).collect()
        }
        NormOrder::Infinity => {
            if v.iter().all(|x| x.abs() <= epsilon) {
                return v.to_vec();
            }
            let sum_at = |mu: f64| v.iter().map(|&x| (x - mu).clamp(-epsilon, epsilon)).sum::<f64>();
            let (mut lo, mut hi) = (
                v.iter().copied().fold(f64::INFINITY, f64::min) - epsilon,
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + epsilon,
            );
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sum_at(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mu = 0.5 * (lo + hi);
            v.iter().map(|&x| (x - mu).clamp(-epsilon, epsilon)).collect()
        }
    }
}

/// Onto `{λ ⪰ 0, Tr λ = 1}`.
fn project_density(m: &HermitianMatrix) -> HermitianMatrix {
    let eig = m.eig();
    eig.with_eigenvalues(&project_simplex(&eig.eigenvalues))
}

/// Onto `{λ : Tr λ = 1, ‖λ − ρ‖_p ≤ ε}`.
fn project_ball(m: &HermitianMatrix, rho: &HermitianMatrix, p: NormOrder, epsilon: f64) -> HermitianMatrix {
    let d = m.dim();
    let diff = m - rho;
    let shift = diff.trace() / d as f64;
    let traceless = &diff - &HermitianMatrix::identity(d).scaled(shift);
    let eig = traceless.eig();
    let mut vals = eig.eigenvalues.clone();
    let mean = vals.iter().sum::<f64>() / d as f64;
    vals.iter_mut().for_each(|v| *v -= mean);
    rho + &eig.with_eigenvalues(&project_traceless_ball(&vals, p, epsilon))
}

/// Cyclic Dykstra onto the intersection of the density set and the ball,
/// followed by an exact repair: density projection, then a radial shrink
/// towards `ρ` (which stays in the convex density set).
fn project_feasible(
    y: &HermitianMatrix,
    rho: &DensityMatrix,
    p: NormOrder,
    epsilon: f64,
    cycles: usize,
) -> DensityMatrix {
    let d = y.dim();
    // The ball projection is already exact whenever it lands in the PSD cone.
    let direct = project_ball(y, rho.as_hermitian(), p, epsilon);
    if direct.eig().min() >= 0.0 {
        return DensityMatrix::from_hermitian_unchecked(direct);
    }
    let mut x = y.clone();
    let mut inc_a = HermitianMatrix::zeros(d);
    let mut inc_b = HermitianMatrix::zeros(d);
    for _ in 0..cycles {
        let a = project_density(&(&x + &inc_a));
        inc_a = &(&x + &inc_a) - &a;
        let next = project_ball(&(&a + &inc_b), rho.as_hermitian(), p, epsilon);
        inc_b = &(&a + &inc_b) - &next;
        let moved = (&next - &x).max_abs_entry();
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    let z = project_density(&x);
    let diff = &z - rho.as_hermitian();
    let dist = schatten_from_spectrum(&diff.eig().eigenvalues, p.schatten());
    let lambda = if dist > epsilon {
        rho.as_hermitian() + &diff.scaled(epsilon / dist)
    } else {
        z
    };
    DensityMatrix::from_hermitian_unchecked(lambda)
}

/// Projected gradient ascent for any dimension and either norm order.
pub fn numerical_inner_max(
    element: &HermitianMatrix,
    rho: &DensityMatrix,
    p: NormOrder,
    epsilon: f64,
    opts: &NumericalOptions,
) -> Result<AttackResult> {
    check_dims(element, rho)?;
    check_budget(epsilon)?;
    let d = rho.dim();
    let grad = element - &HermitianMatrix::identity(d).scaled(element.trace() / d as f64);
    let scale = grad.eig().eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if epsilon == 0.0 || scale <= TIE_TOL {
        return Ok(trivial(element, rho, p, epsilon));
    }
    // The identity component of `Π_c` is invisible on the trace-one set, so
    // the default step is scaled by the traceless part.
    let step = opts.step_size.unwrap_or(0.5 / scale);
    let objective = |l: &DensityMatrix| trace_inner_unchecked(element.matrix(), l.matrix());

    let mut current = rho.clone();
    let mut best = rho.clone();
    let mut best_obj = objective(rho);
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let y = current.as_hermitian() - &grad.scaled(step);
        let next = project_feasible(&y, rho, p, epsilon, opts.dykstra_cycles);
        let obj = objective(&next);
        if obj < best_obj {
            best_obj = obj;
            best = next.clone();
        }
        let moved = (next.as_hermitian() - current.as_hermitian()).max_abs_entry();
        current = next;
        if moved < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(finish(element, rho, best, p, epsilon, SolverUsed::Numerical, converged))
}

pub(crate) type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(s: f64, x: Vec3, y: Vec3) -> Vec3 {
    [y[0] + s * x[0], y[1] + s * x[1], y[2] + s * x[2]]
}

/// Unit vector orthogonal to `n`.
fn orthogonal_unit(n: Vec3) -> Vec3 {
    let trial = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let v = axpy(-dot(trial, n), n, trial);
    let l = norm3(v);
    [v[0] / l, v[1] / l, v[2] / l]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Maximiser of `w·r` over `{|r| ≤ 1} ∩ {|r − c| ≤ radius}` for `|c| ≤ 1`.
///
/// Either one ball's own maximiser lies in the other ball, or both
/// constraints are active and the optimum lies on the circle where the two
/// spheres meet.
pub(crate) fn qubit_support_point(c: Vec3, radius: f64, w: Vec3) -> Vec3 {
    let wn = norm3(w);
    if wn == 0.0 || radius == 0.0 {
        return c;
    }
    let u = [w[0] / wn, w[1] / wn, w[2] / wn];
    let in_ball = axpy(radius, u, c);
    if norm3(in_ball) <= 1.0 {
        return in_ball;
    }
    let dist = norm3(axpy(-1.0, c, u));
    if dist <= radius {
        return u;
    }
    let cn = norm3(c);
    // Both spheres active: cn > 0 here, since concentric balls nest.
    let chat = [c[0] / cn, c[1] / cn, c[2] / cn];
    let h = ((1.0 + cn * cn - radius * radius) / (2.0 * cn)).clamp(-1.0, 1.0);
    let ring = (1.0 - h * h).max(0.0).sqrt();
    let perp = axpy(-dot(u, chat), chat, u);
    let pn = norm3(perp);
    let dir = if pn > 1e-300 {
        [perp[0] / pn, perp[1] / pn, perp[2] / pn]
    } else {
        orthogonal_unit(chat)
    };
    axpy(ring, dir, [h * chat[0], h * chat[1], h * chat[2]])
}

/// Bloch vectors `(a0, a)` of `Π = a0·I + a·σ` and `r` of `ρ`.
pub(crate) fn qubit_frame(element: &HermitianMatrix, rho: &DensityMatrix) -> (Vec3, Vec3) {
    let (_, a) = bloch_components(element.matrix());
    let (_, half_r) = bloch_components(rho.matrix());
    (a, [2.0 * half_r[0], 2.0 * half_r[1], 2.0 * half_r[2]])
}

fn density_from_bloch(r: Vec3) -> DensityMatrix {
    let l = norm3(r);
    let r = if l > 1.0 { [r[0] / l, r[1] / l, r[2] / l] } else { r };
    DensityMatrix::from_bloch(r).expect("unit ball")
}

/// Exact qubit solver for any budget.
pub fn qubit_exact(element: &HermitianMatrix, rho: &DensityMatrix, p: NormOrder, epsilon: f64) -> Result<AttackResult> {
    check_dims(element, rho)?;
    check_budget(epsilon)?;
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let (a, r) = qubit_frame(element, rho);
    if epsilon == 0.0 || norm3(a) <= TIE_TOL {
        return Ok(trivial(element, rho, p, epsilon));
    }
    let radius = AttackSpec {
        p,
        epsilon,
        solver: Solver::Auto,
    }
    .bloch_radius();
    let star = qubit_support_point(r, radius, [-a[0], -a[1], -a[2]]);
    Ok(finish(element, rho, density_from_bloch(star), p, epsilon, SolverUsed::QubitExact, true))
}

/// Points of the sphere `center + s·(cos φ n + sin φ (cos β e1 + sin β e2))`
/// with `φ ∈ [φ0, φ1]`, spaced by about `h` in arc length.
fn sphere_band(center: Vec3, s: f64, n: Vec3, phi: (f64, f64), h: f64, mut visit: impl FnMut(Vec3)) {
    let e1 = orthogonal_unit(n);
    let e2 = cross(n, e1);
    let steps = (((phi.1 - phi.0) * s) / h).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let ph = phi.0 + (phi.1 - phi.0) * i as f64 / steps as f64;
        let (sp, cp) = ph.sin_cos();
        let ring = ((2.0 * PI * s * sp) / h).ceil().max(1.0) as usize;
        for j in 0..ring {
            let (sb, cb) = (2.0 * PI * j as f64 / ring as f64).sin_cos();
            let mut p = center;
            for k in 0..3 {
                p[k] += s * (cp * n[k] + sp * (cb * e1[k] + sb * e2[k]));
            }
            visit(p);
        }
    }
}

/// Grid search over the boundary of the qubit feasible set.
///
/// A linear objective on a compact convex set peaks on its boundary, which
/// here is the part of the budget sphere inside the Bloch ball plus the
/// part of the Bloch sphere inside the budget ball. Both pieces are
/// enumerated at arc spacing `resolution`.
pub fn bloch_brute_force(
    element: &HermitianMatrix,
    rho: &DensityMatrix,
    p: NormOrder,
    epsilon: f64,
    resolution: f64,
) -> Result<AttackResult> {
    check_dims(element, rho)?;
    check_budget(epsilon)?;
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    if !(resolution > 0.0) {
        return Err(Error::domain("grid resolution must be positive"));
    }
    let (a, c) = qubit_frame(element, rho);
    let radius = match p {
        NormOrder::One => epsilon,
        NormOrder::Infinity => 2.0 * epsilon,
    };
    let cn = norm3(c);
    let axis = if cn > 1e-15 { [c[0] / cn, c[1] / cn, c[2] / cn] } else { [0.0, 0.0, 1.0] };

    let mut best = c;
    let mut best_val = -dot(a, c);
    let mut consider = |r: Vec3| {
        if norm3(r) <= 1.0 + 1e-12 && norm3(axpy(-1.0, c, r)) <= radius * (1.0 + 1e-12) {
            let v = -dot(a, r);
            if v > best_val {
                best_val = v;
                best = r;
            }
        }
    };
    if radius > 0.0 {
        // Budget sphere inside the Bloch ball: |c + R u|² ≤ 1.
        let k = if cn > 1e-15 {
            (1.0 - cn * cn - radius * radius) / (2.0 * cn * radius)
        } else if radius <= 1.0 {
            1.0
        } else {
            -2.0
        };
        if k >= -1.0 {
            sphere_band(c, radius, axis, (k.min(1.0).acos(), PI), resolution, &mut consider);
        }
        // Bloch sphere inside the budget ball: |u − c|² ≤ R².
        let k = if cn > 1e-15 {
            (1.0 + cn * cn - radius * radius) / (2.0 * cn)
        } else if radius >= 1.0 {
            -1.0
        } else {
            2.0
        };
        if k <= 1.0 {
            sphere_band([0.0; 3], 1.0, axis, (0.0, k.max(-1.0).acos()), resolution, &mut consider);
        }
    }
    Ok(finish(element, rho, density_from_bloch(best), p, epsilon, SolverUsed::BruteForce, true))
}

/// Worst case for a single POVM element, dispatching on `spec.solver`.
pub fn attack_element(element: &HermitianMatrix, rho: &DensityMatrix, spec: &AttackSpec) -> Result<AttackResult> {
    spec.validate()?;
    check_dims(element, rho)?;
    let (p, eps) = (spec.p, spec.epsilon);
    if eps == 0.0 {
        return Ok(trivial(element, rho, p, eps));
    }
    let closed = |el: &HermitianMatrix| match p {
        NormOrder::One => closed_form_p1(el, rho, eps),
        NormOrder::Infinity => closed_form_pinf(el, rho, eps),
    };
    match spec.solver {
        Solver::ClosedForm => closed(element),
        Solver::Numerical => numerical_inner_max(element, rho, p, eps, &NumericalOptions::default()),
        Solver::BruteForce => bloch_brute_force(element, rho, p, eps, DEFAULT_RESOLUTION),
        Solver::Auto => {
            if eps <= AttackSpec::closed_form_limit(p, rho.min_eigenvalue()) {
                closed(element)
            } else if rho.dim() == 2 {
                qubit_exact(element, rho, p, eps)
            } else {
                numerical_inner_max(element, rho, p, eps, &NumericalOptions::default())
            }
        }
    }
}

/// Adversarial loss of class `c` under `povm`.
pub fn adversarial_loss(povm: &Povm, rho: &DensityMatrix, c: usize, spec: &AttackSpec) -> Result<AttackResult> {
    attack_element(povm.element(c)?, rho, spec)
}
