//! Min-max training of POVMs against a fixed attack.
//!
//! The adversarial empirical risk is a maximum of functions linear in `Π`,
//! so holding each worst-case state `λ*_n` fixed yields a subgradient. Steps
//! are followed by a projection back onto the POVM set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_element, AttackSpec};
use crate::embed::{embed, random_unitary, Dataset, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::qmat::{completeness_deviation, validate_povm, DensityMatrix, HermitianMatrix, Povm, POVM_TOL};
use crate::rng::{self, domain};

const PROJECTION_CYCLES: usize = 200;
/// Largest negative eigenvalue repaired by mixing after the Dykstra cycles.
const REPAIR_LIMIT: f64 = 1e-6;

/// Euclidean projection onto `{Π_c ⪰ 0, Σ_c Π_c = I}` by cyclic Dykstra
/// between eigenvalue clipping and the affine correction, followed by a
/// small mix with `I/K` that removes residual negativity exactly.
pub fn project_povm(raw: Vec<HermitianMatrix>) -> Result<Povm> {
    let k = raw.len();
    let d = raw.first().ok_or_else(|| Error::domain("a POVM needs at least one element"))?.dim();
    for e in &raw {
        if e.dim() != d {
            return Err(Error::DimensionMismatch(d, e.dim()));
        }
    }
    if let Ok(p) = validate_povm(raw.clone()) {
        return Ok(p);
    }
    let clip = |m: &HermitianMatrix| m.eig().map_eigenvalues(|a| a.max(0.0));
    let affine = |xs: &[HermitianMatrix]| -> Vec<HermitianMatrix> {
        let sum = xs.iter().fold(HermitianMatrix::zeros(d), |acc, x| &acc + x);
        let excess = (&sum - &HermitianMatrix::identity(d)).scaled(1.0 / k as f64);
        xs.iter().map(|x| x - &excess).collect()
    };
    let mut x = raw;
    let mut inc_p = vec![HermitianMatrix::zeros(d); k];
    let mut inc_q = vec![HermitianMatrix::zeros(d); k];
    let mut violation = f64::INFINITY;
    for _ in 0..PROJECTION_CYCLES {
        let shifted: Vec<HermitianMatrix> = x.iter().zip(&inc_p).map(|(a, b)| a + b).collect();
        let a: Vec<HermitianMatrix> = shifted.iter().map(clip).collect();
        inc_p = shifted.iter().zip(&a).map(|(s, y)| s - y).collect();
        let shifted: Vec<HermitianMatrix> = a.iter().zip(&inc_q).map(|(a, b)| a + b).collect();
        x = affine(&shifted);
        inc_q = shifted.iter().zip(&x).map(|(s, y)| s - y).collect();
        violation = x.iter().map(|e| (-e.min_eigenvalue()).max(0.0)).fold(0.0, f64::max);
        // The mixing repair below absorbs anything this small exactly.
        if violation <= 1e-11 {
            break;
        }
    }
    if violation > REPAIR_LIMIT {
        return Err(Error::NotConverged(format!(
            "POVM projection left a negative eigenvalue of {violation:.3e} after {PROJECTION_CYCLES} cycles"
        )));
    }
    if violation > 0.0 {
        let t = violation * k as f64 / (1.0 + violation * k as f64);
        let mixed = HermitianMatrix::identity(d).scaled(t / k as f64);
        x = x.iter().map(|e| &e.scaled(1.0 - t) + &mixed).collect();
    }
    let dev = completeness_deviation(&x);
    if dev > POVM_TOL {
        return Err(Error::NotConverged(format!("POVM completeness off by {dev:.3e}")));
    }
    validate_povm(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub attack: AttackSpec,
    #[serde(default = "defaults::num_classes")]
    pub num_classes: usize,
    #[serde(default = "defaults::max_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default = "defaults::step_size")]
    pub step_size: f64,
    #[serde(default = "defaults::num_restarts")]
    pub num_restarts: usize,
    pub seed: u64,
    #[serde(default = "defaults::convergence_tol")]
    pub convergence_tol: f64,
}

mod defaults {
    pub fn num_classes() -> usize {
        2
    }
    pub fn max_outer_iters() -> usize {
        100
    }
    pub fn step_size() -> f64 {
        0.1
    }
    pub fn num_restarts() -> usize {
        4
    }
    pub fn convergence_tol() -> f64 {
        1e-6
    }
}

impl TrainConfig {
    pub fn new(attack: AttackSpec, seed: u64) -> Self {
        TrainConfig {
            attack,
            num_classes: defaults::num_classes(),
            max_outer_iters: defaults::max_outer_iters(),
            step_size: defaults::step_size(),
            num_restarts: defaults::num_restarts(),
            seed,
            convergence_tol: defaults::convergence_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::domain("step size must be positive"));
        }
        if self.max_outer_iters < 1 || self.num_restarts < 1 {
            return Err(Error::domain("need at least one outer iteration and one restart"));
        }
        if self.num_classes < 2 {
            return Err(Error::domain("need K >= 2 classes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub povm: Povm,
    /// Adversarial training risk after each outer iteration of the best
    /// restart, starting with the initial POVM.
    pub curve: Vec<f64>,
    pub best_restart: usize,
    /// Final risk of every restart.
    pub restart_risks: Vec<f64>,
    /// The best restart stopped on step size rather than the iteration cap.
    pub converged: bool,
}

/// Adversarial empirical risk and its subgradient with respect to each `Π_c`.
fn objective(povm: &Povm, states: &[DensityMatrix], classes: &[usize], attack: &AttackSpec) -> Result<(f64, Vec<HermitianMatrix>)> {
    let d = povm.dim();
    let t = states.len() as f64;
    let mut grad = vec![HermitianMatrix::zeros(d); povm.num_classes()];
    let mut risk = 0.0;
    for (rho, &c) in states.iter().zip(classes) {
        let r = attack_element(&povm.elements()[c], rho, attack)?;
        risk += r.loss;
        grad[c] = &grad[c] - &r.lambda_star.as_hermitian().scaled(1.0 / t);
    }
    Ok((risk / t, grad))
}

/// Projective measurement in the eigenbasis of the class-weighted mean
/// states, each eigenvector assigned to its most likely class.
fn helstrom_start(states: &[DensityMatrix], classes: &[usize], k: usize) -> Povm {
    let d = states[0].dim();
    let t = states.len() as f64;
    let mut weighted = vec![HermitianMatrix::zeros(d); k];
    for (rho, &c) in states.iter().zip(classes) {
        weighted[c] = &weighted[c] + &rho.as_hermitian().scaled(1.0 / t);
    }
    let basis_of = if k == 2 {
        &weighted[0] - &weighted[1]
    } else {
        weighted.iter().fold(HermitianMatrix::zeros(d), |acc, w| &acc + w)
    };
    let eig = basis_of.eig();
    let mut els = vec![HermitianMatrix::zeros(d); k];
    for j in 0..d {
        let proj = HermitianMatrix::outer(&eig.basis.column(j).into_owned());
        let best = (0..k)
            .max_by(|&a, &b| {
                let fa = crate::qmat::trace_inner_unchecked(weighted[a].matrix(), proj.matrix());
                let fb = crate::qmat::trace_inner_unchecked(weighted[b].matrix(), proj.matrix());
                fa.total_cmp(&fb).then(b.cmp(&a))
            })
            .expect("k >= 1");
        els[best] = &els[best] + &proj;
    }
    Povm::from_unchecked(els)
}

fn haar_projective(d: usize, k: usize, seed: u64, restart: usize) -> Povm {
    let mut r = rng::substream(seed, &[domain::TRAIN_RESTART, restart as u64]);
    let u = random_unitary(d, &mut r);
    let mut els = vec![HermitianMatrix::zeros(d); k];
    for j in 0..d {
        let proj = HermitianMatrix::outer(&u.column(j).into_owned());
        els[j % k] = &els[j % k] + &proj;
    }
    Povm::from_unchecked(els)
}

struct RestartResult {
    povm: Povm,
    curve: Vec<f64>,
    converged: bool,
}

fn descend(start: Povm, states: &[DensityMatrix], classes: &[usize], config: &TrainConfig) -> Result<RestartResult> {
    let mut povm = start;
    let (mut risk, mut grad) = objective(&povm, states, classes, &config.attack)?;
    let mut curve = vec![risk];
    let mut step = config.step_size;
    let mut converged = false;
    for _ in 0..config.max_outer_iters {
        let raw: Vec<HermitianMatrix> = povm
            .elements()
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - &g.scaled(step))
            .collect();
        let cand = project_povm(raw)?;
        let (r, g) = objective(&cand, states, classes, &config.attack)?;
        if r < risk {
            let gained = risk - r;
            povm = cand;
            risk = r;
            grad = g;
            if gained < config.convergence_tol {
                step *= 0.5;
            }
        } else {
            step *= 0.5;
        }
        curve.push(risk);
        if step < config.convergence_tol * config.step_size {
            converged = true;
            break;
        }
    }
    Ok(RestartResult { povm, curve, converged })
}

/// Minimises the adversarial empirical risk over POVMs.
///
/// Restart 0 starts from the Helstrom-like projective measurement, restart 1
/// from the uniform POVM and the rest from Haar-random projective
/// measurements. The restart with the lowest final risk is returned.
pub fn adversarial_train(dataset: &Dataset, embedding: &EmbeddingSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    let k = config.num_classes;
    if let Some(s) = dataset.samples.iter().find(|s| s.c >= k) {
        return Err(Error::domain(format!("class {} out of range for K = {k}", s.c)));
    }
    let states: Vec<DensityMatrix> = dataset
        .samples
        .iter()
        .map(|s| embed(embedding, s.x))
        .collect::<Result<_>>()?;
    let classes: Vec<usize> = dataset.samples.iter().map(|s| s.c).collect();
    let d = states[0].dim();

    let results: Vec<RestartResult> = (0..config.num_restarts)
        .into_par_iter()
        .map(|i| {
            let start = match i {
                0 => helstrom_start(&states, &classes, k),
                1 => Povm::uniform(d, k),
                _ => haar_projective(d, k, config.seed, i),
            };
            descend(start, &states, &classes, config)
        })
        .collect::<Result<_>>()?;
    let restart_risks: Vec<f64> = results.iter().map(|r| *r.curve.last().expect("nonempty")).collect();
    let best_restart = (0..results.len())
        .min_by(|&a, &b| restart_risks[a].total_cmp(&restart_risks[b]).then(a.cmp(&b)))
        .expect("at least one restart");
    let best = results.into_iter().nth(best_restart).expect("index in range");
    Ok(TrainOutcome {
        povm: best.povm,
        curve: best.curve,
        best_restart,
        restart_risks,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::Solver;
    use crate::embed::{random_hermitian, sample_dataset, DataSpec, Sample};
    use crate::estimate::empirical_risk;
    use crate::qmat::NormOrder;
    use proptest::prelude::*;

    #[test]
    fn feasible_input_unchanged() {
        let p = Povm::computational(3);
        let out = project_povm(p.elements().to_vec()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn doubled_identity_splits_evenly() {
        let id = HermitianMatrix::identity(2);
        let out = project_povm(vec![id.clone(), id.clone()]).unwrap();
        for e in out.elements() {
            assert!((e - &id.scaled(0.5)).max_abs_entry() < 1e-12);
        }
    }

    #[test]
    fn infeasible_pair_projects_to_valid_povm() {
        let id = HermitianMatrix::identity(2);
        let out = project_povm(vec![id.scaled(1.5), id.scaled(-0.5)]).unwrap();
        assert!(completeness_deviation(out.elements()) <= POVM_TOL);
        for e in out.elements() {
            assert!(e.min_eigenvalue() >= -1e-9);
        }
        assert!((&out.elements()[0] - &id).max_abs_entry() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projection_always_feasible(seed in 0u64..100_000, d in 2usize..=3, k in 2usize..=3) {
            let mut r = rng::substream(seed, &[11]);
            let raw: Vec<HermitianMatrix> = (0..k).map(|_| random_hermitian(d, &mut r)).collect();
            let out = project_povm(raw).unwrap();
            prop_assert!(completeness_deviation(out.elements()) <= POVM_TOL);
            for e in out.elements() {
                prop_assert!(e.min_eigenvalue() >= -1e-9);
            }
        }
    }

    fn orthogonal_toy() -> (Dataset, EmbeddingSpec) {
        // q = 0 and θ = 0 embed x as R_X(2x)|0>; x = 0 and x = π/4 give
        // the orthogonal states |0> and −i|1> (x = π/4).
        let spec = EmbeddingSpec {
            theta: [0.0; 3],
            q: 0.0,
            dim: 2,
        };
        let x1 = std::f64::consts::FRAC_PI_4;
        let ds = Dataset {
            samples: vec![
                Sample { index: 0, x: 0.0, c: 0 },
                Sample { index: 0, x: 0.0, c: 0 },
                Sample { index: 1, x: x1, c: 1 },
            ],
        };
        (ds, spec)
    }

    #[test]
    fn clean_training_separates_orthogonal_states() {
        let (ds, spec) = orthogonal_toy();
        let cfg = TrainConfig::new(AttackSpec::new(NormOrder::One, 0.0).unwrap(), 1);
        let out = adversarial_train(&ds, &spec, &cfg).unwrap();
        assert!(*out.curve.last().unwrap() <= 0.01);
        // From the uniform start, descent alone must also get there.
        let uniform_only = out.restart_risks[1];
        assert!(uniform_only <= 0.01, "{uniform_only}");
    }

    #[test]
    fn curves_are_non_increasing_and_povms_feasible() {
        let data = DataSpec::default();
        let ds = sample_dataset(&data, 24, 5).unwrap();
        let spec = EmbeddingSpec::default();
        let attack = AttackSpec::new(NormOrder::One, 0.08).unwrap();
        let cfg = TrainConfig {
            max_outer_iters: 30,
            ..TrainConfig::new(attack, 2)
        };
        let out = adversarial_train(&ds, &spec, &cfg).unwrap();
        for w in out.curve.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(out.curve.last() <= out.curve.first());
        assert!(validate_povm(out.povm.elements().to_vec()).is_ok());
        let direct = empirical_risk(&out.povm, &ds, &spec, Some(&attack)).unwrap();
        assert!((direct - out.curve.last().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn adversarial_training_beats_clean_training_under_attack() {
        let data = DataSpec::default();
        let ds = sample_dataset(&data, 30, 9).unwrap();
        let spec = EmbeddingSpec::default();
        let attack = AttackSpec::new(NormOrder::One, 0.08).unwrap();
        let clean_cfg = TrainConfig::new(AttackSpec::new(NormOrder::One, 0.0).unwrap(), 3);
        let adv_cfg = TrainConfig::new(attack, 3);
        let clean_model = adversarial_train(&ds, &spec, &clean_cfg).unwrap().povm;
        let adv_model = adversarial_train(&ds, &spec, &adv_cfg).unwrap().povm;
        let r_clean = empirical_risk(&clean_model, &ds, &spec, Some(&attack)).unwrap();
        let r_adv = empirical_risk(&adv_model, &ds, &spec, Some(&attack)).unwrap();
        assert!(r_adv <= r_clean + adv_cfg.convergence_tol, "{r_adv} vs {r_clean}");
    }

    #[test]
    fn single_sample_reaches_zero_risk() {
        let spec = EmbeddingSpec::default();
        let ds = Dataset {
            samples: vec![Sample { index: 0, x: 0.3, c: 1 }],
        };
        let attack = AttackSpec::new(NormOrder::Infinity, 0.02).unwrap().with_solver(Solver::Auto);
        let out = adversarial_train(&ds, &spec, &TrainConfig::new(attack, 0)).unwrap();
        // Π_1 = I is attack-proof for a lone class-1 sample.
        assert!(*out.curve.last().unwrap() < 1e-3, "{:?}", out.curve.last());
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = EmbeddingSpec::default();
        let cfg = TrainConfig::new(AttackSpec::new(NormOrder::One, 0.0).unwrap(), 0);
        assert!(adversarial_train(&Dataset::default(), &spec, &cfg).is_err());
        let bad = TrainConfig { step_size: 0.0, ..cfg };
        let ds = Dataset {
            samples: vec![Sample { index: 0, x: 0.0, c: 0 }],
        };
        assert!(adversarial_train(&ds, &spec, &bad).is_err());
    }
}
