//! Risks, generalization errors and Rademacher complexities.
//!
//! Inputs live on a quantisation grid, so every loss the estimators need is
//! a lookup into a [`LossTable`] built once per (POVM, attack) pair.
//! Population risks are exact weighted sums over the grid; only the
//! dataset draws and sign vectors are Monte Carlo.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_element, dot, norm3, qubit_frame, qubit_support_point, AttackSpec, Vec3};
use crate::bounds::{confidence_term, renyi2_mi, LogBase};
use crate::embed::{embed, embed_grid, quantized_prior, sample_dataset_with, DataSpec, Dataset, EmbeddingSpec, QuantizedPrior};
use crate::error::{Error, Result};
use crate::qmat::{trace_inner_unchecked, CMatrix, DensityMatrix, HermitianMatrix, NormOrder, Povm};
use crate::rng::{self, domain};
use crate::stats::{mean_stderr, MeanEstimate};
use crate::train::project_povm;

/// Embedded states and prior weights for every grid point.
#[derive(Debug, Clone)]
pub struct EmbeddedGrid {
    pub embedding: EmbeddingSpec,
    pub data: DataSpec,
    pub states: Vec<DensityMatrix>,
    pub prior: QuantizedPrior,
}

impl EmbeddedGrid {
    pub fn new(embedding: EmbeddingSpec, data: DataSpec) -> Result<Self> {
        Ok(EmbeddedGrid {
            states: embed_grid(&embedding, &data)?,
            prior: quantized_prior(&data)?,
            embedding,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim
    }

    /// Smallest eigenvalue over all embedded grid states.
    pub fn floor(&self) -> f64 {
        self.states
            .iter()
            .map(DensityMatrix::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Rényi-2 mutual information of the marginal ensemble, in bits.
    pub fn mutual_information(&self) -> Result<f64> {
        renyi2_mi(&self.prior.marginal, &self.states)
    }

    /// `num` datasets of size `t`; dataset `i` comes from its own substream.
    pub fn draw_datasets(&self, t: usize, num: usize, seed: u64) -> Result<Vec<Dataset>> {
        (0..num)
            .map(|i| {
                let mut r = rng::substream(seed, &[domain::DATASET, t as u64, i as u64]);
                sample_dataset_with(&self.data, t, &mut r)
            })
            .collect()
    }
}

/// Per-sample loss `ℓ(Π, ρ(x_i), c)` (adversarial if an attack is given).
#[derive(Debug, Clone)]
pub struct LossTable {
    k: usize,
    losses: Vec<f64>,
}

impl LossTable {
    pub fn build(grid: &EmbeddedGrid, povm: &Povm, attack: Option<&AttackSpec>) -> Result<Self> {
        if povm.dim() != grid.dim() {
            return Err(Error::DimensionMismatch(povm.dim(), grid.dim()));
        }
        let k = povm.num_classes();
        if k != grid.data.num_classes {
            return Err(Error::DimensionMismatch(k, grid.data.num_classes));
        }
        let rows: Vec<Vec<f64>> = grid
            .states
            .par_iter()
            .map(|rho| {
                (0..k)
                    .map(|c| sample_loss(&povm.elements()[c], rho, attack))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(LossTable {
            k,
            losses: rows.concat(),
        })
    }

    pub fn loss(&self, index: usize, c: usize) -> f64 {
        self.losses[index * self.k + c]
    }

    /// `Σ_{x,c} P(x, c)·ℓ(x, c)`.
    pub fn population(&self, prior: &QuantizedPrior) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.k {
            for (i, p) in prior.conditional[c].iter().enumerate() {
                acc += p * self.loss(i, c);
            }
        }
        acc / self.k as f64
    }

    pub fn empirical(&self, dataset: &Dataset) -> Result<f64> {
        if dataset.is_empty() {
            return Err(Error::domain("empirical risk of an empty dataset"));
        }
        let total: f64 = dataset.samples.iter().map(|s| self.loss(s.index, s.c)).sum();
        Ok(total / dataset.len() as f64)
    }
}

fn sample_loss(element: &HermitianMatrix, rho: &DensityMatrix, attack: Option<&AttackSpec>) -> Result<f64> {
    match attack {
        None => Ok(1.0 - trace_inner_unchecked(element.matrix(), rho.matrix())),
        Some(a) => Ok(attack_element(element, rho, a)?.loss),
    }
}

/// Mean (adversarial) loss over the dataset, embedding each sample directly.
pub fn empirical_risk(
    povm: &Povm,
    dataset: &Dataset,
    embedding: &EmbeddingSpec,
    attack: Option<&AttackSpec>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::domain("empirical risk of an empty dataset"));
    }
    let mut total = 0.0;
    for s in &dataset.samples {
        let rho = embed(embedding, s.x)?;
        total += sample_loss(povm.element(s.c)?, &rho, attack)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Exact expected (adversarial) loss over the quantised distribution.
pub fn population_risk(
    povm: &Povm,
    embedding: &EmbeddingSpec,
    data: &DataSpec,
    attack: Option<&AttackSpec>,
) -> Result<f64> {
    let grid = EmbeddedGrid::new(*embedding, *data)?;
    Ok(LossTable::build(&grid, povm, attack)?.population(&grid.prior))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub empirical: f64,
    pub population: f64,
    pub gen_error: f64,
    pub adversarial: bool,
    /// Test-time attack (the population side).
    pub attack: Option<AttackSpec>,
    pub mc_stderr: f64,
}

pub fn gen_error(
    povm: &Povm,
    dataset: &Dataset,
    embedding: &EmbeddingSpec,
    data: &DataSpec,
    attack: Option<&AttackSpec>,
) -> Result<RiskReport> {
    gen_error_mismatched(povm, dataset, embedding, data, attack, attack)
}

/// `L_{test}(Π) − L̂_{train}(Π, 𝒯)`.
pub fn gen_error_mismatched(
    povm: &Povm,
    dataset: &Dataset,
    embedding: &EmbeddingSpec,
    data: &DataSpec,
    train: Option<&AttackSpec>,
    test: Option<&AttackSpec>,
) -> Result<RiskReport> {
    let empirical = empirical_risk(povm, dataset, embedding, train)?;
    let population = population_risk(povm, embedding, data, test)?;
    Ok(RiskReport {
        empirical,
        population,
        gen_error: population - empirical,
        adversarial: train.is_some() || test.is_some(),
        attack: test.copied(),
        mc_stderr: 0.0,
    })
}

/// Monte Carlo summary of `L_test − L̂_train` over dataset draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenErrorSummary {
    pub signed: MeanEstimate,
    pub absolute: MeanEstimate,
}

/// Generalization error of a fixed POVM for each pre-drawn dataset.
pub fn gen_errors_fixed(
    train: &LossTable,
    test: &LossTable,
    prior: &QuantizedPrior,
    datasets: &[Dataset],
) -> Result<Vec<f64>> {
    let population = test.population(prior);
    datasets
        .iter()
        .map(|ds| Ok(population - train.empirical(ds)?))
        .collect()
}

pub fn summarize_gen_errors(errors: &[f64]) -> GenErrorSummary {
    let abs: Vec<f64> = errors.iter().map(|g| g.abs()).collect();
    GenErrorSummary {
        signed: mean_stderr(errors),
        absolute: mean_stderr(&abs),
    }
}

/// Which inner supremum over POVMs was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RademacherMode {
    /// Closed form for `K = 2` without an adversary.
    ExactBinary,
    /// Bloch-sphere multistart for qubit binary POVMs against an adversary.
    QubitMultistart,
    /// Projected ascent over general POVMs.
    Multistart,
}

impl RademacherMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RademacherMode::ExactBinary => "exact_binary",
            RademacherMode::QubitMultistart => "qubit_multistart",
            RademacherMode::Multistart => "multistart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub stderr: f64,
    pub mode: RademacherMode,
    /// Sign vectors per dataset (`2^T` when enumerated).
    pub num_sigma: usize,
    pub exhaustive_sigma: bool,
    pub num_datasets: usize,
    pub epsilon: f64,
    pub p: Option<NormOrder>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmaOptions {
    /// Enumerate all sign vectors when `T` is at most this.
    pub exhaustive_max_t: usize,
    /// Sampled sign vectors per dataset otherwise.
    pub num_sigma: usize,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            exhaustive_max_t: 16,
            num_sigma: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultistartOptions {
    pub random_starts: usize,
    /// Best screened starts refined by ascent.
    pub refine: usize,
    pub ascent_iters: usize,
    /// Outer iterations of the general POVM ascent.
    pub povm_iters: usize,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        MultistartOptions {
            random_starts: 16,
            refine: 2,
            ascent_iters: 60,
            povm_iters: 200,
        }
    }
}

/// Sign vectors for one dataset: all `2^T` in binary order, or sampled in
/// antithetic pairs `(σ, −σ)`. Pairing keeps the estimate unbiased and
/// cancels the `Σσ_n` term that a loss offset common to all samples would
/// otherwise add to the variance.
fn sign_vectors(t: usize, opts: &SigmaOptions, rng: &mut rng::Rng) -> (Vec<Vec<f64>>, bool) {
    if t <= opts.exhaustive_max_t {
        let all = (0u64..1 << t)
            .map(|b| (0..t).map(|n| if b >> n & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
        (all, true)
    } else {
        let mut sampled = Vec::with_capacity(opts.num_sigma + 1);
        while sampled.len() < opts.num_sigma {
            let s: Vec<f64> = (0..t).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            sampled.push(s.iter().map(|x| -x).collect());
            sampled.push(s);
        }
        sampled.truncate(opts.num_sigma);
        (sampled, false)
    }
}

fn sigma_rng(seed: u64, t: usize, dataset: usize) -> rng::Rng {
    rng::substream(seed, &[domain::SIGMA, t as u64, dataset as u64])
}

/// `T · sup_{0 ⪯ Π_0 ⪯ I} Σ σ_n ℓ(Π, ρ_n, c_n)` for `K = 2`: the constant
/// `Σ_{c_n = 0} σ_n` plus the positive part of the spectrum of
/// `Σ_{c_n = 1} σ_n ρ_n − Σ_{c_n = 0} σ_n ρ_n`.
fn binary_sup(states: &[&CMatrix], classes: &[usize], sigma: &[f64]) -> f64 {
    let d = states.first().map_or(1, |s| s.nrows());
    let mut acc = CMatrix::zeros(d, d);
    let mut constant = 0.0;
    for ((rho, &c), &s) in states.iter().zip(classes).zip(sigma) {
        if c == 0 {
            constant += s;
            acc.zip_apply(rho, |a, r| *a -= r * s);
        } else {
            acc.zip_apply(rho, |a, r| *a += r * s);
        }
    }
    let positive: f64 = HermitianMatrix::symmetrized(acc)
        .eig()
        .eigenvalues
        .iter()
        .map(|a| a.max(0.0))
        .sum();
    constant + positive
}

fn check_binary(grid: &EmbeddedGrid) -> Result<()> {
    if grid.data.num_classes != 2 {
        return Err(Error::Unsupported(format!(
            "exact binary Rademacher needs K = 2, got K = {}",
            grid.data.num_classes
        )));
    }
    Ok(())
}

/// Per-dataset means of the inner supremum, enumerating or sampling `σ`.
type PerDataset = Vec<DatasetMean>;

/// Mean inner supremum, number of sign vectors, whether they were enumerated.
type DatasetMean = (f64, usize, bool);

fn finish_estimate(per: &PerDataset, mode: RademacherMode, attack: Option<&AttackSpec>) -> RademacherEstimate {
    let values: Vec<f64> = per.iter().map(|v| v.0).collect();
    let m = mean_stderr(&values);
    RademacherEstimate {
        value: m.mean,
        stderr: m.stderr,
        mode,
        num_sigma: per.first().map_or(0, |v| v.1),
        exhaustive_sigma: per.first().is_none_or(|v| v.2),
        num_datasets: per.len(),
        epsilon: attack.map_or(0.0, |a| a.epsilon),
        p: attack.map(|a| a.p),
    }
}

/// Exact clean Rademacher complexity of binary POVMs, averaged over datasets.
pub fn rademacher_exact_binary(
    grid: &EmbeddedGrid,
    datasets: &[Dataset],
    sigma: &SigmaOptions,
    seed: u64,
) -> Result<RademacherEstimate> {
    check_binary(grid)?;
    let per: PerDataset = datasets
        .par_iter()
        .enumerate()
        .map(|(i, ds)| exact_binary_dataset(grid, ds, sigma, seed, i))
        .collect();
    Ok(finish_estimate(&per, RademacherMode::ExactBinary, None))
}

fn exact_binary_dataset(grid: &EmbeddedGrid, ds: &Dataset, sigma: &SigmaOptions, seed: u64, i: usize) -> (f64, usize, bool) {
    let t = ds.len();
    if t == 0 {
        return (0.0, 0, true);
    }
    let states: Vec<&CMatrix> = ds.samples.iter().map(|s| grid.states[s.index].matrix()).collect();
    let classes: Vec<usize> = ds.samples.iter().map(|s| s.c).collect();
    let (signs, exhaustive) = sign_vectors(t, sigma, &mut sigma_rng(seed, t, i));
    let total: f64 = signs.iter().map(|s| binary_sup(&states, &classes, s)).sum();
    (total / (signs.len() as f64 * t as f64), signs.len(), exhaustive)
}

/// Qubit binary sample: Bloch vector and `s = +1` for class 1, `−1` for class 0.
struct QubitTerm {
    r: Vec3,
    s: f64,
}

/// `Φ(u) = Σ σ_n h_n(s_n u)` with `h_n` the support function of the
/// feasible Bloch set of sample `n`, and its Danskin gradient.
fn phi(terms: &[QubitTerm], sigma: &[f64], radius: f64, u: Vec3) -> (f64, Vec3) {
    let mut val = 0.0;
    let mut grad = [0.0; 3];
    for (term, &s) in terms.iter().zip(sigma) {
        let v = [term.s * u[0], term.s * u[1], term.s * u[2]];
        let star = qubit_support_point(term.r, radius, v);
        val += s * dot(v, star);
        let w = s * term.s;
        grad[0] += w * star[0];
        grad[1] += w * star[1];
        grad[2] += w * star[2];
    }
    (val, grad)
}

fn normalized(v: Vec3) -> Option<Vec3> {
    let n = norm3(v);
    (n > 1e-300).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Riemannian ascent on the unit sphere with adaptive step.
fn ascend(terms: &[QubitTerm], sigma: &[f64], radius: f64, start: (Vec3, f64, Vec3), iters: usize) -> f64 {
    let (mut u, mut f, mut g) = start;
    let mut eta = f64::NAN;
    for _ in 0..iters {
        let gu = dot(g, u);
        let tangent = [g[0] - gu * u[0], g[1] - gu * u[1], g[2] - gu * u[2]];
        let tn = norm3(tangent);
        if tn < 1e-12 {
            break;
        }
        if eta.is_nan() {
            eta = 0.5 / tn;
        }
        if eta * tn < 1e-9 {
            break;
        }
        let Some(cand) = normalized([u[0] + eta * tangent[0], u[1] + eta * tangent[1], u[2] + eta * tangent[2]]) else {
            break;
        };
        let (fc, gc) = phi(terms, sigma, radius, cand);
        if fc > f {
            u = cand;
            f = fc;
            g = gc;
            eta *= 1.5;
        } else {
            eta *= 0.5;
        }
    }
    f
}

fn random_unit(rng: &mut rng::Rng) -> Vec3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm3(v);
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// `T · sup` of the adversarial sign-weighted loss over binary qubit POVMs.
///
/// Writing `Π_0 = a0·I + a·σ` with `|a| ≤ min(a0, 1 − a0)`, the objective is
/// `const + coef·a0 + |a|·Φ(â)`. It is linear in `a0` and in `|a|`, so the
/// optimum sits at `a0 ∈ {0, 1/2, 1}` and only `max Φ` over the sphere
/// needs a search.
fn qubit_adversarial_sup(
    terms: &[QubitTerm],
    sigma: &[f64],
    radius: f64,
    opts: &MultistartOptions,
    rng: &mut rng::Rng,
) -> f64 {
    let mut constant = 0.0;
    let mut coef = 0.0;
    let mut w = [0.0; 3];
    let mut positive = 0.0;
    for (term, &s) in terms.iter().zip(sigma) {
        if term.s < 0.0 {
            constant += s;
        }
        coef += s * term.s;
        for (wk, rk) in w.iter_mut().zip(term.r) {
            *wk += s * term.s * rk;
        }
        if s > 0.0 {
            positive += 1.0;
        }
    }
    let base = constant + coef.max(0.0);
    // Φ ≤ â·w + R·#{σ_n > 0} since each feasible set lies in its budget ball.
    if norm3(w) + radius * positive <= coef.abs() {
        return base;
    }
    let mut starts: Vec<Vec3> = Vec::with_capacity(opts.random_starts + 2);
    if let Some(wh) = normalized(w) {
        starts.push(wh);
        starts.push([-wh[0], -wh[1], -wh[2]]);
    }
    starts.extend((0..opts.random_starts).map(|_| random_unit(rng)));
    let mut screened: Vec<(Vec3, f64, Vec3)> = starts
        .into_iter()
        .map(|u| {
            let (f, g) = phi(terms, sigma, radius, u);
            (u, f, g)
        })
        .collect();
    screened.sort_by(|a, b| b.1.total_cmp(&a.1));
    let best = screened
        .into_iter()
        .take(opts.refine.max(1))
        .map(|s| ascend(terms, sigma, radius, s, opts.ascent_iters))
        .fold(f64::NEG_INFINITY, f64::max);
    base + 0.5 * (best - coef.abs()).max(0.0)
}

/// Adversarial Rademacher estimate with its paired clean counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdversarialRademacher {
    pub adversarial: RademacherEstimate,
    pub clean: RademacherEstimate,
    /// Paired per-dataset difference `adversarial − clean`.
    pub gap: MeanEstimate,
}

/// Adversarial Rademacher complexity. Qubit binary problems use the Bloch
/// multistart; anything else uses projected ascent over general POVMs.
/// The clean value uses the same datasets and sign vectors.
pub fn rademacher_adversarial(
    grid: &EmbeddedGrid,
    datasets: &[Dataset],
    attack: &AttackSpec,
    sigma: &SigmaOptions,
    opts: &MultistartOptions,
    seed: u64,
) -> Result<AdversarialRademacher> {
    attack.validate()?;
    let qubit = grid.dim() == 2 && grid.data.num_classes == 2;
    let per: Vec<(DatasetMean, DatasetMean)> = datasets
        .par_iter()
        .enumerate()
        .map(|(i, ds)| {
            if qubit {
                Ok(qubit_dataset(grid, ds, attack, sigma, opts, seed, i))
            } else {
                general_dataset(grid, ds, attack, sigma, opts, seed, i)
            }
        })
        .collect::<Result<_>>()?;
    let adv: PerDataset = per.iter().map(|p| p.0).collect();
    let clean: PerDataset = per.iter().map(|p| p.1).collect();
    let gaps: Vec<f64> = per.iter().map(|p| p.0 .0 - p.1 .0).collect();
    let (adv_mode, clean_mode) = if qubit {
        (RademacherMode::QubitMultistart, RademacherMode::ExactBinary)
    } else {
        (RademacherMode::Multistart, RademacherMode::Multistart)
    };
    Ok(AdversarialRademacher {
        adversarial: finish_estimate(&adv, adv_mode, Some(attack)),
        clean: finish_estimate(&clean, clean_mode, None),
        gap: mean_stderr(&gaps),
    })
}

fn qubit_dataset(
    grid: &EmbeddedGrid,
    ds: &Dataset,
    attack: &AttackSpec,
    sigma: &SigmaOptions,
    opts: &MultistartOptions,
    seed: u64,
    i: usize,
) -> (DatasetMean, DatasetMean) {
    let t = ds.len();
    if t == 0 {
        return ((0.0, 0, true), (0.0, 0, true));
    }
    let zero = HermitianMatrix::zeros(2);
    let terms: Vec<QubitTerm> = ds
        .samples
        .iter()
        .map(|s| QubitTerm {
            r: qubit_frame(&zero, &grid.states[s.index]).1,
            s: if s.c == 1 { 1.0 } else { -1.0 },
        })
        .collect();
    let states: Vec<&CMatrix> = ds.samples.iter().map(|s| grid.states[s.index].matrix()).collect();
    let classes: Vec<usize> = ds.samples.iter().map(|s| s.c).collect();
    let (signs, exhaustive) = sign_vectors(t, sigma, &mut sigma_rng(seed, t, i));
    let mut starts = rng::substream(seed, &[domain::MULTISTART, t as u64, i as u64]);
    let radius = attack.bloch_radius();
    let (mut adv, mut clean) = (0.0, 0.0);
    for s in &signs {
        adv += qubit_adversarial_sup(&terms, s, radius, opts, &mut starts);
        clean += binary_sup(&states, &classes, s);
    }
    let scale = signs.len() as f64 * t as f64;
    ((adv / scale, signs.len(), exhaustive), (clean / scale, signs.len(), exhaustive))
}

/// `Σ σ_n ℓ_n(Π)` and its supergradient with respect to each `Π_c`.
fn general_objective(
    povm: &[HermitianMatrix],
    states: &[&DensityMatrix],
    classes: &[usize],
    sigma: &[f64],
    attack: Option<&AttackSpec>,
) -> Result<(f64, Vec<HermitianMatrix>)> {
    let d = states[0].dim();
    let mut grad = vec![HermitianMatrix::zeros(d); povm.len()];
    let mut val = 0.0;
    for ((rho, &c), &s) in states.iter().zip(classes).zip(sigma) {
        let (loss, lambda) = match attack {
            Some(a) if a.epsilon > 0.0 => {
                let r = attack_element(&povm[c], rho, a)?;
                (r.loss, r.lambda_star.into_hermitian())
            }
            _ => (
                1.0 - trace_inner_unchecked(povm[c].matrix(), rho.matrix()),
                rho.as_hermitian().clone(),
            ),
        };
        val += s * loss;
        grad[c] = &grad[c] - &lambda.scaled(s);
    }
    Ok((val, grad))
}

/// Deterministic starts: projective POVMs that send each eigenvector of an
/// accumulated coefficient matrix to the class minimising `<v|B_c|v>`, where
/// `B_c = Σ_{c_n = c} σ_n ρ_n`. The bases are those of `B_c − B̄` for every
/// `c` (exact for `K = 2`) and of `Σ_c B_c`; the uniform POVM is added too.
fn deterministic_starts(states: &[&DensityMatrix], classes: &[usize], sigma: &[f64], k: usize) -> Vec<Vec<HermitianMatrix>> {
    let d = states[0].dim();
    let mut b = vec![HermitianMatrix::zeros(d); k];
    for ((rho, &c), &s) in states.iter().zip(classes).zip(sigma) {
        b[c] = &b[c] + &rho.as_hermitian().scaled(s);
    }
    let total = b.iter().fold(HermitianMatrix::zeros(d), |acc, x| &acc + x);
    let mean = total.scaled(1.0 / k as f64);
    let greedy = |basis: &CMatrix| {
        let mut els = vec![HermitianMatrix::zeros(d); k];
        for j in 0..d {
            let proj = HermitianMatrix::outer(&basis.column(j).into_owned());
            let best = (0..k)
                .min_by(|&x, &y| {
                    let fx = trace_inner_unchecked(b[x].matrix(), proj.matrix());
                    let fy = trace_inner_unchecked(b[y].matrix(), proj.matrix());
                    fx.total_cmp(&fy)
                })
                .expect("k >= 1");
            els[best] = &els[best] + &proj;
        }
        els
    };
    let mut out: Vec<Vec<HermitianMatrix>> = b
        .iter()
        .take(if k == 2 { 1 } else { k })
        .map(|bc| greedy(&(bc - &mean).eig().basis))
        .collect();
    out.push(greedy(&total.eig().basis));
    out.push(Povm::uniform(d, k).into_elements());
    out
}

fn random_projective(d: usize, k: usize, rng: &mut rng::Rng) -> Vec<HermitianMatrix> {
    let u = crate::embed::random_unitary(d, rng);
    let mut els = vec![HermitianMatrix::zeros(d); k];
    for j in 0..d {
        let v = u.column(j).into_owned();
        let c = rng.random_range(0..k);
        els[c] = &els[c] + &HermitianMatrix::outer(&v);
    }
    els
}

/// `T · sup` over general POVMs by projected supergradient ascent.
fn general_sup(
    states: &[&DensityMatrix],
    classes: &[usize],
    sigma: &[f64],
    k: usize,
    attack: Option<&AttackSpec>,
    opts: &MultistartOptions,
    rng: &mut rng::Rng,
) -> Result<f64> {
    let d = states[0].dim();
    let mut starts = deterministic_starts(states, classes, sigma, k);
    starts.extend((0..opts.random_starts).map(|_| random_projective(d, k, rng)));
    let t = states.len() as f64;
    let mut screened = starts
        .into_iter()
        .map(|p| general_objective(&p, states, classes, sigma, attack).map(|(f, g)| (p, f, g)))
        .collect::<Result<Vec<_>>>()?;
    screened.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = f64::NEG_INFINITY;
    for (start, f0, g0) in screened.into_iter().take(opts.refine.max(1)) {
        let mut povm = start;
        let (mut f, mut g) = (f0, g0);
        let mut step = 1.0 / t;
        for _ in 0..opts.povm_iters {
            let raw: Vec<HermitianMatrix> = povm.iter().zip(&g).map(|(p, gc)| p + &gc.scaled(step)).collect();
            let cand = project_povm(raw)?.into_elements();
            let (fc, gc) = general_objective(&cand, states, classes, sigma, attack)?;
            if fc > f {
                povm = cand;
                f = fc;
                g = gc;
            } else {
                step *= 0.5;
                if step < 1e-9 / t {
                    break;
                }
            }
        }
        best = best.max(f);
    }
    Ok(best)
}

fn general_dataset(
    grid: &EmbeddedGrid,
    ds: &Dataset,
    attack: &AttackSpec,
    sigma: &SigmaOptions,
    opts: &MultistartOptions,
    seed: u64,
    i: usize,
) -> Result<(DatasetMean, DatasetMean)> {
    let t = ds.len();
    if t == 0 {
        return Ok(((0.0, 0, true), (0.0, 0, true)));
    }
    let k = grid.data.num_classes;
    let states: Vec<&DensityMatrix> = ds.samples.iter().map(|s| &grid.states[s.index]).collect();
    let classes: Vec<usize> = ds.samples.iter().map(|s| s.c).collect();
    let (signs, exhaustive) = sign_vectors(t, sigma, &mut sigma_rng(seed, t, i));
    let mut starts = rng::substream(seed, &[domain::MULTISTART, t as u64, i as u64]);
    let (mut adv, mut clean) = (0.0, 0.0);
    for s in &signs {
        adv += general_sup(&states, &classes, s, k, Some(attack), opts, &mut starts)?;
        clean += general_sup(&states, &classes, s, k, None, opts, &mut starts)?;
    }
    let scale = signs.len() as f64 * t as f64;
    Ok(((adv / scale, signs.len(), exhaustive), (clean / scale, signs.len(), exhaustive)))
}

/// Clean Rademacher complexity by general multistart (any `K`, any `d`).
pub fn rademacher_multistart(
    grid: &EmbeddedGrid,
    datasets: &[Dataset],
    sigma: &SigmaOptions,
    opts: &MultistartOptions,
    seed: u64,
) -> Result<RademacherEstimate> {
    let k = grid.data.num_classes;
    let per: PerDataset = datasets
        .par_iter()
        .enumerate()
        .map(|(i, ds)| {
            let t = ds.len();
            if t == 0 {
                return Ok((0.0, 0, true));
            }
            let states: Vec<&DensityMatrix> = ds.samples.iter().map(|s| &grid.states[s.index]).collect();
            let classes: Vec<usize> = ds.samples.iter().map(|s| s.c).collect();
            let (signs, exhaustive) = sign_vectors(t, sigma, &mut sigma_rng(seed, t, i));
            let mut starts = rng::substream(seed, &[domain::MULTISTART, t as u64, i as u64]);
            let mut total = 0.0;
            for s in &signs {
                total += general_sup(&states, &classes, s, k, None, opts, &mut starts)?;
            }
            Ok((total / (signs.len() as f64 * t as f64), signs.len(), exhaustive))
        })
        .collect::<Result<_>>()?;
    Ok(finish_estimate(&per, RademacherMode::Multistart, None))
}

/// `2·𝓡 + √(2·log(2/δ)/T)`.
pub fn uniform_deviation_bound(rademacher: f64, t: usize, delta: f64, base: LogBase) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("confidence delta must lie in (0, 1), got {delta}")));
    }
    if t == 0 {
        return Err(Error::domain("training size T must be >= 1"));
    }
    Ok(2.0 * rademacher + confidence_term(t, delta, base))
}
