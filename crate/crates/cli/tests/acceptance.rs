//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails unexpectedly.
//!
//! A criterion that is false as stated is reported as FAIL together with a
//! verified counterexample; the process then still exits zero provided the
//! counterexample checks out and the corrected statement holds.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng as _;

use qadv_cli::config::ExperimentConfig;
use qadv_cli::experiment::{run_experiment, Row};
use qadv_core::attack::{bloch_brute_force, closed_form_p1, closed_form_pinf, numerical_inner_max, AttackSpec, NumericalOptions};
use qadv_core::bounds::{
    adv_bound_general, adv_bound_p1, adv_bound_pinf, banchi_bound, mismatch_bounds, renyi2_mi, strength_compare, xi,
    Budget, BoundInputs, LogBase, MismatchSpec, StrengthRelation,
};
use qadv_core::embed::{
    apply_channel, channel_floor_check, random_density, random_kraus_channel, random_unital_channel, random_unitary,
    unitality_deviation, DataSpec, EmbeddingSpec,
};
use qadv_core::estimate::{gen_error, gen_error_mismatched, gen_errors_fixed, rademacher_adversarial, EmbeddedGrid, LossTable, MultistartOptions, SigmaOptions};
use qadv_core::qmat::CVector;
use qadv_core::rng::substream;
use qadv_core::stats::mean_stderr;
use qadv_core::train::{adversarial_train, TrainConfig};
use qadv_core::{DensityMatrix, HermitianMatrix, NormOrder, Povm};

const SEED: u64 = 0x5eed;

enum Verdict {
    Pass,
    Fail,
    /// False as stated; the counterexample and the corrected claim verified.
    Refuted,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }
}

fn random_element(rng: &mut qadv_core::rng::Rng) -> HermitianMatrix {
    let diag = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    HermitianMatrix::from_real_diagonal(&diag).conjugated_by(&random_unitary(2, rng))
}

/// Closed forms against the Bloch grid oracle and the numerical solver.
fn closed_forms_match_oracles() -> Outcome {
    let start = Instant::now();
    let (mut worst_oracle, mut worst_numerical) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for n in 0..200u64 {
        let mut rng = substream(SEED, &[1, n]);
        let rho = random_density(2, &mut rng);
        let element = random_element(&mut rng);
        let p = if n % 2 == 0 { NormOrder::One } else { NormOrder::Infinity };
        let limit = AttackSpec::closed_form_limit(p, rho.min_eigenvalue());
        let epsilon = limit * rng.random_range(0.0..1.0f64).max(1e-3);
        let closed = match p {
            NormOrder::One => closed_form_p1(&element, &rho, epsilon),
            NormOrder::Infinity => closed_form_pinf(&element, &rho, epsilon),
        };
        let oracle = bloch_brute_force(&element, &rho, p, epsilon, 2e-3);
        let numerical = numerical_inner_max(&element, &rho, p, epsilon, &NumericalOptions::default());
        match (closed, oracle, numerical) {
            (Ok(c), Ok(o), Ok(m)) => {
                worst_oracle = worst_oracle.max((c.gain - o.gain).abs());
                worst_numerical = worst_numerical.max((c.gain - m.gain).abs());
            }
            (c, o, m) => errors.push(format!("instance {n}: {:?} {:?} {:?}", c.err(), o.err(), m.err())),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        errors.is_empty() && worst_oracle <= 5e-3 && worst_numerical <= 1e-4 && secs < 120.0,
        format!(
            "200 instances, max |closed - oracle| = {worst_oracle:.2e} (<= 5e-3), max |closed - numerical| = {worst_numerical:.2e} (<= 1e-4), {secs:.1} s (< 120 s){}",
            if errors.is_empty() { String::new() } else { format!(", errors: {}", errors.join("; ")) }
        ),
    )
}

fn bound_inputs(i2: f64, k: usize, t: usize, d: usize) -> BoundInputs {
    BoundInputs {
        k,
        t,
        delta: 0.8,
        d,
        floor: 0.05,
        i2,
        log_base: LogBase::Natural,
    }
}

/// Bound values against scalar evaluations written out here.
fn bound_formulas_exact() -> Outcome {
    let mut failures = Vec::new();
    let base = banchi_bound(&bound_inputs(1.0, 2, 100, 2)).unwrap();
    let base_oracle = 2.0 * (2.0f64 * 2.0 / 100.0).sqrt() + (2.0 * (2.0f64 / 0.8).ln() / 100.0).sqrt();
    if (base - 0.53537).abs() > 1e-5 || (base - base_oracle).abs() > 1e-12 {
        failures.push(format!("base bound {base}"));
    }
    let inc = adv_bound_p1(&bound_inputs(1.0, 2, 100, 2), 0.08).unwrap().adversarial_increment;
    if (inc - 0.022627).abs() > 1e-6 {
        failures.push(format!("p=1 increment {inc}"));
    }
    let mut checked = 0;
    for d in [2usize, 3, 4, 8] {
        for k in [2usize, 3, 5] {
            for t in [1usize, 10, 100, 1000] {
                for eps in [0.0, 0.01, 0.08, 0.5] {
                    let inputs = bound_inputs(0.7, k, t, d);
                    let p1 = adv_bound_p1(&inputs, eps).unwrap().adversarial_increment;
                    let pinf = adv_bound_pinf(&inputs, eps).unwrap().adversarial_increment;
                    if eps > 0.0 && (pinf / p1 - d as f64).abs() > 4.0 * f64::EPSILON * d as f64 {
                        failures.push(format!("ratio {} at d={d}", pinf / p1));
                    }
                    let growth = 1.0 + (k as f64 - 1.0) / t as f64;
                    let g1 = eps * (2.0 * d as f64 * growth).sqrt();
                    let ginf = 2.0 * eps * d as f64 * growth.sqrt();
                    let got1 = adv_bound_general(&inputs, eps, NormOrder::One).unwrap().adversarial_increment;
                    let gotinf = adv_bound_general(&inputs, eps, NormOrder::Infinity).unwrap().adversarial_increment;
                    if (got1 - g1).abs() > 1e-12 || (gotinf - ginf).abs() > 1e-12 {
                        failures.push(format!("general increments at d={d} K={k} T={t} eps={eps}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Outcome::check(
        failures.is_empty(),
        format!(
            "base = {base:.6} (0.53537 +- 1e-5), p=1 increment = {inc:.7} (0.022627 +- 1e-6), {checked} ratio/general cases{}",
            if failures.is_empty() { String::new() } else { format!(", failures: {}", failures.join("; ")) }
        ),
    )
}

fn ket(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&x| x.into()))
}

/// Anchors of the Rényi-2 mutual information and its range.
fn mi_anchors() -> Outcome {
    let mut failures = Vec::new();
    let pure = DensityMatrix::pure(&ket(&[0.6, 0.8])).unwrap();
    let single = renyi2_mi(&[1.0], &[pure]).unwrap();
    let mixed = renyi2_mi(&[0.2, 0.3, 0.5], &vec![DensityMatrix::maximally_mixed(3); 3]).unwrap();
    let orthogonal = renyi2_mi(
        &[0.5, 0.5],
        &[DensityMatrix::basis_state(2, 0), DensityMatrix::basis_state(2, 1)],
    )
    .unwrap();
    for (name, got, want) in [("single pure", single, 0.0), ("maximally mixed", mixed, 0.0), ("orthogonal", orthogonal, 1.0)] {
        if (got - want).abs() > 1e-9 {
            failures.push(format!("{name}: {got}"));
        }
    }
    let (mut lo, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    for n in 0..500u64 {
        let mut rng = substream(SEED, &[3, n]);
        let d = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=6usize);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let states: Vec<DensityMatrix> = (0..m).map(|_| random_density(d, &mut rng)).collect();
        let i2 = renyi2_mi(&probs, &states).unwrap();
        let cap = 2.0 * (d as f64).log2();
        lo = lo.min(i2);
        hi_ratio = hi_ratio.max(i2 / cap);
        if i2 < -1e-9 || i2 > cap + 1e-9 {
            failures.push(format!("ensemble {n}: I2 = {i2} outside [0, {cap}]"));
        }
    }
    Outcome::check(
        failures.is_empty(),
        format!(
            "anchors {single:.1e}, {mixed:.1e}, {orthogonal:.12}; 500 ensembles min I2 = {lo:.3e}, max I2/(2 log2 d) = {hi_ratio:.3}{}",
            if failures.is_empty() { String::new() } else { format!(", failures: {}", failures.join("; ")) }
        ),
    )
}

/// Measured adversarial-minus-clean Rademacher gap under its ceiling.
fn rademacher_gap_ceilings() -> Outcome {
    let start = Instant::now();
    let grid = EmbeddedGrid::new(EmbeddingSpec::default(), DataSpec::default()).unwrap();
    let k = grid.data.num_classes as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, eps) in [(NormOrder::One, 0.08), (NormOrder::Infinity, 0.02)] {
        let attack = AttackSpec::new(p, eps).unwrap();
        let factor = match p {
            NormOrder::One => 1.0,
            NormOrder::Infinity => grid.dim() as f64,
        };
        for t in [8usize, 16] {
            let datasets = grid.draw_datasets(t, 20, SEED).unwrap();
            let r = rademacher_adversarial(&grid, &datasets, &attack, &SigmaOptions::default(), &MultistartOptions::default(), SEED)
                .unwrap();
            let ceiling = factor * eps * (k / t as f64).sqrt() + 3.0 * r.gap.stderr;
            ok &= r.clean.exhaustive_sigma && r.gap.mean <= ceiling;
            parts.push(format!("p={p} T={t}: gap {:.2e} <= {ceiling:.4}", r.gap.mean));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    Outcome::check(ok, format!("{}; exhaustive sign vectors, 20 datasets, {secs:.1} s (< 300 s)", parts.join(", ")))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn preset(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&workspace_root().join("presets").join(name)).unwrap()
}

fn at(rows: &[Row], t: usize) -> &Row {
    rows.iter().find(|r| r.t == t).expect("T in preset grid")
}

/// Qualitative shape of both experiment panels.
///
/// Part (d) can fail for a real reason: once the attack sets are clipped
/// by the pure-state boundary, adversarial losses vary less across inputs
/// and the adversarial Rademacher complexity drops below the clean one.
/// A (d) failure is accepted as genuine only if the paired gap is
/// significantly negative and a much stronger search reproduces the
/// adversarial value, ruling out an optimiser shortfall.
fn experiment_panels() -> Outcome {
    let start = Instant::now();
    let (mut ok, mut genuine) = (true, true);
    let mut parts = Vec::new();
    for (name, check_bound) in [("qubit_eps008.toml", true), ("qubit_eps012.toml", false)] {
        let config = preset(name);
        let seed = config.seed().expect("preset seed");
        let report = run_experiment(&config, seed).unwrap();
        let rows = &report.rows;
        let a = rows
            .iter()
            .all(|r| r.g_adv >= r.g_clean - 3.0 * r.g_adv_stderr.hypot(r.g_clean_stderr));
        let decay_clean = at(rows, 400).g_clean / at(rows, 100).g_clean;
        let decay_adv = at(rows, 400).g_adv / at(rows, 100).g_adv;
        let b = decay_clean <= 0.7 && decay_adv <= 0.7;
        let c = !check_bound || rows.iter().all(|r| r.bound_adv >= r.g_adv);
        let d = rows.iter().all(|r| r.udb_adv >= r.udb_clean);
        ok &= a && b && c && d;
        genuine &= a && b && c;
        let eps = config.attacks.test.epsilon;
        let mut part = format!(
            "eps={eps}: (a) {} (b) {decay_clean:.2}/{decay_adv:.2} {} (c) {} (d) {}",
            flag(a),
            flag(b),
            if check_bound { flag(c) } else { "n/a" },
            flag(d)
        );
        if !d {
            let z = report
                .diagnostics
                .iter()
                .map(|g| g.rademacher_gap.mean / g.rademacher_gap.stderr)
                .fold(f64::NEG_INFINITY, f64::max);
            let shortfall = search_shortfall(&config, seed);
            genuine &= z < -3.0 && shortfall <= 1e-9;
            part.push_str(&format!(
                " [gap/stderr <= {z:.1} at every T, stronger search changes the value by {shortfall:.1e}]"
            ));
        }
        parts.push(part);
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    genuine &= secs < 600.0;
    let detail = format!("{}; {secs:.1} s (< 600 s)", parts.join("; "));
    Outcome {
        verdict: match (ok, genuine) {
            (true, _) => Verdict::Pass,
            (false, true) => Verdict::Refuted,
            (false, false) => Verdict::Fail,
        },
        detail,
    }
}

/// Largest increase of the adversarial Rademacher estimate when the
/// multistart search is made far more thorough, at the smallest `T`.
fn search_shortfall(config: &ExperimentConfig, seed: u64) -> f64 {
    let grid = EmbeddedGrid::new(config.embedding, config.data).unwrap();
    let t = config.t_grid[0];
    let datasets = grid.draw_datasets(t, config.mc.rademacher_datasets, seed).unwrap();
    let sigma = SigmaOptions {
        num_sigma: 32,
        ..config.mc.sigma
    };
    let strong = MultistartOptions {
        random_starts: 256,
        refine: 32,
        ascent_iters: 500,
        ..config.mc.multistart
    };
    let attack = &config.attacks.test;
    let base = rademacher_adversarial(&grid, &datasets, attack, &sigma, &config.mc.multistart, seed).unwrap();
    let thorough = rademacher_adversarial(&grid, &datasets, attack, &sigma, &strong, seed).unwrap();
    thorough.adversarial.value - base.adversarial.value
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

/// Mismatched-attack generalization error against the matched one.
fn mismatch_ordering() -> Outcome {
    let embedding = EmbeddingSpec::default();
    let data = DataSpec::default();
    let grid = EmbeddedGrid::new(embedding, data).unwrap();
    let strong = (NormOrder::Infinity, 0.1);
    let weak = (NormOrder::One, 0.15);
    let mut ok = true;
    let mut parts = Vec::new();
    for (train, test) in [(strong, weak), (weak, strong)] {
        let train_attack = AttackSpec::new(train.0, train.1).unwrap();
        let test_attack = AttackSpec::new(test.0, test.1).unwrap();
        let spec = MismatchSpec {
            train: Budget { p: train.0, epsilon: train.1 },
            test: Budget { p: test.0, epsilon: test.1 },
            d: 2,
        };
        let relation = strength_compare(spec.train, spec.test, 2);
        let expected = if train == strong {
            StrengthRelation::TrainStronger
        } else {
            StrengthRelation::TestStronger
        };
        ok &= relation == expected;

        // Fixed measurement over many datasets.
        let povm = Povm::computational(2);
        let train_table = LossTable::build(&grid, &povm, Some(&train_attack)).unwrap();
        let test_table = LossTable::build(&grid, &povm, Some(&test_attack)).unwrap();
        let datasets = grid.draw_datasets(50, 200, SEED).unwrap();
        let matched = mean_stderr(&gen_errors_fixed(&train_table, &train_table, &grid.prior, &datasets).unwrap());
        let mismatched = mean_stderr(&gen_errors_fixed(&train_table, &test_table, &grid.prior, &datasets).unwrap());
        ok &= ordered(relation, mismatched.mean, matched.mean, mismatched.stderr);
        let (lo, hi) = mismatch_bounds(matched.mean, &spec, relation).unwrap();
        ok &= lo - 1e-12 <= mismatched.mean && mismatched.mean <= hi + 1e-12;

        // Measurements trained against the train attack.
        let (mut g_matched, mut g_mismatched) = (Vec::new(), Vec::new());
        for (i, ds) in grid.draw_datasets(25, 10, SEED ^ 1).unwrap().iter().enumerate() {
            let trained = adversarial_train(ds, &embedding, &TrainConfig::new(train_attack, SEED + i as u64)).unwrap();
            g_matched.push(gen_error(&trained.povm, ds, &embedding, &data, Some(&train_attack)).unwrap().gen_error);
            g_mismatched.push(
                gen_error_mismatched(&trained.povm, ds, &embedding, &data, Some(&train_attack), Some(&test_attack))
                    .unwrap()
                    .gen_error,
            );
        }
        let tm = mean_stderr(&g_matched);
        let tmm = mean_stderr(&g_mismatched);
        ok &= ordered(relation, tmm.mean, tm.mean, tmm.stderr);
        let (tlo, thi) = mismatch_bounds(tm.mean, &spec, relation).unwrap();
        ok &= tlo - 1e-12 <= tmm.mean && tmm.mean <= thi + 1e-12;

        parts.push(format!(
            "train ({},{}) test ({},{}) {relation:?}, xi = {:.2}: fixed {:.4} vs {:.4} in [{lo:.4}, {hi:.4}], trained {:.4} vs {:.4} in [{tlo:.4}, {thi:.4}]",
            train.0,
            train.1,
            test.0,
            test.1,
            xi(&spec),
            mismatched.mean,
            matched.mean,
            tmm.mean,
            tm.mean
        ));
    }
    Outcome::check(ok, parts.join("; "))
}

fn ordered(relation: StrengthRelation, mismatched: f64, matched: f64, stderr: f64) -> bool {
    match relation {
        StrengthRelation::TrainStronger => mismatched <= matched + 3.0 * stderr,
        StrengthRelation::TestStronger => mismatched >= matched - 3.0 * stderr,
        StrengthRelation::Undetermined => false,
    }
}

/// Eigenvalue floor under channels: general CPTP maps as stated, plus the
/// unital maps for which the monotonicity is a theorem.
fn floor_under_channels() -> Outcome {
    let (mut violations, mut worst) = (0usize, f64::INFINITY);
    let mut witness = None;
    for n in 0..1000u64 {
        let mut rng = substream(SEED, &[7, n]);
        let kraus = random_kraus_channel(2, 2 + (n % 3) as usize, &mut rng);
        let report = channel_floor_check(&kraus, 1000, SEED + n).unwrap();
        violations += report.violations;
        worst = worst.min(report.worst_margin);
        if witness.is_none() {
            if let Some(rho) = report.counterexample {
                witness = Some((kraus, rho));
            }
        }
    }
    let (mut unital_violations, mut unital_worst) = (0usize, f64::INFINITY);
    for n in 0..1000u64 {
        let mut rng = substream(SEED, &[8, n]);
        let kraus = random_unital_channel(2, 1 + (n % 4) as usize, &mut rng);
        let report = channel_floor_check(&kraus, 1000, SEED + n).unwrap();
        unital_violations += report.violations;
        unital_worst = unital_worst.min(report.worst_margin);
    }
    let summary = format!(
        "general CPTP: {violations} violations in 1e6 pairs (worst margin {worst:.3}); unital: {unital_violations} violations (worst margin {unital_worst:.1e})"
    );
    if violations == 0 {
        return Outcome::check(unital_violations == 0, summary);
    }
    let verified = witness.is_some_and(|(kraus, rho)| {
        let out = apply_channel(&kraus, &rho).unwrap();
        out.min_eigenvalue() < rho.min_eigenvalue() - 1e-9 && unitality_deviation(&kraus) > 1e-6
    });
    Outcome {
        verdict: if verified && unital_violations == 0 {
            Verdict::Refuted
        } else {
            Verdict::Fail
        },
        detail: format!(
            "{summary}; counterexample {} (non-unital channel, floor drops); the property needs a unital channel",
            if verified { "verified" } else { "NOT verified" }
        ),
    }
}

const SMALL_CONFIG: &str = r#"
t_grid = [10, 20, 40]
[mc]
seed = 11
num_datasets = 20
rademacher_datasets = 3
[mc.sigma]
exhaustive_max_t = 10
num_sigma = 16
"#;

/// Runs the binary in `dir` with outputs at fixed relative paths, so the
/// configuration echoed into the JSON is the same for every run.
fn run_binary(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    std::fs::write(dir.join("config.toml"), SMALL_CONFIG).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_qadv"))
        .current_dir(dir)
        .args(["experiment", "--config", "config.toml", "--csv", "out.csv", "--json", "out.json"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let read = |f: &str| std::fs::read(dir.join(f)).map_err(|e| e.to_string());
    Ok((read("out.csv")?, read("out.json")?))
}

/// Two runs of the binary with one config and seed.
fn runs_are_byte_identical() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run_binary(a.path()), run_binary(b.path())) {
        (Ok(x), Ok(y)) => Outcome::check(
            x == y && !x.0.is_empty() && !x.1.is_empty(),
            format!("CSV {} bytes, JSON {} bytes, identical: {}", x.0.len(), x.1.len(), x == y),
        ),
        (x, y) => Outcome::check(false, format!("run failed: {:?} {:?}", x.err(), y.err())),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed forms match the oracle and the numerical solver", closed_forms_match_oracles),
        ("bound formulas are exact", bound_formulas_exact),
        ("Renyi-2 mutual information anchors and range", mi_anchors),
        ("adversarial Rademacher gap below its ceilings", rademacher_gap_ceilings),
        ("experiment curves have the expected shape", experiment_panels),
        ("mismatched-attack ordering and interval", mismatch_ordering),
        ("eigenvalue floor never drops under CPTP channels", floor_under_channels),
        ("experiment runs are byte-identical", runs_are_byte_identical),
    ];
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let label = match outcome.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                unexpected += 1;
                "FAIL"
            }
            Verdict::Refuted => "FAIL",
        };
        println!("{label} criterion {}: {name}: {}", i + 1, outcome.detail);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
