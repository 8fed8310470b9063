use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qadv_cli::config::ExperimentConfig;
use qadv_cli::experiment::{read_csv, render_csv, run_to_outputs};
use qadv_cli::{init_thread_pool, plot, povm_file, CliError};
use qadv_core::attack::{adversarial_loss, AttackSpec, Solver};
use qadv_core::bounds::{adv_bound, adv_bound_general, banchi_bound, confidence_term, BoundInputs, LogBase};
use qadv_core::embed::embed;
use qadv_core::estimate::{empirical_risk, population_risk, rademacher_adversarial, EmbeddedGrid};
use qadv_core::train::{adversarial_train, TrainConfig};
use qadv_core::{NormOrder, Povm};

#[derive(Parser)]
#[command(name = "qadv", version, about = "Adversarial generalization of quantum classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form generalization bounds (JSON).
    Bound(BoundArgs),
    /// Rényi-2 mutual information and eigenvalue floor of the embedding (JSON).
    Mi(MiArgs),
    /// Worst-case state for one embedded input (JSON).
    Attack(AttackArgs),
    /// Clean and adversarial Rademacher complexities (CSV).
    Rademacher(RademacherArgs),
    /// Adversarial training on one sampled dataset (JSON).
    Train(TrainArgs),
    /// Full generalization-error experiment (CSV, JSON, SVG).
    Experiment(ExperimentArgs),
    /// Re-render the SVG of an experiment CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::load_or_default(self.config.as_deref())
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    /// Rényi-2 mutual information in bits; computed from the embedding if omitted.
    #[arg(long = "I2")]
    i2: Option<f64>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "T")]
    t: usize,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Eigenvalue floor; defaults to the config override, else the measured floor.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_order)]
    p: Option<NormOrder>,
    #[arg(long, value_enum, default_value = "natural")]
    log_base: LogBaseArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LogBaseArg {
    Natural,
    Two,
    Ten,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Natural => LogBase::Natural,
            LogBaseArg::Two => LogBase::Two,
            LogBaseArg::Ten => LogBase::Ten,
        }
    }
}

#[derive(Args)]
struct MiArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    /// Classical input, embedded with the configured embedding.
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    class: usize,
    #[arg(long, value_parser = parse_order)]
    p: Option<NormOrder>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverArg,
    /// POVM JSON file; defaults to the computational basis.
    #[arg(long)]
    povm: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SolverArg {
    Auto,
    ClosedForm,
    Numerical,
    BruteForce,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => Solver::Auto,
            SolverArg::ClosedForm => Solver::ClosedForm,
            SolverArg::Numerical => Solver::Numerical,
            SolverArg::BruteForce => Solver::BruteForce,
        }
    }
}

#[derive(Args)]
struct RademacherArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Training sizes; defaults to the config grid.
    #[arg(long = "T", value_delimiter = ',')]
    t: Vec<usize>,
    #[arg(long)]
    num_datasets: Option<usize>,
    #[arg(long)]
    num_sigma: Option<usize>,
    #[arg(long, value_parser = parse_order)]
    p: Option<NormOrder>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, value_parser = parse_order)]
    p: Option<NormOrder>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    /// Also write the trained POVM as JSON.
    #[arg(long)]
    povm_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated training sizes; overrides `t_grid`.
    #[arg(long = "T-grid", value_delimiter = ',')]
    t_grid: Vec<usize>,
    /// Overrides `outputs.csv`; without any CSV path the rows go to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides `outputs.json`.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides `outputs.svg`.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV written by `experiment`.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: PathBuf,
}

fn parse_order(s: &str) -> Result<NormOrder, String> {
    NormOrder::parse(s).map_err(|e| e.to_string())
}

fn require_seed(flag: Option<u64>, config: &ExperimentConfig) -> Result<u64, CliError> {
    flag.or(config.seed())
        .ok_or_else(|| CliError::Usage("--seed is required (or set mc.seed in the config)".into()))
}

/// Test attack of the config with flag overrides.
fn attack_from(config: &ExperimentConfig, p: Option<NormOrder>, epsilon: Option<f64>) -> Result<AttackSpec, CliError> {
    let base = config.attacks.test;
    Ok(AttackSpec::new(p.unwrap_or(base.p), epsilon.unwrap_or(base.epsilon))?.with_solver(base.solver))
}

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_stdout(text.as_bytes())
}

fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|()| out.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_bound(a: BoundArgs) -> Result<(), CliError> {
    let config = a.common.load()?;
    let i2 = match a.i2 {
        Some(v) => v,
        None => EmbeddedGrid::new(config.embedding, config.data)?.mutual_information()?,
    };
    let floor = match a.floor.or(config.floor_override) {
        Some(f) => f,
        None => config.embedding.analytic_floor(),
    };
    let inputs = BoundInputs {
        k: a.k.unwrap_or(config.data.num_classes),
        t: a.t,
        delta: a.delta.unwrap_or(config.delta),
        d: a.d.unwrap_or(config.embedding.dim),
        floor,
        i2,
        log_base: a.log_base.into(),
    };
    let base = banchi_bound(&inputs)?;
    let mut out = json!({
        "base": base,
        "confidence": confidence_term(inputs.t, inputs.delta, inputs.log_base),
        "inputs": inputs,
    });
    if let Some(eps) = a.epsilon {
        let p = a.p.unwrap_or(config.attacks.test.p);
        out["p"] = json!(p);
        out["epsilon"] = json!(eps);
        out["adversarial"] = json!(adv_bound(&inputs, eps, p)?);
        out["general"] = json!(adv_bound_general(&inputs, eps, p)?);
    }
    print_json(&out)
}

fn cmd_mi(a: MiArgs) -> Result<(), CliError> {
    let mut config = a.common.load()?;
    if let Some(q) = a.q {
        config.embedding.q = q;
    }
    config.embedding.validate()?;
    let grid = EmbeddedGrid::new(config.embedding, config.data)?;
    print_json(&json!({
        "I2": grid.mutual_information()?,
        "floor_measured": grid.floor(),
        "floor_analytic": config.embedding.analytic_floor(),
        "embedding": config.embedding,
        "data": config.data,
    }))
}

fn cmd_attack(a: AttackArgs) -> Result<(), CliError> {
    let config = a.common.load()?;
    let spec = attack_from(&config, a.p, a.epsilon)?.with_solver(a.solver.into());
    let rho = embed(&config.embedding, a.x)?;
    let povm = match &a.povm {
        Some(path) => povm_file::read(path)?,
        None => Povm::computational(config.embedding.dim),
    };
    let r = adversarial_loss(&povm, &rho, a.class, &spec)?;
    let lambda = r.lambda_star.matrix();
    let rows: Vec<Vec<[f64; 2]>> = (0..lambda.nrows())
        .map(|i| (0..lambda.ncols()).map(|j| [lambda[(i, j)].re, lambda[(i, j)].im]).collect())
        .collect();
    print_json(&json!({
        "x": a.x,
        "class": a.class,
        "attack": spec,
        "loss": r.loss,
        "clean_loss": r.clean_loss,
        "gain": r.gain,
        "solver_used": r.solver_used,
        "feasibility_slack": r.feasibility_slack,
        "converged": r.converged,
        "lambda_star": rows,
    }))
}

fn cmd_rademacher(a: RademacherArgs) -> Result<(), CliError> {
    let mut config = a.common.load()?;
    let seed = require_seed(a.seed, &config)?;
    if !a.t.is_empty() {
        config.t_grid = a.t.clone();
    }
    if let Some(n) = a.num_datasets {
        config.mc.rademacher_datasets = n;
    }
    if let Some(n) = a.num_sigma {
        config.mc.sigma.num_sigma = n;
    }
    let attack = attack_from(&config, a.p, a.epsilon)?;
    config.attacks.test = attack;
    config.validate()?;
    let grid = EmbeddedGrid::new(config.embedding, config.data)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["T", "mode", "value", "stderr", "num_sigma", "num_datasets", "epsilon", "p"]).map_err(io)?;
    for &t in &config.t_grid {
        let datasets = grid.draw_datasets(t, config.mc.rademacher_datasets, seed)?;
        let r = rademacher_adversarial(&grid, &datasets, &attack, &config.mc.sigma, &config.mc.multistart, seed)?;
        for est in [r.clean, r.adversarial] {
            let p = est.p.map_or_else(|| "none".to_string(), |p| p.to_string());
            w.write_record([
                t.to_string(),
                est.mode.as_str().to_string(),
                est.value.to_string(),
                est.stderr.to_string(),
                est.num_sigma.to_string(),
                est.num_datasets.to_string(),
                est.epsilon.to_string(),
                p,
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    match &a.out {
        Some(path) => write_file(path, &bytes),
        None => write_stdout(&bytes),
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let config = a.common.load()?;
    let seed = require_seed(a.seed, &config)?;
    let attack = {
        let base = config.attacks.train;
        AttackSpec::new(a.p.unwrap_or(base.p), a.epsilon.unwrap_or(base.epsilon))?.with_solver(base.solver)
    };
    let mut tc = TrainConfig::new(attack, seed);
    tc.num_classes = config.data.num_classes;
    if let Some(n) = a.max_iters {
        tc.max_outer_iters = n;
    }
    if let Some(n) = a.restarts {
        tc.num_restarts = n;
    }
    if let Some(s) = a.step_size {
        tc.step_size = s;
    }
    let grid = EmbeddedGrid::new(config.embedding, config.data)?;
    let dataset = grid
        .draw_datasets(a.t, 1, seed)?
        .pop()
        .ok_or_else(|| CliError::Validation("no dataset drawn".into()))?;
    let outcome = adversarial_train(&dataset, &config.embedding, &tc)?;
    let povm_json = povm_file::to_json(&outcome.povm);
    if let Some(path) = &a.povm_out {
        let text = serde_json::to_string_pretty(&povm_json).map_err(|e| CliError::Io(e.to_string()))?;
        write_file(path, text.as_bytes())?;
    }
    let empirical = empirical_risk(&outcome.povm, &dataset, &config.embedding, Some(&attack))?;
    let population = population_risk(&outcome.povm, &config.embedding, &config.data, Some(&attack))?;
    print_json(&json!({
        "config": tc,
        "T": a.t,
        "povm": povm_json,
        "curve": outcome.curve,
        "best_restart": outcome.best_restart,
        "restart_risks": outcome.restart_risks,
        "converged": outcome.converged,
        "empirical_adversarial_risk": empirical,
        "population_adversarial_risk": population,
        "adversarial_gen_error": population - empirical,
    }))
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&a.config)?;
    let seed = require_seed(a.seed, &config)?;
    config.mc.seed = Some(seed);
    if !a.t_grid.is_empty() {
        config.t_grid = a.t_grid.clone();
    }
    for (flag, slot) in [
        (a.csv, &mut config.outputs.csv),
        (a.json, &mut config.outputs.json),
        (a.svg, &mut config.outputs.svg),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    let started = Instant::now();
    let report = run_to_outputs(&config, seed)?;
    if config.outputs.csv.is_none() {
        write_stdout(render_csv(&report.rows)?.as_bytes())?;
    }
    // Kept out of the JSON so identical runs stay byte-identical.
    eprintln!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<(), CliError> {
    let rows = read_csv(&a.csv)?;
    let svg = plot::render_svg(&render_csv(&rows)?)?;
    write_file(&a.svg, svg.as_bytes())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_thread_pool()?;
    match cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Mi(a) => cmd_mi(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Rademacher(a) => cmd_rademacher(a),
        Command::Train(a) => cmd_train(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
