//! Generalization-error experiment over a grid of training sizes.
//!
//! For every `T` the runner draws datasets, measures `E|𝒢|` for the clean
//! and adversarial losses, estimates both Rademacher complexities on a
//! prefix of the same draws, and evaluates the closed-form bounds.
//! Outputs depend only on the config and seed: every work item has its own
//! random substream and results are gathered in index order.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qadv_core::attack::AttackSpec;
use qadv_core::bounds::{adv_bound, adv_bound_general, banchi_bound, BoundInputs, LogBase};
use qadv_core::embed::Dataset;
use qadv_core::estimate::{
    gen_errors_fixed, rademacher_adversarial, summarize_gen_errors, uniform_deviation_bound, EmbeddedGrid,
    LossTable, RademacherEstimate,
};
use qadv_core::rng::{self, domain};
use qadv_core::stats::MeanEstimate;
use qadv_core::train::{adversarial_train, TrainConfig};
use qadv_core::Povm;

use crate::config::{ExperimentConfig, Outputs, PovmSource};
use crate::povm_file;
use crate::CliError;

/// Marker recorded in every report: curves are Monte Carlo means of `|𝒢|`.
pub const GEN_ERROR_CONVENTION: &str = "mean_abs";

/// One CSV row. Column names are part of the output contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "T")]
    pub t: usize,
    pub g_clean: f64,
    pub g_clean_stderr: f64,
    pub g_adv: f64,
    pub g_adv_stderr: f64,
    pub udb_clean: f64,
    pub udb_adv: f64,
    pub bound_banchi: f64,
    pub bound_adv: f64,
    pub bound_general: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "Delta")]
    pub delta_floor: f64,
    pub valid_regime: bool,
}

/// Per-`T` quantities that do not fit the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(rename = "T")]
    pub t: usize,
    pub g_clean_signed: MeanEstimate,
    pub g_adv_signed: MeanEstimate,
    pub rademacher_clean: RademacherEstimate,
    pub rademacher_adv: RademacherEstimate,
    /// Paired per-dataset `adversarial − clean` Rademacher difference.
    pub rademacher_gap: MeanEstimate,
    pub validity_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub gen_error_convention: &'static str,
    /// Smallest eigenvalue over the embedded grid.
    pub floor_measured: f64,
    /// `q/d`.
    pub floor_analytic: f64,
    /// Floor used for bound validity (the override when present).
    pub floor_used: f64,
    pub i2_bits: f64,
    pub rows: Vec<Row>,
    pub diagnostics: Vec<Diagnostics>,
}

/// Creates (and truncates) every configured output so that unwritable paths
/// fail before any computation.
pub fn open_outputs(outputs: &Outputs) -> Result<OpenOutputs, CliError> {
    let open = |p: &Option<std::path::PathBuf>| -> Result<Option<File>, CliError> {
        p.as_ref()
            .map(|path| {
                File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
            })
            .transpose()
    };
    Ok(OpenOutputs {
        csv: open(&outputs.csv)?,
        json: open(&outputs.json)?,
        svg: open(&outputs.svg)?,
    })
}

pub struct OpenOutputs {
    csv: Option<File>,
    json: Option<File>,
    svg: Option<File>,
}

impl OpenOutputs {
    pub fn write(self, report: &ExperimentReport) -> Result<(), CliError> {
        let csv = render_csv(&report.rows)?;
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        if let Some(mut f) = self.csv {
            f.write_all(csv.as_bytes()).map_err(io)?;
        }
        if let Some(mut f) = self.json {
            f.write_all(render_json(report)?.as_bytes()).map_err(io)?;
        }
        if let Some(mut f) = self.svg {
            f.write_all(crate::plot::render_svg(&csv)?.as_bytes()).map_err(io)?;
        }
        Ok(())
    }
}

pub fn render_csv(rows: &[Row]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>, CliError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| CliError::Validation(format!("malformed experiment CSV: {e}")))
}

pub fn render_json(report: &ExperimentReport) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Pair of POVMs evaluated on one dataset: `(clean, adversarial)`.
struct Measured {
    clean: LossPair,
    adv: LossPair,
}

/// Train-side and test-side loss tables of one POVM.
struct LossPair {
    train: LossTable,
    test: LossTable,
}

impl LossPair {
    fn build(grid: &EmbeddedGrid, povm: &Povm, train: Option<&AttackSpec>, test: Option<&AttackSpec>) -> Result<Self, CliError> {
        let train_table = LossTable::build(grid, povm, train)?;
        let test_table = if train == test {
            train_table.clone()
        } else {
            LossTable::build(grid, povm, test)?
        };
        Ok(LossPair {
            train: train_table,
            test: test_table,
        })
    }

    fn gen_errors(&self, grid: &EmbeddedGrid, datasets: &[Dataset]) -> Result<Vec<f64>, CliError> {
        Ok(gen_errors_fixed(&self.train, &self.test, &grid.prior, datasets)?)
    }
}

fn trained_povm(
    grid: &EmbeddedGrid,
    dataset: &Dataset,
    attack: AttackSpec,
    seed: u64,
    max_outer_iters: usize,
    num_restarts: usize,
) -> Result<Povm, CliError> {
    let mut config = TrainConfig::new(attack, seed);
    config.num_classes = grid.data.num_classes;
    config.max_outer_iters = max_outer_iters;
    config.num_restarts = num_restarts;
    Ok(adversarial_train(dataset, &grid.embedding, &config)?.povm)
}

/// Signed generalization errors `(clean, adversarial)` for each dataset.
fn gen_errors_at(
    config: &ExperimentConfig,
    grid: &EmbeddedGrid,
    fixed: Option<&Measured>,
    datasets: &[Dataset],
    t: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let (train, test) = (&config.attacks.train, &config.attacks.test);
    if let Some(m) = fixed {
        return Ok((m.clean.gen_errors(grid, datasets)?, m.adv.gen_errors(grid, datasets)?));
    }
    let PovmSource::Trained {
        max_outer_iters,
        num_restarts,
    } = config.povm
    else {
        unreachable!("fixed POVM sources are measured once");
    };
    let clean_attack = AttackSpec::new(train.p, 0.0)?;
    let per: Vec<(f64, f64)> = datasets
        .par_iter()
        .take(config.mc.train_datasets)
        .enumerate()
        .map(|(i, ds)| {
            let s = rng::substream(seed, &[domain::TRAIN_RESTART, t as u64, i as u64]).random::<u64>();
            let clean = trained_povm(grid, ds, clean_attack, s, max_outer_iters, num_restarts)?;
            let adv = trained_povm(grid, ds, *train, s, max_outer_iters, num_restarts)?;
            let one = std::slice::from_ref(ds);
            let g_clean = LossPair::build(grid, &clean, None, None)?.gen_errors(grid, one)?[0];
            let g_adv = LossPair::build(grid, &adv, Some(train), Some(test))?.gen_errors(grid, one)?[0];
            Ok((g_clean, g_adv))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(per.into_iter().unzip())
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport, CliError> {
    config.validate()?;
    let grid = EmbeddedGrid::new(config.embedding, config.data)?;
    let k = config.data.num_classes;
    let d = grid.dim();
    let floor_measured = grid.floor();
    let floor_used = config.floor_override.unwrap_or(floor_measured.max(0.0));
    let i2 = grid.mutual_information()?;
    let (train, test) = (&config.attacks.train, &config.attacks.test);

    let fixed_povm = match &config.povm {
        PovmSource::FixedComputational if k == d => Some(Povm::computational(d)),
        PovmSource::FixedComputational => {
            return Err(CliError::Validation(format!(
                "the computational POVM has {d} outcomes but the data has K = {k} classes"
            )))
        }
        PovmSource::File { path } => Some(povm_file::read(path)?),
        PovmSource::Trained { .. } => None,
    };
    let fixed = fixed_povm
        .map(|p| -> Result<Measured, CliError> {
            Ok(Measured {
                clean: LossPair::build(&grid, &p, None, None)?,
                adv: LossPair::build(&grid, &p, Some(train), Some(test))?,
            })
        })
        .transpose()?;

    let mut rows = Vec::with_capacity(config.t_grid.len());
    let mut diagnostics = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let datasets = grid.draw_datasets(t, config.mc.num_datasets, seed)?;
        let (g_clean, g_adv) = gen_errors_at(config, &grid, fixed.as_ref(), &datasets, t, seed)?;
        let clean = summarize_gen_errors(&g_clean);
        let adv = summarize_gen_errors(&g_adv);

        let prefix = &datasets[..config.mc.rademacher_datasets.min(datasets.len())];
        let rad = rademacher_adversarial(&grid, prefix, test, &config.mc.sigma, &config.mc.multistart, seed)?;

        let inputs = BoundInputs {
            k,
            t,
            delta: config.delta,
            d,
            floor: floor_used,
            i2,
            log_base: LogBase::Natural,
        };
        let theorem = adv_bound(&inputs, test.epsilon, test.p)?;
        rows.push(Row {
            t,
            g_clean: clean.absolute.mean,
            g_clean_stderr: clean.absolute.stderr,
            g_adv: adv.absolute.mean,
            g_adv_stderr: adv.absolute.stderr,
            udb_clean: uniform_deviation_bound(rad.clean.value, t, config.delta, LogBase::Natural)?,
            udb_adv: uniform_deviation_bound(rad.adversarial.value, t, config.delta, LogBase::Natural)?,
            bound_banchi: banchi_bound(&inputs)?,
            bound_adv: theorem.total,
            bound_general: adv_bound_general(&inputs, test.epsilon, test.p)?.total,
            i2,
            delta_floor: floor_used,
            valid_regime: theorem.valid,
        });
        diagnostics.push(Diagnostics {
            t,
            g_clean_signed: clean.signed,
            g_adv_signed: adv.signed,
            rademacher_clean: rad.clean,
            rademacher_adv: rad.adversarial,
            rademacher_gap: rad.gap,
            validity_reason: theorem.validity_reason,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        seed,
        gen_error_convention: GEN_ERROR_CONVENTION,
        floor_measured,
        floor_analytic: config.embedding.analytic_floor(),
        floor_used,
        i2_bits: i2,
        rows,
        diagnostics,
    })
}

/// Runs the experiment and writes every configured output.
pub fn run_to_outputs(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport, CliError> {
    config.validate()?;
    let files = open_outputs(&config.outputs)?;
    let report = run_experiment(config, seed)?;
    files.write(&report)?;
    Ok(report)
}

/// Reads a CSV written by [`render_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text)
}
