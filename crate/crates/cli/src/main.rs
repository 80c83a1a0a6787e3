//! Command-line harness for the counterfactual learning-to-rank pipelines.
//!
//! Subcommands mirror the experiment stages: `simulate` biased click logs,
//! `estimate-propensities` via swap interventions, `train` and `evaluate`
//! individual models, and the four sweep commands that emit CSV results.
//! Configuration comes from a TOML file (`--config`) with CLI flags taking
//! precedence. Exit codes: 0 success, 1 configuration error, 2 data error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proprank::click::{
    read_click_log, simulate_clicks_until, write_click_log, BiasProfile, NoiseParams,
};
use proprank::dataset::Split;
use proprank::error::Error;
use proprank::estimator::{estimate_risk, Estimator};
use proprank::experiment::{
    self, bias_sweep, build_corpus, derive_seed, estimate_propensities, learning_curve,
    misspec_sweep, noise_sweep, rows_to_csv, rows_to_gnuplot, train_production_ranker,
    ExperimentSpec, ResultRow,
};
use proprank::ranking::{full_info_risk, LinearModel};

#[derive(Parser)]
#[command(name = "proprank", version, about = "Counterfactual learning-to-rank harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Declarative experiment config (TOML, `key = value` sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for logs, models, and CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `synthetic` or a directory with train.txt, vali.txt, test.txt.
    #[arg(long)]
    dataset: Option<String>,
    /// Bias severity of the click model.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eps_plus: Option<f64>,
    #[arg(long)]
    eps_minus: Option<f64>,
    /// Click budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_clicks: Option<Vec<u64>>,
    /// Assumed severities for the misspecification sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    assumed_eta: Option<Vec<f64>>,
    /// Clipping thresholds to cross-validate, comma separated (0 = none).
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    /// Regularization values to cross-validate, comma separated.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// Also write a gnuplot-friendly .dat file next to each CSV.
    #[arg(long)]
    emit_gnuplot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a biased click log (and the production model it used).
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run swap interventions and fit a propensity model.
    EstimatePropensities {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Cross-validate one method on a click log and write the model.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Training click log (TSV from `simulate`).
        #[arg(long)]
        log: PathBuf,
        /// Validation click log; generated from the config when omitted.
        #[arg(long)]
        validation_log: Option<PathBuf>,
        /// naive | propensity | propensity_clipped
        #[arg(long, default_value = "propensity")]
        method: String,
    },
    /// Report the full-information test risk of a saved model.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        model: PathBuf,
        /// Optional click log to also report an estimated risk from.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Estimator for the log-based estimate: naive | ips | clipped.
        #[arg(long, default_value = "ips")]
        estimator: String,
        /// Clipping threshold when `--estimator clipped`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Risk vs click budget for naive/propensity/clipped methods.
    LearningCurve {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Risk vs bias severity eta.
    BiasSweep {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Risk vs click noise eps_minus.
    NoiseSweep {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Risk vs assumed eta under a fixed true eta.
    MisspecSweep {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn resolve_spec(common: &CommonOpts) -> Result<ExperimentSpec, Error> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(source) = &common.dataset {
        if source == "synthetic" {
            spec.dataset.source = "synthetic".into();
        } else {
            let dir = Path::new(source);
            spec.dataset.source = "letor".into();
            spec.dataset.train_path = Some(dir.join("train.txt").display().to_string());
            spec.dataset.validation_path = Some(dir.join("vali.txt").display().to_string());
            spec.dataset.test_path = Some(dir.join("test.txt").display().to_string());
        }
    }
    if let Some(eta) = common.eta {
        spec.simulation.eta = eta;
    }
    if let Some(v) = common.eps_plus {
        spec.simulation.eps_plus = v;
    }
    if let Some(v) = common.eps_minus {
        spec.simulation.eps_minus = v;
    }
    if let Some(v) = &common.n_clicks {
        spec.sweep.n_clicks = v.clone();
    }
    if let Some(v) = &common.assumed_eta {
        spec.sweep.assumed_etas = v.clone();
    }
    if let Some(v) = &common.tau_grid {
        spec.learner.tau_grid = v.clone();
    }
    if let Some(v) = &common.c_grid {
        spec.learner.c_grid = v.clone();
    }
    Ok(spec)
}

fn write_rows(
    common: &CommonOpts,
    name: &str,
    rows: &[ResultRow],
) -> Result<PathBuf, Error> {
    fs::create_dir_all(&common.out)?;
    let csv_path = common.out.join(format!("{name}.csv"));
    fs::write(&csv_path, rows_to_csv(rows)?)?;
    if common.emit_gnuplot {
        fs::write(common.out.join(format!("{name}.dat")), rows_to_gnuplot(rows))?;
    }
    Ok(csv_path)
}

fn run_sweep(
    common: &CommonOpts,
    name: &str,
    f: fn(&ExperimentSpec) -> Result<Vec<ResultRow>, Error>,
) -> Result<(), Error> {
    let spec = resolve_spec(common)?;
    let rows = f(&spec)?;
    let path = write_rows(common, name, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn cmd_simulate(common: &CommonOpts) -> Result<(), Error> {
    let spec = resolve_spec(common)?;
    let corpus = build_corpus(&spec)?;
    let prod = train_production_ranker(&spec, &corpus)?;
    let profile = BiasProfile::new(spec.simulation.eta)?;
    let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
    let target = *spec
        .sweep
        .n_clicks
        .first()
        .ok_or_else(|| Error::Config("simulate needs --n-clicks".into()))? as usize;
    let log = simulate_clicks_until(
        &corpus.train,
        &prod,
        &profile,
        &noise,
        target,
        derive_seed(spec.seed, &[100]),
    )?;
    fs::create_dir_all(&common.out)?;
    let log_path = common.out.join("clicks.tsv");
    write_click_log(&log, &log_path)?;
    let model_path = common.out.join("prod_model.txt");
    prod.write(&model_path)?;
    println!(
        "wrote {} clicks over {} impressions to {} (production model: {})",
        log.n_clicks(),
        log.n_impressions,
        log_path.display(),
        model_path.display()
    );
    Ok(())
}

fn cmd_estimate_propensities(common: &CommonOpts) -> Result<(), Error> {
    let spec = resolve_spec(common)?;
    let out = estimate_propensities(&spec)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("propensities.tsv");
    out.model.write(&path)?;
    println!("rank\tctr\tratio\tstd_err\tfitted_p");
    for arm in &out.result.arms {
        let fitted = out.model.propensity_at(arm.rank).unwrap_or(f64::NAN);
        println!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            arm.rank, arm.ctr, arm.ratio, arm.std_err, fitted
        );
    }
    println!("wrote propensity model to {}", path.display());
    Ok(())
}

fn cmd_train(
    common: &CommonOpts,
    log_path: &Path,
    validation_log: &Option<PathBuf>,
    method: &str,
) -> Result<(), Error> {
    let spec = resolve_spec(common)?;
    let corpus = build_corpus(&spec)?;
    let train_log = read_click_log(log_path)?;
    let val_log = match validation_log {
        Some(p) => read_click_log(p)?,
        None => {
            let prod = train_production_ranker(&spec, &corpus)?;
            let profile = BiasProfile::new(spec.simulation.eta)?;
            let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
            let target = ((train_log.n_clicks() as f64
                * spec.protocol.validation_click_fraction)
                .ceil() as usize)
                .max(1);
            simulate_clicks_until(
                &corpus.validation,
                &prod,
                &profile,
                &noise,
                target,
                derive_seed(spec.seed, &[101]),
            )?
        }
    };
    let method = if method == "clipped" {
        "propensity_clipped"
    } else {
        method
    };
    let (model, c, tau) =
        experiment::train_from_logs(&spec, &corpus, &train_log, &val_log, method)?;
    fs::create_dir_all(&common.out)?;
    let model_path = common.out.join("model.txt");
    model.write(&model_path)?;
    let test_risk = full_info_risk(&model, &corpus.test)?;
    println!(
        "method={method} chosen_c={c} chosen_tau={} test_risk={test_risk}",
        tau.map_or("none".into(), |t| t.to_string())
    );
    println!("wrote model to {}", model_path.display());
    Ok(())
}

fn cmd_evaluate(
    common: &CommonOpts,
    model_path: &Path,
    log: &Option<PathBuf>,
    estimator: &str,
    tau: Option<f64>,
) -> Result<(), Error> {
    let spec = resolve_spec(common)?;
    let corpus = build_corpus(&spec)?;
    let model: LinearModel<f64> = LinearModel::read(model_path)?;
    let test_risk = full_info_risk(&model, &corpus.test)?;
    println!("test_risk={test_risk}");
    if let Some(log_path) = log {
        let log = read_click_log(log_path)?;
        let est = match estimator {
            "naive" => Estimator::Naive,
            "ips" => Estimator::Ips,
            "clipped" => Estimator::ClippedIps {
                tau: tau.ok_or_else(|| Error::Config("--tau required for clipped".into()))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator `{other}` (naive | ips | clipped)"
                )))
            }
        };
        let split = match log.records.first().map(|r| r.query_id) {
            Some(qid) if corpus.train.query_index().contains_key(&qid) => &corpus.train,
            Some(qid) if corpus.validation.query_index().contains_key(&qid) => &corpus.validation,
            _ => &corpus.test,
        };
        let estimated = estimate_risk(&model, &log, split, &est)?;
        println!(
            "estimated_risk={} n_clicks={} n_impressions={} split={}",
            estimated.value,
            estimated.n_clicks,
            estimated.n_impressions,
            match split.split {
                Split::Train => "train",
                Split::Validation => "validation",
                Split::Test => "test",
            }
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::EstimatePropensities { common } => cmd_estimate_propensities(common),
        Command::Train {
            common,
            log,
            validation_log,
            method,
        } => cmd_train(common, log, validation_log, method),
        Command::Evaluate {
            common,
            model,
            log,
            estimator,
            tau,
        } => cmd_evaluate(common, model, log, estimator, *tau),
        Command::LearningCurve { common } => run_sweep(common, "learning_curve", learning_curve),
        Command::BiasSweep { common } => run_sweep(common, "bias_sweep", bias_sweep),
        Command::NoiseSweep { common } => run_sweep(common, "noise_sweep", noise_sweep),
        Command::MisspecSweep { common } => run_sweep(common, "misspec_sweep", misspec_sweep),
    }
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Experiment(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
