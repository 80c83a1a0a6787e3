//! End-to-end experiment pipelines over synthetic or LETOR corpora.
//!
//! A pipeline builds a corpus, trains a production ranker on a small
//! fraction of the training split, generates biased click logs with it,
//! cross-validates the click-trained methods, and scores everything on the
//! full-information test split. Results come back as [`ResultRow`]s ready
//! for CSV emission; all randomness derives from the spec seed, so equal
//! specs produce byte-identical output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::click::{
    simulate_clicks, simulate_clicks_until, BiasProfile, ClickLog, NoiseParams,
};
use crate::dataset::{subsample_queries, Corpus, SyntheticConfig};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::learning::{cross_validate, train_full_info_ranker, HyperparamGrid, LearnerConfig, TrainMode};
use crate::propensity::{
    fit_propensity_model, run_swap_experiment, PropensityModel, PropensitySource,
    SwapExperimentConfig, SwapExperimentResult,
};
use crate::ranking::{full_info_risk, LinearModel};

/// Where the corpus comes from and how big it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    /// `"synthetic"` or `"letor"`.
    pub source: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_candidates: usize,
    pub feature_dim: usize,
    pub relevant_fraction: f64,
    pub noise_scale: f64,
    pub train_path: Option<String>,
    pub validation_path: Option<String>,
    pub test_path: Option<String>,
    pub binarize_at: u32,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            source: "synthetic".into(),
            n_train: 2000,
            n_validation: 400,
            n_test: 500,
            n_candidates: 30,
            feature_dim: 20,
            relevant_fraction: 0.1,
            noise_scale: 0.2,
            train_path: None,
            validation_path: None,
            test_path: None,
            binarize_at: 3,
        }
    }
}

/// Click-generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub eta: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            eta: 1.0,
            eps_plus: 1.0,
            eps_minus: 0.1,
        }
    }
}

/// Protocol knobs shared by the sweep commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSpec {
    /// Fraction of the training split used to fit the production ranker.
    pub prod_fraction: f64,
    /// Regularization for the production ranker.
    pub prod_c: f64,
    /// Validation log size relative to the training log.
    pub validation_click_fraction: f64,
    /// Number of independent click draws averaged per point.
    pub n_seed_draws: usize,
    /// Click counts below this get the multi-draw treatment.
    pub avg_seeds_below: u64,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            prod_fraction: 0.01,
            prod_c: 1.0,
            validation_click_fraction: 0.15,
            n_seed_draws: 5,
            avg_seeds_below: 100_000,
        }
    }
}

/// Hyperparameter grids and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSpec {
    pub c_grid: Vec<f64>,
    /// Clipping thresholds for the clipped method; `0` means unclipped.
    pub tau_grid: Vec<f64>,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            tau_grid: vec![1.0, 0.3, 0.1, 0.03, 0.01, 0.0],
            tolerance: 1e-4,
            max_epochs: 200,
        }
    }
}

/// Sweep axes; each command reads the one it varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub n_clicks: Vec<u64>,
    pub etas: Vec<f64>,
    pub eps_minus_values: Vec<f64>,
    pub assumed_etas: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            n_clicks: vec![2_000, 5_000, 50_000],
            etas: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            eps_minus_values: vec![0.0, 0.1, 0.2, 0.3],
            assumed_etas: vec![0.0, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

/// Swap-intervention settings for propensity estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwapSpec {
    pub landmark_rank: usize,
    pub swap_ranks: Vec<usize>,
    pub impressions_per_arm: u64,
    pub lambda: f64,
}

impl Default for SwapSpec {
    fn default() -> Self {
        SwapSpec {
            landmark_rank: 1,
            swap_ranks: (1..=10).collect(),
            impressions_per_arm: 1_000_000,
            lambda: 0.0,
        }
    }
}

/// Full declarative description of an experiment run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub simulation: SimulationSpec,
    pub protocol: ProtocolSpec,
    pub learner: LearnerSpec,
    pub sweep: SweepSpec,
    pub swap: SwapSpec,
}

impl ExperimentSpec {
    /// Hash of the resolved configuration, carried on every CSV row.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{self:?}").as_bytes());
        let digest = hasher.finalize();
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One emitted measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub method: String,
    pub test_risk: f64,
    pub n_clicks: u64,
    pub n_impressions: u64,
    pub seed: u64,
    pub chosen_c: Option<f64>,
    pub chosen_tau: Option<f64>,
    pub config_hash: String,
}

pub const METHOD_PROD: &str = "prod_baseline";
pub const METHOD_NAIVE: &str = "naive";
pub const METHOD_PROPENSITY: &str = "propensity";
pub const METHOD_PROPENSITY_CLIPPED: &str = "propensity_clipped";
pub const METHOD_SKYLINE: &str = "skyline";

// ── Seed derivation ─────────────────────────────────────────────────────

const TAG_PROD: u64 = 1;
const TAG_TRAIN_LOG: u64 = 2;
const TAG_VAL_LOG: u64 = 3;
const TAG_SWAP: u64 = 4;
const TAG_CTR_LOG: u64 = 5;
const AXIS_LEARNING_CURVE: u64 = 10;
const AXIS_BIAS: u64 = 11;
const AXIS_NOISE: u64 = 12;
const AXIS_MISSPEC: u64 = 13;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed derivation: a splitmix chain over the master seed and tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for &t in tags {
        acc = mix(acc ^ mix(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    acc
}

// ── Harness ─────────────────────────────────────────────────────────────

/// Corpus plus the rankers that are computed once and reused by every sweep
/// point: the production baseline and the full-information skyline.
pub struct Harness {
    pub spec: ExperimentSpec,
    pub corpus: Corpus<f64>,
    pub prod: LinearModel<f64>,
    pub prod_risk: f64,
    pub skyline: LinearModel<f64>,
    pub skyline_c: f64,
    pub skyline_risk: f64,
    config_hash: String,
}

/// Builds the corpus named by the spec.
pub fn build_corpus(spec: &ExperimentSpec) -> Result<Corpus<f64>> {
    let d = &spec.dataset;
    match d.source.as_str() {
        "synthetic" => {
            let cfg = SyntheticConfig {
                n_queries: d.n_train.max(1),
                n_candidates: d.n_candidates,
                feature_dim: d.feature_dim,
                relevant_fraction: d.relevant_fraction,
                noise_scale: d.noise_scale,
            };
            Corpus::synthesize(spec.seed, &cfg, d.n_train, d.n_validation, d.n_test)
        }
        "letor" => {
            let missing = |what: &str| Error::config(format!("letor source needs {what}"));
            Corpus::load_letor(
                d.train_path.as_ref().ok_or_else(|| missing("train_path"))?,
                d.validation_path
                    .as_ref()
                    .ok_or_else(|| missing("validation_path"))?,
                d.test_path.as_ref().ok_or_else(|| missing("test_path"))?,
                d.binarize_at,
            )
        }
        other => Err(Error::config(format!(
            "unknown dataset source `{other}` (expected `synthetic` or `letor`)"
        ))),
    }
}

/// Trains the production ranker on a fraction of the training split.
pub fn train_production_ranker(
    spec: &ExperimentSpec,
    corpus: &Corpus<f64>,
) -> Result<LinearModel<f64>> {
    let sub = subsample_queries(
        &corpus.train,
        spec.protocol.prod_fraction,
        derive_seed(spec.seed, &[TAG_PROD]),
    )?;
    train_full_info_ranker(&sub, spec.protocol.prod_c, spec.learner.tolerance)
}

impl Harness {
    pub fn prepare(spec: &ExperimentSpec) -> Result<Self> {
        let corpus = build_corpus(spec)?;
        let prod = train_production_ranker(spec, &corpus)?;
        let prod_risk = full_info_risk(&prod, &corpus.test)?;

        // Skyline: full-information training on the whole train split, C
        // picked by full-information validation risk.
        let mut best: Option<(LinearModel<f64>, f64, f64)> = None;
        for &c in &spec.learner.c_grid {
            let model = train_full_info_ranker(&corpus.train, c, spec.learner.tolerance)?;
            let val = full_info_risk(&model, &corpus.validation)?;
            if best.as_ref().is_none_or(|(_, _, v)| val < *v) {
                best = Some((model, c, val));
            }
        }
        let (skyline, skyline_c, _) =
            best.ok_or_else(|| Error::config("empty C grid for skyline"))?;
        let skyline_risk = full_info_risk(&skyline, &corpus.test)?;

        Ok(Harness {
            config_hash: spec.config_hash(),
            spec: spec.clone(),
            corpus,
            prod,
            prod_risk,
            skyline,
            skyline_c,
            skyline_risk,
        })
    }

    fn learner_base(&self) -> LearnerConfig<f64> {
        LearnerConfig {
            tolerance: self.spec.learner.tolerance,
            max_epochs: self.spec.learner.max_epochs,
            ..LearnerConfig::default()
        }
    }

    fn n_draws(&self, n_clicks: u64) -> usize {
        if n_clicks < self.spec.protocol.avg_seeds_below {
            self.spec.protocol.n_seed_draws.max(1)
        } else {
            1
        }
    }

    fn draw_logs(
        &self,
        profile: &BiasProfile<f64>,
        noise: &NoiseParams<f64>,
        n_clicks: u64,
        axis: u64,
        point_tag: u64,
        draw: usize,
    ) -> Result<(ClickLog<f64>, ClickLog<f64>, u64)> {
        let train_seed = derive_seed(
            self.spec.seed,
            &[axis, point_tag, draw as u64, TAG_TRAIN_LOG],
        );
        let val_seed = derive_seed(self.spec.seed, &[axis, point_tag, draw as u64, TAG_VAL_LOG]);
        let train_log = simulate_clicks_until(
            &self.corpus.train,
            &self.prod,
            profile,
            noise,
            n_clicks as usize,
            train_seed,
        )?;
        let val_target =
            ((n_clicks as f64 * self.spec.protocol.validation_click_fraction).ceil() as usize)
                .max(1);
        let val_log = simulate_clicks_until(
            &self.corpus.validation,
            &self.prod,
            profile,
            noise,
            val_target,
            val_seed,
        )?;
        Ok((train_log, val_log, train_seed))
    }

    fn run_method(
        &self,
        method: &str,
        train_log: &ClickLog<f64>,
        val_log: &ClickLog<f64>,
    ) -> Result<(f64, f64, Option<f64>)> {
        let base = self.learner_base();
        let (mode, grid) = match method {
            METHOD_NAIVE => (
                TrainMode::Naive,
                HyperparamGrid {
                    c_values: self.spec.learner.c_grid.clone(),
                    tau_values: None,
                },
            ),
            METHOD_PROPENSITY => (
                TrainMode::Propensity,
                HyperparamGrid {
                    c_values: self.spec.learner.c_grid.clone(),
                    tau_values: None,
                },
            ),
            METHOD_PROPENSITY_CLIPPED => (
                TrainMode::Propensity,
                HyperparamGrid {
                    c_values: self.spec.learner.c_grid.clone(),
                    tau_values: Some(self.spec.learner.tau_grid.clone()),
                },
            ),
            other => return Err(Error::config(format!("unknown method `{other}`"))),
        };
        let (model, chosen) = cross_validate(
            train_log,
            val_log,
            &self.corpus.train,
            &self.corpus.validation,
            &grid,
            mode,
            &base,
        )?;
        let risk = full_info_risk(&model, &self.corpus.test)?;
        Ok((risk, chosen.c, chosen.tau))
    }

    fn reference_rows(&self, sweep_param: &str, sweep_value: f64) -> Vec<ResultRow> {
        vec![
            ResultRow {
                sweep_param: sweep_param.into(),
                sweep_value,
                method: METHOD_PROD.into(),
                test_risk: self.prod_risk,
                n_clicks: 0,
                n_impressions: 0,
                seed: self.spec.seed,
                chosen_c: Some(self.spec.protocol.prod_c),
                chosen_tau: None,
                config_hash: self.config_hash.clone(),
            },
            ResultRow {
                sweep_param: sweep_param.into(),
                sweep_value,
                method: METHOD_SKYLINE.into(),
                test_risk: self.skyline_risk,
                n_clicks: 0,
                n_impressions: 0,
                seed: self.spec.seed,
                chosen_c: Some(self.skyline_c),
                chosen_tau: None,
                config_hash: self.config_hash.clone(),
            },
        ]
    }

    fn method_row(
        &self,
        sweep_param: &str,
        sweep_value: f64,
        method: &str,
        train_log: &ClickLog<f64>,
        val_log: &ClickLog<f64>,
        seed: u64,
    ) -> Result<ResultRow> {
        let (risk, c, tau) = self.run_method(method, train_log, val_log)?;
        Ok(ResultRow {
            sweep_param: sweep_param.into(),
            sweep_value,
            method: method.into(),
            test_risk: risk,
            n_clicks: train_log.n_clicks() as u64,
            n_impressions: train_log.n_impressions,
            seed,
            chosen_c: Some(c),
            chosen_tau: tau,
            config_hash: self.config_hash.clone(),
        })
    }
}

// ── Sweep commands ──────────────────────────────────────────────────────

/// Learning curves: naive, propensity, and clipped-propensity risk as the
/// click budget grows, plus the constant production and skyline references.
pub fn learning_curve(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let h = Harness::prepare(spec)?;
    let profile = BiasProfile::new(spec.simulation.eta)?;
    let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
    let mut rows = Vec::new();
    for &n in &spec.sweep.n_clicks {
        for draw in 0..h.n_draws(n) {
            let (train_log, val_log, seed) =
                h.draw_logs(&profile, &noise, n, AXIS_LEARNING_CURVE, n, draw)?;
            for method in [METHOD_NAIVE, METHOD_PROPENSITY, METHOD_PROPENSITY_CLIPPED] {
                rows.push(h.method_row("n_clicks", n as f64, method, &train_log, &val_log, seed)?);
            }
        }
        rows.extend(h.reference_rows("n_clicks", n as f64));
    }
    Ok(rows)
}

/// Bias severity sweep: naive vs propensity at each eta, for each click
/// budget in the spec (the classic pairing is `n` and `5n`).
pub fn bias_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let h = Harness::prepare(spec)?;
    let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
    let mut rows = Vec::new();
    for &eta in &spec.sweep.etas {
        let profile = BiasProfile::new(eta)?;
        for &n in &spec.sweep.n_clicks {
            for draw in 0..h.n_draws(n) {
                let point_tag = mix(eta.to_bits() ^ n);
                let (train_log, val_log, seed) =
                    h.draw_logs(&profile, &noise, n, AXIS_BIAS, point_tag, draw)?;
                for method in [METHOD_NAIVE, METHOD_PROPENSITY] {
                    rows.push(h.method_row("eta", eta, method, &train_log, &val_log, seed)?);
                }
            }
        }
    }
    Ok(rows)
}

/// Click-noise sweep: naive vs propensity as `eps_minus` rises.
pub fn noise_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let h = Harness::prepare(spec)?;
    let profile = BiasProfile::new(spec.simulation.eta)?;
    let mut rows = Vec::new();
    for &eps in &spec.sweep.eps_minus_values {
        let noise = NoiseParams::new(spec.simulation.eps_plus, eps)?;
        for &n in &spec.sweep.n_clicks {
            for draw in 0..h.n_draws(n) {
                let point_tag = mix(eps.to_bits() ^ n);
                let (train_log, val_log, seed) =
                    h.draw_logs(&profile, &noise, n, AXIS_NOISE, point_tag, draw)?;
                for method in [METHOD_NAIVE, METHOD_PROPENSITY] {
                    rows.push(h.method_row("eps_minus", eps, method, &train_log, &val_log, seed)?);
                }
            }
        }
    }
    Ok(rows)
}

/// Misspecification sweep: clicks are generated with the true eta, but the
/// propensity method is trained with logs relabeled to each assumed eta.
/// The naive reference row is emitted at sweep value 0 (assumed eta of 0 is
/// exactly the naive weighting).
pub fn misspec_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let h = Harness::prepare(spec)?;
    let true_profile = BiasProfile::new(spec.simulation.eta)?;
    let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
    let n = *spec
        .sweep
        .n_clicks
        .first()
        .ok_or_else(|| Error::config("misspec sweep needs a click count"))?;
    let mut rows = Vec::new();
    for draw in 0..h.n_draws(n) {
        let (train_log, val_log, seed) =
            h.draw_logs(&true_profile, &noise, n, AXIS_MISSPEC, n, draw)?;
        rows.push(h.method_row("assumed_eta", 0.0, METHOD_NAIVE, &train_log, &val_log, seed)?);
        for &assumed in &spec.sweep.assumed_etas {
            let assumed_profile = BiasProfile::new(assumed)?;
            let source = PropensitySource::Profile(&assumed_profile);
            let train_relabeled = crate::propensity::relabel_log(&train_log, source)?;
            let val_relabeled = crate::propensity::relabel_log(&val_log, source)?;
            rows.push(h.method_row(
                "assumed_eta",
                assumed,
                METHOD_PROPENSITY,
                &train_relabeled,
                &val_relabeled,
                seed,
            )?);
        }
    }
    Ok(rows)
}

/// Output of the propensity-estimation command.
#[derive(Debug, Clone)]
pub struct PropensityEstimate {
    pub result: SwapExperimentResult<f64>,
    pub model: PropensityModel<f64>,
    pub ctr_by_rank: Vec<f64>,
}

/// Runs the swap experiment against the production ranker and fits a
/// propensity model, optionally smoothing with the observational CTR curve.
pub fn estimate_propensities(spec: &ExperimentSpec) -> Result<PropensityEstimate> {
    let corpus = build_corpus(spec)?;
    let prod = train_production_ranker(spec, &corpus)?;
    let profile = BiasProfile::new(spec.simulation.eta)?;
    let noise = NoiseParams::new(spec.simulation.eps_plus, spec.simulation.eps_minus)?;
    let cfg = SwapExperimentConfig {
        landmark_rank: spec.swap.landmark_rank,
        swap_ranks: spec.swap.swap_ranks.clone(),
        impressions_per_arm: spec.swap.impressions_per_arm,
        seed: derive_seed(spec.seed, &[TAG_SWAP]),
    };
    let result = run_swap_experiment(&corpus.train, &prod, &profile, &noise, &cfg)?;

    let ctr_log = simulate_clicks(
        &corpus.train,
        &prod,
        &profile,
        &noise,
        spec.swap.impressions_per_arm.clamp(1, 200_000),
        derive_seed(spec.seed, &[TAG_CTR_LOG]),
    )?;
    let ctr_by_rank = crate::click::empirical_click_rate_by_rank(&ctr_log);
    let model = fit_propensity_model(&result, spec.swap.lambda, &ctr_by_rank)?;
    Ok(PropensityEstimate {
        result,
        model,
        ctr_by_rank,
    })
}

/// Convenience for the CLI `train` command: cross-validate one method on
/// already-loaded logs against a corpus.
pub fn train_from_logs(
    spec: &ExperimentSpec,
    corpus: &Corpus<f64>,
    train_log: &ClickLog<f64>,
    val_log: &ClickLog<f64>,
    method: &str,
) -> Result<(LinearModel<f64>, f64, Option<f64>)> {
    let (mode, taus) = match method {
        METHOD_NAIVE => (TrainMode::Naive, None),
        METHOD_PROPENSITY => (TrainMode::Propensity, None),
        METHOD_PROPENSITY_CLIPPED => {
            (TrainMode::Propensity, Some(spec.learner.tau_grid.clone()))
        }
        other => {
            return Err(Error::config(format!(
                "unknown method `{other}` (expected naive, propensity, or propensity_clipped)"
            )))
        }
    };
    let grid = HyperparamGrid {
        c_values: spec.learner.c_grid.clone(),
        tau_values: taus,
    };
    let base = LearnerConfig::<f64> {
        tolerance: spec.learner.tolerance,
        max_epochs: spec.learner.max_epochs,
        ..LearnerConfig::default()
    };
    let (model, chosen) = cross_validate(
        train_log,
        val_log,
        &corpus.train,
        &corpus.validation,
        &grid,
        mode,
        &base,
    )?;
    Ok((model, chosen.c, chosen.tau))
}

/// Risk of a model estimated from a log with an explicit estimator kind
/// (used by the CLI `evaluate` command).
pub fn estimate_from_log(
    model: &LinearModel<f64>,
    log: &ClickLog<f64>,
    corpus_split: &crate::dataset::Dataset<f64>,
    estimator: &Estimator<f64>,
) -> Result<f64> {
    Ok(crate::estimator::estimate_risk(model, log, corpus_split, estimator)?.value)
}

// ── CSV / gnuplot emission ──────────────────────────────────────────────

/// Serializes rows as RFC-4180 CSV with a header.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::data(format!("csv serialization failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::data(format!("csv flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::data(format!("csv not utf-8: {e}")))
}

/// Whitespace-separated columns for direct gnuplot consumption.
pub fn rows_to_gnuplot(rows: &[ResultRow]) -> String {
    let mut out = String::from("# sweep_value method test_risk n_clicks seed\n");
    for r in rows {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            r.sweep_value, r.method, r.test_risk, r.n_clicks, r.seed
        ));
    }
    out
}

/// Seed-averaged risk of one method at one sweep value.
pub fn mean_risk(rows: &[ResultRow], method: &str, sweep_value: f64) -> Option<f64> {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.sweep_value == sweep_value)
        .map(|r| r.test_risk)
        .collect();
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

/// Seed-averaged risk filtered by click budget too (for sweeps carrying
/// several click counts per sweep value).
pub fn mean_risk_at_n(
    rows: &[ResultRow],
    method: &str,
    sweep_value: f64,
    min_clicks: u64,
    max_clicks: u64,
) -> Option<f64> {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| {
            r.method == method
                && r.sweep_value == sweep_value
                && r.n_clicks >= min_clicks
                && r.n_clicks <= max_clicks
        })
        .map(|r| r.test_risk)
        .collect();
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }
}
