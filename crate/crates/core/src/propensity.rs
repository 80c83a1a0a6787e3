//! Estimating examination probabilities from swap interventions.
//!
//! Swapping the result at a landmark rank `k` with the result at rank `r`
//! before presentation leaves the click-given-examination term untouched, so
//! the click-through rate on the swapped document is proportional to the
//! examination probability at its new rank. The ratio of swapped-arm CTR to
//! the no-swap landmark CTR therefore estimates `p_r / p_k`, which is all
//! the IPS estimator needs (propensities only matter up to a positive
//! constant).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::click::{present_queries, BiasProfile, ClickLog, NoiseParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ranking::LinearModel;
use crate::scalar::{fmt_sig, real, to_f64, Real};

/// Lower clamp applied to fitted propensities so IPS weights stay finite.
pub const P_MIN: f64 = 1e-6;

/// Rank-indexed examination probabilities, dense for ranks `1..=r_max` and
/// imputed with the deepest value beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel<F> {
    p: Vec<F>,
    lambda: f64,
    landmark: usize,
    p_min: f64,
}

impl<F: Real> PropensityModel<F> {
    /// Builds a model from per-rank values (index 0 is rank 1); values must
    /// lie in `(0, 1]`.
    pub fn new(p: Vec<F>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::config("propensity model needs at least one rank"));
        }
        if p.iter().any(|&v| !(v > F::zero() && v <= F::one())) {
            return Err(Error::config("propensities must lie in (0, 1]"));
        }
        Ok(PropensityModel {
            p,
            lambda: 0.0,
            landmark: 1,
            p_min: P_MIN,
        })
    }

    pub fn r_max(&self) -> usize {
        self.p.len()
    }

    pub fn values(&self) -> &[F] {
        &self.p
    }

    /// Propensity at a 1-based rank; ranks beyond `r_max` take the value at
    /// `r_max`.
    pub fn propensity_at(&self, rank: usize) -> Result<F> {
        if rank < 1 {
            return Err(Error::config("rank must be at least 1"));
        }
        Ok(self.p[rank.min(self.p.len()) - 1])
    }

    /// Writes the model as TSV with a provenance comment.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path.as_ref())?;
        writeln!(
            f,
            "# lambda={}\tlandmark={}\tr_max={}\tp_min={}",
            self.lambda,
            self.landmark,
            self.p.len(),
            self.p_min
        )?;
        writeln!(f, "rank\tp")?;
        for (i, v) in self.p.iter().enumerate() {
            writeln!(f, "{}\t{}", i + 1, fmt_sig(*v, 12))?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(File::open(path.as_ref())?);
        let mut lambda = 0.0f64;
        let mut landmark = 1usize;
        let mut p_min = P_MIN;
        let mut rows: Vec<(usize, F)> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.is_empty() || line == "rank\tp" {
                continue;
            }
            if let Some(comment) = line.strip_prefix("# ") {
                for pair in comment.split('\t') {
                    match pair.split_once('=') {
                        Some(("lambda", v)) => {
                            lambda = v.parse().map_err(|_| Error::parse(lineno, "bad lambda"))?
                        }
                        Some(("landmark", v)) => {
                            landmark = v.parse().map_err(|_| Error::parse(lineno, "bad landmark"))?
                        }
                        Some(("p_min", v)) => {
                            p_min = v.parse().map_err(|_| Error::parse(lineno, "bad p_min"))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let (rank_s, p_s) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected `rank<TAB>p`"))?;
            let rank: usize = rank_s
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid rank"))?;
            let p: f64 = p_s
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid propensity"))?;
            rows.push((rank, real(p)));
        }
        rows.sort_by_key(|(r, _)| *r);
        for (want, (got, _)) in rows.iter().enumerate() {
            if *got != want + 1 {
                return Err(Error::data("propensity ranks must be contiguous from 1"));
            }
        }
        let mut model = PropensityModel::new(rows.into_iter().map(|(_, p)| p).collect())?;
        model.lambda = lambda;
        model.landmark = landmark;
        model.p_min = p_min;
        Ok(model)
    }
}

/// Configuration of a swap-intervention experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapExperimentConfig {
    /// The fixed rank whose document is swapped outward; its no-swap arm
    /// provides the denominator CTR.
    pub landmark_rank: usize,
    /// Target ranks to swap the landmark document to (may include the
    /// landmark itself; the identity arm is run regardless).
    pub swap_ranks: Vec<usize>,
    pub impressions_per_arm: u64,
    pub seed: u64,
}

impl SwapExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.landmark_rank < 1 {
            return Err(Error::config("landmark rank must be at least 1"));
        }
        if self.swap_ranks.is_empty() {
            return Err(Error::config("swap_ranks must be non-empty"));
        }
        if self.swap_ranks.iter().any(|&r| r < 1) {
            return Err(Error::config("swap ranks must be at least 1"));
        }
        if self.impressions_per_arm == 0 {
            return Err(Error::config("impressions_per_arm must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one experiment arm: the landmark document presented at `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapArm<F> {
    pub rank: usize,
    pub impressions: u64,
    pub clicks: u64,
    /// Click-through rate on the swapped (landmark-origin) document.
    pub ctr: F,
    /// Estimated `p_rank / p_landmark`.
    pub ratio: F,
    /// Delta-method standard error of the ratio.
    pub std_err: F,
    /// Queries excluded because they have too few candidates.
    pub skipped_queries: usize,
}

/// Results of a swap experiment, one arm per target rank (sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SwapExperimentResult<F> {
    pub landmark_rank: usize,
    pub arms: Vec<SwapArm<F>>,
}

impl<F: Real> SwapExperimentResult<F> {
    pub fn arm(&self, rank: usize) -> Option<&SwapArm<F>> {
        self.arms.iter().find(|a| a.rank == rank)
    }
}

/// Runs the swap experiment: for each target rank `r`, present the
/// production ranking with ranks `k` and `r` swapped and record clicks on
/// the document that started at rank `k`.
///
/// Queries with fewer candidates than the deepest rank involved are skipped
/// (and counted); arms draw from one common eligible set so their CTRs are
/// comparable. Examinations are independent across positions, so only the
/// tracked position's draws are sampled.
pub fn run_swap_experiment<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    true_profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
    cfg: &SwapExperimentConfig,
) -> Result<SwapExperimentResult<F>> {
    cfg.validate()?;
    let k = cfg.landmark_rank;
    let mut arm_ranks: Vec<usize> = cfg.swap_ranks.clone();
    if !arm_ranks.contains(&k) {
        arm_ranks.push(k);
    }
    arm_ranks.sort_unstable();
    arm_ranks.dedup();

    let deepest = arm_ranks.iter().copied().max().unwrap().max(k);
    let presented = present_queries(ds, ranker, true_profile)?;
    let eligible: Vec<usize> = (0..presented.len())
        .filter(|&i| presented[i].ranking.len() >= deepest)
        .collect();
    let skipped = presented.len() - eligible.len();
    if eligible.is_empty() {
        let offending: Vec<String> = ds
            .queries
            .iter()
            .filter(|q| q.candidates.len() < deepest)
            .take(5)
            .map(|q| q.query_id.to_string())
            .collect();
        return Err(Error::Experiment(format!(
            "no query has {deepest} candidates; offending queries include [{}]",
            offending.join(", ")
        )));
    }

    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for &r in &arm_ranks {
        let mut rng = base.clone();
        rng.set_stream(r as u64);
        let mut clicks = 0u64;
        for _ in 0..cfg.impressions_per_arm {
            let qi = eligible[rng.gen_range(0..eligible.len())];
            let pq = &presented[qi];
            // The landmark document now sits at rank r; its examination
            // probability is p_r and its relevance is unchanged.
            let relevant = pq.relevant_at[k - 1];
            let p_exam = to_f64(pq.propensity_at[r - 1]);
            if rng.gen_bool(p_exam) {
                let p_click = to_f64(noise.click_probability(relevant));
                if p_click > 0.0 && rng.gen_bool(p_click) {
                    clicks += 1;
                }
            }
        }
        counts.insert(r, clicks);
    }

    let n = cfg.impressions_per_arm as f64;
    let ctr_k = counts[&k] as f64 / n;
    if ctr_k <= 0.0 {
        return Err(Error::Estimation(
            "landmark arm observed no clicks; cannot normalize ratios".into(),
        ));
    }
    let var_k = ctr_k * (1.0 - ctr_k) / n;

    let arms = arm_ranks
        .iter()
        .map(|&r| {
            let clicks = counts[&r];
            let ctr = clicks as f64 / n;
            let (ratio, std_err) = if r == k {
                (1.0, 0.0)
            } else {
                let ratio = ctr / ctr_k;
                let var_r = ctr * (1.0 - ctr) / n;
                let se = if ctr > 0.0 {
                    ratio * (var_r / (ctr * ctr) + var_k / (ctr_k * ctr_k)).sqrt()
                } else {
                    (var_k).sqrt() / ctr_k // degenerate: no clicks on this arm
                };
                (ratio, se)
            };
            SwapArm {
                rank: r,
                impressions: cfg.impressions_per_arm,
                clicks,
                ctr: real(ctr),
                ratio: real(ratio),
                std_err: real(std_err),
                skipped_queries: skipped,
            }
        })
        .collect();

    Ok(SwapExperimentResult {
        landmark_rank: k,
        arms,
    })
}

/// Fits a dense propensity model from swap ratios, optionally smoothing
/// toward the overall CTR curve normalized to rank 1:
/// `p_r = (1 - lambda) * ratio_r + lambda * ctr_r / ctr_1`.
///
/// Ranks between measured arms are filled by linear interpolation; all
/// values are clamped into `[P_MIN, 1]`.
pub fn fit_propensity_model<F: Real>(
    result: &SwapExperimentResult<F>,
    lambda: f64,
    overall_ctr_by_rank: &[F],
) -> Result<PropensityModel<F>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config("lambda must lie in [0, 1]"));
    }
    if result.arms.is_empty() {
        return Err(Error::config("swap result has no arms"));
    }
    let r_max = result.arms.iter().map(|a| a.rank).max().unwrap();
    let ctr1 = if lambda > 0.0 {
        if overall_ctr_by_rank.len() < r_max {
            return Err(Error::Estimation(format!(
                "need overall CTR through rank {r_max} for smoothing"
            )));
        }
        let c = overall_ctr_by_rank[0];
        if c <= F::zero() {
            return Err(Error::Estimation("overall CTR at rank 1 is zero".into()));
        }
        Some(c)
    } else {
        None
    };

    // Raw ratio per rank: measured where an arm exists, linearly
    // interpolated between arms, extended flat outside.
    let arms = &result.arms; // sorted by construction
    let raw_at = |rank: usize| -> f64 {
        if let Some(a) = arms.iter().find(|a| a.rank == rank) {
            return to_f64(a.ratio);
        }
        match arms.windows(2).find(|w| w[0].rank < rank && rank < w[1].rank) {
            Some(w) => {
                let (r0, v0) = (w[0].rank as f64, to_f64(w[0].ratio));
                let (r1, v1) = (w[1].rank as f64, to_f64(w[1].ratio));
                v0 + (v1 - v0) * (rank as f64 - r0) / (r1 - r0)
            }
            None if rank < arms[0].rank => to_f64(arms[0].ratio),
            None => to_f64(arms[arms.len() - 1].ratio),
        }
    };

    let mut p = Vec::with_capacity(r_max);
    for rank in 1..=r_max {
        let mut v = (1.0 - lambda) * raw_at(rank);
        if let Some(c1) = ctr1 {
            v += lambda * to_f64(overall_ctr_by_rank[rank - 1] / c1);
        }
        p.push(real::<F>(v.clamp(P_MIN, 1.0)));
    }
    let mut model = PropensityModel::new(p)?;
    model.lambda = lambda;
    model.landmark = result.landmark_rank;
    Ok(model)
}

/// Where relabeled propensities come from: an assumed severity profile or a
/// fitted rank-indexed model.
#[derive(Debug, Clone, Copy)]
pub enum PropensitySource<'a, F> {
    Profile(&'a BiasProfile<F>),
    Model(&'a PropensityModel<F>),
}

impl<F: Real> PropensitySource<'_, F> {
    pub fn propensity_at(&self, rank: usize) -> Result<F> {
        match self {
            PropensitySource::Profile(p) => p.examination_probability(rank),
            PropensitySource::Model(m) => m.propensity_at(rank),
        }
    }

    fn describe(&self) -> String {
        match self {
            PropensitySource::Profile(p) => format!("eta={}", to_f64(p.eta())),
            PropensitySource::Model(m) => format!(
                "swap-model r_max={} lambda={}",
                m.r_max(),
                m.lambda
            ),
        }
    }
}

/// Returns a log identical except that each record's propensity is
/// recomputed from the supplied source at its presented rank. Relabeling
/// with an assumed severity of 0 sets every propensity to 1, which is
/// exactly the naive weighting.
pub fn relabel_log<F: Real>(
    log: &ClickLog<F>,
    source: PropensitySource<'_, F>,
) -> Result<ClickLog<F>> {
    let mut out = log.clone();
    for rec in &mut out.records {
        rec.propensity = source.propensity_at(rec.presented_rank)?;
    }
    out.config.relabeled = Some(source.describe());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::click::simulate_clicks;
    use crate::dataset::{synthesize_dataset, Document, FeatureVector, QueryInstance, Split, SyntheticConfig};
    use crate::estimator::{estimate_risk, Estimator};

    fn corpus() -> Dataset<f64> {
        synthesize_dataset(
            23,
            &SyntheticConfig {
                n_queries: 60,
                n_candidates: 12,
                feature_dim: 5,
                ..SyntheticConfig::default()
            },
        )
        .unwrap()
    }

    fn ranker() -> LinearModel<f64> {
        LinearModel::new(vec![0.4, -0.2, 0.1, 0.3, -0.5]).unwrap()
    }

    #[test]
    fn identity_arm_ratio_is_one() {
        let ds = corpus();
        let cfg = SwapExperimentConfig {
            landmark_rank: 1,
            swap_ranks: vec![1, 3],
            impressions_per_arm: 2000,
            seed: 5,
        };
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let result = run_swap_experiment(&ds, &ranker(), &profile, &noise, &cfg).unwrap();
        let arm = result.arm(1).unwrap();
        assert_eq!(arm.ratio, 1.0);
        assert_eq!(arm.std_err, 0.0);
    }

    #[test]
    fn ratios_recover_the_power_law_within_three_se() {
        let ds = corpus();
        let cfg = SwapExperimentConfig {
            landmark_rank: 1,
            swap_ranks: (1..=8).collect(),
            impressions_per_arm: 50_000,
            seed: 9,
        };
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let result = run_swap_experiment(&ds, &ranker(), &profile, &noise, &cfg).unwrap();
        for arm in &result.arms {
            let truth = 1.0 / arm.rank as f64;
            assert!(
                (arm.ratio - truth).abs() <= 3.0 * arm.std_err + 1e-12,
                "rank {}: ratio {} truth {truth} se {}",
                arm.rank,
                arm.ratio,
                arm.std_err
            );
        }
    }

    #[test]
    fn estimates_sharpen_with_more_impressions() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let mut errs = Vec::new();
        for n in [10_000u64, 100_000, 1_000_000] {
            let cfg = SwapExperimentConfig {
                landmark_rank: 1,
                swap_ranks: vec![5],
                impressions_per_arm: n,
                seed: 1,
            };
            let result = run_swap_experiment(&ds, &ranker(), &profile, &noise, &cfg).unwrap();
            let arm = result.arm(5).unwrap();
            assert!(
                (arm.ratio - 0.2).abs() <= 3.0 * arm.std_err + 1e-12,
                "n={n}: ratio {} se {}",
                arm.ratio,
                arm.std_err
            );
            errs.push((arm.ratio - 0.2).abs());
        }
        assert!(errs[2] < errs[0], "errors did not shrink: {errs:?}");
    }

    #[test]
    fn noise_free_always_relevant_landmark_gives_exact_expected_ratio() {
        // One frozen query whose rank-1 doc is relevant; with eps_minus = 0
        // the swapped-arm CTR is exactly p_r * eps_plus, so the expected
        // ratio is exactly p_r / p_1.
        let q = QueryInstance::new(
            1,
            (0..6u32)
                .map(|i| Document {
                    doc_id: i,
                    features: FeatureVector(vec![-(i as f64)]),
                    grade: if i == 0 { 4 } else { 0 },
                    relevant: i == 0,
                })
                .collect(),
        )
        .unwrap();
        let ds = Dataset {
            split: Split::Train,
            queries: vec![q],
            feature_dim: 1,
        };
        let ranker = LinearModel::new(vec![1.0]).unwrap();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(0.7, 0.0).unwrap();

        // closed-form CTRs per arm
        for r in [2usize, 4] {
            let expected_ctr = (1.0 / r as f64) * 0.7;
            let expected_ratio = 1.0 / r as f64;
            let cfg = SwapExperimentConfig {
                landmark_rank: 1,
                swap_ranks: vec![r],
                impressions_per_arm: 200_000,
                seed: 3,
            };
            let result = run_swap_experiment(&ds, &ranker, &profile, &noise, &cfg).unwrap();
            let arm = result.arm(r).unwrap();
            let se_ctr = (expected_ctr * (1.0 - expected_ctr) / 200_000.0).sqrt();
            assert!((arm.ctr - expected_ctr).abs() <= 3.0 * se_ctr);
            assert!((arm.ratio - expected_ratio).abs() <= 3.0 * arm.std_err + 1e-12);
        }
    }

    #[test]
    fn too_few_candidates_is_an_experiment_error() {
        let ds = corpus(); // 12 candidates per query
        let cfg = SwapExperimentConfig {
            landmark_rank: 1,
            swap_ranks: vec![13],
            impressions_per_arm: 10,
            seed: 1,
        };
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let err = run_swap_experiment(&ds, &ranker(), &profile, &noise, &cfg).unwrap_err();
        assert!(matches!(err, Error::Experiment(_)), "{err}");
    }

    fn fake_result(ratios: &[f64]) -> SwapExperimentResult<f64> {
        SwapExperimentResult {
            landmark_rank: 1,
            arms: ratios
                .iter()
                .enumerate()
                .map(|(i, &ratio)| SwapArm {
                    rank: i + 1,
                    impressions: 1000,
                    clicks: (ratio * 100.0) as u64,
                    ctr: ratio * 0.5,
                    ratio,
                    std_err: 0.01,
                    skipped_queries: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn lambda_zero_keeps_raw_ratios() {
        let result = fake_result(&[1.0, 0.52, 0.31]);
        let model = fit_propensity_model(&result, 0.0, &[]).unwrap();
        assert_eq!(model.values(), &[1.0, 0.52, 0.31]);
    }

    #[test]
    fn lambda_one_uses_normalized_ctr_curve() {
        let result = fake_result(&[1.0, 0.52, 0.31]);
        let ctr = [0.4, 0.2, 0.1];
        let model = fit_propensity_model(&result, 1.0, &ctr).unwrap();
        assert!((model.values()[0] - 1.0).abs() < 1e-12);
        assert!((model.values()[1] - 0.5).abs() < 1e-12);
        assert!((model.values()[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn smoothing_with_zero_top_ctr_is_an_estimation_error() {
        let result = fake_result(&[1.0, 0.5]);
        let err = fit_propensity_model(&result, 0.5, &[0.0, 0.1]).unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn ranks_beyond_r_max_impute_the_deepest_value() {
        let p: Vec<f64> = (1..=21).map(|r| 1.0 / r as f64).collect();
        let model = PropensityModel::new(p).unwrap();
        assert_eq!(model.propensity_at(25).unwrap(), model.propensity_at(21).unwrap());
        assert_eq!(model.propensity_at(25).unwrap(), 1.0 / 21.0);
    }

    #[test]
    fn interior_gaps_are_interpolated() {
        let result = SwapExperimentResult::<f64> {
            landmark_rank: 1,
            arms: vec![
                SwapArm { rank: 1, impressions: 10, clicks: 5, ctr: 0.5, ratio: 1.0, std_err: 0.0, skipped_queries: 0 },
                SwapArm { rank: 3, impressions: 10, clicks: 1, ctr: 0.1, ratio: 0.2, std_err: 0.0, skipped_queries: 0 },
            ],
        };
        let model = fit_propensity_model(&result, 0.0, &[]).unwrap();
        assert!((model.values()[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn relabel_with_generating_profile_is_identity() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let log = simulate_clicks(&ds, &ranker(), &profile, &noise, 500, 77).unwrap();
        let relabeled = relabel_log(&log, PropensitySource::Profile(&profile)).unwrap();
        for (a, b) in log.records.iter().zip(&relabeled.records) {
            assert_eq!(a.propensity.to_bits(), b.propensity.to_bits());
        }
    }

    #[test]
    fn relabel_with_flat_profile_is_naive_weighting() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let log = simulate_clicks(&ds, &ranker(), &profile, &noise, 500, 78).unwrap();
        let flat = BiasProfile::new(0.0).unwrap();
        let relabeled = relabel_log(&log, PropensitySource::Profile(&flat)).unwrap();
        assert!(relabeled.records.iter().all(|r| r.propensity == 1.0));
    }

    #[test]
    fn relabel_halved_severity_takes_square_root() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let log = simulate_clicks(&ds, &ranker(), &profile, &noise, 2000, 79).unwrap();
        let half = BiasProfile::new(0.5).unwrap();
        let relabeled = relabel_log(&log, PropensitySource::Profile(&half)).unwrap();
        for rec in &relabeled.records {
            if rec.presented_rank == 9 {
                assert!((rec.propensity - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scaling_all_propensities_leaves_the_risk_argmin_unchanged() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let log = simulate_clicks(&ds, &ranker(), &profile, &noise, 3000, 80).unwrap();

        let p: Vec<f64> = (1..=12).map(|r| (1.0 / r as f64).sqrt()).collect();
        let model = PropensityModel::new(p.clone()).unwrap();
        let scaled = PropensityModel::new(p.iter().map(|v| v * 0.5).collect()).unwrap();

        let candidates: Vec<LinearModel<f64>> = vec![
            LinearModel::new(vec![0.4, -0.2, 0.1, 0.3, -0.5]).unwrap(),
            LinearModel::new(vec![-0.1, 0.2, 0.7, -0.3, 0.0]).unwrap(),
            LinearModel::new(vec![0.9, 0.9, -0.9, 0.1, 0.2]).unwrap(),
            LinearModel::zeros(5),
        ];
        let argmin = |log: &ClickLog<f64>| -> usize {
            let mut best = (0usize, f64::INFINITY);
            for (i, m) in candidates.iter().enumerate() {
                let v = estimate_risk(m, log, &ds, &Estimator::Ips).unwrap().value;
                if v < best.1 {
                    best = (i, v);
                }
            }
            best.0
        };
        let base = relabel_log(&log, PropensitySource::Model(&model)).unwrap();
        let half = relabel_log(&log, PropensitySource::Model(&scaled)).unwrap();
        assert_eq!(argmin(&base), argmin(&half));
    }

    #[test]
    fn fitted_model_is_monotone_at_scale() {
        let ds = corpus();
        let profile = BiasProfile::new(1.0).unwrap();
        let noise = NoiseParams::new(1.0, 0.1).unwrap();
        let cfg = SwapExperimentConfig {
            landmark_rank: 1,
            swap_ranks: (1..=8).collect(),
            impressions_per_arm: 100_000,
            seed: 13,
        };
        let result = run_swap_experiment(&ds, &ranker(), &profile, &noise, &cfg).unwrap();
        let model = fit_propensity_model(&result, 0.0, &[]).unwrap();
        let inversions = model
            .values()
            .windows(2)
            .filter(|w| w[1] > w[0])
            .count();
        assert!(inversions <= 1, "fitted values {:?}", model.values());
    }

    #[test]
    fn propensity_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("propensities.tsv");
        let result = fake_result(&[1.0, 0.47, 0.333333]);
        let model = fit_propensity_model(&result, 0.25, &[0.4, 0.21, 0.13]).unwrap();
        model.write(&path).unwrap();
        let back: PropensityModel<f64> = PropensityModel::read(&path).unwrap();
        assert_eq!(back.r_max(), model.r_max());
        assert_eq!(back.lambda, model.lambda);
        for (a, b) in back.values().iter().zip(model.values()) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
