//! Risk estimation from click logs: naive, inverse-propensity-scored (IPS),
//! and clipped-IPS estimators, plus exact expectations on small instances.
//!
//! The IPS estimate of a model's risk sums `rank(clicked doc | model ranking)
//! / propensity` over clicks and divides by the number of impressions. Only
//! clicked documents enter the estimate, so propensities of non-clicked
//! documents are never needed.

use std::collections::HashMap;

use crate::click::{BiasProfile, ClickLog, NoiseParams};
use crate::dataset::{Dataset, DocId, QueryId, QueryInstance};
use crate::error::{Error, Result};
use crate::ranking::{rank_candidates, LinearModel, Ranking};
use crate::scalar::{real, real_usize, Real};

/// Candidate-set cap for the exact-expectation routines.
const EXACT_BUDGET: usize = 12;

/// Tolerance under which a risk difference counts as a tie.
const SIGN_EPS: f64 = 1e-9;

/// Which weighting an estimate (or a training run) applies to each click.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator<F> {
    /// All weights 1; ignores presentation bias.
    Naive,
    /// Weight `1/q` with the recorded propensity `q`.
    Ips,
    /// Weight `1/max(tau, q)`: propensities below `tau` are clipped.
    ClippedIps { tau: F },
}

impl<F: Real> Estimator<F> {
    pub fn validate(&self) -> Result<()> {
        if let Estimator::ClippedIps { tau } = self {
            if !(*tau > F::zero() && *tau <= F::one()) {
                return Err(Error::config("tau must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// The denominator applied to a click with propensity `q`.
    pub fn weight(&self, q: F) -> Result<F> {
        match self {
            Estimator::Naive => Ok(F::one()),
            Estimator::Ips => {
                if q <= F::zero() {
                    Err(Error::data("non-positive propensity in IPS estimate"))
                } else {
                    Ok(q)
                }
            }
            Estimator::ClippedIps { tau } => Ok(tau.max(q)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Ips => "ips",
            Estimator::ClippedIps { .. } => "clipped_ips",
        }
    }
}

/// An estimated risk value with the sample sizes behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate<F> {
    pub value: F,
    pub n_clicks: usize,
    pub n_impressions: u64,
}

/// Estimates the risk of `model` from a click log over `ds`.
///
/// The estimate is `(1/n_impressions) * sum_clicks rank(clicked | model
/// ranking) / weight`, with the weight chosen by the estimator kind. The
/// model ranking is recomputed per query, independent of the presented one.
pub fn estimate_risk<F: Real>(
    model: &LinearModel<F>,
    log: &ClickLog<F>,
    ds: &Dataset<F>,
    estimator: &Estimator<F>,
) -> Result<RiskEstimate<F>> {
    estimator.validate()?;
    if log.records.is_empty() {
        return Ok(RiskEstimate {
            value: F::zero(),
            n_clicks: 0,
            n_impressions: log.n_impressions,
        });
    }
    if log.n_impressions == 0 {
        return Err(Error::data("click log has records but zero impressions"));
    }
    let index = ds.query_index();
    let mut rank_maps: HashMap<QueryId, HashMap<DocId, usize>> = HashMap::new();
    let mut sum = F::zero();
    for rec in &log.records {
        let qi = *index
            .get(&rec.query_id)
            .ok_or_else(|| Error::data(format!("unknown query id {}", rec.query_id)))?;
        let ranks = match rank_maps.entry(rec.query_id) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(rank_candidates(model, &ds.queries[qi])?.rank_map())
            }
        };
        let rank = *ranks.get(&rec.clicked_doc_id).ok_or_else(|| {
            Error::data(format!(
                "clicked doc {} not in query {}",
                rec.clicked_doc_id, rec.query_id
            ))
        })?;
        let weight = estimator.weight(rec.propensity)?;
        sum += real_usize::<F>(rank) / weight;
    }
    Ok(RiskEstimate {
        value: sum / real::<F>(log.n_impressions as f64),
        n_clicks: log.records.len(),
        n_impressions: log.n_impressions,
    })
}

/// Per-impression IPS estimates (impressions without clicks contribute 0).
/// Their mean equals the IPS risk estimate.
pub fn per_impression_ips<F: Real>(
    model: &LinearModel<F>,
    log: &ClickLog<F>,
    ds: &Dataset<F>,
) -> Result<Vec<F>> {
    let mut values = vec![F::zero(); log.n_impressions as usize];
    let index = ds.query_index();
    let mut rank_maps: HashMap<QueryId, HashMap<DocId, usize>> = HashMap::new();
    for rec in &log.records {
        let qi = *index
            .get(&rec.query_id)
            .ok_or_else(|| Error::data(format!("unknown query id {}", rec.query_id)))?;
        let ranks = match rank_maps.entry(rec.query_id) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(rank_candidates(model, &ds.queries[qi])?.rank_map())
            }
        };
        let rank = ranks[&rec.clicked_doc_id];
        if rec.propensity <= F::zero() {
            return Err(Error::data("non-positive propensity"));
        }
        values[rec.impression_id as usize] += real_usize::<F>(rank) / rec.propensity;
    }
    Ok(values)
}

/// Expected per-impression IPS estimate for one query instance, computed in
/// closed form by linearity of expectation.
///
/// The click probability of document `y` at presented rank `r` is
/// `p_r * eps(rel(y))` and its IPS contribution is `rank(y | model
/// ranking) / p_r`, so the propensities cancel and the expectation reduces
/// to `sum_y eps(rel(y)) * rank(y | model ranking)`. With noise-free clicks
/// this is exactly the sum of relevant ranks. The presented ranking and the
/// bias profile are still validated: positive examination probabilities at
/// every presented rank are what make the cancellation sound.
pub fn exact_expected_ips<F: Real>(
    model: &LinearModel<F>,
    query: &QueryInstance<F>,
    presented: &Ranking,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
) -> Result<F> {
    if query.candidates.len() > EXACT_BUDGET {
        return Err(Error::config(format!(
            "exact expectation limited to {EXACT_BUDGET} candidates, got {}",
            query.candidates.len()
        )));
    }
    if presented.len() != query.candidates.len() {
        return Err(Error::data("presented ranking does not cover the candidate set"));
    }
    let model_ranking = rank_candidates(model, query)?;
    let model_ranks = model_ranking.rank_map();
    let mut total = F::zero();
    for d in &query.candidates {
        let presented_rank = presented
            .rank_of(d.doc_id)
            .ok_or_else(|| Error::data(format!("doc {} missing from presented ranking", d.doc_id)))?;
        let p = profile.examination_probability(presented_rank)?;
        if p <= F::zero() {
            return Err(Error::data("zero examination probability at presented rank"));
        }
        let rank = model_ranks[&d.doc_id];
        total += noise.click_probability(d.relevant) * real_usize(rank);
    }
    Ok(total)
}

/// Mean of [`exact_expected_ips`] over a dataset, presenting each query in
/// stored candidate order (the expectation does not depend on the
/// presentation, which is the point of the estimator).
pub fn expected_ips_risk<F: Real>(
    model: &LinearModel<F>,
    ds: &Dataset<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
) -> Result<F> {
    if ds.queries.is_empty() {
        return Err(Error::config("risk over an empty dataset is undefined"));
    }
    let mut total = F::zero();
    for q in &ds.queries {
        let presented = Ranking {
            query_id: q.query_id,
            doc_ids: q.candidates.iter().map(|d| d.doc_id).collect(),
        };
        total += exact_expected_ips(model, q, &presented, profile, noise)?;
    }
    Ok(total / real_usize(ds.queries.len()))
}

fn sign_with_tolerance(x: f64) -> i8 {
    if x.abs() < SIGN_EPS {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Checks that noisy-click bias preserves the order of two systems: the sign
/// of the difference of expected IPS risks matches the sign of the
/// difference of true risks (ties count as agreement).
pub fn verify_order_preservation<F: Real>(
    model_a: &LinearModel<F>,
    model_b: &LinearModel<F>,
    ds: &Dataset<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
) -> Result<bool> {
    let e_a = expected_ips_risk(model_a, ds, profile, noise)?;
    let e_b = expected_ips_risk(model_b, ds, profile, noise)?;
    let r_a = crate::ranking::full_info_risk(model_a, ds)?;
    let r_b = crate::ranking::full_info_risk(model_b, ds)?;
    let s_est = sign_with_tolerance(crate::scalar::to_f64(e_a - e_b));
    let s_true = sign_with_tolerance(crate::scalar::to_f64(r_a - r_b));
    Ok(s_est == s_true)
}
