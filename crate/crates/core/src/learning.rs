//! Training linear rankers from propensity-scored clicks.
//!
//! Every click becomes one training example: the clicked document should
//! outrank every other candidate of its query, and the example's hinge
//! violations are weighted by the inverse of its (possibly clipped)
//! propensity. The objective is
//!
//! ```text
//! 1/2 ||w||^2 + (C/n) * sum_j (1/q_j) * sum_{y != y_j} max(0, 1 - w.(phi_j - phi_y))
//! ```
//!
//! which upper-bounds the propensity-weighted empirical risk because
//! `rank(y_j) - 1` is at most the sum of hinge terms. The full-information
//! trainer applies the same machinery to all relevant/irrelevant pairs.
//!
//! The convex minimum is found by coordinate ascent on the dual (one box
//! variable per hinge term), which certifies optimality through the duality
//! gap and is deterministic given the config seed.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::click::ClickLog;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_risk, Estimator};
use crate::ranking::LinearModel;
use crate::scalar::{real, real_usize, to_f64, Real};

/// One click turned into a training example: the clicked candidate of a
/// query, with its inverse-propensity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingExample<F> {
    /// Index into `Dataset::queries`.
    pub query_idx: u32,
    /// Index of the clicked document within the query's candidates.
    pub clicked_idx: u32,
    /// Inverse of the click's (possibly clipped) propensity; 1 under naive
    /// weighting.
    pub weight: F,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig<F> {
    /// Regularization trade-off; larger C weighs the hinge loss more.
    pub c: F,
    /// Weighting applied when materializing examples from a log.
    pub estimator: Estimator<F>,
    /// Relative duality-gap tolerance for the solver.
    pub tolerance: F,
    pub max_epochs: usize,
    pub seed: u64,
}

impl<F: Real> Default for LearnerConfig<F> {
    fn default() -> Self {
        LearnerConfig {
            c: F::one(),
            estimator: Estimator::Ips,
            tolerance: real(1e-4),
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl<F: Real> LearnerConfig<F> {
    fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c <= F::zero() || !self.c.is_finite() {
            return Err(Error::config("C must be positive and finite"));
        }
        if self.tolerance.is_nan() || self.tolerance <= F::zero() {
            return Err(Error::config("tolerance must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        self.estimator.validate()
    }
}

/// Hyperparameter search space for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamGrid<F> {
    pub c_values: Vec<F>,
    /// Clipping thresholds; `0` means unclipped IPS. `None` disables
    /// clipping entirely.
    pub tau_values: Option<Vec<F>>,
}

/// Whether training and validation weight clicks by inverse propensity or
/// uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Propensity,
    Naive,
}

/// The grid point selected by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenParams<F> {
    pub c: F,
    pub tau: Option<F>,
    pub validation_risk: F,
}

/// Materializes training examples from a click log, weighting each click by
/// the inverse of its (estimator-transformed) propensity.
pub fn build_examples<F: Real>(
    log: &ClickLog<F>,
    ds: &Dataset<F>,
    estimator: &Estimator<F>,
) -> Result<Vec<TrainingExample<F>>> {
    estimator.validate()?;
    let index = ds.query_index();
    let mut examples = Vec::with_capacity(log.records.len());
    for rec in &log.records {
        let qi = *index
            .get(&rec.query_id)
            .ok_or_else(|| Error::data(format!("unknown query id {}", rec.query_id)))?;
        let q = &ds.queries[qi];
        let clicked_idx = q
            .candidates
            .iter()
            .position(|d| d.doc_id == rec.clicked_doc_id)
            .ok_or_else(|| {
                Error::data(format!(
                    "clicked doc {} not in query {}",
                    rec.clicked_doc_id, rec.query_id
                ))
            })?;
        let denom = estimator.weight(rec.propensity)?;
        let weight = F::one() / denom;
        if !weight.is_finite() {
            return Err(Error::data("non-finite example weight"));
        }
        examples.push(TrainingExample {
            query_idx: qi as u32,
            clicked_idx: clicked_idx as u32,
            weight,
        });
    }
    Ok(examples)
}

fn query_scores<F: Real>(model: &LinearModel<F>, ds: &Dataset<F>, qi: u32) -> Vec<F> {
    ds.queries[qi as usize]
        .candidates
        .iter()
        .map(|d| model.score(&d.features))
        .collect()
}

/// Value of the propensity-weighted training objective at `model`.
pub fn propensity_objective<F: Real>(
    model: &LinearModel<F>,
    ds: &Dataset<F>,
    examples: &[TrainingExample<F>],
    c: F,
) -> Result<F> {
    let reg = model
        .weights
        .iter()
        .map(|w| *w * *w)
        .fold(F::zero(), |a, b| a + b)
        * real(0.5);
    if examples.is_empty() {
        return Ok(reg);
    }
    let mut score_cache: HashMap<u32, Vec<F>> = HashMap::new();
    let mut loss = F::zero();
    for ex in examples {
        let scores = score_cache
            .entry(ex.query_idx)
            .or_insert_with(|| query_scores(model, ds, ex.query_idx));
        let clicked = scores[ex.clicked_idx as usize];
        let mut hinge_sum = F::zero();
        for (i, s) in scores.iter().enumerate() {
            if i as u32 != ex.clicked_idx {
                hinge_sum += (F::one() - (clicked - *s)).max(F::zero());
            }
        }
        loss += ex.weight * hinge_sum;
    }
    Ok(reg + c / real_usize(examples.len()) * loss)
}

// ── Dual coordinate descent on the pairwise hinge objective ────────────

// One hinge term `scale * coeff * max(0, 1 - w.(phi_pos - phi_neg))`;
// `coeff` is built at unit scale so a C grid can reuse the pair list.
struct Pair<F> {
    query: u32,
    pos: u32,
    neg: u32,
    coeff: F,
    znorm: F,
}

struct SolveStats<F> {
    epochs: usize,
    final_gap: F,
    // objective of the iterate the solver would return after each epoch
    primal_per_epoch: Vec<F>,
}

fn pair_score<F: Real>(w: &[F], ds: &Dataset<F>, p: &Pair<F>) -> F {
    let q = &ds.queries[p.query as usize];
    let a = q.candidates[p.pos as usize].features.values();
    let b = q.candidates[p.neg as usize].features.values();
    let mut s = F::zero();
    for i in 0..w.len() {
        s += w[i] * (a[i] - b[i]);
    }
    s
}

// Coordinate ascent on the dual with bound shrinking. Each hinge term owns
// one dual variable boxed in [0, scale * coeff]; variables pinned at a bound
// with a strongly feasible gradient are skipped until the working set
// converges, then everything is restored and the relative duality gap is
// certified against the tolerance.
fn solve_pairs<F: Real>(
    ds: &Dataset<F>,
    pairs: &[Pair<F>],
    scale: F,
    dim: usize,
    tolerance: F,
    max_epochs: usize,
    seed: u64,
) -> (Vec<F>, SolveStats<F>) {
    let tiny = real::<F>(1e-12);
    // Pairs with identical features have a constant hinge of 1 regardless
    // of w; they shift primal and dual equally and stay out of the sweeps.
    let mut order: Vec<u32> = Vec::with_capacity(pairs.len());
    let mut constant = F::zero();
    for (i, p) in pairs.iter().enumerate() {
        if p.znorm > tiny {
            order.push(i as u32);
        } else {
            constant += scale * p.coeff;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }

    let mut w = vec![F::zero(); dim];
    let mut alpha = vec![F::zero(); pairs.len()];
    let mut sum_alpha = F::zero();
    let mut best_w = w.clone();
    let mut best_primal = F::infinity();
    let mut stats = SolveStats {
        epochs: 0,
        final_gap: F::infinity(),
        primal_per_epoch: Vec::new(),
    };

    let full_len = order.len();
    let mut active_len = full_len;
    let mut pg_max_old = F::infinity();
    let mut pg_min_old = F::neg_infinity();
    let mut evaluate_now;

    for epoch in 0..max_epochs {
        let mut pg_max = F::neg_infinity();
        let mut pg_min = F::infinity();
        let mut i = 0usize;
        while i < active_len {
            let pi = order[i] as usize;
            let p = &pairs[pi];
            let bound = scale * p.coeff;
            let g = pair_score(&w, ds, p) - F::one();
            let a = alpha[pi];

            let mut pg = g;
            if a <= F::zero() {
                if g > pg_max_old {
                    active_len -= 1;
                    order.swap(i, active_len);
                    continue;
                }
                pg = g.min(F::zero());
            } else if a >= bound {
                if g < pg_min_old {
                    active_len -= 1;
                    order.swap(i, active_len);
                    continue;
                }
                pg = g.max(F::zero());
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);

            if pg.abs() > tiny {
                let clipped = (a - g / p.znorm).max(F::zero()).min(bound);
                let delta = clipped - a;
                if delta != F::zero() {
                    let q = &ds.queries[p.query as usize];
                    let fa = q.candidates[p.pos as usize].features.values();
                    let fb = q.candidates[p.neg as usize].features.values();
                    for j in 0..dim {
                        w[j] += delta * (fa[j] - fb[j]);
                    }
                    alpha[pi] = clipped;
                    sum_alpha += delta;
                }
            }
            i += 1;
        }

        // The working set has converged when its projected gradients span
        // less than the shrink tolerance; restore the full set and check
        // the formal stopping certificate.
        let span = pg_max - pg_min;
        evaluate_now = span <= tolerance || epoch + 1 == max_epochs;
        if evaluate_now && active_len < full_len {
            active_len = full_len;
            pg_max_old = F::infinity();
            pg_min_old = F::neg_infinity();
        } else {
            pg_max_old = if pg_max <= F::zero() {
                F::infinity()
            } else {
                pg_max
            };
            pg_min_old = if pg_min >= F::zero() {
                F::neg_infinity()
            } else {
                pg_min
            };
        }

        if evaluate_now || (epoch + 1) % 4 == 0 {
            let reg = w.iter().map(|x| *x * *x).fold(F::zero(), |a, b| a + b) * real(0.5);
            let mut hinge = F::zero();
            for &pi in order.iter() {
                let p = &pairs[pi as usize];
                let s = pair_score(&w, ds, p);
                hinge += scale * p.coeff * (F::one() - s).max(F::zero());
            }
            let primal = reg + hinge + constant;
            // Dual ascent does not make the primal monotone on its own; the
            // returned iterate is the best primal seen, so stopping early
            // never regresses the objective.
            if primal < best_primal {
                best_primal = primal;
                best_w.copy_from_slice(&w);
            }
            let dual = sum_alpha - reg + constant;
            let gap = best_primal - dual;
            stats.final_gap = gap;
            stats.primal_per_epoch.push(best_primal);
            stats.epochs = epoch + 1;
            if gap <= tolerance * best_primal.abs().max(F::one()) {
                break;
            }
        }
    }
    (best_w, stats)
}

fn pair_znorm<F: Real>(ds: &Dataset<F>, query: u32, a: u32, b: u32) -> F {
    let q = &ds.queries[query as usize];
    let fa = q.candidates[a as usize].features.values();
    let fb = q.candidates[b as usize].features.values();
    let mut n = F::zero();
    for i in 0..fa.len() {
        let d = fa[i] - fb[i];
        n += d * d;
    }
    n
}

fn pairs_from_examples<F: Real>(ds: &Dataset<F>, examples: &[TrainingExample<F>]) -> Vec<Pair<F>> {
    // Duplicate clicks on the same (query, doc) produce identical
    // constraints; their coefficients are summed so the pair list stays
    // proportional to distinct clicks. Coefficients are per unit C.
    let inv_n = F::one() / real_usize(examples.len());
    let mut agg: HashMap<(u32, u32, u32), F> = HashMap::new();
    for ex in examples {
        let n_cand = ds.queries[ex.query_idx as usize].candidates.len() as u32;
        for y in 0..n_cand {
            if y != ex.clicked_idx {
                *agg.entry((ex.query_idx, ex.clicked_idx, y))
                    .or_insert_with(F::zero) += inv_n * ex.weight;
            }
        }
    }
    let mut keys: Vec<(u32, u32, u32)> = agg.keys().copied().collect();
    keys.sort_unstable();
    keys.into_iter()
        .map(|(q, pos, neg)| Pair {
            query: q,
            pos,
            neg,
            coeff: agg[&(q, pos, neg)],
            znorm: pair_znorm(ds, q, pos, neg),
        })
        .collect()
}

/// Trains the propensity-weighted ranker. With no examples the regularizer
/// alone is minimized and the zero vector is returned.
pub fn train_propensity_ranker<F: Real>(
    ds: &Dataset<F>,
    examples: &[TrainingExample<F>],
    cfg: &LearnerConfig<F>,
) -> Result<LinearModel<F>> {
    cfg.validate()?;
    ds.validate()?;
    if examples.is_empty() {
        return Ok(LinearModel::zeros(ds.feature_dim));
    }
    for ex in examples {
        if ex.query_idx as usize >= ds.queries.len() {
            return Err(Error::data("example query index out of range"));
        }
        if !ex.weight.is_finite() {
            return Err(Error::data("non-finite example weight"));
        }
    }
    let pairs = pairs_from_examples(ds, examples);
    let (w, _stats) = solve_pairs(
        ds,
        &pairs,
        cfg.c,
        ds.feature_dim,
        cfg.tolerance,
        cfg.max_epochs,
        cfg.seed,
    );
    LinearModel::new(w)
}

/// Trains the bias-ignoring baseline: identical to the propensity ranker
/// with every example weight forced to 1.
pub fn train_naive_ranker<F: Real>(
    ds: &Dataset<F>,
    examples: &[TrainingExample<F>],
    cfg: &LearnerConfig<F>,
) -> Result<LinearModel<F>> {
    let uniform: Vec<TrainingExample<F>> = examples
        .iter()
        .map(|ex| TrainingExample {
            weight: F::one(),
            ..*ex
        })
        .collect();
    train_propensity_ranker(ds, &uniform, cfg)
}

/// Trains on the complete relevance labels: hinge over every within-query
/// (relevant, irrelevant) pair, averaged over the pair count.
pub fn train_full_info_ranker<F: Real>(
    ds: &Dataset<F>,
    c: F,
    tolerance: F,
) -> Result<LinearModel<F>> {
    let cfg = LearnerConfig::<F> {
        c,
        tolerance,
        ..LearnerConfig::default()
    };
    cfg.validate()?;
    ds.validate()?;

    let mut raw: Vec<(u32, u32, u32)> = Vec::new();
    for (qi, q) in ds.queries.iter().enumerate() {
        for (pi, pd) in q.candidates.iter().enumerate() {
            if !pd.relevant {
                continue;
            }
            for (ni, nd) in q.candidates.iter().enumerate() {
                if !nd.relevant {
                    raw.push((qi as u32, pi as u32, ni as u32));
                }
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::config(
            "no query has both relevant and irrelevant documents",
        ));
    }
    let coeff = F::one() / real_usize(raw.len());
    let pairs: Vec<Pair<F>> = raw
        .into_iter()
        .map(|(q, pos, neg)| Pair {
            query: q,
            pos,
            neg,
            coeff,
            znorm: pair_znorm(ds, q, pos, neg),
        })
        .collect();
    let (w, _stats) = solve_pairs(
        ds,
        &pairs,
        c,
        ds.feature_dim,
        cfg.tolerance,
        cfg.max_epochs,
        cfg.seed,
    );
    LinearModel::new(w)
}

/// Trains one model per grid point and returns the one minimizing the
/// validation risk: unclipped IPS for propensity mode, the naive estimate
/// for naive mode. Ties break toward larger C, then larger tau.
pub fn cross_validate<F: Real>(
    train_log: &ClickLog<F>,
    val_log: &ClickLog<F>,
    train_ds: &Dataset<F>,
    val_ds: &Dataset<F>,
    grid: &HyperparamGrid<F>,
    mode: TrainMode,
    base: &LearnerConfig<F>,
) -> Result<(LinearModel<F>, ChosenParams<F>)> {
    if grid.c_values.is_empty() {
        return Err(Error::config("C grid must be non-empty"));
    }
    if matches!(&grid.tau_values, Some(t) if t.is_empty()) {
        return Err(Error::config("tau grid must be non-empty when present"));
    }
    train_ds.validate()?;

    // Distinct tau values (weighting schemes); each shares one pair list
    // across the whole C grid since C only rescales the dual boxes.
    let mut taus: Vec<Option<F>> = match (&mode, &grid.tau_values) {
        (TrainMode::Naive, _) | (TrainMode::Propensity, None) => vec![None],
        (TrainMode::Propensity, Some(ts)) => ts.iter().map(|&t| Some(t)).collect(),
    };
    taus.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => to_f64(*y).partial_cmp(&to_f64(*x)).unwrap(),
        _ => std::cmp::Ordering::Equal,
    });
    taus.dedup_by_key(|t| t.map(|v| to_f64(v).to_bits()));
    let mut cs = grid.c_values.clone();
    cs.sort_by(|a, b| to_f64(*b).partial_cmp(&to_f64(*a)).unwrap());
    cs.dedup_by_key(|c| to_f64(*c).to_bits());

    let val_estimator = match mode {
        TrainMode::Propensity => Estimator::Ips,
        TrainMode::Naive => Estimator::Naive,
    };

    let mut best: Option<(LinearModel<F>, ChosenParams<F>)> = None;
    for tau in taus {
        let weight_estimator = match mode {
            TrainMode::Naive => Estimator::Naive,
            TrainMode::Propensity => match tau {
                None => Estimator::Ips,
                Some(t) if t == F::zero() => Estimator::Ips,
                Some(t) => Estimator::ClippedIps { tau: t },
            },
        };
        weight_estimator.validate()?;
        let examples = build_examples(train_log, train_ds, &weight_estimator)?;
        let pairs = pairs_from_examples(train_ds, &examples);
        for &c in &cs {
            let model = if examples.is_empty() {
                LinearModel::zeros(train_ds.feature_dim)
            } else {
                let (w, _) = solve_pairs(
                    train_ds,
                    &pairs,
                    c,
                    train_ds.feature_dim,
                    base.tolerance,
                    base.max_epochs,
                    base.seed,
                );
                LinearModel::new(w)?
            };
            let risk = estimate_risk(&model, val_log, val_ds, &val_estimator)?.value;
            // strict improvement wins; exact ties resolve toward the larger
            // C and then the larger tau
            let better = match &best {
                None => true,
                Some((_, inc)) => {
                    risk < inc.validation_risk
                        || (risk == inc.validation_risk
                            && (c > inc.c
                                || (c == inc.c
                                    && match (tau, inc.tau) {
                                        (Some(t), Some(it)) => t > it,
                                        _ => false,
                                    })))
                }
            };
            if better {
                best = Some((
                    model,
                    ChosenParams {
                        c,
                        tau,
                        validation_risk: risk,
                    },
                ));
            }
        }
    }
    Ok(best.expect("at least one grid point"))
}
