//! Position-based click simulation over a full-information dataset.
//!
//! Each impression presents the production ranker's ordering of a uniformly
//! drawn query; every position is examined independently with probability
//! `(1/rank)^eta`, and an examined document is clicked with probability
//! `eps_plus` when relevant and `eps_minus` otherwise. Every click is logged
//! together with its true examination probability.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, DocId, QueryId};
use crate::error::{Error, Result};
use crate::ranking::{rank_candidates, LinearModel, Ranking};
use crate::scalar::{fmt_sig, real, real_usize, to_f64, Real};

/// Severity of the presentation bias: examination probability is
/// `(1/rank)^eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasProfile<F> {
    eta: F,
}

impl<F: Real> BiasProfile<F> {
    pub fn new(eta: F) -> Result<Self> {
        if !(eta.is_finite() && eta >= F::zero()) {
            return Err(Error::config("eta must be finite and non-negative"));
        }
        Ok(BiasProfile { eta })
    }

    pub fn eta(&self) -> F {
        self.eta
    }

    /// Examination probability at a 1-based rank: `(1/rank)^eta`.
    /// Equals 1 at rank 1 for every eta.
    pub fn examination_probability(&self, rank: usize) -> Result<F> {
        if rank < 1 {
            return Err(Error::config("rank must be at least 1"));
        }
        Ok((F::one() / real_usize(rank)).powf(self.eta))
    }

    /// Examination probabilities for ranks `1..=max_rank`.
    pub fn probabilities(&self, max_rank: usize) -> Vec<F> {
        (1..=max_rank)
            .map(|r| self.examination_probability(r).expect("rank >= 1"))
            .collect()
    }
}

/// Click noise: an examined relevant document is clicked with probability
/// `eps_plus`, an examined irrelevant one with probability `eps_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams<F> {
    eps_plus: F,
    eps_minus: F,
}

impl<F: Real> NoiseParams<F> {
    /// Requires the strict ordering `1 >= eps_plus > eps_minus >= 0`.
    pub fn new(eps_plus: F, eps_minus: F) -> Result<Self> {
        if !(eps_plus <= F::one() && eps_plus > eps_minus && eps_minus >= F::zero()) {
            return Err(Error::config(
                "noise must satisfy 1 >= eps_plus > eps_minus >= 0",
            ));
        }
        Ok(NoiseParams {
            eps_plus,
            eps_minus,
        })
    }

    /// Noise-free clicks: relevant iff clicked among examined results.
    pub fn noise_free() -> Self {
        NoiseParams {
            eps_plus: F::one(),
            eps_minus: F::zero(),
        }
    }

    /// Degenerate parameters with `eps_plus == eps_minus` permitted; only
    /// meaningful for analytical diagnostics, not for simulation configs.
    pub fn degenerate(eps_plus: F, eps_minus: F) -> Result<Self> {
        if !(eps_plus <= F::one() && eps_plus >= eps_minus && eps_minus >= F::zero()) {
            return Err(Error::config(
                "noise must satisfy 1 >= eps_plus >= eps_minus >= 0",
            ));
        }
        Ok(NoiseParams {
            eps_plus,
            eps_minus,
        })
    }

    pub fn eps_plus(&self) -> F {
        self.eps_plus
    }

    pub fn eps_minus(&self) -> F {
        self.eps_minus
    }

    /// Click probability of an examined document.
    #[inline]
    pub fn click_probability(&self, relevant: bool) -> F {
        if relevant {
            self.eps_plus
        } else {
            self.eps_minus
        }
    }
}

/// Provenance of a click log.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig<F> {
    pub profile: BiasProfile<F>,
    pub noise: NoiseParams<F>,
    pub seed: u64,
    /// Set when the propensity column has been recomputed under an assumed
    /// model rather than the generating one.
    pub relabeled: Option<String>,
}

/// One click: the presented ranking, the clicked document, and the true
/// examination probability at its presented rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickRecord<F> {
    pub impression_id: u64,
    pub query_id: QueryId,
    pub presented: Ranking,
    pub clicked_doc_id: DocId,
    /// 1-based rank of the clicked document in the presented ranking.
    pub presented_rank: usize,
    pub propensity: F,
}

/// A set of click records plus the impression count they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickLog<F> {
    pub records: Vec<ClickRecord<F>>,
    pub n_impressions: u64,
    pub config: GeneratorConfig<F>,
}

impl<F: Real> ClickLog<F> {
    pub fn n_clicks(&self) -> usize {
        self.records.len()
    }
}

/// Per-impression examination and click indicators, aligned with the
/// presented ranking. In the position-based model a document's relevance is
/// observed exactly when it is examined.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub impression_id: u64,
    pub query_id: QueryId,
    pub examined: Vec<bool>,
    pub clicked: Vec<bool>,
}

impl SimulationTrace {
    /// Observation indicators; identical to examination here.
    pub fn observed(&self) -> &[bool] {
        &self.examined
    }
}

// Presented ranking and per-position relevance for one query, fixed for the
// whole simulation because the production ranker is deterministic.
pub(crate) struct PresentedQuery<F> {
    pub(crate) ranking: Ranking,
    pub(crate) relevant_at: Vec<bool>,
    pub(crate) propensity_at: Vec<F>,
}

pub(crate) fn present_queries<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    profile: &BiasProfile<F>,
) -> Result<Vec<PresentedQuery<F>>> {
    if ds.queries.is_empty() {
        return Err(Error::config("cannot simulate over an empty dataset"));
    }
    ds.queries
        .iter()
        .map(|q| {
            let ranking = rank_candidates(ranker, q)?;
            let relevant_at = ranking
                .doc_ids
                .iter()
                .map(|d| q.candidate(*d).expect("ranked doc exists").relevant)
                .collect();
            let propensity_at = profile.probabilities(ranking.len());
            Ok(PresentedQuery {
                ranking,
                relevant_at,
                propensity_at,
            })
        })
        .collect()
}

fn impression_rng(base: &ChaCha8Rng, impression: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(impression);
    rng
}

// Draws one impression; the RNG consumption order (query index, then one
// examination draw per position, then a click draw only when examined) is
// part of the determinism contract.
fn sample_impression<F: Real>(
    rng: &mut ChaCha8Rng,
    presented: &[PresentedQuery<F>],
    noise: &NoiseParams<F>,
) -> (usize, Vec<bool>, Vec<bool>) {
    let qi = rng.gen_range(0..presented.len());
    let pq = &presented[qi];
    let len = pq.ranking.len();
    let mut examined = vec![false; len];
    let mut clicked = vec![false; len];
    for pos in 0..len {
        if rng.gen_bool(to_f64(pq.propensity_at[pos])) {
            examined[pos] = true;
            let p_click = to_f64(noise.click_probability(pq.relevant_at[pos]));
            if p_click > 0.0 && rng.gen_bool(p_click) {
                clicked[pos] = true;
            }
        }
    }
    (qi, examined, clicked)
}

fn records_from_impression<F: Real>(
    impression_id: u64,
    pq: &PresentedQuery<F>,
    clicked: &[bool],
    out: &mut Vec<ClickRecord<F>>,
) {
    for (pos, &was_clicked) in clicked.iter().enumerate() {
        if was_clicked {
            out.push(ClickRecord {
                impression_id,
                query_id: pq.ranking.query_id,
                presented: pq.ranking.clone(),
                clicked_doc_id: pq.ranking.doc_ids[pos],
                presented_rank: pos + 1,
                propensity: pq.propensity_at[pos],
            });
        }
    }
}

/// Simulates a fixed number of query impressions and returns the clicks.
///
/// Queries are drawn i.i.d. with replacement; each impression consumes its
/// own RNG stream derived from `(seed, impression_index)`, so the log is
/// independent of evaluation order.
pub fn simulate_clicks<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
    n_impressions: u64,
    seed: u64,
) -> Result<ClickLog<F>> {
    if n_impressions == 0 {
        return Err(Error::config("n_impressions must be at least 1"));
    }
    let presented = present_queries(ds, ranker, profile)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for i in 0..n_impressions {
        let mut rng = impression_rng(&base, i);
        let (qi, _examined, clicked) = sample_impression(&mut rng, &presented, noise);
        records_from_impression(i, &presented[qi], &clicked, &mut records);
    }
    Ok(ClickLog {
        records,
        n_impressions,
        config: GeneratorConfig {
            profile: *profile,
            noise: *noise,
            seed,
            relabeled: None,
        },
    })
}

/// Simulates impressions until at least `target_clicks` clicks are logged.
/// Whole impressions are kept, so the result may slightly overshoot.
pub fn simulate_clicks_until<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
    target_clicks: usize,
    seed: u64,
) -> Result<ClickLog<F>> {
    if target_clicks == 0 {
        return Err(Error::config("target_clicks must be at least 1"));
    }
    let presented = present_queries(ds, ranker, profile)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let max_impressions = (target_clicks as u64)
        .saturating_mul(10_000)
        .saturating_add(10_000);
    let mut n_impressions = 0u64;
    while records.len() < target_clicks {
        if n_impressions >= max_impressions {
            return Err(Error::Experiment(format!(
                "click rate too low: {} clicks after {} impressions",
                records.len(),
                n_impressions
            )));
        }
        let mut rng = impression_rng(&base, n_impressions);
        let (qi, _examined, clicked) = sample_impression(&mut rng, &presented, noise);
        records_from_impression(n_impressions, &presented[qi], &clicked, &mut records);
        n_impressions += 1;
    }
    Ok(ClickLog {
        records,
        n_impressions,
        config: GeneratorConfig {
            profile: *profile,
            noise: *noise,
            seed,
            relabeled: None,
        },
    })
}

/// Like [`simulate_clicks`] but also returns the per-impression examination
/// and click indicators for diagnostics.
pub fn simulate_clicks_traced<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
    n_impressions: u64,
    seed: u64,
) -> Result<(ClickLog<F>, Vec<SimulationTrace>)> {
    if n_impressions == 0 {
        return Err(Error::config("n_impressions must be at least 1"));
    }
    let presented = present_queries(ds, ranker, profile)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut traces = Vec::with_capacity(n_impressions as usize);
    for i in 0..n_impressions {
        let mut rng = impression_rng(&base, i);
        let (qi, examined, clicked) = sample_impression(&mut rng, &presented, noise);
        records_from_impression(i, &presented[qi], &clicked, &mut records);
        traces.push(SimulationTrace {
            impression_id: i,
            query_id: presented[qi].ranking.query_id,
            examined,
            clicked,
        });
    }
    Ok((
        ClickLog {
            records,
            n_impressions,
            config: GeneratorConfig {
                profile: *profile,
                noise: *noise,
                seed,
                relabeled: None,
            },
        },
        traces,
    ))
}

/// Clicks observed at each presented rank divided by the impression count.
/// Indexed by rank minus 1; sized by the longest presented ranking seen.
pub fn empirical_click_rate_by_rank<F: Real>(log: &ClickLog<F>) -> Vec<F> {
    let max_len = log.records.iter().map(|r| r.presented.len()).max().unwrap_or(0);
    if log.n_impressions == 0 || max_len == 0 {
        return vec![F::zero(); max_len];
    }
    let mut counts = vec![0u64; max_len];
    for rec in &log.records {
        counts[rec.presented_rank - 1] += 1;
    }
    let n = real::<F>(log.n_impressions as f64);
    counts.into_iter().map(|c| real::<F>(c as f64) / n).collect()
}

/// Closed-form expectations of the simulator: per-rank click-through rate,
/// clicks per impression, and the fraction of clicks landing on irrelevant
/// documents, all under uniform query draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedClickStats<F> {
    pub ctr_by_rank: Vec<F>,
    pub clicks_per_impression: F,
    pub irrelevant_click_fraction: F,
}

/// Computes [`ExpectedClickStats`] exactly from the corpus composition and
/// the production ranker's presented rankings.
pub fn expected_click_stats<F: Real>(
    ds: &Dataset<F>,
    ranker: &LinearModel<F>,
    profile: &BiasProfile<F>,
    noise: &NoiseParams<F>,
) -> Result<ExpectedClickStats<F>> {
    let presented = present_queries(ds, ranker, profile)?;
    let max_len = presented.iter().map(|p| p.ranking.len()).max().unwrap_or(0);
    let mut ctr = vec![F::zero(); max_len];
    let mut irrelevant = F::zero();
    let weight = F::one() / real_usize(ds.queries.len());
    for pq in &presented {
        for ((slot, &p), &relevant) in ctr.iter_mut().zip(&pq.propensity_at).zip(&pq.relevant_at) {
            let p_click = p * noise.click_probability(relevant);
            *slot += weight * p_click;
            if !relevant {
                irrelevant += weight * p_click;
            }
        }
    }
    let total: F = ctr.iter().copied().fold(F::zero(), |a, b| a + b);
    let fraction = if total > F::zero() {
        irrelevant / total
    } else {
        F::zero()
    };
    Ok(ExpectedClickStats {
        ctr_by_rank: ctr,
        clicks_per_impression: total,
        irrelevant_click_fraction: fraction,
    })
}

/// Fraction of logged clicks whose document is irrelevant in the dataset.
pub fn irrelevant_click_fraction<F: Real>(log: &ClickLog<F>, ds: &Dataset<F>) -> Result<F> {
    if log.records.is_empty() {
        return Ok(F::zero());
    }
    let index = ds.query_index();
    let mut bad = 0usize;
    for rec in &log.records {
        let qi = *index
            .get(&rec.query_id)
            .ok_or_else(|| Error::data(format!("unknown query id {}", rec.query_id)))?;
        let doc = ds.queries[qi]
            .candidate(rec.clicked_doc_id)
            .ok_or_else(|| Error::data(format!("unknown doc id {}", rec.clicked_doc_id)))?;
        if !doc.relevant {
            bad += 1;
        }
    }
    Ok(real_usize::<F>(bad) / real_usize(log.records.len()))
}

// ── Click log TSV ───────────────────────────────────────────────────────

const LOG_HEADER: &str =
    "impression_id\tquery_id\tpresented_ranking\tclicked_doc_id\tpresented_rank\tpropensity";

/// Writes a click log as TSV: a `#` provenance comment, a header row, and
/// one row per click with the propensity at 12 significant digits.
pub fn write_click_log<F: Real>(log: &ClickLog<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = File::create(path.as_ref())?;
    write!(
        f,
        "# n_impressions={}\tseed={}\teta={}\teps_plus={}\teps_minus={}",
        log.n_impressions,
        log.config.seed,
        to_f64(log.config.profile.eta()),
        to_f64(log.config.noise.eps_plus()),
        to_f64(log.config.noise.eps_minus()),
    )?;
    if let Some(note) = &log.config.relabeled {
        write!(f, "\trelabeled={note}")?;
    }
    writeln!(f)?;
    writeln!(f, "{LOG_HEADER}")?;
    for r in &log.records {
        let ranking: Vec<String> = r.presented.doc_ids.iter().map(|d| d.to_string()).collect();
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.impression_id,
            r.query_id,
            ranking.join(","),
            r.clicked_doc_id,
            r.presented_rank,
            fmt_sig(r.propensity, 12),
        )?;
    }
    Ok(())
}

/// Reads a click log written by [`write_click_log`].
pub fn read_click_log<F: Real>(path: impl AsRef<Path>) -> Result<ClickLog<F>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines().enumerate();

    let (_, comment) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty click log"))
        .and_then(|(i, l)| Ok((i, l?)))?;
    let comment = comment
        .strip_prefix("# ")
        .ok_or_else(|| Error::parse(1, "expected `# key=value...` provenance comment"))?;
    let mut meta: HashMap<&str, &str> = HashMap::new();
    for pair in comment.split('\t') {
        if let Some((k, v)) = pair.split_once('=') {
            meta.insert(k, v);
        }
    }
    let get = |key: &str| -> Result<&str> {
        meta.get(key)
            .copied()
            .ok_or_else(|| Error::parse(1, format!("missing `{key}` in provenance comment")))
    };
    let n_impressions: u64 = get("n_impressions")?
        .parse()
        .map_err(|_| Error::parse(1, "invalid n_impressions"))?;
    let seed: u64 = get("seed")?.parse().map_err(|_| Error::parse(1, "invalid seed"))?;
    let eta: f64 = get("eta")?.parse().map_err(|_| Error::parse(1, "invalid eta"))?;
    let eps_plus: f64 = get("eps_plus")?
        .parse()
        .map_err(|_| Error::parse(1, "invalid eps_plus"))?;
    let eps_minus: f64 = get("eps_minus")?
        .parse()
        .map_err(|_| Error::parse(1, "invalid eps_minus"))?;
    let relabeled = meta.get("relabeled").map(|s| s.to_string());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing header row"))
        .and_then(|(i, l)| Ok((i, l?)))?;
    if header != LOG_HEADER {
        return Err(Error::parse(2, "unexpected header row"));
    }

    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(lineno, "expected 6 tab-separated fields"));
        }
        let impression_id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid impression id"))?;
        let query_id: QueryId = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid query id"))?;
        let doc_ids: Vec<DocId> = fields[2]
            .split(',')
            .map(|t| t.parse().map_err(|_| Error::parse(lineno, "invalid doc id")))
            .collect::<Result<_>>()?;
        let clicked_doc_id: DocId = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid clicked doc id"))?;
        let presented_rank: usize = fields[4]
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid presented rank"))?;
        let propensity: f64 = fields[5]
            .parse()
            .map_err(|_| Error::parse(lineno, "invalid propensity"))?;
        if !(propensity > 0.0 && propensity <= 1.0) {
            return Err(Error::parse(lineno, "propensity must lie in (0, 1]"));
        }
        let presented = Ranking {
            query_id,
            doc_ids,
        };
        if presented.rank_of(clicked_doc_id) != Some(presented_rank) {
            return Err(Error::parse(
                lineno,
                "presented_rank does not match clicked document's position",
            ));
        }
        records.push(ClickRecord {
            impression_id,
            query_id,
            presented,
            clicked_doc_id,
            presented_rank,
            propensity: real(propensity),
        });
    }

    Ok(ClickLog {
        records,
        n_impressions,
        config: GeneratorConfig {
            profile: BiasProfile::new(real(eta))?,
            noise: NoiseParams::degenerate(real(eps_plus), real(eps_minus))?,
            seed,
            relabeled,
        },
    })
}
