//! Full-information ranking corpora: LETOR/SVMlight ingest, relevance
//! binarization, synthetic generation, and query subsampling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{fmt_sig, real, Real};

/// Identifier of a query instance.
pub type QueryId = u64;
/// Identifier of a candidate document, unique within its query.
pub type DocId = u32;

/// Which portion of a corpus a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Dense per-document match features, fixed dimension within a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<F>(pub Vec<F>);

impl<F: Real> FeatureVector<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite feature value"));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[F] {
        &self.0
    }
}

/// One candidate result: features plus graded and binarized relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct Document<F> {
    pub doc_id: DocId,
    pub features: FeatureVector<F>,
    pub grade: u32,
    pub relevant: bool,
}

/// A query with its candidate set and ground-truth relevances.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryInstance<F> {
    pub query_id: QueryId,
    pub candidates: Vec<Document<F>>,
}

impl<F: Real> QueryInstance<F> {
    pub fn new(query_id: QueryId, candidates: Vec<Document<F>>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::data(format!("query {query_id} has no candidates")));
        }
        let mut seen = std::collections::HashSet::new();
        for d in &candidates {
            if !seen.insert(d.doc_id) {
                return Err(Error::data(format!(
                    "duplicate doc id {} in query {query_id}",
                    d.doc_id
                )));
            }
        }
        Ok(QueryInstance {
            query_id,
            candidates,
        })
    }

    /// Candidate lookup by document id.
    pub fn candidate(&self, doc_id: DocId) -> Option<&Document<F>> {
        self.candidates.iter().find(|d| d.doc_id == doc_id)
    }

    /// Map from doc id to binary relevance, as needed by the rank-sum loss.
    pub fn relevance_map(&self) -> HashMap<DocId, bool> {
        self.candidates
            .iter()
            .map(|d| (d.doc_id, d.relevant))
            .collect()
    }

    pub fn n_relevant(&self) -> usize {
        self.candidates.iter().filter(|d| d.relevant).count()
    }
}

/// A split of a corpus: queries with full relevance information.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub split: Split,
    pub queries: Vec<QueryInstance<F>>,
    pub feature_dim: usize,
}

impl<F: Real> Dataset<F> {
    /// Validates the dataset invariants: unique query ids, uniform feature
    /// dimension, finite values.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for q in &self.queries {
            if !seen.insert(q.query_id) {
                return Err(Error::data(format!("duplicate query id {}", q.query_id)));
            }
            for d in &q.candidates {
                if d.features.dim() != self.feature_dim {
                    return Err(Error::data(format!(
                        "query {} doc {} has dimension {} (expected {})",
                        q.query_id,
                        d.doc_id,
                        d.features.dim(),
                        self.feature_dim
                    )));
                }
                if d.features.values().iter().any(|v| !v.is_finite()) {
                    return Err(Error::data("non-finite feature value"));
                }
            }
        }
        Ok(())
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    /// Index from query id to position in `queries`.
    pub fn query_index(&self) -> HashMap<QueryId, usize> {
        self.queries
            .iter()
            .enumerate()
            .map(|(i, q)| (q.query_id, i))
            .collect()
    }

    pub fn min_candidate_count(&self) -> usize {
        self.queries
            .iter()
            .map(|q| q.candidates.len())
            .min()
            .unwrap_or(0)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}

// ── LETOR / SVMlight text format ────────────────────────────────────────

/// Loads a LETOR/SVMlight file: `<grade> qid:<id> <idx>:<val> ... [# comment]`.
///
/// Sparse feature indices are 1-based and densified to the per-file maximum
/// index; absent indices become zero. A document is relevant iff its grade
/// is at least `binarize_at`.
pub fn load_letor<F: Real>(path: impl AsRef<Path>, binarize_at: u32) -> Result<Dataset<F>> {
    let file = File::open(path.as_ref())?;
    read_letor(BufReader::new(file), binarize_at)
}

/// Same as [`load_letor`] but from any buffered reader.
pub fn read_letor<F: Real>(reader: impl BufRead, binarize_at: u32) -> Result<Dataset<F>> {
    struct RawDoc {
        grade: u32,
        sparse: Vec<(usize, f64)>,
    }

    let mut order: Vec<QueryId> = Vec::new();
    let mut by_query: HashMap<QueryId, Vec<RawDoc>> = HashMap::new();
    let mut max_index = 0usize;
    // duplicate-index detection: stamp each index with the line that last
    // used it, so wide feature spaces stay O(1) per token
    let mut index_stamp: Vec<usize> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = match line.split_once('#') {
            Some((before, _comment)) => before,
            None => line.as_str(),
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(grade_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let grade: u32 = grade_tok
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid grade `{grade_tok}`")))?;
        let qid_tok = tokens
            .next()
            .ok_or_else(|| Error::parse(lineno, "missing qid field"))?;
        let qid: QueryId = qid_tok
            .strip_prefix("qid:")
            .ok_or_else(|| Error::parse(lineno, format!("expected qid:<id>, got `{qid_tok}`")))?
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid qid `{qid_tok}`")))?;

        let mut sparse: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("expected <idx>:<val>, got `{tok}`")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid feature index `{idx_s}`")))?;
            if idx == 0 {
                return Err(Error::parse(lineno, "feature indices are 1-based"));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid feature value `{val_s}`")))?;
            if !val.is_finite() {
                return Err(Error::parse(lineno, "non-finite feature value"));
            }
            if index_stamp.len() <= idx {
                index_stamp.resize(idx + 1, 0);
            }
            if index_stamp[idx] == lineno {
                return Err(Error::parse(lineno, format!("duplicate feature index {idx}")));
            }
            index_stamp[idx] = lineno;
            sparse.push((idx, val));
            max_index = max_index.max(idx);
        }

        if !by_query.contains_key(&qid) {
            order.push(qid);
        }
        by_query.entry(qid).or_default().push(RawDoc { grade, sparse });
    }

    let mut queries = Vec::with_capacity(order.len());
    for qid in order {
        let raw_docs = by_query.remove(&qid).expect("query recorded in order");
        let mut candidates = Vec::with_capacity(raw_docs.len());
        for (ordinal, raw) in raw_docs.into_iter().enumerate() {
            let mut dense = vec![F::zero(); max_index];
            for (idx, val) in raw.sparse {
                dense[idx - 1] = real(val);
            }
            candidates.push(Document {
                doc_id: ordinal as DocId,
                features: FeatureVector(dense),
                grade: raw.grade,
                relevant: raw.grade >= binarize_at,
            });
        }
        queries.push(QueryInstance::new(qid, candidates)?);
    }

    let ds = Dataset {
        split: Split::Train,
        queries,
        feature_dim: max_index,
    };
    ds.validate()?;
    Ok(ds)
}

/// Serializes a dataset back to LETOR text with 6 significant digits per
/// feature. Every index is written so the dimension survives a round trip.
pub fn to_letor_string<F: Real>(ds: &Dataset<F>) -> String {
    let mut out = String::new();
    for q in &ds.queries {
        for d in &q.candidates {
            out.push_str(&format!("{} qid:{}", d.grade, q.query_id));
            for (i, v) in d.features.values().iter().enumerate() {
                out.push_str(&format!(" {}:{}", i + 1, fmt_sig(*v, 6)));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes a dataset as LETOR text (see [`to_letor_string`]).
pub fn write_letor<F: Real>(ds: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path.as_ref())?;
    file.write_all(to_letor_string(ds).as_bytes())?;
    Ok(())
}

// ── Synthetic corpora ───────────────────────────────────────────────────

/// Parameters for the synthetic full-information generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_queries: usize,
    pub n_candidates: usize,
    pub feature_dim: usize,
    pub relevant_fraction: f64,
    pub noise_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_queries: 1000,
            n_candidates: 30,
            feature_dim: 20,
            relevant_fraction: 0.1,
            noise_scale: 0.2,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_candidates < 2 {
            return Err(Error::config("n_candidates must be at least 2"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be positive"));
        }
        if !(self.relevant_fraction > 0.0 && self.relevant_fraction < 1.0) {
            return Err(Error::config("relevant_fraction must lie in (0, 1)"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config("noise_scale must be finite and non-negative"));
        }
        Ok(())
    }
}

// Stream layout for a synthesis seed: stream 0 draws the hidden scoring
// vector, streams 1..=3 draw the per-split documents. Sharing stream 0
// keeps the learning task identical across splits of one corpus.
const STREAM_HIDDEN_MODEL: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_VALIDATION: u64 = 2;
const STREAM_TEST: u64 = 3;

fn split_stream(split: Split) -> u64 {
    match split {
        Split::Train => STREAM_TRAIN,
        Split::Validation => STREAM_VALIDATION,
        Split::Test => STREAM_TEST,
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn hidden_model(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_HIDDEN_MODEL);
    let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in &mut w {
            *x /= norm;
        }
    } else {
        w[0] = 1.0;
    }
    w
}

fn synthesize_split<F: Real>(
    seed: u64,
    cfg: &SyntheticConfig,
    n_queries: usize,
    split: Split,
    id_base: QueryId,
) -> Result<Dataset<F>> {
    cfg.validate()?;
    if n_queries == 0 {
        return Err(Error::config("n_queries must be positive"));
    }
    let w_star = hidden_model(seed, cfg.feature_dim);
    let noise = Normal::new(0.0, cfg.noise_scale)
        .map_err(|e| Error::config(format!("invalid noise_scale: {e}")))?;
    let mut rng = stream_rng(seed, split_stream(split));

    let total = n_queries * cfg.n_candidates;
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut latents: Vec<f64> = Vec::with_capacity(total);
    for _ in 0..total {
        let phi: Vec<f64> = (0..cfg.feature_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let score: f64 = phi.iter().zip(&w_star).map(|(a, b)| a * b).sum();
        latents.push(score + noise.sample(&mut rng));
        features.push(phi);
    }

    // Per-dataset quantile threshold: the top `round(fraction * total)`
    // latents are relevant; the remaining order statistics assign grades
    // 4..0 so that grade >= 3 coincides exactly with binary relevance.
    let n_relevant = ((cfg.relevant_fraction * total as f64).round() as usize)
        .clamp(1, total - 1);
    let mut by_latent: Vec<usize> = (0..total).collect();
    by_latent.sort_by(|&a, &b| {
        latents[b]
            .partial_cmp(&latents[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut grades = vec![0u32; total];
    let top_half = n_relevant.div_ceil(2);
    for (pos, &idx) in by_latent.iter().enumerate() {
        grades[idx] = if pos < top_half {
            4
        } else if pos < n_relevant {
            3
        } else {
            let rest = pos - n_relevant;
            let n_rest = total - n_relevant;
            match 3 * rest / n_rest {
                0 => 2,
                1 => 1,
                _ => 0,
            }
        };
    }

    let mut queries = Vec::with_capacity(n_queries);
    let mut flat = 0usize;
    for qi in 0..n_queries {
        let mut candidates = Vec::with_capacity(cfg.n_candidates);
        for di in 0..cfg.n_candidates {
            let values = features[flat].iter().map(|&v| real(v)).collect();
            candidates.push(Document {
                doc_id: di as DocId,
                features: FeatureVector(values),
                grade: grades[flat],
                relevant: grades[flat] >= 3,
            });
            flat += 1;
        }
        queries.push(QueryInstance::new(id_base + qi as QueryId, candidates)?);
    }

    Ok(Dataset {
        split,
        queries,
        feature_dim: cfg.feature_dim,
    })
}

/// Generates a synthetic full-information dataset.
///
/// A hidden unit scoring vector is drawn from the seed; each document gets
/// spherical Gaussian features and is relevant iff its hidden score plus
/// Gaussian label noise clears the per-dataset quantile matching
/// `relevant_fraction`. Bit-identical for equal seeds.
pub fn synthesize_dataset<F: Real>(seed: u64, cfg: &SyntheticConfig) -> Result<Dataset<F>> {
    synthesize_split(seed, cfg, cfg.n_queries, Split::Train, 0)
}

/// A train/validation/test corpus over disjoint query ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<F> {
    pub train: Dataset<F>,
    pub validation: Dataset<F>,
    pub test: Dataset<F>,
}

const VALIDATION_ID_BASE: QueryId = 1_000_000_000;
const TEST_ID_BASE: QueryId = 2_000_000_000;

impl<F: Real> Corpus<F> {
    /// Synthesizes three disjoint splits sharing one hidden scoring vector.
    pub fn synthesize(
        seed: u64,
        cfg: &SyntheticConfig,
        n_train: usize,
        n_validation: usize,
        n_test: usize,
    ) -> Result<Self> {
        Ok(Corpus {
            train: synthesize_split(seed, cfg, n_train, Split::Train, 0)?,
            validation: synthesize_split(
                seed,
                cfg,
                n_validation,
                Split::Validation,
                VALIDATION_ID_BASE,
            )?,
            test: synthesize_split(seed, cfg, n_test, Split::Test, TEST_ID_BASE)?,
        })
    }

    /// Loads a corpus from three LETOR files. Sparse files can end at
    /// different maximum indices, so all splits are padded to the widest
    /// feature dimension.
    pub fn load_letor(
        train: impl AsRef<Path>,
        validation: impl AsRef<Path>,
        test: impl AsRef<Path>,
        binarize_at: u32,
    ) -> Result<Self> {
        let mut corpus = Corpus {
            train: load_letor(train, binarize_at)?.with_split(Split::Train),
            validation: load_letor(validation, binarize_at)?.with_split(Split::Validation),
            test: load_letor(test, binarize_at)?.with_split(Split::Test),
        };
        let dim = corpus
            .train
            .feature_dim
            .max(corpus.validation.feature_dim)
            .max(corpus.test.feature_dim);
        for ds in [
            &mut corpus.train,
            &mut corpus.validation,
            &mut corpus.test,
        ] {
            if ds.feature_dim < dim {
                for q in &mut ds.queries {
                    for d in &mut q.candidates {
                        d.features.0.resize(dim, F::zero());
                    }
                }
                ds.feature_dim = dim;
            }
        }
        Ok(corpus)
    }
}

/// Uniform random subset of queries without replacement; size is
/// `round(fraction * n)` and at least 1. Original query order is kept.
pub fn subsample_queries<F: Real>(ds: &Dataset<F>, fraction: f64, seed: u64) -> Result<Dataset<F>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("fraction must lie in (0, 1]"));
    }
    let n = ds.queries.len();
    if n == 0 {
        return Err(Error::config("cannot subsample an empty dataset"));
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(Dataset {
        split: ds.split,
        queries: picked.iter().map(|&i| ds.queries[i].clone()).collect(),
        feature_dim: ds.feature_dim,
    })
}
