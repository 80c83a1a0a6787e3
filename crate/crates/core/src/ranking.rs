//! Linear scoring, deterministic ranking, and the sum-of-relevant-ranks risk.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::dataset::{Dataset, DocId, FeatureVector, QueryId, QueryInstance};
use crate::error::{Error, Result};
use crate::scalar::{fmt_sig, real, real_usize, Real};

/// Linear scoring model: the score of a document is the dot product of its
/// feature vector with the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    pub weights: Vec<F>,
}

impl<F: Real> LinearModel<F> {
    pub fn new(weights: Vec<F>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::data("non-finite model weight"));
        }
        Ok(LinearModel { weights })
    }

    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![F::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn score(&self, features: &FeatureVector<F>) -> F {
        debug_assert_eq!(self.weights.len(), features.dim());
        self.weights
            .iter()
            .zip(features.values())
            .map(|(w, x)| *w * *x)
            .fold(F::zero(), |acc, t| acc + t)
    }

    /// Writes the model as text: `dim=<d>` then the weights at 17
    /// significant digits (exact round trip for f64).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path.as_ref())?;
        writeln!(f, "dim={}", self.dim())?;
        let line: Vec<String> = self.weights.iter().map(|w| fmt_sig(*w, 17)).collect();
        writeln!(f, "{}", line.join(" "))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(File::open(path.as_ref())?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty model file"))??;
        let dim: usize = header
            .strip_prefix("dim=")
            .ok_or_else(|| Error::parse(1, "expected `dim=<d>` header"))?
            .parse()
            .map_err(|_| Error::parse(1, "invalid dimension"))?;
        let body = lines
            .next()
            .ok_or_else(|| Error::parse(2, "missing weight line"))??;
        let weights: Vec<F> = body
            .split_ascii_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map(real)
                    .map_err(|_| Error::parse(2, format!("invalid weight `{t}`")))
            })
            .collect::<Result<_>>()?;
        if weights.len() != dim {
            return Err(Error::parse(
                2,
                format!("expected {dim} weights, found {}", weights.len()),
            ));
        }
        LinearModel::new(weights)
    }
}

/// An ordered permutation of a query's candidate documents (index 0 is the
/// top, i.e. rank 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    pub query_id: QueryId,
    pub doc_ids: Vec<DocId>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// 1-based rank of a document, if present.
    pub fn rank_of(&self, doc_id: DocId) -> Option<usize> {
        self.doc_ids.iter().position(|&d| d == doc_id).map(|p| p + 1)
    }

    /// Map from doc id to 1-based rank.
    pub fn rank_map(&self) -> HashMap<DocId, usize> {
        self.doc_ids
            .iter()
            .enumerate()
            .map(|(i, &d)| (d, i + 1))
            .collect()
    }
}

/// Ranks a query's candidates by descending score; ties break toward the
/// smaller doc id so the order is total and reproducible.
pub fn rank_candidates<F: Real>(
    model: &LinearModel<F>,
    query: &QueryInstance<F>,
) -> Result<Ranking> {
    let mut scored: Vec<(F, DocId)> = Vec::with_capacity(query.candidates.len());
    for d in &query.candidates {
        if d.features.dim() != model.dim() {
            return Err(Error::config(format!(
                "model dimension {} does not match feature dimension {}",
                model.dim(),
                d.features.dim()
            )));
        }
        scored.push((model.score(&d.features), d.doc_id));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    Ok(Ranking {
        query_id: query.query_id,
        doc_ids: scored.into_iter().map(|(_, d)| d).collect(),
    })
}

/// Sum of the 1-based ranks of the relevant documents in a ranking.
pub fn sum_relevant_ranks(ranking: &Ranking, relevances: &HashMap<DocId, bool>) -> Result<u64> {
    let mut total = 0u64;
    for (i, doc) in ranking.doc_ids.iter().enumerate() {
        let relevant = relevances.get(doc).ok_or_else(|| {
            Error::data(format!("no relevance entry for doc {doc} in query {}", ranking.query_id))
        })?;
        if *relevant {
            total += (i + 1) as u64;
        }
    }
    Ok(total)
}

/// Mean sum-of-relevant-ranks of the model's rankings over a dataset; the
/// test-set metric for all experiments.
pub fn full_info_risk<F: Real>(model: &LinearModel<F>, ds: &Dataset<F>) -> Result<F> {
    if ds.queries.is_empty() {
        return Err(Error::config("risk over an empty dataset is undefined"));
    }
    let mut total = 0u64;
    for q in &ds.queries {
        let ranking = rank_candidates(model, q)?;
        total += sum_relevant_ranks(&ranking, &q.relevance_map())?;
    }
    Ok(real::<F>(total as f64) / real_usize(ds.queries.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_dataset, Document, Split, SyntheticConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(id: DocId, features: Vec<f64>, relevant: bool) -> Document<f64> {
        Document {
            doc_id: id,
            features: FeatureVector(features),
            grade: if relevant { 4 } else { 0 },
            relevant,
        }
    }

    fn query(docs: Vec<Document<f64>>) -> QueryInstance<f64> {
        QueryInstance::new(1, docs).unwrap()
    }

    #[test]
    fn zero_model_orders_by_doc_id() {
        let q = query(vec![
            doc(2, vec![1.0], false),
            doc(0, vec![5.0], false),
            doc(1, vec![-3.0], false),
        ]);
        let r = rank_candidates(&LinearModel::zeros(1), &q).unwrap();
        assert_eq!(r.doc_ids, vec![0, 1, 2]);
    }

    #[test]
    fn higher_score_ranks_first() {
        let q = query(vec![doc(0, vec![1.0], false), doc(1, vec![2.0], false)]);
        let m = LinearModel::new(vec![1.0]).unwrap();
        let r = rank_candidates(&m, &q).unwrap();
        assert_eq!(r.doc_ids, vec![1, 0]);
    }

    #[test]
    fn ranking_matches_brute_force_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let dim = 5;
            let docs: Vec<Document<f64>> = (0..20)
                .map(|i| doc(i, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), false))
                .collect();
            let q = query(docs);
            let m = LinearModel::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();

            // Independent oracle: stable sort of (doc, score) pairs keyed by
            // (-score, doc_id).
            let mut pairs: Vec<(DocId, f64)> = q
                .candidates
                .iter()
                .map(|d| (d.doc_id, m.score(&d.features)))
                .collect();
            pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let expected: Vec<DocId> = pairs.into_iter().map(|(d, _)| d).collect();

            assert_eq!(rank_candidates(&m, &q).unwrap().doc_ids, expected);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let q = query(vec![doc(0, vec![1.0, 2.0], false)]);
        let m = LinearModel::new(vec![1.0]).unwrap();
        assert!(matches!(rank_candidates(&m, &q), Err(Error::Config(_))));
    }

    #[test]
    fn rank_sum_of_no_relevant_docs_is_zero() {
        let q = query(vec![doc(0, vec![0.0], false), doc(1, vec![0.0], false)]);
        let r = rank_candidates(&LinearModel::zeros(1), &q).unwrap();
        assert_eq!(sum_relevant_ranks(&r, &q.relevance_map()).unwrap(), 0);
    }

    #[test]
    fn rank_sum_adds_positions() {
        let r = Ranking {
            query_id: 1,
            doc_ids: vec![5, 6, 7],
        };
        let rel = HashMap::from([(5, true), (6, false), (7, true)]);
        assert_eq!(sum_relevant_ranks(&r, &rel).unwrap(), 1 + 3);
    }

    #[test]
    fn rank_sum_missing_relevance_is_data_error() {
        let r = Ranking {
            query_id: 1,
            doc_ids: vec![5, 6],
        };
        let rel = HashMap::from([(5, true)]);
        assert!(matches!(sum_relevant_ranks(&r, &rel), Err(Error::Data(_))));
    }

    #[test]
    fn rank_sum_matches_position_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let docs: Vec<Document<f64>> = (0..10)
                .map(|i| doc(i, vec![rng.gen_range(-1.0..1.0)], rng.gen_bool(0.4)))
                .collect();
            let q = query(docs);
            let m = LinearModel::new(vec![1.0]).unwrap();
            let r = rank_candidates(&m, &q).unwrap();

            let mut oracle = 0u64;
            for (pos, d) in r.doc_ids.iter().enumerate() {
                if q.candidate(*d).unwrap().relevant {
                    oracle += pos as u64 + 1;
                }
            }
            assert_eq!(sum_relevant_ranks(&r, &q.relevance_map()).unwrap(), oracle);
        }
    }

    #[test]
    fn risk_of_empty_dataset_is_config_error() {
        let ds = Dataset::<f64> {
            split: Split::Train,
            queries: vec![],
            feature_dim: 1,
        };
        assert!(matches!(
            full_info_risk(&LinearModel::zeros(1), &ds),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn risk_with_no_relevant_docs_is_zero() {
        let ds = Dataset {
            split: Split::Train,
            queries: vec![query(vec![doc(0, vec![1.0], false)])],
            feature_dim: 1,
        };
        assert_eq!(full_info_risk(&LinearModel::zeros(1), &ds).unwrap(), 0.0);
    }

    #[test]
    fn perfect_ranking_risk_is_closed_form() {
        // Relevant docs get feature 1, irrelevant 0; unit weight ranks all
        // k relevant docs on top: loss k(k+1)/2 per query.
        let k = 3;
        let docs: Vec<Document<f64>> = (0..8)
            .map(|i| doc(i, vec![if i < k { 1.0 } else { 0.0 }], i < k))
            .collect();
        let ds = Dataset {
            split: Split::Train,
            queries: vec![query(docs)],
            feature_dim: 1,
        };
        let m = LinearModel::new(vec![1.0]).unwrap();
        let expected = (k * (k + 1) / 2) as f64;
        assert_eq!(full_info_risk(&m, &ds).unwrap(), expected);
    }

    #[test]
    fn risk_is_mean_of_per_query_losses() {
        let ds: Dataset<f64> = synthesize_dataset(
            21,
            &SyntheticConfig {
                n_queries: 5,
                n_candidates: 8,
                feature_dim: 4,
                ..SyntheticConfig::default()
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = LinearModel::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();

        let mut total = 0u64;
        for q in &ds.queries {
            let r = rank_candidates(&m, q).unwrap();
            total += sum_relevant_ranks(&r, &q.relevance_map()).unwrap();
        }
        let expected = total as f64 / ds.queries.len() as f64;
        assert_eq!(full_info_risk(&m, &ds).unwrap(), expected);
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let m = LinearModel::new(vec![0.1, -2.5e-7, 3.0, std::f64::consts::PI]).unwrap();
        m.write(&path).unwrap();
        let back: LinearModel<f64> = LinearModel::read(&path).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn rank_sums_are_permutation_invariant(
            perm_seed in 0u64..1000,
            n in 2usize..12,
        ) {
            // Sum of ranks over the whole candidate set is n(n+1)/2 for any
            // permutation, so the difference of two rankings telescopes to 0.
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            let mut ids: Vec<DocId> = (0..n as DocId).collect();
            for i in (1..ids.len()).rev() {
                ids.swap(i, rng.gen_range(0..=i));
            }
            let r1 = Ranking { query_id: 1, doc_ids: (0..n as DocId).collect() };
            let r2 = Ranking { query_id: 1, doc_ids: ids };
            let all: HashMap<DocId, bool> = (0..n as DocId).map(|d| (d, true)).collect();
            let s1 = sum_relevant_ranks(&r1, &all).unwrap();
            let s2 = sum_relevant_ranks(&r2, &all).unwrap();
            prop_assert_eq!(s1, s2);
            prop_assert_eq!(s1, (n * (n + 1) / 2) as u64);
        }

        #[test]
        fn ranking_is_scale_invariant(
            scale in 1e-3f64..1e3,
            seed in 0u64..500,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = 3;
            let docs: Vec<Document<f64>> = (0..10)
                .map(|i| doc(i, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), false))
                .collect();
            let q = query(docs);
            let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m1 = LinearModel::new(w.clone()).unwrap();
            let m2 = LinearModel::new(w.iter().map(|x| x * scale).collect()).unwrap();
            prop_assert_eq!(
                rank_candidates(&m1, &q).unwrap().doc_ids,
                rank_candidates(&m2, &q).unwrap().doc_ids
            );
        }

        #[test]
        fn rank_sum_respects_bounds(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2usize..10);
            let docs: Vec<Document<f64>> = (0..n as DocId)
                .map(|i| doc(i, vec![rng.gen_range(-1.0..1.0)], rng.gen_bool(0.5)))
                .collect();
            let k = docs.iter().filter(|d| d.relevant).count() as u64;
            let q = query(docs);
            let m = LinearModel::new(vec![rng.gen_range(-1.0..1.0)]).unwrap();
            let r = rank_candidates(&m, &q).unwrap();
            let s = sum_relevant_ranks(&r, &q.relevance_map()).unwrap();
            let n = n as u64;
            let upper: u64 = ((n - k + 1)..=n).sum();
            prop_assert!(s <= upper);
            let lower: u64 = (1..=k).sum();
            prop_assert!(s >= lower);
        }
    }
}
