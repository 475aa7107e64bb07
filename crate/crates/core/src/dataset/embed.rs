use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FilterDecision, ImageRecord};
use crate::par::bounded_map;

/// Similarity threshold above which four views are treated as indoor.
pub const INDOOR_THRESHOLD: f64 = 0.8;

/// Slack applied to the strict `>` comparison so that sets constructed to
/// sit exactly on the threshold are not tipped over by rounding.
pub const SIMILARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding has non-finite component at index {0}")]
    NonFinite(usize),
    #[error("embedding is all zeros")]
    ZeroNorm,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(i) = components.iter().position(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        if components.iter().all(|&x| x == 0.0) {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(EmbeddingVector(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(v)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.0.iter().map(|x| x * x).sum();
    let norm_b: f64 = b.0.iter().map(|x| x * x).sum();
    let denom = (norm_a * norm_b).sqrt();
    if denom == 0.0 {
        // components too small to square without underflow
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// What the embedding vectors were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    #[default]
    Image,
    Caption,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("embedding provider failed for {uri}: {message}")]
pub struct ProviderError {
    pub uri: String,
    pub message: String,
}

/// Maps an image reference to an embedding. Must be deterministic within
/// a run.
pub trait EmbeddingProvider: Sync {
    fn embed(&self, image_uri: &str) -> Result<EmbeddingVector, ProviderError>;

    fn source(&self) -> EmbeddingSource {
        EmbeddingSource::Image
    }
}

/// Precomputed embeddings keyed by image uri.
#[derive(Debug, Clone, Default)]
pub struct LookupEmbeddings {
    table: HashMap<String, EmbeddingVector>,
    source: EmbeddingSource,
}

#[derive(Deserialize)]
struct LookupRow {
    uri: String,
    embedding: EmbeddingVector,
}

impl LookupEmbeddings {
    pub fn new(source: EmbeddingSource) -> Self {
        LookupEmbeddings {
            table: HashMap::new(),
            source,
        }
    }

    pub fn insert(&mut self, uri: impl Into<String>, vector: EmbeddingVector) {
        self.table.insert(uri.into(), vector);
    }

    /// Reads JSONL rows of the form `{"uri": ..., "embedding": [...]}`.
    pub fn from_jsonl<R: BufRead>(reader: R, source: EmbeddingSource) -> Result<Self, String> {
        let mut lookup = LookupEmbeddings::new(source);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: LookupRow =
                serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
            lookup.insert(row.uri, row.embedding);
        }
        Ok(lookup)
    }
}

impl EmbeddingProvider for LookupEmbeddings {
    fn embed(&self, image_uri: &str) -> Result<EmbeddingVector, ProviderError> {
        self.table
            .get(image_uri)
            .cloned()
            .ok_or_else(|| ProviderError {
                uri: image_uri.to_string(),
                message: "no embedding for uri".to_string(),
            })
    }

    fn source(&self) -> EmbeddingSource {
        self.source
    }
}

/// How the six pairwise similarities of a four-view set are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityAggregation {
    #[default]
    Mean,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndoorFilterConfig {
    pub threshold: f64,
    pub aggregation: SimilarityAggregation,
}

impl Default for IndoorFilterConfig {
    fn default() -> Self {
        IndoorFilterConfig {
            threshold: INDOOR_THRESHOLD,
            aggregation: SimilarityAggregation::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("view {uri}: {source}")]
    Embedding { uri: String, source: EmbeddingError },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndoorVerdict {
    pub decision: FilterDecision,
    /// Aggregated pairwise similarity, absent when the record has no views.
    pub similarity: Option<f64>,
}

/// Combines pairwise similarities. Values are sorted first so the result
/// does not depend on view order.
pub fn aggregate_similarities(sims: &[f64], aggregation: SimilarityAggregation) -> f64 {
    let mut sorted = sims.to_vec();
    sorted.sort_by(f64::total_cmp);
    match aggregation {
        SimilarityAggregation::Mean => sorted.iter().sum::<f64>() / sorted.len() as f64,
        SimilarityAggregation::Min => sorted[0],
        SimilarityAggregation::Max => sorted[sorted.len() - 1],
    }
}

/// Six pairwise cosine similarities of four views.
pub fn pairwise_similarities(views: &[EmbeddingVector; 4]) -> Result<Vec<f64>, EmbeddingError> {
    let mut sims = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            sims.push(cosine_similarity(&views[i], &views[j])?);
        }
    }
    Ok(sims)
}

/// Classifies a record's four-view capture set; the set is indoor when
/// the aggregated similarity strictly exceeds the threshold.
pub fn indoor_filter(
    record: &ImageRecord,
    provider: &dyn EmbeddingProvider,
    config: &IndoorFilterConfig,
) -> Result<IndoorVerdict, FilterError> {
    let Some(views) = &record.views else {
        return Ok(IndoorVerdict {
            decision: FilterDecision::Inapplicable,
            similarity: None,
        });
    };
    let mut embedded = Vec::with_capacity(4);
    for uri in views {
        embedded.push(provider.embed(uri)?);
    }
    let embedded: [EmbeddingVector; 4] = embedded.try_into().expect("four views");
    let sims = pairwise_similarities(&embedded).map_err(|source| FilterError::Embedding {
        uri: views[0].clone(),
        source,
    })?;
    let similarity = aggregate_similarities(&sims, config.aggregation);
    let decision = if similarity > config.threshold + SIMILARITY_TOLERANCE {
        FilterDecision::ExcludeIndoor
    } else {
        FilterDecision::Keep
    };
    Ok(IndoorVerdict {
        decision,
        similarity: Some(similarity),
    })
}

/// Result of filtering a whole manifest, ordered by record id.
#[derive(Debug, Clone, Default)]
pub struct FilterRun {
    pub kept: Vec<(ImageRecord, FilterDecision)>,
    pub excluded: Vec<String>,
    pub errors: Vec<(String, String)>,
    pub source: EmbeddingSource,
}

pub fn run_indoor_filter(
    records: &[ImageRecord],
    provider: &dyn EmbeddingProvider,
    config: &IndoorFilterConfig,
    max_parallel: usize,
) -> FilterRun {
    let verdicts = bounded_map(records, max_parallel, |r| {
        indoor_filter(r, provider, config)
    });
    let mut pairs: Vec<_> = records.iter().zip(verdicts).collect();
    pairs.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let mut run = FilterRun {
        source: provider.source(),
        ..FilterRun::default()
    };
    for (record, verdict) in pairs {
        match verdict {
            Ok(v) if v.decision == FilterDecision::ExcludeIndoor => {
                run.excluded.push(record.id.clone())
            }
            Ok(v) => run.kept.push((record.clone(), v.decision)),
            Err(e) => run.errors.push((record.id.clone(), e.to_string())),
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoCoordinate;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!(
            (cosine_similarity(&v(&[1.0, 2.0, 3.0]), &v(&[1.0, 2.0, 3.0])).unwrap() - 1.0).abs()
                < 1e-15
        );
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let s = cosine_similarity(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch { left: 1, right: 2 })
        );
        assert_eq!(
            EmbeddingVector::new(vec![0.0, 0.0]),
            Err(EmbeddingError::ZeroNorm)
        );
        assert_eq!(EmbeddingVector::new(vec![]), Err(EmbeddingError::Empty));
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }

    fn four_view_record(id: &str) -> ImageRecord {
        ImageRecord::new(id, "x.jpg", GeoCoordinate::new(0.0, 0.0).unwrap(), "FR").with_views([
            format!("{id}/f"),
            format!("{id}/b"),
            format!("{id}/l"),
            format!("{id}/r"),
        ])
    }

    fn provider_for(id: &str, vectors: [EmbeddingVector; 4]) -> LookupEmbeddings {
        let mut p = LookupEmbeddings::new(EmbeddingSource::Image);
        for (suffix, vec) in ["f", "b", "l", "r"].iter().zip(vectors) {
            p.insert(format!("{id}/{suffix}"), vec);
        }
        p
    }

    #[test]
    fn identical_views_are_indoor() {
        let rec = four_view_record("a");
        let e = v(&[0.3, 0.4, 0.5]);
        let p = provider_for("a", [e.clone(), e.clone(), e.clone(), e]);
        let verdict = indoor_filter(&rec, &p, &IndoorFilterConfig::default()).unwrap();
        assert_eq!(verdict.decision, FilterDecision::ExcludeIndoor);
    }

    #[test]
    fn orthogonal_views_are_kept() {
        let rec = four_view_record("a");
        let p = provider_for(
            "a",
            [
                v(&[1.0, 0.0, 0.0, 0.0]),
                v(&[0.0, 1.0, 0.0, 0.0]),
                v(&[0.0, 0.0, 1.0, 0.0]),
                v(&[0.0, 0.0, 0.0, 1.0]),
            ],
        );
        let verdict = indoor_filter(&rec, &p, &IndoorFilterConfig::default()).unwrap();
        assert_eq!(verdict.decision, FilterDecision::Keep);
        assert_eq!(verdict.similarity, Some(0.0));
    }

    #[test]
    fn missing_views_are_inapplicable() {
        let rec = ImageRecord::new("a", "x.jpg", GeoCoordinate::new(0.0, 0.0).unwrap(), "FR");
        let verdict = indoor_filter(
            &rec,
            &LookupEmbeddings::default(),
            &IndoorFilterConfig::default(),
        )
        .unwrap();
        assert_eq!(verdict.decision, FilterDecision::Inapplicable);
    }

    #[test]
    fn provider_failure_names_the_view() {
        let rec = four_view_record("a");
        let err = indoor_filter(
            &rec,
            &LookupEmbeddings::default(),
            &IndoorFilterConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("a/f"), "{err}");
    }

    #[test]
    fn aggregation_modes() {
        let sims = [0.9, 0.2, 0.5];
        assert_eq!(
            aggregate_similarities(&sims, SimilarityAggregation::Min),
            0.2
        );
        assert_eq!(
            aggregate_similarities(&sims, SimilarityAggregation::Max),
            0.9
        );
        assert!(
            (aggregate_similarities(&sims, SimilarityAggregation::Mean) - 1.6 / 3.0).abs() < 1e-15
        );
    }

    #[test]
    fn run_sorts_and_partitions() {
        let indoor = four_view_record("b");
        let outdoor = four_view_record("a");
        let plain = ImageRecord::new("c", "c.jpg", GeoCoordinate::new(0.0, 0.0).unwrap(), "FR");
        let broken = four_view_record("d");
        let e = v(&[1.0, 1.0]);
        let mut p = provider_for("b", [e.clone(), e.clone(), e.clone(), e]);
        let q = provider_for(
            "a",
            [
                v(&[1.0, 0.0, 0.0, 0.0]),
                v(&[0.0, 1.0, 0.0, 0.0]),
                v(&[0.0, 0.0, 1.0, 0.0]),
                v(&[0.0, 0.0, 0.0, 1.0]),
            ],
        );
        p.table.extend(q.table);
        let run = run_indoor_filter(
            &[plain, indoor, broken, outdoor],
            &p,
            &IndoorFilterConfig::default(),
            3,
        );
        let kept: Vec<_> = run.kept.iter().map(|(r, d)| (r.id.as_str(), *d)).collect();
        assert_eq!(
            kept,
            vec![
                ("a", FilterDecision::Keep),
                ("c", FilterDecision::Inapplicable)
            ]
        );
        assert_eq!(run.excluded, vec!["b".to_string()]);
        assert_eq!(run.errors.len(), 1);
        assert_eq!(run.errors[0].0, "d");
    }
}
