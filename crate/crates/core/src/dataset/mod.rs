//! Dataset curation: manifest ingestion, indoor filtering, area-proportional
//! sampling and train/test splitting.

mod embed;
mod record;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{
    aggregate_similarities, cosine_similarity, indoor_filter, pairwise_similarities,
    run_indoor_filter, EmbeddingError, EmbeddingProvider, EmbeddingSource, EmbeddingVector,
    FilterError, FilterRun, IndoorFilterConfig, IndoorVerdict, LookupEmbeddings, ProviderError,
    SimilarityAggregation, INDOOR_THRESHOLD, SIMILARITY_TOLERANCE,
};
pub use record::{
    ingest_manifest, manifest_line, read_manifest, write_manifest, ImageRecord, Localizability,
};
pub use sampling::{
    apportion, largest_remainder, read_country_areas, sample_by_area, split, train_size,
    Apportionment, CountryArea, SampleOutcome, SplitManifest,
};

/// Outcome of the indoor filter for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDecision {
    Keep,
    ExcludeIndoor,
    /// No four-view capture set; kept but flagged.
    Inapplicable,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("record {id:?} has country {country} missing from the area table")]
    UnknownCountry { id: String, country: String },
    #[error("country area table: {0}")]
    Areas(String),
    #[error("sample total must be positive")]
    InvalidTotal,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}
