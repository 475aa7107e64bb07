//! Prompt templates, rendering and fine-tuning record construction.
//!
//! The canonical template texts live in `templates/*.txt` and are embedded
//! at compile time; their hashes are pinned in the tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ImageRecord;
use crate::geo::GeoCoordinate;

const ZERO_SHOT: &str = include_str!("../templates/zero_shot.txt");
const FEW_SHOT: &str = include_str!("../templates/few_shot.txt");
const CHAIN_OF_THOUGHT: &str = include_str!("../templates/chain_of_thought.txt");
const COT_DATA_GENERATION: &str = include_str!("../templates/cot_data_generation.txt");
const COT_STEPS: &str = include_str!("../templates/cot_steps.txt");

/// Label that precedes the answer coordinates in few-shot answers and in
/// fine-tuning targets.
pub const ANSWER_LABEL: &str = "Latitude and Longitude: ";

static UNRESOLVED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\{\s*[A-Za-z_][A-Za-z0-9_]*(?:\s*,\s*[A-Za-z_][A-Za-z0-9_]*)*\s*\}").unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    ZeroShot,
    FewShot,
    ChainOfThought,
    CotDataGeneration,
}

impl StrategyKind {
    /// The three evaluation strategies, in table order.
    pub const EVALUATION: [StrategyKind; 3] = [
        StrategyKind::ZeroShot,
        StrategyKind::FewShot,
        StrategyKind::ChainOfThought,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::ZeroShot => "zero_shot",
            StrategyKind::FewShot => "few_shot",
            StrategyKind::ChainOfThought => "chain_of_thought",
            StrategyKind::CotDataGeneration => "cot_data_generation",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::ZeroShot => "Zero-shot",
            StrategyKind::FewShot => "Few-shot",
            StrategyKind::ChainOfThought => "Chain-of-thought",
            StrategyKind::CotDataGeneration => "CoT data generation",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            StrategyKind::ZeroShot => ZERO_SHOT,
            StrategyKind::FewShot => FEW_SHOT,
            StrategyKind::ChainOfThought => CHAIN_OF_THOUGHT,
            StrategyKind::CotDataGeneration => COT_DATA_GENERATION,
        }
    }

    fn required_parameters(self) -> &'static [&'static str] {
        match self {
            StrategyKind::CotDataGeneration => &["address", "lat", "lon"],
            _ => &[],
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match key.as_str() {
            "zero_shot" | "zeroshot" | "zs" => StrategyKind::ZeroShot,
            "few_shot" | "fewshot" | "fs" => StrategyKind::FewShot,
            "chain_of_thought" | "cot" => StrategyKind::ChainOfThought,
            "cot_data_generation" | "cot_data" => StrategyKind::CotDataGeneration,
            _ => return Err(PromptError::UnknownKind(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unknown prompt strategy {0:?}")]
    UnknownKind(String),
    #[error("{kind} prompt is missing parameter `{name}`")]
    MissingParameter {
        kind: StrategyKind,
        name: &'static str,
    },
    #[error("{kind} prompt does not take parameter `{name}`")]
    UnexpectedParameter { kind: StrategyKind, name: String },
    #[error("invalid coordinate parameters: {0}")]
    InvalidCoordinate(String),
    #[error("rendered prompt still contains placeholder {0}")]
    UnresolvedPlaceholder(String),
    #[error("generated description is empty")]
    EmptyDescription,
}

/// A template family plus its placeholder values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub kind: StrategyKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl PromptStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        PromptStrategy {
            kind,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with_parameter(mut self, name: &str, value: impl Into<String>) -> Self {
        self.parameters.insert(name.to_string(), value.into());
        self
    }

    /// Description-generation prompt for a known place.
    pub fn cot_data_generation(address: &str, truth: GeoCoordinate) -> Self {
        PromptStrategy::new(StrategyKind::CotDataGeneration)
            .with_parameter("address", address)
            .with_parameter("lat", truth.latitude().to_string())
            .with_parameter("lon", truth.longitude().to_string())
    }

    fn validate(&self) -> Result<(), PromptError> {
        let required = self.kind.required_parameters();
        for &name in required {
            if !self.parameters.contains_key(name) {
                return Err(PromptError::MissingParameter {
                    kind: self.kind,
                    name,
                });
            }
        }
        if let Some(extra) = self
            .parameters
            .keys()
            .find(|k| !required.contains(&k.as_str()))
        {
            return Err(PromptError::UnexpectedParameter {
                kind: self.kind,
                name: extra.clone(),
            });
        }
        if self.kind == StrategyKind::CotDataGeneration {
            let lat = parse_param(&self.parameters["lat"])?;
            let lon = parse_param(&self.parameters["lon"])?;
            GeoCoordinate::new(lat, lon)
                .map_err(|e| PromptError::InvalidCoordinate(e.to_string()))?;
        }
        Ok(())
    }
}

fn parse_param(s: &str) -> Result<f64, PromptError> {
    s.trim()
        .parse()
        .map_err(|_| PromptError::InvalidCoordinate(format!("{s:?} is not a number")))
}

/// Prompt text ready to send, together with the image it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub image_uri: String,
    pub kind: StrategyKind,
}

/// Renders a strategy's canonical template with its parameters substituted.
pub fn render(strategy: &PromptStrategy, image_uri: &str) -> Result<RenderedPrompt, PromptError> {
    strategy.validate()?;
    let mut text = strategy.kind.template().trim_end_matches('\n').to_string();
    if strategy.kind == StrategyKind::CotDataGeneration {
        let p = &strategy.parameters;
        let pair = format!("{}, {}", p["lat"].trim(), p["lon"].trim());
        // substitute coordinates first so an address cannot smuggle in a marker
        text = text.replacen("{lat, lon}", &pair, 1);
        let at = text
            .find("{address}")
            .expect("template has an address marker");
        text.replace_range(at..at + "{address}".len(), &p["address"]);
    }
    if let Some(m) = UNRESOLVED.find(&text) {
        return Err(PromptError::UnresolvedPlaceholder(m.as_str().to_string()));
    }
    Ok(RenderedPrompt {
        text,
        image_uri: image_uri.to_string(),
        kind: strategy.kind,
    })
}

/// The five ordered analysis steps of the structured reasoning strategy.
pub fn cot_steps() -> Vec<&'static str> {
    COT_STEPS.lines().filter(|l| !l.is_empty()).collect()
}

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub image_uri: String,
    #[serde(rename = "prompt")]
    pub prompt_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    #[serde(skip)]
    pub truth: Option<GeoCoordinate>,
}

/// Appends the ground-truth answer line to a generated description.
pub fn make_finetune_record(
    record: &ImageRecord,
    generated_description: &str,
) -> Result<FineTuneRecord, PromptError> {
    let description = generated_description.trim_end();
    if description.trim().is_empty() {
        return Err(PromptError::EmptyDescription);
    }
    let prompt = render(
        &PromptStrategy::new(StrategyKind::ChainOfThought),
        &record.image_uri,
    )?;
    Ok(FineTuneRecord {
        image_uri: record.image_uri.clone(),
        prompt_text: prompt.text,
        target_text: format!("{description}\n{ANSWER_LABEL}{}", record.truth),
        truth: Some(record.truth),
    })
}

/// Export line for a chat-style fine-tuning manifest.
pub fn finetune_line(record: &FineTuneRecord) -> String {
    serde_json::to_string(record).expect("fine-tune records serialize")
}
