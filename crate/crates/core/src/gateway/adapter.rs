//! Provider-specific request bodies and response extraction.

use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::HttpRequest;
use super::EndpointConfig;
use crate::prompt::RenderedPrompt;

/// Wire shape spoken by a remote endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    /// `POST {base}/chat/completions` with an `image_url` content part.
    #[default]
    OpenaiChat,
    /// `POST {base}/api/chat` with base64 `images` on the message.
    Ollama,
}

/// Which chat role carries the prompt text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    #[default]
    User,
    System,
}

impl PromptRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptRole::User => "user",
            PromptRole::System => "system",
        }
    }
}

/// Image attachment: base64 file contents with a declared media type, or
/// a remote URL passed through untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImagePayload {
    Inline { media_type: String, base64: String },
    Remote(String),
}

impl ImagePayload {
    pub fn data_url(&self) -> String {
        match self {
            ImagePayload::Inline { media_type, base64 } => {
                format!("data:{media_type};base64,{base64}")
            }
            ImagePayload::Remote(url) => url.clone(),
        }
    }
}

pub fn media_type_for(path: &str) -> &'static str {
    let ext = Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        _ => "image/jpeg",
    }
}

pub fn encode_bytes(path: &str, bytes: &[u8]) -> ImagePayload {
    ImagePayload::Inline {
        media_type: media_type_for(path).to_string(),
        base64: base64::engine::general_purpose::STANDARD.encode(bytes),
    }
}

/// Loads `uri` from disk, or passes `http(s)://` references through.
pub fn load_image(uri: &str) -> Result<ImagePayload, String> {
    if uri.starts_with("http://") || uri.starts_with("https://") {
        return Ok(ImagePayload::Remote(uri.to_string()));
    }
    let path = uri.strip_prefix("file://").unwrap_or(uri);
    std::fs::read(path)
        .map(|bytes| encode_bytes(path, &bytes))
        .map_err(|e| format!("{path}: {e}"))
}

fn join_url(base: &str, suffix: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(suffix) {
        base.to_string()
    } else {
        format!("{base}{suffix}")
    }
}

pub fn build_request(
    config: &EndpointConfig,
    prompt: &RenderedPrompt,
    image: &ImagePayload,
    token: Option<&str>,
) -> HttpRequest {
    let model = config.model.as_deref().unwrap_or(&config.name);
    let (url, body) = match config.adapter {
        Adapter::OpenaiChat => {
            let image_part = json!({"type": "image_url", "image_url": {"url": image.data_url()}});
            let messages = match config.prompt_role {
                PromptRole::User => json!([{
                    "role": "user",
                    "content": [{"type": "text", "text": prompt.text}, image_part],
                }]),
                PromptRole::System => json!([
                    {"role": "system", "content": prompt.text},
                    {"role": "user", "content": [image_part]},
                ]),
            };
            let body = json!({
                "model": model,
                "temperature": config.temperature,
                "messages": messages,
            });
            (join_url(&config.base_url, "/chat/completions"), body)
        }
        Adapter::Ollama => {
            let images = match image {
                ImagePayload::Inline { base64, .. } => vec![base64.clone()],
                ImagePayload::Remote(url) => vec![url.clone()],
            };
            let messages = match config.prompt_role {
                PromptRole::User => {
                    json!([{"role": "user", "content": prompt.text, "images": images}])
                }
                PromptRole::System => json!([
                    {"role": "system", "content": prompt.text},
                    {"role": "user", "content": "", "images": images},
                ]),
            };
            let body = json!({
                "model": model,
                "stream": false,
                "options": {"temperature": config.temperature},
                "messages": messages,
            });
            (join_url(&config.base_url, "/api/chat"), body)
        }
    };
    let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
    if let Some(token) = token {
        headers.push(("authorization".to_string(), format!("Bearer {token}")));
    }
    HttpRequest {
        url,
        headers,
        body: serde_json::to_vec(&body).expect("request body serializes"),
        timeout: config.timeout(),
    }
}

/// Pulls the assistant text out of a success body.
pub fn extract_text(adapter: Adapter, body: &str) -> Option<String> {
    let value: Value = serde_json::from_str(body).ok()?;
    let content = match adapter {
        Adapter::OpenaiChat => value.pointer("/choices/0/message/content")?,
        Adapter::Ollama => value.pointer("/message/content")?,
    };
    match content {
        Value::String(s) => Some(s.clone()),
        // content-part arrays: concatenate the text parts
        Value::Array(parts) => {
            let texts: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            (!texts.is_empty()).then(|| texts.join(""))
        }
        _ => None,
    }
}
