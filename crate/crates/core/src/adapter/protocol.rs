//! Wire types. One JSON object per line in each direction.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::{InputSpace, MetricDescriptor};

pub const PROTOCOL: &str = "percepbench/1";
pub const COLOR_ENCODING: &str = "srgb16";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloRequest {
    pub hello: HelloProtocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloProtocol {
    pub protocol: String,
}

impl HelloRequest {
    pub fn current() -> Self {
        Self { hello: HelloProtocol { protocol: PROTOCOL.into() } }
    }
}

/// Adapter's reply to the handshake. Extra keys (package versions and the
/// like) are kept but not interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloResponse {
    pub hello: Hello,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub name: String,
    pub supports_video: bool,
    pub higher_is_better: bool,
    pub input_space: String,
    /// Whether the metric sees chromatic differences; adapters are assumed
    /// to unless they say otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<bool>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, Value>,
}

impl Hello {
    pub fn from_descriptor(d: &MetricDescriptor) -> Self {
        let input_space = match d.input_space {
            InputSpace::EncodedSrgb => "encoded_srgb",
            InputSpace::LinearLuminance => "linear_luminance",
            InputSpace::Lab => "lab",
        };
        Self {
            name: d.name.clone(),
            supports_video: d.supports_video,
            higher_is_better: d.higher_is_better,
            input_space: input_space.into(),
            color: Some(d.color),
            extra: Default::default(),
        }
    }

    pub fn descriptor(&self) -> MetricDescriptor {
        let input_space = match self.input_space.as_str() {
            "linear_luminance" => InputSpace::LinearLuminance,
            "lab" => InputSpace::Lab,
            _ => InputSpace::EncodedSrgb,
        };
        MetricDescriptor {
            name: self.name.clone(),
            input_space,
            supports_video: self.supports_video,
            higher_is_better: self.higher_is_better,
            color: self.color.unwrap_or(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterRequest {
    pub request_id: u64,
    pub test_path: String,
    pub ref_path: String,
    pub ppd: f64,
    pub fps: f64,
    pub color_encoding: String,
}

/// Exactly one of `score` and `error` is present.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterResponse {
    pub request_id: u64,
    pub outcome: Result<f64, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseWire {
    request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Why a response line could not be used.
#[derive(Debug, Clone, PartialEq)]
pub enum BadLine {
    /// Not a JSON object with a usable `request_id`.
    Malformed(String),
    /// Known request, unusable content.
    Invalid { request_id: u64, msg: String },
    NonNumericScore { request_id: u64, raw: String },
}

impl AdapterResponse {
    pub fn score(request_id: u64, score: f64) -> Self {
        Self { request_id, outcome: Ok(score) }
    }

    pub fn error(request_id: u64, msg: impl Into<String>) -> Self {
        Self { request_id, outcome: Err(msg.into()) }
    }

    /// Non-finite scores cannot be represented and are sent as errors.
    pub fn to_line(&self) -> String {
        let w = match &self.outcome {
            Ok(s) if s.is_finite() => ResponseWire { request_id: self.request_id, score: Some(*s), error: None },
            Ok(s) => ResponseWire { request_id: self.request_id, score: None, error: Some(format!("non-finite score {s}")) },
            Err(e) => ResponseWire { request_id: self.request_id, score: None, error: Some(e.clone()) },
        };
        serde_json::to_string(&w).expect("response serializes")
    }

    pub fn parse_line(line: &str) -> Result<Self, BadLine> {
        let v: Value = serde_json::from_str(line).map_err(|e| BadLine::Malformed(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| BadLine::Malformed("not an object".into()))?;
        let request_id = obj
            .get("request_id")
            .and_then(Value::as_u64)
            .ok_or_else(|| BadLine::Malformed("missing request_id".into()))?;
        let invalid = |msg: &str| BadLine::Invalid { request_id, msg: msg.into() };
        if let Some(k) = obj.keys().find(|k| !matches!(k.as_str(), "request_id" | "score" | "error")) {
            return Err(invalid(&format!("unexpected key '{k}'")));
        }
        match (obj.get("score"), obj.get("error")) {
            (Some(_), Some(_)) => Err(invalid("both score and error present")),
            (None, None) => Err(invalid("neither score nor error present")),
            (None, Some(Value::String(e))) => Ok(Self::error(request_id, e.clone())),
            (None, Some(_)) => Err(invalid("error is not a string")),
            (Some(s), None) => match s.as_f64() {
                Some(x) if x.is_finite() => Ok(Self::score(request_id, x)),
                _ => Err(BadLine::NonNumericScore { request_id, raw: s.to_string() }),
            },
        }
    }
}

impl AdapterRequest {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        serde_json::from_str(line).map_err(|e| e.to_string())
    }
}
