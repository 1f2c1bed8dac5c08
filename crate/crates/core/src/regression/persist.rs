//! Model files: a versioned JSON envelope with weights stored as base64 of
//! little-endian `f64`, so they round-trip bit-exactly.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::ridge::{RidgeModel, TrainingMeta};
use super::RegressionError;
use crate::datamodel::FeatureSpaceId;

pub const MODEL_SCHEMA_VERSION: u64 = 1;
const WEIGHTS_ENCODING: &str = "base64-f64le";

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u64,
    space: Option<FeatureSpaceId>,
    target: Option<String>,
    alpha: f64,
    intercept: f64,
    training_meta: TrainingMeta,
    weights_encoding: String,
    weights: String,
}

pub fn model_to_json(model: &RidgeModel) -> String {
    let bytes: Vec<u8> = model.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
    let envelope = Envelope {
        schema_version: MODEL_SCHEMA_VERSION,
        space: model.space.clone(),
        target: model.target.clone(),
        alpha: model.alpha,
        intercept: model.intercept,
        training_meta: model.training_meta.clone(),
        weights_encoding: WEIGHTS_ENCODING.into(),
        weights: STANDARD.encode(bytes),
    };
    let mut s = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
    s.push('\n');
    s
}

pub fn save_model(model: &RidgeModel, path: impl AsRef<Path>) -> Result<(), RegressionError> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|source| RegressionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RidgeModel, RegressionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RegressionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}

pub(crate) fn model_from_json(text: &str) -> Result<RidgeModel, RegressionError> {
    let corrupt = |msg: String| RegressionError::CorruptFile(msg);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION {
        return Err(RegressionError::SchemaVersionMismatch {
            found: version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let env: Envelope = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if env.weights_encoding != WEIGHTS_ENCODING {
        return Err(corrupt(format!(
            "unknown weights encoding `{}`",
            env.weights_encoding
        )));
    }
    let bytes = STANDARD
        .decode(env.weights.as_bytes())
        .map_err(|e| corrupt(format!("weights: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(corrupt(format!(
            "weights blob of {} bytes is not a multiple of 8",
            bytes.len()
        )));
    }
    let weights: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if weights.iter().any(|w| !w.is_finite())
        || !env.intercept.is_finite()
        || env.alpha.is_nan()
        || env.alpha < 0.0
    {
        return Err(corrupt("non-finite weights, intercept or alpha".into()));
    }
    Ok(RidgeModel {
        weights,
        intercept: env.intercept,
        alpha: env.alpha,
        space: env.space,
        target: env.target,
        training_meta: env.training_meta,
    })
}
