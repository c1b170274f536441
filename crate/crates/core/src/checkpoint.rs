//! JSON checkpoints for the GRU and CNN weights.
//!
//! ```json
//! {
//!   "format": "qaoa-init-checkpoint",
//!   "version": 1,
//!   "kind": "gru",
//!   "metadata": { "hidden": 32, "seed": 0 },
//!   "arrays": [ { "name": "w_z", "shape": [32, 3], "data": "<base64>" } ]
//! }
//! ```
//!
//! `data` is the base64 encoding of the array's little-endian `f64` bytes in
//! row-major order, so a save/load round trip is bit-exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cnn::{cnn_layout, CnnWeights};
use crate::error::{CheckpointError, Error, Result};
use crate::meta_gru::{gru_layout, GruWeights};
use crate::tensors::ParamSet;

pub const FORMAT_NAME: &str = "qaoa-init-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gru,
    Cnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gru => "gru",
            ModelKind::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayRecord {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    kind: String,
    #[serde(default)]
    metadata: Value,
    arrays: Vec<ArrayRecord>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(name: &str, text: &str) -> std::result::Result<Vec<f64>, CheckpointError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CheckpointError::Corrupt(format!("array `{name}`: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(CheckpointError::Corrupt(format!(
            "array `{name}` holds {} bytes, not a whole number of doubles",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect())
}

/// Serializes `params` as a checkpoint document.
pub fn to_json(kind: ModelKind, params: &ParamSet, metadata: Value) -> String {
    let env = Envelope {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        kind: kind.name().into(),
        metadata,
        arrays: (0..params.n_arrays())
            .map(|k| ArrayRecord {
                name: params.name(k).into(),
                shape: params.shape(k).to_vec(),
                data: encode(params.array(k)),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&env).expect("checkpoint serializes");
    text.push('\n');
    text
}

/// Parses a checkpoint document against the expected kind and layout.
pub fn from_json(
    text: &str,
    kind: ModelKind,
    layout: Vec<(&'static str, Vec<usize>)>,
) -> std::result::Result<(ParamSet, Value), CheckpointError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if raw.get("format").and_then(Value::as_str) != Some(FORMAT_NAME) {
        return Err(CheckpointError::Corrupt("missing or unknown `format` field".into()));
    }
    let version = raw
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| CheckpointError::Corrupt("missing `version` field".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(CheckpointError::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let env: Envelope = serde_json::from_value(raw).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if env.kind != kind.name() {
        return Err(CheckpointError::KindMismatch {
            found: env.kind,
            expected: kind.name().into(),
        });
    }

    let mut params = ParamSet::zeros(layout);
    if env.arrays.len() != params.n_arrays() {
        return Err(CheckpointError::Corrupt(format!(
            "expected {} arrays, found {}",
            params.n_arrays(),
            env.arrays.len()
        )));
    }
    for (k, rec) in env.arrays.iter().enumerate() {
        let expected = params.shape(k).to_vec();
        if rec.name != params.name(k) {
            return Err(CheckpointError::Corrupt(format!(
                "array {k} is `{}`, expected `{}`",
                rec.name,
                params.name(k)
            )));
        }
        if rec.shape != expected {
            return Err(CheckpointError::ShapeMismatch {
                array: rec.name.clone(),
                expected,
                found: rec.shape.clone(),
            });
        }
        let values = decode(&rec.name, &rec.data)?;
        if values.len() != params.array(k).len() {
            return Err(CheckpointError::Corrupt(format!(
                "array `{}` holds {} values for shape {:?}",
                rec.name,
                values.len(),
                rec.shape
            )));
        }
        params.array_mut(k).copy_from_slice(&values);
    }
    Ok((params, env.metadata))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn wrap(path: &Path) -> impl FnOnce(CheckpointError) -> Error + '_ {
    move |source| Error::Checkpoint {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_gru(w: &GruWeights, metadata: Value, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &to_json(ModelKind::Gru, w.params(), metadata))
}

/// Loads GRU weights of the given hidden size.
pub fn load_gru(path: impl AsRef<Path>, hidden: usize) -> Result<(GruWeights, Value)> {
    let path = path.as_ref();
    let (params, meta) = from_json(&read(path)?, ModelKind::Gru, gru_layout(hidden)).map_err(wrap(path))?;
    Ok((GruWeights::from_params(hidden, params), meta))
}

/// Hidden size recorded in a GRU checkpoint, read from the `b_z` shape.
pub fn gru_hidden_size(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let text = read(path)?;
    let env: Envelope = serde_json::from_str(&text)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))
        .map_err(wrap(path))?;
    env.arrays
        .iter()
        .find(|a| a.name == "b_z")
        .and_then(|a| a.shape.first().copied())
        .ok_or_else(|| wrap(path)(CheckpointError::Corrupt("no `b_z` array".into())))
}

pub fn save_cnn(w: &CnnWeights, metadata: Value, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &to_json(ModelKind::Cnn, w.params(), metadata))
}

pub fn load_cnn(path: impl AsRef<Path>) -> Result<(CnnWeights, Value)> {
    let path = path.as_ref();
    let (params, meta) = from_json(&read(path)?, ModelKind::Cnn, cnn_layout()).map_err(wrap(path))?;
    Ok((CnnWeights::from_params(params), meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn checkpoint_error(e: Error) -> CheckpointError {
        match e {
            Error::Checkpoint { source, .. } => source,
            other => panic!("expected checkpoint error, got {other}"),
        }
    }

    #[test]
    fn gru_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gru.json");
        let mut w = GruWeights::random(5, 0.3, 2);
        w.params_mut().data_mut()[0] = f64::MIN_POSITIVE / 3.0;
        w.params_mut().data_mut()[1] = -0.0;
        save_gru(&w, json!({"seed": 2}), &path).unwrap();
        let (back, meta) = load_gru(&path, 5).unwrap();
        let bits = |p: &ParamSet| p.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.params()), bits(w.params()));
        assert_eq!(meta["seed"], 2);
        assert_eq!(gru_hidden_size(&path).unwrap(), 5);
    }

    #[test]
    fn cnn_round_trip_and_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let w = CnnWeights::random(9);
        save_cnn(&w, json!({"epochs": 50}), &a).unwrap();
        save_cnn(&w, json!({"epochs": 50}), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(load_cnn(&a).unwrap().0, w);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gru.json");
        save_gru(&GruWeights::random(3, 0.1, 1), Value::Null, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(checkpoint_error(load_gru(&path, 3).unwrap_err()), CheckpointError::Corrupt(_)));
    }

    #[test]
    fn hidden_size_mismatch_names_the_array() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gru.json");
        save_gru(&GruWeights::zeros(16), Value::Null, &path).unwrap();
        let err = checkpoint_error(load_gru(&path, 32).unwrap_err());
        assert_eq!(
            err,
            CheckpointError::ShapeMismatch {
                array: "w_z".into(),
                expected: vec![32, 3],
                found: vec![16, 3],
            }
        );
        assert!(err.to_string().contains("w_z"));
    }

    #[test]
    fn version_and_kind_are_checked() {
        let text = to_json(ModelKind::Cnn, CnnWeights::zeros().params(), Value::Null);
        let newer = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert_eq!(
            from_json(&newer, ModelKind::Cnn, cnn_layout()).unwrap_err(),
            CheckpointError::VersionMismatch { found: 2, expected: 1 }
        );
        assert!(matches!(
            from_json(&text, ModelKind::Gru, gru_layout(4)).unwrap_err(),
            CheckpointError::KindMismatch { .. }
        ));
        let bad = text.replacen("\"data\": \"", "\"data\": \"!!", 1);
        assert!(matches!(from_json(&bad, ModelKind::Cnn, cnn_layout()).unwrap_err(), CheckpointError::Corrupt(_)));
        assert!(from_json("{}", ModelKind::Cnn, cnn_layout()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_cnn("/nonexistent/cnn.json"), Err(Error::Io { .. })));
    }
}
