//! Versioned text model format.
//!
//! A model file is one JSON document: a header (format tag, base score,
//! shrinkage, feature names, training config, seed) followed by the trees as
//! arrays of node records. Reals are written as shortest round-trip decimals,
//! so a decoded model predicts bit-identically to the encoded one.

use serde::{Deserialize, Serialize};

use super::{Ensemble, GbtError, Node, RegressionTree, Result, TrainConfig};

pub const MODEL_FORMAT: &str = "gbt-trust/1";
const FORMAT_FAMILY: &str = "gbt-trust/";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    base_score: f64,
    shrinkage: f64,
    feature_names: Vec<String>,
    train_config: TrainConfig,
    seed: u64,
    trees: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    root: usize,
    nodes: Vec<Node>,
}

pub fn serialize_model(e: &Ensemble) -> Vec<u8> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        base_score: e.base_score,
        shrinkage: e.shrinkage,
        feature_names: e.feature_names.clone(),
        train_config: e.train_config.clone(),
        seed: e.train_config.seed,
        trees: e
            .trees
            .iter()
            .map(|t| TreeRecord {
                root: t.root(),
                nodes: t.nodes().to_vec(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("model is always serializable");
    out.push(b'\n');
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<Ensemble> {
    let corrupt = |e: serde_json::Error| GbtError::CorruptModel(e.to_string());
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(corrupt)?;
    let format = value
        .get("format")
        .and_then(|f| f.as_str())
        .ok_or_else(|| GbtError::CorruptModel("missing format field".into()))?;
    if format != MODEL_FORMAT {
        return Err(if format.starts_with(FORMAT_FAMILY) {
            GbtError::VersionMismatch {
                found: format.to_string(),
                expected: MODEL_FORMAT.to_string(),
            }
        } else {
            GbtError::CorruptModel(format!("unknown format `{format}`"))
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(corrupt)?;
    if file.seed != file.train_config.seed {
        return Err(GbtError::CorruptModel("header seed disagrees with train_config".into()));
    }
    let d = file.feature_names.len();
    let trees = file
        .trees
        .into_iter()
        .map(|t| RegressionTree::from_nodes(t.nodes, t.root, d).map_err(GbtError::CorruptModel))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_parts(
        file.base_score,
        file.shrinkage,
        trees,
        file.feature_names,
        file.train_config,
    )
}
