//! Model checkpoints.
//!
//! A checkpoint is one JSON document:
//!
//! ```text
//! {"format": "rcd-checkpoint/1",
//!  "header": {"dim": D, "heads": H, "layers": L, "out_dim": D_out, "mode": "full", "seed": 42},
//!  "tensors": [{"name": "layer0.hgt.k_w.deleted", "rows": D, "cols": D, "data": [...]}, ...]}
//! ```
//!
//! Tensors appear in [`NetworkParams::fields`] order and are checked against
//! the layout implied by the header on load. Floats are written in shortest
//! round-trip form, so save → load is bit-exact.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcd_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ModelConfig};
use crate::error::{Error, Result};
use crate::params::NetworkParams;
use crate::ranker::TrainedModel;

pub const FORMAT: &str = "rcd-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub out_dim: usize,
    pub mode: Mode,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    header: Header,
    tensors: Vec<NamedTensor>,
}

pub fn to_json(model: &TrainedModel) -> String {
    let cfg = &model.cfg;
    let ckpt = Checkpoint {
        format: FORMAT.into(),
        header: Header {
            dim: cfg.dim,
            heads: cfg.heads,
            layers: cfg.layers,
            out_dim: cfg.out_dim,
            mode: cfg.mode,
            seed: cfg.seed,
        },
        tensors: model
            .params
            .fields()
            .into_iter()
            .map(|(name, m)| NamedTensor {
                name,
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&ckpt).expect("checkpoint serialization cannot fail")
}

/// Parses a checkpoint. Training-only settings of the returned config
/// (learning rate, epochs, sigma, ...) take their defaults.
pub fn from_json(json: &str) -> Result<TrainedModel> {
    let ckpt: Checkpoint = serde_json::from_str(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ckpt.format != FORMAT {
        return Err(Error::Checkpoint(format!("unsupported format `{}`", ckpt.format)));
    }
    let h = ckpt.header;
    let cfg = ModelConfig {
        dim: h.dim,
        heads: h.heads,
        layers: h.layers,
        out_dim: h.out_dim,
        mode: h.mode,
        seed: h.seed,
        ..ModelConfig::default()
    };
    cfg.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    // The expected layout comes from a throwaway initialization.
    let mut params = NetworkParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
    let expected = params.shape_signature();
    if expected.len() != ckpt.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            ckpt.tensors.len()
        )));
    }
    for ((name, shape), (slot, t)) in expected.iter().zip(params.fields_mut().into_iter().zip(ckpt.tensors)) {
        if *name != t.name || *shape != (t.rows, t.cols) {
            return Err(Error::Checkpoint(format!(
                "expected tensor {name} {shape:?}, found {} ({}, {})",
                t.name, t.rows, t.cols
            )));
        }
        *slot = Matrix::from_vec(t.rows, t.cols, t.data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        if !slot.is_finite() {
            return Err(Error::Checkpoint(format!("{name} contains non-finite values")));
        }
    }
    Ok(TrainedModel {
        params,
        cfg,
        training_log: Vec::new(),
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(model)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    from_json(&text)
}

/// Training log as `epoch,mean_loss` CSV lines with a header row.
pub fn log_csv(log: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in log.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(seed: u64) -> TrainedModel {
        let cfg = ModelConfig {
            dim: 8,
            heads: 2,
            layers: 2,
            out_dim: 4,
            mode: Mode::RetentionOnly,
            seed,
            ..ModelConfig::default()
        };
        TrainedModel {
            params: NetworkParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)),
            cfg,
            training_log: vec![],
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = model(11);
        let back = from_json(&to_json(&m)).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.cfg.mode, Mode::RetentionOnly);
        assert_eq!(to_json(&back), to_json(&m));
    }

    #[test]
    fn rejects_tampered_layout() {
        let json = to_json(&model(1)).replace("\"layers\":2", "\"layers\":3");
        assert!(from_json(&json).unwrap_err().to_string().contains("expected"));
        let json = to_json(&model(1)).replace("layer0.gru.w_ir", "layer0.gru.w_xx");
        assert!(from_json(&json).is_err());
    }

    #[test]
    fn csv_log_format() {
        assert_eq!(log_csv(&[0.5, 0.25]), "epoch,mean_loss\n1,0.5\n2,0.25\n");
    }
}
