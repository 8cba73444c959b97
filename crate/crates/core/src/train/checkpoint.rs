use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::OptimizerState;
use super::model::{Model, ModelConfig};
use crate::error::{CheckpointError, Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentValues {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Saved training state. `config` is free-form but must carry the model
/// configuration under `"model"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: serde_json::Value,
    pub segments: Vec<SegmentValues>,
    pub optimizer: Option<OptimizerState>,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn from_model(
        model: &Model,
        mut config: serde_json::Value,
        optimizer: Option<OptimizerState>,
        seed: u64,
        epoch: usize,
    ) -> Result<Self> {
        let model_json = serde_json::to_value(model.config()).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        match config.as_object_mut() {
            Some(obj) => {
                obj.insert("model".into(), model_json);
            }
            None => config = serde_json::json!({ "model": model_json }),
        }
        let params = model.params();
        let mut offset = 0;
        let segments = model
            .segments()
            .into_iter()
            .map(|s| {
                let n = s.len();
                let values = params[offset..offset + n].to_vec();
                offset += n;
                SegmentValues {
                    name: s.name,
                    shape: s.shape,
                    values,
                }
            })
            .collect();
        Ok(Self {
            version: CHECKPOINT_VERSION,
            config,
            segments,
            optimizer,
            seed,
            epoch,
        })
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let v = self
            .config
            .get("model")
            .ok_or_else(|| CheckpointError::MissingSegment("config.model".into()))?;
        serde_json::from_value(v.clone()).map_err(|e| CheckpointError::Parse(format!("config.model: {e}")).into())
    }

    /// Writes the stored parameters into `model`. Segments are matched in
    /// order; a differing name or shape is reported against the model's segment.
    pub fn restore_into(&self, model: &mut Model) -> Result<()> {
        let expected = model.segments();
        let mut flat = Vec::with_capacity(model.param_count());
        for (i, seg) in expected.iter().enumerate() {
            let found = self
                .segments
                .get(i)
                .ok_or_else(|| CheckpointError::MissingSegment(seg.name.clone()))?;
            if found.name != seg.name || found.shape != seg.shape {
                return Err(CheckpointError::SegmentShape {
                    segment: seg.name.clone(),
                    expected: seg.shape.clone(),
                    found: found.shape.clone(),
                }
                .into());
            }
            flat.extend_from_slice(&found.values);
        }
        if let Some(extra) = self.segments.get(expected.len()) {
            return Err(CheckpointError::SegmentShape {
                segment: extra.name.clone(),
                expected: vec![],
                found: extra.shape.clone(),
            }
            .into());
        }
        model.set_params(&flat)
    }

    /// Rebuilds the model described by the checkpoint.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::init(self.model_config()?, self.seed)?;
        self.restore_into(&mut model)?;
        Ok(model)
    }
}

/// Writes floats with 17 significant digits.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn checkpoint_to_string(ckpt: &Checkpoint) -> Result<String> {
    let finite = ckpt.segments.iter().flat_map(|s| &s.values).all(|v| v.is_finite())
        && ckpt
            .optimizer
            .iter()
            .flat_map(|o| o.first_moment.iter().chain(&o.second_moment))
            .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("checkpoint values".into()));
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    ckpt.serialize(&mut ser).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn checkpoint_from_str(text: &str) -> Result<Checkpoint> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    let version = raw
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| CheckpointError::Parse("missing integer field `version`".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(CheckpointError::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        }
        .into());
    }
    let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    for s in &ckpt.segments {
        if s.values.len() != s.shape.iter().product::<usize>() {
            return Err(CheckpointError::SegmentShape {
                segment: s.name.clone(),
                expected: s.shape.clone(),
                found: vec![s.values.len()],
            }
            .into());
        }
    }
    Ok(ckpt)
}

/// Writes the checkpoint atomically (temporary file, then rename).
pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let text = checkpoint_to_string(ckpt)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}
