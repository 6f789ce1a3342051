use std::io::{Read, Write};
use std::path::Path;

use super::features::{extract_features, FeatureSpec};
use super::labeling::{ClassRegistry, LabeledProposal};
use super::model::{train_on_features, SoftmaxModel, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::imaging::ScanImage;
use crate::proposal::Proposal;

/// Anything that maps a crop to a probability per registry class.
pub trait ProposalClassifier: Sync {
    fn registry(&self) -> &ClassRegistry;
    fn probabilities(&self, crop: &ScanImage) -> Result<Vec<f64>>;
}

impl ProposalClassifier for SoftmaxModel {
    fn registry(&self) -> &ClassRegistry {
        &self.registry
    }

    fn probabilities(&self, crop: &ScanImage) -> Result<Vec<f64>> {
        let x = extract_features(crop, &self.spec)?;
        Ok(self.probabilities_for(&x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub proposal: Proposal,
    pub class_id: usize,
    /// Probability of `class_id`.
    pub score: f64,
    pub probabilities: Vec<f64>,
}

/// Argmax class of the crop, ties going to the smaller class id.
pub fn classify(model: &dyn ProposalClassifier, proposal: &Proposal) -> Result<Detection> {
    let probabilities = model.probabilities(&proposal.crop)?;
    let (class_id, &score) = probabilities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .ok_or_else(|| Error::InvalidArgument("classifier returned no classes".into()))?;
    Ok(Detection {
        proposal: proposal.clone(),
        class_id,
        score,
        probabilities,
    })
}

pub fn train_baseline(
    data: &[LabeledProposal],
    registry: &ClassRegistry,
    spec: &FeatureSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let xs = data
        .iter()
        .map(|d| extract_features(&d.proposal.crop, spec))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<usize> = data.iter().map(|d| d.class_id).collect();
    train_on_features(&xs, &ys, registry, spec, config)
}

const MAGIC: &[u8; 8] = b"CSTMODEL";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{what} {v} too large")))
}

/// Binary layout, all little endian: magic, version (u32), class count (u32)
/// then per class a byte length (u32) and UTF-8 name, feature spec as side,
/// bins (u32) and histogram max (f64), then the weight rows as f64.
pub fn encode_model(model: &SoftmaxModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, MODEL_VERSION);
    put_u32(&mut out, as_u32(model.registry.len(), "class count")?);
    for name in model.registry.names() {
        put_u32(&mut out, as_u32(name.len(), "name length")?);
        out.extend_from_slice(name.as_bytes());
    }
    put_u32(&mut out, as_u32(model.spec.side, "side")?);
    put_u32(&mut out, as_u32(model.spec.hist_bins, "bins")?);
    put_f64(&mut out, model.spec.hist_max);
    for row in &model.weights {
        for &w in row {
            put_f64(&mut out, w);
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::ModelFormat("truncated model file".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SoftmaxModel> {
    let mut cur = Cursor { bytes };
    if cur.take(8)? != MAGIC {
        return Err(Error::ModelFormat("bad magic header".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "model version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n_classes = cur.u32()? as usize;
    let mut names = Vec::with_capacity(n_classes.min(1024));
    for _ in 0..n_classes {
        let len = cur.u32()? as usize;
        let raw = cur.take(len)?;
        names.push(
            String::from_utf8(raw.to_vec())
                .map_err(|_| Error::ModelFormat("class name is not UTF-8".into()))?,
        );
    }
    if names.first().map(String::as_str) != Some(super::labeling::NORMAL) {
        return Err(Error::ModelFormat("registry must start with normal".into()));
    }
    let registry = ClassRegistry::new(&names[1..]).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let spec = FeatureSpec {
        side: cur.u32()? as usize,
        hist_bins: cur.u32()? as usize,
        hist_max: cur.f64()?,
    };
    spec.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    let row = spec.dim() + 1;
    let expected = n_classes * row * 8;
    if cur.bytes.len() != expected {
        return Err(Error::ModelFormat(format!(
            "weight block is {} bytes, expected {expected}",
            cur.bytes.len()
        )));
    }
    let mut weights = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        weights.push((0..row).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?);
    }
    let model = SoftmaxModel { registry, spec, weights };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &SoftmaxModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SoftmaxModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
