use super::{create_dir, read_json, sha256_hex, write_json, Tensor, TensorData};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, ParamKind};
use crate::pdegen::Normalizer;
use crate::training::{Checkpoint, TrainConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

const MANIFEST: &str = "manifest.json";
const KIND: &str = "kno-checkpoint";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
    complex: bool,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    writer: String,
    model: ModelConfig,
    train: TrainConfig,
    normalizer: Normalizer,
    parameter_count: usize,
    tensors: Vec<TensorEntry>,
}

/// Writes `manifest.json` plus one tensor file per parameter into `dir`.
pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    create_dir(dir)?;
    let mut tensors = Vec::new();
    for view in ckpt.params.views() {
        let tensor = match view.kind {
            ParamKind::Real => Tensor::real(view.shape.clone(), view.data.to_vec())?,
            ParamKind::Complex => Tensor::complex(
                view.shape.clone(),
                view.data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            )?,
        };
        let bytes = tensor.to_bytes();
        let file = format!("{}.knot", view.name);
        let path = dir.join(&file);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        tensors.push(TensorEntry {
            name: view.name,
            file,
            shape: view.shape,
            complex: view.kind == ParamKind::Complex,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        kind: KIND.into(),
        writer: concat!("kno ", env!("CARGO_PKG_VERSION")).into(),
        model: ckpt.params.config.clone(),
        train: ckpt.train.clone(),
        normalizer: ckpt.normalizer.clone(),
        parameter_count: ckpt.params.config.count_parameters(),
        tensors,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(())
}

/// Reads a checkpoint, verifying every tensor's hash and shape.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.kind != KIND {
        return Err(Error::Format(format!("{} is not a checkpoint manifest", dir.display())));
    }
    manifest.model.validate()?;
    if manifest.parameter_count != manifest.model.count_parameters() {
        return Err(Error::InconsistentCheckpoint(format!(
            "manifest lists {} parameters, config implies {}",
            manifest.parameter_count,
            manifest.model.count_parameters()
        )));
    }
    let mut params = ModelParams::zeros(&manifest.model);
    let expected: Vec<(String, Vec<usize>, ParamKind)> =
        params.views().into_iter().map(|v| (v.name, v.shape, v.kind)).collect();
    if manifest.tensors.len() != expected.len() {
        return Err(Error::InconsistentCheckpoint(format!(
            "manifest lists {} tensors, config implies {}",
            manifest.tensors.len(),
            expected.len()
        )));
    }
    let mut loaded = 0;
    for (slot, (name, shape, kind)) in params.slices_mut().into_iter().zip(expected) {
        let entry = manifest
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::MissingTensor(name.clone()))?;
        let path = dir.join(&entry.file);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingTensor(name)),
            Err(e) => return Err(Error::io(&path, e)),
        };
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::HashMismatch(name));
        }
        let tensor = Tensor::from_bytes(&bytes)?;
        let kind_ok = matches!(
            (&tensor.data, kind),
            (TensorData::F64(_), ParamKind::Real) | (TensorData::Complex(_), ParamKind::Complex)
        );
        if tensor.shape != shape || entry.shape != shape || !kind_ok {
            return Err(Error::InconsistentCheckpoint(format!(
                "tensor {name} has shape {:?}, config implies {shape:?}",
                tensor.shape
            )));
        }
        slot.copy_from_slice(tensor.scalars());
        loaded += slot.len();
    }
    debug_assert_eq!(loaded, manifest.parameter_count);
    Ok(Checkpoint {
        params,
        train: manifest.train,
        normalizer: manifest.normalizer,
    })
}
