use super::{create_dir, read_json, sha256_hex, write_json, Tensor};
use crate::error::{Error, Result};
use crate::pdegen::{Dataset, Normalizer, PdeProblem, Trajectory};
use crate::spectral::RealField;
use serde::{Deserialize, Serialize};
use std::path::Path;

const MANIFEST: &str = "manifest.json";
const KIND: &str = "kno-dataset";

#[derive(Debug, Serialize, Deserialize)]
struct FileEntry {
    file: String,
    /// Initial-condition seed of this trajectory.
    seed: u64,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    problem: PdeProblem,
    normalizer: Normalizer,
    size: usize,
    steps: usize,
    train: Vec<FileEntry>,
    test: Vec<FileEntry>,
}

/// `[T, spatial..., c]` with the channel axis last.
fn trajectory_tensor(traj: &Trajectory) -> Result<Tensor> {
    let first = &traj.snapshots[0];
    let (n, c) = (first.points(), first.channels());
    let mut shape = vec![traj.len()];
    shape.extend(std::iter::repeat_n(first.size(), first.dim()));
    shape.push(c);
    let mut data = Vec::with_capacity(traj.len() * n * c);
    for snap in &traj.snapshots {
        for p in 0..n {
            data.extend((0..c).map(|ch| snap.channel(ch)[p]));
        }
    }
    Tensor::real(shape, data)
}

fn tensor_trajectory(tensor: &Tensor, problem: &PdeProblem) -> Result<Trajectory> {
    let dim = problem.dim();
    if tensor.shape.len() != dim + 2 || tensor.shape[1..=dim].iter().any(|&d| d != problem.s) {
        return Err(Error::Format(format!(
            "trajectory tensor shape {:?} does not match the problem grid",
            tensor.shape
        )));
    }
    let (t, c) = (tensor.shape[0], tensor.shape[dim + 1]);
    let n = problem.s.pow(dim as u32);
    let values = tensor.scalars();
    let snapshots = (0..t)
        .map(|k| {
            let block = &values[k * n * c..(k + 1) * n * c];
            let mut data = vec![0.0; n * c];
            for p in 0..n {
                for ch in 0..c {
                    data[ch * n + p] = block[p * c + ch];
                }
            }
            RealField::new(problem.s, dim, c, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        snapshots,
        dt_record: problem.dt_record,
        problem: problem.clone(),
    })
}

/// Writes the dataset into `dir` and returns its content hash.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<String> {
    create_dir(dir)?;
    let write_split = |name: &str, split: &[Trajectory]| -> Result<Vec<FileEntry>> {
        split
            .iter()
            .enumerate()
            .map(|(i, traj)| {
                let bytes = trajectory_tensor(traj)?.to_bytes();
                let file = format!("{name}_{i:04}.knot");
                let path = dir.join(&file);
                std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
                Ok(FileEntry {
                    file,
                    seed: traj.problem.ic.seed,
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect()
    };
    let train = write_split("train", &ds.train)?;
    let test = write_split("test", &ds.test)?;
    let manifest = Manifest {
        kind: KIND.into(),
        problem: ds.problem.clone(),
        normalizer: ds.normalizer.clone(),
        size: ds.size(),
        steps: ds.steps(),
        train,
        test,
    };
    let text = write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Reads a dataset directory, verifying every trajectory file's hash.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.kind != KIND {
        return Err(Error::Format(format!("{} is not a dataset manifest", dir.display())));
    }
    let read_split = |entries: &[FileEntry]| -> Result<Vec<Trajectory>> {
        entries
            .iter()
            .map(|e| {
                let path = dir.join(&e.file);
                let bytes = match std::fs::read(&path) {
                    Ok(b) => b,
                    Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                        return Err(Error::MissingTensor(e.file.clone()))
                    }
                    Err(err) => return Err(Error::io(&path, err)),
                };
                if sha256_hex(&bytes) != e.sha256 {
                    return Err(Error::HashMismatch(e.file.clone()));
                }
                let mut problem = manifest.problem.clone();
                problem.ic.seed = e.seed;
                tensor_trajectory(&Tensor::from_bytes(&bytes)?, &problem)
            })
            .collect()
    };
    let train = read_split(&manifest.train)?;
    let test = read_split(&manifest.test)?;
    if train.is_empty() {
        return Err(Error::Format("dataset has no training trajectories".into()));
    }
    Ok(Dataset {
        problem: manifest.problem,
        train,
        test,
        normalizer: manifest.normalizer,
    })
}

/// Content hash of a saved dataset directory (the hash of its manifest,
/// which lists every trajectory file's hash).
pub fn dataset_hash(dir: &Path) -> Result<String> {
    let path = dir.join(MANIFEST);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(sha256_hex(&bytes))
}
