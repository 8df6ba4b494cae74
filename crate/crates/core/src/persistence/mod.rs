//! On-disk formats: a minimal binary tensor file, checkpoint and dataset
//! directories described by JSON manifests, and JSONL metric logs.

mod checkpoint;
mod dataset;
mod log;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dataset::{dataset_hash, load_dataset, save_dataset};
pub use log::{read_metrics, MetricRecord, MetricsLog};

use crate::error::{Error, Result};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"KNOT";
pub const VERSION: u32 = 1;

const HEADER_FIXED: usize = 4 + 4 + 1 + 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// A row-major tensor of `f64` or complex `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn real(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(shape, TensorData::F64(data))
    }

    pub fn complex(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        Self::checked(shape, TensorData::Complex(data))
    }

    fn checked(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let t = Self { shape, data };
        let expected = element_count(&t.shape)?;
        if expected != t.len() {
            return Err(Error::ShapeMismatch(format!(
                "tensor of shape {:?} holds {} elements",
                t.shape,
                t.len()
            )));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::F64(v) => v.len(),
            TensorData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype_code(&self) -> u8 {
        match self.data {
            TensorData::F64(_) => 0,
            TensorData::Complex(_) => 1,
        }
    }

    /// Scalars as stored: complex values interleaved `(re, im)`.
    pub fn scalars(&self) -> &[f64] {
        match &self.data {
            TensorData::F64(v) => v,
            TensorData::Complex(v) => bytemuck::cast_slice(v),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let scalars = self.scalars();
        let mut out = Vec::with_capacity(HEADER_FIXED + 8 * self.shape.len() + 8 * scalars.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype_code());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in scalars {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_FIXED {
            return Err(Error::TruncatedPayload {
                expected: HEADER_FIXED,
                found: bytes.len(),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let dtype = bytes[8];
        if dtype > 1 {
            return Err(Error::BadDtype(dtype));
        }
        let ndim = bytes[9] as usize;
        let header = HEADER_FIXED + 8 * ndim;
        if bytes.len() < header {
            return Err(Error::TruncatedPayload {
                expected: header,
                found: bytes.len(),
            });
        }
        let shape = bytes[HEADER_FIXED..header]
            .chunks_exact(8)
            .map(|c| usize::try_from(u64::from_le_bytes(c.try_into().expect("8 bytes"))).map_err(|_| Error::ShapeOverflow))
            .collect::<Result<Vec<_>>>()?;
        let elements = element_count(&shape)?;
        let payload = elements
            .checked_mul(8 * (1 + dtype as usize))
            .ok_or(Error::ShapeOverflow)?;
        let found = bytes.len() - header;
        if found != payload {
            return Err(Error::TruncatedPayload { expected: payload, found });
        }
        let scalars: Vec<f64> = bytes[header..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let data = if dtype == 0 {
            TensorData::F64(scalars)
        } else {
            TensorData::Complex(scalars.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
        };
        Ok(Self { shape, data })
    }
}

fn element_count(shape: &[usize]) -> Result<usize> {
    if shape.len() > u8::MAX as usize {
        return Err(Error::ShapeOverflow);
    }
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(Error::ShapeOverflow)
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    std::fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    Ok(text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
