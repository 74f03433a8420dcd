//! Raw little-endian `f32` tensors with a JSON sidecar `{shape, dtype}`.
//!
//! `feat.bin` pairs with `feat.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scribsim_core::Tensor;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
}

pub fn tensor_sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

pub fn write_tensor(path: &Path, tensor: &Tensor<f32>) -> Result<()> {
    let bytes: Vec<u8> = tensor.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = TensorSidecar { shape: tensor.shape().to_vec(), dtype: "f32".into() };
    let side = tensor_sidecar_path(path);
    fs::write(&side, serde_json::to_string(&sidecar).expect("sidecar serializes") + "\n")
        .map_err(|e| Error::io(&side, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor<f32>> {
    let side = tensor_sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: TensorSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: side.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if sidecar.dtype != "f32" {
        return Err(Error::malformed(&side, format!("unsupported dtype `{}`", sidecar.dtype)));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sidecar.shape.iter().product::<usize>() * 4;
    if bytes.len() != expected {
        return Err(Error::malformed(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Tensor::new(&sidecar.shape, data).map_err(|e| Error::malformed(path, e))
}
