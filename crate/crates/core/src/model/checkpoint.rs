//! Checkpoint file format.
//!
//! Layout: the magic bytes `PLAB1\0`, a single-line UTF-8 JSON header
//! (config plus a tensor manifest of name/shape/byte-offset), a newline,
//! then raw little-endian f32 data in manifest order. Offsets are relative
//! to the start of the data section.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, ModelError, ModelParams, ParamSet};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"PLAB1\0";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

pub fn save(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    let manifest = params.config.manifest();
    let mut entries = Vec::with_capacity(manifest.len());
    let mut offset = 0u64;
    for ((name, shape), tensor) in manifest.iter().zip(&params.set.tensors) {
        debug_assert_eq!(shape, &tensor.shape);
        entries.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            offset,
        });
        offset += (tensor.len() * 4) as u64;
    }
    let header = Header {
        config: params.config.clone(),
        tensors: entries,
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| ModelError::Checkpoint(format!("header write: {e}")))?;
    w.write_all(b"\n")?;
    for tensor in &params.set.tensors {
        for &v in &tensor.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let mut header_bytes = Vec::new();
    loop {
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        if b[0] == b'\n' {
            break;
        }
        header_bytes.push(b[0]);
    }
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| ModelError::Checkpoint(format!("header parse: {e}")))?;
    let expected = header.config.manifest();
    if expected.len() != header.tensors.len() {
        return Err(ModelError::Checkpoint(format!(
            "manifest length mismatch: {} vs {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    let mut tensors = Vec::with_capacity(expected.len());
    let mut offset = 0u64;
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if name != &entry.name || shape != &entry.shape || entry.offset != offset {
            return Err(ModelError::Checkpoint(format!(
                "tensor {} does not match the config-derived manifest",
                entry.name
            )));
        }
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor::from_vec(shape, data));
        offset += (n * 4) as u64;
    }
    Ok(ModelParams {
        config: header.config,
        set: ParamSet { tensors },
    })
}
