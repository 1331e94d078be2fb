//! Checkpoint file: one line of compact JSON (the manifest) terminated by
//! `\n`, followed by the raw little-endian `f32` payload of every tensor in
//! manifest order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::{Scalar, TensorError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorMeta {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub hyperparameters: serde_json::Value,
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub tensors: Vec<TensorMeta>,
}

pub fn write<T: Scalar, W: Write>(
    mut out: W,
    store: &ParamStore<T>,
    hyperparameters: serde_json::Value,
    metadata: serde_json::Value,
) -> Result<(), TensorError> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        hyperparameters,
        metadata,
        tensors: store
            .iter()
            .map(|(_, e)| TensorMeta {
                name: e.name.clone(),
                shape: [e.rows, e.cols],
            })
            .collect(),
    };
    serde_json::to_writer(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    for (_, e) in store.iter() {
        let mut buf = Vec::with_capacity(e.value.len() * 4);
        for v in &e.value {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read<T: Scalar, R: Read>(input: R) -> Result<(Manifest, ParamStore<T>), TensorError> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let manifest: Manifest = serde_json::from_str(line.trim_end())?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    let mut store = ParamStore::new();
    for meta in &manifest.tensors {
        let n = meta.shape[0] * meta.shape[1];
        let mut bytes = vec![0u8; n * 4];
        reader.read_exact(&mut bytes).map_err(|e| {
            TensorError::Checkpoint(format!("truncated payload for {}: {e}", meta.name))
        })?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        store.insert(&meta.name, meta.shape[0], meta.shape[1], values)?;
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(TensorError::Checkpoint(format!(
            "{} trailing bytes after payload",
            rest.len()
        )));
    }
    Ok((manifest, store))
}

pub fn save<T: Scalar>(
    path: &Path,
    store: &ParamStore<T>,
    hyperparameters: serde_json::Value,
    metadata: serde_json::Value,
) -> Result<(), TensorError> {
    let file = std::fs::File::create(path)?;
    write(std::io::BufWriter::new(file), store, hyperparameters, metadata)
}

pub fn load<T: Scalar>(path: &Path) -> Result<(Manifest, ParamStore<T>), TensorError> {
    read(std::fs::File::open(path)?)
}
