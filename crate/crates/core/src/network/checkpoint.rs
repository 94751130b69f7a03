//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "GNCK" | u32 version = 1 | u32 meta-JSON length | meta JSON (UTF-8)
//! then, for each parameterized layer in order, two tensor records
//! (layerNN.weight, layerNN.bias):
//!   u32 name length | name bytes | u8 dtype (1 = f32, 2 = f64) | u8 rank
//!   | u32 dims[rank] | raw row-major data
//! ```
//!
//! The meta JSON embeds the network spec and a free-form provenance string.
//! Feature-map dumps reuse the bare tensor record without the header.

use super::{build_network, Network, NetworkSpec};
use crate::error::{CheckpointError, Error, Result};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"GNCK";
const VERSION: u32 = 1;
const MAX_NAME_LEN: u32 = 4096;
const MAX_RANK: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(DType::F32),
            2 => Ok(DType::F64),
            other => Err(CheckpointError::Malformed(format!("unknown dtype tag {other}")).into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    spec: NetworkSpec,
    provenance: String,
}

/// A deserialized checkpoint: spec, named parameter tensors in record order,
/// and provenance.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub parameters: Vec<(String, Tensor)>,
    pub provenance: String,
}

/// One expected tensor record: which layer, the record name, its shape, and
/// whether it is the weight (vs bias) slot.
struct RecordSpec {
    layer_idx: usize,
    name: String,
    shape: Vec<usize>,
    is_weights: bool,
}

/// Tensor records for the parameterized layers of a spec, flat-layer order.
fn expected_records(spec: &NetworkSpec) -> Vec<RecordSpec> {
    let mut out = Vec::new();
    for (idx, layer) in spec.flat_layers().iter().enumerate() {
        let (w_shape, b_shape) = match layer {
            super::LayerSpec::Conv {
                filter_h,
                filter_w,
                in_channels,
                num_filters,
                ..
            } => (
                vec![*filter_h, *filter_w, *in_channels, *num_filters],
                vec![*num_filters],
            ),
            super::LayerSpec::Dense {
                in_features,
                out_features,
            } => (vec![*out_features, *in_features], vec![*out_features]),
            _ => continue,
        };
        out.push(RecordSpec {
            layer_idx: idx,
            name: format!("layer{idx:02}.weight"),
            shape: w_shape,
            is_weights: true,
        });
        out.push(RecordSpec {
            layer_idx: idx,
            name: format!("layer{idx:02}.bias"),
            shape: b_shape,
            is_weights: false,
        });
    }
    out
}

impl Checkpoint {
    /// Captures a network's spec and parameters.
    pub fn from_network(network: &Network, provenance: &str) -> Self {
        let mut parameters = Vec::new();
        for rec in expected_records(network.spec()) {
            let (w, b) = network
                .layer(rec.layer_idx)
                .params()
                .expect("parameterized layer");
            let tensor = if rec.is_weights { w } else { b };
            parameters.push((rec.name, tensor.clone()));
        }
        Self {
            format_version: VERSION,
            spec: network.spec().clone(),
            parameters,
            provenance: provenance.to_string(),
        }
    }

    /// Rebuilds a network carrying exactly this checkpoint's parameters.
    pub fn to_network(&self) -> Result<Network> {
        let mut network = build_network(&self.spec, 0)?;
        let records = expected_records(&self.spec);
        if records.len() != self.parameters.len() {
            return Err(CheckpointError::Integrity(format!(
                "{} tensor records, spec requires {}",
                self.parameters.len(),
                records.len()
            ))
            .into());
        }
        for (rec, (name, tensor)) in records.iter().zip(&self.parameters) {
            if *name != rec.name {
                return Err(CheckpointError::Integrity(format!(
                    "record name '{name}', expected '{}'",
                    rec.name
                ))
                .into());
            }
            if tensor.shape() != rec.shape {
                return Err(CheckpointError::Integrity(format!(
                    "record '{name}' has shape {:?}, spec requires {:?}",
                    tensor.shape(),
                    rec.shape
                ))
                .into());
            }
            let (w, b) = network.layer_mut(rec.layer_idx).params_mut().unwrap();
            *(if rec.is_weights { w } else { b }) = tensor.clone();
        }
        Ok(network)
    }

    pub fn save(&self, path: &Path, dtype: DType) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_all(&self.format_version.to_le_bytes())?;
        let meta = serde_json::to_vec(&CheckpointMeta {
            spec: self.spec.clone(),
            provenance: self.provenance.clone(),
        })?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        for (name, tensor) in &self.parameters {
            write_tensor_record(&mut w, name, tensor, dtype)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Saves a network as a checkpoint file.
pub fn save_checkpoint(network: &Network, path: &Path, provenance: &str, dtype: DType) -> Result<()> {
    Checkpoint::from_network(network, provenance).save(path, dtype)
}

/// Loads and validates a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version).into());
    }
    let meta_len = read_u32(&mut r, "meta length")? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    read_exact(&mut r, &mut meta_bytes, "meta JSON")?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| CheckpointError::Malformed(format!("meta JSON: {e}")))?;
    meta.spec
        .shape_walk()
        .map_err(|e| CheckpointError::Integrity(format!("embedded spec: {e}")))?;

    let mut parameters = Vec::new();
    for rec in expected_records(&meta.spec) {
        let (name, tensor, _) = read_tensor_record(&mut r)?;
        if name != rec.name {
            return Err(CheckpointError::Integrity(format!(
                "record name '{name}', expected '{}'",
                rec.name
            ))
            .into());
        }
        if tensor.shape() != rec.shape {
            return Err(CheckpointError::Integrity(format!(
                "record '{name}' has shape {:?}, spec requires {:?}",
                tensor.shape(),
                rec.shape
            ))
            .into());
        }
        parameters.push((name, tensor));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CheckpointError::Malformed("trailing data after last record".into()).into());
    }

    Ok(Checkpoint {
        format_version: version,
        spec: meta.spec,
        parameters,
        provenance: meta.provenance,
    })
}

pub fn write_tensor_record<W: Write>(
    w: &mut W,
    name: &str,
    tensor: &Tensor,
    dtype: DType,
) -> Result<()> {
    let name_bytes = name.as_bytes();
    w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
    w.write_all(name_bytes)?;
    w.write_all(&[dtype.tag()])?;
    let rank = tensor.shape().len() as u8;
    w.write_all(&[rank])?;
    for &dim in tensor.shape() {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    match dtype {
        DType::F64 => {
            for &v in tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        DType::F32 => {
            for &v in tensor.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_tensor_record<R: Read>(r: &mut R) -> Result<(String, Tensor, DType)> {
    let name_len = read_u32(r, "record name length")?;
    if name_len > MAX_NAME_LEN {
        return Err(CheckpointError::Malformed(format!(
            "record name length {name_len} exceeds {MAX_NAME_LEN}"
        ))
        .into());
    }
    let mut name_bytes = vec![0u8; name_len as usize];
    read_exact(r, &mut name_bytes, "record name")?;
    let name = String::from_utf8(name_bytes)
        .map_err(|_| CheckpointError::Malformed("record name is not UTF-8".into()))?;
    let mut tag = [0u8; 2];
    read_exact(r, &mut tag, "dtype/rank")?;
    let dtype = DType::from_tag(tag[0])?;
    let rank = tag[1];
    if rank == 0 || rank > MAX_RANK {
        return Err(CheckpointError::Malformed(format!("rank {rank} out of range")).into());
    }
    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        shape.push(read_u32(r, "dimension")? as usize);
    }
    let count: usize = shape.iter().product();
    let mut data = Vec::with_capacity(count);
    match dtype {
        DType::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..count {
                read_exact(r, &mut buf, "tensor data")?;
                data.push(f64::from_le_bytes(buf));
            }
        }
        DType::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..count {
                read_exact(r, &mut buf, "tensor data")?;
                data.push(f64::from(f32::from_le_bytes(buf)));
            }
        }
    }
    let tensor = Tensor::from_vec(shape, data)
        .map_err(|e| CheckpointError::Malformed(format!("tensor record '{name}': {e}")))?;
    Ok((name, tensor, dtype))
}

/// Writes a single tensor record as its own file (feature-map dumps).
pub fn write_tensor_file(path: &Path, name: &str, tensor: &Tensor, dtype: DType) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_tensor_record(&mut w, name, tensor, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<(String, Tensor)> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let (name, tensor, _) = read_tensor_record(&mut r)?;
    Ok((name, tensor))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::from(CheckpointError::Truncated(format!("while reading {what}")))
        } else {
            Error::from(e)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::spec_by_name;

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.ckpt");
        let net = build_network(&spec_by_name("mini", 9).unwrap(), 42).unwrap();
        save_checkpoint(&net, &path, "unit test", DType::F64).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.provenance, "unit test");
        let rebuilt = loaded.to_network().unwrap();
        for idx in net.parameterized_layers() {
            let (w0, b0) = net.layer(idx).params().unwrap();
            let (w1, b1) = rebuilt.layer(idx).params().unwrap();
            assert_eq!(w0.data(), w1.data());
            assert_eq!(b0.data(), b1.data());
        }
        // save -> load -> save keeps the bytes stable
        let path2 = dir.path().join("mini2.ckpt");
        loaded.save(&path2, DType::F64).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn bad_magic_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.ckpt");
        std::fs::write(&path, b"NOPE additional").unwrap();
        match load_checkpoint(&path) {
            Err(Error::Checkpoint(CheckpointError::BadMagic)) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.ckpt");
        let net = build_network(&spec_by_name("mini", 9).unwrap(), 1).unwrap();
        save_checkpoint(&net, &path, "t", DType::F64).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = &bytes[..bytes.len() - 17];
        std::fs::write(&path, cut).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Checkpoint(CheckpointError::Truncated(_))) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.ckpt");
        let net = build_network(&spec_by_name("mini", 9).unwrap(), 1).unwrap();
        save_checkpoint(&net, &path, "t", DType::F64).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Checkpoint(CheckpointError::UnsupportedVersion(9))) => {}
            other => panic!("expected UnsupportedVersion, got {other:?}"),
        }
    }

    #[test]
    fn shape_disagreement_is_integrity_error() {
        // Hand-craft a checkpoint whose first record has a wrong shape.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let spec = spec_by_name("mini-local", 9).unwrap();
        let meta = serde_json::to_vec(&CheckpointMeta {
            spec: spec.clone(),
            provenance: "bad".into(),
        })
        .unwrap();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&meta);
        // wrong shape for layer00.weight (should be [5,5,3,8])
        let t = Tensor::zeros(&[2, 2, 1, 1]);
        let mut w = Vec::new();
        write_tensor_record(&mut w, "layer00.weight", &t, DType::F64).unwrap();
        bytes.extend_from_slice(&w);
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Checkpoint(CheckpointError::Integrity(_))) => {}
            other => panic!("expected Integrity, got {other:?}"),
        }
    }

    #[test]
    fn f32_storage_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini32.ckpt");
        let net = build_network(&spec_by_name("mini-local", 9).unwrap(), 5).unwrap();
        save_checkpoint(&net, &path, "f32", DType::F32).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let rebuilt = loaded.to_network().unwrap();
        let (w0, _) = net.layer(0).params().unwrap();
        let (w1, _) = rebuilt.layer(0).params().unwrap();
        for (a, b) in w0.data().iter().zip(w1.data()) {
            assert!((a - b).abs() <= a.abs() * 1e-6 + 1e-12);
        }
    }
}
