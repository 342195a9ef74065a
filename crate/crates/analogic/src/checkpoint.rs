//! The checkpoint container: one file holding every parameter tensor,
//! optimizer moments, the step counter, and the training config snapshot.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"ANLGCKPT"                      8 bytes
//! version u32 = 1, reserved u32 = 0      8 bytes
//! header_len u64                          8 bytes
//! header JSON                             header_len bytes
//! data    f32 elements, densely packed    4 bytes each
//! ```
//!
//! The header lists `{name, shape, offset}` per tensor, with offsets in
//! elements from the start of the data section. Parameters use their
//! hierarchical names; first and second Adam moments use `adam_m.<name>` /
//! `adam_v.<name>`. Round-trips are bitwise: floats are stored as raw IEEE
//! bits, so save → load → save reproduces the file exactly.

use std::fs;
use std::path::Path;

use analogic_core::net::{build_model, ModelState};
use analogic_core::optim::Adam;
use analogic_core::train::{make_optimizers, restore, snapshot, TrainConfig, TrainSnapshot};
use analogic_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

const MAGIC: &[u8; 8] = b"ANLGCKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: [usize; 4],
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    step: u64,
    dtype: String,
    train: TrainConfig,
    gen_t: u64,
    disc_t: u64,
    tensors: Vec<TensorMeta>,
}

/// A checkpoint loaded back into live training state.
pub struct LoadedCheckpoint {
    pub model: ModelState<f32>,
    pub opt_gen: Adam<f32>,
    pub opt_disc: Adam<f32>,
    pub step: u64,
    pub train: TrainConfig,
}

pub fn save_checkpoint(
    path: &Path,
    model: &ModelState<f32>,
    opt_gen: &Adam<f32>,
    opt_disc: &Adam<f32>,
    step: u64,
    train: &TrainConfig,
) -> Result<()> {
    let snap = snapshot(step, model, opt_gen, opt_disc);
    let mut tensors = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let mut push = |name: String, t: &Tensor<f32>, tensors: &mut Vec<TensorMeta>| {
        tensors.push(TensorMeta {
            name,
            shape: t.shape(),
            offset: data.len() as u64,
        });
        data.extend_from_slice(t.data());
    };

    for (name, t) in snap.param_names.iter().zip(&snap.params) {
        push(name.clone(), t, &mut tensors);
    }
    let gen_names: Vec<_> = opt_gen
        .ids()
        .iter()
        .map(|&id| model.params.name(id).to_string())
        .collect();
    let disc_names: Vec<_> = opt_disc
        .ids()
        .iter()
        .map(|&id| model.params.name(id).to_string())
        .collect();
    for (names, ms, vs) in [
        (&gen_names, &snap.gen_m, &snap.gen_v),
        (&disc_names, &snap.disc_m, &snap.disc_v),
    ] {
        for (name, m) in names.iter().zip(ms) {
            push(format!("adam_m.{name}"), m, &mut tensors);
        }
        for (name, v) in names.iter().zip(vs) {
            push(format!("adam_v.{name}"), v, &mut tensors);
        }
    }

    let header = Header {
        step,
        dtype: "f32".into(),
        train: train.clone(),
        gen_t: snap.gen_t,
        disc_t: snap.disc_t,
        tensors,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| AppError::Mismatch(format!("checkpoint header serialization: {e}")))?;

    let mut bytes = Vec::with_capacity(24 + header_json.len() + data.len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for v in &data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    let bad = |what: &str| AppError::Mismatch(format!("{}: {what}", path.display()));

    if bytes.len() < 24 || &bytes[0..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let data_start = 24 + header_len;
    if bytes.len() < data_start {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[24..data_start])
        .map_err(|e| bad(&format!("header parse: {e}")))?;
    if header.dtype != "f32" {
        return Err(bad(&format!("unsupported dtype {:?}", header.dtype)));
    }

    let data = &bytes[data_start..];
    let read_tensor = |meta: &TensorMeta| -> Result<Tensor<f32>> {
        let numel = meta.shape.iter().product::<usize>();
        let b0 = meta.offset as usize * 4;
        let b1 = b0 + numel * 4;
        if b1 > data.len() {
            return Err(bad(&format!("tensor {} runs past the file end", meta.name)));
        }
        let vals = data[b0..b1]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor::new(meta.shape, vals))
    };

    let find = |name: &str| -> Result<Tensor<f32>> {
        header
            .tensors
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| bad(&format!("tensor {name} missing from checkpoint")))
            .and_then(&read_tensor)
    };

    header.train.validate()?;
    let mut model = build_model::<f32>(&header.train.arch, header.train.seed)?;
    let (mut opt_gen, mut opt_disc) = make_optimizers(&model, &header.train)?;

    let param_names: Vec<String> = model.params.iter().map(|(_, n, _)| n.to_string()).collect();
    let gen_names: Vec<String> = opt_gen
        .ids()
        .iter()
        .map(|&id| model.params.name(id).to_string())
        .collect();
    let disc_names: Vec<String> = opt_disc
        .ids()
        .iter()
        .map(|&id| model.params.name(id).to_string())
        .collect();
    let moments = |names: &[String], prefix: &str| -> Result<Vec<Tensor<f32>>> {
        names
            .iter()
            .map(|n| find(&format!("{prefix}.{n}")))
            .collect()
    };

    let snap = TrainSnapshot {
        step: header.step,
        params: param_names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        gen_m: moments(&gen_names, "adam_m")?,
        gen_v: moments(&gen_names, "adam_v")?,
        gen_t: header.gen_t,
        disc_m: moments(&disc_names, "adam_m")?,
        disc_v: moments(&disc_names, "adam_v")?,
        disc_t: header.disc_t,
        param_names,
    };
    restore(&snap, &mut model, &mut opt_gen, &mut opt_disc)?;

    Ok(LoadedCheckpoint {
        model,
        opt_gen,
        opt_disc,
        step: header.step,
        train: header.train,
    })
}
