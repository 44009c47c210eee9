//! Binary checkpoint format.
//!
//! ```text
//! offset  size  field
//!      0     6  magic "PROJE1"
//!      6     4  format version, u32 LE
//!     10    10  reserved, zero
//!     20     1  task (0 entity, 1 relation)
//!     21     1  variant (0 pointwise, 1 listwise, 2 wlistwise)
//!     22    24  n_e, n_r, k as u64 LE
//!     46   8*N  W_E, W_R (row-major), D_eh, D_rh, D_et, D_rt, b_c, b_p as f64 LE
//!  46+8N     4  CRC-32 of every preceding byte, u32 LE
//! ```
//!
//! with `N = n_e*k + n_r*k + 5k + 1`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::model::{expected_parameter_count, Embeddings, ModelParams, Task, Variant};

pub const MAGIC: &[u8; 6] = b"PROJE1";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE_LEN: usize = 20;
const HEADER_LEN: usize = PREAMBLE_LEN + 2 + 24;
const CRC_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated checkpoint: {found} bytes, expected {expected}")]
    Truncated { found: usize, expected: usize },
    #[error("checkpoint has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("corrupt checkpoint header: {0}")]
    BadHeader(String),
}

/// Task and variant stored alongside the tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub task: Task,
    pub variant: Variant,
}

/// Exact encoded size for the given shape.
pub fn encoded_len(n_entities: usize, n_relations: usize, k: usize) -> usize {
    HEADER_LEN + 8 * expected_parameter_count(n_entities, n_relations, k) + CRC_LEN
}

fn task_flag(task: Task) -> u8 {
    match task {
        Task::EntityPrediction => 0,
        Task::RelationPrediction => 1,
    }
}

fn variant_flag(variant: Variant) -> u8 {
    match variant {
        Variant::Pointwise => 0,
        Variant::Listwise => 1,
        Variant::WListwise => 2,
    }
}

pub fn encode(params: &ModelParams, meta: CheckpointMeta) -> Vec<u8> {
    let (n_e, n_r, k) = (params.n_entities(), params.n_relations(), params.k());
    let mut buf = Vec::with_capacity(encoded_len(n_e, n_r, k));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.resize(PREAMBLE_LEN, 0);
    buf.push(task_flag(meta.task));
    buf.push(variant_flag(meta.variant));
    for dim in [n_e, n_r, k] {
        buf.extend_from_slice(&(dim as u64).to_le_bytes());
    }
    for tensor in params.tensors() {
        for x in tensor {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn checked_len(n_e: u64, n_r: u64, k: u64) -> Option<usize> {
    let (n_e, n_r, k) = (
        usize::try_from(n_e).ok()?,
        usize::try_from(n_r).ok()?,
        usize::try_from(k).ok()?,
    );
    let scalars = n_e
        .checked_add(n_r)?
        .checked_mul(k)?
        .checked_add(k.checked_mul(5)?)?
        .checked_add(1)?;
    scalars.checked_mul(8)?.checked_add(HEADER_LEN + CRC_LEN)
}

/// Validates magic, version, length, and CRC, then decodes the tensors.
pub fn decode(bytes: &[u8]) -> Result<(ModelParams, CheckpointMeta), CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if MAGIC.starts_with(bytes) {
            CheckpointError::Truncated {
                found: bytes.len(),
                expected: HEADER_LEN + CRC_LEN,
            }
        } else {
            CheckpointError::BadMagic
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            found: bytes.len(),
            expected: HEADER_LEN + CRC_LEN,
        });
    }
    let version = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let (n_e, n_r, k) = (
        read_u64(bytes, 22),
        read_u64(bytes, 30),
        read_u64(bytes, 38),
    );
    let expected = checked_len(n_e, n_r, k)
        .ok_or_else(|| CheckpointError::BadHeader(format!("shape {n_e}x{n_r}x{k} overflows")))?;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated {
            found: bytes.len(),
            expected,
        });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let body = &bytes[..expected - CRC_LEN];
    let stored = u32::from_le_bytes(bytes[expected - CRC_LEN..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }
    if bytes[10..PREAMBLE_LEN].iter().any(|&b| b != 0) {
        return Err(CheckpointError::BadHeader(
            "reserved bytes are not zero".into(),
        ));
    }
    let task = match bytes[20] {
        0 => Task::EntityPrediction,
        1 => Task::RelationPrediction,
        f => return Err(CheckpointError::BadHeader(format!("task flag {f}"))),
    };
    let variant = match bytes[21] {
        0 => Variant::Pointwise,
        1 => Variant::Listwise,
        2 => Variant::WListwise,
        f => return Err(CheckpointError::BadHeader(format!("variant flag {f}"))),
    };
    if k == 0 {
        return Err(CheckpointError::BadHeader("k is zero".into()));
    }
    let (n_e, n_r, k) = (n_e as usize, n_r as usize, k as usize);

    let mut values = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let entity = Embeddings::from_vec(n_e, k, take(n_e * k));
    let relation = Embeddings::from_vec(n_r, k, take(n_r * k));
    let params = ModelParams {
        entity,
        relation,
        d_eh: take(k),
        d_rh: take(k),
        d_et: take(k),
        d_rt: take(k),
        b_c: take(k),
        b_p: take(1)[0],
    };
    Ok((params, CheckpointMeta { task, variant }))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &ModelParams,
    meta: CheckpointMeta,
) -> Result<(), CheckpointError> {
    fs::write(path, encode(params, meta))?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(ModelParams, CheckpointMeta), CheckpointError> {
    decode(&fs::read(path)?)
}
