//! Binary path snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   4 bytes  "HCMA"
//! version u32      currently 1
//! n       u32      complex dimension
//! N       u32      nodes per real axis
//! Nt      u32      time levels
//! epsilon f64
//! meta    u32 length + that many bytes (UTF-8 JSON of the resolved config)
//! payload Nt * N^(2n) f64, t-major, node-lexicographic within each level
//! ```

use std::fs;
use std::path::Path;

use hcma_core::grid::TorusGrid;
use thiserror::Error;

use crate::error::CliError;
use crate::report::write_atomic;

pub const MAGIC: [u8; 4] = *b"HCMA";
pub const VERSION: u32 = 1;

/// Read failures are distinct so callers can tell a wrong file from a stale
/// one from a partial copy.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint header: {0}")]
    CorruptHeader(String),

    #[error("checkpoint version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated checkpoint: expected {expected} bytes past the header, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("{0}")]
    Io(String),
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: TorusGrid,
    pub epsilon: f64,
    pub metadata: Vec<u8>,
    /// t-major space-time field, `grid.spacetime_len()` values.
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn level(&self, k: usize) -> Option<&[f64]> {
        let ns = self.grid.spatial_len();
        if k >= self.grid.time_levels() {
            return None;
        }
        Some(&self.values[k * ns..(k + 1) * ns])
    }
}

pub fn write(
    path: &Path,
    grid: &TorusGrid,
    epsilon: f64,
    metadata: &[u8],
    values: &[f64],
) -> Result<(), CliError> {
    assert_eq!(values.len(), grid.spacetime_len(), "payload matches the grid");
    let mut buf = Vec::with_capacity(28 + metadata.len() + 8 * values.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.complex_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.nodes_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.time_levels() as u32).to_le_bytes());
    buf.extend_from_slice(&epsilon.to_le_bytes());
    let meta_len = u32::try_from(metadata.len())
        .map_err(|_| CliError::Config("checkpoint metadata exceeds u32 length".into()))?;
    buf.extend_from_slice(&meta_len.to_le_bytes());
    buf.extend_from_slice(metadata);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CheckpointError> {
        let rest = self.buf.len() - self.pos;
        if rest < len {
            return Err(CheckpointError::Truncated {
                expected: len,
                got: rest,
            });
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read(path: &Path) -> Result<Snapshot, CheckpointError> {
    let buf = fs::read(path)
        .map_err(|e| CheckpointError::Io(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };

    let magic = cur
        .take(4)
        .map_err(|_| CheckpointError::CorruptHeader("file shorter than the magic bytes".into()))?;
    if magic != MAGIC {
        return Err(CheckpointError::CorruptHeader(format!(
            "bad magic {:02x?}",
            magic
        )));
    }
    let version = cur
        .u32()
        .map_err(|_| CheckpointError::CorruptHeader("missing version field".into()))?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let header_err = |what: &str| CheckpointError::CorruptHeader(format!("missing {what} field"));
    let n = cur.u32().map_err(|_| header_err("n"))? as usize;
    let nodes = cur.u32().map_err(|_| header_err("N"))? as usize;
    let nt = cur.u32().map_err(|_| header_err("Nt"))? as usize;
    let epsilon = cur.f64().map_err(|_| header_err("epsilon"))?;
    let grid = TorusGrid::new(n, nodes, nt)
        .map_err(|e| CheckpointError::CorruptHeader(format!("inconsistent dimensions: {e}")))?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CheckpointError::CorruptHeader(format!(
            "nonpositive epsilon {epsilon}"
        )));
    }

    let meta_len = cur.u32().map_err(|_| header_err("metadata length"))? as usize;
    let metadata = cur.take(meta_len)?.to_vec();

    let expected = grid.spacetime_len();
    let remaining = buf.len() - cur.pos;
    if remaining != 8 * expected {
        return Err(CheckpointError::Truncated {
            expected: 8 * expected,
            got: remaining,
        });
    }
    let mut values = Vec::with_capacity(expected);
    for _ in 0..expected {
        values.push(cur.f64()?);
    }
    Ok(Snapshot {
        grid,
        epsilon,
        metadata,
        values,
    })
}
