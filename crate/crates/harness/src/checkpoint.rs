//! Versioned little-endian binary checkpoints with a SHA-256 trailer.
//!
//! Layout: magic, format version (u32), dim, grid components, field
//! components (u32 each), boundary (u8), parity per axis (u8 x 3), points per
//! axis (u64 x 3), lengths (f64 x 3), time (f64), seed (u64), config hash
//! (32 bytes), value count (u64), values (f64), then the digest of
//! everything before it.

use std::fs;
use std::path::{Path, PathBuf};

use llbar_core::{Boundary, Field, Grid, Parity};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"LLBARCKP";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("not a checkpoint file (bad magic)")]
    BadMagic,

    #[error("checkpoint checksum mismatch: file is truncated or corrupt")]
    Checksum,

    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("checkpoint grid mismatch: file has {found}, expected {expected}")]
    GridMismatch { found: String, expected: String },

    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub field: Field,
    pub time: f64,
    pub seed: u64,
    pub config_hash: [u8; 32],
}

fn describe(grid: &Grid) -> String {
    format!(
        "d={} m={} n={:?} lengths={:?} {:?}",
        grid.dim(),
        grid.components(),
        grid.n(),
        grid.lengths(),
        grid.boundary()
    )
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let u = &ck.field;
    let grid = u.grid();
    let mut buf = Vec::with_capacity(160 + 8 * u.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.components() as u32).to_le_bytes());
    buf.extend_from_slice(&(u.components() as u32).to_le_bytes());
    buf.push(match grid.boundary() {
        Boundary::Periodic => 0,
        Boundary::NeumannCosine => 1,
    });
    for p in u.parity() {
        buf.push(match p {
            Parity::Even => 0,
            Parity::Odd => 1,
        });
    }
    for a in 0..3 {
        let n = grid.n().get(a).copied().unwrap_or(1) as u64;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for a in 0..3 {
        let l = grid.lengths().get(a).copied().unwrap_or(1.0);
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&ck.time.to_le_bytes());
    buf.extend_from_slice(&ck.seed.to_le_bytes());
    buf.extend_from_slice(&ck.config_hash);
    buf.extend_from_slice(&(u.values().len() as u64).to_le_bytes());
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos + n;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CheckpointError::Malformed("unexpected end of payload".into()))?;
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + DIGEST_LEN {
        return Err(CheckpointError::Checksum);
    }
    let (payload, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(CheckpointError::Checksum);
    }
    let mut r = Reader {
        bytes: payload,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dim = r.u32()? as usize;
    let grid_m = r.u32()? as usize;
    let field_m = r.u32()? as usize;
    let boundary = match r.u8()? {
        0 => Boundary::Periodic,
        1 => Boundary::NeumannCosine,
        b => return Err(CheckpointError::Malformed(format!("boundary tag {b}"))),
    };
    let mut parity = [Parity::Even; 3];
    for p in parity.iter_mut() {
        *p = match r.u8()? {
            0 => Parity::Even,
            1 => Parity::Odd,
            b => return Err(CheckpointError::Malformed(format!("parity tag {b}"))),
        };
    }
    let mut n = [0usize; 3];
    for v in n.iter_mut() {
        *v = r.u64()? as usize;
    }
    let mut lengths = [0.0; 3];
    for v in lengths.iter_mut() {
        *v = r.f64()?;
    }
    let time = r.f64()?;
    let seed = r.u64()?;
    let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let count = r.u64()? as usize;
    if dim == 0 || dim > 3 {
        return Err(CheckpointError::Malformed(format!("dimension {dim}")));
    }
    let grid = Grid::new(dim, grid_m, &n[..dim], &lengths[..dim], boundary)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    if count != field_m * grid.points() || r.bytes.len() - r.pos != 8 * count {
        return Err(CheckpointError::Malformed(format!(
            "{count} values do not match the grid and payload size"
        )));
    }
    let values = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let field = Field::from_values(&grid, field_m, values)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?
        .with_parity(parity);
    Ok(Checkpoint {
        field,
        time,
        seed,
        config_hash,
    })
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    fs::write(path, encode(ck)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Loads a checkpoint and checks that it lives on `grid`.
pub fn load_on(path: &Path, grid: &Grid) -> Result<Checkpoint, CheckpointError> {
    let ck = load(path)?;
    if ck.field.grid() != grid {
        return Err(CheckpointError::GridMismatch {
            found: describe(ck.field.grid()),
            expected: describe(grid),
        });
    }
    Ok(ck)
}

/// Parses a hex config hash into checkpoint bytes; zero when malformed.
pub fn hash_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    if hex.len() == 64 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).unwrap_or(0);
        }
    }
    out
}
