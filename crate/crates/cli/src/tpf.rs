//! Feature and posterior files: `TPF1`, little-endian u32 frame count, u32
//! dim, then the matrix row-major as little-endian f32.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use tandem_core::Matrix;

pub const MAGIC: &[u8; 4] = b"TPF1";

pub fn encode(m: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).context("too many frames for TPF1")?;
    let cols = u32::try_from(m.cols()).context("dimension too large for TPF1")?;
    let mut out = Vec::with_capacity(12 + 4 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &x in m.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        bail!("not a TPF1 file");
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[12..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .context("TPF1 header overflows")?;
    if body.len() != expected {
        bail!("TPF1 body holds {} bytes, header promises {rows}x{cols}", body.len());
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

/// Writes through a temporary sibling and renames, so an interrupted run
/// never leaves a truncated file behind.
pub fn write(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, &encode(m)?)
}

pub fn read(path: &Path) -> Result<Matrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes).with_context(|| format!("writing {}", tmp.display()))?;
    drop(f);
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}
