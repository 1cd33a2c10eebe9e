//! Binary tensor container: `CMFT` magic, version, rank, dims, then a
//! row-major little-endian f32 payload.

use super::DataError;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const TENSOR_MAGIC: &[u8; 4] = b"CMFT";
pub const TENSOR_VERSION: u32 = 1;

/// Writes `data` (cast to f32) with the given dims. Values must be finite
/// and the dim product must match the data length.
pub fn write_tensor(path: &Path, dims: &[u32], data: &[f64]) -> Result<(), DataError> {
    let expected: u64 = dims.iter().map(|&d| u64::from(d)).product();
    if expected != data.len() as u64 {
        return Err(DataError::Binary {
            path: path.display().to_string(),
            message: format!(
                "dims {:?} imply {expected} elements, got {}",
                dims,
                data.len()
            ),
            offset: 0,
        });
    }
    if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
        return Err(DataError::Binary {
            path: path.display().to_string(),
            message: format!("non-finite value at element {bad}"),
            offset: header_len(dims.len()) + 4 * bad as u64,
        });
    }
    let mut buf = Vec::with_capacity(header_len(dims.len()) as usize + 4 * data.len());
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    file.write_all(&buf).map_err(|e| DataError::io(path, e))?;
    Ok(())
}

fn header_len(rank: usize) -> u64 {
    4 + 4 + 4 + 4 * rank as u64
}

pub fn read_tensor(path: &Path) -> Result<(Vec<u32>, Vec<f64>), DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let fail = |message: String, offset: u64| DataError::Binary {
        path: path.display().to_string(),
        message,
        offset,
    };
    let take_u32 = |offset: usize| -> Result<u32, DataError> {
        let end = offset + 4;
        if end > bytes.len() {
            return Err(fail(
                format!("file ends inside a header word ({} bytes total)", bytes.len()),
                offset as u64,
            ));
        }
        Ok(u32::from_le_bytes(bytes[offset..end].try_into().unwrap()))
    };

    if bytes.len() < 4 || &bytes[0..4] != TENSOR_MAGIC {
        return Err(fail("bad magic, expected \"CMFT\"".into(), 0));
    }
    let version = take_u32(4)?;
    if version != TENSOR_VERSION {
        return Err(fail(format!("unsupported version {version}"), 4));
    }
    let rank = take_u32(8)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for k in 0..rank {
        dims.push(take_u32(12 + 4 * k)?);
    }
    let header = header_len(rank);
    let expected: u64 = dims.iter().map(|&d| u64::from(d)).product::<u64>() * 4;
    let actual = bytes.len() as u64 - header;
    if actual != expected {
        return Err(fail(
            format!("payload length mismatch: expected {expected} bytes, got {actual}"),
            header,
        ));
    }
    let mut data = Vec::with_capacity((expected / 4) as usize);
    for (k, chunk) in bytes[header as usize..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(fail(
                format!("non-finite value at element {k}"),
                header + 4 * k as u64,
            ));
        }
        data.push(f64::from(v));
    }
    Ok((dims, data))
}
