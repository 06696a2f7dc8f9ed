//! Binary tensor container: `WNCT` magic, `u16` version, `u8` dtype code,
//! `u8` rank, `u32` dims, then the row-major payload (all little-endian).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Scalar;

pub const MAGIC: &[u8; 4] = b"WNCT";
pub const VERSION: u16 = 1;

fn dtype_size(code: u8) -> Result<usize> {
    match code {
        0 => Ok(4),
        1 => Ok(8),
        _ => Err(Error::data(format!("unknown dtype code {code}"))),
    }
}

pub fn encode<T: Scalar>(dims: &[usize], data: &[T]) -> Result<Vec<u8>> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::invalid("tensor rank exceeds 255"));
    }
    let n: usize = dims.iter().product();
    if n != data.len() {
        return Err(Error::shape(format!("dims {dims:?} need {n} values, got {}", data.len())));
    }
    let size = dtype_size(T::DTYPE_CODE)?;
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + size * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::DTYPE_CODE);
    out.push(dims.len() as u8);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::invalid("dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        match T::DTYPE_CODE {
            0 => out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
            _ => out.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
    Ok(out)
}

/// Decodes a container whose dtype must match `T`.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(Vec<usize>, Vec<T>)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::data("not a tensor container (bad magic)"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::data(format!("unsupported container version {version}")));
    }
    let code = bytes[6];
    let size = dtype_size(code)?;
    if code != T::DTYPE_CODE {
        return Err(Error::data(format!(
            "container holds dtype {code}, expected {} ({})",
            T::DTYPE_CODE,
            T::NAME
        )));
    }
    let rank = bytes[7] as usize;
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::data("truncated container header"));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let n: usize = dims.iter().product();
    if bytes.len() != header + n * size {
        return Err(Error::data(format!(
            "payload holds {} bytes, dims {dims:?} need {}",
            bytes.len() - header,
            n * size
        )));
    }
    let data = bytes[header..]
        .chunks_exact(size)
        .map(|c| match size {
            4 => T::of(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))),
            _ => T::of(f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])),
        })
        .collect();
    Ok((dims, data))
}

pub fn write_tensor<T: Scalar>(path: &Path, dims: &[usize], data: &[T]) -> Result<()> {
    let bytes = encode(dims, data)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor<T: Scalar>(path: &Path) -> Result<(Vec<usize>, Vec<T>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
