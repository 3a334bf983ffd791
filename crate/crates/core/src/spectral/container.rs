//! Flat binary container for sampled arrays.
//!
//! Layout (little-endian): magic `DLABARR\0`, `u32` version, `u32` rank, `rank × u64`
//! dims, `u8` dtype code, `u64` metadata length, metadata as UTF-8 JSON, then the
//! samples in row-major order.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde_json::Value;

use super::{SpaceTimeField, SpatialField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DLABARR\0";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    Complex128 = 1,
    Float64 = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Complex(v) => v.len(),
            ArrayData::Real(v) => v.len(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::Complex(_) => DType::Complex128,
            ArrayData::Real(_) => DType::Float64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub dims: Vec<usize>,
    pub metadata: Value,
    pub data: ArrayData,
}

impl Container {
    pub fn new(dims: Vec<usize>, metadata: Value, data: ArrayData) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::argument(format!(
                "dims {dims:?} describe {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Container { dims, metadata, data })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&[self.data.dtype() as u8])?;
        let meta = serde_json::to_vec(&self.metadata)?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        match &self.data {
            ArrayData::Complex(v) => {
                for c in v {
                    buf.extend_from_slice(&c.re.to_le_bytes());
                    buf.extend_from_slice(&c.im.to_le_bytes());
                }
            }
            ArrayData::Real(v) => {
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::argument("not an array container"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::argument(format!("unsupported container version {version}")));
        }
        let rank = read_u32(&mut r)? as usize;
        let dims = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let meta_len = read_u64(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let metadata: Value = serde_json::from_slice(&meta)?;
        let count: usize = dims.iter().product();
        let data = match code[0] {
            1 => {
                let mut raw = vec![0u8; count * 16];
                r.read_exact(&mut raw)?;
                ArrayData::Complex(
                    raw.chunks_exact(16)
                        .map(|c| Complex64::new(f64_at(&c[..8]), f64_at(&c[8..])))
                        .collect(),
                )
            }
            2 => {
                let mut raw = vec![0u8; count * 8];
                r.read_exact(&mut raw)?;
                ArrayData::Real(raw.chunks_exact(8).map(f64_at).collect())
            }
            other => return Err(Error::argument(format!("unknown dtype code {other}"))),
        };
        Container::new(dims, metadata, data)
    }
}

fn f64_at(bytes: &[u8]) -> f64 {
    f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl SpatialField {
    pub fn to_container(&self) -> Container {
        let dims = vec![self.lattice.points; self.lattice.n];
        let metadata = serde_json::json!({ "kind": "spatial-field", "lattice": self.lattice });
        Container {
            dims,
            metadata,
            data: ArrayData::Complex(self.data.clone()),
        }
    }
}

impl SpaceTimeField {
    pub fn to_container(&self) -> Container {
        let mut dims = vec![self.grid.time_samples];
        dims.extend(std::iter::repeat_n(self.lattice.points, self.lattice.n));
        let metadata = serde_json::json!({ "kind": "space-time-field", "grid": self.grid });
        Container {
            dims,
            metadata,
            data: ArrayData::Complex(self.samples.clone()),
        }
    }
}
