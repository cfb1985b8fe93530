//! FTKR: a small named-tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"FTKR"
//! version  u32            (currently 1)
//! count    u32
//! count x {
//!   name_len u32, name [u8; name_len] (UTF-8)
//!   rank     u32, dims [u32; rank]
//!   dtype    u8              (1 = f32, 2 = f64)
//!   payload  prod(dims) values, row-major, little-endian
//! }
//! ```
//!
//! Names are unique within a file. `f32` payloads are widened to `f64` on read.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::numeric::Mat;

pub const MAGIC: [u8; 4] = *b"FTKR";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FtkrError {
    #[error("bad magic {0:?}, expected \"FTKR\"")]
    BadMagic([u8; 4]),
    #[error("unsupported FTKR version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file while reading {0}")]
    Truncated(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("{0} trailing bytes after last tensor")]
    TrailingBytes(usize),
    #[error("tensor {name:?}: {reason}")]
    InvalidTensor { name: String, reason: String },
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Named row-major tensor. Values are held as `f64`; `dtype` is the on-disk width.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub dtype: Dtype,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self, FtkrError> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(FtkrError::InvalidTensor {
                name,
                reason: format!("dims {dims:?} need {expected} values, got {}", data.len()),
            });
        }
        Ok(Self { name, dims, dtype: Dtype::F64, data })
    }

    pub fn from_mat(name: impl Into<String>, m: &Mat) -> Self {
        Self { name: name.into(), dims: vec![m.rows(), m.cols()], dtype: Dtype::F64, data: m.as_slice().to_vec() }
    }

    pub fn from_vec(name: impl Into<String>, v: &[f64]) -> Self {
        Self { name: name.into(), dims: vec![v.len()], dtype: Dtype::F64, data: v.to_vec() }
    }

    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }

    pub fn to_mat(&self) -> Result<Mat, FtkrError> {
        if self.dims.len() != 2 {
            return Err(FtkrError::InvalidTensor { name: self.name.clone(), reason: format!("expected rank 2, got {:?}", self.dims) });
        }
        Mat::from_vec(self.dims[0], self.dims[1], self.data.clone())
            .map_err(|e| FtkrError::InvalidTensor { name: self.name.clone(), reason: e.to_string() })
    }
}

pub fn encode(tensors: &[Tensor]) -> Result<Vec<u8>, FtkrError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_len(tensors.len(), "tensor count")?.to_le_bytes());
    for t in tensors {
        if !seen.insert(t.name.as_str()) {
            return Err(FtkrError::DuplicateName(t.name.clone()));
        }
        let expected: usize = t.dims.iter().product();
        if expected != t.data.len() {
            return Err(FtkrError::InvalidTensor { name: t.name.clone(), reason: "payload does not match dims".into() });
        }
        out.extend_from_slice(&u32_len(t.name.len(), "name length")?.to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&u32_len(t.dims.len(), "rank")?.to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&u32_len(d, "dimension")?.to_le_bytes());
        }
        out.push(t.dtype.tag());
        match t.dtype {
            Dtype::F64 => t.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F32 => t.data.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

fn u32_len(v: usize, what: &str) -> Result<u32, FtkrError> {
    u32::try_from(v).map_err(|_| FtkrError::InvalidTensor { name: String::new(), reason: format!("{what} {v} exceeds u32") })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FtkrError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| FtkrError::Truncated(what.to_string()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, FtkrError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Tensor>, FtkrError> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FtkrError::BadMagic(magic));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(FtkrError::UnsupportedVersion(version));
    }
    let count = cur.u32("tensor count")? as usize;
    let mut seen = HashSet::new();
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "name")?).map_err(|_| FtkrError::InvalidName)?.to_string();
        if !seen.insert(name.clone()) {
            return Err(FtkrError::DuplicateName(name));
        }
        let rank = cur.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            dims.push(cur.u32("dims")? as usize);
        }
        let dtype = match cur.take(1, "dtype")?[0] {
            1 => Dtype::F32,
            2 => Dtype::F64,
            other => return Err(FtkrError::UnknownDtype(other)),
        };
        let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes = count.and_then(|c| c.checked_mul(dtype.width()));
        let bytes = bytes.ok_or_else(|| FtkrError::Truncated(format!("payload of {name}")))?;
        let payload = cur.take(bytes, &format!("payload of {name}"))?;
        let data = match dtype {
            Dtype::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            Dtype::F32 => payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        };
        tensors.push(Tensor { name, dims, dtype, data });
    }
    if cur.pos != buf.len() {
        return Err(FtkrError::TrailingBytes(buf.len() - cur.pos));
    }
    Ok(tensors)
}

pub fn write_ftkr(tensors: &[Tensor], path: impl AsRef<Path>) -> Result<(), FtkrError> {
    let bytes = encode(tensors)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_ftkr(path: impl AsRef<Path>) -> Result<Vec<Tensor>, FtkrError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

/// Looks a tensor up by name.
pub fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor, FtkrError> {
    tensors.iter().find(|t| t.name == name).ok_or_else(|| FtkrError::MissingTensor(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor {
        Tensor::new("w", vec![3, 4], (0..12).map(|i| i as f64 * 0.1 - 0.35).collect()).unwrap()
    }

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let t = sample();
        let back = decode(&encode(std::slice::from_ref(&t)).unwrap()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].dims, t.dims);
        for (a, b) in back[0].data.iter().zip(&t.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn f32_is_widened() {
        let t = Tensor::new("h", vec![2], vec![0.5, 1.0 / 3.0]).unwrap().with_dtype(Dtype::F32);
        let back = decode(&encode(&[t]).unwrap()).unwrap();
        assert_eq!(back[0].dtype, Dtype::F32);
        assert_eq!(back[0].data, vec![0.5, (1.0f32 / 3.0) as f64]);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&[sample()]).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(FtkrError::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn short_payload_is_truncation() {
        let bytes = encode(&[sample()]).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(FtkrError::Truncated(_))));
    }

    #[test]
    fn duplicate_names() {
        assert!(matches!(encode(&[sample(), sample()]), Err(FtkrError::DuplicateName(_))));
        // hand-assemble a file holding the same tensor twice
        let one = encode(&[sample()]).unwrap();
        let mut two = one.clone();
        two[8..12].copy_from_slice(&2u32.to_le_bytes());
        two.extend_from_slice(&one[12..]);
        assert!(matches!(decode(&two), Err(FtkrError::DuplicateName(_))));
    }

    #[test]
    fn unknown_dtype_and_trailing_bytes() {
        let mut bytes = encode(&[sample()]).unwrap();
        let tag_pos = 12 + 4 + 1 + 4 + 8;
        assert_eq!(bytes[tag_pos], 2);
        bytes[tag_pos] = 9;
        assert!(matches!(decode(&bytes), Err(FtkrError::UnknownDtype(9))));

        let mut extra = encode(&[sample()]).unwrap();
        extra.push(0);
        assert!(matches!(decode(&extra), Err(FtkrError::TrailingBytes(1))));
    }
}
