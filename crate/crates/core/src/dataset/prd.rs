//! "PRD1" binary arrays.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"PRD1" | rank: u32 | dims: rank x u32 | dtype: u32 | row-major data
//! ```
//!
//! dtype 0 is `f32`, dtype 1 is `u16`. Checksums are SHA-256 of the whole
//! file, hex encoded.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PRD1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U16,
}

impl Dtype {
    pub fn code(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::U16 => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::U16),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrdData {
    F32(Vec<f32>),
    U16(Vec<u16>),
}

impl PrdData {
    pub fn dtype(&self) -> Dtype {
        match self {
            PrdData::F32(_) => Dtype::F32,
            PrdData::U16(_) => Dtype::U16,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PrdData::F32(v) => v.len(),
            PrdData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            PrdData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            PrdData::U16(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrdArray {
    pub shape: Vec<usize>,
    pub data: PrdData,
}

/// Byte length of the header for an array of rank `rank`.
pub fn header_len(rank: usize) -> usize {
    4 + 4 * (rank + 2)
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

/// Streaming writer; the element count is checked on [`PrdWriter::finish`].
pub struct PrdWriter {
    path: PathBuf,
    out: BufWriter<File>,
    hasher: Sha256,
    dtype: Dtype,
    expected: usize,
    written: usize,
}

impl PrdWriter {
    pub fn create(path: &Path, shape: &[usize], dtype: Dtype) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_owned(),
            out: BufWriter::new(file),
            hasher: Sha256::new(),
            dtype,
            expected: shape.iter().product(),
            written: 0,
        };
        let mut header = Vec::with_capacity(header_len(shape.len()));
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            let d = u32::try_from(d).map_err(|_| format_err(path, "dimension exceeds u32"))?;
            header.extend_from_slice(&d.to_le_bytes());
        }
        header.extend_from_slice(&dtype.code().to_le_bytes());
        w.put(&header)?;
        Ok(w)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.hasher.update(bytes);
        self.out.write_all(bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_f32(&mut self, values: &[f32]) -> Result<()> {
        if self.dtype != Dtype::F32 {
            return Err(format_err(&self.path, "writing f32 into a u16 array"));
        }
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.written += values.len();
        self.put(&bytes)
    }

    pub fn write_u16(&mut self, values: &[u16]) -> Result<()> {
        if self.dtype != Dtype::U16 {
            return Err(format_err(&self.path, "writing u16 into an f32 array"));
        }
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.written += values.len();
        self.put(&bytes)
    }

    /// Flushes the file and returns its checksum.
    pub fn finish(mut self) -> Result<String> {
        if self.written != self.expected {
            return Err(format_err(
                &self.path,
                format!("wrote {} elements, header declares {}", self.written, self.expected),
            ));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(hex::encode(self.hasher.finalize()))
    }
}

pub fn write_prd(path: &Path, array: &PrdArray) -> Result<String> {
    let mut w = PrdWriter::create(path, &array.shape, array.data.dtype())?;
    match &array.data {
        PrdData::F32(v) => w.write_f32(v)?,
        PrdData::U16(v) => w.write_u16(v)?,
    }
    w.finish()
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| format_err(path, "truncated header"))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads the header and leaves `r` at the first data byte.
fn read_header(r: &mut impl Read, path: &Path) -> Result<(Vec<usize>, Dtype)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| format_err(path, "truncated header"))?;
    if &magic != MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let rank = read_u32(r, path)? as usize;
    if rank == 0 || rank > 8 {
        return Err(format_err(path, format!("unsupported rank {rank}")));
    }
    let shape = (0..rank)
        .map(|_| read_u32(r, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let code = read_u32(r, path)?;
    let dtype = Dtype::from_code(code).ok_or_else(|| format_err(path, format!("unknown dtype code {code}")))?;
    Ok((shape, dtype))
}

pub fn read_header_only(path: &Path) -> Result<(Vec<usize>, Dtype)> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_header(&mut f, path)
}

fn decode(bytes: &[u8], dtype: Dtype) -> PrdData {
    match dtype {
        Dtype::F32 => PrdData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        Dtype::U16 => PrdData::U16(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
    }
}

pub fn read_prd(path: &Path) -> Result<PrdArray> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let (shape, dtype) = read_header(&mut f, path)?;
    let count: usize = shape.iter().product();
    let mut bytes = Vec::with_capacity(count * dtype.size());
    f.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != count * dtype.size() {
        return Err(format_err(
            path,
            format!("expected {} data bytes, found {}", count * dtype.size(), bytes.len()),
        ));
    }
    Ok(PrdArray {
        shape,
        data: decode(&bytes, dtype),
    })
}

/// Reads item `index` along the leading axis of a rank >= 2 array.
pub fn read_prd_item(path: &Path, index: usize) -> Result<PrdArray> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let (shape, dtype) = read_header(&mut f, path)?;
    if shape.len() < 2 || index >= shape[0] {
        return Err(format_err(path, format!("item {index} out of range for shape {shape:?}")));
    }
    let item: usize = shape[1..].iter().product();
    let offset = header_len(shape.len()) + index * item * dtype.size();
    f.seek(SeekFrom::Start(offset as u64)).map_err(|e| Error::io(path, e))?;
    let mut bytes = vec![0u8; item * dtype.size()];
    f.read_exact(&mut bytes).map_err(|_| format_err(path, "truncated data"))?;
    Ok(PrdArray {
        shape: shape[1..].to_vec(),
        data: decode(&bytes, dtype),
    })
}

pub fn file_checksum(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
