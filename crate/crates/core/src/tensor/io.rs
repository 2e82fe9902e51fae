//! ADVT binary tensor files and named-record archives.
//!
//! Tensor layout (all integers little-endian):
//!
//! ```text
//! "ADVT" | version u16 | ndim u32 | dims u32[ndim] | dtype u8 (0=f32, 1=f64) | payload
//! ```
//!
//! The payload is row-major. An archive is a list of named records:
//!
//! ```text
//! "ADVA" | version u16 | count u32 | record*
//! record = name_len u32 | name utf-8 | kind u8 (0=tensor, 1=text) | body
//! body   = ADVT tensor (kind 0) | len u32, utf-8 bytes (kind 1)
//! ```

use std::io::{self, Read, Write};

use super::Tensor;

pub const ADVT_MAGIC: &[u8; 4] = b"ADVT";
pub const ARCHIVE_MAGIC: &[u8; 4] = b"ADVA";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("unknown dtype tag {0}")]
    DType(u8),
    #[error("unknown record kind {0}")]
    RecordKind(u8),
    #[error("malformed content: {0}")]
    Malformed(String),
    #[error("record {0:?} not found")]
    Missing(String),
}

fn read_u16(r: &mut impl Read) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8(r: &mut impl Read) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn expect_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<(), FormatError> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != magic {
        return Err(FormatError::BadMagic {
            found,
            expected: *magic,
        });
    }
    match read_u16(r)? {
        FORMAT_VERSION => Ok(()),
        v => Err(FormatError::Version(v)),
    }
}

/// Writes one tensor. With [`DType::F32`] values are rounded to single
/// precision.
pub fn write_tensor(w: &mut impl Write, t: &Tensor, dtype: DType) -> io::Result<()> {
    w.write_all(ADVT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(t.ndim() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&[dtype as u8])?;
    let mut buf = Vec::with_capacity(t.numel() * 8);
    match dtype {
        DType::F32 => t.data().iter().for_each(|&v| buf.extend((v as f32).to_le_bytes())),
        DType::F64 => t.data().iter().for_each(|&v| buf.extend(v.to_le_bytes())),
    }
    w.write_all(&buf)
}

pub fn read_tensor(r: &mut impl Read) -> Result<Tensor, FormatError> {
    read_tensor_with_dtype(r).map(|(t, _)| t)
}

fn read_tensor_with_dtype(r: &mut impl Read) -> Result<(Tensor, DType), FormatError> {
    expect_header(r, ADVT_MAGIC)?;
    let ndim = read_u32(r)? as usize;
    let shape = (0..ndim)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<io::Result<Vec<_>>>()?;
    let n: usize = shape.iter().product();
    let dtype = read_u8(r)?;
    let data = match dtype {
        0 => {
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)?;
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        1 => {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes)?;
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        tag => return Err(FormatError::DType(tag)),
    };
    let dtype = if dtype == 0 { DType::F32 } else { DType::F64 };
    let t = Tensor::new(shape, data).map_err(|e| FormatError::Malformed(e.to_string()))?;
    Ok((t, dtype))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchiveRecord {
    Tensor(Tensor, DType),
    Text(String),
}

/// Ordered named records; names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    records: Vec<(String, ArchiveRecord)>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, record: ArchiveRecord) -> Result<(), FormatError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(FormatError::Malformed(format!("duplicate record {name:?}")));
        }
        self.records.push((name, record));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArchiveRecord> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, FormatError> {
        match self.get(name) {
            Some(ArchiveRecord::Tensor(t, _)) => Ok(t),
            _ => Err(FormatError::Missing(name.to_string())),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str, FormatError> {
        match self.get(name) {
            Some(ArchiveRecord::Text(s)) => Ok(s),
            _ => Err(FormatError::Missing(name.to_string())),
        }
    }

    pub fn records(&self) -> &[(String, ArchiveRecord)] {
        &self.records
    }
}

pub fn write_archive(w: &mut impl Write, archive: &Archive) -> io::Result<()> {
    w.write_all(ARCHIVE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(archive.records.len() as u32).to_le_bytes())?;
    for (name, record) in &archive.records {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        match record {
            ArchiveRecord::Tensor(t, dtype) => {
                w.write_all(&[0])?;
                write_tensor(w, t, *dtype)?;
            }
            ArchiveRecord::Text(s) => {
                w.write_all(&[1])?;
                w.write_all(&(s.len() as u32).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_string(r: &mut impl Read) -> Result<String, FormatError> {
    let len = read_u32(r)? as usize;
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| FormatError::Malformed(e.to_string()))
}

pub fn read_archive(r: &mut impl Read) -> Result<Archive, FormatError> {
    expect_header(r, ARCHIVE_MAGIC)?;
    let count = read_u32(r)?;
    let mut archive = Archive::new();
    for _ in 0..count {
        let name = read_string(r)?;
        let record = match read_u8(r)? {
            0 => {
                let (t, dtype) = read_tensor_with_dtype(r)?;
                ArchiveRecord::Tensor(t, dtype)
            }
            1 => ArchiveRecord::Text(read_string(r)?),
            k => return Err(FormatError::RecordKind(k)),
        };
        archive.push(name, record)?;
    }
    Ok(archive)
}
