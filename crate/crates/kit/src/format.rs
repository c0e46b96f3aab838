//! Binary CubeEdge dataset file.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "CUBEEDGE"
//! version      u32
//! n_edges      u32
//! n_train      u64
//! n_test       u64
//! sigma        f64
//! shear_range  f64
//! seed         u64
//! train_noise  u8
//! records      n_train + n_test times:
//!     label     u32
//!     vertices  (n_edges + 1) × 3 f64
//!     features  (n_edges − 1) × 4 f64
//! ```
//!
//! Training records come first. Files are read whole and checked against the
//! header before any sample is built, so a bad file never yields a partial
//! dataset.

use std::fs;
use std::io::{self, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use qpu_core::cubeedge::{Dataset, GenConfig, Sample};
use qpu_core::Quaternion;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"CUBEEDGE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8 + 8 + 8 + 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a CubeEdge dataset (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {found} (expected {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated dataset: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("dataset has {0} unexpected trailing bytes")]
    TrailingBytes(u64),
    #[error("invalid dataset header: {0}")]
    InvalidHeader(String),
    #[error("record {index}: label {label} out of range for {classes} classes")]
    BadLabel { index: usize, label: u32, classes: usize },
}

fn record_len(n_edges: usize) -> u64 {
    4 + 8 * ((n_edges as u64 + 1) * 3 + (n_edges as u64 - 1) * 4)
}

pub fn write_dataset<W: Write>(mut w: W, data: &Dataset) -> io::Result<()> {
    let c = &data.config;
    w.write_all(&MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u32::<LE>(c.n_edges as u32)?;
    w.write_u64::<LE>(data.train.len() as u64)?;
    w.write_u64::<LE>(data.test.len() as u64)?;
    w.write_f64::<LE>(c.sigma)?;
    w.write_f64::<LE>(c.shear_range)?;
    w.write_u64::<LE>(c.seed)?;
    w.write_u8(c.train_noise as u8)?;
    for s in data.train.iter().chain(&data.test) {
        w.write_u32::<LE>(s.label as u32)?;
        for v in &s.vertices {
            for x in v {
                w.write_f64::<LE>(*x)?;
            }
        }
        for q in &s.features {
            for x in q.to_array() {
                w.write_f64::<LE>(x)?;
            }
        }
    }
    w.flush()
}

fn header(r: &mut Cursor<&[u8]>) -> Result<(GenConfig, u64, u64), FormatError> {
    let len = r.get_ref().len() as u64;
    let short = |_| FormatError::Truncated { expected: HEADER_LEN as u64, found: len };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(short)?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { found: version });
    }
    let n_edges = r.read_u32::<LE>().map_err(short)? as usize;
    let n_train = r.read_u64::<LE>().map_err(short)?;
    let n_test = r.read_u64::<LE>().map_err(short)?;
    let sigma = r.read_f64::<LE>().map_err(short)?;
    let shear_range = r.read_f64::<LE>().map_err(short)?;
    let seed = r.read_u64::<LE>().map_err(short)?;
    let train_noise = match r.read_u8().map_err(short)? {
        0 => false,
        1 => true,
        x => return Err(FormatError::InvalidHeader(format!("train_noise flag {x}"))),
    };
    let config = GenConfig {
        n_edges,
        n_train: n_train as usize,
        n_test: n_test as usize,
        sigma,
        shear_range,
        seed,
        train_noise,
    };
    config.validate().map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    Ok((config, n_train, n_test))
}

fn record(r: &mut Cursor<&[u8]>, n_edges: usize, index: usize) -> Result<Sample, FormatError> {
    // Lengths were checked up front, so reads cannot run short.
    let f = |r: &mut Cursor<&[u8]>| r.read_f64::<LE>().expect("length checked");
    let label = r.read_u32::<LE>().expect("length checked");
    let classes = qpu_core::cubeedge::class_count(n_edges);
    if label as usize >= classes {
        return Err(FormatError::BadLabel { index, label, classes });
    }
    let vertices = (0..n_edges + 1).map(|_| [f(r), f(r), f(r)]).collect();
    let features = (0..n_edges - 1).map(|_| Quaternion::from_array([f(r), f(r), f(r), f(r)])).collect();
    Ok(Sample { label: label as usize, vertices, features })
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let mut r = Cursor::new(bytes);
    let (config, n_train, n_test) = header(&mut r)?;
    let expected = n_train
        .checked_add(n_test)
        .and_then(|n| n.checked_mul(record_len(config.n_edges)))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| FormatError::InvalidHeader("sample counts overflow".into()))?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(FormatError::Truncated { expected, found });
    }
    if found > expected {
        return Err(FormatError::TrailingBytes(found - expected));
    }
    let train = (0..n_train as usize).map(|i| record(&mut r, config.n_edges, i)).collect::<Result<_, _>>()?;
    let test = (0..n_test as usize)
        .map(|i| record(&mut r, config.n_edges, n_train as usize + i))
        .collect::<Result<_, _>>()?;
    Ok(Dataset { config, train, test })
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(io::BufWriter::new(file), data).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(read_dataset(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpu_core::cubeedge::generate_dataset;

    fn small() -> Dataset {
        generate_dataset(&GenConfig { n_train: 5, n_test: 4, sigma: 0.03, seed: 9, ..GenConfig::default() }).unwrap()
    }

    fn bytes(d: &Dataset) -> Vec<u8> {
        let mut out = Vec::new();
        write_dataset(&mut out, d).unwrap();
        out
    }

    #[test]
    fn round_trip() {
        let d = small();
        let b = bytes(&d);
        assert_eq!(b.len() as u64, HEADER_LEN as u64 + 9 * record_len(7));
        assert_eq!(read_dataset(&b).unwrap(), d);
    }

    #[test]
    fn bad_magic() {
        let mut b = bytes(&small());
        b[0] = b'X';
        assert!(matches!(read_dataset(&b), Err(FormatError::BadMagic)));
    }

    #[test]
    fn version_mismatch() {
        let mut b = bytes(&small());
        b[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(read_dataset(&b), Err(FormatError::UnsupportedVersion { found: 2 })));
    }

    #[test]
    fn truncation_anywhere() {
        let b = bytes(&small());
        for cut in [0, 5, 11, HEADER_LEN - 1, HEADER_LEN, b.len() - 1] {
            assert!(matches!(read_dataset(&b[..cut]), Err(FormatError::Truncated { .. })), "cut {cut}");
        }
    }

    #[test]
    fn trailing_bytes() {
        let mut b = bytes(&small());
        b.push(0);
        assert!(matches!(read_dataset(&b), Err(FormatError::TrailingBytes(1))));
    }

    #[test]
    fn corrupted_header_fields() {
        let mut b = bytes(&small());
        b[12..16].copy_from_slice(&1u32.to_le_bytes());
        assert!(matches!(read_dataset(&b), Err(FormatError::InvalidHeader(_))));
        let mut b = bytes(&small());
        b[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_dataset(&b).is_err());
    }

    #[test]
    fn label_out_of_range() {
        let mut b = bytes(&small());
        b[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&32u32.to_le_bytes());
        assert!(matches!(read_dataset(&b), Err(FormatError::BadLabel { index: 0, label: 32, .. })));
    }
}
