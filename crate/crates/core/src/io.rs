//! File formats.
//!
//! EPSR binary layout (all integers little-endian):
//!
//! | offset | size        | content                         |
//! |--------|-------------|---------------------------------|
//! | 0      | 4           | magic `45 50 53 52` (`"EPSR"`)  |
//! | 4      | 1           | version `0x01`                  |
//! | 5      | 8           | rows (u64)                      |
//! | 13     | 8           | cols (u64)                      |
//! | 21     | 8·rows·cols | binary64 entries, row-major     |
//!
//! Metadata sidecars are `key = value` lines in insertion order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const EPSR_MAGIC: [u8; 4] = *b"EPSR";
pub const EPSR_VERSION: u8 = 0x01;
pub const EPSR_HEADER_LEN: usize = 21;

pub fn encode_matrix(x: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(EPSR_HEADER_LEN + 8 * x.as_slice().len());
    buf.extend_from_slice(&EPSR_MAGIC);
    buf.push(EPSR_VERSION);
    buf.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    for v in x.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "file ends inside the magic bytes"));
    }
    if bytes[..4] != EPSR_MAGIC {
        return Err(Error::format(0, format!("bad magic {:02x?}", &bytes[..4])));
    }
    if bytes.len() < 5 {
        return Err(Error::format(4, "missing version byte"));
    }
    if bytes[4] != EPSR_VERSION {
        return Err(Error::format(4, format!("unsupported version {:#04x}", bytes[4])));
    }
    if bytes.len() < EPSR_HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            "file ends inside the dimension header",
        ));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(Error::format(5, format!("zero dimension {rows}x{cols}")));
    }
    let payload = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .filter(|&p| p <= (usize::MAX - EPSR_HEADER_LEN) as u64)
        .ok_or_else(|| Error::format(5, format!("dimensions {rows}x{cols} overflow")))?;
    let expected = EPSR_HEADER_LEN as u64 + payload;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::format(
            actual,
            format!("truncated payload: expected {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(Error::format(expected, "trailing bytes after payload"));
    }
    let mut data = Vec::with_capacity((rows * cols) as usize);
    for (idx, chunk) in bytes[EPSR_HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                (EPSR_HEADER_LEN + 8 * idx) as u64,
                format!("non-finite entry {v}"),
            ));
        }
        data.push(v);
    }
    DenseMatrix::from_vec(rows as usize, cols as usize, data)
}

pub fn write_matrix(x: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(x)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

/// CSV text with 17 significant digits per entry.
pub fn matrix_to_csv(x: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        let line: Vec<String> = x.row(i).iter().map(|v| format!("{:.16e}", v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(x: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(x)).map_err(|e| Error::io(path, e))
}

/// Ordered `key = value` sidecar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Metadata::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<metadata>".into(),
                line: lineno + 1,
                message: "expected `key = value`".into(),
            })?;
            meta.insert(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_vec(2, 3, vec![1.0, -0.0, 1e-300, f64::MAX, 0.1, -7.25]).unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = encode_matrix(&sample());
        assert_eq!(&bytes[..5], &[0x45, 0x50, 0x53, 0x52, 0x01]);
        assert_eq!(&bytes[5..13], &2u64.to_le_bytes());
        assert_eq!(&bytes[13..21], &3u64.to_le_bytes());
        assert_eq!(bytes.len(), 21 + 6 * 8);
        assert_eq!(&bytes[21..29], &1.0f64.to_le_bytes());
    }

    #[test]
    fn round_trip_is_bitwise() {
        let x = sample();
        let back = decode_matrix(&encode_matrix(&x)).unwrap();
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x), bits(&back));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_matrix(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode_matrix(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload_names_offset() {
        let bytes = encode_matrix(&sample());
        let cut = &bytes[..bytes.len() - 3];
        match decode_matrix(cut) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, cut.len() as u64);
                assert!(message.contains("truncated"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(decode_matrix(&bytes[..10]), Err(Error::Format { .. })));
    }

    #[test]
    fn dimension_overflow() {
        let mut bytes = encode_matrix(&sample());
        bytes[5..13].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_matrix(&bytes), Err(Error::Format { offset: 5, .. })));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = encode_matrix(&sample());
        bytes[29..37].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_matrix(&bytes), Err(Error::Format { offset: 29, .. })));
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let x = DenseMatrix::from_vec(1, 2, vec![0.1, -2.0]).unwrap();
        let csv = matrix_to_csv(&x);
        assert_eq!(csv, "1.0000000000000001e-1,-2.0000000000000000e0\n");
        let parsed: Vec<f64> = csv.trim().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, -2.0]);
    }

    #[test]
    fn metadata_round_trip() {
        let mut m = Metadata::new();
        m.insert("K", 22).insert("error_bound", 1.5e-9).insert("K", 23);
        let back = Metadata::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("K"), Some("23"));
    }
}
