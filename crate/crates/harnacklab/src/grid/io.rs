//! FLD1 field files.
//!
//! Format: one ASCII header line `FLD1 <dim> <n> <role>\n`, then `n^dim`
//! little-endian IEEE f64 values in row-major order (last axis fastest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, Role, ScalarField};
use crate::error::{Error, Result};

pub fn save_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "FLD1 {} {} {}\n", grid.dim(), grid.n(), field.role().as_str())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        let read = r.read(&mut byte)?;
        if read == 0 {
            return Err(Error::BadMagic);
        }
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 64 {
            return Err(Error::BadMagic);
        }
    }
    let header = String::from_utf8(header).map_err(|_| Error::BadMagic)?;
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some("FLD1") {
        return Err(Error::BadMagic);
    }
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::BadHeader("missing dim".into()))?;
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::BadHeader("missing n".into()))?;
    let role = Role::parse(parts.next().ok_or_else(|| Error::BadHeader("missing role".into()))?)?;
    if parts.next().is_some() {
        return Err(Error::BadHeader("trailing header fields".into()));
    }
    let grid = Grid::build(dim, n)?;
    let expected = grid.node_count() * 8;
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::SizeMismatch { expected, got: payload.len() });
    }
    let values: Vec<f64> =
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::new(grid, values, role)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn roundtrip_is_bit_identical() {
        let g = build_grid(2, 17).unwrap();
        let f = ScalarField::from_fn(g, Role::State, |x| (x[1] * 0.37 + 1e-7).max(0.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        save_field(&f, &path).unwrap();
        let g2 = load_field(&path).unwrap();
        assert_eq!(f.values(), g2.values());
        assert_eq!(f.role(), g2.role());
        assert_eq!(f.grid(), g2.grid());
    }

    #[test]
    fn truncated_file_is_size_mismatch() {
        let g = build_grid(2, 9).unwrap();
        let f = ScalarField::constant(g, Role::Auxiliary, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        save_field(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_field(&path), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        std::fs::write(&path, b"FLDX 2 9 state\n").unwrap();
        assert!(matches!(load_field(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let g = build_grid(2, 9).unwrap();
        let f = ScalarField::constant(g, Role::Auxiliary, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        save_field(&f, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let off = bytes.len() - 8;
        bytes[off..].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_field(&path), Err(Error::NonFinite(_))));
    }
}
