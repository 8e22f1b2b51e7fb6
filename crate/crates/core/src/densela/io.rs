//! Matrix files: CSV (one row per line) and a little-endian binary layout
//! `"RSIM" | rows: u64 | cols: u64 | rows·cols f64, row-major`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RSIM";

pub fn write_csv<W: Write>(a: &Matrix, mut w: W) -> Result<()> {
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: {:?}: {e}", lineno + 1, f.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV matrix".into()));
    }
    Matrix::from_rows(&rows)
}

pub fn write_binary<W: Write>(a: &Matrix, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.rows() as u64).to_le_bytes())?;
    w.write_all(&(a.cols() as u64).to_le_bytes())?;
    for x in a.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("missing RSIM magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse("dimension overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Parse(format!(
            "expected {} payload bytes for {rows}x{cols}, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Reads either format, sniffing the magic bytes.
pub fn load(path: impl AsRef<Path>) -> Result<Matrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    }
}

/// Writes CSV when the extension is `.csv`, binary otherwise.
pub fn save(a: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(a, &mut buf)?;
    } else {
        write_binary(a, &mut buf)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::rng::{gaussian_matrix, RngSeed};
    use proptest::prelude::*;

    #[test]
    fn binary_layout_is_exact() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_binary(&a, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"RSIM");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 2.0);
        assert_eq!(buf.len(), 20 + 24);
    }

    #[test]
    fn truncated_binary_rejected() {
        let mut buf = Vec::new();
        write_binary(&gaussian_matrix(2, 2, RngSeed(1)), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_binary(buf.as_slice()), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_rejects_garbage_and_ragged() {
        assert!(read_csv("1,2\n3,x\n".as_bytes()).is_err());
        assert!(read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_csv("".as_bytes()).is_err());
    }

    #[test]
    fn save_and_load_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let a = gaussian_matrix(4, 3, RngSeed(2));
        for name in ["a.csv", "a.bin"] {
            let p = dir.path().join(name);
            save(&a, &p).unwrap();
            assert_eq!(load(&p).unwrap(), a);
        }
    }

    proptest! {
        #[test]
        fn both_formats_round_trip_bit_exact(
            rows in 1usize..6, cols in 1usize..6,
            vals in proptest::collection::vec(-1e300f64..1e300, 36)
        ) {
            let a = Matrix::from_vec(rows, cols, vals[..rows * cols].to_vec()).unwrap();
            let mut bin = Vec::new();
            write_binary(&a, &mut bin).unwrap();
            prop_assert_eq!(read_binary(bin.as_slice()).unwrap(), a.clone());
            let mut csv = Vec::new();
            write_csv(&a, &mut csv).unwrap();
            prop_assert_eq!(read_csv(csv.as_slice()).unwrap(), a);
        }
    }
}
