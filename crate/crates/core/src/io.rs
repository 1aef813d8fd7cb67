//! On-disk formats: the ".dtns" binary tensor container and CSV matrices.
//!
//! A .dtns file is one JSON header line
//! `{"order":p,"dims":[…],"dtype":"f64","endianness":"little"}` followed by
//! the raw little-endian 8-byte floats in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

#[derive(Serialize, Deserialize)]
struct DtnsHeader {
    order: usize,
    dims: Vec<usize>,
    dtype: String,
    endianness: String,
}

pub fn write_dtns(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = DtnsHeader {
        order: t.order(),
        dims: t.dims().to_vec(),
        dtype: "f64".into(),
        endianness: "little".into(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dtns(path: &Path) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DtnsHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    if header.dtype != "f64" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    if header.endianness != "little" {
        return Err(Error::Format(format!(
            "unsupported endianness {}",
            header.endianness
        )));
    }
    if header.order != header.dims.len() {
        return Err(Error::Format(format!(
            "order {} does not match dims {:?}",
            header.order, header.dims
        )));
    }
    let count: usize = header.dims.iter().product();
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    let data: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::from_vec(&header.dims, data)
}

/// Matrices travel as order-2 tensors.
pub fn write_matrix_dtns(path: &Path, m: &Matrix) -> Result<()> {
    let t = DenseTensor::from_vec(&[m.rows(), m.cols()], m.data().to_vec())?;
    write_dtns(path, &t)
}

pub fn read_matrix_dtns(path: &Path) -> Result<Matrix> {
    let t = read_dtns(path)?;
    if t.order() != 2 {
        return Err(Error::Format(format!(
            "expected order-2 tensor, got order {}",
            t.order()
        )));
    }
    Matrix::from_vec(t.dims()[0], t.dims()[1], t.data().to_vec())
}

pub fn write_csv_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_matrix(path: &Path) -> Result<Matrix> {
    let r = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Format(format!("bad csv number: {e}")))?);
    }
    Matrix::from_rows(&rows)
}

/// Trace CSV with a header row: iter,objective,recon_error.
pub fn write_trace_csv(path: &Path, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,objective,recon_error")?;
    for (it, obj, rec) in rows {
        writeln!(w, "{it},{obj:.17e},{rec:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("tensordict-test-{}-{}", std::process::id(), name));
        p
    }

    #[test]
    fn dtns_roundtrip_bit_exact() {
        let t = DenseTensor::from_vec(
            &[2, 3],
            vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE, 1e300, -0.0],
        )
        .unwrap();
        let path = tmp("roundtrip.dtns");
        write_dtns(&path, &t).unwrap();
        let back = read_dtns(&path).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn dtns_rejects_bad_header() {
        let path = tmp("bad.dtns");
        std::fs::write(&path, b"{\"order\":1,\"dims\":[2],\"dtype\":\"f32\",\"endianness\":\"little\"}\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(read_dtns(&path).is_err());
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn csv_roundtrip() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 1e-10]]).unwrap();
        let path = tmp("m.csv");
        write_csv_matrix(&path, &m).unwrap();
        let back = read_csv_matrix(&path).unwrap();
        assert!(m.max_abs_diff(&back) == 0.0);
        std::fs::remove_file(path).ok();
    }
}
