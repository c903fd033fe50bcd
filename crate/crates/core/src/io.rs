//! File formats.
//!
//! Cubes use the "cube v1" layout: an ASCII header line
//! `CUBE1 <rows> <cols> <bands>\n` followed by `rows * cols * bands`
//! little-endian `f64` values, band-major then row-major. Matrices are
//! headerless CSV, one line per matrix row.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};
use crate::types::ImageCube;

const MAGIC: &str = "CUBE1";

pub fn write_cube(cube: &ImageCube, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * cube.data().len());
    write!(buf, "{MAGIC} {} {} {}\n", cube.rows(), cube.cols(), cube.bands())?;
    for v in cube.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<ImageCube> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    if header.last() != Some(&b'\n') {
        return Err(FuvarError::MalformedHeader("missing header terminator".into()));
    }
    let header = std::str::from_utf8(&header[..header.len() - 1])
        .map_err(|_| FuvarError::MalformedHeader("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != MAGIC {
        return Err(FuvarError::MalformedHeader(format!("unexpected header {header:?}")));
    }
    let mut dims = [0usize; 3];
    for (d, f) in dims.iter_mut().zip(&fields[1..]) {
        *d = f
            .parse()
            .map_err(|_| FuvarError::MalformedHeader(format!("bad dimension {f:?}")))?;
    }
    let [rows, cols, bands] = dims;
    if rows == 0 || cols == 0 || bands == 0 {
        return Err(FuvarError::MalformedHeader(format!("zero dimension in {header:?}")));
    }

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let expected = rows * cols * bands;
    if payload.len() % 8 != 0 || payload.len() / 8 != expected {
        return Err(FuvarError::PayloadMismatch { expected, found: payload.len() / 8 });
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ImageCube::new(rows, cols, bands, data)
}

pub fn write_matrix_csv(matrix: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in matrix.row_iter() {
        // `Display` for f64 prints the shortest string that round-trips.
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for record in reader.records() {
        let record = record?;
        match ncols {
            None => ncols = Some(record.len()),
            Some(n) if n != record.len() => {
                return Err(FuvarError::Csv(format!(
                    "row {nrows} has {} fields, expected {n}",
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| FuvarError::Csv(format!("row {nrows}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(FuvarError::NonFinite(format!("row {nrows}: {field}")));
            }
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| FuvarError::Csv("empty matrix file".into()))?;
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}
