//! Dense vector datasets as CSV text or raw little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::builder::VectorDataset;
use crate::error::{invalid, Error, Result};

/// On-disk layout of a vector dataset.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VectorFormat {
    /// One comma-separated row per item, no header.
    Csv,
    /// `n * dim` little-endian `f32` values, row-major, no header.
    RawF32 { n: usize, dim: usize },
}

pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<VectorDataset> {
    let file = File::open(path)?;
    match format {
        VectorFormat::Csv => read_csv(BufReader::new(file)),
        VectorFormat::RawF32 { n, dim } => read_raw(BufReader::new(file), n, dim),
    }
}

pub fn save_vectors(
    path: impl AsRef<Path>,
    data: &VectorDataset,
    format: VectorFormat,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        VectorFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut out);
            for i in 0..data.n_items() {
                // `{}` on f32 prints the shortest string that parses back exactly.
                w.write_record(data.row(i).iter().map(|x| x.to_string()))
                    .map_err(csv_error)?;
            }
            w.flush()?;
        }
        VectorFormat::RawF32 { n, dim } => {
            if n != data.n_items() || dim != data.dim() {
                return Err(invalid(format!(
                    "declared {n} x {dim} but the dataset is {} x {}",
                    data.n_items(),
                    data.dim()
                )));
            }
            for &x in data.as_slice() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Parses comma-separated rows; every row must have the width of the first.
pub fn read_csv<R: Read>(reader: R) -> Result<VectorDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut dim = None;
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {d} values, found {}", record.len()),
                });
            }
            Some(_) => {}
        }
        for field in record.iter() {
            let x: f32 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            values.push(x);
        }
        n += 1;
    }
    let dim = dim.ok_or_else(|| invalid("no rows"))?;
    VectorDataset::new(n, dim, values)
}

pub fn read_raw<R: Read>(mut reader: R, n: usize, dim: usize) -> Result<VectorDataset> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = n
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| invalid("size overflow"))?;
    if bytes.len() != expected {
        return Err(invalid(format!(
            "expected {expected} bytes for {n} x {dim} f32 values, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
        return Err(invalid(format!(
            "non-finite value at row {}",
            pos / dim.max(1)
        )));
    }
    VectorDataset::new(n, dim, values)
}
