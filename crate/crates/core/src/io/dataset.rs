use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{EmbeddedDataset, Sample};
use crate::error::{Error, ParseError, Result};
use crate::scalar::Scalar;

/// Leading bytes of the compact binary dataset format.
pub const BINARY_MAGIC: &[u8; 5] = b"CPLX1";

/// Reads a dataset, choosing the binary reader when the file starts with
/// [`BINARY_MAGIC`] and the CSV reader otherwise.
pub fn read_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddedDataset<T>> {
    let mut file = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_dataset_binary(bytes.as_slice())
    } else {
        read_dataset_csv(bytes.as_slice())
    }
}

fn parse_value<T: Scalar>(raw: &str, line: u64, column: &str) -> Result<T, ParseError> {
    let v: f64 = raw.trim().parse().map_err(|_| ParseError::InvalidNumber {
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(ParseError::NonFinite {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        });
    }
    let t = T::c(v);
    if !t.is_finite() {
        return Err(ParseError::NonFinite {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        });
    }
    Ok(t)
}

/// Parses the CSV dataset format: header `id,label,e0,…,e{d-1}`, one row per
/// sample.
pub fn read_dataset_csv<T: Scalar, R: Read>(reader: R) -> Result<EmbeddedDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
        None => {
            return Err(ParseError::MalformedHeader {
                line: 1,
                reason: "file is empty".into(),
            }
            .into())
        }
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.len() < 3 || fields[0] != "id" || fields[1] != "label" {
        return Err(ParseError::MalformedHeader {
            line: header_line,
            reason: "expected `id,label,e0,...`".into(),
        }
        .into());
    }
    for (k, f) in fields[2..].iter().enumerate() {
        if *f != format!("e{k}") {
            return Err(ParseError::MalformedHeader {
                line: header_line,
                reason: format!("column {} should be `e{k}`, found `{f}`", k + 3),
            }
            .into());
        }
    }
    let columns: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
    let width = columns.len();

    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != width {
            return Err(ParseError::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            }
            .into());
        }
        let id = rec[0].trim();
        let label = rec[1].trim();
        if id.is_empty() {
            return Err(ParseError::EmptyField { line, field: "id".into() }.into());
        }
        if label.is_empty() {
            return Err(ParseError::EmptyField { line, field: "label".into() }.into());
        }
        if !seen.insert(id.to_string()) {
            return Err(ParseError::DuplicateId { line, id: id.to_string() }.into());
        }
        let vector = (2..width)
            .map(|k| parse_value(&rec[k], line, &columns[k]))
            .collect::<Result<Vec<T>, ParseError>>()?;
        samples.push(Sample::new(id, label, vector));
    }
    EmbeddedDataset::new(samples)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => ParseError::Malformed {
            line,
            reason: format!("{other:?}"),
        }
        .into(),
    }
}

/// Writes the CSV dataset format. Values use the shortest representation
/// that parses back to the same number.
pub fn write_dataset_csv<T: Scalar, W: Write>(dataset: &EmbeddedDataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dataset.dim()).map(|k| format!("e{k}")));
    w.write_record(&header).map_err(csv_write_error)?;
    let mut row = Vec::with_capacity(header.len());
    for s in dataset.samples() {
        row.clear();
        row.push(s.id.clone());
        row.push(s.label.clone());
        row.extend(s.vector.iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn read_u32(buf: &[u8], at: &mut usize) -> Result<u32> {
    let bytes = buf
        .get(*at..*at + 4)
        .ok_or_else(|| binary_error(*at, "truncated length field"))?;
    *at += 4;
    Ok(u32::from_le_bytes(bytes.try_into().expect("4 bytes")))
}

fn read_str(buf: &[u8], at: &mut usize) -> Result<String> {
    let len = read_u32(buf, at)? as usize;
    let bytes = buf
        .get(*at..*at + len)
        .ok_or_else(|| binary_error(*at, "truncated string"))?;
    *at += len;
    String::from_utf8(bytes.to_vec()).map_err(|_| binary_error(*at, "string is not UTF-8"))
}

/// Binary errors report the byte offset in the `line` slot.
fn binary_error(offset: usize, reason: &str) -> Error {
    ParseError::Malformed {
        line: offset as u64,
        reason: format!("binary dataset: {reason} (byte offset {offset})"),
    }
    .into()
}

/// Parses the binary format: magic `CPLX1`, `u32` N, `u32` d, N
/// length-prefixed ids, N length-prefixed labels, then N·d `f32` values,
/// all little-endian.
pub fn read_dataset_binary<T: Scalar, R: Read>(mut reader: R) -> Result<EmbeddedDataset<T>> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if !buf.starts_with(BINARY_MAGIC) {
        return Err(binary_error(0, "missing CPLX1 magic"));
    }
    let mut at = BINARY_MAGIC.len();
    let n = read_u32(&buf, &mut at)? as usize;
    let d = read_u32(&buf, &mut at)? as usize;
    let ids = (0..n).map(|_| read_str(&buf, &mut at)).collect::<Result<Vec<_>>>()?;
    let labels = (0..n).map(|_| read_str(&buf, &mut at)).collect::<Result<Vec<_>>>()?;
    let need = n * d * 4;
    let body = buf
        .get(at..at + need)
        .ok_or_else(|| binary_error(at, "truncated value matrix"))?;
    if buf.len() != at + need {
        return Err(binary_error(at + need, "trailing bytes"));
    }
    let mut samples = Vec::with_capacity(n);
    for (i, (id, label)) in ids.into_iter().zip(labels).enumerate() {
        let vector = body[i * d * 4..(i + 1) * d * 4]
            .chunks_exact(4)
            .map(|c| T::c(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        samples.push(Sample::new(id, label, vector));
    }
    EmbeddedDataset::new(samples)
}

/// Writes the binary format. Values are narrowed to `f32`.
pub fn write_dataset_binary<T: Scalar, W: Write>(dataset: &EmbeddedDataset<T>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let count = |v: usize| -> Result<[u8; 4]> {
        u32::try_from(v)
            .map(u32::to_le_bytes)
            .map_err(|_| Error::InvalidArgument(format!("{v} exceeds u32 range")))
    };
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&count(dataset.len())?)?;
    w.write_all(&count(dataset.dim())?)?;
    for s in dataset.samples() {
        w.write_all(&count(s.id.len())?)?;
        w.write_all(s.id.as_bytes())?;
    }
    for s in dataset.samples() {
        w.write_all(&count(s.label.len())?)?;
        w.write_all(s.label.as_bytes())?;
    }
    for s in dataset.samples() {
        for v in &s.vector {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
