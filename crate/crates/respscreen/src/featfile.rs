//! Feature files: one row per recording.
//!
//! Two interchangeable encodings of the same table. The text form is
//! delimiter-separated with a header (id, modality, layout_id, then one
//! column per dimension). The binary form is compact: magic `RSFB`,
//! a format version, the dimension count and layout identifier, then
//! length-prefixed rows with little-endian f64 values. Both round-trip
//! every value bit-exactly; `load` sniffs the encoding from the magic.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// First bytes of the binary encoding.
pub const BINARY_MAGIC: &[u8; 4] = b"RSFB";

/// Bumped on any incompatible change to either encoding.
pub const FORMAT_VERSION: u16 = 1;

/// One recording's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub modality: String,
    pub values: Vec<f64>,
}

/// A set of feature rows under one layout. Every row has the same
/// dimension and the (id, modality) pairs are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub layout_id: String,
    pub dimension: usize,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(layout_id: impl Into<String>, dimension: usize) -> Self {
        FeatureTable {
            layout_id: layout_id.into(),
            dimension,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.dimension {
            return Err(Error::Config(format!(
                "row {} has {} values, table dimension is {}",
                row.id,
                row.values.len(),
                self.dimension
            )));
        }
        if self
            .rows
            .iter()
            .any(|r| r.id == row.id && r.modality == row.modality)
        {
            return Err(Error::Config(format!(
                "duplicate feature row for {} / {}",
                row.id, row.modality
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Values for the given ids in their order; every id must be
    /// present exactly once.
    pub fn select(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let row = self
                .rows
                .iter()
                .find(|r| &r.id == id)
                .ok_or_else(|| Error::Dataset(format!("no feature row for id {id}")))?;
            out.push(row.values.clone());
        }
        Ok(out)
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.clone()).collect()
    }
}

pub fn save_text(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec![
        "id".to_string(),
        "modality".to_string(),
        "layout_id".to_string(),
    ];
    for d in 0..table.dimension {
        header.push(format!("v{d}"));
    }
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in &table.rows {
        let mut record = vec![row.id.clone(), row.modality.clone(), table.layout_id.clone()];
        // Shortest round-trip formatting keeps text files bit-exact.
        record.extend(row.values.iter().map(|v| format!("{v}")));
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_text(path: &Path) -> Result<FeatureTable> {
    let fail = |reason: String| Error::FeatureFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "modality" || &header[2] != "layout_id"
    {
        return Err(fail("header must start with id, modality, layout_id".into()));
    }
    let dimension = header.len() - 3;
    let mut table: Option<FeatureTable> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(fail(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                record.len(),
                header.len()
            )));
        }
        let layout_id = record[2].to_string();
        let table = table.get_or_insert_with(|| FeatureTable::new(layout_id.clone(), dimension));
        if table.layout_id != layout_id {
            return Err(fail(format!(
                "row {} declares layout {layout_id}, file started with {}",
                i + 1,
                table.layout_id
            )));
        }
        let mut values = Vec::with_capacity(dimension);
        for field in record.iter().skip(3) {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(format!("row {}: unparseable value {field:?}", i + 1)))?;
            values.push(v);
        }
        table
            .push(FeatureRow {
                id: record[0].to_string(),
                modality: record[1].to_string(),
                values,
            })
            .map_err(|e| fail(e.to_string()))?;
    }
    table.ok_or_else(|| fail("no feature rows".into()))
}

pub fn save_binary(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(table.dimension as u32).to_le_bytes());
    write_str(&mut buf, &table.layout_id)?;
    buf.extend_from_slice(&(table.rows.len() as u64).to_le_bytes());
    for row in &table.rows {
        write_str(&mut buf, &row.id)?;
        write_str(&mut buf, &row.modality)?;
        for v in &row.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_binary(path: &Path) -> Result<FeatureTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_binary(&bytes, path)
}

/// Loads either encoding, telling them apart by the magic bytes.
pub fn load(path: &Path) -> Result<FeatureTable> {
    let mut magic = [0u8; 4];
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    drop(file);
    if n == 4 && &magic == BINARY_MAGIC {
        load_binary(path)
    } else {
        load_text(path)
    }
}

fn parse_binary(bytes: &[u8], path: &Path) -> Result<FeatureTable> {
    let fail = |reason: &str| Error::FeatureFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        let end = cursor
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| fail("truncated"))?;
        let slice = &bytes[*cursor..end];
        *cursor = end;
        Ok(slice)
    };
    if take(&mut cursor, 4)? != BINARY_MAGIC {
        return Err(fail("wrong magic bytes"));
    }
    let version = u16::from_le_bytes(take(&mut cursor, 2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(fail(&format!(
            "format version {version} is not the supported {FORMAT_VERSION}"
        )));
    }
    let dimension = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let layout_id = read_str(bytes, &mut cursor, path)?;
    let n_rows = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let mut table = FeatureTable::new(layout_id, dimension);
    for _ in 0..n_rows {
        let id = read_str(bytes, &mut cursor, path)?;
        let modality = read_str(bytes, &mut cursor, path)?;
        let raw = take(&mut cursor, dimension * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        table
            .push(FeatureRow {
                id,
                modality,
                values,
            })
            .map_err(|e| fail(&e.to_string()))?;
    }
    if cursor != bytes.len() {
        return Err(fail("trailing bytes after the declared rows"));
    }
    Ok(table)
}

fn write_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len: u16 = s
        .len()
        .try_into()
        .map_err(|_| Error::Config(format!("string too long for feature file: {s:.60}")))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn read_str(bytes: &[u8], cursor: &mut usize, path: &Path) -> Result<String> {
    let fail = |reason: &str| Error::FeatureFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if *cursor + 2 > bytes.len() {
        return Err(fail("truncated"));
    }
    let len = u16::from_le_bytes(bytes[*cursor..*cursor + 2].try_into().unwrap()) as usize;
    *cursor += 2;
    if *cursor + len > bytes.len() {
        return Err(fail("truncated"));
    }
    let s = std::str::from_utf8(&bytes[*cursor..*cursor + len])
        .map_err(|_| fail("string field is not utf-8"))?
        .to_string();
    *cursor += len;
    Ok(s)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::FeatureFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_table() -> FeatureTable {
        let mut table = FeatureTable::new("llf-test-3", 3);
        // Values chosen to stress formatting: subnormals, negatives,
        // long mantissas.
        table
            .push(FeatureRow {
                id: "p001".into(),
                modality: "cough".into(),
                values: vec![0.1 + 0.2, -1.0e-308, 7668.0],
            })
            .unwrap();
        table
            .push(FeatureRow {
                id: "p002".into(),
                modality: "cough".into(),
                values: vec![std::f64::consts::PI, 0.0, -0.0],
            })
            .unwrap();
        table
    }

    fn assert_bit_equal(a: &FeatureTable, b: &FeatureTable) {
        assert_eq!(a.layout_id, b.layout_id);
        assert_eq!(a.dimension, b.dimension);
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.modality, y.modality);
            for (u, v) in x.values.iter().zip(&y.values) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let table = sample_table();
        save_text(&table, &path).unwrap();
        assert_bit_equal(&load_text(&path).unwrap(), &table);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.bin");
        let table = sample_table();
        save_binary(&table, &path).unwrap();
        assert_bit_equal(&load_binary(&path).unwrap(), &table);
    }

    #[test]
    fn load_sniffs_the_encoding() {
        let dir = tempdir().unwrap();
        let table = sample_table();
        let text = dir.path().join("t.features");
        let binary = dir.path().join("b.features");
        save_text(&table, &text).unwrap();
        save_binary(&table, &binary).unwrap();
        assert_bit_equal(&load(&text).unwrap(), &table);
        assert_bit_equal(&load(&binary).unwrap(), &table);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.bin");
        save_binary(&sample_table(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load_binary(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn layout_disagreement_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(
            &path,
            "id,modality,layout_id,v0\na,cough,layout-one,1.5\nb,cough,layout-two,2.5\n",
        )
        .unwrap();
        assert!(load_text(&path).is_err());
    }

    #[test]
    fn duplicate_rows_and_bad_dimensions_are_rejected() {
        let mut table = sample_table();
        assert!(table
            .push(FeatureRow {
                id: "p001".into(),
                modality: "cough".into(),
                values: vec![1.0, 2.0, 3.0],
            })
            .is_err());
        assert!(table
            .push(FeatureRow {
                id: "p003".into(),
                modality: "cough".into(),
                values: vec![1.0],
            })
            .is_err());
        // Same id under a different modality is a distinct row.
        assert!(table
            .push(FeatureRow {
                id: "p001".into(),
                modality: "speech".into(),
                values: vec![1.0, 2.0, 3.0],
            })
            .is_ok());
    }

    #[test]
    fn select_returns_rows_in_request_order() {
        let table = sample_table();
        let picked = table
            .select(&["p002".to_string(), "p001".to_string()])
            .unwrap();
        assert_eq!(picked[0][0], std::f64::consts::PI);
        assert_eq!(picked[1][2], 7668.0);
        assert!(table.select(&["absent".to_string()]).is_err());
    }
}
