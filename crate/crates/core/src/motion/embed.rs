use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{schema, Error, Result};

/// Precomputed audio embeddings `A_1..A_n`, one per window.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioEmbeddingSequence {
    pub dimension: usize,
    /// Window length in seconds, when known.
    pub window_seconds: Option<f64>,
    pub rows: Vec<Vec<f64>>,
}

/// JSON header describing a raw little-endian f32 body file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    schema: String,
    dimension: usize,
    count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window_seconds: Option<f64>,
    /// Body path, relative to the header file.
    data: PathBuf,
}

impl AudioEmbeddingSequence {
    pub fn new(rows: Vec<Vec<f64>>, window_seconds: Option<f64>) -> Result<Self> {
        let dimension = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || dimension == 0 {
            return Err(Error::Invalid("embedding sequence needs at least one non-empty row".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dimension) {
            return Err(Error::Dimension(format!("embedding row {i} has {} values, expected {dimension}", r.len())));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("embedding contains non-finite values".into()));
        }
        Ok(Self {
            dimension,
            window_seconds,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads a JSON header with a raw f32 body (`.json`) or a CSV file with
    /// one embedding per row (anything else).
    pub fn read(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            Self::read_raw(path)
        } else {
            Self::read_csv(path)
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::schema(path, e))?;
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::schema(path, e))?;
            let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(_) if i == 0 => continue,
                Err(_) => return Err(Error::schema(path, format!("row {} is not numeric", i + 1))),
            }
        }
        Self::new(rows, None).map_err(|e| Error::schema(path, e))
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let header: RawHeader = schema::read_json(path, schema::EMBEDDINGS)?;
        let body_path = path.parent().unwrap_or(Path::new(".")).join(&header.data);
        let bytes = std::fs::read(&body_path).map_err(|e| Error::io(&body_path, e))?;
        let expected = header.count * header.dimension * 4;
        if bytes.len() != expected {
            return Err(Error::schema(
                &body_path,
                format!("expected {expected} bytes for {}x{} f32 values, found {}", header.count, header.dimension, bytes.len()),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let rows = values.chunks(header.dimension.max(1)).map(<[f64]>::to_vec).collect();
        Self::new(rows, header.window_seconds).map_err(|e| Error::schema(path, e))
    }

    /// CSV with `#` comment lines for `header`.
    pub fn write_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut text = String::new();
        for line in header {
            text.push_str(&format!("# {line}\n"));
        }
        for r in &self.rows {
            text.push_str(&r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// JSON header at `path` plus a `.f32` body next to it. Values are
    /// narrowed to f32.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let body = path.with_extension("f32");
        let header = RawHeader {
            schema: schema::EMBEDDINGS.into(),
            dimension: self.dimension,
            count: self.rows.len(),
            window_seconds: self.window_seconds,
            data: PathBuf::from(body.file_name().expect("file name")),
        };
        let bytes: Vec<u8> = self.rows.iter().flatten().flat_map(|&x| (x as f32).to_le_bytes()).collect();
        std::fs::write(&body, bytes).map_err(|e| Error::io(&body, e))?;
        schema::write_json(path, &header)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> AudioEmbeddingSequence {
        AudioEmbeddingSequence::new(vec![vec![0.5, -1.25, 3.0], vec![0.0, 2.0, -0.125]], Some(2.5)).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        seq().write_csv(&p, &["hello".into()]).unwrap();
        let back = AudioEmbeddingSequence::read(&p).unwrap();
        assert_eq!(back.rows, seq().rows);
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        seq().write_raw(&p).unwrap();
        assert_eq!(AudioEmbeddingSequence::read(&p).unwrap(), seq());
    }

    #[test]
    fn ragged_rows_fail() {
        assert!(AudioEmbeddingSequence::new(vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
    }
}
