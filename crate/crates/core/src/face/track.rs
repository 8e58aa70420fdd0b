use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{schema, Error, Result};

/// Control-rig coefficients `b(t, i)`: one row per frame, one column per
/// control, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigCoefficientTrack {
    pub fps: f64,
    pub controls: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Per-frame audio feature vectors at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureTrack {
    pub fps: f64,
    pub frames: Vec<Vec<f64>>,
}

/// How the numbers of a track file are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    /// Inside the JSON header as `values`.
    #[default]
    Inline,
    /// In a CSV file next to the header, one frame per row.
    Csv,
    /// In a raw little-endian f32 file next to the header.
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackDocument {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
    fps: f64,
    dimension: usize,
    frames: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    names: Vec<String>,
    /// Body file relative to the header; `.csv` or `.f32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Vec<f64>>>,
}

fn check_rows(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || dim == 0 {
        return Err(Error::Invalid(format!("{what} needs at least one frame with one value")));
    }
    if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(Error::Dimension(format!("{what} frame {t} has {} values, expected {dim}", r.len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!("{what} contains non-finite values")));
    }
    Ok(dim)
}

fn check_fps(fps: f64) -> Result<()> {
    if fps > 0.0 && fps.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("frame rate {fps} must be positive")))
    }
}

impl RigCoefficientTrack {
    pub fn new(fps: f64, controls: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_fps(fps)?;
        let n = check_rows(&values, "coefficient track")?;
        if controls.len() != n {
            return Err(Error::Dimension(format!("{} control names for {n} controls", controls.len())));
        }
        if let Some(x) = values.iter().flatten().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Invalid(format!("coefficient {x} outside [0, 1]")));
        }
        Ok(Self { fps, controls, values })
    }

    pub fn frame_count(&self) -> usize {
        self.values.len()
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.fps
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (doc, rows) = read_track(path, schema::COEFF_TRACK)?;
        Self::new(doc.fps, doc.names, rows).map_err(|e| Error::schema(path, e))
    }

    pub fn write(&self, path: &Path, body: Body, provenance: Option<serde_json::Value>) -> Result<()> {
        write_track(path, schema::COEFF_TRACK, provenance, self.fps, &self.controls, &self.values, body)
    }
}

impl AudioFeatureTrack {
    pub fn new(fps: f64, frames: Vec<Vec<f64>>) -> Result<Self> {
        check_fps(fps)?;
        check_rows(&frames, "feature track")?;
        Ok(Self { fps, frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn dimension(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (doc, rows) = read_track(path, schema::FEATURE_TRACK)?;
        Self::new(doc.fps, rows).map_err(|e| Error::schema(path, e))
    }

    pub fn write(&self, path: &Path, body: Body, provenance: Option<serde_json::Value>) -> Result<()> {
        write_track(path, schema::FEATURE_TRACK, provenance, self.fps, &[], &self.frames, body)
    }
}

fn read_track(path: &Path, expected: &str) -> Result<(TrackDocument, Vec<Vec<f64>>)> {
    let mut doc: TrackDocument = schema::read_json(path, expected)?;
    let rows = match (doc.values.take(), &doc.data) {
        (Some(v), None) => v,
        (None, Some(data)) => {
            let body = path.parent().unwrap_or(Path::new(".")).join(data);
            if body.extension().is_some_and(|e| e == "f32") {
                read_f32(&body, doc.dimension)?
            } else {
                read_csv(&body)?
            }
        }
        _ => return Err(Error::schema(path, "exactly one of `values` and `data` must be present")),
    };
    if rows.len() != doc.frames || rows.iter().any(|r| r.len() != doc.dimension) {
        return Err(Error::schema(
            path,
            format!("header declares {}x{} values, body does not match", doc.frames, doc.dimension),
        ));
    }
    if !doc.names.is_empty() && doc.names.len() != doc.dimension {
        return Err(Error::schema(path, format!("{} names for dimension {}", doc.names.len(), doc.dimension)));
    }
    Ok((doc, rows))
}

fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::schema(path, e))?;
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::schema(path, e))?;
            rec.iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::schema(path, format!("row {} is not numeric", i + 1)))
        })
        .collect()
}

fn read_f32(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if dim == 0 || bytes.len() % (4 * dim) != 0 {
        return Err(Error::schema(path, format!("{} bytes is not a whole number of {dim}-value rows", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(values.chunks(dim).map(<[f64]>::to_vec).collect())
}

fn write_track(
    path: &Path,
    schema: &str,
    provenance: Option<serde_json::Value>,
    fps: f64,
    names: &[String],
    rows: &[Vec<f64>],
    body: Body,
) -> Result<()> {
    let dimension = rows.first().map_or(0, Vec::len);
    let mut doc = TrackDocument {
        schema: schema.into(),
        provenance,
        fps,
        dimension,
        frames: rows.len(),
        names: names.to_vec(),
        data: None,
        values: None,
    };
    match body {
        Body::Inline => doc.values = Some(rows.to_vec()),
        Body::Csv => {
            let file = path.with_extension("csv");
            let header: Vec<String> = if names.is_empty() {
                (0..dimension).map(|k| format!("f{k}")).collect()
            } else {
                names.to_vec()
            };
            let mut text = header.join(",");
            text.push('\n');
            for r in rows {
                text.push_str(&r.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
                text.push('\n');
            }
            std::fs::write(&file, text).map_err(|e| Error::io(&file, e))?;
            doc.data = Some(PathBuf::from(file.file_name().expect("file name")));
        }
        Body::F32 => {
            let file = path.with_extension("f32");
            let bytes: Vec<u8> = rows.iter().flatten().flat_map(|&x| (x as f32).to_le_bytes()).collect();
            std::fs::write(&file, bytes).map_err(|e| Error::io(&file, e))?;
            doc.data = Some(PathBuf::from(file.file_name().expect("file name")));
        }
    }
    schema::write_json(path, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track() -> RigCoefficientTrack {
        RigCoefficientTrack::new(
            50.0,
            vec!["jaw_open".into(), "lip_pucker".into()],
            vec![vec![0.0, 0.25], vec![1.0, 0.125], vec![0.5, 0.75]],
        )
        .unwrap()
    }

    #[test]
    fn round_trips_every_body() {
        let dir = tempfile::tempdir().unwrap();
        for body in [Body::Inline, Body::Csv, Body::F32] {
            let p = dir.path().join(format!("{body:?}.json"));
            track().write(&p, body, None).unwrap();
            assert_eq!(RigCoefficientTrack::read(&p).unwrap(), track());
        }
    }

    #[test]
    fn rejects_out_of_range_and_ragged() {
        assert!(RigCoefficientTrack::new(50.0, vec!["a".into()], vec![vec![1.5]]).is_err());
        assert!(AudioFeatureTrack::new(50.0, vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(AudioFeatureTrack::new(0.0, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn wrong_schema_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        track().write(&p, Body::Inline, None).unwrap();
        assert!(matches!(AudioFeatureTrack::read(&p), Err(Error::Schema { .. })));
    }
}
