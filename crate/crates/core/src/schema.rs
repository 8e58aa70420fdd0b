//! Versioned JSON document helpers shared by every file format.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub const LANDMARKS: &str = "rigforge.landmarks/v1";
pub const REGION_MASK: &str = "rigforge.region-mask/v1";
pub const CORRESPONDENCE: &str = "rigforge.correspondence/v1";
pub const SHAPE_BASIS: &str = "rigforge.shape-basis/v1";
pub const RIG: &str = "rigforge.rig/v1";
pub const CALIBRATION: &str = "rigforge.calibration/v1";
pub const COLOR_MODEL: &str = "rigforge.color-model/v1";
pub const CLIP_LIBRARY: &str = "rigforge.clip-library/v1";
pub const EMBEDDINGS: &str = "rigforge.embeddings/v1";
pub const MOTION_TRACK: &str = "rigforge.motion-track/v1";
pub const FEATURE_TRACK: &str = "rigforge.feature-track/v1";
pub const COEFF_TRACK: &str = "rigforge.coefficient-track/v1";
pub const TEMPLATES: &str = "rigforge.templates/v1";
pub const FACE_MODEL: &str = "rigforge.face-model/v1";

/// Reads a JSON document and checks its `schema` tag.
pub fn read_json<T: DeserializeOwned>(path: &Path, expected_schema: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::schema(path, e))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == expected_schema => {}
        Some(s) => {
            return Err(Error::schema(
                path,
                format!("expected schema `{expected_schema}`, found `{s}`"),
            ))
        }
        None => return Err(Error::schema(path, "missing `schema` field")),
    }
    serde_json::from_value(value).map_err(|e| Error::schema(path, e))
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
