use std::path::Path;

use serde::{Deserialize, Serialize};

use super::track::RigCoefficientTrack;
use crate::{schema, Error, Result};

/// Pre-authored coefficient clip triggered by a token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterjectionTemplate {
    pub token: String,
    /// Frames × controls, at the template set's frame rate.
    pub values: Vec<Vec<f64>>,
    /// Crossfade lengths in seconds.
    pub blend_in: f64,
    pub blend_out: f64,
}

impl InterjectionTemplate {
    fn validate(&self, fps: f64, controls: usize) -> Result<()> {
        let t = &self.token;
        if self.values.is_empty() {
            return Err(Error::Invalid(format!("template `{t}` has no frames")));
        }
        if let Some(r) = self.values.iter().find(|r| r.len() != controls) {
            return Err(Error::Dimension(format!("template `{t}` has {} controls, expected {controls}", r.len())));
        }
        if let Some(x) = self.values.iter().flatten().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Invalid(format!("template `{t}` value {x} outside [0, 1]")));
        }
        let span = self.values.len() as f64 / fps;
        for (label, b) in [("blend-in", self.blend_in), ("blend-out", self.blend_out)] {
            if !(b >= 0.0 && b < span) {
                return Err(Error::Invalid(format!(
                    "template `{t}` {label} {b} s must be non-negative and shorter than the template ({span} s)"
                )));
            }
        }
        Ok(())
    }

    /// Crossfade weight of template frame `k`.
    fn weight(&self, k: usize, fps: f64) -> f64 {
        let len = self.values.len();
        let bi = (self.blend_in * fps).round() as usize;
        let bo = (self.blend_out * fps).round() as usize;
        let up = if bi == 0 { 1.0 } else { k as f64 / bi as f64 };
        let down = if bo == 0 { 1.0 } else { (len - 1 - k) as f64 / bo as f64 };
        up.min(down).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub fps: f64,
    pub controls: Vec<String>,
    pub templates: Vec<InterjectionTemplate>,
}

impl TemplateSet {
    pub fn new(fps: f64, controls: Vec<String>, templates: Vec<InterjectionTemplate>) -> Result<Self> {
        let set = Self {
            schema: schema::TEMPLATES.into(),
            provenance: None,
            fps,
            controls,
            templates,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Invalid(format!("frame rate {} must be positive", self.fps)));
        }
        for t in &self.templates {
            t.validate(self.fps, self.controls.len())?;
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&InterjectionTemplate> {
        self.templates.iter().find(|t| t.token == token)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let set: Self = schema::read_json(path, schema::TEMPLATES)?;
        set.validate().map_err(|e| Error::schema(path, e))?;
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        schema::write_json(path, self)
    }
}

/// A timestamped token; serialized as `["token", seconds]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(String, f64)", into = "(String, f64)")]
pub struct InterjectionEvent {
    pub token: String,
    pub time: f64,
}

impl From<(String, f64)> for InterjectionEvent {
    fn from((token, time): (String, f64)) -> Self {
        Self { token, time }
    }
}

impl From<InterjectionEvent> for (String, f64) {
    fn from(e: InterjectionEvent) -> Self {
        (e.token, e.time)
    }
}

pub fn read_events(path: &Path) -> Result<Vec<InterjectionEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(path, e))
}

/// An event that had no matching template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEvent {
    pub token: String,
    pub time: f64,
    pub reason: String,
}

/// Crossfades each matched template into the track starting at its
/// event's frame, ramping linearly over the blend windows. Events are
/// applied in time order on top of earlier ones, so where spans overlap
/// the later event wins. Templates running past the end are cut off.
pub fn apply_interjections(
    track: &RigCoefficientTrack,
    events: &[InterjectionEvent],
    templates: &TemplateSet,
) -> Result<(RigCoefficientTrack, Vec<SkippedEvent>)> {
    if (templates.fps - track.fps).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "templates are at {} Hz, track is at {} Hz",
            templates.fps, track.fps
        )));
    }
    if templates.controls.len() != track.control_count() {
        return Err(Error::Dimension(format!(
            "templates drive {} controls, track has {}",
            templates.controls.len(),
            track.control_count()
        )));
    }
    let duration = track.duration();
    if let Some(e) = events.iter().find(|e| !(0.0..=duration).contains(&e.time)) {
        return Err(Error::Invalid(format!(
            "event `{}` at {} s lies outside the track (0 to {duration} s)",
            e.token, e.time
        )));
    }
    let mut order: Vec<&InterjectionEvent> = events.iter().collect();
    order.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut out = track.clone();
    let mut skipped = Vec::new();
    for e in order {
        let Some(tpl) = templates.get(&e.token) else {
            log::warn!("no template for interjection `{}` at {} s; skipped", e.token, e.time);
            skipped.push(SkippedEvent {
                token: e.token.clone(),
                time: e.time,
                reason: "no template for token".into(),
            });
            continue;
        };
        let start = (e.time * track.fps).round() as usize;
        for (k, row) in tpl.values.iter().enumerate() {
            let Some(frame) = out.values.get_mut(start + k) else { break };
            let w = tpl.weight(k, track.fps);
            for (b, t) in frame.iter_mut().zip(row) {
                *b = ((1.0 - w) * *b + w * t).clamp(0.0, 1.0);
            }
        }
    }
    Ok((out, skipped))
}
