use std::io::BufWriter;
use std::path::Path;

use image::DynamicImage;
use rigforge_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::Loaded;
use crate::error::CliError;

/// Stamp carried by every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, loaded: &Loaded) -> Self {
        Self {
            tool: "rigforge",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: loaded.hash.clone(),
            seed: loaded.seed,
        }
    }

    /// Stamp for runs without a config file, such as fixture generation.
    pub fn bare(command: &str, seed: u64) -> Self {
        use sha2::{Digest, Sha256};
        Self {
            tool: "rigforge",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: hex::encode(Sha256::digest(b"{}")),
            seed,
        }
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }

    /// Comment lines for text formats.
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("config sha256 {}", self.config_sha256),
            format!("seed {}", self.seed),
        ]
    }

    /// `value` with a `provenance` field added.
    pub fn stamp<T: Serialize>(&self, value: &T) -> serde_json::Value {
        let mut v = serde_json::to_value(value).expect("serializable report");
        match v.as_object_mut() {
            Some(map) => {
                map.insert("provenance".into(), self.json());
                v
            }
            None => json!({ "provenance": self.json(), "value": v }),
        }
    }

    pub fn write_report<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), CliError> {
        rigforge_core::schema::write_json(path, &self.stamp(value)).map_err(Into::into)
    }

    pub fn write_text(&self, path: &Path, body: &str) -> Result<(), CliError> {
        let mut text: String = self.header_lines().iter().map(|l| format!("# {l}\n")).collect();
        text.push_str(body);
        std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
    }

    /// PNG with the provenance JSON in a `tEXt` chunk. 8- and 16-bit RGB(A)
    /// keep their layout; anything else is written as 16-bit RGBA.
    pub fn write_png(&self, path: &Path, img: &DynamicImage) -> Result<(), CliError> {
        let (color, depth, data): (png::ColorType, png::BitDepth, Vec<u8>) = match img {
            DynamicImage::ImageRgb8(i) => (png::ColorType::Rgb, png::BitDepth::Eight, i.as_raw().clone()),
            DynamicImage::ImageRgba8(i) => (png::ColorType::Rgba, png::BitDepth::Eight, i.as_raw().clone()),
            DynamicImage::ImageRgb16(i) => (png::ColorType::Rgb, png::BitDepth::Sixteen, be_bytes(i.as_raw())),
            DynamicImage::ImageRgba16(i) => (png::ColorType::Rgba, png::BitDepth::Sixteen, be_bytes(i.as_raw())),
            other => (png::ColorType::Rgba, png::BitDepth::Sixteen, be_bytes(other.to_rgba16().as_raw())),
        };
        let fail = |e: png::EncodingError| Error::Format(format!("writing {}: {e}", path.display()));
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), img.width(), img.height());
        enc.set_color(color);
        enc.set_depth(depth);
        enc.add_text_chunk("rigforge".into(), self.json().to_string()).map_err(fail)?;
        let mut writer = enc.write_header().map_err(fail)?;
        writer.write_image_data(&data).map_err(fail)?;
        writer.finish().map_err(fail)?;
        Ok(())
    }
}

fn be_bytes(v: &[u16]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_be_bytes()).collect()
}

pub fn read_image(path: &Path) -> Result<DynamicImage, CliError> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)).into());
    }
    image::open(path).map_err(|e| Error::schema(path, e).into())
}
