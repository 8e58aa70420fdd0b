use image::{DynamicImage, GenericImageView, ImageBuffer, Pixel};

use super::model::ColorCorrector;
use crate::{par, Error, Result};

/// Share of the relit image in [`blend_relit`] when none is configured.
pub const DEFAULT_BLEND_ALPHA: f64 = 0.7;

trait Channel: Copy + Send + Sync {
    fn to_unit(self) -> f64;
    fn from_unit(x: f64) -> Self;
}

impl Channel for u8 {
    fn to_unit(self) -> f64 {
        self as f64 / 255.0
    }
    fn from_unit(x: f64) -> Self {
        (x.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

impl Channel for u16 {
    fn to_unit(self) -> f64 {
        self as f64 / 65535.0
    }
    fn from_unit(x: f64) -> Self {
        (x.clamp(0.0, 1.0) * 65535.0).round() as u16
    }
}

impl Channel for f32 {
    fn to_unit(self) -> f64 {
        self as f64
    }
    fn from_unit(x: f64) -> Self {
        x as f32
    }
}

/// Rewrites the RGB channels of every pixel in place, one row per work item.
fn map_rgb<P>(buf: &mut ImageBuffer<P, Vec<P::Subpixel>>, f: &(dyn Fn(usize, [f64; 3]) -> [f64; 3] + Sync))
where
    P: Pixel,
    P::Subpixel: Channel,
{
    let ch = P::CHANNEL_COUNT as usize;
    let width = buf.width() as usize;
    let row_len = (width * ch).max(1);
    par::for_each_chunk_mut(buf.as_mut(), row_len, |row, data| {
        for (x, px) in data.chunks_exact_mut(ch).enumerate() {
            let out = f(row * width + x, [px[0].to_unit(), px[1].to_unit(), px[2].to_unit()]);
            for c in 0..3 {
                px[c] = P::Subpixel::from_unit(out[c]);
            }
        }
    });
}

fn with_rgb(image: &mut DynamicImage, f: &(dyn Fn(usize, [f64; 3]) -> [f64; 3] + Sync)) -> Result<()> {
    match image {
        DynamicImage::ImageRgb8(b) => map_rgb(b, f),
        DynamicImage::ImageRgba8(b) => map_rgb(b, f),
        DynamicImage::ImageRgb16(b) => map_rgb(b, f),
        DynamicImage::ImageRgba16(b) => map_rgb(b, f),
        DynamicImage::ImageRgb32F(b) => map_rgb(b, f),
        DynamicImage::ImageRgba32F(b) => map_rgb(b, f),
        other => {
            return Err(Error::Format(format!(
                "expected an RGB or RGBA image, got {:?}",
                other.color()
            )))
        }
    }
    Ok(())
}

/// Applies the corrector to every pixel. Alpha, size and sample format are
/// preserved.
pub fn correct_texture(model: &ColorCorrector, texture: &DynamicImage) -> Result<DynamicImage> {
    let mut out = texture.clone();
    with_rgb(&mut out, &|_, c| model.correct(c))?;
    Ok(out)
}

/// `alpha * relit + (1 - alpha) * original` on the RGB channels. The output
/// keeps the original's format and alpha channel.
pub fn blend_relit(original: &DynamicImage, relit: &DynamicImage, alpha: f64) -> Result<DynamicImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("blend alpha {alpha} outside [0, 1]")));
    }
    if original.dimensions() != relit.dimensions() {
        return Err(Error::Format(format!(
            "image sizes differ: {:?} vs {:?}",
            original.dimensions(),
            relit.dimensions()
        )));
    }
    let relit = relit.to_rgb32f();
    let relit = relit.as_raw();
    let mut out = original.clone();
    with_rgb(&mut out, &|i, c| {
        let r = &relit[3 * i..3 * i + 3];
        [0, 1, 2].map(|k| alpha * r[k] as f64 + (1.0 - alpha) * c[k])
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Rgb, RgbImage, Rgba, RgbaImage};

    fn uniform(w: u32, h: u32, v: u8) -> DynamicImage {
        DynamicImage::ImageRgb8(RgbImage::from_pixel(w, h, Rgb([v; 3])))
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let black = uniform(4, 3, 0);
        let white = uniform(4, 3, 255);
        assert_eq!(blend_relit(&black, &white, 0.0).unwrap(), black);
        assert_eq!(blend_relit(&black, &white, 1.0).unwrap(), white);
        let mid = blend_relit(&black, &white, 0.5).unwrap().to_rgb32f();
        for p in mid.pixels() {
            for c in p.0 {
                assert!((c - 0.5).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
        let mid = blend_relit(&black.to_rgb32f().into(), &white.to_rgb32f().into(), 0.5).unwrap();
        assert!(mid.to_rgb32f().pixels().all(|p| p.0 == [0.5; 3]));
    }

    #[test]
    fn blend_rejects_size_mismatch_and_bad_alpha() {
        assert!(matches!(blend_relit(&uniform(2, 2, 0), &uniform(3, 2, 0), 0.5), Err(Error::Format(_))));
        assert!(blend_relit(&uniform(2, 2, 0), &uniform(2, 2, 0), 1.5).is_err());
    }

    #[test]
    fn blend_keeps_original_alpha() {
        let orig = DynamicImage::ImageRgba8(RgbaImage::from_pixel(2, 2, Rgba([10, 20, 30, 77])));
        let relit = DynamicImage::ImageRgba8(RgbaImage::from_pixel(2, 2, Rgba([200, 200, 200, 255])));
        let out = blend_relit(&orig, &relit, 0.7).unwrap().to_rgba8();
        assert!(out.pixels().all(|p| p.0[3] == 77));
    }

    #[test]
    fn grayscale_is_a_format_error() {
        let mut img = DynamicImage::ImageLuma8(GrayImage::new(2, 2));
        assert!(matches!(with_rgb(&mut img, &|_, c| c), Err(Error::Format(_))));
    }

    #[test]
    fn channel_quantization_round_trips() {
        for v in 0..=255u8 {
            assert_eq!(u8::from_unit(v.to_unit()), v);
        }
    }
}
