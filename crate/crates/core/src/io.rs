//! Grayscale image files (PGM and PNG) and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageEncoder, ImageReader};

use crate::image::ScalarImage;
use crate::{Error, Result};

/// Read an 8- or 16-bit grayscale PGM (P2/P5) or PNG. Intensities are divided
/// by the largest representable value of the sample type.
pub fn load_image(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)?.with_guessed_format().map_err(Error::Io)?;
    let img = reader
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            return Err(Error::Format(format!(
                "{}: expected a grayscale image, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    ScalarImage::new(w, h, pixels)
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Encode as binary PGM with 8 or 16 bits per sample.
pub fn encode_pgm(img: &ScalarImage, bits: u8) -> Result<Vec<u8>> {
    let (w, h) = (img.width as u32, img.height as u32);
    let mut out = Vec::new();
    match bits {
        8 => {
            let buf: Vec<u8> = img.pixels.iter().map(|&v| quantize(v, 255.0) as u8).collect();
            PnmEncoder::new(&mut out)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(&buf, w, h, image::ExtendedColorType::L8)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        16 => {
            // The PNM encoder stops at 8 bits; 16-bit P5 is a header plus
            // big-endian samples.
            out.extend_from_slice(format!("P5\n{w} {h}\n65535\n").as_bytes());
            for &v in &img.pixels {
                out.extend_from_slice(&(quantize(v, 65535.0) as u16).to_be_bytes());
            }
            return Ok(out);
        }
        _ => return Err(Error::InvalidArgument(format!("bits must be 8 or 16, got {bits}"))),
    }
    Ok(out)
}

/// Encode as 8-bit grayscale PNG.
pub fn encode_png(img: &ScalarImage) -> Result<Vec<u8>> {
    let buf: Vec<u8> = img.pixels.iter().map(|&v| quantize(v, 255.0) as u8).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&buf, img.width as u32, img.height as u32, image::ExtendedColorType::L8)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out)
}

pub fn save_pgm(img: &ScalarImage, path: impl AsRef<Path>, bits: u8) -> Result<()> {
    write_atomic(path, &encode_pgm(img, bits)?)
}

pub fn save_png(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

/// Save by extension: `.png` or `.pgm` (8-bit).
pub fn save_image(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => save_png(img, path),
        Some("pgm") => save_pgm(img, path, 8),
        _ => Err(Error::Format(format!(
            "{}: unsupported output extension",
            path.display()
        ))),
    }
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
