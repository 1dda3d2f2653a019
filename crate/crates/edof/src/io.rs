//! PNG and PFM reading and writing.

use std::fs;
use std::path::Path;

use edof_core::ImageF;
use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use crate::error::{CliError, CliResult};

/// Reads a PNG as a 1-channel (gray) or 3-channel (colour) image in [0, 1].
/// Alpha is dropped.
pub fn read_png(path: &Path) -> CliResult<ImageF> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_)
    );
    let result = if gray {
        let data = img.to_luma32f().into_raw().into_iter().map(f64::from).collect();
        ImageF::from_data(h, w, 1, data)
    } else {
        let data = img.to_rgb32f().into_raw().into_iter().map(f64::from).collect();
        ImageF::from_data(h, w, 3, data)
    };
    result.map_err(|e| CliError::format(path, e.to_string()))
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit gray or RGB PNG. Values are clamped to [0, 1].
pub fn write_png(path: &Path, image: &ImageF) -> CliResult<()> {
    let (h, w) = image.size();
    let bytes: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    let dynamic = match image.channels() {
        1 => DynamicImage::ImageLuma8(
            GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions"),
        ),
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions")),
        c => return Err(CliError::format(path, format!("cannot write {c}-channel PNG"))),
    };
    save_png(path, &dynamic)
}

/// Writes a validity mask as a gray PNG (255 valid, 0 invalid).
pub fn write_mask_png(path: &Path, image: &ImageF) -> CliResult<()> {
    let (h, w) = image.size();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([if image.is_valid(y as usize, x as usize) { 255 } else { 0 }]));
    save_png(path, &DynamicImage::ImageLuma8(buf))
}

fn save_png(path: &Path, image: &DynamicImage) -> CliResult<()> {
    let mut out = std::io::Cursor::new(Vec::new());
    image
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    write_bytes(path, out.get_ref())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Encodes a 1- or 3-channel image as little-endian PFM (rows bottom to top).
/// Samples are stored as `f32`.
pub fn encode_pfm(image: &ImageF) -> Vec<u8> {
    let (h, w) = image.size();
    let c = image.channels();
    let tag = if c == 3 { "PF" } else { "Pf" };
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(h * w * c * 4);
    for y in (0..h).rev() {
        for v in &image.data()[y * w * c..(y + 1) * w * c] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes a PFM of either endianness.
pub fn decode_pfm(bytes: &[u8]) -> Result<ImageF, String> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PFM header")?);
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let channels = match fields[0] {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(format!("unknown PFM tag {other:?}")),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PFM dimension {s:?}"));
    let (w, h) = (parse(fields[1])?, parse(fields[2])?);
    let scale: f64 = fields[3].parse().map_err(|_| format!("bad PFM scale {:?}", fields[3]))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("PFM scale must be nonzero".into());
    }
    let little = scale < 0.0;
    let n = w * h * channels;
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != n * 4 {
        return Err(format!("PFM body holds {} bytes, expected {}", body.len(), n * 4));
    }
    let mut data = vec![0.0; n];
    for y in 0..h {
        let src_row = h - 1 - y;
        for k in 0..w * channels {
            let off = (src_row * w * channels + k) * 4;
            let raw: [u8; 4] = body[off..off + 4].try_into().expect("four bytes");
            let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
            data[y * w * channels + k] = f64::from(v);
        }
    }
    ImageF::from_data(h, w, channels, data).map_err(|e| e.to_string())
}

pub fn read_pfm(path: &Path) -> CliResult<ImageF> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_pfm(&bytes).map_err(|m| CliError::format(path, m))
}

pub fn write_pfm(path: &Path, image: &ImageF) -> CliResult<()> {
    if image.channels() != 1 && image.channels() != 3 {
        return Err(CliError::format(path, "PFM holds 1 or 3 channels"));
    }
    write_bytes(path, &encode_pfm(image))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_is_exact() {
        let img = ImageF::from_fn(5, 7, |y, x| ((y * 7 + x) as f32 / 3.0) as f64);
        let bytes = encode_pfm(&img);
        let back = decode_pfm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_pfm(&back), bytes);
    }

    #[test]
    fn pfm_big_endian_and_errors() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.5f32.to_be_bytes());
        bytes.extend_from_slice(&0.25f32.to_be_bytes());
        let img = decode_pfm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.5, 0.25]);
        assert!(decode_pfm(b"P6\n1 1\n-1\n0000").is_err());
        assert!(decode_pfm(b"Pf\n2 2\n-1\n0000").is_err());
    }

    #[test]
    fn png_round_trip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = ImageF::from_fn(4, 6, |y, x| ((y * 6 + x) * 10) as f64 / 255.0);
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.channels(), 1);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
