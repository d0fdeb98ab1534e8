//! Raster I/O: grayscale PNG/TIFF in, float score planes out.
//!
//! Float planes use a fixed little-endian layout: the magic `KSEG`, then u32
//! version, u32 width, u32 height (16 bytes), then `width * height` f32 values
//! in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};

use super::plane::{ImagePlane, LabelMap};
use crate::{Error, Result};

pub const FLOAT_PLANE_MAGIC: &[u8; 4] = b"KSEG";
pub const FLOAT_PLANE_VERSION: u32 = 1;

/// Loads an image as luminance normalized to [0, 1]. 8-bit data is divided
/// by 255, everything else is converted to 16-bit luminance and divided by
/// 65535; colour input is reduced to luminance.
pub fn load_grayscale(path: &Path) -> Result<ImagePlane> {
    let img = image::open(path)?;
    Ok(dynamic_to_plane(&img))
}

pub fn dynamic_to_plane(img: &DynamicImage) -> ImagePlane {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        other => other
            .to_luma16()
            .as_raw()
            .iter()
            .map(|&v| v as f64 / 65535.0)
            .collect(),
    };
    ImagePlane::from_vec_unchecked(w, h, data)
}

/// Raw integer pixel values (no normalization), for label and mask images.
pub fn load_raw_values(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as u16).collect(),
        other => other.to_luma16().into_raw(),
    };
    Ok((w, h, data))
}

/// Label image: pixel values are looked up in `classes` (pixel value → label);
/// unlisted values become IGNORE.
pub fn load_label_map(path: &Path, classes: &[(u16, i32)]) -> Result<LabelMap> {
    let (w, h, raw) = load_raw_values(path)?;
    let labels = raw
        .iter()
        .map(|v| {
            classes
                .iter()
                .find(|(p, _)| p == v)
                .map_or(LabelMap::IGNORE, |(_, l)| *l)
        })
        .collect();
    LabelMap::new(w, h, labels)
}

pub fn write_float_plane<W: Write>(mut out: W, plane: &ImagePlane) -> Result<()> {
    out.write_all(FLOAT_PLANE_MAGIC)?;
    out.write_all(&FLOAT_PLANE_VERSION.to_le_bytes())?;
    out.write_all(&(plane.width() as u32).to_le_bytes())?;
    out.write_all(&(plane.height() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(plane.len() * 4);
    for &v in plane.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_float_plane<R: Read>(mut input: R) -> Result<ImagePlane> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Format("float plane header truncated".into()))?;
    if &header[0..4] != FLOAT_PLANE_MAGIC {
        return Err(Error::Format("bad float plane magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FLOAT_PLANE_VERSION {
        return Err(Error::VersionMismatch {
            expected: FLOAT_PLANE_VERSION,
            found: version,
        });
    }
    let (w, h) = (word(8) as usize, word(12) as usize);
    let mut body = vec![0u8; w * h * 4];
    input
        .read_exact(&mut body)
        .map_err(|_| Error::Format("float plane data truncated".into()))?;
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ImagePlane::new(w, h, data)
}

pub fn save_float_plane(path: &Path, plane: &ImagePlane) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_float_plane(std::io::BufWriter::new(f), plane)
}

pub fn load_float_plane(path: &Path) -> Result<ImagePlane> {
    let f = std::fs::File::open(path)?;
    read_float_plane(std::io::BufReader::new(f))
}

/// 8-bit visualization with `[lo, hi]` mapped linearly onto `[0, 255]`.
pub fn to_gray8(plane: &ImagePlane, lo: f64, hi: f64) -> GrayImage {
    let span = if hi > lo { hi - lo } else { 1.0 };
    ImageBuffer::from_fn(plane.width() as u32, plane.height() as u32, |x, y| {
        let v = (plane.get(x as usize, y as usize) - lo) / span;
        Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    })
}

pub fn save_png(path: &Path, plane: &ImagePlane, lo: f64, hi: f64) -> Result<()> {
    to_gray8(plane, lo, hi).save(path)?;
    Ok(())
}

/// Saves a [0, 1] plane as 16-bit PNG (the lossless input format).
pub fn save_png16(path: &Path, plane: &ImagePlane) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(plane.width() as u32, plane.height() as u32, |x, y| {
            let v = plane.get(x as usize, y as usize).clamp(0.0, 1.0);
            Luma([(v * 65535.0).round() as u16])
        });
    img.save(path)?;
    Ok(())
}

pub fn save_u8_values(path: &Path, width: usize, height: usize, values: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, values.to_vec())
        .ok_or_else(|| Error::param("value buffer does not match dimensions"))?;
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_plane_layout_and_round_trip() {
        let p = ImagePlane::from_fn(3, 2, |x, y| x as f64 - 0.25 * y as f64).unwrap();
        let mut buf = Vec::new();
        write_float_plane(&mut buf, &p).unwrap();
        assert_eq!(&buf[..4], b"KSEG");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 16 + 6 * 4);
        let back = read_float_plane(&buf[..]).unwrap();
        assert_eq!(back, p);
        assert!(read_float_plane(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_float_plane(&bad[..]).is_err());
    }

    #[test]
    fn png16_round_trip_is_lossless_on_grid_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let p = ImagePlane::from_fn(4, 3, |x, y| (x * 3 + y) as f64 * 1000.0 / 65535.0).unwrap();
        save_png16(&path, &p).unwrap();
        let back = load_grayscale(&path).unwrap();
        for (a, b) in back.data().iter().zip(p.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn label_png_uses_class_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.png");
        save_u8_values(&path, 3, 1, &[0, 255, 7]).unwrap();
        let l = load_label_map(&path, &[(0, -1), (255, 1)]).unwrap();
        assert_eq!(l.labels(), &[-1, 1, LabelMap::IGNORE]);
    }
}
