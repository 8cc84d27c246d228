//! 8-bit PNG boundary. Samples are `v / 255` in memory and `round(v * 255)` on disk.

use std::io::BufWriter;
use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{BinaryMask, RasterImage, SegmentationMap, CHANNELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = reader.with_guessed_format().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

fn expect_color(path: &Path, img: &DynamicImage, want: ColorType) -> Result<()> {
    if img.color() != want {
        return Err(Error::Decode {
            path: path.to_owned(),
            reason: format!("expected {want:?} raster, found {:?}", img.color()),
        });
    }
    Ok(())
}

fn to_byte<T: Scalar>(v: T) -> u8 {
    let f = v.to_f64().unwrap_or(0.0);
    (f * 255.0).round().clamp(0.0, 255.0) as u8
}

fn write_png(path: &Path, img: DynamicImage) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        img.write_to(&mut w, ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.to_owned(),
                reason: e.to_string(),
            })?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// 8-bit samples exactly as [`save_image`] writes them.
pub fn image_bytes<T: Scalar>(img: &RasterImage<T>) -> Vec<u8> {
    img.data().iter().map(|&v| to_byte(v)).collect()
}

/// 0 / 255 samples exactly as [`save_mask`] writes them.
pub fn mask_bytes(mask: &BinaryMask) -> Vec<u8> {
    mask.data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect()
}

/// The image [`load_image`] would return after a [`save_image`] round trip.
pub fn requantize<T: Scalar>(img: &RasterImage<T>) -> RasterImage<T> {
    let scale = T::from_count(255);
    let data = image_bytes(img)
        .into_iter()
        .map(|b| T::from_count(b as usize) / scale)
        .collect();
    RasterImage::from_raw(img.height(), img.width(), data)
}

/// Loads an 8-bit RGB raster.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterImage<T>> {
    let path = path.as_ref();
    let img = decode(path)?;
    expect_color(path, &img, ColorType::Rgb8)?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    let scale = T::from_count(255);
    let data = rgb
        .into_raw()
        .into_iter()
        .map(|b| T::from_count(b as usize) / scale)
        .collect();
    RasterImage::new(h as usize, w as usize, data)
}

/// Loads an 8-bit grayscale raster and binarizes it: `1` iff `v / 255 >= threshold`.
pub fn load_mask(path: impl AsRef<Path>, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param(
            "threshold",
            format!("{threshold} not in (0, 1)"),
        ));
    }
    let path = path.as_ref();
    let img = decode(path)?;
    expect_color(path, &img, ColorType::L8)?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray
        .into_raw()
        .into_iter()
        .map(|b| b as f64 / 255.0 >= threshold)
        .collect();
    BinaryMask::new(h as usize, w as usize, data)
}

/// Loads an 8-bit grayscale label raster.
pub fn load_segmentation(path: impl AsRef<Path>, num_labels: usize) -> Result<SegmentationMap> {
    let path = path.as_ref();
    let img = decode(path)?;
    expect_color(path, &img, ColorType::L8)?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    SegmentationMap::new(h as usize, w as usize, num_labels, gray.into_raw())
}

pub fn save_image<T: Scalar>(img: &RasterImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = image_bytes(img);
    debug_assert_eq!(bytes.len(), img.height() * img.width() * CHANNELS);
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    write_png(path.as_ref(), DynamicImage::ImageRgb8(rgb))
}

/// Writes 0 / 255 grayscale.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask_bytes(mask);
    let gray = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    write_png(path.as_ref(), DynamicImage::ImageLuma8(gray))
}

pub fn save_segmentation(seg: &SegmentationMap, path: impl AsRef<Path>) -> Result<()> {
    let gray = GrayImage::from_raw(seg.width() as u32, seg.height() as u32, seg.data().to_vec())
        .expect("buffer length matches dimensions");
    write_png(path.as_ref(), DynamicImage::ImageLuma8(gray))
}
