//! PNG serialization for rasters plus the palette sidecar format.
//!
//! Label maps and tri-zone masks go to 8-bit single-channel PNG with the
//! label / zone code as the pixel value. The palette sidecar is UTF-8
//! text, one `label<space>name` pair per line. Round trips are bit-exact.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{BinaryMask, ImageGrid, LabelMap, MaskError, RgbImage, TriZoneMask, Zone};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("{0}")]
    Mask(#[from] MaskError),
    #[error("bad zone code {0} in tri-zone png")]
    BadZoneCode(u8),
    #[error("bad palette line: {0:?}")]
    BadPaletteLine(String),
    #[error("expected {0} image, got a different pixel format")]
    WrongFormat(&'static str),
}

pub fn save_rgb_image(img: &RgbImage, path: &Path) -> Result<(), IoError> {
    let grid = img.grid();
    let buf = image::RgbImage::from_raw(grid.width, grid.height, img.pixels().to_vec())
        .expect("pixel length checked at construction");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn load_rgb_image(path: &Path) -> Result<RgbImage, IoError> {
    let dyn_img = image::open(path)?;
    let rgb = dyn_img.into_rgb8();
    let grid = ImageGrid::new(rgb.width(), rgb.height())?;
    Ok(RgbImage::new(grid, rgb.into_raw())?)
}

fn save_luma(grid: ImageGrid, data: Vec<u8>, path: &Path) -> Result<(), IoError> {
    let buf = image::GrayImage::from_raw(grid.width, grid.height, data)
        .expect("length matches grid");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

fn load_luma(path: &Path) -> Result<(ImageGrid, Vec<u8>), IoError> {
    let dyn_img = image::open(path)?;
    let luma = match dyn_img {
        image::DynamicImage::ImageLuma8(l) => l,
        _ => return Err(IoError::WrongFormat("8-bit single-channel")),
    };
    let grid = ImageGrid::new(luma.width(), luma.height())?;
    Ok((grid, luma.into_raw()))
}

/// Writes the label raster to `path` and the palette to `palette_path`.
pub fn save_label_map(map: &LabelMap, path: &Path, palette_path: &Path) -> Result<(), IoError> {
    save_luma(map.grid(), map.labels().to_vec(), path)?;
    let mut text = String::new();
    for (label, name) in map.palette() {
        text.push_str(&format!("{label} {name}\n"));
    }
    std::fs::write(palette_path, text)?;
    Ok(())
}

pub fn load_label_map(path: &Path, palette_path: &Path) -> Result<LabelMap, IoError> {
    let (grid, labels) = load_luma(path)?;
    let text = std::fs::read_to_string(palette_path)?;
    let mut palette = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (label_s, name) = line
            .split_once(' ')
            .ok_or_else(|| IoError::BadPaletteLine(line.to_string()))?;
        let label: u8 = label_s
            .parse()
            .map_err(|_| IoError::BadPaletteLine(line.to_string()))?;
        palette.insert(label, name.to_string());
    }
    Ok(LabelMap::new(grid, labels, palette)?)
}

/// Zone codes on disk: recon=0, imagi=1, tryon=2.
pub fn save_trizone_mask(mask: &TriZoneMask, path: &Path) -> Result<(), IoError> {
    let data = mask.zones().iter().map(|z| z.code()).collect();
    save_luma(mask.grid(), data, path)
}

pub fn load_trizone_mask(path: &Path) -> Result<TriZoneMask, IoError> {
    let (grid, data) = load_luma(path)?;
    decode_zones(grid, data)
}

fn decode_zones(grid: ImageGrid, data: Vec<u8>) -> Result<TriZoneMask, IoError> {
    let zones = data
        .into_iter()
        .map(|c| Zone::from_code(c).ok_or(IoError::BadZoneCode(c)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TriZoneMask::from_zones(grid, zones)?)
}

// In-memory PNG codecs for the HTTP wire format.

fn encode_luma_png(grid: ImageGrid, data: Vec<u8>) -> Vec<u8> {
    let buf = image::GrayImage::from_raw(grid.width, grid.height, data)
        .expect("length matches grid");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .expect("png encode of in-memory buffer");
    out.into_inner()
}

fn decode_luma_png(bytes: &[u8]) -> Result<(ImageGrid, Vec<u8>), IoError> {
    let dyn_img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let luma = match dyn_img {
        image::DynamicImage::ImageLuma8(l) => l,
        _ => return Err(IoError::WrongFormat("8-bit single-channel")),
    };
    let grid = ImageGrid::new(luma.width(), luma.height())?;
    Ok((grid, luma.into_raw()))
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let grid = img.grid();
    let buf = image::RgbImage::from_raw(grid.width, grid.height, img.pixels().to_vec())
        .expect("pixel length checked at construction");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .expect("png encode of in-memory buffer");
    out.into_inner()
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage, IoError> {
    let dyn_img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let rgb = dyn_img.into_rgb8();
    let grid = ImageGrid::new(rgb.width(), rgb.height())?;
    Ok(RgbImage::new(grid, rgb.into_raw())?)
}

/// Binary masks travel as 0/255 luma PNG; any nonzero pixel decodes as set.
pub fn encode_binary_mask_png(mask: &BinaryMask) -> Vec<u8> {
    let grid = mask.grid();
    let mut data = Vec::with_capacity(grid.area());
    for r in 0..grid.height {
        for c in 0..grid.width {
            data.push(if mask.get(r, c) { 255 } else { 0 });
        }
    }
    encode_luma_png(grid, data)
}

pub fn decode_binary_mask_png(bytes: &[u8]) -> Result<BinaryMask, IoError> {
    let (grid, data) = decode_luma_png(bytes)?;
    Ok(BinaryMask::from_fn(grid, |r, c| {
        data[(r * grid.width + c) as usize] != 0
    }))
}

pub fn encode_trizone_png(mask: &TriZoneMask) -> Vec<u8> {
    let data = mask.zones().iter().map(|z| z.code()).collect();
    encode_luma_png(mask.grid(), data)
}

pub fn decode_trizone_png(bytes: &[u8]) -> Result<TriZoneMask, IoError> {
    let (grid, data) = decode_luma_png(bytes)?;
    decode_zones(grid, data)
}

/// Label rasters travel as plain luma PNG; the palette travels alongside
/// as a separate structured field.
pub fn encode_labels_png(map: &LabelMap) -> Vec<u8> {
    encode_luma_png(map.grid(), map.labels().to_vec())
}

pub fn decode_labels_png(
    bytes: &[u8],
    palette: BTreeMap<u8, String>,
) -> Result<LabelMap, IoError> {
    let (grid, labels) = decode_luma_png(bytes)?;
    Ok(LabelMap::new(grid, labels, palette)?)
}
