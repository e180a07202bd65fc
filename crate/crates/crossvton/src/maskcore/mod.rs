//! Core raster types and exact per-pixel set operations.
//!
//! Everything else in the toolkit is built on these: RGB images, label
//! maps (human parsing / densepose), packed binary masks, and the
//! three-valued tri-zone mask. All types are immutable after
//! construction and all operations are pure.

mod io;

pub use io::{
    decode_binary_mask_png, decode_labels_png, decode_rgb_png, decode_trizone_png,
    encode_binary_mask_png, encode_labels_png, encode_rgb_png, encode_trizone_png, load_label_map,
    load_rgb_image, load_trizone_mask, save_label_map, save_rgb_image, save_trizone_mask, IoError,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("grid mismatch: {0}x{1} vs {2}x{3}")]
    GridMismatch(u32, u32, u32, u32),
    #[error("unknown class: {0:?}")]
    UnknownClass(String),
    #[error("try-on and imagination zones overlap at {overlap} pixels")]
    Overlap { overlap: usize },
    #[error("invalid grid: {0}x{1}")]
    InvalidGrid(u32, u32),
    #[error("pixel buffer length {got} does not match grid ({want})")]
    BadLength { got: usize, want: usize },
    #[error("label {0} missing from palette")]
    LabelNotInPalette(u8),
}

/// Raster dimensions shared by all masks/maps participating in one operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageGrid {
    pub width: u32,
    pub height: u32,
}

impl ImageGrid {
    pub fn new(width: u32, height: u32) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::InvalidGrid(width, height));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub(crate) fn check(a: ImageGrid, b: ImageGrid) -> Result<(), MaskError> {
        if a != b {
            return Err(MaskError::GridMismatch(a.width, a.height, b.width, b.height));
        }
        Ok(())
    }
}

/// 8-bit RGB raster in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    grid: ImageGrid,
    pixels: Vec<u8>, // 3 bytes per pixel
}

impl RgbImage {
    pub fn new(grid: ImageGrid, pixels: Vec<u8>) -> Result<Self, MaskError> {
        if pixels.len() != grid.area() * 3 {
            return Err(MaskError::BadLength { got: pixels.len(), want: grid.area() * 3 });
        }
        Ok(Self { grid, pixels })
    }

    pub fn filled(grid: ImageGrid, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(grid.area() * 3);
        for _ in 0..grid.area() {
            pixels.extend_from_slice(&rgb);
        }
        Self { grid, pixels }
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: u32, col: u32) -> [u8; 3] {
        let i = (row as usize * self.grid.width as usize + col as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Builds a new image with `f` deciding each pixel from (row, col, current).
    pub fn map(&self, mut f: impl FnMut(u32, u32, [u8; 3]) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in 0..self.grid.height {
            for col in 0..self.grid.width {
                pixels.extend_from_slice(&f(row, col, self.get(row, col)));
            }
        }
        Self { grid: self.grid, pixels }
    }
}

/// Per-pixel small-integer class labels plus a label→name palette.
///
/// Label 0 is reserved for background; every pixel's label must appear
/// in the palette.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    grid: ImageGrid,
    labels: Vec<u8>,
    palette: BTreeMap<u8, String>,
}

pub const BACKGROUND_LABEL: u8 = 0;

impl LabelMap {
    pub fn new(
        grid: ImageGrid,
        labels: Vec<u8>,
        palette: BTreeMap<u8, String>,
    ) -> Result<Self, MaskError> {
        if labels.len() != grid.area() {
            return Err(MaskError::BadLength { got: labels.len(), want: grid.area() });
        }
        for &l in &labels {
            if !palette.contains_key(&l) {
                return Err(MaskError::LabelNotInPalette(l));
            }
        }
        Ok(Self { grid, labels, palette })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn palette(&self) -> &BTreeMap<u8, String> {
        &self.palette
    }

    pub fn label_of(&self, class_name: &str) -> Option<u8> {
        self.palette.iter().find(|(_, n)| n.as_str() == class_name).map(|(&l, _)| l)
    }

    pub fn get(&self, row: u32, col: u32) -> u8 {
        self.labels[row as usize * self.grid.width as usize + col as usize]
    }
}

/// Packed per-pixel boolean raster. Bit index = row * width + col.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    grid: ImageGrid,
    words: Vec<u64>,
}

impl BinaryMask {
    pub fn empty(grid: ImageGrid) -> Self {
        let words = vec![0u64; (grid.area() + 63) / 64];
        Self { grid, words }
    }

    pub fn full(grid: ImageGrid) -> Self {
        let mut m = Self::empty(grid);
        for w in &mut m.words {
            *w = u64::MAX;
        }
        m.clear_tail();
        m
    }

    pub fn from_fn(grid: ImageGrid, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::empty(grid);
        for row in 0..grid.height {
            for col in 0..grid.width {
                if f(row, col) {
                    m.set(row, col, true);
                }
            }
        }
        m
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        let i = row as usize * self.grid.width as usize + col as usize;
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub(crate) fn set(&mut self, row: u32, col: u32, value: bool) {
        let i = row as usize * self.grid.width as usize + col as usize;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        ImageGrid::check(self.grid, other.grid)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    // tail bits beyond the grid area must stay zero so popcounts are exact
    fn clear_tail(&mut self) {
        let used = self.grid.area() % 64;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }

    fn zip_words(
        a: &BinaryMask,
        b: &BinaryMask,
        f: impl Fn(u64, u64) -> u64,
    ) -> Result<BinaryMask, MaskError> {
        ImageGrid::check(a.grid, b.grid)?;
        let words = a.words.iter().zip(&b.words).map(|(&x, &y)| f(x, y)).collect();
        let mut m = BinaryMask { grid: a.grid, words };
        m.clear_tail();
        Ok(m)
    }
}

pub fn mask_union(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    BinaryMask::zip_words(a, b, |x, y| x | y)
}

pub fn mask_intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    BinaryMask::zip_words(a, b, |x, y| x & y)
}

pub fn mask_difference(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    BinaryMask::zip_words(a, b, |x, y| x & !y)
}

pub fn mask_complement(a: &BinaryMask) -> BinaryMask {
    let words = a.words.iter().map(|&x| !x).collect();
    let mut m = BinaryMask { grid: a.grid, words };
    m.clear_tail();
    m
}

/// Tightest rectangle containing all set bits, rows/cols inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: u32,
    pub left: u32,
    pub bottom: u32,
    pub right: u32,
}

impl BoundingBox {
    pub fn height(&self) -> u32 {
        self.bottom - self.top + 1
    }
}

pub fn bounding_box(mask: &BinaryMask) -> Option<BoundingBox> {
    let grid = mask.grid();
    let mut bb: Option<BoundingBox> = None;
    for row in 0..grid.height {
        for col in 0..grid.width {
            if mask.get(row, col) {
                bb = Some(match bb {
                    None => BoundingBox { top: row, left: col, bottom: row, right: col },
                    Some(b) => BoundingBox {
                        top: b.top.min(row),
                        left: b.left.min(col),
                        bottom: b.bottom.max(row),
                        right: b.right.max(col),
                    },
                });
            }
        }
    }
    bb
}

/// Mask of pixels whose label equals `palette[class_name]`.
pub fn extract_class_mask(map: &LabelMap, class_name: &str) -> Result<BinaryMask, MaskError> {
    let label = map
        .label_of(class_name)
        .ok_or_else(|| MaskError::UnknownClass(class_name.to_string()))?;
    Ok(BinaryMask::from_fn(map.grid(), |r, c| map.get(r, c) == label))
}

/// Mask of pixels whose label is not background.
pub fn foreground_mask(map: &LabelMap) -> BinaryMask {
    BinaryMask::from_fn(map.grid(), |r, c| map.get(r, c) != BACKGROUND_LABEL)
}

/// The three functional zones of a model image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Zone {
    /// Area that must stay identical to the input model image.
    Recon = 0,
    /// Area the generator must plausibly invent.
    Imagi = 1,
    /// Area synthesized from the target garment.
    Tryon = 2,
}

impl Zone {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Zone> {
        match code {
            0 => Some(Zone::Recon),
            1 => Some(Zone::Imagi),
            2 => Some(Zone::Tryon),
            _ => None,
        }
    }
}

/// Per-pixel three-valued zone map. A partition by construction: every
/// pixel carries exactly one zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriZoneMask {
    grid: ImageGrid,
    zones: Vec<Zone>,
}

impl TriZoneMask {
    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn get(&self, row: u32, col: u32) -> Zone {
        self.zones[row as usize * self.grid.width as usize + col as usize]
    }

    pub(crate) fn from_zones(grid: ImageGrid, zones: Vec<Zone>) -> Result<Self, MaskError> {
        if zones.len() != grid.area() {
            return Err(MaskError::BadLength { got: zones.len(), want: grid.area() });
        }
        Ok(Self { grid, zones })
    }

    /// The binary mask of one zone.
    pub fn zone_mask(&self, zone: Zone) -> BinaryMask {
        BinaryMask::from_fn(self.grid, |r, c| self.get(r, c) == zone)
    }

    /// Pixel counts per zone, indexed (recon, imagi, tryon).
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0usize; 3];
        for z in &self.zones {
            h[z.code() as usize] += 1;
        }
        h
    }
}

/// Builds a tri-zone mask from disjoint try-on and imagination masks;
/// everything else becomes the reconstruction zone.
pub fn assemble_trizone(
    tryon: &BinaryMask,
    imagi: &BinaryMask,
) -> Result<TriZoneMask, MaskError> {
    ImageGrid::check(tryon.grid(), imagi.grid())?;
    let overlap = mask_intersect(tryon, imagi)?.count_ones();
    if overlap > 0 {
        return Err(MaskError::Overlap { overlap });
    }
    let grid = tryon.grid();
    let mut zones = Vec::with_capacity(grid.area());
    for row in 0..grid.height {
        for col in 0..grid.width {
            zones.push(if tryon.get(row, col) {
                Zone::Tryon
            } else if imagi.get(row, col) {
                Zone::Imagi
            } else {
                Zone::Recon
            });
        }
    }
    Ok(TriZoneMask { grid, zones })
}

/// Garment classification used by the construction-method table:
/// three coarse categories crossed with two lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GarmentSpec {
    pub category: GarmentCategory,
    pub length: GarmentLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GarmentCategory {
    Upper,
    Dress,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GarmentLength {
    Short,
    Long,
}

impl GarmentSpec {
    pub const fn new(category: GarmentCategory, length: GarmentLength) -> Self {
        Self { category, length }
    }

    /// All six (category, length) combinations in a fixed order.
    pub fn all() -> [GarmentSpec; 6] {
        use GarmentCategory::*;
        use GarmentLength::*;
        [
            GarmentSpec::new(Upper, Short),
            GarmentSpec::new(Upper, Long),
            GarmentSpec::new(Dress, Short),
            GarmentSpec::new(Dress, Long),
            GarmentSpec::new(Lower, Short),
            GarmentSpec::new(Lower, Long),
        ]
    }

    /// Parses `category/length` tokens, applying the fine-category mapping
    /// for `tops`, `dresses`, `pants`, `skirts` style names.
    pub fn parse(token: &str) -> Result<Self, String> {
        let t = token.to_ascii_lowercase();
        let (cat_s, len_s) = t
            .split_once('/')
            .or_else(|| t.split_once('-'))
            .ok_or_else(|| format!("expected category/length, got {token:?}"))?;
        let category = match cat_s {
            "upper" | "top" | "tops" => GarmentCategory::Upper,
            "dress" | "dresses" => GarmentCategory::Dress,
            "lower" | "pants" | "skirt" | "skirts" => GarmentCategory::Lower,
            other => return Err(format!("unknown category {other:?}")),
        };
        let length = match len_s {
            "short" => GarmentLength::Short,
            "long" => GarmentLength::Long,
            other => return Err(format!("unknown length {other:?}")),
        };
        Ok(GarmentSpec { category, length })
    }
}

impl std::fmt::Display for GarmentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = match self.category {
            GarmentCategory::Upper => "upper",
            GarmentCategory::Dress => "dress",
            GarmentCategory::Lower => "lower",
        };
        let l = match self.length {
            GarmentLength::Short => "short",
            GarmentLength::Long => "long",
        };
        write!(f, "{c}/{l}")
    }
}
