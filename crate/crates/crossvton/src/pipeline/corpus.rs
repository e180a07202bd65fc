//! Procedural figure corpus.
//!
//! Generates small synthetic "person" images in the mock backends' color
//! convention: a centered figure with a face, skin, and one worn garment
//! whose vertical coverage depends on its spec. The generator knows its
//! own ground truth, so mock parse/densepose results can be checked
//! against it exactly, and the whole construction pipeline is
//! deterministic without any model weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backends::{
    COLOR_BACKGROUND, COLOR_DRESS_A, COLOR_DRESS_B, COLOR_FACE, COLOR_LOWER_A, COLOR_LOWER_B,
    COLOR_SKIN, COLOR_UPPER_A, COLOR_UPPER_B,
};
use crate::backends::{CLASS_DRESS, CLASS_LOWER, CLASS_UPPER};
use crate::flowtoy::ToyQuadruplet;
use crate::maskcore::{
    assemble_trizone, mask_union, BinaryMask, GarmentCategory, GarmentLength, GarmentSpec,
    ImageGrid, RgbImage,
};

pub const FIGURE_SIZE: u32 = 16;

/// Which of the two corpus colors a garment uses. Worn garments use A;
/// construction-target garments use B, so a constructed image is never
/// pixel-identical to its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GarmentShade {
    A,
    B,
}

pub fn garment_color(spec: GarmentSpec, shade: GarmentShade) -> [u8; 3] {
    match (spec.category, shade) {
        (GarmentCategory::Upper, GarmentShade::A) => COLOR_UPPER_A,
        (GarmentCategory::Upper, GarmentShade::B) => COLOR_UPPER_B,
        (GarmentCategory::Dress, GarmentShade::A) => COLOR_DRESS_A,
        (GarmentCategory::Dress, GarmentShade::B) => COLOR_DRESS_B,
        (GarmentCategory::Lower, GarmentShade::A) => COLOR_LOWER_A,
        (GarmentCategory::Lower, GarmentShade::B) => COLOR_LOWER_B,
    }
}

pub fn garment_class(spec: GarmentSpec) -> &'static str {
    match spec.category {
        GarmentCategory::Upper => CLASS_UPPER,
        GarmentCategory::Dress => CLASS_DRESS,
        GarmentCategory::Lower => CLASS_LOWER,
    }
}

/// Inclusive row range the garment covers on the 16×16 figure. Upper
/// garments and dresses hang from the shoulders (row 4); lower garments
/// from the waist (row 8). The bottom row is the spec's "length" in
/// figure coordinates and drives the IDM_S stretch/shrink decision.
pub fn garment_rows(spec: GarmentSpec) -> (u32, u32) {
    use GarmentCategory::*;
    use GarmentLength::*;
    match (spec.category, spec.length) {
        (Upper, Short) => (4, 7),
        (Upper, Long) => (4, 9),
        (Dress, Short) => (4, 10),
        (Dress, Long) => (4, 13),
        (Lower, Short) => (8, 11),
        (Lower, Long) => (8, 14),
    }
}

pub fn garment_bottom(spec: GarmentSpec) -> u32 {
    garment_rows(spec).1
}

const BODY_TOP: u32 = 1;
const BODY_BOTTOM: u32 = 14;
const BODY_LEFT: u32 = 5;
const BODY_RIGHT: u32 = 10;
const FACE_BOTTOM: u32 = 3;

/// A figure wearing `spec`, shifted `shift` columns to the right
/// (0..=2 keeps the body inside the frame).
pub fn generate_figure(spec: GarmentSpec, shade: GarmentShade, shift: u32) -> RgbImage {
    assert!(shift <= 2, "shift keeps the figure in frame");
    let grid = ImageGrid::new(FIGURE_SIZE, FIGURE_SIZE).unwrap();
    let color = garment_color(spec, shade);
    let (g_top, g_bottom) = garment_rows(spec);
    RgbImage::filled(grid, COLOR_BACKGROUND).map(|r, c, rgb| {
        let (left, right) = (BODY_LEFT + shift, BODY_RIGHT + shift);
        if !(left..=right).contains(&c) || !(BODY_TOP..=BODY_BOTTOM).contains(&r) {
            return rgb;
        }
        if r <= FACE_BOTTOM {
            if (left + 1..right).contains(&c) {
                COLOR_FACE
            } else {
                rgb
            }
        } else if (g_top..=g_bottom).contains(&r) {
            color
        } else {
            COLOR_SKIN
        }
    })
}

/// Flat garment swatch, the `G` image of a quadruplet.
pub fn garment_swatch(spec: GarmentSpec, shade: GarmentShade) -> RgbImage {
    RgbImage::filled(ImageGrid::new(8, 8).unwrap(), garment_color(spec, shade))
}

/// The figure's full silhouette (face + skin + garment) as a mask.
pub fn figure_mask(shift: u32) -> BinaryMask {
    let grid = ImageGrid::new(FIGURE_SIZE, FIGURE_SIZE).unwrap();
    BinaryMask::from_fn(grid, |r, c| {
        let (left, right) = (BODY_LEFT + shift, BODY_RIGHT + shift);
        if !(BODY_TOP..=BODY_BOTTOM).contains(&r) || !(left..=right).contains(&c) {
            return false;
        }
        // face rows are one column narrower on each side
        r > FACE_BOTTOM || (left + 1..right).contains(&c)
    })
}

/// One construction job: a real model image and the two garments. The
/// model `p_g` wears a shade-A garment of `pg_spec`; the construction
/// target `g_c` is a shade-B garment of `pc_spec`.
#[derive(Debug, Clone)]
pub struct ConstructionJob {
    pub id: String,
    pub pc_spec: GarmentSpec,
    pub pg_spec: GarmentSpec,
    pub p_g: RgbImage,
    pub g_g: RgbImage,
    pub g_c: RgbImage,
}

fn spec_token(spec: GarmentSpec) -> String {
    spec.to_string().replace('/', "-")
}

pub fn job_id(index: usize, pc: GarmentSpec, pg: GarmentSpec) -> String {
    format!("{index:04}-pg-{}-pc-{}", spec_token(pg), spec_token(pc))
}

pub fn make_job(index: usize, pc: GarmentSpec, pg: GarmentSpec) -> ConstructionJob {
    let shift = (index % 3) as u32;
    ConstructionJob {
        id: job_id(index, pc, pg),
        pc_spec: pc,
        pg_spec: pg,
        p_g: generate_figure(pg, GarmentShade::A, shift),
        g_g: garment_swatch(pg, GarmentShade::A),
        g_c: garment_swatch(pc, GarmentShade::B),
    }
}

/// Training quadruplets for the toy trainer, built directly from the
/// generator's geometry: the constructed image wears the target garment,
/// the GT tri-zone mask follows the round-1 formula with a generation
/// region covering both garments' rows.
pub fn generate_toy_quadruplets(count: usize, seed: u64) -> Vec<ToyQuadruplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = GarmentSpec::all();
    (0..count)
        .map(|_| {
            let pg = specs[rng.gen_range(0..specs.len())];
            let pc = specs[rng.gen_range(0..specs.len())];
            let shift = rng.gen_range(0..3u32);
            let p_g = generate_figure(pg, GarmentShade::A, shift);
            let p_c = generate_figure(pc, GarmentShade::B, shift);
            let g_g = garment_swatch(pg, GarmentShade::A);

            let grid = p_g.grid();
            let (pg_top, pg_bottom) = garment_rows(pg);
            let (pc_top, pc_bottom) = garment_rows(pc);
            let cols = BODY_LEFT + shift..=BODY_RIGHT + shift;
            let tryon = BinaryMask::from_fn(grid, |r, c| {
                cols.contains(&c) && (pg_top..=pg_bottom).contains(&r)
            });
            let gen = BinaryMask::from_fn(grid, |r, c| {
                cols.contains(&c) && (pc_top..=pc_bottom).contains(&r)
            });
            let gen = mask_union(&gen, &tryon).unwrap();
            let imagi = crate::zonealgebra::imagination_zone_round1(
                &gen,
                &figure_mask(shift),
                &tryon,
            )
            .unwrap();
            let m3g = assemble_trizone(&tryon, &imagi).unwrap();
            ToyQuadruplet { p_c, p_g, g_g, m3g }
        })
        .collect()
}
