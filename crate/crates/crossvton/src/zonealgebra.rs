//! Tri-zone ground-truth construction formulas.
//!
//! Round 1: the try-on zone is the ground-truth garment's region in the
//! parsing map, and the imagination zone is the generated area clipped to
//! the constructed model's foreground minus the try-on zone. Round 2
//! replaces the generated area with the union of the predicted try-on and
//! imagination zones. The reconstruction zone is always the residual.

use serde::{Deserialize, Serialize};

use crate::maskcore::{
    assemble_trizone, extract_class_mask, mask_difference, mask_intersect, mask_union,
    BinaryMask, LabelMap, MaskError, TriZoneMask,
};

/// How to parenthesize `A ∪ B ∩ C` in the round-2 imagination formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Round2Parenthesization {
    /// `(A ∪ B) ∩ C` — union first, then clip to the foreground, mirroring
    /// the round-1 formula which intersects the whole generated area.
    #[default]
    UnionThenIntersect,
    /// `A ∪ (B ∩ C)` — the alternative reading.
    IntersectThenUnion,
}

#[derive(Debug, Clone)]
pub struct Round1Inputs {
    /// Parsing map of the ground-truth model image.
    pub pm_g: LabelMap,
    /// Class name of the ground-truth garment within `pm_g`.
    pub garment_class: String,
    /// Binary-mask generation region used during construction.
    pub gen_region: BinaryMask,
    /// Foreground of the constructed model image.
    pub fg_c: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct Round2Inputs {
    pub pm_g2: LabelMap,
    pub garment_class: String,
    /// Predicted try-on zone for the forward (construction) direction.
    pub tryon_p: BinaryMask,
    /// Predicted imagination zone for the forward direction.
    pub imagi_p: BinaryMask,
    /// Foreground of the constructed model image.
    pub fg_c: BinaryMask,
}

/// The ground-truth garment's pixels in the GT parsing map.
pub fn tryon_zone(pm_g: &LabelMap, garment_class: &str) -> Result<BinaryMask, MaskError> {
    extract_class_mask(pm_g, garment_class)
}

/// `(gen ∩ fg) − tryon`: the area regenerated during construction that
/// lands on the constructed model's body but outside the GT garment.
pub fn imagination_zone_round1(
    gen_region: &BinaryMask,
    fg_c: &BinaryMask,
    tryon: &BinaryMask,
) -> Result<BinaryMask, MaskError> {
    mask_difference(&mask_intersect(gen_region, fg_c)?, tryon)
}

/// Round-2 imagination zone from the predicted zones of the forward pass.
///
/// Under the default parenthesization this is
/// `((tryon_p ∪ imagi_p) ∩ fg_c) − tryon_g`.
pub fn imagination_zone_round2(
    tryon_p: &BinaryMask,
    imagi_p: &BinaryMask,
    fg_c: &BinaryMask,
    tryon_g: &BinaryMask,
    policy: Round2Parenthesization,
) -> Result<BinaryMask, MaskError> {
    let combined = match policy {
        Round2Parenthesization::UnionThenIntersect => {
            mask_intersect(&mask_union(tryon_p, imagi_p)?, fg_c)?
        }
        Round2Parenthesization::IntersectThenUnion => {
            mask_union(tryon_p, &mask_intersect(imagi_p, fg_c)?)?
        }
    };
    mask_difference(&combined, tryon_g)
}

/// Assembles the ground-truth tri-zone mask; reconstruction is the residual.
pub fn build_trizone_gt(
    tryon: &BinaryMask,
    imagi: &BinaryMask,
) -> Result<TriZoneMask, MaskError> {
    assemble_trizone(tryon, imagi)
}

/// Full round-1 GT mask from raw inputs. An all-background parsing map
/// yields an empty try-on zone rather than an error; the caller decides
/// whether to flag the record.
pub fn round1_trizone_gt(inputs: &Round1Inputs) -> Result<TriZoneMask, MaskError> {
    let tryon = tryon_zone(&inputs.pm_g, &inputs.garment_class)?;
    let imagi = imagination_zone_round1(&inputs.gen_region, &inputs.fg_c, &tryon)?;
    build_trizone_gt(&tryon, &imagi)
}

/// Full round-2 GT mask from raw inputs.
pub fn round2_trizone_gt(
    inputs: &Round2Inputs,
    policy: Round2Parenthesization,
) -> Result<TriZoneMask, MaskError> {
    let tryon_g = tryon_zone(&inputs.pm_g2, &inputs.garment_class)?;
    let imagi = imagination_zone_round2(
        &inputs.tryon_p,
        &inputs.imagi_p,
        &inputs.fg_c,
        &tryon_g,
        policy,
    )?;
    build_trizone_gt(&tryon_g, &imagi)
}
