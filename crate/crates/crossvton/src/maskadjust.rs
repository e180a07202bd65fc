//! Lower-boundary mask adjustment for size-mismatched intra-category
//! construction.
//!
//! Two strategies: stretch the generation region downward guided by a
//! densepose body part (short→long), or shrink its lower boundary upward
//! by a random fraction of the garment box height (long→short), leaving a
//! residual region for an inpainting pass. All randomness is drawn from a
//! generator seeded by the policy; identical seeds give identical bits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maskcore::{
    bounding_box, mask_difference, BinaryMask, ImageGrid, LabelMap, MaskError, RgbImage,
};

#[derive(Debug, Error, PartialEq)]
pub enum AdjustError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("densepose part {0:?} not in palette")]
    UnknownPart(String),
    #[error("generation region is empty")]
    EmptyMask,
    #[error("shrink fraction range must satisfy 0 < min <= max < 1, got {0}..{1}")]
    BadRange(f64, f64),
    #[error("policy mode {0:?} does not match the requested operation")]
    ModeMismatch(ShiftMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftMode {
    StretchDown,
    ShrinkUp,
}

/// How to move the generation region's lower boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPolicy {
    pub mode: ShiftMode,
    /// Body-part label the lower boundary is extended to (StretchDown).
    pub densepose_target_part: String,
    /// Fraction of the garment-box height shaved off (ShrinkUp).
    pub shrink_fraction_range: (f64, f64),
    pub seed: u64,
}

impl ShiftPolicy {
    pub fn stretch_down(target_part: impl Into<String>, seed: u64) -> Self {
        Self {
            mode: ShiftMode::StretchDown,
            densepose_target_part: target_part.into(),
            shrink_fraction_range: (0.15, 0.45),
            seed,
        }
    }

    pub fn shrink_up(range: (f64, f64), seed: u64) -> Self {
        Self {
            mode: ShiftMode::ShrinkUp,
            densepose_target_part: String::new(),
            shrink_fraction_range: range,
            seed,
        }
    }
}

/// Result of an adjustment: the new generation region plus the residual
/// that needs an inpainting pass (empty for StretchDown).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjustedMask {
    pub adjusted: BinaryMask,
    pub residual: BinaryMask,
}

/// Extends the lower boundary of `gen` downward, column by column, to the
/// lowest row of the target densepose part in that column. Columns where
/// the part is absent or already covered are left untouched.
pub fn stretch_down(
    gen: &BinaryMask,
    densepose: &LabelMap,
    policy: &ShiftPolicy,
) -> Result<AdjustedMask, AdjustError> {
    if policy.mode != ShiftMode::StretchDown {
        return Err(AdjustError::ModeMismatch(policy.mode));
    }
    if gen.grid() != densepose.grid() {
        return Err(MaskError::GridMismatch(
            gen.grid().width,
            gen.grid().height,
            densepose.grid().width,
            densepose.grid().height,
        )
        .into());
    }
    let part_label = densepose
        .label_of(&policy.densepose_target_part)
        .ok_or_else(|| AdjustError::UnknownPart(policy.densepose_target_part.clone()))?;

    let grid = gen.grid();
    let mut adjusted = gen.clone();
    for col in 0..grid.width {
        let gen_bottom = (0..grid.height).rev().find(|&r| gen.get(r, col));
        let Some(gen_bottom) = gen_bottom else { continue };
        let part_bottom = (0..grid.height).rev().find(|&r| densepose.get(r, col) == part_label);
        let Some(part_bottom) = part_bottom else { continue };
        for row in gen_bottom + 1..=part_bottom {
            adjusted.set(row, col, true);
        }
    }
    Ok(AdjustedMask { adjusted, residual: BinaryMask::empty(grid) })
}

/// Picks the shrink amount for `shrink_up`: rows removed from the bottom
/// of the garment bounding box, `round(u * box_height)` with `u` drawn
/// uniformly from the policy range.
fn shrink_rows(box_height: u32, policy: &ShiftPolicy) -> Result<u32, AdjustError> {
    let (min, max) = policy.shrink_fraction_range;
    if !(min > 0.0 && min <= max && max < 1.0) {
        return Err(AdjustError::BadRange(min, max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let u = if min == max { min } else { rng.gen_range(min..=max) };
    Ok((u * box_height as f64).round() as u32)
}

/// Clears all set bits in the bottom δ rows of `gen`'s bounding box and
/// reports the cleared bits as the residual.
pub fn shrink_up(gen: &BinaryMask, policy: &ShiftPolicy) -> Result<AdjustedMask, AdjustError> {
    if policy.mode != ShiftMode::ShrinkUp {
        return Err(AdjustError::ModeMismatch(policy.mode));
    }
    let bb = bounding_box(gen).ok_or(AdjustError::EmptyMask)?;
    let delta = shrink_rows(bb.height(), policy)?;

    let grid = gen.grid();
    let cut_from = bb.bottom + 1 - delta.min(bb.height()); // first cleared row
    let mut adjusted = gen.clone();
    for row in cut_from..=bb.bottom {
        for col in 0..grid.width {
            adjusted.set(row, col, false);
        }
    }
    let residual = mask_difference(gen, &adjusted)?;
    Ok(AdjustedMask { adjusted, residual })
}

/// Backend call payload marking exactly the residual pixels for
/// completion. An empty residual is a no-op the pipeline skips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpaintRequest {
    pub image: RgbImage,
    pub region: BinaryMask,
}

impl InpaintRequest {
    pub fn is_noop(&self) -> bool {
        self.region.is_empty()
    }
}

pub fn inpaint_request(
    image: &RgbImage,
    residual: &BinaryMask,
) -> Result<InpaintRequest, AdjustError> {
    check_grids(image.grid(), residual.grid())?;
    Ok(InpaintRequest { image: image.clone(), region: residual.clone() })
}

fn check_grids(a: ImageGrid, b: ImageGrid) -> Result<(), AdjustError> {
    if a != b {
        return Err(MaskError::GridMismatch(a.width, a.height, b.width, b.height).into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::Rng;

    use super::*;
    use crate::maskcore::{mask_intersect, mask_union};

    fn grid(w: u32, h: u32) -> ImageGrid {
        ImageGrid::new(w, h).unwrap()
    }

    /// Densepose map with the target part occupying the given rows across
    /// all columns.
    fn densepose_with_part(g: ImageGrid, part_rows: std::ops::Range<u32>) -> LabelMap {
        let palette: BTreeMap<u8, String> =
            [(0u8, "background".to_string()), (1, "upper_leg".to_string())].into();
        let labels = (0..g.area())
            .map(|i| {
                let row = (i as u32) / g.width;
                if part_rows.contains(&row) {
                    1
                } else {
                    0
                }
            })
            .collect();
        LabelMap::new(g, labels, palette).unwrap()
    }

    /// Column-convex random mask: each column is a contiguous run (or
    /// empty), matching the shape of real garment generation regions.
    fn random_column_runs(g: ImageGrid, rng: &mut ChaCha8Rng) -> BinaryMask {
        let mut runs: Vec<Option<(u32, u32)>> = Vec::new();
        for _ in 0..g.width {
            if rng.gen_bool(0.3) {
                runs.push(None);
            } else {
                let a = rng.gen_range(0..g.height);
                let b = rng.gen_range(0..g.height);
                runs.push(Some((a.min(b), a.max(b))));
            }
        }
        BinaryMask::from_fn(g, |r, c| {
            runs[c as usize].map_or(false, |(top, bot)| r >= top && r <= bot)
        })
    }

    #[test]
    fn stretch_down_no_extension_when_part_above_boundary() {
        let g = grid(8, 12);
        let gen = BinaryMask::from_fn(g, |r, _| (4..=7).contains(&r));
        let dp = densepose_with_part(g, 0..3); // entirely above gen's lower boundary
        let policy = ShiftPolicy::stretch_down("upper_leg", 0);
        let out = stretch_down(&gen, &dp, &policy).unwrap();
        assert_eq!(out.adjusted, gen);
        assert!(out.residual.is_empty());
    }

    #[test]
    fn stretch_down_column_scan_oracle() {
        // gen covers rows 2–5 of column 3; the part reaches row 9 there
        let g = grid(8, 12);
        let gen = BinaryMask::from_fn(g, |r, c| c == 3 && (2..=5).contains(&r));
        let dp = densepose_with_part(g, 6..10);
        let policy = ShiftPolicy::stretch_down("upper_leg", 0);
        let out = stretch_down(&gen, &dp, &policy).unwrap();
        for row in 0..12 {
            for col in 0..8 {
                let expect = col == 3 && (2..=9).contains(&row);
                assert_eq!(out.adjusted.get(row, col), expect, "({row},{col})");
            }
        }
    }

    #[test]
    fn stretch_down_superset_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = grid(16, 16);
        let policy = ShiftPolicy::stretch_down("upper_leg", 0);
        for _ in 0..500 {
            let gen = random_column_runs(g, &mut rng);
            let top = rng.gen_range(0..16);
            let dp = densepose_with_part(g, top..(top + rng.gen_range(0..(16 - top))).max(top));
            let out = stretch_down(&gen, &dp, &policy).unwrap();
            assert!(gen.is_subset_of(&out.adjusted).unwrap());
        }
    }

    #[test]
    fn stretch_down_monotone_on_column_convex_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let g = grid(16, 16);
        let policy = ShiftPolicy::stretch_down("upper_leg", 0);
        for _ in 0..500 {
            // per-column runs for the superset, shrunk sub-runs for the subset
            let mut big_runs: Vec<Option<(u32, u32)>> = Vec::new();
            let mut small_runs: Vec<Option<(u32, u32)>> = Vec::new();
            for _ in 0..16 {
                if rng.gen_bool(0.3) {
                    big_runs.push(None);
                    small_runs.push(None);
                    continue;
                }
                let a = rng.gen_range(0..16u32);
                let b = rng.gen_range(0..16u32);
                let (top, bot) = (a.min(b), a.max(b));
                big_runs.push(Some((top, bot)));
                if rng.gen_bool(0.3) {
                    small_runs.push(None);
                } else {
                    let t = rng.gen_range(top..=bot);
                    let s = rng.gen_range(t..=bot);
                    small_runs.push(Some((t, s)));
                }
            }
            let from_runs = |runs: &[Option<(u32, u32)>]| {
                BinaryMask::from_fn(g, |r, c| {
                    runs[c as usize].map_or(false, |(top, bot)| r >= top && r <= bot)
                })
            };
            let big = from_runs(&big_runs);
            let small = from_runs(&small_runs);
            assert!(small.is_subset_of(&big).unwrap());
            let top = rng.gen_range(0..16);
            let dp = densepose_with_part(g, top..16);
            let a = stretch_down(&small, &dp, &policy).unwrap().adjusted;
            let b = stretch_down(&big, &dp, &policy).unwrap().adjusted;
            assert!(a.is_subset_of(&b).unwrap());
        }
    }

    #[test]
    fn stretch_down_unknown_part() {
        let g = grid(4, 4);
        let gen = BinaryMask::full(g);
        let dp = densepose_with_part(g, 0..2);
        let policy = ShiftPolicy::stretch_down("antenna", 0);
        assert_eq!(
            stretch_down(&gen, &dp, &policy),
            Err(AdjustError::UnknownPart("antenna".into()))
        );
    }

    #[test]
    fn shrink_up_degenerate_range_is_seed_independent() {
        let g = grid(8, 12);
        let gen = BinaryMask::from_fn(g, |r, _| (2..=9).contains(&r)); // box height 8
        let a = shrink_up(&gen, &ShiftPolicy::shrink_up((0.25, 0.25), 1)).unwrap();
        let b = shrink_up(&gen, &ShiftPolicy::shrink_up((0.25, 0.25), 999)).unwrap();
        assert_eq!(a, b);
        // δ = round(0.25 * 8) = 2 rows cleared within the box
        let cleared_rows: Vec<u32> = (0..12).filter(|&r| a.residual.get(r, 0)).collect();
        assert_eq!(cleared_rows, vec![8, 9]);
    }

    #[test]
    fn shrink_up_set_identities_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let g = grid(16, 16);
        for i in 0..500 {
            let gen = random_column_runs(g, &mut rng);
            if gen.is_empty() {
                continue;
            }
            let policy = ShiftPolicy::shrink_up((0.15, 0.45), i);
            let out = shrink_up(&gen, &policy).unwrap();
            assert_eq!(mask_union(&out.adjusted, &out.residual).unwrap(), gen);
            assert!(mask_intersect(&out.adjusted, &out.residual).unwrap().is_empty());
            assert!(out.adjusted.is_subset_of(&gen).unwrap());
        }
    }

    #[test]
    fn shrink_up_same_seed_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let g = grid(16, 16);
        let gen = random_column_runs(g, &mut rng);
        let policy = ShiftPolicy::shrink_up((0.15, 0.45), 7);
        assert_eq!(shrink_up(&gen, &policy).unwrap(), shrink_up(&gen, &policy).unwrap());
    }

    #[test]
    fn shrink_up_rejects_empty_mask_and_bad_range() {
        let g = grid(4, 4);
        assert_eq!(
            shrink_up(&BinaryMask::empty(g), &ShiftPolicy::shrink_up((0.2, 0.4), 0)),
            Err(AdjustError::EmptyMask)
        );
        assert!(matches!(
            shrink_up(&BinaryMask::full(g), &ShiftPolicy::shrink_up((0.0, 0.4), 0)),
            Err(AdjustError::BadRange(..))
        ));
        assert!(matches!(
            shrink_up(&BinaryMask::full(g), &ShiftPolicy::shrink_up((0.5, 0.4), 0)),
            Err(AdjustError::BadRange(..))
        ));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let g = grid(4, 4);
        let dp = densepose_with_part(g, 0..2);
        assert!(matches!(
            stretch_down(&BinaryMask::full(g), &dp, &ShiftPolicy::shrink_up((0.2, 0.4), 0)),
            Err(AdjustError::ModeMismatch(ShiftMode::ShrinkUp))
        ));
        assert!(matches!(
            shrink_up(&BinaryMask::full(g), &ShiftPolicy::stretch_down("upper_leg", 0)),
            Err(AdjustError::ModeMismatch(ShiftMode::StretchDown))
        ));
    }

    #[test]
    fn inpaint_request_cases() {
        let g = grid(4, 4);
        let img = RgbImage::filled(g, [10, 20, 30]);
        let empty = BinaryMask::empty(g);
        assert!(inpaint_request(&img, &empty).unwrap().is_noop());

        let mut region = BinaryMask::empty(g);
        region.set(1, 1, true);
        region.set(2, 3, true);
        let req = inpaint_request(&img, &region).unwrap();
        assert_eq!(req.region.count_ones(), 2);

        let other = RgbImage::filled(grid(5, 4), [0, 0, 0]);
        assert!(matches!(
            inpaint_request(&other, &region),
            Err(AdjustError::Mask(MaskError::GridMismatch(..)))
        ));
    }
}
