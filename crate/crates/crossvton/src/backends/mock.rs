//! Deterministic mock backends.
//!
//! The mocks and the procedural corpus generator (pipeline::corpus) share
//! one color convention: every semantic class in a generated figure has a
//! fixed flat color, so the mock parser can recover the generator's
//! ground-truth labels exactly and tests can use the generator as its own
//! oracle.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::maskcore::{
    assemble_trizone, extract_class_mask, mask_union, BinaryMask, ImageGrid, LabelMap, RgbImage,
    TriZoneMask, Zone,
};

use super::{
    parse_verdict, BackendError, DenseposeBackend, InpaintBackend, JudgeBackend, JudgeVerdict,
    MaskPayload, ParseBackend, TriZoneBackend, TryOnBackend, TryOnRequest,
};

// The shared color convention for procedural figures.
pub const COLOR_BACKGROUND: [u8; 3] = [245, 245, 245];
pub const COLOR_FACE: [u8; 3] = [250, 220, 190];
pub const COLOR_SKIN: [u8; 3] = [230, 180, 140];
pub const COLOR_UPPER_A: [u8; 3] = [200, 30, 30];
pub const COLOR_UPPER_B: [u8; 3] = [160, 30, 60];
pub const COLOR_DRESS_A: [u8; 3] = [30, 160, 30];
pub const COLOR_DRESS_B: [u8; 3] = [30, 120, 90];
pub const COLOR_LOWER_A: [u8; 3] = [30, 30, 200];
pub const COLOR_LOWER_B: [u8; 3] = [60, 30, 160];

pub const CLASS_BACKGROUND: &str = "background";
pub const CLASS_FACE: &str = "face";
pub const CLASS_SKIN: &str = "skin";
pub const CLASS_UPPER: &str = "upper_garment";
pub const CLASS_DRESS: &str = "dress";
pub const CLASS_LOWER: &str = "lower_garment";

/// Garment classes worn on a figure, in palette-label order.
pub const GARMENT_CLASSES: [&str; 3] = [CLASS_UPPER, CLASS_DRESS, CLASS_LOWER];

fn parse_palette() -> BTreeMap<u8, String> {
    [
        (0u8, CLASS_BACKGROUND),
        (1, CLASS_FACE),
        (2, CLASS_SKIN),
        (3, CLASS_UPPER),
        (4, CLASS_DRESS),
        (5, CLASS_LOWER),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect()
}

fn classify_color(rgb: [u8; 3]) -> u8 {
    match rgb {
        COLOR_FACE => 1,
        COLOR_SKIN => 2,
        COLOR_UPPER_A | COLOR_UPPER_B => 3,
        COLOR_DRESS_A | COLOR_DRESS_B => 4,
        COLOR_LOWER_A | COLOR_LOWER_B => 5,
        _ => 0,
    }
}

/// Parser mock: classifies pixels by the exact corpus colors. A
/// constant-color image (e.g. a flat garment swatch) is all background —
/// a swatch is not a person wearing anything.
#[derive(Debug, Default, Clone)]
pub struct MockParse;

impl ParseBackend for MockParse {
    fn parse_human(&self, image: &RgbImage) -> Result<LabelMap, BackendError> {
        let grid = image.grid();
        let constant = is_constant(image);
        let mut labels = Vec::with_capacity(grid.area());
        for r in 0..grid.height {
            for c in 0..grid.width {
                labels.push(if constant { 0 } else { classify_color(image.get(r, c)) });
            }
        }
        Ok(LabelMap::new(grid, labels, parse_palette())?)
    }

    fn descriptor(&self) -> String {
        "mock:parse".to_string()
    }
}

fn is_constant(image: &RgbImage) -> bool {
    let first = image.get(0, 0);
    let grid = image.grid();
    (0..grid.height).all(|r| (0..grid.width).all(|c| image.get(r, c) == first))
}

pub const PART_HEAD: &str = "head";
pub const PART_TORSO: &str = "torso";
pub const PART_UPPER_LEG: &str = "upper_leg";
pub const PART_LOWER_LEG: &str = "lower_leg";

fn densepose_palette() -> BTreeMap<u8, String> {
    [
        (0u8, CLASS_BACKGROUND),
        (1, PART_HEAD),
        (2, PART_TORSO),
        (3, PART_UPPER_LEG),
        (4, PART_LOWER_LEG),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect()
}

/// Densepose mock: labels foreground pixels by their row position within
/// the figure's vertical extent — head / torso / upper_leg / lower_leg in
/// fixed proportional bands. Clothing color does not matter; body layout
/// is a function of pose (row) alone, which is exactly the property the
/// mask-adjustment strategies rely on.
#[derive(Debug, Default, Clone)]
pub struct MockDensepose;

const BAND_HEAD_END: f64 = 0.20;
const BAND_TORSO_END: f64 = 0.55;
const BAND_UPPER_LEG_END: f64 = 0.80;

impl DenseposeBackend for MockDensepose {
    fn densepose(&self, image: &RgbImage) -> Result<LabelMap, BackendError> {
        let grid = image.grid();
        let constant = is_constant(image);
        let fg = |r: u32, c: u32| !constant && classify_color(image.get(r, c)) != 0;

        let mut top = None;
        let mut bottom = None;
        for r in 0..grid.height {
            if (0..grid.width).any(|c| fg(r, c)) {
                top.get_or_insert(r);
                bottom = Some(r);
            }
        }

        let mut labels = vec![0u8; grid.area()];
        if let (Some(top), Some(bottom)) = (top, bottom) {
            let extent = (bottom - top + 1) as f64;
            for r in 0..grid.height {
                for c in 0..grid.width {
                    if !fg(r, c) {
                        continue;
                    }
                    let p = (r - top) as f64 / extent;
                    let part = if p < BAND_HEAD_END {
                        1
                    } else if p < BAND_TORSO_END {
                        2
                    } else if p < BAND_UPPER_LEG_END {
                        3
                    } else {
                        4
                    };
                    labels[(r * grid.width + c) as usize] = part;
                }
            }
        }
        Ok(LabelMap::new(grid, labels, densepose_palette())?)
    }

    fn descriptor(&self) -> String {
        "mock:densepose".to_string()
    }
}

/// Try-on mock: pastes garment pixels into the generation region
/// (tiling the garment image if grids differ) and copies the model image
/// elsewhere. With a tri-zone mask the generation region is
/// TRYON ∪ IMAGI; with no mask the model image passes through.
#[derive(Debug, Default, Clone)]
pub struct MockTryOn;

impl TryOnBackend for MockTryOn {
    fn tryon(&self, req: &TryOnRequest) -> Result<RgbImage, BackendError> {
        let grid = req.model_image.grid();
        let region: Option<BinaryMask> = match &req.mask {
            MaskPayload::None => None,
            MaskPayload::Binary(m) => Some(m.clone()),
            MaskPayload::TriZone(m) => {
                Some(mask_union(&m.zone_mask(Zone::Tryon), &m.zone_mask(Zone::Imagi))?)
            }
        };
        let g = &req.garment_image;
        let gg = g.grid();
        let out = req.model_image.map(|r, c, rgb| match &region {
            Some(m) if m.get(r, c) => g.get(r % gg.height, c % gg.width),
            _ => rgb,
        });
        debug_assert_eq!(out.grid(), grid);
        Ok(out)
    }

    fn descriptor(&self) -> String {
        "mock:tryon".to_string()
    }
}

/// Inpainting mock: each region pixel takes the color of the nearest
/// non-region pixel above it in the same column, else the nearest below,
/// else mid-gray. Output differs from the input only inside the region.
#[derive(Debug, Default, Clone)]
pub struct MockInpaint;

const INPAINT_FALLBACK: [u8; 3] = [128, 128, 128];

impl InpaintBackend for MockInpaint {
    fn inpaint(&self, image: &RgbImage, region: &BinaryMask) -> Result<RgbImage, BackendError> {
        ImageGrid::check(image.grid(), region.grid())?;
        let grid = image.grid();
        let out = image.map(|r, c, rgb| {
            if !region.get(r, c) {
                return rgb;
            }
            for up in (0..r).rev() {
                if !region.get(up, c) {
                    return image.get(up, c);
                }
            }
            for down in r + 1..grid.height {
                if !region.get(down, c) {
                    return image.get(down, c);
                }
            }
            INPAINT_FALLBACK
        });
        Ok(out)
    }

    fn descriptor(&self) -> String {
        "mock:inpaint".to_string()
    }
}

/// Tri-zone predictor mock: the try-on zone is the worn-garment region
/// recovered by the mock parser; the imagination zone is empty (a
/// maximally conservative prediction). An unclothed or constant image
/// yields an all-reconstruction mask, which the pipeline flags as
/// degenerate.
#[derive(Debug, Default, Clone)]
pub struct MockTriZone;

impl TriZoneBackend for MockTriZone {
    fn predict_trizone(
        &self,
        model_image: &RgbImage,
        _garment_image: &RgbImage,
    ) -> Result<TriZoneMask, BackendError> {
        let pm = MockParse.parse_human(model_image)?;
        let grid = model_image.grid();
        let mut tryon = BinaryMask::empty(grid);
        for class in GARMENT_CLASSES {
            tryon = mask_union(&tryon, &extract_class_mask(&pm, class)?)?;
        }
        Ok(assemble_trizone(&tryon, &BinaryMask::empty(grid))?)
    }

    fn descriptor(&self) -> String {
        "mock:trizone".to_string()
    }
}

/// One step of a scripted judge: a canned reply or a simulated
/// transient failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedStep {
    Reply(String),
    Fail,
}

/// Judge mock that replays a fixed verdict script in call order.
#[derive(Debug)]
pub struct ScriptedJudge {
    steps: Vec<ScriptedStep>,
    next: Mutex<usize>,
}

impl ScriptedJudge {
    pub fn new(steps: Vec<ScriptedStep>) -> Self {
        ScriptedJudge { steps, next: Mutex::new(0) }
    }

    /// One step per nonblank line: `R`/`reasonable`, `U`/`unreasonable`,
    /// `F`/`fail`; any other line is used verbatim as the raw reply.
    pub fn from_script(text: &str) -> Self {
        let steps = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| match line.to_lowercase().as_str() {
                "r" | "reasonable" => ScriptedStep::Reply("reasonable".to_string()),
                "u" | "unreasonable" => ScriptedStep::Reply("unreasonable".to_string()),
                "f" | "fail" => ScriptedStep::Fail,
                _ => ScriptedStep::Reply(line.to_string()),
            })
            .collect();
        ScriptedJudge::new(steps)
    }

    pub fn remaining(&self) -> usize {
        self.steps.len() - *self.next.lock().unwrap()
    }
}

impl JudgeBackend for ScriptedJudge {
    fn judge(&self, _triptych: &RgbImage, prompt: &str) -> Result<JudgeVerdict, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Protocol("empty judge prompt".to_string()));
        }
        let mut next = self.next.lock().unwrap();
        let step = self
            .steps
            .get(*next)
            .cloned()
            .ok_or(BackendError::ScriptExhausted(self.steps.len()))?;
        *next += 1;
        drop(next);
        match step {
            ScriptedStep::Fail => Err(BackendError::Timeout { attempts: 1 }),
            ScriptedStep::Reply(reply) => parse_verdict(&reply),
        }
    }

    fn descriptor(&self) -> String {
        "mock:judge".to_string()
    }
}
