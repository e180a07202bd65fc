//! Evaluation protocol: triptych splicing, the MLLM-judge accuracy loop,
//! and a from-scratch SSIM.
//!
//! The judge sees one spliced image — input model on the left, target
//! garment in the middle, try-on result on the right — together with a
//! fixed prompt, and answers reasonable/unreasonable. Acc is the
//! fraction of reasonable verdicts over successfully judged cases;
//! failed calls are counted separately and excluded from the
//! denominator.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::backends::{BackendError, JudgeBackend, Verdict};
use crate::maskcore::{GarmentSpec, ImageGrid, MaskError, RgbImage};

mod ssim;

pub use ssim::{ssim, ssim_with, SsimConstants, DEFAULT_SSIM_WINDOW};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Mask(#[from] MaskError),
    #[error("window {window} larger than image {width}x{height}")]
    WindowTooLarge { window: u32, width: u32, height: u32 },
    #[error("window size must be at least 1")]
    ZeroWindow,
}

/// One try-on outcome to judge.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub id: String,
    pub model_image: RgbImage,
    pub garment_image: RgbImage,
    pub result_image: RgbImage,
    /// (target-garment spec, source-model garment spec).
    pub category_pair: (GarmentSpec, GarmentSpec),
}

#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    /// When set, every panel is rescaled to this height (aspect
    /// preserved, nearest neighbor) before splicing — for real MLLM
    /// endpoints with input-size limits. Default: pad-only, no rescale.
    pub resize_height: Option<u32>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CategoryTally {
    pub judged: usize,
    pub reasonable: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccReport {
    pub total: usize,
    pub reasonable: usize,
    pub failures: usize,
    /// reasonable / (total − failures); undefined when nothing was judged.
    pub acc: Option<f64>,
    pub per_category: BTreeMap<(GarmentSpec, GarmentSpec), CategoryTally>,
}

impl AccReport {
    pub fn judged(&self) -> usize {
        self.total - self.failures
    }

    /// Human-readable summary block plus per-category table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "cases: {}  judged: {}  reasonable: {}  failures: {}\n",
            self.total,
            self.judged(),
            self.reasonable,
            self.failures
        ));
        match self.acc {
            Some(acc) => out.push_str(&format!("acc: {acc:.4}\n")),
            None => out.push_str("acc: undefined (no judged cases)\n"),
        }
        for ((pc, pg), tally) in &self.per_category {
            let frac = if tally.judged == 0 {
                "undefined".to_string()
            } else {
                format!("{:.4}", tally.reasonable as f64 / tally.judged as f64)
            };
            out.push_str(&format!(
                "  pc={pc} pg={pg} judged={} reasonable={} acc={frac}\n",
                tally.judged, tally.reasonable
            ));
        }
        out
    }
}

const WHITE: [u8; 3] = [255, 255, 255];

/// Horizontal concatenation model|garment|result; shorter panels are
/// bottom-padded with white to the tallest panel's height. Source
/// pixels are arranged, never altered.
pub fn splice_triptych(model: &RgbImage, garment: &RgbImage, result: &RgbImage) -> RgbImage {
    let panels = [model, garment, result];
    let height = panels.iter().map(|p| p.grid().height).max().unwrap();
    let width: u32 = panels.iter().map(|p| p.grid().width).sum();
    let grid = ImageGrid::new(width, height).expect("panel grids are valid");
    let mut pixels = Vec::with_capacity(grid.area() * 3);
    for r in 0..height {
        for p in panels {
            let pg = p.grid();
            for c in 0..pg.width {
                let rgb = if r < pg.height { p.get(r, c) } else { WHITE };
                pixels.extend_from_slice(&rgb);
            }
        }
    }
    RgbImage::new(grid, pixels).expect("pixel count matches grid")
}

/// Nearest-neighbor rescale to `height`, preserving aspect ratio.
fn resize_to_height(img: &RgbImage, height: u32) -> RgbImage {
    let src = img.grid();
    if src.height == height {
        return img.clone();
    }
    let width = ((src.width as u64 * height as u64) / src.height as u64).max(1) as u32;
    let grid = ImageGrid::new(width, height).expect("nonzero target size");
    let mut pixels = Vec::with_capacity(grid.area() * 3);
    for r in 0..height {
        let sr = (r as u64 * src.height as u64 / height as u64) as u32;
        for c in 0..width {
            let sc = (c as u64 * src.width as u64 / width as u64) as u32;
            pixels.extend_from_slice(&img.get(sr, sc));
        }
    }
    RgbImage::new(grid, pixels).expect("pixel count matches grid")
}

/// The judge prompt, byte-for-byte. The typographic apostrophes and the
/// inconsistent quoting are deliberate and must not be "fixed".
pub fn acc_qwen_prompt() -> &'static str {
    "I used the virtual try-on algorithm to replace the model\u{2018}s garment in the left-hand \
     image with the garment in the middle. Then produced the output on the right. If the overall \
     model image on the right is reasonable and matches the type and style of the middle-image \
     clothing, it\u{2019}s considered reasonable. If the output image is the same as the input \
     model image or the garment of output is not consistent with the middle image, the output is \
     unreasonable. You only need to judge if it's reasonable. Reply \"reasonable\" if it is, and \
     \"unreasonable\" if not."
}

/// Runs the full judge loop and tallies Acc. Failed judge calls
/// (timeouts, unparseable replies) never abort the run; they are
/// excluded from the denominator and counted as failures.
pub fn evaluate_acc(
    cases: &[EvalCase],
    judge: &dyn JudgeBackend,
    config: &EvalConfig,
) -> AccReport {
    let prompt = acc_qwen_prompt();
    let mut reasonable = 0;
    let mut failures = 0;
    let mut per_category: BTreeMap<(GarmentSpec, GarmentSpec), CategoryTally> = BTreeMap::new();

    for case in cases {
        let triptych = match config.resize_height {
            Some(h) => splice_triptych(
                &resize_to_height(&case.model_image, h),
                &resize_to_height(&case.garment_image, h),
                &resize_to_height(&case.result_image, h),
            ),
            None => splice_triptych(&case.model_image, &case.garment_image, &case.result_image),
        };
        let tally = per_category
            .entry(case.category_pair)
            .or_insert(CategoryTally { judged: 0, reasonable: 0 });
        match judge.judge(&triptych, prompt) {
            Ok(v) => {
                tally.judged += 1;
                if v.verdict == Verdict::Reasonable {
                    tally.reasonable += 1;
                    reasonable += 1;
                }
            }
            Err(BackendError::ScriptExhausted(n)) => {
                // a misconfigured script is a harness bug, not a judge failure
                panic!("judge script exhausted after {n} steps");
            }
            Err(_) => failures += 1,
        }
    }

    let judged = cases.len() - failures;
    AccReport {
        total: cases.len(),
        reasonable,
        failures,
        acc: if judged == 0 { None } else { Some(reasonable as f64 / judged as f64) },
        per_category,
    }
}
