//! Structural similarity from scratch.
//!
//! Uniform (unweighted) sliding windows over the BT.601 luminance
//! channel, population statistics per window, the two conventional
//! stabilizers for 8-bit dynamic range, and the mean over all window
//! positions. Window sums come from integral images, so the cost is
//! independent of window size; the test suite checks the result against
//! a naive per-window reference.

use crate::maskcore::{ImageGrid, RgbImage};

use super::EvalError;

pub const DEFAULT_SSIM_WINDOW: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConstants {
    fn default() -> Self {
        // k1 = 0.01, k2 = 0.03 over the 8-bit dynamic range L = 255
        SsimConstants { c1: (0.01 * 255.0) * (0.01 * 255.0), c2: (0.03 * 255.0) * (0.03 * 255.0) }
    }
}

fn luminance(img: &RgbImage) -> Vec<f64> {
    img.pixels()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Integral image with a zero row/column border: `I[r][c]` is the sum of
/// all values strictly above and left of (r, c).
fn integral(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    let w1 = width + 1;
    let mut out = vec![0.0; w1 * (height + 1)];
    for r in 0..height {
        let mut row_sum = 0.0;
        for c in 0..width {
            row_sum += values[r * width + c];
            out[(r + 1) * w1 + c + 1] = out[r * w1 + c + 1] + row_sum;
        }
    }
    out
}

fn window_sum(integral: &[f64], w1: usize, top: usize, left: usize, size: usize) -> f64 {
    let (b, r) = (top + size, left + size);
    integral[b * w1 + r] - integral[top * w1 + r] - integral[b * w1 + left]
        + integral[top * w1 + left]
}

pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, EvalError> {
    ssim_with(a, b, DEFAULT_SSIM_WINDOW, SsimConstants::default())
}

pub fn ssim_with(
    a: &RgbImage,
    b: &RgbImage,
    window: u32,
    constants: SsimConstants,
) -> Result<f64, EvalError> {
    ImageGrid::check(a.grid(), b.grid())?;
    if window == 0 {
        return Err(EvalError::ZeroWindow);
    }
    let grid = a.grid();
    if window > grid.width || window > grid.height {
        return Err(EvalError::WindowTooLarge {
            window,
            width: grid.width,
            height: grid.height,
        });
    }

    let (w, h, k) = (grid.width as usize, grid.height as usize, window as usize);
    let x = luminance(a);
    let y = luminance(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();

    let ix = integral(&x, w, h);
    let iy = integral(&y, w, h);
    let ixx = integral(&xx, w, h);
    let iyy = integral(&yy, w, h);
    let ixy = integral(&xy, w, h);

    let n = (k * k) as f64;
    let w1 = w + 1;
    let mut sum = 0.0;
    let mut windows = 0usize;
    for top in 0..=h - k {
        for left in 0..=w - k {
            let mx = window_sum(&ix, w1, top, left, k) / n;
            let my = window_sum(&iy, w1, top, left, k) / n;
            let vx = window_sum(&ixx, w1, top, left, k) / n - mx * mx;
            let vy = window_sum(&iyy, w1, top, left, k) / n - my * my;
            let cov = window_sum(&ixy, w1, top, left, k) / n - mx * my;
            let num = (2.0 * mx * my + constants.c1) * (2.0 * cov + constants.c2);
            let den = (mx * mx + my * my + constants.c1) * (vx + vy + constants.c2);
            sum += num / den;
            windows += 1;
        }
    }
    Ok(sum / windows as f64)
}
