//! PSNR, SSIM and the relative-change stopping quantity.

use crate::error::Result;
use crate::grid::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsnrMode {
    /// `10 log10(max(ref)^2 / MSE)`.
    #[default]
    Mse,
    /// `10 log10(max(ref)^2 / ‖ref - test‖_F^2)`, without the pixel-count normalization.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical images.
pub fn psnr(reference: &ImageGrid, test: &ImageGrid, mode: PsnrMode) -> Result<f64> {
    reference.ensure_same_shape(test)?;
    let sq = reference.distance(test).powi(2);
    if sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    let denom = match mode {
        PsnrMode::Mse => sq / reference.len() as f64,
        PsnrMode::Literal => sq,
    };
    let peak = reference.max();
    Ok(10.0 * (peak * peak / denom).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 1.0;

fn gaussian_kernel(len: usize) -> Vec<f64> {
    let center = (len as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" correlation of a row-major buffer.
fn filter_valid(data: &[f64], rows: usize, cols: usize, kr: &[f64], kc: &[f64]) -> Vec<f64> {
    let out_cols = cols - kc.len() + 1;
    let out_rows = rows - kr.len() + 1;
    let mut horiz = vec![0.0; rows * out_cols];
    for i in 0..rows {
        let row = &data[i * cols..(i + 1) * cols];
        for j in 0..out_cols {
            horiz[i * out_cols + j] = kc.iter().zip(&row[j..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; out_rows * out_cols];
    for i in 0..out_rows {
        for j in 0..out_cols {
            out[i * out_cols + j] = kr
                .iter()
                .enumerate()
                .map(|(t, k)| k * horiz[(i + t) * out_cols + j])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (`sigma = 1.5`,
/// `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = 1`). Images narrower than the
/// window use a window truncated to the image extent.
pub fn ssim(reference: &ImageGrid, test: &ImageGrid) -> Result<f64> {
    reference.ensure_same_shape(test)?;
    let (rows, cols) = reference.shape();
    let kr = gaussian_kernel(SSIM_WINDOW.min(rows));
    let kc = gaussian_kernel(SSIM_WINDOW.min(cols));
    let x = reference.as_slice();
    let y = test.as_slice();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, rows, cols, &kr, &kc);
    let mu_y = filter_valid(y, rows, cols, &kr, &kc);
    let e_xx = filter_valid(&xx, rows, cols, &kr, &kc);
    let e_yy = filter_valid(&yy, rows, cols, &kr, &kc);
    let e_xy = filter_valid(&xy, rows, cols, &kr, &kc);

    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|k| {
            let (mx, my) = (mu_x[k], mu_y[k]);
            let mxx = mx * mx;
            let myy = my * my;
            let mxy = mx * my;
            let sxx = e_xx[k] - mxx;
            let syy = e_yy[k] - myy;
            let sxy = e_xy[k] - mxy;
            ((2.0 * mxy + c1) * (2.0 * sxy + c2)) / ((mxx + myy + c1) * (sxx + syy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

pub fn quality(reference: &ImageGrid, test: &ImageGrid, mode: PsnrMode) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(reference, test, mode)?,
        ssim: ssim(reference, test)?,
    })
}

/// `‖current - previous‖_F / ‖previous‖_F`, or the absolute change when
/// `previous` is zero.
pub fn rel_change(current: &ImageGrid, previous: &ImageGrid) -> Result<f64> {
    previous.ensure_same_shape(current)?;
    let diff = current.distance(previous);
    let base = previous.frobenius_norm();
    Ok(if base == 0.0 { diff } else { diff / base })
}
