//! Reconstruction quality: RMSE, SSIM, phase-aligned complex error.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::recon::align_phase;

// ---------------------------------------------------------------------------
// Image grid
// ---------------------------------------------------------------------------

/// Nonnegative magnitude image on the scene lattice. 3D grids are held as
/// stacked 2D slices (x fastest, then y, then z — the grid enumeration
/// order).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    values: Vec<f64>,
    shape: [usize; 3],
    /// Dynamic range L used for SSIM constants.
    dynamic_range: f64,
}

impl ImageGrid {
    pub fn from_magnitudes(values: Vec<f64>, shape: [usize; 3]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid("image.shape", "counts must be >= 1"));
        }
        if values.len() != shape[0] * shape[1] * shape[2] {
            return Err(Error::DimensionMismatch(format!(
                "{} values vs shape {:?}",
                values.len(),
                shape
            )));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("image.values", "must be finite and >= 0"));
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        Ok(Self { values, shape, dynamic_range: if max > 0.0 { max } else { 1.0 } })
    }

    /// Magnitudes of a complex estimate, in grid order.
    pub fn from_complex(values: &DVector<Complex64>, shape: [usize; 3]) -> Result<Self> {
        Self::from_magnitudes(values.iter().map(|z| z.norm()).collect(), shape)
    }

    pub fn with_dynamic_range(mut self, l: f64) -> Result<Self> {
        if !l.is_finite() || l <= 0.0 {
            return Err(Error::invalid("image.dynamic_range", "must be > 0"));
        }
        self.dynamic_range = l;
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[(z * self.shape[1] + y) * self.shape[0] + x]
    }
}

/// Combined quality report for one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub ssim: f64,
    /// `min_phi ||e^{j phi} z - s|| / ||s||`.
    pub phase_aligned_error: f64,
}

/// Score a complex estimate against the ground truth: RMSE and SSIM on
/// the magnitude images, phase-aligned error on the complex vectors.
pub fn metric_report(
    estimate: &DVector<Complex64>,
    truth: &DVector<Complex64>,
    truth_image: &ImageGrid,
    ssim_opts: &SsimOptions,
) -> Result<MetricReport> {
    let est_image = ImageGrid::from_complex(estimate, truth_image.shape())?;
    Ok(MetricReport {
        rmse: rmse(&est_image, truth_image)?,
        ssim: ssim(&est_image, truth_image, ssim_opts)?,
        phase_aligned_error: complex_error(estimate, truth)?.value,
    })
}

// ---------------------------------------------------------------------------
// RMSE
// ---------------------------------------------------------------------------

/// Root-mean-square error over all cells.
pub fn rmse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::DimensionMismatch(format!(
            "rmse shapes {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let n = a.values.len() as f64;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / n).sqrt())
}

// ---------------------------------------------------------------------------
// SSIM
// ---------------------------------------------------------------------------

/// SSIM configuration. Constants follow the standard form
/// `C1 = (k1 L)^2`, `C2 = (k2 L)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimOptions {
    /// Square window side; must be odd and fit in each slice.
    pub window: usize,
    /// Gaussian window sigma.
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range L; `None` uses the larger of the two images' ranges
    /// (keeps the operation symmetric).
    pub dynamic_range: Option<f64>,
}

impl Default for SsimOptions {
    fn default() -> Self {
        Self { window: 7, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: None }
    }
}

impl SsimOptions {
    /// Largest usable odd window for a grid shape, capped at the default 7.
    pub fn fitted_to(shape: [usize; 3]) -> Self {
        let min_dim = shape[0].min(shape[1]).max(1);
        let mut window = 7usize.min(min_dim);
        if window.is_multiple_of(2) {
            window -= 1;
        }
        Self { window: window.max(1), ..Default::default() }
    }
}

/// Mean structural similarity over Gaussian-weighted sliding windows.
/// 3D grids are scored per z-slice and averaged.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, opts: &SsimOptions) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::DimensionMismatch(format!(
            "ssim shapes {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let [nx, ny, nz] = a.shape;
    let w = opts.window;
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::invalid("ssim.window", "must be odd and >= 1"));
    }
    if w > nx || w > ny {
        return Err(Error::invalid(
            "ssim.window",
            format!("window {w} exceeds slice dimensions {nx}x{ny}"),
        ));
    }
    let l = opts
        .dynamic_range
        .unwrap_or_else(|| a.dynamic_range.max(b.dynamic_range));
    let c1 = (opts.k1 * l).powi(2);
    let c2 = (opts.k2 * l).powi(2);
    let kernel = gaussian_kernel(w, opts.sigma);

    let mut slice_scores = Vec::with_capacity(nz);
    for z in 0..nz {
        let mut total = 0.0;
        let mut count = 0usize;
        for y0 in 0..=(ny - w) {
            for x0 in 0..=(nx - w) {
                total += window_ssim(a, b, x0, y0, z, &kernel, w, c1, c2);
                count += 1;
            }
        }
        slice_scores.push(total / count as f64);
    }
    Ok(slice_scores.iter().sum::<f64>() / nz as f64)
}

/// Normalized separable Gaussian weights for a w x w window.
fn gaussian_kernel(w: usize, sigma: f64) -> Vec<f64> {
    let half = (w as f64 - 1.0) / 2.0;
    let line: Vec<f64> = (0..w)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut kernel = Vec::with_capacity(w * w);
    for y in 0..w {
        for x in 0..w {
            kernel.push(line[y] * line[x]);
        }
    }
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }
    kernel
}

#[allow(clippy::too_many_arguments)]
fn window_ssim(
    a: &ImageGrid,
    b: &ImageGrid,
    x0: usize,
    y0: usize,
    z: usize,
    kernel: &[f64],
    w: usize,
    c1: f64,
    c2: f64,
) -> f64 {
    let mut mu_a = 0.0;
    let mut mu_b = 0.0;
    for dy in 0..w {
        for dx in 0..w {
            let k = kernel[dy * w + dx];
            mu_a += k * a.at(x0 + dx, y0 + dy, z);
            mu_b += k * b.at(x0 + dx, y0 + dy, z);
        }
    }
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for dy in 0..w {
        for dx in 0..w {
            let k = kernel[dy * w + dx];
            let da = a.at(x0 + dx, y0 + dy, z) - mu_a;
            let db = b.at(x0 + dx, y0 + dy, z) - mu_b;
            var_a += k * da * da;
            var_b += k * db * db;
            cov += k * da * db;
        }
    }
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

// ---------------------------------------------------------------------------
// Phase-aligned complex error
// ---------------------------------------------------------------------------

/// Result of [`complex_error`]; the flag marks a zero reference, in which
/// case the value is the absolute norm of `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseAlignedError {
    pub value: f64,
    pub reference_was_zero: bool,
}

/// `min_phi ||e^{j phi} z - s|| / ||s||`.
pub fn complex_error(z: &DVector<Complex64>, s: &DVector<Complex64>) -> Result<PhaseAlignedError> {
    let (aligned, zero_ref) = align_phase(z, s)?;
    if zero_ref {
        return Ok(PhaseAlignedError { value: z.norm(), reference_was_zero: true });
    }
    Ok(PhaseAlignedError {
        value: (aligned - s).norm() / s.norm(),
        reference_was_zero: false,
    })
}
