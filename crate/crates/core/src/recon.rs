//! Scene reconstruction.
//!
//! Two solvers: complex least squares for full (phase-bearing)
//! measurements, and a reweighted Wirtinger-flow solver for
//! amplitude-only measurements.
//!
//! The amplitude solver works on intensities `y_i = |y|_i^2` with the
//! weighted objective
//!
//! ```text
//! f(z) = 1/(2m) sum_i w_i (|<h_i, z>|^2 - y_i)^2,
//! w_i  = 1 / (| |<h_i, z_prev>|^2 - y_i | + eta)
//! ```
//!
//! where `<h_i, z>` is sample i of `H z`. Each outer iteration refreshes
//! the weights at the current iterate and then takes a small number of
//! gradient steps on the frozen-weight objective. The gradient used is
//! the conjugate-coordinate derivative scaled to match the real gradient,
//! `g = (2/m) H^H (w .* r .* (H z))`, so finite differences over the real
//! and imaginary parts reproduce it directly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::forward::{ImagingMatrix, MeasurementSet};

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

/// Least-squares solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LsSolverKind {
    /// SVD pseudo-inverse; returns the minimum-norm solution when rank
    /// deficient.
    #[default]
    Direct,
    /// Conjugate gradient on the normal equations.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LSOptions {
    /// Tikhonov weight, >= 0.
    pub regularization: f64,
    pub solver: LsSolverKind,
}

/// Step-size policy for the gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepPolicy {
    /// Exact minimization along the negative gradient. The frozen-weight
    /// intensity objective is a quartic polynomial in the step, so the
    /// optimum is a cubic root. Falls back to backtracking for the
    /// amplitude loss, which is not polynomial.
    #[default]
    ExactLineSearch,
    /// Armijo backtracking from a curvature-scaled initial step.
    /// `initial_scale` multiplies the 1/L estimate.
    Backtracking { initial_scale: f64, shrink: f64, armijo_c: f64, max_backtracks: usize },
    /// Fixed absolute step.
    Fixed(f64),
}



const DEFAULT_BACKTRACKING: StepPolicy = StepPolicy::Backtracking {
    initial_scale: 1.0,
    shrink: 0.5,
    armijo_c: 1e-4,
    max_backtracks: 40,
};

/// Schedule for the weight-smoothing parameter eta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    /// `eta = fraction * mean(y_i)`, constant over iterations. Default
    /// fraction 0.1.
    MeanFraction(f64),
    /// Constant absolute value.
    Constant(f64),
    /// `eta_k = eta0 / k`.
    Decay { eta0: f64 },
}

impl Default for EtaPolicy {
    fn default() -> Self {
        EtaPolicy::MeanFraction(0.1)
    }
}

/// Which residual the amplitude solver penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Weighted squared intensity residuals; the operative algorithm.
    Intensity,
    /// Unweighted squared amplitude residuals, for comparison.
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WFOptions {
    /// Outer iteration budget.
    pub max_outer: usize,
    /// Gradient steps per outer iteration.
    pub inner_steps: usize,
    pub step: StepPolicy,
    pub eta: EtaPolicy,
    /// Stop when the relative iterate change drops below this.
    pub tolerance: f64,
    /// Replace the computed spectral-init norm.
    pub init_norm_override: Option<f64>,
    pub loss: LossKind,
    /// Keep per-iteration weight vectors in the result.
    pub record_weights: bool,
}

impl Default for WFOptions {
    fn default() -> Self {
        Self {
            max_outer: 2000,
            inner_steps: 1,
            step: StepPolicy::default(),
            eta: EtaPolicy::default(),
            tolerance: 1e-8,
            init_norm_override: None,
            loss: LossKind::Intensity,
            record_weights: false,
        }
    }
}

/// Solver output: estimate plus convergence bookkeeping.
///
/// For the amplitude solver, `objective_history[k]` is the self-weighted
/// loss at the iterate after outer iteration k (entry 0 is the
/// initialization), i.e. the weighted objective with weights recomputed
/// at that iterate. For least squares the history holds the single final
/// objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub estimate: DVector<Complex64>,
    pub objective_history: Vec<f64>,
    pub weight_snapshots: Option<Vec<Vec<f64>>>,
    pub converged: bool,
    pub iterations: usize,
    pub rank_deficient: bool,
}

impl ReconResult {
    /// Estimate as complex CSV (`re,im` per line).
    pub fn write_estimate_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im")?;
        for z in self.estimate.iter() {
            writeln!(out, "{:.17e},{:.17e}", z.re, z.im)?;
        }
        Ok(())
    }

    /// Objective history as CSV.
    pub fn write_history_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,objective")?;
        for (i, f) in self.objective_history.iter().enumerate() {
            writeln!(out, "{i},{f:.12e}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

/// Minimize `||H z - y||^2 + reg ||z||^2` over complex z.
///
/// With zero regularization and a rank-deficient matrix the direct solver
/// returns the minimum-norm least-squares solution and flags the
/// deficiency.
pub fn ls_reconstruct(
    h: &ImagingMatrix,
    y: &MeasurementSet,
    opts: &LSOptions,
) -> Result<ReconResult> {
    let yv = y.complex_values()?;
    let a = h.stacked();
    if yv.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements vs {} matrix rows",
            yv.len(),
            a.nrows()
        )));
    }
    if opts.regularization < 0.0 {
        return Err(Error::invalid("regularization", "must be >= 0"));
    }
    let (estimate, rank_deficient) = match opts.solver {
        LsSolverKind::Direct => ls_direct(a, yv, opts.regularization),
        LsSolverKind::Iterative => ls_cgls(a, yv, opts.regularization),
    };
    let residual = a * &estimate - yv;
    let objective = residual.norm_squared() + opts.regularization * estimate.norm_squared();
    Ok(ReconResult {
        estimate,
        objective_history: vec![objective],
        weight_snapshots: None,
        converged: true,
        iterations: 1,
        rank_deficient,
    })
}

fn ls_direct(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    reg: f64,
) -> (DVector<Complex64>, bool) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let tau = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max;

    // coefficients in the singular basis
    let uh_y = u.adjoint() * y;
    let mut coeffs = DVector::<Complex64>::zeros(sv.len());
    let mut effective_rank = 0usize;
    for i in 0..sv.len() {
        let s = sv[i];
        let gain = if reg > 0.0 {
            s / (s * s + reg)
        } else if s > tau {
            1.0 / s
        } else {
            0.0
        };
        if s > tau {
            effective_rank += 1;
        }
        coeffs[i] = uh_y[i] * Complex64::new(gain, 0.0);
    }
    let estimate = vt.adjoint() * coeffs;
    (estimate, effective_rank < a.ncols())
}

/// CGLS on the (regularized) normal equations, started from zero.
fn ls_cgls(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    reg: f64,
) -> (DVector<Complex64>, bool) {
    let n = a.ncols();
    let mut z = DVector::<Complex64>::zeros(n);
    let mut r = y.clone(); // residual in measurement space
    let mut p = a.adjoint() * &r; // conjugate direction, seeded by the gradient
    let mut s_norm2 = p.norm_squared();
    let target = 1e-10 * s_norm2.sqrt().max(f64::MIN_POSITIVE);
    let max_iter = 4 * n.max(a.nrows());
    for _ in 0..max_iter {
        if s_norm2.sqrt() <= target {
            break;
        }
        let ap = a * &p;
        let denom = ap.norm_squared() + reg * p.norm_squared();
        if denom <= 0.0 {
            break;
        }
        let alpha = Complex64::new(s_norm2 / denom, 0.0);
        z += &p * alpha;
        r -= ap * alpha;
        let mut s_next = a.adjoint() * &r;
        if reg > 0.0 {
            s_next -= &z * Complex64::new(reg, 0.0);
        }
        let s_next_norm2 = s_next.norm_squared();
        let beta = Complex64::new(s_next_norm2 / s_norm2, 0.0);
        p = &s_next + &p * beta;
        s_norm2 = s_next_norm2;
    }
    // cheap sufficient condition; the direct path does a full spectral check
    let deficient = a.nrows() < n;
    (z, deficient)
}

// ---------------------------------------------------------------------------
// Spectral initialization
// ---------------------------------------------------------------------------

/// Leading eigenvector of `Y = (1/m) sum_i y_i h_i h_i^H`, scaled to
/// `norm^2 = n * sum(y_i) / sum(||h_i||^2)` (or the override).
///
/// `intensities` are squared amplitudes. The eigenvector comes from power
/// iteration on the explicitly formed n x n matrix with a fixed,
/// deterministic start vector.
pub fn spectral_initialize(
    h: &DMatrix<Complex64>,
    intensities: &[f64],
    init_norm_override: Option<f64>,
) -> Result<DVector<Complex64>> {
    let m = h.nrows();
    let n = h.ncols();
    if intensities.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} intensities vs {} rows",
            intensities.len(),
            m
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty sensing matrix".into()));
    }
    let sum_y: f64 = intensities.iter().sum();
    if sum_y <= 0.0 || sum_y.is_nan() {
        return Err(Error::ZeroMeasurements);
    }

    // Y = (1/m) H^H diag(y) H
    let mut scaled = h.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        let w = Complex64::new(intensities[i] / m as f64, 0.0);
        for e in row.iter_mut() {
            *e *= w;
        }
    }
    let y_matrix = h.adjoint() * scaled;

    let v = power_iteration(&y_matrix, 1e-10, 10_000);

    let row_energy: f64 = h.row_iter().map(|r| r.norm_squared()).sum();
    let norm = match init_norm_override {
        Some(p) => {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid("init_norm", "override must be > 0"));
            }
            p
        }
        None => (n as f64 * sum_y / row_energy).sqrt(),
    };
    Ok(v * Complex64::new(norm, 0.0))
}

/// Power iteration for the dominant eigenvector of a Hermitian PSD matrix.
/// Deterministic start; stops when the eigen-residual is below `tol`
/// relative to the eigenvalue.
fn power_iteration(y: &DMatrix<Complex64>, tol: f64, max_iter: usize) -> DVector<Complex64> {
    let n = y.nrows();
    let mut rng = crate::rng::substream(0x5EED_1217, crate::rng::StreamDomain::Sweep, n as u64);
    let mut v = DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let nv = v.norm();
    if nv > 0.0 {
        v /= Complex64::new(nv, 0.0);
    }
    for _ in 0..max_iter {
        let w = y * &v;
        let wn = w.norm();
        if wn == 0.0 {
            break; // Y v = 0; any vector is as good as another
        }
        let next = w / Complex64::new(wn, 0.0);
        let lambda = (next.adjoint() * y * &next)[(0, 0)].re;
        let residual = (y * &next - &next * Complex64::new(lambda, 0.0)).norm();
        v = next;
        if residual <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Weights, objective, gradient
// ---------------------------------------------------------------------------

/// `w_i = 1 / (| |<h_i, z>|^2 - y_i | + eta)`; all weights in (0, 1/eta].
pub fn compute_weights(
    h: &DMatrix<Complex64>,
    z: &DVector<Complex64>,
    intensities: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    let u = h * z;
    Ok(u
        .iter()
        .zip(intensities)
        .map(|(ui, &yi)| 1.0 / ((ui.norm_sqr() - yi).abs() + eta))
        .collect())
}

fn weights_at(u: &DVector<Complex64>, intensities: &[f64], eta: f64) -> Vec<f64> {
    u.iter()
        .zip(intensities)
        .map(|(ui, &yi)| 1.0 / ((ui.norm_sqr() - yi).abs() + eta))
        .collect()
}

/// Weighted intensity objective `1/(2m) sum_i w_i (|u_i|^2 - y_i)^2` at
/// precomputed samples `u = H z`.
fn intensity_objective(u: &DVector<Complex64>, intensities: &[f64], weights: &[f64]) -> f64 {
    let m = u.len() as f64;
    let mut acc = 0.0;
    for ((ui, &yi), &wi) in u.iter().zip(intensities).zip(weights) {
        let r = ui.norm_sqr() - yi;
        acc += wi * r * r;
    }
    acc / (2.0 * m)
}

/// Amplitude objective `1/(2m) sum_i (b_i - |u_i|)^2`.
fn amplitude_objective(u: &DVector<Complex64>, amplitudes: &[f64]) -> f64 {
    let m = u.len() as f64;
    let mut acc = 0.0;
    for (ui, &bi) in u.iter().zip(amplitudes) {
        let r = bi - ui.norm();
        acc += r * r;
    }
    acc / (2.0 * m)
}

/// Real-gradient of the weighted intensity objective:
/// `(1/m) sum_i 2 w_i (|<h_i,z>|^2 - y_i) <h_i,z> h_i`.
pub fn wf_gradient(
    h: &DMatrix<Complex64>,
    z: &DVector<Complex64>,
    intensities: &[f64],
    weights: &[f64],
) -> Result<DVector<Complex64>> {
    if intensities.len() != h.nrows() || weights.len() != h.nrows() || z.len() != h.ncols() {
        return Err(Error::DimensionMismatch(
            "gradient inputs disagree with sensing matrix".into(),
        ));
    }
    let u = h * z;
    Ok(intensity_gradient_at(h, &u, intensities, weights))
}

fn intensity_gradient_at(
    h: &DMatrix<Complex64>,
    u: &DVector<Complex64>,
    intensities: &[f64],
    weights: &[f64],
) -> DVector<Complex64> {
    let m = u.len() as f64;
    let scaled = DVector::from_iterator(
        u.len(),
        u.iter()
            .zip(intensities)
            .zip(weights)
            .map(|((ui, &yi), &wi)| {
                let r = ui.norm_sqr() - yi;
                ui * Complex64::new(2.0 * wi * r / m, 0.0)
            }),
    );
    h.adjoint() * scaled
}

/// Real-gradient of the amplitude objective; zero samples contribute a
/// zero subgradient.
fn amplitude_gradient_at(
    h: &DMatrix<Complex64>,
    u: &DVector<Complex64>,
    amplitudes: &[f64],
) -> DVector<Complex64> {
    let m = u.len() as f64;
    let scaled = DVector::from_iterator(
        u.len(),
        u.iter().zip(amplitudes).map(|(ui, &bi)| {
            let mag = ui.norm();
            if mag == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                ui * Complex64::new((mag - bi) / (mag * m), 0.0)
            }
        }),
    );
    h.adjoint() * scaled
}

/// Optimal step along a unit descent direction for the frozen-weight
/// intensity objective.
///
/// With samples `u(t) = u - t * udir`, each residual is the quadratic
/// `r_i(t) = a_i + b_i t + c_i t^2`, so the objective is a quartic in `t`
/// and its stationary points solve a cubic. Returns the best positive
/// stationary point (the directional derivative at zero is negative for a
/// gradient direction, so one exists).
fn exact_quartic_step(
    u: &DVector<Complex64>,
    udir: &DVector<Complex64>,
    intensities: &[f64],
    weights: &[f64],
) -> f64 {
    let mut s_ab = 0.0;
    let mut s_ac = 0.0;
    let mut s_bb = 0.0;
    let mut s_bc = 0.0;
    let mut s_cc = 0.0;
    for ((ui, di), (&yi, &wi)) in u.iter().zip(udir.iter()).zip(intensities.iter().zip(weights)) {
        let a = ui.norm_sqr() - yi;
        let b = -2.0 * (ui.conj() * di).re;
        let c = di.norm_sqr();
        s_ab += wi * a * b;
        s_ac += wi * a * c;
        s_bb += wi * b * b;
        s_bc += wi * b * c;
        s_cc += wi * c * c;
    }
    // f'(t) = S_ab + (2 S_ac + S_bb) t + 3 S_bc t^2 + 2 S_cc t^3
    let roots = cubic_real_roots(2.0 * s_cc, 3.0 * s_bc, 2.0 * s_ac + s_bb, s_ab);
    let quartic = |t: f64| -> f64 {
        // f(t) up to the 1/(2m) factor
        let t2 = t * t;
        0.5 * (s_bb * t2 + 2.0 * s_ab * t)
            + s_ac * t2
            + s_bc * t2 * t
            + 0.5 * s_cc * t2 * t2
    };
    let mut best_t = 0.0;
    let mut best_f = 0.0; // f(0) = 0 in this offset convention
    for t in roots {
        if t > 0.0 && t.is_finite() {
            let f = quartic(t);
            if f < best_f {
                best_f = f;
                best_t = t;
            }
        }
    }
    best_t
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0 = 0`, degenerating
/// gracefully to lower orders.
fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c3.abs() < 1e-14 * scale {
        // quadratic c2 x^2 + c1 x + c0
        if c2.abs() < 1e-14 * scale {
            if c1.abs() < 1e-14 * scale {
                return Vec::new();
            }
            return vec![-c0 / c1];
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        return vec![(-c1 + sq) / (2.0 * c2), (-c1 - sq) / (2.0 * c2)];
    }
    // normalized: x^3 + p x^2 + q x + r
    let p = c2 / c3;
    let q = c1 / c3;
    let r = c0 / c3;
    // depressed: y^3 + ay + b with x = y - p/3
    let a = q - p * p / 3.0;
    let b = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
    let shift = -p / 3.0;
    let disc = b * b / 4.0 + a * a * a / 27.0;
    if disc > 0.0 {
        // one real root
        let sq = disc.sqrt();
        let u = (-b / 2.0 + sq).cbrt();
        let v = (-b / 2.0 - sq).cbrt();
        vec![u + v + shift]
    } else if a.abs() < 1e-300 {
        vec![shift]
    } else {
        // three real roots (trigonometric form)
        let m = 2.0 * (-a / 3.0).sqrt();
        let arg = (3.0 * b / (a * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Reweighted Wirtinger flow
// ---------------------------------------------------------------------------

/// Amplitude-only reconstruction from `|y|` via spectral initialization
/// and reweighted Wirtinger-flow descent.
pub fn reweighted_wf(
    h: &ImagingMatrix,
    y: &MeasurementSet,
    opts: &WFOptions,
) -> Result<ReconResult> {
    let amplitudes = y.amplitudes()?;
    let a = h.stacked();
    if amplitudes.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements vs {} matrix rows",
            amplitudes.len(),
            a.nrows()
        )));
    }
    reweighted_wf_rows(a, amplitudes.as_slice(), opts)
}

/// Same solver against a bare sensing matrix; rows are the sensing
/// vectors, amplitudes are `|<h_i, x>|`.
pub fn reweighted_wf_rows(
    a: &DMatrix<Complex64>,
    amplitudes: &[f64],
    opts: &WFOptions,
) -> Result<ReconResult> {
    if opts.max_outer == 0 || opts.inner_steps == 0 {
        return Err(Error::invalid("wf options", "iteration counts must be >= 1"));
    }
    if !opts.tolerance.is_finite() || opts.tolerance <= 0.0 {
        return Err(Error::invalid("wf tolerance", "must be > 0"));
    }
    let m = a.nrows();
    let intensities: Vec<f64> = amplitudes.iter().map(|&b| b * b).collect();

    let mut z = spectral_initialize(a, &intensities, opts.init_norm_override)?;
    let mean_y = intensities.iter().sum::<f64>() / m as f64;
    let row_sq_norms: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();

    let eta_at = |k: usize| -> f64 {
        match opts.eta {
            EtaPolicy::MeanFraction(frac) => frac * mean_y,
            EtaPolicy::Constant(v) => v,
            EtaPolicy::Decay { eta0 } => eta0 / k as f64,
        }
    };

    let mut history = Vec::with_capacity(opts.max_outer + 1);
    let mut weight_snapshots = if opts.record_weights { Some(Vec::new()) } else { None };

    let mut u = a * &z;
    {
        // objective at the initialization, weights computed there
        let eta0 = eta_at(1);
        let f0 = match opts.loss {
            LossKind::Intensity => {
                let w = weights_at(&u, &intensities, eta0);
                intensity_objective(&u, &intensities, &w)
            }
            LossKind::Amplitude => amplitude_objective(&u, amplitudes),
        };
        history.push(f0);
    }

    let mut converged = false;
    let mut iterations = 0usize;

    for k in 1..=opts.max_outer {
        iterations = k;
        let eta = eta_at(k);
        let weights = match opts.loss {
            LossKind::Intensity => weights_at(&u, &intensities, eta),
            LossKind::Amplitude => Vec::new(),
        };
        if let Some(snaps) = weight_snapshots.as_mut() {
            snaps.push(weights.clone());
        }

        // amplitude loss has no closed-form line search; use backtracking
        let policy = match (opts.step, opts.loss) {
            (StepPolicy::ExactLineSearch, LossKind::Amplitude) => DEFAULT_BACKTRACKING,
            (p, _) => p,
        };

        let z_before = z.clone();
        for _ in 0..opts.inner_steps {
            let grad = match opts.loss {
                LossKind::Intensity => intensity_gradient_at(a, &u, &intensities, &weights),
                LossKind::Amplitude => amplitude_gradient_at(a, &u, amplitudes),
            };
            let grad_norm2 = grad.norm_squared();
            if grad_norm2 <= f64::MIN_POSITIVE {
                break;
            }
            let f_here = match opts.loss {
                LossKind::Intensity => intensity_objective(&u, &intensities, &weights),
                LossKind::Amplitude => amplitude_objective(&u, amplitudes),
            };
            if !f_here.is_finite() {
                return Err(Error::Divergence { iteration: k });
            }

            match policy {
                StepPolicy::Fixed(step) => {
                    z -= &grad * Complex64::new(step, 0.0);
                    u = a * &z;
                }
                StepPolicy::ExactLineSearch => {
                    // unit descent direction keeps the cubic well scaled
                    let dir = &grad / Complex64::new(grad.norm(), 0.0);
                    let udir = a * &dir;
                    let step = exact_quartic_step(&u, &udir, &intensities, &weights);
                    if !step.is_finite() || step <= 0.0 {
                        break;
                    }
                    z -= &dir * Complex64::new(step, 0.0);
                    u -= &udir * Complex64::new(step, 0.0);
                }
                StepPolicy::Backtracking { initial_scale, shrink, armijo_c, max_backtracks } => {
                    // crude curvature bound of the frozen-weight objective
                    let mut lip = 0.0;
                    match opts.loss {
                        LossKind::Intensity => {
                            for ((ui, &yi), (&wi, &hn)) in u
                                .iter()
                                .zip(&intensities)
                                .zip(weights.iter().zip(&row_sq_norms))
                            {
                                lip += wi * hn * (3.0 * ui.norm_sqr() + yi);
                            }
                        }
                        LossKind::Amplitude => {
                            for &hn in &row_sq_norms {
                                lip += hn;
                            }
                        }
                    }
                    lip = lip * 2.0 / m as f64;
                    let mut step = initial_scale / lip.max(f64::MIN_POSITIVE);
                    let mut accepted = false;
                    for _ in 0..=max_backtracks {
                        let cand = &z - &grad * Complex64::new(step, 0.0);
                        let u_cand = a * &cand;
                        let f_cand = match opts.loss {
                            LossKind::Intensity => {
                                intensity_objective(&u_cand, &intensities, &weights)
                            }
                            LossKind::Amplitude => amplitude_objective(&u_cand, amplitudes),
                        };
                        if f_cand.is_finite() && f_cand <= f_here - armijo_c * step * grad_norm2 {
                            z = cand;
                            u = u_cand;
                            accepted = true;
                            break;
                        }
                        step *= shrink;
                    }
                    if !accepted {
                        break; // no usable step at this weight setting
                    }
                }
            }
        }

        // self-weighted objective at the new iterate
        let f_now = match opts.loss {
            LossKind::Intensity => {
                let w_now = weights_at(&u, &intensities, eta);
                intensity_objective(&u, &intensities, &w_now)
            }
            LossKind::Amplitude => amplitude_objective(&u, amplitudes),
        };
        if !f_now.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
        history.push(f_now);

        let denom = z_before.norm().max(f64::MIN_POSITIVE);
        if (&z - &z_before).norm() / denom < opts.tolerance {
            converged = true;
            break;
        }
    }

    Ok(ReconResult {
        estimate: z,
        objective_history: history,
        weight_snapshots,
        converged,
        iterations,
        rank_deficient: m < a.ncols(),
    })
}

// ---------------------------------------------------------------------------
// Phase alignment
// ---------------------------------------------------------------------------

/// Rotate `z` by the global phase minimizing `||e^{j phi} z - reference||`.
/// Returns the rotated vector and whether the reference was zero (in which
/// case `z` comes back unchanged).
pub fn align_phase(
    z: &DVector<Complex64>,
    reference: &DVector<Complex64>,
) -> Result<(DVector<Complex64>, bool)> {
    if z.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "align_phase: {} vs {}",
            z.len(),
            reference.len()
        )));
    }
    if reference.norm() == 0.0 {
        return Ok((z.clone(), true));
    }
    // phi* = arg(<z, reference>) with <a, b> = a^H b
    let inner = (z.adjoint() * reference)[(0, 0)];
    if inner.norm() == 0.0 {
        return Ok((z.clone(), false));
    }
    let rot = Complex64::from_polar(1.0, inner.arg());
    Ok((z * rot, false))
}
