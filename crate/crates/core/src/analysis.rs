//! Imaging-matrix quality diagnostics.
//!
//! The rank of the stacked imaging operator is capped by
//! `min{M, K*T, K*N}`: the unknown cell count, the total temporal samples,
//! and the total element count. These functions compute the singular
//! spectrum, a thresholded numerical rank against that bound, and a
//! collinearity report flagging grid-cell pairs that share an observation
//! line to a panel (which makes steering columns parallel and degrades
//! the deployment factor).

use std::io::Write;

use nalgebra::{DMatrix, Point3};
use num_complex::Complex64;

use crate::channel;
use crate::error::Result;
use crate::forward::ImagingMatrix;
use crate::geometry::{direction_and_range, CarrierConfig, GridSpec, PanelSpec};

// ---------------------------------------------------------------------------
// Singular values and rank
// ---------------------------------------------------------------------------

/// How the rank threshold is chosen from the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankThresholdPolicy {
    /// `tau = scale * max(rows, cols) * eps * sigma_max`; the usual
    /// machine-precision rule with an adjustable scale.
    MachineEps { scale: f64 },
    /// `tau = fraction * sigma_max`.
    Relative(f64),
    /// Fixed threshold.
    Absolute(f64),
}

impl Default for RankThresholdPolicy {
    fn default() -> Self {
        RankThresholdPolicy::MachineEps { scale: 1.0 }
    }
}

impl RankThresholdPolicy {
    fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankThresholdPolicy::MachineEps { scale } => {
                scale * rows.max(cols) as f64 * f64::EPSILON * sigma_max
            }
            RankThresholdPolicy::Relative(frac) => frac * sigma_max,
            RankThresholdPolicy::Absolute(tau) => tau,
        }
    }
}

/// Full singular spectrum of a complex matrix, descending.
pub fn singular_values_of(m: &DMatrix<Complex64>) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Full singular spectrum of a real matrix, descending.
pub fn singular_values_real_of(m: &DMatrix<f64>) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Singular spectrum of the stacked imaging matrix, descending.
pub fn singular_values(h: &ImagingMatrix) -> Vec<f64> {
    singular_values_of(h.stacked())
}

fn count_above(sv: &[f64], tau: f64) -> usize {
    sv.iter().filter(|&&s| s > tau).count()
}

/// Thresholded rank of a real matrix.
pub fn numerical_rank_real(m: &DMatrix<f64>, policy: &RankThresholdPolicy) -> usize {
    let sv = singular_values_real_of(m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    count_above(&sv, policy.threshold(m.nrows(), m.ncols(), sigma_max))
}

/// Rank diagnostics for one imaging matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    /// Descending singular spectrum.
    pub singular_values: Vec<f64>,
    /// Count of singular values above the threshold.
    pub rank: usize,
    /// Threshold actually applied.
    pub threshold: f64,
    /// `min{M, K*T, sum_k N_k}`.
    pub rank_bound: usize,
    /// Whether `rank <= rank_bound`.
    pub bound_satisfied: bool,
}

/// Degrees-of-freedom cap `min{M, K*T, sum_k N_k}` for the scene behind `h`.
pub fn rank_bound(h: &ImagingMatrix) -> usize {
    let m = h.num_cells();
    let kt = h.num_ris() * h.snapshots();
    let kn: usize = h.elements_per_panel().iter().sum();
    m.min(kt).min(kn)
}

/// Numerical rank of the stacked imaging matrix plus the bound check.
pub fn numerical_rank(h: &ImagingMatrix, policy: &RankThresholdPolicy) -> RankReport {
    let sv = singular_values(h);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = policy.threshold(h.num_rows(), h.num_cells(), sigma_max);
    let rank = count_above(&sv, threshold);
    let bound = rank_bound(h);
    RankReport {
        singular_values: sv,
        rank,
        threshold,
        rank_bound: bound,
        bound_satisfied: rank <= bound,
    }
}

// ---------------------------------------------------------------------------
// Collinearity
// ---------------------------------------------------------------------------

/// A grid-cell pair whose directions to one panel nearly coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedPair {
    pub cell_a: usize,
    pub cell_b: usize,
    /// Angular separation in radians.
    pub separation_rad: f64,
    /// `|<A_i col a, A_i col b>| / N` for the flagging panel.
    pub coherence: f64,
}

/// Collinearity diagnostics across all panels.
#[derive(Debug, Clone, PartialEq)]
pub struct CollinearityReport {
    /// Flagged pairs per panel, indices into the grid enumeration.
    pub per_ris: Vec<Vec<FlaggedPair>>,
    /// Smallest angular separation seen over all pairs and panels.
    pub worst_pair_separation_rad: f64,
    /// Largest steering coherence among flagged pairs (0 when none).
    pub max_coherence: f64,
    /// Tolerance used for flagging, radians.
    pub tolerance_rad: f64,
}

impl CollinearityReport {
    pub fn total_flagged(&self) -> usize {
        self.per_ris.iter().map(Vec::len).sum()
    }
}

/// Flag all grid-cell pairs whose direction vectors to a panel differ by
/// less than `tolerance_rad`, with the steering coherence of each flagged
/// pair. Default tolerance in the scenario harness is 0.5 degrees.
pub fn collinearity_report(
    grid: &GridSpec,
    panels: &[PanelSpec],
    carrier: &CarrierConfig,
    tolerance_rad: f64,
) -> Result<CollinearityReport> {
    let cells = grid.grid_points();
    let mut per_ris = Vec::with_capacity(panels.len());
    let mut worst = f64::INFINITY;
    let mut max_coherence: f64 = 0.0;

    for panel in panels {
        let mut flagged = Vec::new();
        let dirs = directions_to(&panel.center(), &cells)?;
        // steering matrix only needed if something gets flagged; build lazily
        let mut steering: Option<DMatrix<Complex64>> = None;
        for a in 0..cells.len() {
            for b in (a + 1)..cells.len() {
                let cosang = dirs[a].dot(&dirs[b]).clamp(-1.0, 1.0);
                let sep = cosang.acos();
                worst = worst.min(sep);
                if sep < tolerance_rad {
                    let st = match &steering {
                        Some(s) => s,
                        None => {
                            steering =
                                Some(channel::incident_steering(panel, grid, carrier)?.entries);
                            steering.as_ref().unwrap()
                        }
                    };
                    let coherence = column_coherence(st, a, b);
                    max_coherence = max_coherence.max(coherence);
                    flagged.push(FlaggedPair {
                        cell_a: a,
                        cell_b: b,
                        separation_rad: sep,
                        coherence,
                    });
                }
            }
        }
        per_ris.push(flagged);
    }

    Ok(CollinearityReport {
        per_ris,
        worst_pair_separation_rad: if worst.is_finite() { worst } else { 0.0 },
        max_coherence,
        tolerance_rad,
    })
}

fn directions_to(
    center: &Point3<f64>,
    cells: &[Point3<f64>],
) -> Result<Vec<nalgebra::Vector3<f64>>> {
    cells
        .iter()
        .map(|cell| Ok(direction_and_range(center, cell)?.0.unit_vector()))
        .collect()
}

/// `|<col_a, col_b>| / N`, in [0, 1] since entries are unit modulus.
fn column_coherence(steering: &DMatrix<Complex64>, a: usize, b: usize) -> f64 {
    let n = steering.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        acc += steering[(r, a)].conj() * steering[(r, b)];
    }
    acc.norm() / n as f64
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

/// Singular values, one per line.
pub fn write_singular_values_csv<W: Write>(mut out: W, sv: &[f64]) -> Result<()> {
    writeln!(out, "singular_value")?;
    for s in sv {
        writeln!(out, "{s:.12e}")?;
    }
    Ok(())
}

/// Flagged pairs as index tuples with their diagnostics.
pub fn write_collinearity_csv<W: Write>(mut out: W, report: &CollinearityReport) -> Result<()> {
    writeln!(out, "ris,cell_a,cell_b,separation_rad,coherence")?;
    for (k, pairs) in report.per_ris.iter().enumerate() {
        for p in pairs {
            writeln!(
                out,
                "{k},{},{},{:.12e},{:.12e}",
                p.cell_a, p.cell_b, p.separation_rad, p.coherence
            )?;
        }
    }
    Ok(())
}
