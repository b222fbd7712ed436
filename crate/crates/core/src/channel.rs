//! Single-RIS channel components.
//!
//! The per-snapshot channel row factors as
//! `h = h_s * a_s * Omega * A_i * H_i`:
//! incident steering `A_i` (N x M, entries `exp(+j 2 pi p_n . u_m / lambda)`),
//! incident propagation `H_i` (diagonal, `exp(-j 2 pi r_m / lambda) / r_m`),
//! reflection steering `a_s` (1 x N, unit modulus), reflection propagation
//! scalar `h_s = exp(-j 2 pi r_s / lambda) / r_s`, and the snapshot
//! configuration `Omega`.
//!
//! Sign convention is load-bearing: steering terms carry `+j`, propagation
//! terms `-j`. The deployment factor built in the forward module depends
//! on this composition, so the signs must not be "normalized" away.

use nalgebra::{DMatrix, DVector, Point3, RowDVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::codebook::PhaseConfig;
use crate::error::{Error, Result};
use crate::geometry::{direction_and_range, CarrierConfig, GridSpec, PanelSpec};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Incident steering matrix `A_i`: one unit-modulus column per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    /// N x M entries, `exp(+j 2 pi p_n . u_m / lambda)`.
    pub entries: DMatrix<Complex64>,
}

impl SteeringMatrix {
    pub fn num_elements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_sources(&self) -> usize {
        self.entries.ncols()
    }
}

/// Diagonal propagation from every grid cell to the panel reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentPropagation {
    /// Diagonal entries `exp(-j 2 pi r_m / lambda) / r_m`.
    pub entries: DVector<Complex64>,
    /// Ranges `r_m` in metres.
    pub ranges_m: Vec<f64>,
}

impl IncidentPropagation {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reflection-side path: steering toward the receiver plus the scalar
/// propagation term.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectPath {
    /// `a_s`: N unit-modulus entries.
    pub steering: DVector<Complex64>,
    /// `h_s = exp(-j 2 pi r_s / lambda) / r_s`.
    pub scalar: Complex64,
    /// Panel-to-receiver range in metres.
    pub range_m: f64,
}

/// The composed 1 x M channel row for one snapshot configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRow {
    pub entries: RowDVector<Complex64>,
}

impl ChannelRow {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Phase of a steering entry: `2 pi (p . u) / lambda`, with global element
/// coordinates.
fn steering_entry(p: &Point3<f64>, u: &nalgebra::Vector3<f64>, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * p.coords.dot(u) / wavelength)
}

/// Incident steering matrix for a panel observing every grid cell.
///
/// One direction per cell, taken from the panel centre (plane-wave
/// assumption over the aperture).
pub fn incident_steering(
    panel: &PanelSpec,
    grid: &GridSpec,
    carrier: &CarrierConfig,
) -> Result<SteeringMatrix> {
    let lambda = carrier.wavelength_m();
    let elements = panel.element_positions();
    let cells = grid.grid_points();
    let center = panel.center();
    let mut directions = Vec::with_capacity(cells.len());
    for cell in &cells {
        let (angles, _) = direction_and_range(&center, cell)?;
        directions.push(angles.unit_vector());
    }
    let entries = DMatrix::from_fn(elements.len(), cells.len(), |n, m| {
        steering_entry(&elements[n], &directions[m], lambda)
    });
    Ok(SteeringMatrix { entries })
}

/// Diagonal incident propagation for every grid cell.
pub fn incident_propagation(
    grid: &GridSpec,
    panel: &PanelSpec,
    carrier: &CarrierConfig,
) -> Result<IncidentPropagation> {
    let lambda = carrier.wavelength_m();
    let center = panel.center();
    let cells = grid.grid_points();
    let mut entries = Vec::with_capacity(cells.len());
    let mut ranges = Vec::with_capacity(cells.len());
    for cell in &cells {
        let (_, r) = direction_and_range(&center, cell)?;
        entries.push(Complex64::from_polar(1.0 / r, -TAU * r / lambda));
        ranges.push(r);
    }
    Ok(IncidentPropagation {
        entries: DVector::from_vec(entries),
        ranges_m: ranges,
    })
}

/// Reflection steering and propagation toward the receiver.
pub fn reflect_path(
    panel: &PanelSpec,
    receiver: &Point3<f64>,
    carrier: &CarrierConfig,
) -> Result<ReflectPath> {
    let lambda = carrier.wavelength_m();
    let (angles, range) = direction_and_range(&panel.center(), receiver)?;
    let u = angles.unit_vector();
    let steering = DVector::from_iterator(
        panel.num_elements(),
        panel
            .element_positions()
            .iter()
            .map(|p| steering_entry(p, &u, lambda)),
    );
    Ok(ReflectPath {
        steering,
        scalar: Complex64::from_polar(1.0 / range, -TAU * range / lambda),
        range_m: range,
    })
}

/// Compose the 1 x M channel row `h_s * a_s * Omega * A_i * H_i` for one
/// snapshot configuration.
pub fn channel_row(
    steering: &SteeringMatrix,
    incident: &IncidentPropagation,
    reflect: &ReflectPath,
    config: &PhaseConfig,
) -> Result<ChannelRow> {
    let n = steering.num_elements();
    let m = steering.num_sources();
    if reflect.steering.len() != n || config.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "channel row: steering N={n}, reflect N={}, config N={}",
            reflect.steering.len(),
            config.len()
        )));
    }
    if incident.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "channel row: steering M={m}, propagation M={}",
            incident.len()
        )));
    }
    // weighted = h_s * (a_s .* omega), then row_m = sum_n weighted_n A_i[n,m] * H_i[m].
    let coeffs = config.coefficients();
    let weighted: Vec<Complex64> = (0..n)
        .map(|i| reflect.scalar * reflect.steering[i] * coeffs[i])
        .collect();
    let mut entries = RowDVector::zeros(m);
    for col in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for (row, w) in weighted.iter().enumerate() {
            acc += w * steering.entries[(row, col)];
        }
        entries[col] = acc * incident.entries[col];
    }
    Ok(ChannelRow { entries })
}
