//! Scene geometry: carrier, voxel grid, RIS panels, directions.
//!
//! All positions are metres in one global right-handed frame. Directions
//! use the physics convention: `theta` is the polar angle from +z in
//! `[0, pi]`, `phi` the azimuth from +x in `[0, 2*pi)`, and the unit
//! vector is `[sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]`.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Carrier
// ---------------------------------------------------------------------------

/// Carrier frequency; wavelength is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig {
    frequency_hz: f64,
}

impl CarrierConfig {
    pub fn new(frequency_hz: f64) -> Result<Self> {
        if !frequency_hz.is_finite() || frequency_hz <= 0.0 {
            return Err(Error::invalid("frequency_hz", "must be finite and > 0"));
        }
        Ok(Self { frequency_hz })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    /// lambda = c / f.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }
}

// ---------------------------------------------------------------------------
// Voxel grid
// ---------------------------------------------------------------------------

/// Regular grid of cells covering the space of interest.
///
/// `origin` is the centre of the gridded region; the region extends
/// `counts[a] * spacing_m[a]` metres along axis `a`. Cell enumeration is
/// fixed: x fastest, then y, then z, and every module that vectorizes the
/// scene relies on this order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    origin: Point3<f64>,
    counts: [usize; 3],
    spacing_m: [f64; 3],
}

impl GridSpec {
    pub fn new(origin: Point3<f64>, counts: [usize; 3], spacing_m: [f64; 3]) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::invalid("grid.counts", "every axis count must be >= 1"));
        }
        if spacing_m.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::invalid("grid.spacing_m", "every spacing must be finite and > 0"));
        }
        Ok(Self { origin, counts, spacing_m })
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn spacing_m(&self) -> [f64; 3] {
        self.spacing_m
    }

    /// Total number of cells M.
    pub fn num_cells(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    /// Physical extent of the region per axis.
    pub fn extent_m(&self) -> [f64; 3] {
        [
            self.counts[0] as f64 * self.spacing_m[0],
            self.counts[1] as f64 * self.spacing_m[1],
            self.counts[2] as f64 * self.spacing_m[2],
        ]
    }

    /// Centre of cell `(ix, iy, iz)`.
    pub fn cell_center(&self, ix: usize, iy: usize, iz: usize) -> Point3<f64> {
        let coord = |i: usize, axis: usize| {
            self.origin[axis]
                + ((i as f64 + 0.5) - self.counts[axis] as f64 / 2.0) * self.spacing_m[axis]
        };
        Point3::new(coord(ix, 0), coord(iy, 1), coord(iz, 2))
    }

    /// Flat cell index in the documented order (x fastest, then y, then z).
    pub fn cell_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.counts[1] + iy) * self.counts[0] + ix
    }

    /// All M cell centres in enumeration order.
    pub fn grid_points(&self) -> Vec<Point3<f64>> {
        let mut pts = Vec::with_capacity(self.num_cells());
        for iz in 0..self.counts[2] {
            for iy in 0..self.counts[1] {
                for ix in 0..self.counts[0] {
                    pts.push(self.cell_center(ix, iy, iz));
                }
            }
        }
        pts
    }
}

/// Free-function form of [`GridSpec::grid_points`].
pub fn grid_points(spec: &GridSpec) -> Vec<Point3<f64>> {
    spec.grid_points()
}

// ---------------------------------------------------------------------------
// RIS panel
// ---------------------------------------------------------------------------

const ORTHONORMAL_TOL: f64 = 1e-12;

/// Uniform rectangular RIS panel: `rows x cols` elements on a plane.
///
/// `axis_row` and `axis_col` span the panel plane; the normal is their
/// cross product. Element `(r, c)` sits at
/// `center + (r - (rows-1)/2) * pitch * axis_row + (c - (cols-1)/2) * pitch * axis_col`,
/// enumerated row-major (r outer, c inner).
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    center: Point3<f64>,
    axis_row: Vector3<f64>,
    axis_col: Vector3<f64>,
    normal: Vector3<f64>,
    rows: usize,
    cols: usize,
    pitch_m: f64,
}

impl PanelSpec {
    pub fn new(
        center: Point3<f64>,
        axis_row: Vector3<f64>,
        axis_col: Vector3<f64>,
        rows: usize,
        cols: usize,
        pitch_m: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("panel.rows/cols", "must be >= 1"));
        }
        if !pitch_m.is_finite() || pitch_m <= 0.0 {
            return Err(Error::invalid("panel.pitch_m", "must be finite and > 0"));
        }
        if (axis_row.norm() - 1.0).abs() > ORTHONORMAL_TOL
            || (axis_col.norm() - 1.0).abs() > ORTHONORMAL_TOL
        {
            return Err(Error::invalid("panel.axes", "in-plane axes must be unit vectors"));
        }
        if axis_row.dot(&axis_col).abs() > ORTHONORMAL_TOL {
            return Err(Error::invalid("panel.axes", "in-plane axes must be orthogonal"));
        }
        let normal = axis_row.cross(&axis_col);
        Ok(Self { center, axis_row, axis_col, normal, rows, cols, pitch_m })
    }

    /// Panel whose normal points from `center` toward `target`, with the
    /// in-plane axes chosen deterministically (column axis as horizontal
    /// as the boresight allows).
    pub fn facing(
        center: Point3<f64>,
        target: Point3<f64>,
        rows: usize,
        cols: usize,
        pitch_m: f64,
    ) -> Result<Self> {
        let boresight = target - center;
        let n = boresight.norm();
        if n < 1e-12 {
            return Err(Error::DegenerateGeometry(
                "panel target coincides with its center".into(),
            ));
        }
        let normal = boresight / n;
        // Pick the in-plane column axis orthogonal to the normal, preferring
        // a horizontal orientation; fall back to x when boresight is vertical.
        let up = if normal.z.abs() > 0.9 {
            Vector3::x()
        } else {
            Vector3::z()
        };
        let axis_col = up.cross(&normal).normalize();
        // row x col must reproduce the boresight normal
        let axis_row = axis_col.cross(&normal).normalize();
        Self::new(center, axis_row, axis_col, rows, cols, pitch_m)
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    /// Total element count N.
    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Global positions of all N elements, row-major.
    pub fn element_positions(&self) -> Vec<Point3<f64>> {
        let r0 = (self.rows as f64 - 1.0) / 2.0;
        let c0 = (self.cols as f64 - 1.0) / 2.0;
        let mut pts = Vec::with_capacity(self.num_elements());
        for r in 0..self.rows {
            for c in 0..self.cols {
                pts.push(
                    self.center
                        + (r as f64 - r0) * self.pitch_m * self.axis_row
                        + (c as f64 - c0) * self.pitch_m * self.axis_col,
                );
            }
        }
        pts
    }

    /// Maximum physical extent D: the diagonal of the element lattice.
    pub fn diagonal_m(&self) -> f64 {
        let du = (self.rows as f64 - 1.0) * self.pitch_m;
        let dv = (self.cols as f64 - 1.0) * self.pitch_m;
        du.hypot(dv)
    }
}

/// Free-function form of [`PanelSpec::element_positions`].
pub fn element_positions(panel: &PanelSpec) -> Vec<Point3<f64>> {
    panel.element_positions()
}

/// Fraunhofer distance `2 D^2 / lambda` for the panel aperture.
///
/// Beyond this range the plane-wave steering model is valid. Scene
/// validation reports violations as warnings, not errors.
pub fn far_field_min_distance(panel: &PanelSpec, carrier: &CarrierConfig) -> f64 {
    let d = panel.diagonal_m();
    2.0 * d * d / carrier.wavelength_m()
}

/// One RIS panel wired to its single receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPlacement {
    pub panel: PanelSpec,
    pub receiver: Point3<f64>,
}

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

/// Polar/azimuth direction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionAngles {
    /// Polar angle from +z, radians in `[0, pi]`.
    pub theta: f64,
    /// Azimuth from +x, radians in `[0, 2*pi)`.
    pub phi: f64,
}

impl DirectionAngles {
    /// `[sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]`.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        Vector3::new(st * cp, st * sp, ct)
    }
}

/// Direction angles and Euclidean range from `from` to `to`.
pub fn direction_and_range(
    from: &Point3<f64>,
    to: &Point3<f64>,
) -> Result<(DirectionAngles, f64)> {
    let d = to - from;
    let range = d.norm();
    if range < 1e-12 {
        return Err(Error::DegenerateGeometry(format!(
            "points coincide at ({}, {}, {})",
            from.x, from.y, from.z
        )));
    }
    let theta = (d.z / range).clamp(-1.0, 1.0).acos();
    let mut phi = d.y.atan2(d.x);
    if phi < 0.0 {
        phi += std::f64::consts::TAU;
    }
    if phi >= std::f64::consts::TAU {
        phi = 0.0;
    }
    Ok((DirectionAngles { theta, phi }, range))
}
