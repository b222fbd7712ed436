//! Forward model: the stacked imaging matrix and measurement synthesis.
//!
//! For K panels and T snapshots the imaging matrix is (K*T) x M, stacked
//! RIS-major: rows `k*T .. (k+1)*T` belong to panel k, snapshot-ordered.
//! Each panel block factors as `W_k * P_k`, where `W_k` (T x N) holds the
//! snapshot configurations and `P_k` (N x M) captures everything the
//! deployment fixes: `P_k = h_s * diag(a_s) * A_i * H_i`.
//!
//! The stacked matrix is assembled row-by-row through the channel
//! composition, while the `W_k`/`P_k` factors are built independently;
//! their agreement is a checked invariant, not a construction detail.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Point3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::geometry::{CarrierConfig, GridSpec, RisPlacement};
use crate::rng::{substream, StreamDomain};

// ---------------------------------------------------------------------------
// Source field
// ---------------------------------------------------------------------------

/// Complex scene vector `s_m * exp(-j alpha_m)` in grid enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    values: DVector<Complex64>,
    ground_truth: Option<Vec<f64>>,
}

impl SourceField {
    /// Zero-phase field from magnitudes; keeps the magnitudes as ground
    /// truth for metric evaluation.
    pub fn from_magnitudes(magnitudes: Vec<f64>) -> Result<Self> {
        if magnitudes.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("source", "magnitudes must be finite and >= 0"));
        }
        let values = DVector::from_iterator(
            magnitudes.len(),
            magnitudes.iter().map(|&v| Complex64::new(v, 0.0)),
        );
        Ok(Self { values, ground_truth: Some(magnitudes) })
    }

    /// Field with i.i.d. uniform [0, 2 pi) phases `alpha_m` drawn from the
    /// source-phase substream of `seed`.
    pub fn from_magnitudes_with_random_phases(magnitudes: Vec<f64>, seed: u64) -> Result<Self> {
        let mut field = Self::from_magnitudes(magnitudes)?;
        let mut rng = substream(seed, StreamDomain::SourcePhase, 0);
        for v in field.values.iter_mut() {
            let alpha = rng.random_range(0.0..std::f64::consts::TAU);
            *v *= Complex64::from_polar(1.0, -alpha);
        }
        Ok(field)
    }

    /// Arbitrary complex field; no stored ground truth.
    pub fn from_complex(values: DVector<Complex64>) -> Self {
        Self { values, ground_truth: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    /// Ground-truth magnitude image; falls back to `|values|`.
    pub fn ground_truth_magnitudes(&self) -> Vec<f64> {
        self.ground_truth
            .clone()
            .unwrap_or_else(|| self.values.iter().map(|v| v.norm()).collect())
    }
}

// ---------------------------------------------------------------------------
// Imaging matrix
// ---------------------------------------------------------------------------

/// Per-panel factors of one RIS block.
#[derive(Debug, Clone, PartialEq)]
pub struct RisFactors {
    /// T x N snapshot matrix.
    pub w: DMatrix<Complex64>,
    /// N x M deployment factor.
    pub p: DMatrix<Complex64>,
}

/// The stacked (K*T) x M imaging operator with its per-panel factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingMatrix {
    stacked: DMatrix<Complex64>,
    factors: Vec<RisFactors>,
    snapshots: usize,
    elements_per_panel: Vec<usize>,
}

impl ImagingMatrix {
    pub fn stacked(&self) -> &DMatrix<Complex64> {
        &self.stacked
    }

    pub fn num_ris(&self) -> usize {
        self.factors.len()
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn num_cells(&self) -> usize {
        self.stacked.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn elements_per_panel(&self) -> &[usize] {
        &self.elements_per_panel
    }

    pub fn factors(&self, ris: usize) -> Result<&RisFactors> {
        self.factors
            .get(ris)
            .ok_or_else(|| Error::IndexOutOfRange(format!("ris index {ris}")))
    }

    /// Row index of (panel k, snapshot t): RIS-major stacking.
    pub fn row_index(&self, ris: usize, snapshot: usize) -> usize {
        ris * self.snapshots + snapshot
    }

    /// View of panel k's T x M block.
    pub fn block(&self, ris: usize) -> Result<DMatrix<Complex64>> {
        if ris >= self.num_ris() {
            return Err(Error::IndexOutOfRange(format!("ris index {ris}")));
        }
        Ok(self
            .stacked
            .rows(ris * self.snapshots, self.snapshots)
            .into_owned())
    }

    /// Relative Frobenius distance between panel k's stacked block and the
    /// product of its factors.
    pub fn factorization_residual(&self, ris: usize) -> Result<f64> {
        let block = self.block(ris)?;
        let f = self.factors(ris)?;
        let product = &f.w * &f.p;
        let denom = block.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok((block - product).norm() / denom)
    }
}

/// Deployment factor `P_k = h_s * diag(a_s) * A_i * H_i` for one panel.
pub fn build_p(
    panel: &crate::geometry::PanelSpec,
    grid: &GridSpec,
    receiver: &Point3<f64>,
    carrier: &CarrierConfig,
) -> Result<DMatrix<Complex64>> {
    let a_i = channel::incident_steering(panel, grid, carrier)?;
    let h_i = channel::incident_propagation(grid, panel, carrier)?;
    let refl = channel::reflect_path(panel, receiver, carrier)?;
    let n = panel.num_elements();
    let m = grid.num_cells();
    Ok(DMatrix::from_fn(n, m, |r, c| {
        refl.scalar * refl.steering[r] * a_i.entries[(r, c)] * h_i.entries[c]
    }))
}

/// Assemble the stacked imaging matrix for explicit scene parts.
///
/// Rows are produced through the per-snapshot channel composition; the
/// stored factors come from `build_p` and the codebook.
pub fn assemble_from_parts(
    carrier: &CarrierConfig,
    grid: &GridSpec,
    placements: &[RisPlacement],
    codebook: &Codebook,
) -> Result<ImagingMatrix> {
    if placements.is_empty() {
        return Err(Error::invalid("scene", "at least one RIS placement required"));
    }
    if codebook.num_ris() != placements.len() {
        return Err(Error::DimensionMismatch(format!(
            "codebook covers {} RIS, scene has {}",
            codebook.num_ris(),
            placements.len()
        )));
    }
    let t = codebook.snapshots();
    let m = grid.num_cells();
    let mut stacked = DMatrix::zeros(placements.len() * t, m);
    let mut factors = Vec::with_capacity(placements.len());
    let mut elements_per_panel = Vec::with_capacity(placements.len());

    for (k, placement) in placements.iter().enumerate() {
        let n = placement.panel.num_elements();
        let configs = codebook.configs_for(k)?;
        if configs.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "codebook for RIS {k} has wrong element count (panel N={n})"
            )));
        }
        let a_i = channel::incident_steering(&placement.panel, grid, carrier)?;
        let h_i = channel::incident_propagation(grid, &placement.panel, carrier)?;
        let refl = channel::reflect_path(&placement.panel, &placement.receiver, carrier)?;
        for (tt, config) in configs.iter().enumerate() {
            let row = channel::channel_row(&a_i, &h_i, &refl, config)?;
            stacked.row_mut(k * t + tt).copy_from(&row.entries);
        }
        let p = build_p(&placement.panel, grid, &placement.receiver, carrier)?;
        let w = codebook.as_snapshot_matrix(k)?;
        factors.push(RisFactors { w, p });
        elements_per_panel.push(n);
    }

    Ok(ImagingMatrix { stacked, factors, snapshots: t, elements_per_panel })
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Noise configuration for synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// No noise.
    Noiseless,
    /// Circular complex Gaussian with this per-sample variance.
    Variance(f64),
    /// Variance chosen as `mean(|Hs|^2) / 10^(snr/10)`.
    SnrDb(f64),
}

/// Complex or amplitude-only received samples.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementValues {
    Complex(DVector<Complex64>),
    Amplitude(DVector<f64>),
}

/// K*T received samples plus noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    values: MeasurementValues,
    noise_variance: f64,
    seed: u64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        match &self.values {
            MeasurementValues::Complex(v) => v.len(),
            MeasurementValues::Amplitude(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_amplitude_only(&self) -> bool {
        matches!(self.values, MeasurementValues::Amplitude(_))
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn complex_values(&self) -> Result<&DVector<Complex64>> {
        match &self.values {
            MeasurementValues::Complex(v) => Ok(v),
            MeasurementValues::Amplitude(_) => {
                Err(Error::WrongMeasurementMode { expected: "complex" })
            }
        }
    }

    pub fn amplitudes(&self) -> Result<&DVector<f64>> {
        match &self.values {
            MeasurementValues::Amplitude(v) => Ok(v),
            MeasurementValues::Complex(_) => {
                Err(Error::WrongMeasurementMode { expected: "amplitude" })
            }
        }
    }

    pub fn from_complex(values: DVector<Complex64>, noise_variance: f64, seed: u64) -> Self {
        Self { values: MeasurementValues::Complex(values), noise_variance, seed }
    }

    pub fn from_amplitudes(values: DVector<f64>, noise_variance: f64, seed: u64) -> Self {
        Self { values: MeasurementValues::Amplitude(values), noise_variance, seed }
    }
}

/// Synthesize `y = H s + n` with seeded circular complex Gaussian noise.
pub fn synthesize_measurements(
    h: &ImagingMatrix,
    source: &SourceField,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<MeasurementSet> {
    if source.len() != h.num_cells() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} cells, imaging matrix {}",
            source.len(),
            h.num_cells()
        )));
    }
    let clean = h.stacked() * source.values();
    let variance = match noise {
        NoiseSpec::Noiseless => 0.0,
        NoiseSpec::Variance(v) => {
            if *v < 0.0 {
                return Err(Error::invalid("noise.variance", "must be >= 0"));
            }
            *v
        }
        NoiseSpec::SnrDb(snr) => {
            let mean_power = clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / clean.len() as f64;
            mean_power / 10f64.powf(snr / 10.0)
        }
    };
    let mut values = clean;
    if variance > 0.0 {
        let mut rng = substream(seed, StreamDomain::Noise, 0);
        let sigma = (variance / 2.0).sqrt();
        for v in values.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(MeasurementSet::from_complex(values, variance, seed))
}

/// Elementwise modulus; idempotent on amplitude-mode input.
pub fn amplitude_measurements(m: &MeasurementSet) -> MeasurementSet {
    match &m.values {
        MeasurementValues::Complex(v) => MeasurementSet::from_amplitudes(
            v.map(|c| c.norm()),
            m.noise_variance,
            m.seed,
        ),
        MeasurementValues::Amplitude(_) => m.clone(),
    }
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------
//
// Little-endian layout shared by both containers:
//   magic [u8; 4], version u32, then payload. Complex entries are stored
//   as IEEE-754 double pairs (re, im), row-major.

const MATRIX_MAGIC: &[u8; 4] = b"RISM";
const MEASUREMENT_MAGIC: &[u8; 4] = b"RISY";
const CONTAINER_VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<R, 8>(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<R, 8>(r)?))
}

/// Serialize a complex matrix: header, rows, cols, then entries.
pub fn write_complex_matrix<W: Write>(w: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    write_u32(w, CONTAINER_VERSION)?;
    write_u64(w, m.nrows() as u64)?;
    write_u64(w, m.ncols() as u64)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            write_f64(w, m[(r, c)].re)?;
            write_f64(w, m[(r, c)].im)?;
        }
    }
    Ok(())
}

pub fn read_complex_matrix<R: Read>(r: &mut R) -> Result<DMatrix<Complex64>> {
    let magic = read_exact::<R, 4>(r)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Parse("bad matrix container magic".into()));
    }
    let version = read_u32(r)?;
    if version != CONTAINER_VERSION {
        return Err(Error::Parse(format!("unsupported matrix container version {version}")));
    }
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        entries.push(Complex64::new(re, im));
    }
    Ok(DMatrix::from_row_iterator(rows, cols, entries))
}

/// Serialize a measurement set: header, mode, variance, seed, length, values.
pub fn write_measurements<W: Write>(w: &mut W, m: &MeasurementSet) -> Result<()> {
    w.write_all(MEASUREMENT_MAGIC)?;
    write_u32(w, CONTAINER_VERSION)?;
    write_u32(w, if m.is_amplitude_only() { 1 } else { 0 })?;
    write_f64(w, m.noise_variance)?;
    write_u64(w, m.seed)?;
    write_u64(w, m.len() as u64)?;
    match &m.values {
        MeasurementValues::Complex(v) => {
            for c in v.iter() {
                write_f64(w, c.re)?;
                write_f64(w, c.im)?;
            }
        }
        MeasurementValues::Amplitude(v) => {
            for a in v.iter() {
                write_f64(w, *a)?;
            }
        }
    }
    Ok(())
}

pub fn read_measurements<R: Read>(r: &mut R) -> Result<MeasurementSet> {
    let magic = read_exact::<R, 4>(r)?;
    if &magic != MEASUREMENT_MAGIC {
        return Err(Error::Parse("bad measurement container magic".into()));
    }
    let version = read_u32(r)?;
    if version != CONTAINER_VERSION {
        return Err(Error::Parse(format!(
            "unsupported measurement container version {version}"
        )));
    }
    let amplitude = read_u32(r)? == 1;
    let variance = read_f64(r)?;
    let seed = read_u64(r)?;
    let len = read_u64(r)? as usize;
    if amplitude {
        let mut vals = Vec::with_capacity(len);
        for _ in 0..len {
            vals.push(read_f64(r)?);
        }
        Ok(MeasurementSet::from_amplitudes(DVector::from_vec(vals), variance, seed))
    } else {
        let mut vals = Vec::with_capacity(len);
        for _ in 0..len {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            vals.push(Complex64::new(re, im));
        }
        Ok(MeasurementSet::from_complex(DVector::from_vec(vals), variance, seed))
    }
}
