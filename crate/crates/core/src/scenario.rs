//! Scenario definition: the full experiment description, file loading,
//! presets, and embedded letter sources.
//!
//! Scenario files are TOML with units spelled out in field names
//! (`frequency_hz`, `spacing_m`, `snr_db`). Every `[[ris]]` block wires
//! exactly one panel to one receiver; K is the block count.

use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::Deserialize;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::forward::{self, ImagingMatrix, MeasurementSet, NoiseSpec, SourceField};
use crate::geometry::{
    far_field_min_distance, CarrierConfig, GridSpec, PanelSpec, RisPlacement,
};
use crate::recon::{LSOptions, WFOptions};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// What the scene emits.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// Embedded letter bitmap id: "H", "U", "S", "T", or "HUST"
    /// (one letter per z-layer, needs exactly 4 layers).
    Letter(String),
    /// Text PGM whose dimensions match the grid x/y counts (2D grids).
    ImagePgm(PathBuf),
    /// Explicit point sources.
    Points(Vec<PointSource>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSource {
    /// Cell coordinates (ix, iy, iz).
    pub cell: [usize; 3],
    pub magnitude: f64,
}

/// Phase assignment for the source field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePolicy {
    /// i.i.d. uniform phases from the scenario seed. Default.
    RandomUniform,
    /// All-zero phases (debugging / controlled studies).
    Zero,
}

/// Which solver(s) a run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Ls,
    Amplitude,
    Both,
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub carrier: CarrierConfig,
    pub grid: GridSpec,
    pub ris: Vec<RisPlacement>,
    /// Snapshots per RIS (T).
    pub snapshots: usize,
    /// Master seed: codebooks, noise, and source phases derive substreams.
    pub seed: u64,
    pub noise: NoiseSpec,
    pub source: SourceSpec,
    pub phases: PhasePolicy,
    pub solver: SolverChoice,
    pub ls_options: LSOptions,
    /// When set (the default), noisy least-squares runs use the realized
    /// noise variance as the Tikhonov weight, so inversion gain rolls off
    /// at the noise floor. An explicit `regularization` value in the
    /// scenario file turns this off. Noiseless runs are unaffected.
    pub ls_auto_regularization: bool,
    pub wf_options: WFOptions,
}

impl Scenario {
    /// Number of RIS/receiver systems K.
    pub fn num_ris(&self) -> usize {
        self.ris.len()
    }

    /// Structural checks plus far-field advisories. Violating the
    /// Fraunhofer bound is reported as a warning, never an error.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.ris.is_empty() {
            return Err(Error::invalid("ris", "at least one panel/receiver pair required"));
        }
        if self.snapshots == 0 {
            return Err(Error::invalid("sampling.snapshots", "must be >= 1"));
        }
        let mut warnings = Vec::new();
        for (k, placement) in self.ris.iter().enumerate() {
            let bound = far_field_min_distance(&placement.panel, &self.carrier);
            let recv_range = (placement.receiver - placement.panel.center()).norm();
            if recv_range < 1e-12 {
                return Err(Error::DegenerateGeometry(format!(
                    "ris[{k}]: receiver coincides with panel center"
                )));
            }
            if recv_range < bound {
                warnings.push(format!(
                    "ris[{k}]: receiver at {recv_range:.2} m is inside the far-field bound {bound:.2} m"
                ));
            }
            let mut min_cell = f64::INFINITY;
            for cell in self.grid.grid_points() {
                let d = (cell - placement.panel.center()).norm();
                if d < 1e-12 {
                    return Err(Error::DegenerateGeometry(format!(
                        "ris[{k}]: a grid cell coincides with the panel center"
                    )));
                }
                min_cell = min_cell.min(d);
            }
            if min_cell < bound {
                warnings.push(format!(
                    "ris[{k}]: nearest grid cell at {min_cell:.2} m is inside the far-field bound {bound:.2} m"
                ));
            }
        }
        Ok(warnings)
    }

    /// 1-bit codebook for all panels from the scenario seed.
    pub fn codebook(&self) -> Result<Codebook> {
        let counts: Vec<usize> = self.ris.iter().map(|p| p.panel.num_elements()).collect();
        Codebook::random_one_bit_for_panels(&counts, self.snapshots, self.seed)
    }

    /// Assemble the stacked imaging matrix for this scene.
    pub fn imaging_matrix(&self) -> Result<ImagingMatrix> {
        let codebook = self.codebook()?;
        forward::assemble_from_parts(&self.carrier, &self.grid, &self.ris, &codebook)
    }

    /// Resolve the source descriptor into a complex field.
    pub fn source_field(&self) -> Result<SourceField> {
        let magnitudes = match &self.source {
            SourceSpec::Letter(id) => letter_magnitudes(id, &self.grid)?,
            SourceSpec::ImagePgm(path) => pgm_magnitudes(path, &self.grid)?,
            SourceSpec::Points(points) => {
                let mut mags = vec![0.0; self.grid.num_cells()];
                let counts = self.grid.counts();
                for p in points {
                    if p.cell[0] >= counts[0] || p.cell[1] >= counts[1] || p.cell[2] >= counts[2] {
                        return Err(Error::IndexOutOfRange(format!(
                            "point source cell {:?} outside grid {:?}",
                            p.cell, counts
                        )));
                    }
                    if p.magnitude < 0.0 {
                        return Err(Error::invalid("source.points", "magnitude must be >= 0"));
                    }
                    mags[self.grid.cell_index(p.cell[0], p.cell[1], p.cell[2])] = p.magnitude;
                }
                mags
            }
        };
        match self.phases {
            PhasePolicy::Zero => SourceField::from_magnitudes(magnitudes),
            PhasePolicy::RandomUniform => {
                SourceField::from_magnitudes_with_random_phases(magnitudes, self.seed)
            }
        }
    }

    /// Synthesize measurements for this scene's source and noise settings.
    pub fn measurements(&self, h: &ImagingMatrix) -> Result<MeasurementSet> {
        let source = self.source_field()?;
        forward::synthesize_measurements(h, &source, &self.noise, self.seed)
    }

    /// Copy with a different snapshot count.
    pub fn with_snapshots(&self, snapshots: usize) -> Scenario {
        Scenario { snapshots, ..self.clone() }
    }

    /// Copy with every panel resized to `rows x cols` (same centers,
    /// axes, pitch).
    pub fn with_panel_elements(&self, rows: usize, cols: usize) -> Result<Scenario> {
        let mut out = self.clone();
        for placement in out.ris.iter_mut() {
            let p = &placement.panel;
            let rebuilt = PanelSpec::facing(
                p.center(),
                p.center() + p.normal(),
                rows,
                cols,
                p.pitch_m(),
            )?;
            placement.panel = rebuilt;
        }
        out.name = format!("{}-n{}x{}", self.name, rows, cols);
        Ok(out)
    }

    /// Copy with a different master seed.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }
}

// ---------------------------------------------------------------------------
// TOML loading
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    carrier: Option<CarrierFile>,
    grid: GridFile,
    #[serde(default)]
    ris: Vec<RisFile>,
    sampling: Option<SamplingFile>,
    noise: Option<NoiseFile>,
    source: Option<SourceFile>,
    solver: Option<SolverFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarrierFile {
    frequency_hz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    center_m: [f64; 3],
    counts: [usize; 3],
    spacing_m: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RisFile {
    center_m: [f64; 3],
    rows: usize,
    cols: usize,
    /// Defaults to half the carrier wavelength.
    pitch_m: Option<f64>,
    /// Point the panel normal at this target; defaults to the grid center.
    target_m: Option<[f64; 3]>,
    receiver_m: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingFile {
    snapshots: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    snr_db: Option<f64>,
    variance: Option<f64>,
    noiseless: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    letter: Option<String>,
    image_pgm: Option<String>,
    points: Option<Vec<PointFile>>,
    /// "random" (default) or "zero".
    phases: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    cell: [usize; 3],
    magnitude: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    /// "ls" (default), "amplitude", or "both".
    kind: Option<String>,
    regularization: Option<f64>,
    max_outer: Option<usize>,
    inner_steps: Option<usize>,
    tolerance: Option<f64>,
}

const DEFAULT_FREQUENCY_HZ: f64 = 5.8e9;
const DEFAULT_SNAPSHOTS: usize = 300;
const DEFAULT_SEED: u64 = 7;
const DEFAULT_SNR_DB: f64 = 30.0;

fn point3(a: [f64; 3]) -> Point3<f64> {
    Point3::new(a[0], a[1], a[2])
}

/// Parse and validate a scenario file; returns the resolved scenario and
/// any far-field warnings.
pub fn load_scenario(path: &Path) -> Result<(Scenario, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let scenario = scenario_from_toml(&text, path.parent())?;
    let warnings = scenario.validate()?;
    Ok((scenario, warnings))
}

/// Parse a scenario from TOML text. `base_dir` anchors relative source
/// image paths.
pub fn scenario_from_toml(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    let carrier = CarrierConfig::new(
        file.carrier.map(|c| c.frequency_hz).unwrap_or(DEFAULT_FREQUENCY_HZ),
    )?;
    let grid = GridSpec::new(point3(file.grid.center_m), file.grid.counts, file.grid.spacing_m)?;

    if file.ris.is_empty() {
        return Err(Error::invalid("ris", "at least one [[ris]] block required"));
    }
    let mut ris = Vec::with_capacity(file.ris.len());
    for r in &file.ris {
        let pitch = r.pitch_m.unwrap_or_else(|| carrier.wavelength_m() / 2.0);
        let target = r.target_m.map(point3).unwrap_or_else(|| grid.origin());
        let panel = PanelSpec::facing(point3(r.center_m), target, r.rows, r.cols, pitch)?;
        ris.push(RisPlacement { panel, receiver: point3(r.receiver_m) });
    }

    let sampling = file.sampling.unwrap_or(SamplingFile { snapshots: None, seed: None });
    let snapshots = sampling.snapshots.unwrap_or(DEFAULT_SNAPSHOTS);
    let seed = sampling.seed.unwrap_or(DEFAULT_SEED);

    let noise = match file.noise {
        None => NoiseSpec::SnrDb(DEFAULT_SNR_DB),
        Some(n) => {
            let picked = [n.snr_db.is_some(), n.variance.is_some(), n.noiseless.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if picked > 1 {
                return Err(Error::invalid(
                    "noise",
                    "choose exactly one of snr_db, variance, noiseless",
                ));
            }
            if n.noiseless == Some(true) {
                NoiseSpec::Noiseless
            } else if let Some(v) = n.variance {
                NoiseSpec::Variance(v)
            } else {
                NoiseSpec::SnrDb(n.snr_db.unwrap_or(DEFAULT_SNR_DB))
            }
        }
    };

    let (source, phases) = match file.source {
        None => (
            SourceSpec::Points(vec![PointSource { cell: [0, 0, 0], magnitude: 1.0 }]),
            PhasePolicy::RandomUniform,
        ),
        Some(s) => {
            let phases = match s.phases.as_deref() {
                None | Some("random") => PhasePolicy::RandomUniform,
                Some("zero") => PhasePolicy::Zero,
                Some(other) => {
                    return Err(Error::invalid("source.phases", format!("unknown policy `{other}`")))
                }
            };
            let picked = [s.letter.is_some(), s.image_pgm.is_some(), s.points.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if picked != 1 {
                return Err(Error::invalid(
                    "source",
                    "choose exactly one of letter, image_pgm, points",
                ));
            }
            let spec = if let Some(letter) = s.letter {
                SourceSpec::Letter(letter)
            } else if let Some(img) = s.image_pgm {
                let path = PathBuf::from(&img);
                let path = if path.is_relative() {
                    base_dir.map(|d| d.join(&path)).unwrap_or(path)
                } else {
                    path
                };
                SourceSpec::ImagePgm(path)
            } else {
                SourceSpec::Points(
                    s.points
                        .unwrap()
                        .into_iter()
                        .map(|p| PointSource { cell: p.cell, magnitude: p.magnitude })
                        .collect(),
                )
            };
            (spec, phases)
        }
    };

    let (solver, ls_options, ls_auto_regularization, wf_options) = match file.solver {
        None => (SolverChoice::Ls, LSOptions::default(), true, WFOptions::default()),
        Some(s) => {
            let kind = match s.kind.as_deref() {
                None | Some("ls") => SolverChoice::Ls,
                Some("amplitude") => SolverChoice::Amplitude,
                Some("both") => SolverChoice::Both,
                Some(other) => {
                    return Err(Error::invalid("solver.kind", format!("unknown kind `{other}`")))
                }
            };
            let mut ls = LSOptions::default();
            let mut auto = true;
            if let Some(reg) = s.regularization {
                if reg < 0.0 {
                    return Err(Error::invalid("solver.regularization", "must be >= 0"));
                }
                ls.regularization = reg;
                auto = false;
            }
            let mut wf = WFOptions::default();
            if let Some(mo) = s.max_outer {
                wf.max_outer = mo;
            }
            if let Some(is) = s.inner_steps {
                wf.inner_steps = is;
            }
            if let Some(tol) = s.tolerance {
                wf.tolerance = tol;
            }
            (kind, ls, auto, wf)
        }
    };

    Ok(Scenario {
        name: file.name.unwrap_or_else(|| "scenario".to_string()),
        carrier,
        grid,
        ris,
        snapshots,
        seed,
        noise,
        source,
        phases,
        solver,
        ls_options,
        ls_auto_regularization,
        wf_options,
    })
}

// ---------------------------------------------------------------------------
// Letter sources
// ---------------------------------------------------------------------------

/// Axis-aligned stroke in the unit square (x0, x1, y0, y1).
type Stroke = (f64, f64, f64, f64);

fn glyph_strokes(letter: char) -> Option<&'static [Stroke]> {
    // y grows upward; strokes cover [x0,x1] x [y0,y1]
    const H: &[Stroke] = &[
        (0.10, 0.30, 0.10, 0.90),
        (0.70, 0.90, 0.10, 0.90),
        (0.30, 0.70, 0.45, 0.55),
    ];
    const U: &[Stroke] = &[
        (0.10, 0.30, 0.30, 0.90),
        (0.70, 0.90, 0.30, 0.90),
        (0.10, 0.90, 0.10, 0.30),
    ];
    const S: &[Stroke] = &[
        (0.10, 0.90, 0.76, 0.90),
        (0.10, 0.24, 0.57, 0.76),
        (0.10, 0.90, 0.43, 0.57),
        (0.76, 0.90, 0.24, 0.43),
        (0.10, 0.90, 0.10, 0.24),
    ];
    const T: &[Stroke] = &[
        (0.10, 0.90, 0.75, 0.90),
        (0.42, 0.58, 0.10, 0.75),
    ];
    match letter {
        'H' => Some(H),
        'U' => Some(U),
        'S' => Some(S),
        'T' => Some(T),
        _ => None,
    }
}

fn rasterize_layer(letter: char, counts: [usize; 3], layer: usize, out: &mut [f64]) -> Result<()> {
    let strokes = glyph_strokes(letter)
        .ok_or_else(|| Error::UnknownLetter(letter.to_string()))?;
    let (mx, my) = (counts[0], counts[1]);
    for iy in 0..my {
        for ix in 0..mx {
            let u = (ix as f64 + 0.5) / mx as f64;
            let v = (iy as f64 + 0.5) / my as f64;
            let lit = strokes
                .iter()
                .any(|&(x0, x1, y0, y1)| u >= x0 && u <= x1 && v >= y0 && v <= y1);
            if lit {
                out[(layer * my + iy) * mx + ix] = 1.0;
            }
        }
    }
    Ok(())
}

/// Magnitude image for an embedded letter id on a grid. "HUST" rasterizes
/// one letter per z-layer and requires exactly four layers.
pub fn letter_magnitudes(id: &str, grid: &GridSpec) -> Result<Vec<f64>> {
    let counts = grid.counts();
    let mut out = vec![0.0; grid.num_cells()];
    match id {
        "H" | "U" | "S" | "T" => {
            let letter = id.chars().next().unwrap();
            for layer in 0..counts[2] {
                rasterize_layer(letter, counts, layer, &mut out)?;
            }
        }
        "HUST" => {
            if counts[2] != 4 {
                return Err(Error::invalid(
                    "source.letter",
                    format!("HUST needs a 4-layer grid, got {} layers", counts[2]),
                ));
            }
            for (layer, letter) in ['H', 'U', 'S', 'T'].into_iter().enumerate() {
                rasterize_layer(letter, counts, layer, &mut out)?;
            }
        }
        other => return Err(Error::UnknownLetter(other.to_string())),
    }
    Ok(out)
}

/// Zero-phase source field for an embedded letter.
pub fn letter_source(id: &str, grid: &GridSpec) -> Result<SourceField> {
    SourceField::from_magnitudes(letter_magnitudes(id, grid)?)
}

/// Assemble the stacked imaging matrix of a scenario; free-function form
/// of [`Scenario::imaging_matrix`].
pub fn assemble_imaging_matrix(scenario: &Scenario) -> Result<ImagingMatrix> {
    scenario.imaging_matrix()
}

/// Load a text PGM (P2) as normalized magnitudes matching the grid's x/y
/// counts; image row 0 maps to the top of the scene (largest y).
fn pgm_magnitudes(path: &Path, grid: &GridSpec) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut tokens = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace())
        .peekable();
    if tokens.next() != Some("P2") {
        return Err(Error::Parse("source image must be a text PGM (P2)".into()));
    }
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("PGM truncated before {what}")))?
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("PGM: bad {what}")))
    };
    let width = next_usize("width")?;
    let height = next_usize("height")?;
    let maxval = next_usize("maxval")?;
    if maxval == 0 {
        return Err(Error::Parse("PGM maxval must be > 0".into()));
    }
    let counts = grid.counts();
    if width != counts[0] || height != counts[1] || counts[2] != 1 {
        return Err(Error::DimensionMismatch(format!(
            "PGM {width}x{height} does not match grid {:?} (2D grids only)",
            counts
        )));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        pixels.push(next_usize("pixel")? as f64 / maxval as f64);
    }
    let mut out = vec![0.0; grid.num_cells()];
    for iy in 0..height {
        for ix in 0..width {
            // PGM rows run top-to-bottom; grid y runs bottom-to-top
            let src = (height - 1 - iy) * width + ix;
            out[iy * width + ix] = pixels[src];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Named scenario presets mirroring the experiment scenes.
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "fig3-H" => letter_scene_preset(),
        "fig7-I" | "fig7-II" | "fig7-III" => deployment_preset(name),
        "chamber" => chamber_preset(),
        "office" => office_preset(),
        other => Err(Error::invalid("preset", format!("unknown preset `{other}`"))),
    }
}

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &["fig3-H", "fig7-I", "fig7-II", "fig7-III", "chamber", "office"]
}

/// Letter scene: 32 m x 32 m x 2 m region at 2 m pitch (16 x 16 cells),
/// one 40 x 40 panel 50 m in front, receiver 10 m in front of the panel.
fn letter_scene_preset() -> Result<Scenario> {
    let carrier = CarrierConfig::new(DEFAULT_FREQUENCY_HZ)?;
    let grid = GridSpec::new(Point3::origin(), [16, 16, 1], [2.0, 2.0, 2.0])?;
    let panel_center = Point3::new(0.0, 0.0, 50.0);
    let panel = PanelSpec::facing(panel_center, grid.origin(), 40, 40, carrier.wavelength_m() / 2.0)?;
    let receiver = Point3::new(0.0, 0.0, 40.0);
    Ok(Scenario {
        name: "fig3-H".to_string(),
        carrier,
        grid,
        ris: vec![RisPlacement { panel, receiver }],
        snapshots: DEFAULT_SNAPSHOTS,
        seed: DEFAULT_SEED,
        noise: NoiseSpec::SnrDb(DEFAULT_SNR_DB),
        source: SourceSpec::Letter("H".to_string()),
        phases: PhasePolicy::RandomUniform,
        solver: SolverChoice::Ls,
        ls_options: LSOptions::default(),
        ls_auto_regularization: true,
        wf_options: WFOptions::default(),
    })
}

/// Four-panel deployment scenes over a 10 m x 10 m x 30 m region split
/// into 10 x 10 x 4 cells, letters per layer. The three placements
/// approximate, in order: a far horizontal cluster (I), panels spread
/// vertically across the layer heights (II), and a mix of both (III).
fn deployment_preset(name: &str) -> Result<Scenario> {
    let carrier = CarrierConfig::new(DEFAULT_FREQUENCY_HZ)?;
    let grid = GridSpec::new(Point3::origin(), [10, 10, 4], [1.0, 1.0, 7.5])?;
    let pitch = carrier.wavelength_m() / 2.0;
    let layer_z = [-11.25, -3.75, 3.75, 11.25];

    let clustered = |y: f64| -> Result<RisPlacement> {
        let center = Point3::new(60.0, y, 0.0);
        let panel = PanelSpec::facing(center, grid.origin(), 20, 20, pitch)?;
        let receiver = Point3::new(52.0, y, 0.0);
        Ok(RisPlacement { panel, receiver })
    };
    let vertical = |z: f64| -> Result<RisPlacement> {
        let center = Point3::new(15.0, 0.0, z);
        let target = Point3::new(0.0, 0.0, z);
        let panel = PanelSpec::facing(center, target, 20, 20, pitch)?;
        let receiver = Point3::new(10.0, 1.0, z);
        Ok(RisPlacement { panel, receiver })
    };

    let ris = match name {
        "fig7-I" => vec![clustered(-6.0)?, clustered(-2.0)?, clustered(2.0)?, clustered(6.0)?],
        "fig7-II" => vec![
            vertical(layer_z[0])?,
            vertical(layer_z[1])?,
            vertical(layer_z[2])?,
            vertical(layer_z[3])?,
        ],
        "fig7-III" => vec![
            clustered(-2.0)?,
            clustered(2.0)?,
            vertical(layer_z[1])?,
            vertical(layer_z[2])?,
        ],
        _ => unreachable!(),
    };

    Ok(Scenario {
        name: name.to_string(),
        carrier,
        grid,
        ris,
        snapshots: DEFAULT_SNAPSHOTS,
        seed: DEFAULT_SEED,
        noise: NoiseSpec::SnrDb(DEFAULT_SNR_DB),
        source: SourceSpec::Letter("HUST".to_string()),
        phases: PhasePolicy::RandomUniform,
        solver: SolverChoice::Ls,
        ls_options: LSOptions::default(),
        ls_auto_regularization: true,
        wf_options: WFOptions::default(),
    })
}

/// Two 32-element line arrays imaging a 7 m x 8 m room at 1 m pitch,
/// amplitude-only, single point source.
fn chamber_preset() -> Result<Scenario> {
    let carrier = CarrierConfig::new(DEFAULT_FREQUENCY_HZ)?;
    let grid = GridSpec::new(Point3::origin(), [7, 8, 1], [1.0, 1.0, 1.0])?;
    let pitch = carrier.wavelength_m() / 2.0;
    let p1 = PanelSpec::facing(Point3::new(8.0, 0.0, 0.0), grid.origin(), 1, 32, pitch)?;
    let p2 = PanelSpec::facing(Point3::new(0.0, 9.0, 0.0), grid.origin(), 1, 32, pitch)?;
    Ok(Scenario {
        name: "chamber".to_string(),
        carrier,
        grid,
        ris: vec![
            RisPlacement { panel: p1, receiver: Point3::new(5.5, 0.7, 0.0) },
            RisPlacement { panel: p2, receiver: Point3::new(0.7, 6.5, 0.0) },
        ],
        snapshots: 500,
        seed: DEFAULT_SEED,
        noise: NoiseSpec::SnrDb(DEFAULT_SNR_DB),
        source: SourceSpec::Points(vec![PointSource { cell: [2, 5, 0], magnitude: 1.0 }]),
        phases: PhasePolicy::RandomUniform,
        solver: SolverChoice::Amplitude,
        ls_options: LSOptions::default(),
        ls_auto_regularization: true,
        wf_options: WFOptions { max_outer: 1200, ..Default::default() },
    })
}

/// Office analogue: 5 m x 6 m grid, same two-line-array arrangement.
fn office_preset() -> Result<Scenario> {
    let carrier = CarrierConfig::new(DEFAULT_FREQUENCY_HZ)?;
    let grid = GridSpec::new(Point3::origin(), [5, 6, 1], [1.0, 1.0, 1.0])?;
    let pitch = carrier.wavelength_m() / 2.0;
    let p1 = PanelSpec::facing(Point3::new(7.0, 0.0, 0.0), grid.origin(), 1, 32, pitch)?;
    let p2 = PanelSpec::facing(Point3::new(0.0, 8.0, 0.0), grid.origin(), 1, 32, pitch)?;
    Ok(Scenario {
        name: "office".to_string(),
        carrier,
        grid,
        ris: vec![
            RisPlacement { panel: p1, receiver: Point3::new(4.5, 0.7, 0.0) },
            RisPlacement { panel: p2, receiver: Point3::new(0.7, 5.5, 0.0) },
        ],
        snapshots: 500,
        seed: DEFAULT_SEED,
        noise: NoiseSpec::SnrDb(DEFAULT_SNR_DB),
        source: SourceSpec::Points(vec![PointSource { cell: [1, 4, 0], magnitude: 1.0 }]),
        phases: PhasePolicy::RandomUniform,
        solver: SolverChoice::Amplitude,
        ls_options: LSOptions::default(),
        ls_auto_regularization: true,
        wf_options: WFOptions { max_outer: 1200, ..Default::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn minimal_file_resolves_with_defaults() {
        let text = r#"
            [grid]
            center_m = [0.0, 0.0, 0.0]
            counts = [1, 1, 1]
            spacing_m = [1.0, 1.0, 1.0]

            [[ris]]
            center_m = [0.0, 0.0, 10.0]
            rows = 2
            cols = 2
            receiver_m = [0.0, 0.0, 8.0]
        "#;
        let s = scenario_from_toml(text, None).unwrap();
        assert_eq!(s.snapshots, 300);
        assert_eq!(s.seed, 7);
        assert_eq!(s.carrier.frequency_hz(), 5.8e9);
        assert!(matches!(s.noise, NoiseSpec::SnrDb(v) if v == 30.0));
        assert_eq!(s.solver, SolverChoice::Ls);
        assert!((s.ris[0].panel.pitch_m() - s.carrier.wavelength_m() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_receiver_is_a_parse_error_naming_the_field() {
        let text = r#"
            [grid]
            center_m = [0.0, 0.0, 0.0]
            counts = [1, 1, 1]
            spacing_m = [1.0, 1.0, 1.0]

            [[ris]]
            center_m = [0.0, 0.0, 10.0]
            rows = 2
            cols = 2
        "#;
        let err = scenario_from_toml(text, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("receiver_m"), "diagnostic should name the field: {msg}");
    }

    #[test]
    fn letter_preset_matches_scene_constants() {
        let s = preset("fig3-H").unwrap();
        assert_eq!(s.grid.counts(), [16, 16, 1]);
        assert_eq!(s.grid.extent_m(), [32.0, 32.0, 2.0]);
        assert_eq!(s.ris.len(), 1);
        assert_eq!(s.ris[0].panel.rows(), 40);
        assert_eq!(s.ris[0].panel.cols(), 40);
        assert!((s.ris[0].panel.center() - Point3::new(0.0, 0.0, 50.0)).norm() < 1e-12);
        assert!((s.ris[0].receiver - Point3::new(0.0, 0.0, 40.0)).norm() < 1e-12);
        // receiver sits 10 m in front of the panel
        assert!(((s.ris[0].receiver - s.ris[0].panel.center()).norm() - 10.0).abs() < 1e-12);
        let warnings = s.validate().unwrap();
        // 40x40 panel bound ~78.6 m exceeds both 10 m and 50 m: expect warnings
        assert!(!warnings.is_empty());
    }

    #[test]
    fn deployment_presets_have_four_panels_each() {
        for name in ["fig7-I", "fig7-II", "fig7-III"] {
            let s = preset(name).unwrap();
            assert_eq!(s.ris.len(), 4, "{name}");
            assert_eq!(s.grid.counts(), [10, 10, 4]);
            assert_eq!(s.grid.extent_m(), [10.0, 10.0, 30.0]);
            for p in &s.ris {
                assert_eq!(p.panel.num_elements(), 400);
            }
            s.validate().unwrap();
        }
    }

    #[test]
    fn unknown_preset_errors() {
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn letter_h_bitmap_is_symmetric_with_frozen_count() {
        let grid = GridSpec::new(Point3::origin(), [16, 16, 1], [2.0, 2.0, 2.0]).unwrap();
        let mags = letter_magnitudes("H", &grid).unwrap();
        let lit = mags.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(lit, 84, "embedded H fixture changed");
        // mirror symmetry in x
        for iy in 0..16 {
            for ix in 0..16 {
                assert_eq!(
                    mags[iy * 16 + ix],
                    mags[iy * 16 + (15 - ix)],
                    "asymmetry at ({ix},{iy})"
                );
            }
        }
    }

    #[test]
    fn hust_needs_four_layers_and_fills_each() {
        let grid3 = GridSpec::new(Point3::origin(), [10, 10, 3], [1.0, 1.0, 1.0]).unwrap();
        assert!(letter_magnitudes("HUST", &grid3).is_err());
        let grid = GridSpec::new(Point3::origin(), [10, 10, 4], [1.0, 1.0, 7.5]).unwrap();
        let mags = letter_magnitudes("HUST", &grid).unwrap();
        for layer in 0..4 {
            let lit = (0..100).filter(|i| mags[layer * 100 + i] > 0.0).count();
            assert!(lit > 0, "layer {layer} empty");
        }
    }

    #[test]
    fn unknown_letter_errors() {
        let grid = GridSpec::new(Point3::origin(), [8, 8, 1], [1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            letter_magnitudes("Q", &grid),
            Err(Error::UnknownLetter(_))
        ));
    }

    #[test]
    fn point_sources_land_on_their_cells() {
        let mut s = preset("chamber").unwrap();
        s.phases = PhasePolicy::Zero;
        let field = s.source_field().unwrap();
        let idx = s.grid.cell_index(2, 5, 0);
        assert_eq!(field.values()[idx].re, 1.0);
        assert_eq!(field.values().iter().filter(|v| v.norm() > 0.0).count(), 1);
    }

    #[test]
    fn out_of_grid_point_source_errors() {
        let mut s = preset("chamber").unwrap();
        s.source = SourceSpec::Points(vec![PointSource { cell: [7, 0, 0], magnitude: 1.0 }]);
        assert!(s.source_field().is_err());
    }

    #[test]
    fn pgm_source_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let pgm_path = dir.path().join("src.pgm");
        let mut f = std::fs::File::create(&pgm_path).unwrap();
        // 3x2 image: top row 0 0 255, bottom row 255 0 0
        writeln!(f, "P2\n3 2\n255\n0 0 255\n255 0 0").unwrap();
        drop(f);
        let toml_text = format!(
            r#"
            [grid]
            center_m = [0.0, 0.0, 0.0]
            counts = [3, 2, 1]
            spacing_m = [1.0, 1.0, 1.0]

            [[ris]]
            center_m = [0.0, 0.0, 10.0]
            rows = 2
            cols = 2
            receiver_m = [0.0, 0.0, 8.0]

            [source]
            image_pgm = "{}"
            phases = "zero"
        "#,
            pgm_path.display()
        );
        let scenario_path = dir.path().join("scene.toml");
        std::fs::write(&scenario_path, toml_text).unwrap();
        let (s, _warnings) = load_scenario(&scenario_path).unwrap();
        let field = s.source_field().unwrap();
        // bottom-left grid cell (iy=0) holds the bottom PGM row's first pixel
        assert_eq!(field.values()[s.grid.cell_index(0, 0, 0)].re, 1.0);
        assert_eq!(field.values()[s.grid.cell_index(2, 1, 0)].re, 1.0);
        assert_eq!(field.values()[s.grid.cell_index(1, 0, 0)].re, 0.0);
    }

    #[test]
    fn scenario_seed_controls_codebook() {
        let s = preset("chamber").unwrap();
        let a = s.codebook().unwrap();
        let b = s.with_seed(s.seed).codebook().unwrap();
        assert_eq!(a, b);
        let c = s.with_seed(s.seed + 1).codebook().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn panel_resize_preserves_placement() {
        let s = preset("fig3-H").unwrap();
        let resized = s.with_panel_elements(6, 6).unwrap();
        assert_eq!(resized.ris[0].panel.num_elements(), 36);
        assert!((resized.ris[0].panel.center() - s.ris[0].panel.center()).norm() < 1e-12);
        assert!((resized.ris[0].panel.normal() - s.ris[0].panel.normal()).norm() < 1e-9);
    }

    #[test]
    fn bad_solver_kind_is_rejected() {
        let text = r#"
            [grid]
            center_m = [0.0, 0.0, 0.0]
            counts = [1, 1, 1]
            spacing_m = [1.0, 1.0, 1.0]

            [[ris]]
            center_m = [0.0, 0.0, 10.0]
            rows = 2
            cols = 2
            receiver_m = [0.0, 0.0, 8.0]

            [solver]
            kind = "magic"
        "#;
        assert!(scenario_from_toml(text, None).is_err());
    }
}
