//! Experiment orchestration: parameter sweeps, the amplitude-only demo,
//! and result emission.
//!
//! Every sweep point is an independent job with a fully derived scenario,
//! so points may run concurrently without changing any output byte.
//! Metrics and spectra go to CSV; reconstructions go to text PGM images.
//! Wall-clock timings are emitted to a separate `timings.csv` so the
//! metric files stay byte-reproducible across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{self, RankReport, RankThresholdPolicy};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::forward::{self, ImagingMatrix, MeasurementSet};
use crate::metrics::{self, ImageGrid, SsimOptions};
use crate::recon::{self, ReconResult};
use crate::scenario::{preset, Scenario, SolverChoice};

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

/// The swept parameter.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    /// Snapshot counts T.
    Snapshots(Vec<usize>),
    /// Panel sizes (rows, cols) applied to every panel.
    PanelElements(Vec<(usize, usize)>),
    /// Fully specified scenario variants (deployment studies).
    Scenarios(Vec<Scenario>),
}

/// A sweep: base scenario, axis, and the master seeds to repeat over.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: Scenario,
    pub axis: SweepAxis,
    pub seeds: Vec<u64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("plan.seeds", "at least one seed required"));
        }
        match &self.axis {
            SweepAxis::Snapshots(ts) => {
                if ts.is_empty() {
                    return Err(Error::invalid("plan.axis", "empty snapshot sweep"));
                }
                if ts.contains(&0) {
                    return Err(Error::invalid("plan.axis", "snapshot counts must be >= 1"));
                }
            }
            SweepAxis::PanelElements(ns) => {
                if ns.is_empty() {
                    return Err(Error::invalid("plan.axis", "empty element sweep"));
                }
                if ns.iter().any(|&(r, c)| r == 0 || c == 0) {
                    return Err(Error::invalid("plan.axis", "panel sizes must be >= 1"));
                }
            }
            SweepAxis::Scenarios(ss) => {
                if ss.is_empty() {
                    return Err(Error::invalid("plan.axis", "empty scenario sweep"));
                }
            }
        }
        Ok(())
    }

    /// Deterministic expansion into (tag, axis value, scenario) points.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        self.validate()?;
        let mut points = Vec::new();
        match &self.axis {
            SweepAxis::Snapshots(ts) => {
                for &t in ts {
                    points.push(SweepPoint {
                        tag: format!("T{t}"),
                        axis_value: t.to_string(),
                        scenario: self.base.with_snapshots(t),
                    });
                }
            }
            SweepAxis::PanelElements(ns) => {
                for &(r, c) in ns {
                    points.push(SweepPoint {
                        tag: format!("N{}", r * c),
                        axis_value: (r * c).to_string(),
                        scenario: self.base.with_panel_elements(r, c)?,
                    });
                }
            }
            SweepAxis::Scenarios(ss) => {
                for s in ss {
                    points.push(SweepPoint {
                        tag: s.name.clone(),
                        axis_value: s.name.clone(),
                        scenario: s.clone(),
                    });
                }
            }
        }
        Ok(points)
    }
}

/// One expanded sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub tag: String,
    pub axis_value: String,
    pub scenario: Scenario,
}

/// Named sweep presets for the stock experiments.
pub fn sweep_preset(name: &str) -> Result<ExperimentPlan> {
    match name {
        "fig3" => Ok(ExperimentPlan {
            base: preset("fig3-H")?,
            axis: SweepAxis::Snapshots(vec![100, 200, 300, 400, 500]),
            seeds: vec![preset("fig3-H")?.seed],
        }),
        "fig5" => Ok(ExperimentPlan {
            base: preset("fig3-H")?.with_snapshots(300),
            axis: SweepAxis::PanelElements(vec![
                (6, 6),
                (12, 12),
                (18, 18),
                (24, 24),
                (30, 30),
                (36, 36),
            ]),
            seeds: vec![preset("fig3-H")?.seed],
        }),
        "fig7" => {
            let scenarios = vec![preset("fig7-I")?, preset("fig7-II")?, preset("fig7-III")?];
            Ok(ExperimentPlan {
                base: preset("fig7-II")?,
                axis: SweepAxis::Scenarios(scenarios),
                seeds: vec![preset("fig7-II")?.seed],
            })
        }
        other => Err(Error::invalid("sweep preset", format!("unknown preset `{other}`"))),
    }
}

/// Names accepted by [`sweep_preset`].
pub fn sweep_preset_names() -> &'static [&'static str] {
    &["fig3", "fig5", "fig7"]
}

// ---------------------------------------------------------------------------
// Metrics rows
// ---------------------------------------------------------------------------

/// One metrics.csv row. Stable column set, documented in the README.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub label: String,
    pub axis_value: String,
    pub seed: u64,
    pub solver: &'static str,
    pub k_panels: usize,
    pub snapshots: usize,
    pub total_elements: usize,
    pub grid_cells: usize,
    pub rank: usize,
    pub rank_bound: usize,
    pub top_singular: [f64; 3],
    pub rmse: Option<f64>,
    pub ssim: Option<f64>,
    pub phase_error: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub status: String,
}

pub const METRICS_HEADER: &str = "label,axis_value,seed,solver,k_panels,snapshots,total_elements,grid_cells,rank,rank_bound,sigma1,sigma2,sigma3,rmse,ssim,phase_error,converged,iterations,status";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.12e}"),
        None => String::new(),
    }
}

impl MetricsRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.12e},{:.12e},{:.12e},{},{},{},{},{},{}",
            self.label,
            self.axis_value,
            self.seed,
            self.solver,
            self.k_panels,
            self.snapshots,
            self.total_elements,
            self.grid_cells,
            self.rank,
            self.rank_bound,
            self.top_singular[0],
            self.top_singular[1],
            self.top_singular[2],
            fmt_opt(self.rmse),
            fmt_opt(self.ssim),
            fmt_opt(self.phase_error),
            self.converged,
            self.iterations,
            self.status
        )
    }
}

// ---------------------------------------------------------------------------
// Point execution
// ---------------------------------------------------------------------------

struct PointOutcome {
    rows: Vec<MetricsRow>,
    files: Vec<(String, Vec<u8>)>,
    elapsed_seconds: f64,
}

fn point_label(tag: &str, seed: u64) -> String {
    format!("{tag}_seed{seed}")
}

/// Quantize normalized magnitudes into a text PGM (P2), flipping rows so
/// larger scene y sits at the top of the image.
fn layer_pgm(values: &[f64], counts: [usize; 3], layer: usize, scale: f64) -> Vec<u8> {
    let (mx, my) = (counts[0], counts[1]);
    let mut out = String::new();
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "{mx} {my}");
    let _ = writeln!(out, "255");
    for iy in (0..my).rev() {
        let mut line = Vec::with_capacity(mx);
        for ix in 0..mx {
            let v = values[(layer * my + iy) * mx + ix];
            let n = if scale > 0.0 { (v / scale).clamp(0.0, 1.0) } else { 0.0 };
            line.push(format!("{}", (n * 255.0).round() as u32));
        }
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out.into_bytes()
}

/// Emit one magnitude image per z-layer with the documented
/// normalization: divide by the ground-truth max when available,
/// otherwise by the image's own max.
fn image_files(
    prefix: &str,
    values: &[f64],
    counts: [usize; 3],
    truth_max: Option<f64>,
) -> Vec<(String, Vec<u8>)> {
    let own_max = values.iter().cloned().fold(0.0, f64::max);
    let scale = match truth_max {
        Some(t) if t > 0.0 => t,
        _ => own_max,
    };
    let mut files = Vec::new();
    if counts[2] == 1 {
        files.push((format!("{prefix}.pgm"), layer_pgm(values, counts, 0, scale)));
    } else {
        for z in 0..counts[2] {
            files.push((format!("{prefix}_z{z}.pgm"), layer_pgm(values, counts, z, scale)));
        }
    }
    files
}

struct SolveRecord {
    solver: &'static str,
    result: ReconResult,
}

fn solve_all(
    scenario: &Scenario,
    h: &ImagingMatrix,
    y: &MeasurementSet,
) -> Result<Vec<SolveRecord>> {
    let mut out = Vec::new();
    if matches!(scenario.solver, SolverChoice::Ls | SolverChoice::Both) {
        let mut opts = scenario.ls_options;
        if scenario.ls_auto_regularization && opts.regularization == 0.0 {
            opts.regularization = y.noise_variance();
        }
        out.push(SolveRecord {
            solver: "ls",
            result: recon::ls_reconstruct(h, y, &opts)?,
        });
    }
    if matches!(scenario.solver, SolverChoice::Amplitude | SolverChoice::Both) {
        let ya = forward::amplitude_measurements(y);
        out.push(SolveRecord {
            solver: "amplitude",
            result: recon::reweighted_wf(h, &ya, &scenario.wf_options)?,
        });
    }
    Ok(out)
}

fn run_point(tag: &str, axis_value: &str, scenario: &Scenario) -> Result<PointOutcome> {
    let start = Instant::now();
    let label = point_label(tag, scenario.seed);
    let h = scenario.imaging_matrix()?;
    let rank_report = analysis::numerical_rank(&h, &RankThresholdPolicy::default());
    let truth = scenario.source_field()?;
    let truth_mags = truth.ground_truth_magnitudes();
    let truth_max = truth_mags.iter().cloned().fold(0.0, f64::max);
    let counts = scenario.grid.counts();

    let y = scenario.measurements(&h)?;
    let records = solve_all(scenario, &h, &y)?;

    let mut files = Vec::new();
    let mut spectrum = Vec::new();
    analysis::write_singular_values_csv(&mut spectrum, &rank_report.singular_values)?;
    files.push((format!("{label}_spectrum.csv"), spectrum));
    files.extend(image_files(&format!("{label}_truth"), &truth_mags, counts, Some(truth_max)));

    let shape = counts;
    let ssim_opts = SsimOptions {
        dynamic_range: Some(if truth_max > 0.0 { truth_max } else { 1.0 }),
        ..SsimOptions::fitted_to(shape)
    };
    let truth_image = ImageGrid::from_magnitudes(truth_mags.clone(), shape)?;

    let mut rows = Vec::new();
    for record in records {
        let est_mags: Vec<f64> = record.result.estimate.iter().map(|z| z.norm()).collect();
        let report =
            metrics::metric_report(&record.result.estimate, truth.values(), &truth_image, &ssim_opts)?;
        files.extend(image_files(
            &format!("{label}_{}_recon", record.solver),
            &est_mags,
            counts,
            Some(truth_max),
        ));
        let mut history = Vec::new();
        record.result.write_history_csv(&mut history)?;
        files.push((format!("{label}_{}_history.csv", record.solver), history));

        let mut sigma = [0.0; 3];
        for (i, s) in rank_report.singular_values.iter().take(3).enumerate() {
            sigma[i] = *s;
        }
        rows.push(MetricsRow {
            label: label.clone(),
            axis_value: axis_value.to_string(),
            seed: scenario.seed,
            solver: record.solver,
            k_panels: scenario.num_ris(),
            snapshots: scenario.snapshots,
            total_elements: h.elements_per_panel().iter().sum(),
            grid_cells: h.num_cells(),
            rank: rank_report.rank,
            rank_bound: rank_report.rank_bound,
            top_singular: sigma,
            rmse: Some(report.rmse),
            ssim: Some(report.ssim),
            phase_error: Some(report.phase_aligned_error),
            converged: record.result.converged,
            iterations: record.result.iterations,
            status: "ok".to_string(),
        });
    }

    Ok(PointOutcome { rows, files, elapsed_seconds: start.elapsed().as_secs_f64() })
}

fn failed_row(tag: &str, axis_value: &str, scenario: &Scenario, err: &Error) -> MetricsRow {
    MetricsRow {
        label: point_label(tag, scenario.seed),
        axis_value: axis_value.to_string(),
        seed: scenario.seed,
        solver: "none",
        k_panels: scenario.num_ris(),
        snapshots: scenario.snapshots,
        total_elements: scenario.ris.iter().map(|p| p.panel.num_elements()).sum(),
        grid_cells: scenario.grid.num_cells(),
        rank: 0,
        rank_bound: 0,
        top_singular: [0.0; 3],
        rmse: None,
        ssim: None,
        phase_error: None,
        converged: false,
        iterations: 0,
        status: format!("error: {}", err.to_string().replace(',', ";")),
    }
}

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

/// Everything a finished sweep produced.
#[derive(Debug)]
pub struct SweepSummary {
    pub rows: Vec<MetricsRow>,
    pub metrics_csv: PathBuf,
    pub out_dir: PathBuf,
}

impl SweepSummary {
    /// Rows for one solver, in emission order.
    pub fn solver_rows(&self, solver: &str) -> Vec<&MetricsRow> {
        self.rows.iter().filter(|r| r.solver == solver).collect()
    }
}

/// Run every (point, seed) job of the plan and write metrics, spectra,
/// images, and timings under `out_dir`. Per-point failures are recorded
/// as rows and the sweep continues.
pub fn run_sweep(plan: &ExperimentPlan, out_dir: &Path) -> Result<SweepSummary> {
    let points = plan.expand()?;
    std::fs::create_dir_all(out_dir)?;

    // one job per (point, seed)
    let jobs: Vec<(usize, String, String, Scenario)> = points
        .iter()
        .flat_map(|p| {
            plan.seeds.iter().map(|&seed| {
                (p.tag.clone(), p.axis_value.clone(), p.scenario.with_seed(seed))
            })
        })
        .enumerate()
        .map(|(i, (tag, axis, s))| (i, tag, axis, s))
        .collect();

    type JobResult = std::result::Result<PointOutcome, (MetricsRow, f64)>;
    let mut outcomes: Vec<(usize, JobResult)> = jobs
        .par_iter()
        .map(|(i, tag, axis, scenario)| {
            let start = Instant::now();
            match run_point(tag, axis, scenario) {
                Ok(outcome) => (*i, Ok(outcome)),
                Err(err) => (
                    *i,
                    Err((failed_row(tag, axis, scenario, &err), start.elapsed().as_secs_f64())),
                ),
            }
        })
        .collect();
    outcomes.sort_by_key(|(i, _)| *i);

    let mut rows = Vec::new();
    let mut metrics_csv = String::new();
    let _ = writeln!(metrics_csv, "{METRICS_HEADER}");
    let mut timings_csv = String::from("label,elapsed_seconds\n");

    for (i, outcome) in outcomes {
        match outcome {
            Ok(out) => {
                for row in &out.rows {
                    let _ = writeln!(metrics_csv, "{}", row.csv_line());
                }
                let label = out
                    .rows
                    .first()
                    .map(|r| r.label.clone())
                    .unwrap_or_else(|| format!("job{i}"));
                let _ = writeln!(timings_csv, "{label},{:.6}", out.elapsed_seconds);
                for (name, bytes) in out.files {
                    std::fs::write(out_dir.join(name), bytes)?;
                }
                rows.extend(out.rows);
            }
            Err((row, elapsed)) => {
                let _ = writeln!(metrics_csv, "{}", row.csv_line());
                let _ = writeln!(timings_csv, "{},{:.6}", row.label, elapsed);
                rows.push(row);
            }
        }
    }

    let metrics_path = out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics_csv)?;
    std::fs::write(out_dir.join("timings.csv"), timings_csv)?;

    Ok(SweepSummary { rows, metrics_csv: metrics_path, out_dir: out_dir.to_path_buf() })
}

/// Run a single scenario as a one-point sweep, additionally dumping the
/// codebook text fixture per panel.
pub fn run_single(scenario: &Scenario, out_dir: &Path) -> Result<SweepSummary> {
    std::fs::create_dir_all(out_dir)?;
    let codebook = scenario.codebook()?;
    for k in 0..codebook.num_ris() {
        let mut buf = Vec::new();
        codebook.write_snapshot_text(k, &mut buf)?;
        std::fs::write(out_dir.join(format!("codebook_ris{k}.txt")), buf)?;
    }
    let plan = ExperimentPlan {
        base: scenario.clone(),
        axis: SweepAxis::Scenarios(vec![scenario.clone()]),
        seeds: vec![scenario.seed],
    };
    run_sweep(&plan, out_dir)
}

// ---------------------------------------------------------------------------
// Amplitude-only demo
// ---------------------------------------------------------------------------

/// Per-reconstruction outcome of the amplitude demo.
#[derive(Debug, Clone)]
pub struct DemoRecord {
    /// `Some(k)` for a single-RIS reconstruction, `None` for the joint one.
    pub ris: Option<usize>,
    pub complex_error: f64,
    pub rmse: f64,
    pub ssim: f64,
    /// Grid index of the brightest reconstructed cell.
    pub peak_cell: usize,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug)]
pub struct DemoSummary {
    pub records: Vec<DemoRecord>,
    /// Grid index of the brightest ground-truth cell.
    pub truth_peak_cell: usize,
    pub out_dir: PathBuf,
}

impl DemoSummary {
    pub fn joint_error(&self) -> f64 {
        self.records
            .iter()
            .find(|r| r.ris.is_none())
            .map(|r| r.complex_error)
            .unwrap_or(f64::NAN)
    }

    pub fn single_errors(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.ris.is_some())
            .map(|r| r.complex_error)
            .collect()
    }

    /// Whether the joint reconstruction peaks on the brightest truth cell.
    pub fn joint_peak_matches_truth(&self) -> bool {
        self.records
            .iter()
            .find(|r| r.ris.is_none())
            .map(|r| r.peak_cell == self.truth_peak_cell)
            .unwrap_or(false)
    }
}

fn peak_index(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Amplitude-only comparison: reconstruct from each RIS alone and from
/// all RISs jointly, emitting the side-by-side images.
///
/// Requires line-array panels (a single row or column) and a 2D grid.
pub fn run_amplitude_demo(scenario: &Scenario, out_dir: &Path) -> Result<DemoSummary> {
    for (k, p) in scenario.ris.iter().enumerate() {
        if p.panel.rows() != 1 && p.panel.cols() != 1 {
            return Err(Error::invalid(
                "demo",
                format!("ris[{k}] must be a line array (rows==1 or cols==1)"),
            ));
        }
    }
    if scenario.grid.counts()[2] != 1 {
        return Err(Error::invalid("demo", "amplitude demo needs a 2D grid"));
    }
    std::fs::create_dir_all(out_dir)?;

    let codebook = scenario.codebook()?;
    let h = forward::assemble_from_parts(&scenario.carrier, &scenario.grid, &scenario.ris, &codebook)?;
    let truth = scenario.source_field()?;
    let y = forward::synthesize_measurements(&h, &truth, &scenario.noise, scenario.seed)?;
    let amplitudes = forward::amplitude_measurements(&y);

    let truth_mags = truth.ground_truth_magnitudes();
    let truth_max = truth_mags.iter().cloned().fold(0.0, f64::max);
    let counts = scenario.grid.counts();
    let truth_image = ImageGrid::from_magnitudes(truth_mags.clone(), counts)?;
    let ssim_opts = SsimOptions {
        dynamic_range: Some(if truth_max > 0.0 { truth_max } else { 1.0 }),
        ..SsimOptions::fitted_to(counts)
    };

    let mut files = image_files("truth", &truth_mags, counts, Some(truth_max));
    let mut records = Vec::new();
    let t = scenario.snapshots;

    let mut evaluate = |name: String,
                        ris: Option<usize>,
                        result: ReconResult|
     -> Result<()> {
        let est_mags: Vec<f64> = result.estimate.iter().map(|z| z.norm()).collect();
        let report =
            metrics::metric_report(&result.estimate, truth.values(), &truth_image, &ssim_opts)?;
        let record = DemoRecord {
            ris,
            complex_error: report.phase_aligned_error,
            rmse: report.rmse,
            ssim: report.ssim,
            peak_cell: peak_index(&est_mags),
            converged: result.converged,
            iterations: result.iterations,
        };
        files.extend(image_files(&name, &est_mags, counts, Some(truth_max)));
        records.push(record);
        Ok(())
    };

    // per-RIS reconstructions from that panel's measurement block
    for k in 0..scenario.num_ris() {
        let solo_cb = Codebook::from_configs(vec![codebook.configs_for(k)?.to_vec()])?;
        let solo_h = forward::assemble_from_parts(
            &scenario.carrier,
            &scenario.grid,
            &scenario.ris[k..k + 1],
            &solo_cb,
        )?;
        let block = amplitudes.amplitudes()?.rows(k * t, t).into_owned();
        let solo_y = MeasurementSet::from_amplitudes(block, y.noise_variance(), scenario.seed);
        let result = recon::reweighted_wf(&solo_h, &solo_y, &scenario.wf_options)?;
        evaluate(format!("ris{k}_recon"), Some(k), result)?;
    }

    // joint reconstruction
    let joint = recon::reweighted_wf(&h, &amplitudes, &scenario.wf_options)?;
    evaluate("joint_recon".to_string(), None, joint)?;

    let mut csv = String::from("recon,complex_error,rmse,ssim,peak_cell,converged,iterations\n");
    for r in &records {
        let name = match r.ris {
            Some(k) => format!("ris{k}"),
            None => "joint".to_string(),
        };
        let _ = writeln!(
            csv,
            "{name},{:.12e},{:.12e},{:.12e},{},{},{}",
            r.complex_error, r.rmse, r.ssim, r.peak_cell, r.converged, r.iterations
        );
    }
    std::fs::write(out_dir.join("demo_metrics.csv"), csv)?;
    for (name, bytes) in files {
        std::fs::write(out_dir.join(name), bytes)?;
    }

    Ok(DemoSummary {
        records,
        truth_peak_cell: peak_index(&truth_mags),
        out_dir: out_dir.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// Analysis-only entry point
// ---------------------------------------------------------------------------

/// Rank/SVD/collinearity analysis without reconstruction; writes the
/// spectrum and collinearity CSVs and returns the rank report.
pub fn analyze_scenario(
    scenario: &Scenario,
    out_dir: &Path,
    collinearity_tolerance_rad: f64,
) -> Result<(RankReport, analysis::CollinearityReport)> {
    std::fs::create_dir_all(out_dir)?;
    let h = scenario.imaging_matrix()?;
    let report = analysis::numerical_rank(&h, &RankThresholdPolicy::default());
    let mut spectrum = Vec::new();
    analysis::write_singular_values_csv(&mut spectrum, &report.singular_values)?;
    std::fs::write(out_dir.join("spectrum.csv"), spectrum)?;

    let panels: Vec<_> = scenario.ris.iter().map(|p| p.panel.clone()).collect();
    let coll = analysis::collinearity_report(
        &scenario.grid,
        &panels,
        &scenario.carrier,
        collinearity_tolerance_rad,
    )?;
    let mut coll_csv = Vec::new();
    analysis::write_collinearity_csv(&mut coll_csv, &coll)?;
    std::fs::write(out_dir.join("collinearity.csv"), coll_csv)?;
    Ok((report, coll))
}
