//! `risim` — scenario runner for the RIS regional imaging toolkit.
//!
//! Exit codes: 0 success, 1 scenario validation/parse failure, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risim_core::forward::NoiseSpec;
use risim_core::scenario::{self, Scenario, SolverChoice};
use risim_core::sweep;

#[derive(Parser)]
#[command(
    name = "risim",
    about = "Multi-RIS regional imaging: simulate, analyze, reconstruct",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario preset (fig3-H, fig7-I, fig7-II, fig7-III,
    /// chamber, office).
    #[arg(long)]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the noise level (SNR in dB relative to mean |Hs|^2).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Override the solver: ls, amplitude, or both.
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario, printing far-field advisories.
    Validate {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Run one scenario end to end and emit metrics, images, spectra.
    Run {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for sweep points (0 = rayon default).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also emit lossless PNG copies of every image.
        #[arg(long)]
        png: bool,
    },
    /// Run a sweep preset (fig3, fig5, fig7) or sweep a scenario file's
    /// snapshot counts.
    Sweep {
        /// Sweep preset name: fig3 (T sweep), fig5 (N sweep), fig7
        /// (deployment comparison).
        #[arg(long)]
        preset: Option<String>,
        /// Base scenario file; combined with --snapshots list.
        #[arg(long, conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        /// Snapshot counts for a scenario-file sweep, e.g. 100,200,300.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<usize>,
        /// Override the master seed(s), comma separated.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Override the noise level for every point (SNR in dB).
        #[arg(long)]
        snr_db: Option<f64>,
        /// Override the solver for every point: ls, amplitude, or both.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also emit lossless PNG copies of every image.
        #[arg(long)]
        png: bool,
    },
    /// Amplitude-only comparison: each RIS alone versus all jointly.
    DemoAmplitude {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also emit lossless PNG copies of every image.
        #[arg(long)]
        png: bool,
    },
    /// Rank/SVD and collinearity analysis only.
    Analyze {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Collinearity tolerance in degrees.
        #[arg(long, default_value_t = 0.5)]
        collinearity_deg: f64,
    },
}

fn resolve_scene(args: &SceneArgs) -> anyhow::Result<(Scenario, Vec<String>)> {
    let (mut s, warnings) = match (&args.scenario, &args.preset) {
        (Some(path), None) => scenario::load_scenario(path)?,
        (None, Some(name)) => {
            let s = scenario::preset(name)?;
            let w = s.validate()?;
            (s, w)
        }
        (None, None) => anyhow::bail!("provide --scenario PATH or --preset NAME"),
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    };
    if let Some(seed) = args.seed {
        s = s.with_seed(seed);
    }
    if let Some(snr) = args.snr_db {
        s.noise = NoiseSpec::SnrDb(snr);
    }
    if let Some(kind) = &args.solver {
        s.solver = match kind.as_str() {
            "ls" => SolverChoice::Ls,
            "amplitude" => SolverChoice::Amplitude,
            "both" => SolverChoice::Both,
            other => anyhow::bail!("unknown solver `{other}` (ls, amplitude, both)"),
        };
    }
    Ok((s, warnings))
}

fn install_pool(threads: usize) -> anyhow::Result<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    Ok(())
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Convert every text PGM in `dir` into a sibling grayscale PNG.
fn convert_pgms_to_png(dir: &std::path::Path) -> anyhow::Result<usize> {
    let mut converted = 0;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("P2") {
            continue;
        }
        let width: u32 = tokens.next().context_parse("width")?;
        let height: u32 = tokens.next().context_parse("height")?;
        let maxval: f64 = tokens.next().context_parse("maxval")?;
        let mut img = image::GrayImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let v: f64 = tokens.next().context_parse("pixel")?;
                let level = ((v / maxval) * 255.0).round().clamp(0.0, 255.0) as u8;
                img.put_pixel(x, y, image::Luma([level]));
            }
        }
        img.save(path.with_extension("png"))?;
        converted += 1;
    }
    Ok(converted)
}

trait ContextParse {
    fn context_parse<T: std::str::FromStr>(self, what: &str) -> anyhow::Result<T>;
}

impl ContextParse for Option<&str> {
    fn context_parse<T: std::str::FromStr>(self, what: &str) -> anyhow::Result<T> {
        self.ok_or_else(|| anyhow::anyhow!("PGM truncated before {what}"))?
            .parse::<T>()
            .map_err(|_| anyhow::anyhow!("PGM: bad {what}"))
    }
}

/// Error phase, for the exit code: scenario problems vs runtime problems.
enum Phase {
    Validation,
    Runtime,
}

fn run() -> Result<(), (Phase, anyhow::Error)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scene } => {
            let (s, warnings) = resolve_scene(&scene).map_err(|e| (Phase::Validation, e))?;
            print_warnings(&warnings);
            println!(
                "ok: scenario `{}` with K={} panels, T={} snapshots, M={} cells, seed {}",
                s.name,
                s.num_ris(),
                s.snapshots,
                s.grid.num_cells(),
                s.seed
            );
            Ok(())
        }
        Command::Run { scene, out, threads, png } => {
            let (s, warnings) = resolve_scene(&scene).map_err(|e| (Phase::Validation, e))?;
            print_warnings(&warnings);
            install_pool(threads).map_err(|e| (Phase::Runtime, e))?;
            let summary = sweep::run_single(&s, &out)
                .map_err(|e| (Phase::Runtime, anyhow::Error::new(e)))?;
            for row in &summary.rows {
                println!(
                    "{} solver={} rank={}/{} rmse={} ssim={} status={}",
                    row.label,
                    row.solver,
                    row.rank,
                    row.rank_bound,
                    row.rmse.map(|v| format!("{v:.4e}")).unwrap_or_default(),
                    row.ssim.map(|v| format!("{v:.4}")).unwrap_or_default(),
                    row.status
                );
            }
            if png {
                let n = convert_pgms_to_png(&out).map_err(|e| (Phase::Runtime, e))?;
                println!("converted {n} images to PNG");
            }
            println!("wrote {}", summary.metrics_csv.display());
            Ok(())
        }
        Command::Sweep {
            preset,
            scenario: scenario_path,
            snapshots,
            seed,
            snr_db,
            solver,
            out,
            threads,
            png,
        } => {
            install_pool(threads).map_err(|e| (Phase::Runtime, e))?;
            let mut plan = match (&preset, &scenario_path) {
                (Some(name), None) => {
                    sweep::sweep_preset(name).map_err(|e| (Phase::Validation, e.into()))?
                }
                (None, Some(path)) => {
                    let (base, warnings) =
                        scenario::load_scenario(path).map_err(|e| (Phase::Validation, e.into()))?;
                    print_warnings(&warnings);
                    if snapshots.is_empty() {
                        return Err((
                            Phase::Validation,
                            anyhow::anyhow!("--snapshots list required with --scenario"),
                        ));
                    }
                    sweep::ExperimentPlan {
                        seeds: vec![base.seed],
                        base,
                        axis: sweep::SweepAxis::Snapshots(snapshots.clone()),
                    }
                }
                _ => {
                    return Err((
                        Phase::Validation,
                        anyhow::anyhow!("provide --preset NAME or --scenario PATH"),
                    ))
                }
            };
            if !seed.is_empty() {
                plan.seeds = seed.clone();
            }
            if let Some(snr) = snr_db {
                plan.base.noise = NoiseSpec::SnrDb(snr);
                if let sweep::SweepAxis::Scenarios(ss) = &mut plan.axis {
                    for s in ss.iter_mut() {
                        s.noise = NoiseSpec::SnrDb(snr);
                    }
                }
            }
            if let Some(kind) = &solver {
                let choice = match kind.as_str() {
                    "ls" => SolverChoice::Ls,
                    "amplitude" => SolverChoice::Amplitude,
                    "both" => SolverChoice::Both,
                    other => {
                        return Err((
                            Phase::Validation,
                            anyhow::anyhow!("unknown solver `{other}` (ls, amplitude, both)"),
                        ))
                    }
                };
                plan.base.solver = choice;
                if let sweep::SweepAxis::Scenarios(ss) = &mut plan.axis {
                    for s in ss.iter_mut() {
                        s.solver = choice;
                    }
                }
            }
            let summary = sweep::run_sweep(&plan, &out)
                .map_err(|e| (Phase::Runtime, anyhow::Error::new(e)))?;
            let failed = summary.rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} rows written to {} ({} failed points)",
                summary.rows.len(),
                summary.metrics_csv.display(),
                failed
            );
            if png {
                let n = convert_pgms_to_png(&out).map_err(|e| (Phase::Runtime, e))?;
                println!("converted {n} images to PNG");
            }
            if failed > 0 {
                return Err((
                    Phase::Runtime,
                    anyhow::anyhow!("{failed} sweep points failed; see metrics.csv"),
                ));
            }
            Ok(())
        }
        Command::DemoAmplitude { scene, out, png } => {
            let (s, warnings) = resolve_scene(&scene).map_err(|e| (Phase::Validation, e))?;
            print_warnings(&warnings);
            let summary = sweep::run_amplitude_demo(&s, &out)
                .map_err(|e| (Phase::Runtime, anyhow::Error::new(e)))?;
            for r in &summary.records {
                let name = r
                    .ris
                    .map(|k| format!("ris{k}"))
                    .unwrap_or_else(|| "joint".to_string());
                println!(
                    "{name}: complex_error={:.4e} rmse={:.4e} ssim={:.4} iterations={}",
                    r.complex_error, r.rmse, r.ssim, r.iterations
                );
            }
            if png {
                let n = convert_pgms_to_png(&out).map_err(|e| (Phase::Runtime, e))?;
                println!("converted {n} images to PNG");
            }
            println!("images written to {}", summary.out_dir.display());
            Ok(())
        }
        Command::Analyze { scene, out, collinearity_deg } => {
            let (s, warnings) = resolve_scene(&scene).map_err(|e| (Phase::Validation, e))?;
            print_warnings(&warnings);
            let (rank, coll) =
                sweep::analyze_scenario(&s, &out, collinearity_deg.to_radians())
                    .map_err(|e| (Phase::Runtime, anyhow::Error::new(e)))?;
            println!(
                "rank {} of bound {} (threshold {:.3e}); sigma_max {:.6e}",
                rank.rank,
                rank.rank_bound,
                rank.threshold,
                rank.singular_values.first().copied().unwrap_or(0.0)
            );
            println!(
                "collinearity: {} flagged pairs, max coherence {:.4}",
                coll.total_flagged(),
                coll.max_coherence
            );
            println!("reports written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((Phase::Validation, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err((Phase::Runtime, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
