//! Acceptance suite: one test per claim the toolkit must deliver, each
//! printing a PASS line with the measured values. Tolerances and budgets
//! are fixed here, not configurable.

mod common;

use std::time::Instant;

use nalgebra::{DVector, Point3};
use num_complex::Complex64;
use rand::Rng;

use risim_core::analysis::{self, RankThresholdPolicy};
use risim_core::codebook::Codebook;
use risim_core::forward::NoiseSpec;
use risim_core::geometry::{GridSpec, PanelSpec, RisPlacement};
use risim_core::metrics::{self, ImageGrid, SsimOptions};
use risim_core::recon::{self, LSOptions, WFOptions};
use risim_core::scenario::{preset, Scenario};
use risim_core::sweep::{self, SweepSummary};

/// Randomized single/multi-panel scenes over the parameter ranges used by
/// the rank-bound and factorization checks: K in {1,2,4}, N in 9..=400,
/// T in 10..=500, M in 16..=400.
fn random_scene(index: u64) -> Scenario {
    let mut rng = risim_core::rng::substream(0xACCE97, risim_core::rng::StreamDomain::Sweep, index);
    let k = [1usize, 2, 4][rng.random_range(0..3)];
    let rows = rng.random_range(3..=20usize); // N = rows^2 in 9..=400
    let mut t = rng.random_range(10..=500usize);
    while k * t > 1200 {
        t = rng.random_range(10..=500usize);
    }
    let ga = rng.random_range(4..=20usize);
    let gb = rng.random_range(4..=20usize); // M = ga*gb in 16..=400

    let mut s = preset("fig3-H").unwrap();
    s.name = format!("random-{index}");
    s.grid = GridSpec::new(Point3::origin(), [ga, gb, 1], [2.0, 2.0, 2.0]).unwrap();
    let pitch = s.carrier.wavelength_m() / 2.0;
    s.ris = (0..k)
        .map(|i| {
            let angle = 0.9 * i as f64 + rng.random_range(0.0..0.5);
            let center = Point3::new(45.0 * angle.sin(), 45.0 * angle.cos(), 35.0);
            let receiver = Point3::new(36.0 * angle.sin(), 36.0 * angle.cos(), 28.0);
            RisPlacement {
                panel: PanelSpec::facing(center, Point3::origin(), rows, rows, pitch).unwrap(),
                receiver,
            }
        })
        .collect();
    s.snapshots = t;
    s.seed = 0x5EED_0000 + index;
    s
}

#[test]
fn c01_rank_bound_on_randomized_scenes() {
    let start = Instant::now();
    let scenes = 20;
    for i in 0..scenes {
        let s = random_scene(i);
        let h = s.imaging_matrix().unwrap();
        let report = analysis::numerical_rank(&h, &RankThresholdPolicy::default());
        assert!(
            report.rank <= report.rank_bound,
            "scene {i} (K={} T={} N={:?} M={}): rank {} exceeds bound {}",
            s.num_ris(),
            s.snapshots,
            h.elements_per_panel(),
            h.num_cells(),
            report.rank,
            report.rank_bound
        );
        assert!(report.bound_satisfied);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!("acceptance c01 PASS: rank <= min(M, K*T, K*N) on {scenes} randomized scenes in {elapsed:?}");
}

#[test]
fn c02_one_bit_codebooks_have_full_rank() {
    let start = Instant::now();
    let trials = 100;
    for seed in 0..trials {
        let cb = Codebook::random_one_bit(225, 300, seed).unwrap();
        let w = cb.snapshot_matrix_real(0).unwrap().unwrap();
        let rank = analysis::numerical_rank_real(&w, &RankThresholdPolicy::default());
        assert_eq!(rank, 225, "codebook seed {seed} lost rank: {rank}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!("acceptance c02 PASS: {trials} random 300x225 sign matrices all have rank 225 in {elapsed:?}");
}

#[test]
fn c03_rank_saturation_under_spatial_undersampling() {
    let base = preset("fig3-H").unwrap();
    let small = base.with_panel_elements(15, 15).unwrap();
    let mut saturated = Vec::new();
    for t in [100usize, 200, 300, 400, 500] {
        let h = small.with_snapshots(t).imaging_matrix().unwrap();
        let report = analysis::numerical_rank(&h, &RankThresholdPolicy::default());
        assert!(
            report.rank <= 225,
            "T={t}: rank {} exceeds the 225-element cap",
            report.rank
        );
        saturated.push(report.rank);
    }
    let big = base.with_snapshots(300).imaging_matrix().unwrap();
    let report = analysis::numerical_rank(&big, &RankThresholdPolicy::default());
    assert_eq!(report.rank, 256, "40x40 panel at T=300 must reach full rank 256");
    println!(
        "acceptance c03 PASS: 15x15 ranks {saturated:?} all <= 225; 40x40 at T=300 reaches rank 256"
    );
}

#[test]
fn c04_noiseless_ls_round_trip() {
    let start = Instant::now();
    let mut s = preset("fig3-H").unwrap();
    s.noise = NoiseSpec::Noiseless;
    let h = s.imaging_matrix().unwrap();
    let truth = s.source_field().unwrap();
    let y = s.measurements(&h).unwrap();
    let rec = recon::ls_reconstruct(&h, &y, &LSOptions::default()).unwrap();
    let err = (rec.estimate.clone() - truth.values()).norm() / truth.values().norm();
    let elapsed = start.elapsed();
    assert!(err < 1e-6, "relative error {err}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!("acceptance c04 PASS: noiseless LS round trip error {err:.3e} in {elapsed:?}");
}

#[test]
fn c05_snapshot_factorization_identity() {
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut scenes: Vec<Scenario> = (0..8).map(random_scene).collect();
    scenes.push(preset("fig3-H").unwrap());
    scenes.push(preset("chamber").unwrap());
    scenes.push(preset("fig7-II").unwrap());
    for s in &scenes {
        let h = s.imaging_matrix().unwrap();
        for k in 0..h.num_ris() {
            let residual = h.factorization_residual(k).unwrap();
            assert!(
                residual < 1e-10,
                "scene `{}` panel {k}: factorization residual {residual}",
                s.name
            );
            worst = worst.max(residual);
            checked += 1;
        }
    }
    println!(
        "acceptance c05 PASS: {checked} panel blocks factor through W*P, worst residual {worst:.3e}"
    );
}

#[test]
fn c06_gradient_matches_finite_differences() {
    let mut rng = risim_core::rng::substream(0xD1FF, risim_core::rng::StreamDomain::Sweep, 0);
    let mut worst = 0.0f64;
    for instance in 0..20 {
        let n = rng.random_range(2..=16usize);
        let m = rng.random_range(n..=128usize);
        let a = common::random_complex_matrix(m, n, 100 + instance);
        let z = common::random_complex_vector(n, 200 + instance);
        let intensities: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
        let g = recon::wf_gradient(&a, &z, &intensities, &weights).unwrap();

        let f = |zz: &DVector<Complex64>| -> f64 {
            let u = &a * zz;
            let mut acc = 0.0;
            for ((ui, &yi), &wi) in u.iter().zip(&intensities).zip(&weights) {
                let r = ui.norm_sqr() - yi;
                acc += wi * r * r;
            }
            acc / (2.0 * m as f64)
        };
        let step = 1e-6;
        let scale = g.norm().max(1e-9);
        for j in 0..n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += Complex64::new(step, 0.0);
            zm[j] -= Complex64::new(step, 0.0);
            let dre = (f(&zp) - f(&zm)) / (2.0 * step);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += Complex64::new(0.0, step);
            zm[j] -= Complex64::new(0.0, step);
            let dim = (f(&zp) - f(&zm)) / (2.0 * step);
            let fd = Complex64::new(dre, dim);
            let rel = (g[j] - fd).norm() / fd.norm().max(1e-7 * scale);
            assert!(
                rel < 1e-5,
                "instance {instance} coordinate {j}: relative error {rel}"
            );
            worst = worst.max(rel);
        }
    }
    println!("acceptance c06 PASS: Wirtinger gradient matches central differences on 20 instances, worst {worst:.3e}");
}

#[test]
fn c07_amplitude_only_recovery() {
    let start = Instant::now();
    // fixed instance: 64 unknowns, 512 one-bit codebook rows, dense +-1
    // ground truth from an independent substream
    let n = 64;
    let m = 512;
    let cb = Codebook::random_one_bit(n, m, 76).unwrap();
    let rows = cb.as_snapshot_matrix(0).unwrap();
    let mut rng = risim_core::rng::substream(2, risim_core::rng::StreamDomain::Sweep, 7);
    let x = DVector::from_fn(n, |_, _| {
        Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0)
    });
    let b: Vec<f64> = (&rows * &x).iter().map(|v| v.norm()).collect();
    let intensities: Vec<f64> = b.iter().map(|v| v * v).collect();

    let z0 = recon::spectral_initialize(&rows, &intensities, None).unwrap();
    let cos = (z0.adjoint() * &x)[(0, 0)].norm() / (z0.norm() * x.norm());
    assert!(cos > 0.9, "spectral initializer alignment {cos}");

    let res = recon::reweighted_wf_rows(&rows, &b, &WFOptions::default()).unwrap();
    assert!(res.iterations <= 2000);
    let (aligned, _) = recon::align_phase(&res.estimate, &x).unwrap();
    let err = (aligned - &x).norm() / x.norm();
    let elapsed = start.elapsed();
    assert!(err < 1e-3, "phase-aligned relative error {err}");
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!(
        "acceptance c07 PASS: init alignment {cos:.4}, recovery error {err:.3e} after {} iterations in {elapsed:?}",
        res.iterations
    );
}

fn solver_row<'a>(summary: &'a SweepSummary, axis: &str) -> &'a sweep::MetricsRow {
    summary
        .rows
        .iter()
        .find(|r| r.axis_value == axis && r.solver == "ls")
        .unwrap_or_else(|| panic!("missing ls row for axis {axis}"))
}

#[test]
fn c08_snapshot_count_trend() {
    let dir = tempfile::tempdir().unwrap();
    let plan = sweep::sweep_preset("fig3").unwrap();
    let summary = sweep::run_sweep(&plan, dir.path()).unwrap();
    assert_eq!(summary.rows.len(), 5, "one row per snapshot count");
    for row in &summary.rows {
        assert_eq!(row.status, "ok", "{}: {}", row.label, row.status);
    }
    let low = solver_row(&summary, "100");
    let high = solver_row(&summary, "500");
    assert!(
        high.ssim.unwrap() > low.ssim.unwrap(),
        "SSIM must improve with snapshots: {} vs {}",
        low.ssim.unwrap(),
        high.ssim.unwrap()
    );
    assert!(
        high.rmse.unwrap() < low.rmse.unwrap(),
        "RMSE must drop with snapshots: {} vs {}",
        low.rmse.unwrap(),
        high.rmse.unwrap()
    );
    println!(
        "acceptance c08 PASS: T=100 -> 500 moves SSIM {:.3} -> {:.3}, RMSE {:.3e} -> {:.3e}",
        low.ssim.unwrap(),
        high.ssim.unwrap(),
        low.rmse.unwrap(),
        high.rmse.unwrap()
    );
}

#[test]
fn c09_element_count_trend() {
    let dir = tempfile::tempdir().unwrap();
    let plan = sweep::sweep_preset("fig5").unwrap();
    let summary = sweep::run_sweep(&plan, dir.path()).unwrap();
    let axis = ["36", "144", "324", "576", "900", "1296"];
    let mut ranks = Vec::new();
    let mut ssims = Vec::new();
    for a in axis {
        let row = solver_row(&summary, a);
        assert_eq!(row.status, "ok");
        ranks.push(row.rank);
        ssims.push(row.ssim.unwrap());
    }
    for w in ranks.windows(2) {
        assert!(w[1] >= w[0], "rank decreased across the element sweep: {ranks:?}");
    }
    for w in ssims.windows(2) {
        assert!(w[1] >= w[0], "SSIM decreased across the element sweep: {ssims:?}");
    }
    println!("acceptance c09 PASS: ranks {ranks:?} and SSIM {ssims:.3?} nondecreasing in N");
}

#[test]
fn c10_deployment_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let plan = sweep::sweep_preset("fig7").unwrap();
    let summary = sweep::run_sweep(&plan, dir.path()).unwrap();
    let clustered = solver_row(&summary, "fig7-I");
    let vertical = solver_row(&summary, "fig7-II");
    let mixed = solver_row(&summary, "fig7-III");
    assert!(
        vertical.ssim.unwrap() >= clustered.ssim.unwrap()
            && vertical.ssim.unwrap() >= mixed.ssim.unwrap(),
        "vertically centered deployment must lead: I={:.3} II={:.3} III={:.3}",
        clustered.ssim.unwrap(),
        vertical.ssim.unwrap(),
        mixed.ssim.unwrap()
    );

    let tol = 0.5f64.to_radians();
    let count = |name: &str| -> usize {
        let s = preset(name).unwrap();
        let panels: Vec<_> = s.ris.iter().map(|p| p.panel.clone()).collect();
        analysis::collinearity_report(&s.grid, &panels, &s.carrier, tol)
            .unwrap()
            .total_flagged()
    };
    let flagged_clustered = count("fig7-I");
    let flagged_vertical = count("fig7-II");
    assert!(
        flagged_vertical <= flagged_clustered,
        "collinearity: vertical {flagged_vertical} vs clustered {flagged_clustered}"
    );
    println!(
        "acceptance c10 PASS: SSIM I={:.3} II={:.3} III={:.3}; flagged pairs vertical {} <= clustered {}",
        clustered.ssim.unwrap(),
        vertical.ssim.unwrap(),
        mixed.ssim.unwrap(),
        flagged_vertical,
        flagged_clustered
    );
}

#[test]
fn c11_multi_panel_amplitude_benefit() {
    let base = preset("chamber").unwrap();
    let seeds = [1u64, 2, 3, 4, 5];
    let mut joint = 0.0;
    let mut singles = vec![0.0; base.num_ris()];
    for &seed in &seeds {
        let dir = tempfile::tempdir().unwrap();
        let summary = sweep::run_amplitude_demo(&base.with_seed(seed), dir.path()).unwrap();
        assert!(
            summary.joint_peak_matches_truth(),
            "seed {seed}: joint reconstruction must peak on the source cell"
        );
        joint += summary.joint_error();
        for (i, e) in summary.single_errors().iter().enumerate() {
            singles[i] += e;
        }
    }
    joint /= seeds.len() as f64;
    for s in singles.iter_mut() {
        *s /= seeds.len() as f64;
    }
    for (i, &s) in singles.iter().enumerate() {
        assert!(
            joint < s,
            "joint error {joint:.3} not below single-panel {i} ({s:.3})"
        );
    }
    println!(
        "acceptance c11 PASS: mean joint error {joint:.3} below single-panel errors {singles:.3?} over {} seeds",
        seeds.len()
    );
}

#[test]
fn c12_metric_sanity_and_byte_determinism() {
    // metric identities
    let mut rng = risim_core::rng::substream(0x3E7, risim_core::rng::StreamDomain::Sweep, 1);
    let values: Vec<f64> = (0..81).map(|_| rng.random_range(0.0..1.0)).collect();
    let a = ImageGrid::from_magnitudes(values.clone(), [9, 9, 1]).unwrap();
    let b = ImageGrid::from_magnitudes(
        (0..81).map(|_| rng.random_range(0.0..1.0)).collect(),
        [9, 9, 1],
    )
    .unwrap();
    assert_eq!(metrics::rmse(&a, &a).unwrap(), 0.0);
    let ssim_aa = metrics::ssim(&a, &a, &SsimOptions::default()).unwrap();
    assert!((ssim_aa - 1.0).abs() < 1e-12);
    let opts = SsimOptions { dynamic_range: Some(1.0), ..Default::default() };
    let s_ab = metrics::ssim(&a, &b, &opts).unwrap();
    let s_ba = metrics::ssim(&b, &a, &opts).unwrap();
    assert!((s_ab - s_ba).abs() < 1e-12, "ssim asymmetry {}", (s_ab - s_ba).abs());

    // end-to-end byte determinism of a full sweep
    let mut base = preset("fig3-H").unwrap();
    base.grid = GridSpec::new(Point3::origin(), [8, 8, 1], [2.0, 2.0, 2.0]).unwrap();
    base = base.with_panel_elements(8, 8).unwrap();
    let plan = sweep::ExperimentPlan {
        base,
        axis: sweep::SweepAxis::Snapshots(vec![40, 80]),
        seeds: vec![11, 12],
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    sweep::run_sweep(&plan, d1.path()).unwrap();
    sweep::run_sweep(&plan, d2.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timings.csv")
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "metrics.csv"));
    assert!(names.iter().any(|n| n.ends_with(".pgm")));
    for name in &names {
        let x = std::fs::read(d1.path().join(name)).unwrap();
        let y = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    println!(
        "acceptance c12 PASS: metric identities hold; {} output files byte-identical across reruns",
        names.len()
    );
}
