//! Cross-module checks: independent oracles against the library's linear
//! algebra, forward/solver consistency, and file round trips.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Point3};
use num_complex::Complex64;

use risim_core::analysis;
use risim_core::codebook::Codebook;
use risim_core::forward::{self, NoiseSpec};
use risim_core::geometry::{CarrierConfig, GridSpec, PanelSpec, RisPlacement};
use risim_core::recon::{self, LSOptions, LsSolverKind};
use risim_core::scenario::{preset, PhasePolicy, SourceSpec};

fn letter_scene_down(rows: usize, t: usize, grid: [usize; 3]) -> risim_core::scenario::Scenario {
    let mut s = preset("fig3-H").unwrap();
    s.grid = GridSpec::new(Point3::origin(), grid, [2.0, 2.0, 2.0]).unwrap();
    s.with_panel_elements(rows, rows).unwrap().with_snapshots(t)
}

#[test]
fn singular_values_match_hermitian_eigen_oracle() {
    let a = common::random_complex_matrix(10, 8, 3);
    let sv = analysis::singular_values_of(&a);
    let gram = a.adjoint() * &a;
    let eig = common::jacobi_hermitian_eigenvalues(&gram);
    assert_eq!(sv.len(), 8);
    for (s, lambda) in sv.iter().zip(eig) {
        let expected = lambda.max(0.0).sqrt();
        assert!(
            (s - expected).abs() <= 1e-9 * sv[0].max(1.0),
            "sigma {s} vs sqrt(eigenvalue) {expected}"
        );
    }
}

#[test]
fn imaging_matrix_spectrum_matches_oracle() {
    let s = letter_scene_down(4, 25, [4, 4, 1]);
    let h = s.imaging_matrix().unwrap();
    let sv = analysis::singular_values(&h);
    let gram = h.stacked().adjoint() * h.stacked();
    let eig = common::jacobi_hermitian_eigenvalues(&gram);
    for (s, lambda) in sv.iter().zip(eig) {
        assert!((s - lambda.max(0.0).sqrt()).abs() <= 1e-9 * sv[0]);
    }
}

#[test]
fn spectral_init_eigenvalue_is_the_oracle_maximum() {
    let a = common::random_complex_matrix(256, 4, 5);
    let x = common::random_complex_vector(4, 6);
    let intensities: Vec<f64> = (&a * &x).iter().map(|v| v.norm_sqr()).collect();
    let z0 = recon::spectral_initialize(&a, &intensities, None).unwrap();

    // explicitly form Y and compare its top eigenvalue/eigenvector
    let mut scaled = a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        let w = Complex64::new(intensities[i] / a.nrows() as f64, 0.0);
        for e in row.iter_mut() {
            *e *= w;
        }
    }
    let y = a.adjoint() * scaled;
    let eig = common::jacobi_hermitian_eigenvalues(&y);
    let v = &z0 / Complex64::new(z0.norm(), 0.0);
    let lambda = (v.adjoint() * &y * &v)[(0, 0)].re;
    assert!(
        (lambda - eig[0]).abs() <= 1e-9 * eig[0],
        "power iteration eigenvalue {lambda} vs oracle max {}",
        eig[0]
    );
    // alignment with the planted direction at m = 64 n
    let cos = (z0.adjoint() * &x)[(0, 0)].norm() / (z0.norm() * x.norm());
    assert!(cos > 0.9, "alignment {cos}");
}

#[test]
fn min_norm_oracle_recovers_known_solution() {
    // consistent rank-1 row: minimum-norm solution of x1 + x2 = 1 is
    // (0.5, 0.5, 0, 0)
    let h = DMatrix::<Complex64>::from_row_slice(
        1,
        4,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    );
    let y = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
    let z = common::min_norm_solution_oracle(&h, &y);
    assert_relative_eq!(z[0].re, 0.5, epsilon = 1e-12);
    assert_relative_eq!(z[1].re, 0.5, epsilon = 1e-12);
    assert!(z[2].norm() < 1e-12 && z[3].norm() < 1e-12);
}

#[test]
fn rank_deficient_scene_ls_matches_min_norm_oracle() {
    // spatially undersampled scene: N = 3x3 = 9 < M = 16
    let s = {
        let mut s = letter_scene_down(3, 20, [4, 4, 1]);
        s.noise = NoiseSpec::Noiseless;
        s.source = SourceSpec::Letter("T".to_string());
        s.phases = PhasePolicy::RandomUniform;
        s
    };
    let h = s.imaging_matrix().unwrap();
    let y = s.measurements(&h).unwrap();
    let yv = y.complex_values().unwrap();
    let rec = recon::ls_reconstruct(&h, &y, &LSOptions::default()).unwrap();
    assert!(rec.rank_deficient, "9-element panel cannot resolve 16 cells");

    // ridge route to the minimum-norm least-squares solution, built on a
    // hand-rolled Gauss-Jordan inverse: residuals must agree.
    let gram_scale = h.stacked().norm_squared() / h.num_rows() as f64;
    let z_oracle = common::ridge_min_norm_oracle(h.stacked(), yv, 1e-10 * gram_scale);
    let res_oracle = (h.stacked() * &z_oracle - yv).norm();
    let res_solver = (h.stacked() * &rec.estimate - yv).norm();
    let scale = yv.norm();
    assert!(
        res_solver <= res_oracle + 1e-8 * scale,
        "solver residual {res_solver} vs oracle {res_oracle}"
    );
    // LS certificate: gradient of the objective vanishes at the solution
    let grad = h.stacked().adjoint() * (h.stacked() * &rec.estimate - yv);
    assert!(grad.norm() <= 1e-8 * (h.stacked().adjoint() * yv).norm());
}

#[test]
fn iterative_solver_agrees_with_direct_on_the_scene() {
    let mut s = letter_scene_down(5, 40, [4, 4, 1]);
    s.noise = NoiseSpec::SnrDb(40.0);
    let h = s.imaging_matrix().unwrap();
    let y = s.measurements(&h).unwrap();
    let opts_direct = LSOptions { regularization: 1e-6, solver: LsSolverKind::Direct };
    let opts_iter = LSOptions { regularization: 1e-6, solver: LsSolverKind::Iterative };
    let zd = recon::ls_reconstruct(&h, &y, &opts_direct).unwrap().estimate;
    let zi = recon::ls_reconstruct(&h, &y, &opts_iter).unwrap().estimate;
    assert!((zd.clone() - &zi).norm() / zd.norm() < 1e-7);
}

#[test]
fn factorization_and_channel_row_agree_across_panel_shapes() {
    let c = CarrierConfig::new(5.8e9).unwrap();
    let grid = GridSpec::new(Point3::origin(), [3, 3, 1], [2.0, 2.0, 2.0]).unwrap();
    let pitch = c.wavelength_m() / 2.0;
    for (rows, cols) in [(1usize, 4usize), (4, 1), (3, 3), (2, 5)] {
        let panel =
            PanelSpec::facing(Point3::new(5.0, -3.0, 40.0), Point3::origin(), rows, cols, pitch)
                .unwrap();
        let placement =
            vec![RisPlacement { panel, receiver: Point3::new(4.0, -2.0, 30.0) }];
        let cb = Codebook::random_one_bit(rows * cols, 7, 99).unwrap();
        let h = forward::assemble_from_parts(&c, &grid, &placement, &cb).unwrap();
        assert!(h.factorization_residual(0).unwrap() < 1e-10, "{rows}x{cols}");
    }
}

#[test]
fn measurement_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = letter_scene_down(4, 12, [4, 4, 1]);
    let h = s.imaging_matrix().unwrap();
    let y = s.measurements(&h).unwrap();

    let matrix_path = dir.path().join("h.bin");
    let mut f = std::fs::File::create(&matrix_path).unwrap();
    forward::write_complex_matrix(&mut f, h.stacked()).unwrap();
    drop(f);
    let mut f = std::fs::File::open(&matrix_path).unwrap();
    let back = forward::read_complex_matrix(&mut f).unwrap();
    assert_eq!(back, *h.stacked());

    let meas_path = dir.path().join("y.bin");
    let mut f = std::fs::File::create(&meas_path).unwrap();
    forward::write_measurements(&mut f, &y).unwrap();
    drop(f);
    let mut f = std::fs::File::open(&meas_path).unwrap();
    assert_eq!(forward::read_measurements(&mut f).unwrap(), y);
}

#[test]
fn recon_result_csv_exports_are_parsable() {
    let a = common::random_complex_matrix(24, 6, 8);
    let x = common::random_complex_vector(6, 9);
    let b: Vec<f64> = (&a * &x).iter().map(|v| v.norm()).collect();
    let res = recon::reweighted_wf_rows(
        &a,
        &b,
        &risim_core::recon::WFOptions { max_outer: 30, ..Default::default() },
    )
    .unwrap();
    let mut est_csv = Vec::new();
    res.write_estimate_csv(&mut est_csv).unwrap();
    let text = String::from_utf8(est_csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    let first = text.lines().nth(1).unwrap();
    let parts: Vec<&str> = first.split(',').collect();
    let re: f64 = parts[0].parse().unwrap();
    let im: f64 = parts[1].parse().unwrap();
    assert_relative_eq!(re, res.estimate[0].re);
    assert_relative_eq!(im, res.estimate[0].im);

    let mut hist_csv = Vec::new();
    res.write_history_csv(&mut hist_csv).unwrap();
    let text = String::from_utf8(hist_csv).unwrap();
    assert_eq!(text.lines().count(), res.objective_history.len() + 1);
}

#[test]
fn noiseless_forward_equals_factor_route() {
    // y through the stacked matrix equals block-wise W (P s) products
    let s = letter_scene_down(4, 9, [3, 3, 1]);
    let h = s.imaging_matrix().unwrap();
    let field = s.source_field().unwrap();
    let y = forward::synthesize_measurements(&h, &field, &NoiseSpec::Noiseless, 0).unwrap();
    let f = h.factors(0).unwrap();
    let via_factors = &f.w * (&f.p * field.values());
    let direct = y.complex_values().unwrap();
    for i in 0..direct.len() {
        assert!(
            (direct[i] - via_factors[i]).norm() <= 1e-12 * direct[i].norm().max(1e-30),
            "row {i}"
        );
    }
}

#[test]
fn oracle_self_checks() {
    // the Jacobi oracle reproduces a known spectrum
    let d = DMatrix::<Complex64>::from_diagonal(&DVector::from_vec(vec![
        Complex64::new(3.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(-2.0, 0.0),
    ]));
    let q = {
        // unitary from a fixed rotation pair
        let mut m = DMatrix::<Complex64>::identity(3, 3);
        let (s, c) = 0.7f64.sin_cos();
        m[(0, 0)] = Complex64::new(c, 0.0);
        m[(0, 1)] = Complex64::new(0.0, s);
        m[(1, 0)] = Complex64::new(0.0, s);
        m[(1, 1)] = Complex64::new(c, 0.0);
        m
    };
    let a = &q * d * q.adjoint();
    let eig = common::jacobi_hermitian_eigenvalues(&a);
    assert_relative_eq!(eig[0], 3.0, epsilon = 1e-10);
    assert_relative_eq!(eig[1], 1.0, epsilon = 1e-10);
    assert_relative_eq!(eig[2], -2.0, epsilon = 1e-10);
}
