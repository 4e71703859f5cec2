//! End-to-end acceptance checks. Each test prints one PASS/FAIL line and
//! then asserts.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{report, rng};
use lrcnc::io::{load_image, trace_csv};
use lrcnc::params::ParamWarning;
use lrcnc::spectral::apply_operator;
use lrcnc::{
    add_gaussian_noise, build_denominator, derive_params, div_adjoint, grad, kmeans, make_mask,
    nuclear_norm, phi_prox, psnr, segment_image, shrink_coefficients, spectral_solve, ssim, svd,
    svt, Error, GradField, ImageGrid, KMeansOptions, NoiseSpec, PhiParams, Problem, PsnrMode,
    SolverConfig, Status,
};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn random_in(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

// Minimizes phi(s) + beta1/2 (s - rho)^2 over a uniform grid on [0, rho].
fn radial_grid_argmin(rho: f64, phi: &PhiParams, beta1: f64, points: usize) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=points {
        let s = rho * k as f64 / points as f64;
        let f = phi.eval(s) + 0.5 * beta1 * (s - rho).powi(2);
        if f < best.0 {
            best = (f, s);
        }
    }
    best.1
}

fn prox_grid_deviation() -> f64 {
    let mut g = rng(11);
    // The default profile plus one with a wide quadratic zone, so every
    // branch of the shrinkage is hit.
    let cases = [
        (PhiParams::new(0.1, 1e-6, 1.0).unwrap(), 5.0 / 9.0),
        (PhiParams::new(0.3, 0.2, 1.0).unwrap(), 0.8),
    ];
    let mut worst: f64 = 0.0;
    for n in 0..1000 {
        let (phi, beta1) = &cases[n % 2];
        let coeffs = shrink_coefficients(phi, *beta1).unwrap();
        let rho = random_in(&mut g, 1e-9, 2.0 * phi.t2());
        let angle = random_in(&mut g, 0.0, std::f64::consts::TAU);
        let r = [rho * angle.cos(), rho * angle.sin()];
        let m = phi_prox(r, &coeffs);
        let s = radial_grid_argmin(rho, phi, *beta1, 100_000);
        let oracle = [s * angle.cos(), s * angle.sin()];
        let dev = ((m[0] - oracle[0]).powi(2) + (m[1] - oracle[1]).powi(2)).sqrt();
        worst = worst.max(dev);
    }
    worst
}

fn spectral_worst_residual() -> f64 {
    let mut g = rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rows = g.random_range(1..=64);
        let cols = g.random_range(1..=64);
        let shift = random_in(&mut g, 0.1, 10.0);
        let beta1 = random_in(&mut g, 0.1, 10.0);
        let r = common::random_grid(&mut g, rows, cols);
        let denom = build_denominator(rows, cols, shift, beta1).unwrap();
        let u = spectral_solve(&r, &denom).unwrap();
        // Residual through the difference operators, not the FFT.
        let dtd = div_adjoint(&grad(&u));
        let applied = u.zip_map(&dtd, |a, b| shift * a + beta1 * b);
        worst = worst.max(applied.distance(&r) / r.frobenius_norm());
        let via_helper = apply_operator(&u, shift, beta1);
        worst = worst.max(via_helper.distance(&r) / r.frobenius_norm());
    }
    worst
}

fn to_dmatrix(a: &ImageGrid) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn svt_objective(z: &ImageGrid, a: &ImageGrid, tau: f64) -> f64 {
    tau * nuclear_norm(z).unwrap() + 0.5 * z.distance(a).powi(2)
}

fn svt_oracles() -> Result<String, String> {
    let diag = ImageGrid::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 0.2][i] } else { 0.0 });
    let s = svd(&diag).unwrap().singulars;
    if s.iter()
        .zip([3.0, 1.0, 0.2])
        .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(format!("diag singulars {s:?}"));
    }
    let thresholded = svt(&diag, 0.5).unwrap();
    let expected = ImageGrid::from_fn(3, 3, |i, j| if i == j { [2.5, 0.5, 0.0][i] } else { 0.0 });
    if thresholded.distance(&expected) > 1e-12 {
        return Err("diag thresholding".into());
    }

    let mut g = rng(13);
    let a = common::random_grid(&mut g, 20, 13);
    let m = to_dmatrix(&a);
    let mut eig: Vec<f64> = SymmetricEigen::new(m.transpose() * &m)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    let s = svd(&a).unwrap().singulars;
    let gram_err = s
        .iter()
        .zip(&eig)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if s.len() != 13 || gram_err > 1e-8 {
        return Err(format!("gram oracle error {gram_err:e}"));
    }

    let a = common::random_grid(&mut g, 8, 8);
    let tau = 0.3;
    let z = svt(&a, tau).unwrap();
    let base = svt_objective(&z, &a, tau);
    for _ in 0..200 {
        let delta = common::random_grid(&mut g, 8, 8);
        let radius = random_in(&mut g, 0.0, 0.05) / delta.frobenius_norm();
        let mut moved = z.clone();
        moved.axpy(radius, &delta);
        if svt_objective(&moved, &a, tau) < base - 1e-12 {
            return Err("perturbation lowered the SVT objective".into());
        }
    }
    Ok(format!("gram max error {gram_err:.1e}"))
}

#[test]
fn criterion_1_oracle_suites() {
    let start = Instant::now();
    let prox_dev = prox_grid_deviation();
    let residual = spectral_worst_residual();
    let svt_result = svt_oracles();
    let elapsed = start.elapsed();
    let pass = prox_dev <= 1e-4
        && residual <= 1e-10
        && svt_result.is_ok()
        && elapsed < Duration::from_secs(60);
    report(
        "criterion 1 oracle suites",
        pass,
        &format!(
            "prox dev {prox_dev:.2e}, spectral residual {residual:.2e}, svt {svt_result:?}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_parameter_derivation() {
    let p = derive_params(&SolverConfig::completion()).unwrap();
    // Direct arithmetic on the derivation rules.
    let a = 0.1;
    let lambda = 9.0 * a * 2.5;
    let beta1 = 2.5 * f64::max(a / 1.5, 2.0 * a * 2.5 / 2.25);
    let rho2: f64 = 3.001;
    let beta2 = 1.0001
        * f64::min(
            rho2 * (lambda - 8.0 * a) / (rho2 - 1.0),
            2.0 * rho2 * (lambda - 8.0 * a) / (rho2 - 1.0).powi(2),
        );
    let values_ok = (p.lambda - 2.25).abs() < 1e-6
        && (p.lambda - lambda).abs() < 1e-12
        && (p.beta1 - 0.55556).abs() < 1e-5
        && (p.beta1 - beta1).abs() < 1e-12
        && (p.beta2 - beta2).abs() < 1e-12
        && (p.mu - 1.35).abs() < 1e-6;
    let warned = p
        .warnings
        .iter()
        .any(|w| matches!(w, ParamWarning::Beta2AtOrAboveBound { .. }));

    let domain = |c: SolverConfig| matches!(derive_params(&c), Err(Error::ParameterDomain(_)));
    let tau1_edge = domain(SolverConfig {
        tau1: 1.0,
        ..SolverConfig::completion()
    });
    let rho2_edge = domain(SolverConfig {
        rho2: 3.0,
        ..SolverConfig::completion()
    });
    // Large rho1 drives beta1 down to a/(rho1-1)*tau2 <= a.
    let beta1_edge = domain(SolverConfig {
        rho1: 50.0,
        tau2: 1.0,
        ..SolverConfig::completion()
    });
    let pass = values_ok && warned && tau1_edge && rho2_edge && beta1_edge;
    report(
        "criterion 2 parameter derivation",
        pass,
        &format!(
            "lambda {:.6}, beta1 {:.6}, beta2 {:.7}, mu {:.6}; rejects tau1=1 {tau1_edge}, rho2=3 {rho2_edge}, beta1<=a {beta1_edge}",
            p.lambda, p.beta1, p.beta2, p.mu
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_desk_scale_completion() {
    let start = Instant::now();
    let truth = common::lowrank_with_shapes(64);
    let mask = make_mask(64, 64, 0.3, 2024).unwrap();
    let observed = lrcnc::apply_mask(&truth, &mask).unwrap();
    let params = derive_params(&SolverConfig::completion()).unwrap();
    let sol = Problem::with_observed(&observed, &params, &mask.observed)
        .unwrap()
        .run(Some(&truth))
        .unwrap();
    let elapsed = start.elapsed();

    let grad_norm = grad(&sol.state.u).frobenius_norm();
    let bound = 1e-2 * grad_norm.max(1.0);
    let primal = sol.state.primal_gap();
    let coupling = sol.state.coupling_gap();
    let recovered = psnr(&truth, &sol.image, PsnrMode::Mse).unwrap();
    let zero_filled = psnr(&truth, &observed, PsnrMode::Mse).unwrap();
    let iterations = sol.trace.iterations();

    let pass = sol.trace.status == Status::Converged
        && iterations <= 1000
        && primal <= bound
        && coupling <= bound
        && recovered >= zero_filled + 3.0
        && elapsed < Duration::from_secs(30);
    report(
        "criterion 3 desk-scale completion",
        pass,
        &format!(
            "status {}, {iterations} iterations, gaps {primal:.3e}/{coupling:.3e} vs bound {bound:.3e}, psnr {recovered:.2} dB vs zero-filled {zero_filled:.2} dB, {:.1}s",
            sol.trace.status.as_str(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_cameraman_reproduction() {
    let start = Instant::now();
    let image = load_image(data_path("cameraman.pgm")).unwrap().remove(0);
    assert_eq!(image.shape(), (256, 256));
    let params = derive_params(&SolverConfig::completion()).unwrap();

    let mut results = Vec::new();
    for sr in [0.1, 0.2, 0.3] {
        let mask = make_mask(256, 256, sr, 1).unwrap();
        let observed = lrcnc::apply_mask(&image, &mask).unwrap();
        let sol = Problem::with_observed(&observed, &params, &mask.observed)
            .unwrap()
            .run(None)
            .unwrap();
        let value = psnr(&image, &sol.image, PsnrMode::Mse).unwrap();
        results.push((sr, value, sol.trace.iterations(), sol.trace.status));
    }
    let elapsed = start.elapsed();

    let (_, psnr_02, iters_02, status_02) = results[1];
    let trend = results[2].2 < results[1].2 && results[1].2 < results[0].2;
    let pass = (psnr_02 - 23.27).abs() <= 1.5
        && status_02 == Status::Converged
        && iters_02 <= 250
        && trend
        && elapsed < Duration::from_secs(300);
    let detail = results
        .iter()
        .map(|(sr, p, it, st)| format!("sr {sr}: {p:.2} dB, {it} it, {}", st.as_str()))
        .collect::<Vec<_>>()
        .join("; ");
    report(
        "criterion 4 cameraman reproduction",
        pass,
        &format!("{detail}; {:.1}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_5_segmentation_benefit() {
    let start = Instant::now();
    let truth = common::three_region_phantom(128);
    let noise_level = 0.1;
    let params = derive_params(&SolverConfig::segmentation(noise_level)).unwrap();
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let noisy = add_gaussian_noise(&truth, &NoiseSpec::new(noise_level, 0.01, seed).unwrap());
        let smoothed = Problem::new(&noisy, &params).unwrap().run(None).unwrap();
        let (pipeline, _) = segment_image(&smoothed.image, 3, seed, None).unwrap();
        let (raw, _) = segment_image(&noisy, 3, seed, None).unwrap();
        let s_pipeline = ssim(&pipeline, &truth).unwrap();
        let s_raw = ssim(&raw, &truth).unwrap();
        if s_pipeline > s_raw {
            wins += 1;
        }
        detail.push(format!("{s_pipeline:.3}>{s_raw:.3}"));
    }
    let elapsed = start.elapsed();
    let pass = wins == 5 && elapsed < Duration::from_secs(120);
    report(
        "criterion 5 segmentation benefit",
        pass,
        &format!(
            "{wins}/5 seeds [{}], {:.1}s",
            detail.join(", "),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn window_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn criterion_6_trace_properties() {
    let truth = common::rank2_piecewise(32);
    let mask = make_mask(32, 32, 0.5, 5).unwrap();
    let observed = lrcnc::apply_mask(&truth, &mask).unwrap();
    let params = derive_params(&SolverConfig::completion()).unwrap();
    let solve = || {
        Problem::with_observed(&observed, &params, &mask.observed)
            .unwrap()
            .run(Some(&truth))
            .unwrap()
    };
    let first = solve();
    let second = solve();
    let records = &first.trace.records;
    let last = first.trace.last().unwrap();
    let reached_tol =
        first.trace.status == Status::Converged && last.rel_change <= params.config.tol;

    let n = records.len();
    let (early, trailing) = if n >= 25 {
        (&records[4..15], &records[n - 10..])
    } else {
        (&records[..n / 2], &records[n / 2..])
    };
    let pick = |rs: &[lrcnc::IterationRecord], f: fn(&lrcnc::IterationRecord) -> f64| {
        window_mean(&rs.iter().map(f).collect::<Vec<_>>())
    };
    let primal = (
        pick(early, |r| r.primal_gap),
        pick(trailing, |r| r.primal_gap),
    );
    let coupling = (
        pick(early, |r| r.coupling_gap),
        pick(trailing, |r| r.coupling_gap),
    );
    let gaps_fall = primal.1 < primal.0 && coupling.1 < coupling.0;
    let reproducible = trace_csv(&first.trace) == trace_csv(&second.trace);

    let pass = reached_tol && gaps_fall && reproducible;
    report(
        "criterion 6 convergence trace",
        pass,
        &format!(
            "{n} iterations, final rel change {:.2e}, primal {:.2e}->{:.2e}, coupling {:.2e}->{:.2e}, csv reproducible {reproducible}",
            last.rel_change, primal.0, primal.1, coupling.0, coupling.1
        ),
    );
    assert!(pass);
}

fn adjointness_holds() -> bool {
    let mut g = rng(21);
    [(3, 3), (5, 4), (8, 8)].iter().all(|&(r, c)| {
        (0..100).all(|_| {
            let u = common::random_grid(&mut g, r, c);
            let p = GradField::new(
                common::random_grid(&mut g, r, c),
                common::random_grid(&mut g, r, c),
            )
            .unwrap();
            let lhs = grad(&u).inner(&p);
            let rhs = u.inner(&div_adjoint(&p));
            (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs())
        })
    })
}

fn phi_shape_holds() -> bool {
    let params = [
        PhiParams::new(0.1, 1e-6, 1.0).unwrap(),
        PhiParams::new(0.3, 0.2, 1.0).unwrap(),
        PhiParams::new(0.2, 0.5, 0.7).unwrap(),
    ];
    params.iter().all(|p| {
        let grid: Vec<f64> = (0..=4000)
            .map(|k| 2.0 * p.t2() * k as f64 / 4000.0)
            .collect();
        let values: Vec<f64> = grid.iter().map(|&t| p.eval(t)).collect();
        let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-15);
        let bounded = values
            .iter()
            .all(|&v| (0.0..=p.plateau() + 1e-15).contains(&v));
        let eps = 1e-9;
        let continuous = [p.t(), p.t2()]
            .iter()
            .all(|&knee| (p.eval(knee + eps) - p.eval(knee - eps)).abs() < 1e-6);
        monotone && bounded && continuous && p.eval(0.0) == 0.0
    })
}

fn svt_nonexpansive_and_norms_hold() -> bool {
    let mut g = rng(22);
    (0..100).all(|_| {
        let (r, c) = (g.random_range(1..12), g.random_range(1..12));
        let a = common::random_grid(&mut g, r, c);
        let b = common::random_grid(&mut g, r, c);
        let tau = random_in(&mut g, 0.01, 1.5);
        let nonexpansive =
            svt(&a, tau).unwrap().distance(&svt(&b, tau).unwrap()) <= a.distance(&b) + 1e-12;
        let fro = a.frobenius_norm();
        let nuc = nuclear_norm(&a).unwrap();
        let rank = svd(&a).unwrap().rank() as f64;
        nonexpansive && fro <= nuc + 1e-12 && nuc <= rank.sqrt() * fro + 1e-12
    })
}

fn kmeans_monotone_holds() -> bool {
    let mut g = rng(23);
    (0..30).all(|seed| {
        let values: Vec<f64> = (0..200).map(|_| g.random::<f64>()).collect();
        let k = 2 + seed as usize % 4;
        let c = kmeans(&values, k, seed, KMeansOptions::default()).unwrap();
        c.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    })
}

fn mask_counts_hold() -> bool {
    let mut g = rng(24);
    (0..500).all(|_| {
        let rows = g.random_range(1..40);
        let cols = g.random_range(1..40);
        let sr = g.random_range(0.01..=1.0);
        let seed = g.random::<u64>();
        let mask = make_mask(rows, cols, sr, seed).unwrap();
        let n = rows * cols;
        let expected = (sr * n as f64).round() as usize;
        mask.observed_count() == expected
            && mask.observed.iter().filter(|&&o| o).count() == expected
    })
}

fn image_round_trip_holds() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let mut g = rng(25);
    (0..20).all(|n| {
        let (r, c) = (g.random_range(1..30), g.random_range(1..30));
        let bands: Vec<ImageGrid> = (0..if n % 2 == 0 { 1 } else { 3 })
            .map(|_| ImageGrid::from_fn(r, c, |_, _| g.random_range(0..=255u8) as f64 / 255.0))
            .collect();
        let ext = if bands.len() == 1 { "pgm" } else { "ppm" };
        let path = dir.path().join(format!("im{n}.{ext}"));
        lrcnc::save_image(&path, &bands).unwrap();
        let back = load_image(&path).unwrap();
        back.len() == bands.len() && back.iter().zip(&bands).all(|(x, y)| x.distance(y) < 1e-12)
    })
}

#[test]
fn criterion_7_invariant_suites() {
    let checks = [
        ("adjointness", adjointness_holds()),
        ("phi shape", phi_shape_holds()),
        (
            "svt nonexpansive and norm inequality",
            svt_nonexpansive_and_norms_hold(),
        ),
        ("kmeans monotone objective", kmeans_monotone_holds()),
        ("mask count exactness", mask_counts_hold()),
        ("image round trips", image_round_trip_holds()),
    ];
    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(name, ok)| format!("{name} {}", if *ok { "ok" } else { "broken" }))
        .collect::<Vec<_>>()
        .join(", ");
    report("criterion 7 invariant suites", pass, &detail);
    assert!(pass);
}
