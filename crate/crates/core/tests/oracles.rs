//! Estimator and predictor checked against dense-inverse computations.

use gpsurrogate_core::covariance::{build_correlation_matrix, ActiveSet, CorrelationParams};
use gpsurrogate_core::estimation::{gls_fit, gls_normal_residual, psi_objective, ProfileProblem};
use gpsurrogate_core::predictor::{Kriging, MseKind};
use gpsurrogate_core::regression::RegressionBasis;
use gpsurrogate_core::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    design: Matrix,
    y: Vec<f64>,
    cov: Vec<usize>,
    reg: Vec<usize>,
    params: CorrelationParams,
}

fn instance(seed: u64, tau_zero: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=8);
    let d = rng.random_range(1..=3);
    let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let design = Matrix::from_row_major(n, d, x).unwrap();
    let y = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
    let m = rng.random_range(1..=d);
    let cov: Vec<usize> = (0..m).collect();
    let reg: Vec<usize> = (0..rng.random_range(0..=d.min(n - 3))).collect();
    let params = CorrelationParams::new(
        (0..m).map(|_| rng.random_range(1.0..10.0)).collect(),
        (0..m).map(|_| rng.random_range(0.5..2.0)).collect(),
        if tau_zero { 0.0 } else { rng.random_range(0.0..0.1) },
    )
    .unwrap();
    Instance {
        design,
        y,
        cov,
        reg,
        params,
    }
}

fn dense_r(inst: &Instance) -> DMatrix<f64> {
    let n = inst.design.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let mut s = 0.0;
        for (l, &c) in inst.cov.iter().enumerate() {
            let h = (inst.design[(i, c)] - inst.design[(j, c)]).abs();
            s += inst.params.theta[l] * h.powf(inst.params.power[l]);
        }
        (-s).exp() + if i == j { inst.params.tau } else { 0.0 }
    })
}

fn dense_f_row(inst: &Instance, x: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(inst.reg.iter().map(|&k| x[k])).collect()
}

fn dense_f(inst: &Instance) -> DMatrix<f64> {
    let n = inst.design.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| dense_f_row(inst, inst.design.row(i))).collect();
    DMatrix::from_fn(n, inst.reg.len() + 1, |i, j| rows[i][j])
}

struct DenseFit {
    beta: DVector<f64>,
    sigma2: f64,
    log_det: f64,
    v_inv: DMatrix<f64>,
}

fn dense_fit(inst: &Instance) -> DenseFit {
    let v = dense_r(inst);
    let f = dense_f(inst);
    let y = DVector::from_vec(inst.y.clone());
    let v_inv = v.clone().try_inverse().unwrap();
    let a = f.transpose() * &v_inv * &f;
    let beta = a.try_inverse().unwrap() * f.transpose() * &v_inv * &y;
    let r = &y - &f * &beta;
    let n = inst.y.len() as f64;
    let sigma2 = (r.transpose() * &v_inv * &r)[(0, 0)] / n;
    DenseFit {
        beta,
        sigma2,
        log_det: v.determinant().ln(),
        v_inv,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn basis(inst: &Instance) -> RegressionBasis {
    RegressionBasis::new(ActiveSet::new(inst.reg.clone(), inst.design.ncols()).unwrap())
}

fn corr_matrix(inst: &Instance) -> Matrix {
    build_correlation_matrix(&inst.design.select_columns(&inst.cov), &inst.params).unwrap()
}

#[test]
fn gls_fit_matches_dense_inverse() {
    for seed in 0..50 {
        let inst = instance(seed, false);
        let fit = gls_fit(&corr_matrix(&inst), &basis(&inst).matrix(&inst.design).unwrap(), &inst.y).unwrap();
        let oracle = dense_fit(&inst);
        assert_eq!(fit.cholesky().jitter(), 0.0);
        for (b, o) in fit.beta_hat.iter().zip(oracle.beta.iter()) {
            assert!((b - o).abs() <= 1e-8 * o.abs().max(1.0), "seed {seed}: beta {b} vs {o}");
        }
        assert!(rel(fit.sigma2_hat, oracle.sigma2) < 1e-8, "seed {seed}");
        assert!((fit.log_det - oracle.log_det).abs() < 1e-8 * oracle.log_det.abs().max(1.0));
    }
}

#[test]
fn psi_matches_dense_determinant() {
    for seed in 100..150 {
        let inst = instance(seed, false);
        let active = ActiveSet::new(inst.cov.clone(), inst.design.ncols()).unwrap();
        let psi = psi_objective(&inst.params, &active, &basis(&inst), &inst.design, &inst.y).unwrap();
        let oracle = dense_fit(&inst);
        let n = inst.y.len() as f64;
        let expected = dense_r(&inst).determinant().powf(1.0 / n) * oracle.sigma2;
        assert!(rel(psi, expected) < 1e-8, "seed {seed}: {psi} vs {expected}");

        let problem = ProfileProblem::new(
            &inst.design.select_columns(&inst.cov),
            basis(&inst).matrix(&inst.design).unwrap(),
            inst.y.clone(),
        )
        .unwrap();
        assert_eq!(problem.psi(&inst.params).unwrap(), psi);
    }
}

#[test]
fn log_likelihood_matches_gaussian_density() {
    for seed in 200..250 {
        let inst = instance(seed, false);
        let fit = gls_fit(&corr_matrix(&inst), &basis(&inst).matrix(&inst.design).unwrap(), &inst.y).unwrap();
        let oracle = dense_fit(&inst);
        let n = inst.y.len();
        let cov = dense_r(&inst) * oracle.sigma2;
        let r = DVector::from_vec(inst.y.clone()) - dense_f(&inst) * &oracle.beta;
        let quad = (r.transpose() * cov.clone().try_inverse().unwrap() * &r)[(0, 0)];
        let density = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * quad;
        let ll = fit.log_likelihood().unwrap();
        assert!(rel(ll, density) < 1e-8, "seed {seed}: {ll} vs {density}");
    }
}

#[test]
fn predictor_matches_dense_formulas() {
    for seed in 300..350 {
        let inst = instance(seed, false);
        let oracle = dense_fit(&inst);
        let kriging = Kriging::fit(
            inst.design.clone(),
            inst.y.clone(),
            ActiveSet::new(inst.cov.clone(), inst.design.ncols()).unwrap(),
            basis(&inst),
            inst.params.clone(),
        )
        .unwrap();
        let f = dense_f(&inst);
        let a_inv = (f.transpose() * &oracle.v_inv * &f).try_inverse().unwrap();
        let resid = DVector::from_vec(inst.y.clone()) - &f * &oracle.beta;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        for _ in 0..5 {
            let x: Vec<f64> = (0..inst.design.ncols()).map(|_| rng.random::<f64>()).collect();
            let k = DVector::from_iterator(
                inst.design.nrows(),
                (0..inst.design.nrows()).map(|i| {
                    let s: f64 = inst
                        .cov
                        .iter()
                        .enumerate()
                        .map(|(l, &c)| inst.params.theta[l] * (x[c] - inst.design[(i, c)]).abs().powf(inst.params.power[l]))
                        .sum();
                    (-s).exp()
                }),
            );
            let fx = DVector::from_vec(dense_f_row(&inst, &x));
            let mean = fx.dot(&oracle.beta) + (k.transpose() * &oracle.v_inv * &resid)[(0, 0)];
            let u = &fx - f.transpose() * &oracle.v_inv * &k;
            let plain = oracle.sigma2 * (1.0 + inst.params.tau - (k.transpose() * &oracle.v_inv * &k)[(0, 0)]);
            let corrected = plain + oracle.sigma2 * (u.transpose() * &a_inv * &u)[(0, 0)];

            let p = kriging.predict_standardized(&x, MseKind::Corrected).unwrap();
            let q = kriging.predict_standardized(&x, MseKind::Uncorrected).unwrap();
            assert!((p.mean - mean).abs() <= 1e-8 * mean.abs().max(1.0), "seed {seed}: {} vs {mean}", p.mean);
            assert!(rel(p.mse, corrected) < 1e-8, "seed {seed}: {} vs {corrected}", p.mse);
            assert!(rel(q.mse, plain) < 1e-8, "seed {seed}: {} vs {plain}", q.mse);
        }
    }
}

#[test]
fn interpolates_without_nugget() {
    for seed in 400..420 {
        let inst = instance(seed, true);
        let kriging = Kriging::fit(
            inst.design.clone(),
            inst.y.clone(),
            ActiveSet::new(inst.cov.clone(), inst.design.ncols()).unwrap(),
            basis(&inst),
            inst.params.clone(),
        )
        .unwrap();
        let range = inst.y.iter().cloned().fold(f64::MIN, f64::max) - inst.y.iter().cloned().fold(f64::MAX, f64::min);
        for i in 0..inst.design.nrows() {
            let p = kriging.predict_standardized(inst.design.row(i), MseKind::Corrected).unwrap();
            assert!((p.mean - inst.y[i]).abs() <= 1e-6 * range);
            assert!(p.mse <= 1e-8 * kriging.sigma2_hat());
        }
    }
}

#[test]
fn gls_residual_is_orthogonal_to_trend() {
    for seed in 500..530 {
        let inst = instance(seed, false);
        let f = basis(&inst).matrix(&inst.design).unwrap();
        let fit = gls_fit(&corr_matrix(&inst), &f, &inst.y).unwrap();
        let scale: f64 = inst.y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for g in gls_normal_residual(&fit, &f, &inst.y) {
            assert!(g.abs() < 1e-9 * scale, "seed {seed}: {g}");
        }
    }
}

#[test]
fn psi_invariant_to_row_permutation() {
    for seed in 600..630 {
        let inst = instance(seed, false);
        let n = inst.design.nrows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let active = ActiveSet::new(inst.cov.clone(), inst.design.ncols()).unwrap();
        let a = psi_objective(&inst.params, &active, &basis(&inst), &inst.design, &inst.y).unwrap();
        let y: Vec<f64> = perm.iter().map(|&i| inst.y[i]).collect();
        let b = psi_objective(&inst.params, &active, &basis(&inst), &inst.design.select_rows(&perm), &y).unwrap();
        assert!(rel(b, a) < 1e-10);
    }
}

#[test]
fn output_scaling_equivariance() {
    for seed in 700..730 {
        let inst = instance(seed, false);
        let (c, shift) = (3.5, -7.0);
        let f = basis(&inst).matrix(&inst.design).unwrap();
        let r = corr_matrix(&inst);
        let base = gls_fit(&r, &f, &inst.y).unwrap();
        let y2: Vec<f64> = inst.y.iter().map(|v| c * v + shift).collect();
        let scaled = gls_fit(&r, &f, &y2).unwrap();
        assert!(rel(scaled.sigma2_hat, c * c * base.sigma2_hat) < 1e-9);
        assert!(rel(scaled.psi, c * c * base.psi) < 1e-9);
        assert!((scaled.beta_hat[0] - (c * base.beta_hat[0] + shift)).abs() < 1e-8 * (1.0 + scaled.beta_hat[0].abs()));
        for k in 1..base.beta_hat.len() {
            assert!((scaled.beta_hat[k] - c * base.beta_hat[k]).abs() < 1e-8 * (1.0 + scaled.beta_hat[k].abs()));
        }
    }
}
