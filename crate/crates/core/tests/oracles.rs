//! Derived reference values, each checked against an independent computation.

use approx::assert_relative_eq;
use num_complex::Complex64;
use rustfft::FftPlanner;
use slitsim::fock::*;
use slitsim::inference::fringe::{fit_fringe, simulate_fringe, PhasePrior};
use slitsim::inference::mcmc::{EnsembleSampler, PosteriorEnsemble};
use slitsim::inference::model::*;
use slitsim::inference::synthetic::reference_truth;
use slitsim::inference::*;
use slitsim::numeric::{linspace, TruncatedNormal};
use slitsim::phase_space::*;
use slitsim::protocol::*;
use slitsim::tomography::*;
use slitsim::twa::*;
use slitsim::units::*;
use std::f64::consts::PI;

const ETA: LambDicke = LambDicke::DEFAULT;

#[test]
fn thermal_visibility_at_half_occupation() {
    let v = gaussian_visibility(&thermal_state(0.5).unwrap(), ETA).v;
    assert!((v - 0.6707).abs() < 1e-3);
    assert_relative_eq!(v, (-2.0 * 0.316f64.powi(2) * 2.0).exp(), max_relative = 1e-14);
}

#[test]
fn squeezed_vacuum_and_thermal_scaling() {
    let v_sq = gaussian_visibility(&apply_squeeze(&vacuum_state(), 1.0, 0.0), ETA).v;
    assert!((v_sq - 0.9733).abs() < 1e-4);
    let v_st = squeezed_thermal_visibility(v_sq, 0.5).unwrap();
    assert!((v_st - 0.9473).abs() < 1e-4);
    let via_covariance = gaussian_visibility(&apply_squeeze(&thermal_state(0.5).unwrap(), 1.0, 0.0), ETA).v;
    assert_relative_eq!(v_st, via_covariance, max_relative = 1e-12);
}

#[test]
fn fock_squeeze_matches_covariance() {
    let rho = fock_squeezed_thermal(0.0, 1.0, 0.0, 200).unwrap();
    assert_relative_eq!(rho.moments().unwrap().covariance()[0][0], (-2.0f64).exp(), max_relative = 1e-9);
    let sq = apply_squeeze_fock(&FockDensityMatrix::vacuum(200).unwrap(), 0.5414, 0.0).unwrap();
    let q2 = sq.moments().unwrap().covariance()[0][0];
    assert!((q2 - 0.3386).abs() < 1e-4);
    assert_relative_eq!(q2, (-1.0828f64).exp(), max_relative = 1e-9);
}

#[test]
fn fock_squeeze_inverts() {
    let rho = fock_squeezed_thermal(0.3, 0.4, 0.7, 200).unwrap();
    let back = apply_squeeze_fock(&apply_squeeze_fock(&rho, 0.6, 1.1).unwrap(), -0.6, 1.1).unwrap();
    assert!(back.trace_distance(&rho).unwrap() < 1e-9);
    assert!((back.trace().re - 1.0).abs() < 1e-9);
}

#[test]
fn harmonic_revival() {
    let rho = fock_squeezed_thermal(0.5, -0.7, 0.3, 200).unwrap();
    let back = evolve_kerr_diagonal(&rho, 3.0, 0.0, 2.0 * PI / 3.0);
    assert!((back.matrix() - rho.matrix()).camax() < 1e-12);
}

#[test]
fn quartic_without_kerr_is_harmonic() {
    let rho = fock_squeezed_thermal(0.2, 0.5, 0.0, 100).unwrap();
    let a = QuarticPropagator::new(2.0, 0.0, 100).unwrap().evolve(&rho, 1.3).unwrap();
    let b = evolve_kerr_diagonal(&rho, 2.0, 0.0, 1.3);
    assert!(a.trace_distance(&b).unwrap() < 1e-9);
}

#[test]
fn quartic_matrix_elements() {
    let q4 = q_fourth_power(30);
    for n in 0..=10 {
        let nf = n as f64;
        assert_relative_eq!(q4[(n, n)], 6.0 * nf * nf + 6.0 * nf + 3.0, max_relative = 1e-12);
    }
}

fn quartic_vs_diagonal(kerr_ratio: f64) -> f64 {
    let omega = PI;
    let rho = fock_squeezed_thermal(1.0, -1.0, 0.0, 200).unwrap();
    let prop = QuarticPropagator::new(omega, kerr_ratio * omega, 200).unwrap();
    linspace(0.0, 2.0, 81)
        .into_iter()
        .map(|t| {
            let a = prop.evolve(&rho, t).unwrap().visibility(ETA).v;
            let b = rho.evolve_kerr_diagonal(omega, kerr_ratio * omega, t).visibility(ETA).v;
            (a - b).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn quartic_and_diagonal_models_differ_linearly_in_kerr() {
    // the gap is the non-secular part of q⁴ plus its linear frequency shift
    let strong = quartic_vs_diagonal(-0.01);
    let weak = quartic_vs_diagonal(-0.001);
    assert!(weak < 0.01, "{weak}");
    assert!(strong < 0.1, "{strong}");
    assert!((strong / weak / 10.0 - 1.0).abs() < 0.4, "{strong} / {weak}");
}

#[test]
fn truncation_converged_for_best_fit_state() {
    let truth = reference_truth();
    let seq = qeq_sequence(truth.omega1, truth.omega2(), us_to_s(19.53), us_to_s(6.0), DurationOffsets { shallow: truth.t_off_shallow, deep: truth.t_off_deep })
        .unwrap()
        .with_kerr(truth.kerr_ratio, KerrScaling::default());
    let eta = LambDicke::rb87(truth.omega1).unwrap();
    let t = [seq.span()];
    let v = |dim| run_protocol(&MotionalState::exact(FockDensityMatrix::thermal(0.5, dim).unwrap()), &seq, eta, &t).unwrap().v[0];
    assert!((v(100) - v(200)).abs() < 1e-6);
}

#[test]
fn characteristic_function_is_fourier_transform_of_position_density() {
    let rho = fock_squeezed_thermal(0.4, 0.6, 1.0, 200).unwrap().evolve_kerr_diagonal(PI, -0.02 * PI, 1.7);
    let n = 1024;
    let (lo, h) = (-20.0, 40.0 / n as f64);
    let q: Vec<f64> = (0..n).map(|j| lo + h * j as f64).collect();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = position_distribution(&rho, &q).into_iter().map(|p| rustfft::num_complex::Complex::new(p, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    for m in 1..40 {
        let xi = 2.0 * PI * m as f64 / (n as f64 * h);
        let via_fft = Complex64::from_polar(h, xi * lo) * Complex64::new(buf[m].re, buf[m].im);
        let direct = rho.characteristic(xi, 0.0);
        assert!((via_fft - direct).norm() < 1e-4, "ξ = {xi}");
    }
}

#[test]
fn wigner_p_marginal_is_position_density() {
    let rho = fock_squeezed_thermal(0.3, 0.4, 0.5, 120).unwrap();
    let q = linspace(-7.0, 7.0, 57);
    let p = linspace(-10.0, 10.0, 201);
    let grid = wigner_grid(&rho, &q, &p).unwrap();
    for (a, b) in grid.marginal_q().iter().zip(position_distribution(&rho, &q)) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((grid.normalization() - 1.0).abs() < 1e-3);
}

#[test]
fn twa_samples_squeezed_thermal_covariance() {
    let n = 200_000;
    let state = apply_squeeze(&thermal_state(1.0).unwrap(), -1.0, 0.0);
    let cov = sample_initial(&state, n, 9).unwrap().covariance().unwrap().covariance();
    let e2 = (2.0f64).exp();
    let tol = 5.0 / (n as f64).sqrt();
    assert!((cov[0][0] / (3.0 * e2) - 1.0).abs() < 2.0 * tol);
    assert!((cov[1][1] / (3.0 / e2) - 1.0).abs() < 2.0 * tol);
    assert!(cov[0][1].abs() < tol * 3.0);
}

#[test]
fn fresh_vacuum_ensemble() {
    let n = 100_000;
    let cov = sample_initial(&vacuum_state(), n, 1).unwrap().covariance().unwrap().covariance();
    let tol = 5.0 / (n as f64).sqrt();
    assert!((cov[0][0] - 1.0).abs() < tol && (cov[1][1] - 1.0).abs() < tol && cov[0][1].abs() < tol);
}

#[test]
fn harmonic_qeq_ensemble_reaches_doubled_squeezing() {
    let (w1, w2) = (khz_to_angular(37.8), khz_to_angular(12.8));
    let seq = qeq_sequence(w1, w2, quarter_period(w2), 0.0, DurationOffsets::default()).unwrap();
    let n = 200_000;
    let end = run_to_end(&MotionalState::trajectories(sample_initial(&vacuum_state(), n, 4).unwrap()), &seq).unwrap();
    let (lo, _) = end.covariance().unwrap().eigenvalues();
    let s2 = (w1 / w2).ln();
    assert!((lo / (-2.0 * s2).exp() - 1.0).abs() < 10.0 / (n as f64).sqrt());
}

#[test]
fn harmonic_qeq_peak_visibility() {
    let (w1, w2) = (khz_to_angular(37.8), khz_to_angular(12.8));
    let s2 = (w1 / w2).ln();
    let seq = qeq_sequence(w1, w2, quarter_period(w2), quarter_period(w1), DurationOffsets::default()).unwrap();
    let end = run_to_end(&MotionalState::Analytic(vacuum_state()), &seq).unwrap();
    let v = end.visibility(ETA).0;
    assert_relative_eq!(v, (-2.0 * 0.316f64.powi(2) * (-2.0 * s2).exp()).exp(), max_relative = 1e-12);
    // exp(−0.19971 · e^{−2.1656}) evaluates to 0.97736
    assert!((v - 0.97736).abs() < 1e-5);
}

#[test]
fn kerr_number_flow_keeps_phase_space_volume_small_drift() {
    let omega = 1.0;
    let ens = sample_initial(&vacuum_state(), 50_000, 2).unwrap();
    let before = ens.covariance().unwrap().det();
    let after = ens.evolve(omega, -0.011 * omega, 5.0 * 2.0 * PI, ClassicalFlow::KerrNumber).unwrap().covariance().unwrap().det();
    assert!((after / before - 1.0).abs() < 0.01, "{before} → {after}");
}

#[test]
fn calibration_scalar() {
    let out = calibrate_visibility(Measured::new(0.80, 0.01), Measured::new(0.75, 0.01), 0.0, ETA).unwrap();
    assert!((out.v_st - 0.80 * ETA.sql_visibility() / 0.75).abs() < 1e-12);
    assert!((out.v_st - 0.8736).abs() < 1e-3);
    assert!(out.technical_loss);
    let ideal = calibrate_visibility(Measured::new(0.6, 0.0), Measured::new(ETA.sql_visibility().powi(3), 0.0), 1.0, ETA).unwrap();
    assert!((ideal.v_st - 0.6).abs() < 1e-12 && !ideal.technical_loss);
}

fn phases() -> Vec<f64> {
    linspace(0.0, 2.0 * PI, 17)[..16].to_vec()
}

#[test]
fn fringe_fit_coverage() {
    let (v, alpha) = (0.6, 0.9);
    let hits = (0..400u64)
        .filter(|&s| {
            let fit = fit_fringe(&simulate_fringe(v, alpha, 500.0, 400.0, &phases(), s).unwrap(), None).unwrap();
            (fit.v - v).abs() < 2.0 * fit.sigma_v()
        })
        .count();
    let frac = hits as f64 / 400.0;
    assert!(frac > 0.92, "coverage {frac}");
}

#[test]
fn fringe_fit_unbiased_with_unbalanced_ports() {
    for scale in [200.0, 1000.0, 5000.0] {
        let (v, n) = (0.5, 500u64);
        let fits: Vec<_> = (0..n).map(|s| fit_fringe(&simulate_fringe(v, -1.2, scale, 0.6 * scale, &phases(), 1000 + s).unwrap(), None).unwrap()).collect();
        let mean = fits.iter().map(|f| f.v).sum::<f64>() / n as f64;
        let sigma = fits.iter().map(|f| f.sigma_v()).sum::<f64>() / n as f64;
        assert!((mean - v).abs() < sigma / 10.0, "scale {scale}: bias {} vs σ {sigma}", mean - v);
    }
}

#[test]
fn phase_prior_tightens_low_contrast_fits() {
    // near V = 0 the free fit inflates V along the noise; pinning the phase
    // projects it onto the known direction instead
    let (v, alpha) = (0.01, 0.4);
    let (mut sq_free, mut sq_pinned, mut phase_width) = (0.0, 0.0, 0.0);
    let n = 200;
    for s in 0..n {
        let scan = simulate_fringe(v, alpha, 300.0, 300.0, &phases(), s).unwrap();
        let free = fit_fringe(&scan, None).unwrap();
        let pinned = fit_fringe(&scan, Some(PhasePrior { mean: alpha - PI / 2.0, sd: 0.05 })).unwrap();
        sq_free += (free.v - v).powi(2);
        sq_pinned += (pinned.v - v).powi(2);
        phase_width += free.sigma_phi0();
    }
    assert!(sq_pinned < 0.8 * sq_free, "{sq_pinned} vs {sq_free}");
    assert!(phase_width / n as f64 > 0.3, "unconstrained phase width {}", phase_width / n as f64);
}

fn small_forward(n: usize) -> (TwaForwardModel, ScanDesign) {
    let design = ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(6.0) };
    (TwaForwardModel::new(ForwardConfig { n_trajectories: n, seed: 3, design, kerr_scaling: KerrScaling::default() }).unwrap(), design)
}

fn noiseless_data(model: &TwaForwardModel, truth: &FitParams) -> Vec<VisibilityDatum> {
    let mut data = Vec::new();
    for (scan, times) in [(ScanKind::ShallowScan, linspace(2.0, 36.0, 9)), (ScanKind::DeepScan, linspace(1.0, 30.0, 9))] {
        for t in times {
            let t = us_to_s(t);
            let nbar = TruncatedNormal::new(0.5, 0.05).unwrap();
            let v = model.visibility(truth, scan, t, nbar).unwrap();
            data.push(VisibilityDatum { t, v_st: v, sigma_v: 0.03, nbar: 0.5, sigma_nbar: 0.05, scan_kind: scan });
        }
    }
    data
}

#[test]
fn likelihood_peaks_at_generating_parameters() {
    let (model, _) = small_forward(2000);
    let truth = reference_truth();
    let like = TwaLikelihood::new(model.clone(), noiseless_data(&model, &truth)).unwrap();
    let best = like.log_likelihood(&truth);
    let x0 = truth.to_vector();
    let steps = [0.02, 0.002, 0.5, 0.3, 0.2];
    for d in 0..5 {
        for sign in [-1.0, 1.0] {
            let mut x = x0;
            x[d] += sign * steps[d];
            let p = FitParams::from_vector(&x);
            if p.is_valid() {
                assert!(like.log_likelihood(&p) < best, "coordinate {d}");
            }
        }
    }
    assert_eq!(best, TwaLikelihood::new(model.clone(), noiseless_data(&model, &truth)).unwrap().log_likelihood(&truth));
    let generic = log_likelihood(&truth, like.data(), &model);
    assert_relative_eq!(generic, best, max_relative = 1e-12);
}

#[test]
fn likelihood_scaling_and_constraints() {
    let (model, _) = small_forward(500);
    let truth = reference_truth();
    let mut data = noiseless_data(&model, &truth);
    for d in &mut data {
        d.v_st += 0.02;
    }
    let base = log_likelihood(&truth, &data, &model);
    let chi2: f64 = data.iter().map(|d| ((d.v_st - model.visibility(&truth, d.scan_kind, d.t, TruncatedNormal::new(d.nbar, d.sigma_nbar).unwrap()).unwrap()) / d.sigma_v).powi(2)).sum();
    let doubled: Vec<_> = data.iter().map(|d| VisibilityDatum { sigma_v: 2.0 * d.sigma_v, ..*d }).collect();
    let expected = base + 0.375 * chi2 - data.len() as f64 * 2f64.ln();
    assert_relative_eq!(log_likelihood(&truth, &doubled, &model), expected, max_relative = 1e-10);
    let bad = FitParams { kerr_ratio: 0.01, ..truth };
    assert_eq!(log_likelihood(&bad, &data, &model), f64::NEG_INFINITY);
}

#[test]
fn flat_likelihood_recovers_prior() {
    let priors = Priors::default();
    let init: Vec<Vec<f64>> = (0..32).map(|w| {
        let mut rng = slitsim::numeric::stream_rng(5, w);
        priors.sample(&mut rng).to_vec()
    }).collect();
    let chain = EnsembleSampler::new(32).run(|x| priors.log_prior(&FitParams::from_vector(x)), &init, 2000, 8).unwrap();
    let post = PosteriorEnsemble::from_chain(&chain, &FitParams::NAMES);
    let s = post.summary();
    assert!((s[4].median - 37.8).abs() < 0.05, "{:?}", s[4]);
    assert!((s[4].sigma() - 0.3).abs() < 0.05);
    assert!((s[0].median - 0.75).abs() < 0.1);
    assert!((s[1].median + 0.025).abs() < 0.004);
    assert!(s[2].median.abs() < 1.0 && s[3].median.abs() < 1.0);
}

#[test]
fn sampler_medians_stable_under_reseeding() {
    let lp = |x: &[f64]| -0.5 * ((x[0] - 1.0).powi(2) / 0.04 + (x[1] + 2.0).powi(2) / 0.25 + x[0] * x[1] * 0.1);
    let init: Vec<Vec<f64>> = (0..16).map(|w| vec![1.0 + 0.01 * w as f64, -2.0 - 0.01 * w as f64]).collect();
    let run = |seed| PosteriorEnsemble::from_chain(&EnsembleSampler::new(16).run(lp, &init, 3000, seed).unwrap(), &["a", "b"]).summary();
    let (a, b) = (run(1), run(2));
    for d in 0..2 {
        assert!((a[d].median - b[d].median).abs() < 0.5 * a[d].sigma());
    }
}

#[test]
fn harmonic_projection_exponent() {
    let params = FitParams { kerr_ratio: 0.0, ..reference_truth() };
    let model = AnalyticForwardModel { design: ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(6.0) } };
    for nbar in [0.2, 0.5, 0.9] {
        let t = us_to_s(7.0);
        let v0 = model.visibility(&params, ScanKind::DeepScan, t, TruncatedNormal::point(0.0)).unwrap();
        let d = VisibilityDatum { t, v_st: squeezed_thermal_visibility(v0, nbar).unwrap(), sigma_v: 0.02, nbar, sigma_nbar: 0.05, scan_kind: ScanKind::DeepScan };
        let p = thermal_projection(&d, &params, &model).unwrap();
        assert_relative_eq!(p.gamma, 1.0 / (2.0 * nbar + 1.0), max_relative = 1e-9);
    }
}

#[test]
fn vacuum_chi_measurements() {
    let vac = FockDensityMatrix::vacuum(120).unwrap();
    for (i, k) in [[0.3f64, 0.0], [0.8, 0.5], [-1.0, 1.2], [0.1, -2.0]].into_iter().enumerate() {
        let exact = (-(k[0] * k[0] + k[1] * k[1]) / 2.0).exp();
        assert!((vac.characteristic(k[0], k[1]) - Complex64::new(exact, 0.0)).norm() < 1e-10);
        let s = measure_chi(&vac, k, 1_000_000, i as u64).unwrap();
        assert!((s.chi - Complex64::new(exact, 0.0)).norm() < 4.0 * s.sigma_chi * 2f64.sqrt(), "{k:?}: {} vs {exact}", s.chi);
        assert!(s.chi.norm() <= 1.0 + 3.0 * s.sigma_chi);
    }
}

#[test]
fn chi_estimates_converge_to_exact() {
    let s = 1.0 / 2f64.sqrt();
    let target = FockDensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(0.0, s)], 120).unwrap();
    let k = [0.7, -0.4];
    let exact = target.characteristic(k[0], k[1]);
    let mut errs = Vec::new();
    for shots in [100u64, 10_000, 1_000_000] {
        let samples: Vec<_> = (0..200).map(|seed| measure_chi(&target, k, shots, seed).unwrap()).collect();
        let rms = (samples.iter().map(|s| (s.chi - exact).norm_sqr()).sum::<f64>() / 200.0).sqrt();
        let mean_sigma = samples.iter().map(|s| s.sigma_chi).sum::<f64>() / 200.0;
        errs.push((rms, mean_sigma));
    }
    // σ ∝ 1/√shots over two decades each
    for w in errs.windows(2) {
        let ratio = w[0].1 / w[1].1;
        assert!((ratio / 10.0 - 1.0).abs() < 0.25, "σ ratio {ratio}");
    }
    let (rms, sigma) = errs[2];
    assert!(rms < 3.0 * sigma * 2f64.sqrt());
}

#[test]
fn noiseless_vacuum_reconstruction_within_two_percent() {
    let vac = FockDensityMatrix::vacuum(200).unwrap();
    let plan = TomographyPlan::annulus(LambDicke::new(0.5).unwrap(), 2.0, 1.0, 48, 64, 1).unwrap();
    let rec = reconstruct_wigner(&exact_samples(&vac, &plan), &GridSpec::default()).unwrap();
    let truth = vacuum_state();
    let peak = 1.0 / (2.0 * PI);
    let mut worst: f64 = 0.0;
    for (i, q) in rec.grid.q_axis.iter().enumerate() {
        for (j, p) in rec.grid.p_axis.iter().enumerate() {
            worst = worst.max((rec.grid.values[i][j] - truth.wigner(*q, *p)).abs());
        }
    }
    assert!(worst / peak < 0.02, "L∞ {}", worst / peak);
}

#[test]
fn narrow_annulus_acts_as_low_pass() {
    let vac = FockDensityMatrix::vacuum(60).unwrap();
    let plan = TomographyPlan::annulus(LambDicke::new(0.25).unwrap(), 1.0, 1.0, 16, 64, 1).unwrap();
    let (_, k_max) = plan.annulus_bounds();
    assert!(k_max < 1.5);
    let rec = reconstruct_wigner(&exact_samples(&vac, &plan), &GridSpec::default()).unwrap();
    // missing high-k content lowers and broadens the peak
    assert!(rec.grid.max() < 0.9 / (2.0 * PI));
}

#[test]
fn pure_noise_has_no_overlap_with_target() {
    let s = 1.0 / 2f64.sqrt();
    let target = FockDensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(s, 0.0)], 120).unwrap();
    let plan = TomographyPlan::annulus(LambDicke::new(0.5).unwrap(), 2.0, 1.0, 16, 32, 1).unwrap();
    let spec = GridSpec::default();
    let truth = wigner_grid(&target, &spec.x_axis(), &spec.x_axis()).unwrap();
    let overlaps: Vec<f64> = (0..20u64)
        .map(|seed| {
            let samples: Vec<KSample> = k_grid(&plan)
                .into_iter()
                .enumerate()
                .map(|(i, mut s)| {
                    let mut rng = slitsim::numeric::stream_rng(seed, i as u64);
                    use rand::Rng;
                    s.chi = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.1;
                    s.sigma_chi = 1.0;
                    s
                })
                .collect();
            let rec = reconstruct_wigner(&samples, &spec).unwrap();
            // remove the χ(0) = 1 anchor, which alone is a flat offset
            let offset = spec.dk() * spec.dk() / (4.0 * PI * PI);
            let values = rec.grid.values.iter().map(|r| r.iter().map(|v| v - offset).collect()).collect();
            let noise = WignerGrid::new(rec.grid.q_axis.clone(), rec.grid.p_axis.clone(), values).unwrap();
            slitsim::tomography::reconstruction_fidelity(&noise, &truth).unwrap().overlap
        })
        .collect();
    let mean = overlaps.iter().sum::<f64>() / 20.0;
    let sd = (overlaps.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
    assert!(mean.abs() < 3.0 * sd / 20f64.sqrt() + 1e-3, "mean {mean} sd {sd}");
}
