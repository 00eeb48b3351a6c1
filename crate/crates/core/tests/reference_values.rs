//! Reference numbers reproduced from the model.

use slitsim::fock::*;
use slitsim::inference::model::{scan_sequence, AnalyticForwardModel, FitParams, ScanDesign, VisibilityModel};
use slitsim::inference::synthetic::reference_truth;
use slitsim::inference::{thermal_projection, Priors, ScanKind, VisibilityDatum};
use slitsim::numeric::{linspace, TruncatedNormal};
use slitsim::phase_space::*;
use slitsim::protocol::*;
use slitsim::tomography::annulus_bounds;
use slitsim::twa::*;
use slitsim::units::*;
use std::f64::consts::PI;

fn best_fit() -> FitParams {
    FitParams { s1: 0.50, kerr_ratio: -0.011, t_off_shallow: us_to_s(4.2), t_off_deep: us_to_s(0.5), omega1: khz_to_angular(37.9) }
}

#[test]
fn sql_bound_from_trap_frequency() {
    let eta = LambDicke::rb87(khz_to_angular(37.8)).unwrap();
    assert!((eta.value() - 0.316).abs() < 1e-3);
    assert!((eta.sql_visibility() - 0.819).abs() < 1e-3);
    assert!((gaussian_visibility(&vacuum_state(), LambDicke::DEFAULT).v - 0.819).abs() < 1e-3);
}

#[test]
fn quench_squeeze_values() {
    let (w1, w2) = (khz_to_angular(37.8), khz_to_angular(12.8));
    let s1 = quench_squeeze_parameter(w1, w2);
    assert!((s1 - 0.5414).abs() < 1e-4);
    assert!((quarter_period(w2) * 1e6 - 19.53).abs() < 0.01);
    let seq = qeq_sequence(w1, w2, quarter_period(w2), 0.0, DurationOffsets::default()).unwrap();
    let end = run_to_end(&MotionalState::Analytic(vacuum_state()), &seq).unwrap();
    let s2 = effective_squeezing(&end.covariance().unwrap()).unwrap().s_eff;
    assert!((s2 - 1.08).abs() < 5e-3);
}

#[test]
fn squeezed_thermal_covariance_scales_with_occupation() {
    for nbar in [0.0, 0.5, 1.3] {
        let st = apply_squeeze(&thermal_state(nbar).unwrap(), 0.7, 0.0);
        assert!((st.covariance()[0][0] - (2.0 * nbar + 1.0) * (-1.4f64).exp()).abs() < 1e-12);
    }
}

#[test]
fn rotating_squeezed_variance() {
    let (s, th0, w) = (0.8, 0.3, 2.0);
    for t in linspace(0.0, 3.0, 13) {
        let st = apply_rotation(&apply_squeeze(&vacuum_state(), s, th0), w * t);
        let expected = (2.0 * s).cosh() - (2.0 * s).sinh() * (th0 - 2.0 * w * t).cos();
        assert!((st.covariance()[0][0] - expected).abs() < 1e-12);
    }
}

#[test]
fn effective_squeezing_of_quoted_covariance() {
    let st = GaussianState::new([0.0, 0.0], [[(-1.76f64).exp(), 0.0], [0.0, 1.76f64.exp()]]).unwrap();
    let e = effective_squeezing(&st).unwrap();
    assert!((e.s_eff - 0.88).abs() < 1e-9);
    assert!((e.db - 7.64).abs() < 0.01);
}

#[test]
fn vacuum_quartic_moment() {
    assert!((q_fourth_power(10)[(0, 0)] - 3.0).abs() < 1e-12);
}

#[test]
fn scattering_budget_values() {
    let b = scattering_budget(10.5, 852.0, 60e-6).unwrap();
    assert!((b.rate / 280.0 - 1.0).abs() < 0.1, "{}", b.rate);
    assert!((b.probability - 0.017).abs() < 0.002, "{}", b.probability);
}

#[test]
fn tomography_annulus() {
    let (lo, hi) = annulus_bounds(LambDicke::new(0.5).unwrap(), 2.0);
    assert!((lo - 0.14).abs() < 5e-3 && (hi - 7.39).abs() < 5e-3);
}

#[test]
fn kerr_shear_of_broad_state() {
    // wide initial state, anharmonic shear drives χ through zero
    let (w, k) = (PI, -0.01 * PI);
    let rho = fock_squeezed_thermal(1.0, -1.0, 0.0, 200).unwrap();
    let evaluator = ProbeOperator::new(200, 2.0 * 0.316);
    let chis: Vec<_> = linspace(0.0, 10.0, 401).into_iter().map(|t| evaluator.expectation(&rho.evolve_kerr_diagonal(w, k, t))).collect();
    let v_min = chis.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    assert!(v_min < 0.05, "{v_min}");
    assert!(chis.iter().any(|c| c.re < 0.0));
}

#[test]
fn twa_tracks_exact_dynamics_in_the_benchmark_regime() {
    let (w, k) = (PI, -0.01 * PI);
    let rho = fock_squeezed_thermal(1.0, -1.0, 0.0, 200).unwrap();
    let ens = sample_initial(&apply_squeeze(&thermal_state(1.0).unwrap(), -1.0, 0.0), 20_000, 17).unwrap();
    let mut worst: f64 = 0.0;
    for t in linspace(0.0, 10.0, 101) {
        let exact = rho.evolve_kerr_diagonal(w, k, t).visibility(LambDicke::DEFAULT).v;
        let twa = ens.evolve(w, k, t, ClassicalFlow::default()).unwrap().visibility(LambDicke::DEFAULT);
        worst = worst.max((exact - twa.v).abs() - 2.0 * twa.stderr);
    }
    assert!(worst < 0.03, "{worst}");
}

fn first_peak(params: &FitParams, nbar: f64) -> (f64, f64) {
    let seq = qeq_sequence(params.omega1, params.omega2(), us_to_s(19.53), us_to_s(15.0), DurationOffsets { shallow: params.t_off_shallow, deep: params.t_off_deep })
        .unwrap()
        .with_kerr(params.kerr_ratio, KerrScaling::default());
    let start = seq.boundaries()[2];
    let times = linspace(start, seq.span(), 301);
    let eta = LambDicke::rb87(params.omega1).unwrap();
    let tr = run_protocol(&MotionalState::exact(FockDensityMatrix::thermal(nbar, 200).unwrap()), &seq, eta, &times).unwrap();
    let (i, v) = tr.peak().unwrap();
    (v, tr.times[i] - start)
}

#[test]
fn intrinsic_peak_visibility() {
    let (v, _) = first_peak(&best_fit(), 0.0);
    assert!((v - 0.938).abs() < 0.010, "{v}");
}

#[test]
fn effective_squeezing_at_best_fit() {
    // right after the second quench
    let p = FitParams { t_off_deep: 0.0, ..best_fit() };
    let seq = scan_sequence(&p, &ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: 0.0 }, KerrScaling::default(), ScanKind::DeepScan, 0.0).unwrap();
    let end = run_to_end(&MotionalState::exact(FockDensityMatrix::vacuum(200).unwrap()), &seq).unwrap();
    let db = effective_squeezing(&end.covariance().unwrap()).unwrap().db;
    assert!((db - 7.6).abs() < 0.3, "{db}");
}

#[test]
fn projected_peak_exceeds_sql() {
    let p = FitParams { kerr_ratio: 0.0, ..best_fit() };
    let model = AnalyticForwardModel { design: ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(6.0) } };
    let (_, t_peak) = first_peak(&p, 0.0);
    let nbar = 0.5;
    let t = t_peak - p.t_off_deep;
    let v0 = model.visibility(&p, ScanKind::DeepScan, t, TruncatedNormal::point(0.0)).unwrap();
    let d = VisibilityDatum { t, v_st: squeezed_thermal_visibility(v0, nbar).unwrap(), sigma_v: 0.02, nbar, sigma_nbar: 0.05, scan_kind: ScanKind::DeepScan };
    let proj = thermal_projection(&d, &p, &model).unwrap();
    assert!(proj.v_proj > d.v_st && proj.v_proj > 0.819);
}

#[test]
fn shallow_scan_dips_near_quarter_period() {
    let p = best_fit();
    // read out right after the second quench
    let design = ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: 0.0 };
    let times = linspace(us_to_s(2.0), us_to_s(30.0), 113);
    let eta = LambDicke::rb87(p.omega1).unwrap();
    let v: Vec<f64> = times
        .iter()
        .map(|&t| {
            let seq = scan_sequence(&p, &design, KerrScaling::default(), ScanKind::ShallowScan, t).unwrap();
            run_to_end(&MotionalState::exact(FockDensityMatrix::vacuum(100).unwrap()), &seq).unwrap().visibility(eta).0
        })
        .collect();
    let i = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let effective = times[i] + p.t_off_shallow;
    let quarter = quarter_period(p.omega2());
    assert!((effective / quarter - 1.0).abs() < 0.05, "dip at {} μs, quarter period {} μs", s_to_us(effective), s_to_us(quarter));
}

#[test]
fn best_fit_shear_creates_negative_wigner_regions() {
    let p = reference_truth();
    let seq = scan_sequence(&p, &ScanDesign { fixed_shallow: us_to_s(19.53), fixed_deep: us_to_s(40.0) }, KerrScaling::default(), ScanKind::DeepScan, us_to_s(40.0)).unwrap();
    let end = run_to_end(&MotionalState::exact(FockDensityMatrix::thermal(0.0, 200).unwrap()), &seq).unwrap();
    let MotionalState::Exact { rho, .. } = end else { unreachable!() };
    let axis = linspace(-12.0, 12.0, 161);
    let w = wigner_grid(&rho, &axis, &axis).unwrap();
    assert!(w.min() < 0.0);
}

#[test]
fn frequency_prior_matches_measured_trap() {
    let pr = Priors::default();
    assert_eq!((pr.f1_mean_khz, pr.f1_sd_khz), (37.8, 0.3));
}
