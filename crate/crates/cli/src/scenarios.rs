//! Scenario bodies. Each writes its artifacts into the output directory and
//! returns the relative names of the files it produced plus a summary.

use crate::config::*;
use crate::plot::{emit_plot, Histogram, LinePlot, PlotData, Series};
use crate::CliError;
use num_complex::Complex64;
use serde_json::{json, Value};
use slitsim::fock::{wigner_grid, FockDensityMatrix};
use slitsim::inference::mcmc::McmcConfig;
use slitsim::inference::model::{AnalyticForwardModel, FitParams, TwaForwardModel, TwaLikelihood, VisibilityModel};
use slitsim::inference::synthetic::{synthetic_dataset, SyntheticConfig};
use slitsim::inference::*;
use slitsim::numeric::{derive_seed, linspace};
use slitsim::phase_space::{apply_squeeze, thermal_state};
use slitsim::protocol::*;
use slitsim::tomography::*;
use slitsim::units::s_to_us;
use slitsim::{LambDicke, MotionalState, TrajectoryEnsemble, WignerGrid};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub struct Outcome {
    pub files: Vec<String>,
    pub summary: Value,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Out<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.files.push(name.into());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.files.push(name.into());
        std::fs::write(self.dir.join(name), body)?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    fn plot(&mut self, name: &str, data: &PlotData) -> Result<(), CliError> {
        emit_plot(data, &self.dir.join(name))?;
        self.files.push(name.into());
        Ok(())
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(&config.out)?;
    let mut out = Out { dir: &config.out, files: Vec::new() };
    let summary = match &config.settings {
        Settings::VisibilityScan(s) => visibility_scan(s, config.seed, &mut out)?,
        Settings::TwaValidate(s) => twa_validate(s, config.seed, &mut out)?,
        Settings::Fit(s) => fit(s, config.seed, &mut out)?,
        Settings::Project(s) => project(s, config.seed, &mut out)?,
        Settings::Tomography(s) => tomography(s, config.seed, &mut out)?,
        Settings::Scattering(s) => scattering(s, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    Ok(Outcome { files: out.files, summary })
}

fn eta_for(physics: &Physics) -> Result<LambDicke, CliError> {
    Ok(match physics.eta {
        Some(e) => LambDicke::new(e)?,
        None => LambDicke::rb87(physics.params.omega1)?,
    })
}

fn sequence(p: &FitParams, scaling: KerrScaling, shallow: f64, deep: f64) -> Result<ProtocolSequence, CliError> {
    let offsets = DurationOffsets { shallow: p.t_off_shallow, deep: p.t_off_deep };
    Ok(qeq_sequence(p.omega1, p.omega2(), shallow, deep, offsets)?.with_kerr(p.kerr_ratio, scaling))
}

fn visibility_scan(s: &ScanSettings, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let p = &s.physics.params;
    let eta = eta_for(&s.physics)?;
    let seq = sequence(p, s.physics.kerr_scaling, s.shallow, s.deep_max)?;
    let thermal = thermal_state(s.nbar)?;
    let initial = match s.backend {
        Backend::Analytic => MotionalState::Analytic(thermal),
        Backend::Exact => MotionalState::exact(FockDensityMatrix::thermal(s.nbar, s.dim)?),
        Backend::Twa => MotionalState::trajectories(TrajectoryEnsemble::sample(&thermal, s.n_trajectories, derive_seed(seed, "visibility-scan"))?),
    };
    let start = seq.boundaries()[2];
    let times = linspace(start, seq.span(), s.points.max(2));
    let trace = run_protocol(&initial, &seq, eta, &times)?;
    let mut csv = String::from("dt_us,t_us,V,alpha_rad,stderr\n");
    for i in 0..trace.len() {
        let _ = writeln!(csv, "{:.6},{:.6},{:.12e},{:.12e},{:.6e}", s_to_us(trace.times[i] - start), s_to_us(trace.times[i]), trace.v[i], trace.alpha[i], trace.stderr[i]);
    }
    out.text("visibility.csv", &csv)?;
    let dt: Vec<f64> = trace.times.iter().map(|t| s_to_us(t - start)).collect();
    let series = vec![Series { label: format!("{:?} backend, n̄ = {}", s.backend, s.nbar), x: dt, y: trace.v.clone(), dashed: false }];
    out.plot("visibility.svg", &PlotData::Lines(LinePlot::visibility("Visibility after the second quench", "deep-trap time Δt (μs)", series, eta.sql_visibility())))?;

    let (i_peak, v_peak) = trace.peak().expect("non-empty trace");
    let to_quench = FitParams { t_off_deep: 0.0, ..*p };
    let at_quench = run_to_end(&initial, &sequence(&to_quench, s.physics.kerr_scaling, s.shallow, 0.0)?)?;
    let squeezing = effective_squeezing(&at_quench.covariance()?)?;
    Ok(json!({
        "scenario": "visibility-scan",
        "eta": eta.value(),
        "v_sql": eta.sql_visibility(),
        "peak_visibility": v_peak,
        "peak_dt_us": s_to_us(trace.times[i_peak] - start),
        "squeezing_db": squeezing.db,
        "squeezing_s_eff": squeezing.s_eff,
        "points": trace.len(),
    }))
}

fn twa_validate(s: &TwaSettings, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let eta = LambDicke::new(s.eta)?;
    let kerr = s.kerr_ratio * s.omega;
    let rho = slitsim::fock::fock_squeezed_thermal(s.nbar, s.squeeze, 0.0, s.dim)?;
    let ens = TrajectoryEnsemble::sample(&apply_squeeze(&thermal_state(s.nbar)?, s.squeeze, 0.0), s.n_trajectories, derive_seed(seed, "twa-validate"))?;
    let t_end = s.periods * 2.0 * std::f64::consts::PI / s.omega;
    let times = linspace(0.0, t_end, s.points.max(2));
    let rows: Vec<(f64, f64, f64, f64)> = times
        .iter()
        .map(|&t| {
            let exact = rho.evolve_kerr_diagonal(s.omega, kerr, t).visibility(eta).v;
            let twa = ens.evolve(s.omega, kerr, t, s.flow)?.visibility(eta);
            Ok((t, exact, twa.v, twa.stderr))
        })
        .collect::<Result<_, slitsim::Error>>()?;
    let mut csv = String::from("t,V_exact,V_twa,stderr,residual\n");
    for (t, e, v, se) in &rows {
        let _ = writeln!(csv, "{t:.6},{e:.12e},{v:.12e},{se:.6e},{:.12e}", e - v);
    }
    out.text("twa_validation.csv", &csv)?;
    let max_residual = rows.iter().fold(0.0f64, |a, r| a.max((r.1 - r.2).abs()));
    let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let series = vec![
        Series { label: "exact (Fock)".into(), x: t.clone(), y: rows.iter().map(|r| r.1).collect(), dashed: false },
        Series { label: "TWA".into(), x: t.clone(), y: rows.iter().map(|r| r.2).collect(), dashed: true },
    ];
    out.plot("twa_validation.svg", &PlotData::Lines(LinePlot::visibility("TWA against the Fock oracle", "t", series, eta.sql_visibility())))?;
    let residual = LinePlot {
        title: "Residual V_exact − V_TWA".into(),
        x_label: "t".into(),
        y_label: "ΔV".into(),
        series: vec![Series { label: "ΔV".into(), x: t, y: rows.iter().map(|r| r.1 - r.2).collect(), dashed: false }],
        y_range: Some((-0.05, 0.05)),
        references: vec![(0.03, "+0.03".into()), (-0.03, "−0.03".into())],
    };
    out.plot("twa_residual.svg", &PlotData::Lines(residual))?;
    Ok(json!({
        "scenario": "twa-validate",
        "max_abs_residual": max_residual,
        "min_exact_visibility": rows.iter().fold(1.0f64, |a, r| a.min(r.1)),
        "n_trajectories": s.n_trajectories,
        "points": rows.len(),
    }))
}

const PARAM_LABELS: [&str; 5] = ["S1", "K/ω1", "t_off_ΔT (μs)", "t_off_Δt (μs)", "f1 (kHz)"];


fn fit(s: &FitSettings, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let (data, truth) = match &s.data {
        FitData::File(path) => (read_dataset(File::open(path)?)?, None),
        FitData::Synthetic { truth, settings: y } => {
            let cfg = SyntheticConfig {
                truth: truth.params,
                design: s.design,
                points_per_scan: y.points_per_scan,
                t_min: y.t_min,
                t_max: y.t_max,
                sigma_v: y.sigma_v,
                nbar_min: y.nbar_min,
                nbar_max: y.nbar_max,
                sigma_nbar: y.sigma_nbar,
                n_trajectories: y.n_trajectories,
                kerr_scaling: truth.kerr_scaling,
            };
            (synthetic_dataset(&cfg, derive_seed(seed, "data"))?, Some(truth.params))
        }
    };
    write_dataset(&data, out.create("data.csv")?)?;
    let forward = ForwardConfig { n_trajectories: s.n_trajectories, seed: 0, design: s.design, kerr_scaling: s.kerr_scaling };
    let mc = McmcConfig { n_walkers: s.n_walkers, n_steps: s.n_steps, seed: derive_seed(seed, "mcmc"), forward, start: s.start, map_evals: s.map_evals };
    let post = run_mcmc(&data, &s.priors, &mc)?;
    post.write_chain_csv(out.create("chain.csv")?)?;
    let corner = post.corner_json(30, 20);
    out.json("corner.json", &corner)?;

    let panels = corner["hist1d"]
        .as_array()
        .map(|a| {
            a.iter()
                .enumerate()
                .map(|(d, h)| {
                    let range = [h["range"][0].as_f64().unwrap_or(0.0), h["range"][1].as_f64().unwrap_or(1.0)];
                    let counts: Vec<f64> = h["counts"].as_array().map(|c| c.iter().map(|v| v.as_f64().unwrap_or(0.0)).collect()).unwrap_or_default();
                    let edges = linspace(range[0], range[1], counts.len() + 1);
                    Histogram { label: PARAM_LABELS.get(d).copied().unwrap_or("θ").to_string(), edges, counts }
                })
                .collect()
        })
        .unwrap_or_default();
    out.plot("corner.svg", &PlotData::Histograms { title: "Posterior marginals".into(), panels })?;

    let medians = post.median_params();
    let model = TwaLikelihood::new(TwaForwardModel::new(ForwardConfig { seed: derive_seed(mc.seed, "crn"), ..forward })?, data.clone())?;
    let predicted = model.predictions(&medians)?;
    let mut series = Vec::new();
    for scan in [ScanKind::ShallowScan, ScanKind::DeepScan] {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].scan_kind == scan).collect();
        if idx.is_empty() {
            continue;
        }
        let x: Vec<f64> = idx.iter().map(|&i| s_to_us(data[i].t)).collect();
        series.push(Series { label: format!("{} data", scan.as_str()), x: x.clone(), y: idx.iter().map(|&i| data[i].v_st).collect(), dashed: true });
        series.push(Series { label: format!("{} posterior median", scan.as_str()), x, y: idx.iter().map(|&i| predicted[i]).collect(), dashed: false });
    }
    let sql = LambDicke::rb87(medians.omega1)?.sql_visibility();
    out.plot("fit.svg", &PlotData::Lines(LinePlot::visibility("Scans and posterior-median model", "scanned duration (μs)", series, sql)))?;

    let summary = post.summary();
    let mut params = serde_json::Map::new();
    for (d, name) in post.names.iter().enumerate() {
        let sm = &summary[d];
        let mut entry = json!({ "median": sm.median, "p16": sm.p16, "p84": sm.p84, "sigma": sm.sigma() });
        if let Some(t) = truth {
            let tv = t.to_vector()[d];
            entry["truth"] = json!(tv);
            entry["z"] = json!((sm.median - tv) / sm.sigma());
        }
        params.insert(name.clone(), entry);
    }
    Ok(json!({
        "scenario": "fit",
        "parameters": params,
        "diagnostics": post.diagnostics,
        "n_data": data.len(),
        "n_trajectories": s.n_trajectories,
    }))
}

fn project(s: &ProjectSettings, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let data = read_dataset(File::open(&s.data)?)?;
    let p = &s.physics.params;
    let model: Box<dyn VisibilityModel> = if p.kerr_ratio == 0.0 {
        Box::new(AnalyticForwardModel { design: s.design })
    } else {
        Box::new(TwaForwardModel::new(ForwardConfig { n_trajectories: s.n_trajectories, seed: derive_seed(seed, "project"), design: s.design, kerr_scaling: s.physics.kerr_scaling })?)
    };
    let mut csv = String::from("scan,t_us,nbar,V_st,gamma,V_proj,sigma,status\n");
    let (mut skipped, mut rows) = (0usize, Vec::new());
    for d in &data {
        // a noisy point at or below zero has no power-law projection
        if d.v_st <= 0.0 {
            skipped += 1;
            let _ = writeln!(csv, "{},{:.6},{:.6},{:.12e},,,,nonpositive", d.scan_kind.as_str(), s_to_us(d.t), d.nbar, d.v_st);
            continue;
        }
        match thermal_projection(d, p, model.as_ref()) {
            Ok(pr) => {
                let _ = writeln!(csv, "{},{:.6},{:.6},{:.12e},{:.12e},{:.12e},{:.6e},ok", d.scan_kind.as_str(), s_to_us(d.t), d.nbar, d.v_st, pr.gamma, pr.v_proj, pr.sigma);
                rows.push((d.scan_kind, s_to_us(d.t), d.v_st, pr.v_proj));
            }
            Err(slitsim::Error::NodeRegion { .. }) => {
                skipped += 1;
                let _ = writeln!(csv, "{},{:.6},{:.6},{:.12e},,,,node", d.scan_kind.as_str(), s_to_us(d.t), d.nbar, d.v_st);
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.text("projected.csv", &csv)?;
    let mut series = Vec::new();
    for scan in [ScanKind::ShallowScan, ScanKind::DeepScan] {
        let pts: Vec<_> = rows.iter().filter(|r| r.0 == scan).collect();
        if pts.is_empty() {
            continue;
        }
        series.push(Series { label: format!("{} measured", scan.as_str()), x: pts.iter().map(|r| r.1).collect(), y: pts.iter().map(|r| r.2).collect(), dashed: true });
        series.push(Series { label: format!("{} projected to n̄ = 0", scan.as_str()), x: pts.iter().map(|r| r.1).collect(), y: pts.iter().map(|r| r.3).collect(), dashed: false });
    }
    let eta = eta_for(&s.physics)?;
    out.plot("projected.svg", &PlotData::Lines(LinePlot::visibility("Zero-temperature projection", "scanned duration (μs)", series, eta.sql_visibility())))?;
    Ok(json!({
        "scenario": "project",
        "projected": rows.len(),
        "skipped": skipped,
        "max_projected": rows.iter().fold(0.0f64, |a, r| a.max(r.3)),
        "v_sql": eta.sql_visibility(),
    }))
}

pub fn target_state(target: Target, dim: usize) -> Result<FockDensityMatrix, slitsim::Error> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match target {
        Target::Vacuum => FockDensityMatrix::vacuum(dim),
        Target::Fock1 => FockDensityMatrix::number_state(1, dim),
        Target::Superposition => FockDensityMatrix::pure(&[Complex64::new(h, 0.0), Complex64::new(h, 0.0)], dim),
    }
}

fn write_grid(out: &mut Out, name: &str, grid: &WignerGrid) -> Result<(), CliError> {
    grid.write_csv(out.create(name)?)?;
    Ok(())
}

fn tomography(s: &TomographySettings, seed: u64, out: &mut Out) -> Result<Value, CliError> {
    let target = target_state(s.target, s.dim)?;
    let plan = TomographyPlan::annulus(LambDicke::new(s.eta)?, s.r, s.omega, s.n_shells, s.n_angles, s.shots)?;
    let samples = measure_plan(&target, &plan, derive_seed(seed, "tomography"))?;
    write_samples(&samples, out.create("samples.csv")?)?;
    let rec = reconstruct_wigner(&samples, &s.grid)?;
    let axis = s.grid.x_axis();
    let truth = wigner_grid(&target, &axis, &axis)?;
    let fid = reconstruction_fidelity(&rec.grid, &truth)?;
    write_grid(out, "wigner_reconstructed.csv", &rec.grid)?;
    write_grid(out, "wigner_true.csv", &truth)?;
    out.plot("wigner_reconstructed.svg", &PlotData::Heatmap { title: "Reconstructed W(q, p)".into(), grid: rec.grid.clone() })?;
    out.plot("wigner_true.svg", &PlotData::Heatmap { title: "Target W(q, p)".into(), grid: truth })?;
    let (k_lo, k_hi) = plan.annulus_bounds();
    Ok(json!({
        "scenario": "tomography",
        "annulus": [k_lo, k_hi],
        "samples": samples.len(),
        "l2_error": fid.l2_error,
        "overlap": fid.overlap,
        "min_reconstructed": fid.min_values.0,
        "min_true": fid.min_values.1,
        "hermitian_deviation": rec.hermitian_deviation,
        "imaginary_residue": rec.imaginary_residue,
    }))
}

fn scattering(s: &ScatteringSettings, out: &mut Out) -> Result<Value, CliError> {
    let b = scattering_budget(s.depth_mk, s.wavelength_nm, s.duration)?;
    out.text("scattering.csv", &format!("depth_mk,wavelength_nm,duration_us,rate_per_s,probability\n{},{},{},{:.12e},{:.12e}\n", s.depth_mk, s.wavelength_nm, s_to_us(s.duration), b.rate, b.probability))?;
    Ok(json!({
        "scenario": "scattering",
        "depth_mk": s.depth_mk,
        "wavelength_nm": s.wavelength_nm,
        "duration_us": s_to_us(s.duration),
        "rate_per_s": b.rate,
        "probability": b.probability,
    }))
}
