//! TOML run configuration. Validation collects every problem before failing.

use clap::ValueEnum;
use serde::Serialize;
use slitsim::inference::model::{FitParams, ScanDesign};
use slitsim::inference::Priors;
use slitsim::tomography::{GridSpec, Taper};
use slitsim::units::{khz_to_angular, us_to_s};
use slitsim::{ClassicalFlow, KerrScaling};
use std::fmt;
use std::path::{Path, PathBuf};
use toml::{Table, Value};

/// Trajectory count cap under `--fast`.
pub const FAST_TRAJECTORIES: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    VisibilityScan,
    TwaValidate,
    Fit,
    Project,
    Tomography,
    Scattering,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::VisibilityScan => "visibility-scan",
            Scenario::TwaValidate => "twa-validate",
            Scenario::Fit => "fit",
            Scenario::Project => "project",
            Scenario::Tomography => "tomography",
            Scenario::Scattering => "scattering",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConfigError {
    pub missing: Vec<String>,
    pub invalid: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration")?;
        if !self.missing.is_empty() {
            write!(f, "; missing: {}", self.missing.join(", "))?;
        }
        if !self.invalid.is_empty() {
            write!(f, "; invalid: {}", self.invalid.join("; "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that override or complete the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fast: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Analytic,
    Exact,
    Twa,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Physics {
    pub params: FitParams,
    pub eta: Option<f64>,
    pub kerr_scaling: KerrScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSettings {
    pub physics: Physics,
    pub shallow: f64,
    pub deep_max: f64,
    pub points: usize,
    pub nbar: f64,
    pub backend: Backend,
    pub dim: usize,
    pub n_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwaSettings {
    pub nbar: f64,
    pub squeeze: f64,
    pub kerr_ratio: f64,
    pub omega: f64,
    pub periods: f64,
    pub points: usize,
    pub eta: f64,
    pub dim: usize,
    pub n_trajectories: usize,
    pub flow: ClassicalFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSettings {
    pub points_per_scan: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub sigma_v: f64,
    pub nbar_min: f64,
    pub nbar_max: f64,
    pub sigma_nbar: f64,
    pub n_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FitData {
    File(PathBuf),
    Synthetic { truth: Physics, settings: SyntheticSettings },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSettings {
    pub data: FitData,
    pub design: ScanDesign,
    pub kerr_scaling: KerrScaling,
    pub n_walkers: usize,
    pub n_steps: usize,
    pub n_trajectories: usize,
    pub map_evals: usize,
    pub start: FitParams,
    pub priors: Priors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectSettings {
    pub physics: Physics,
    pub data: PathBuf,
    pub design: ScanDesign,
    pub n_trajectories: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Vacuum,
    Fock1,
    Superposition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographySettings {
    pub target: Target,
    pub eta: f64,
    pub r: f64,
    pub omega: f64,
    pub n_shells: usize,
    pub n_angles: usize,
    pub shots: u64,
    pub dim: usize,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringSettings {
    pub depth_mk: f64,
    pub wavelength_nm: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Settings {
    VisibilityScan(ScanSettings),
    TwaValidate(TwaSettings),
    Fit(FitSettings),
    Project(ProjectSettings),
    Tomography(TomographySettings),
    Scattering(ScatteringSettings),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub out: PathBuf,
    pub fast: bool,
    pub settings: Settings,
}

impl RunConfig {
    pub fn from_file(scenario: Scenario, path: &Path, overrides: Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError { missing: vec![], invalid: vec![format!("{}: {e}", path.display())] })?;
        let mut cfg = Self::from_toml_str(scenario, &text, overrides)?;
        // relative data paths resolve against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.settings {
            Settings::Fit(FitSettings { data: FitData::File(p), .. }) => fix(p),
            Settings::Project(s) => fix(&mut s.data),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn from_toml_str(scenario: Scenario, text: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError { missing: vec![], invalid: vec![format!("TOML: {}", e.message())] })?;
        let mut r = Reader { root: &table, err: ConfigError::default() };
        let seed = match overrides.seed {
            Some(s) => s,
            None => r.u64_req("", "seed"),
        };
        let out = match overrides.out {
            Some(p) => p,
            None => PathBuf::from(r.string_req("", "out")),
        };
        let fast = overrides.fast || r.bool_or("", "fast", false);
        let cap = |n: usize| if fast { n.min(FAST_TRAJECTORIES) } else { n };
        let settings = match scenario {
            Scenario::VisibilityScan => {
                let physics = r.physics();
                let s = "visibility_scan";
                Settings::VisibilityScan(ScanSettings {
                    physics,
                    shallow: us_to_s(r.f64_req(s, "shallow_us")),
                    deep_max: us_to_s(r.f64_req(s, "deep_max_us")),
                    points: r.usize_req(s, "points"),
                    nbar: r.f64_req(s, "nbar"),
                    backend: r.choice(s, "backend", &[("analytic", Backend::Analytic), ("exact", Backend::Exact), ("twa", Backend::Twa)], Some(Backend::Exact)),
                    dim: r.usize_or(s, "dim", 200),
                    n_trajectories: cap(r.usize_or(s, "n_trajectories", 20_000)),
                })
            }
            Scenario::TwaValidate => {
                let s = "twa_validate";
                Settings::TwaValidate(TwaSettings {
                    nbar: r.f64_req(s, "nbar"),
                    squeeze: r.f64_req(s, "squeeze"),
                    kerr_ratio: r.f64_req(s, "kerr_ratio"),
                    omega: r.f64_req(s, "omega"),
                    periods: r.f64_req(s, "periods"),
                    points: r.usize_req(s, "points"),
                    eta: r.f64_or(s, "eta", 0.316),
                    dim: r.usize_or(s, "dim", 200),
                    n_trajectories: cap(r.usize_or(s, "n_trajectories", 100_000)),
                    flow: r.choice(s, "flow", &[("kerr_number", ClassicalFlow::KerrNumber), ("quartic", ClassicalFlow::quartic())], Some(ClassicalFlow::KerrNumber)),
                })
            }
            Scenario::Fit => {
                let s = "fit";
                let kerr_scaling = r.kerr_scaling(s);
                let data = match r.string_opt(s, "data") {
                    Some(p) => FitData::File(PathBuf::from(p)),
                    None => {
                        let truth = r.physics();
                        let y = "synthetic";
                        FitData::Synthetic {
                            truth,
                            settings: SyntheticSettings {
                                points_per_scan: r.usize_req(y, "points_per_scan"),
                                t_min: us_to_s(r.f64_req(y, "t_min_us")),
                                t_max: us_to_s(r.f64_req(y, "t_max_us")),
                                sigma_v: r.f64_req(y, "sigma_v"),
                                nbar_min: r.f64_req(y, "nbar_min"),
                                nbar_max: r.f64_req(y, "nbar_max"),
                                sigma_nbar: r.f64_req(y, "sigma_nbar"),
                                n_trajectories: cap(r.usize_or(y, "n_trajectories", 50_000)),
                            },
                        }
                    }
                };
                let start = FitParams {
                    s1: r.f64_or("fit.start", "s1", 0.54),
                    kerr_ratio: r.f64_or("fit.start", "kerr_ratio", -0.01),
                    t_off_shallow: us_to_s(r.f64_or("fit.start", "t_off_shallow_us", 0.0)),
                    t_off_deep: us_to_s(r.f64_or("fit.start", "t_off_deep_us", 0.0)),
                    omega1: khz_to_angular(r.f64_or("fit.start", "f1_khz", 37.8)),
                };
                let d = Priors::default();
                let priors = Priors {
                    f1_mean_khz: r.f64_or("fit.priors", "f1_mean_khz", d.f1_mean_khz),
                    f1_sd_khz: r.f64_or("fit.priors", "f1_sd_khz", d.f1_sd_khz),
                    s1_max: r.f64_or("fit.priors", "s1_max", d.s1_max),
                    kerr_min: r.f64_or("fit.priors", "kerr_min", d.kerr_min),
                    kerr_max: r.f64_or("fit.priors", "kerr_max", d.kerr_max),
                    offset_min_us: r.f64_or("fit.priors", "offset_min_us", d.offset_min_us),
                    offset_max_us: r.f64_or("fit.priors", "offset_max_us", d.offset_max_us),
                };
                Settings::Fit(FitSettings {
                    data,
                    design: r.design(s),
                    kerr_scaling,
                    n_walkers: r.usize_req(s, "n_walkers"),
                    n_steps: r.usize_req(s, "n_steps"),
                    n_trajectories: cap(r.usize_req(s, "n_trajectories")),
                    map_evals: r.usize_or(s, "map_evals", 1000),
                    start,
                    priors,
                })
            }
            Scenario::Project => {
                let physics = r.physics();
                let s = "project";
                Settings::Project(ProjectSettings {
                    physics,
                    data: PathBuf::from(r.string_req(s, "data")),
                    design: r.design(s),
                    n_trajectories: cap(r.usize_or(s, "n_trajectories", 20_000)),
                })
            }
            Scenario::Tomography => {
                let s = "tomography";
                let d = GridSpec::default();
                let taper = match r.f64_opt(s, "taper") {
                    Some(f) => Taper::Cosine(f),
                    None => Taper::None,
                };
                Settings::Tomography(TomographySettings {
                    target: r.choice(s, "target", &[("vacuum", Target::Vacuum), ("fock1", Target::Fock1), ("superposition", Target::Superposition)], None),
                    eta: r.f64_req(s, "eta"),
                    r: r.f64_req(s, "r"),
                    omega: r.f64_or(s, "omega", 1.0),
                    n_shells: r.usize_req(s, "n_shells"),
                    n_angles: r.usize_req(s, "n_angles"),
                    shots: r.u64_req(s, "shots"),
                    dim: r.usize_or(s, "dim", 200),
                    grid: GridSpec { n: r.usize_or(s, "grid_n", d.n), x_max: r.f64_or(s, "x_max", d.x_max), taper },
                })
            }
            Scenario::Scattering => {
                let s = "scattering";
                Settings::Scattering(ScatteringSettings {
                    depth_mk: r.f64_req(s, "depth_mk"),
                    wavelength_nm: r.f64_req(s, "wavelength_nm"),
                    duration: us_to_s(r.f64_req(s, "duration_us")),
                })
            }
        };
        if r.err.missing.is_empty() && r.err.invalid.is_empty() {
            Ok(RunConfig { scenario, seed, out, fast, settings })
        } else {
            Err(r.err)
        }
    }
}

struct Reader<'a> {
    root: &'a Table,
    err: ConfigError,
}

fn key_name(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Reader<'_> {
    fn get(&mut self, section: &str, key: &str) -> Option<&Value> {
        let mut table = self.root;
        for part in section.split('.').filter(|s| !s.is_empty()) {
            match table.get(part) {
                Some(Value::Table(t)) => table = t,
                Some(_) => {
                    self.err.invalid.push(format!("{section}: expected a table"));
                    return None;
                }
                None => return None,
            }
        }
        table.get(key)
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = match self.get(section, key)? {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            other => {
                let msg = format!("{}: expected a number, got {}", key_name(section, key), other.type_str());
                self.err.invalid.push(msg);
                return None;
            }
        };
        if !v.is_finite() {
            self.err.invalid.push(format!("{}: must be finite", key_name(section, key)));
        }
        Some(v)
    }

    fn f64_req(&mut self, section: &str, key: &str) -> f64 {
        let present = self.get(section, key).is_some();
        match self.f64_opt(section, key) {
            Some(v) => v,
            None => {
                if !present {
                    self.err.missing.push(key_name(section, key));
                }
                0.0
            }
        }
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.f64_opt(section, key).unwrap_or(default)
    }

    fn u64_opt(&mut self, section: &str, key: &str) -> Option<u64> {
        match self.get(section, key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.err.invalid.push(format!("{}: expected a non-negative integer", key_name(section, key)));
                None
            }
        }
    }

    fn u64_req(&mut self, section: &str, key: &str) -> u64 {
        if self.get(section, key).is_none() {
            self.err.missing.push(key_name(section, key));
            return 0;
        }
        self.u64_opt(section, key).unwrap_or(0)
    }

    fn usize_req(&mut self, section: &str, key: &str) -> usize {
        self.u64_req(section, key) as usize
    }

    fn usize_or(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.u64_opt(section, key).map_or(default, |v| v as usize)
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.get(section, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err.invalid.push(format!("{}: expected a boolean", key_name(section, key)));
                default
            }
        }
    }

    fn string_opt(&mut self, section: &str, key: &str) -> Option<String> {
        match self.get(section, key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.err.invalid.push(format!("{}: expected a string", key_name(section, key)));
                None
            }
        }
    }

    fn string_req(&mut self, section: &str, key: &str) -> String {
        if self.get(section, key).is_none() {
            self.err.missing.push(key_name(section, key));
            return String::new();
        }
        self.string_opt(section, key).unwrap_or_default()
    }

    fn choice<T: Copy>(&mut self, section: &str, key: &str, options: &[(&str, T)], default: Option<T>) -> T {
        let Some(name) = (match default {
            Some(_) => self.string_opt(section, key),
            None => Some(self.string_req(section, key)).filter(|s| !s.is_empty()),
        }) else {
            return default.unwrap_or(options[0].1);
        };
        match options.iter().find(|(n, _)| *n == name) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                self.err.invalid.push(format!("{}: `{name}` is not one of {}", key_name(section, key), names.join(", ")));
                default.unwrap_or(options[0].1)
            }
        }
    }

    fn kerr_scaling(&mut self, section: &str) -> KerrScaling {
        self.choice(section, "kerr_scaling", &[("fixed_coefficient", KerrScaling::FixedCoefficient), ("frequency_ratio", KerrScaling::FrequencyRatio)], Some(KerrScaling::default()))
    }

    fn physics(&mut self) -> Physics {
        let s = "physics";
        Physics {
            params: FitParams {
                s1: self.f64_req(s, "s1"),
                kerr_ratio: self.f64_req(s, "kerr_ratio"),
                t_off_shallow: us_to_s(self.f64_req(s, "t_off_shallow_us")),
                t_off_deep: us_to_s(self.f64_req(s, "t_off_deep_us")),
                omega1: khz_to_angular(self.f64_req(s, "f1_khz")),
            },
            eta: self.f64_opt(s, "eta"),
            kerr_scaling: self.kerr_scaling(s),
        }
    }

    fn design(&mut self, section: &str) -> ScanDesign {
        ScanDesign { fixed_shallow: us_to_s(self.f64_or(section, "fixed_shallow_us", 19.53)), fixed_deep: us_to_s(self.f64_or(section, "fixed_deep_us", 6.0)) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_everything_missing() {
        let err = RunConfig::from_toml_str(Scenario::VisibilityScan, "", Overrides::default()).unwrap_err();
        for key in ["seed", "out", "physics.s1", "physics.f1_khz", "visibility_scan.points", "visibility_scan.nbar"] {
            assert!(err.missing.iter().any(|m| m == key), "{key} not in {:?}", err.missing);
        }
        assert!(err.invalid.is_empty());
    }

    #[test]
    fn seed_has_no_default() {
        let text = "out = \"x\"\n[scattering]\ndepth_mk = 10.5\nwavelength_nm = 852\nduration_us = 60\n";
        let err = RunConfig::from_toml_str(Scenario::Scattering, text, Overrides::default()).unwrap_err();
        assert_eq!(err.missing, vec!["seed".to_string()]);
        let ok = RunConfig::from_toml_str(Scenario::Scattering, text, Overrides { seed: Some(3), ..Default::default() }).unwrap();
        assert_eq!(ok.seed, 3);
    }

    #[test]
    fn wrong_types_and_choices_are_reported() {
        let text = "seed = 1\nout = \"x\"\n[tomography]\ntarget = \"dog\"\neta = \"big\"\nr = 2\nn_shells = -1\nn_angles = 8\nshots = 10\n";
        let err = RunConfig::from_toml_str(Scenario::Tomography, text, Overrides::default()).unwrap_err();
        assert_eq!(err.invalid.len(), 3, "{:?}", err.invalid);
        assert!(err.missing.is_empty());
    }

    #[test]
    fn fast_caps_trajectories() {
        let text = "seed = 1\nout = \"x\"\nfast = true\n[twa_validate]\nnbar = 1\nsqueeze = -1\nkerr_ratio = -0.01\nomega = 3.14159\nperiods = 5\npoints = 11\n";
        let cfg = RunConfig::from_toml_str(Scenario::TwaValidate, text, Overrides::default()).unwrap();
        let Settings::TwaValidate(s) = cfg.settings else { panic!() };
        assert_eq!(s.n_trajectories, FAST_TRAJECTORIES);
    }
}
