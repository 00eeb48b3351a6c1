//! Fringe fitting, calibration, Bayesian parameter recovery and thermal
//! projection for QEQ visibility scans.

pub mod calibration;
pub mod dataset;
pub mod fringe;
pub mod mcmc;
pub mod model;
pub mod projection;
pub mod synthetic;

pub use calibration::{calibrate_visibility, CalibratedVisibility, Measured};
pub use dataset::{read_dataset, write_dataset, ScanKind, VisibilityDatum};
pub use fringe::{fit_fringe, simulate_fringe, FringeFit, FringeScan, PhasePrior};
pub use mcmc::{run_mcmc, Chain, Diagnostics, EnsembleSampler, McmcConfig, ParamSummary, PosteriorEnsemble};
pub use model::{log_likelihood, FitParams, ForwardConfig, Priors, ScanDesign, TwaForwardModel, TwaLikelihood, VisibilityModel};
pub use projection::{thermal_projection, ThermalProjection};
pub use synthetic::{synthetic_dataset, SyntheticConfig};
