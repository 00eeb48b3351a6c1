//! Physical constants and unit conversions used at API boundaries.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of a ⁸⁷Rb atom in kg.
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;
/// ⁸⁷Rb D1 line, vacuum wavelength in m.
pub const RB87_D1_WAVELENGTH: f64 = 794.978_851e-9;
/// ⁸⁷Rb D2 line, vacuum wavelength in m. Also the interferometer probe wavelength.
pub const RB87_D2_WAVELENGTH: f64 = 780.241_209e-9;
/// Natural linewidth used for the scattering estimate, rad/s.
pub const RB87_LINEWIDTH: f64 = 2.0 * PI * 6.0e6;

pub fn khz_to_angular(f_khz: f64) -> f64 {
    2.0 * PI * f_khz * 1e3
}

pub fn angular_to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e3)
}

pub fn us_to_s(t_us: f64) -> f64 {
    t_us * 1e-6
}

pub fn s_to_us(t_s: f64) -> f64 {
    t_s * 1e6
}

/// Trap depth given as a temperature (mK) to energy in J.
pub fn mk_to_joule(depth_mk: f64) -> f64 {
    depth_mk * 1e-3 * BOLTZMANN
}
