//! Unit conventions.
//!
//! Energies and frequencies are wavenumbers (cm^-1), times are femtoseconds,
//! hbar = 1. Internally every time is rescaled by [`ANGULAR_PER_WAVENUMBER`]
//! so that `omega[cm^-1] * tau` is a phase in radians; the rescaled time
//! `tau` has units of cm.

use std::f64::consts::PI;

/// Boltzmann constant in cm^-1 / K.
pub const BOLTZMANN_WAVENUMBER: f64 = 0.695_034_800;

/// Speed of light in cm / fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = 2.997_924_58e-5;

/// rad/fs per cm^-1, i.e. 2 pi c.
pub const ANGULAR_PER_WAVENUMBER: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_PER_FS;

/// Angular frequency (rad/fs) of a wavenumber.
#[inline]
pub fn wavenumber_to_angular(nu: f64) -> f64 {
    nu * ANGULAR_PER_WAVENUMBER
}

#[inline]
pub fn angular_to_wavenumber(omega: f64) -> f64 {
    omega / ANGULAR_PER_WAVENUMBER
}

/// Rescaled time (cm) for a time in fs.
#[inline]
pub fn fs_to_scaled(t_fs: f64) -> f64 {
    t_fs * ANGULAR_PER_WAVENUMBER
}

#[inline]
pub fn scaled_to_fs(tau: f64) -> f64 {
    tau / ANGULAR_PER_WAVENUMBER
}

/// Inverse thermal energy 1/(k_B T) in cm.
pub fn beta_from_kelvin(temperature: f64) -> f64 {
    1.0 / (BOLTZMANN_WAVENUMBER * temperature)
}
