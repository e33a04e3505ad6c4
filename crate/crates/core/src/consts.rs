//! Physical constants in SI units.

use std::f64::consts::PI;

/// ¹³C gyromagnetic ratio, rad s⁻¹ T⁻¹.
pub const GAMMA_C: f64 = 67.2828e6;
/// NV electron gyromagnetic ratio, rad s⁻¹ T⁻¹.
pub const GAMMA_E: f64 = 1.760859e11;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0 * PI * 1e-7;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Diamond lattice constant at 3.7 K, m.
pub const DIAMOND_A0: f64 = 3.5668e-10;
/// ¹³C Larmor frequency used throughout the experiments, Hz.
pub const LARMOR_HZ: f64 = 432_140.0;
/// NV ground-state zero-field splitting, Hz.
pub const ZERO_FIELD_SPLITTING: f64 = 2.87e9;
/// Natural ¹³C abundance.
pub const C13_ABUNDANCE: f64 = 0.011;

pub const TWO_PI: f64 = 2.0 * PI;
