//! Physical constants (CODATA 2018) and cesium D2-line data.

use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// 1 gauss in tesla.
pub const GAUSS: f64 = 1e-4;

pub const CS_MASS: f64 = 132.905_451_961 * ATOMIC_MASS_UNIT;
/// D2 line vacuum wavelength.
pub const CS_D2_WAVELENGTH: f64 = 852.347_275_82e-9;
/// Ground-state hyperfine splitting (defines the SI second).
pub const CS_HYPERFINE_HZ: f64 = 9_192_631_770.0;
/// Natural linewidth of 6P3/2 in free space, 2π × 5.2 MHz.
pub const CS_GAMMA_FREE_SPACE: f64 = 2.0 * PI * 5.2e6;
/// Effective linewidth measured next to the nanofiber, 2π × 6.8 MHz.
pub const CS_GAMMA_NANOFIBER: f64 = 2.0 * PI * 6.8e6;
/// Isotropic-polarization saturation intensity of the D2 line, W/m².
pub const CS_D2_ISAT_ISOTROPIC: f64 = 27.059;
/// |g_F| for both 6S1/2 hyperfine manifolds (F=4: +1/4, F=3: -1/4).
pub const CS_GF_GROUND: f64 = 0.25;
/// Nominal power scattered by one saturated Cs atom on the cycling line, W.
pub const CS_SATURATED_SCATTER_POWER: f64 = 3.8e-12;

/// Refractive index of fused silica at 852 nm (Sellmeier).
pub const SILICA_INDEX_852: f64 = 1.4525;
/// Van der Waals C3 for Cs in front of silica, J·m³ (h × 1.56 kHz·µm³).
pub const CS_SILICA_C3: f64 = PLANCK * 1.56e3 * 1e-18;
/// Length of the uniform nanofiber waist, m.
pub const NANOFIBER_WAIST_LENGTH: f64 = 9e-3;
