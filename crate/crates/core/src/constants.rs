//! CODATA-2018 physical constants (SI).
//!
//! Since the 2019 SI redefinition `H`, `K_B` and `E_CHARGE` are exact.

use std::f64::consts::PI;

/// Planck constant, J s.
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = H / (2.0 * PI);
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Vacuum magnetic permeability, N/A^2.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum electric permittivity, F/m.
pub const EPS_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;

/// Bohr magneton in frequency units, Hz/T.
pub const MU_B_HZ_PER_T: f64 = MU_B / H;

/// Yttrium cation density of Y2O3, m^-3 (2.66e22 cm^-3).
pub const Y2O3_CATION_DENSITY: f64 = 2.66e28;

/// Named view of the constants, for embedding in reports.
pub const CODATA_2018: [(&str, f64, &str); 6] = [
    ("h", H, "J s"),
    ("hbar", HBAR, "J s"),
    ("mu_b", MU_B, "J/T"),
    ("mu_0", MU_0, "N/A^2"),
    ("k_b", K_B, "J/K"),
    ("eps_0", EPS_0, "F/m"),
];
