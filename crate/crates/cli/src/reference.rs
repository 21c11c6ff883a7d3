//! Reference values used in reports.

/// Secular frequencies, rad/yr.
pub const REF_OMEGA: [f64; 3] = [-1.1212724892e-4, -1.9688444678e-5, -1.1134564418e-5];

/// Initial point in the diagonal coordinates.
pub const REF_X: [f64; 3] = [1.5407573458e-2, -3.0574059274e-2, 1.1186486403e-2];
pub const REF_Y: [f64; 3] = [-2.5320810665e-2, -5.2728862107e-3, 6.0669645406e-3];

/// Term count of the second-order Hamiltonian at degree 18, trig 16.
pub const FULL_O2_TERMS: usize = 94_109_751;

pub const T_AT_UNIT_RHO: f64 = 1e7;
pub const RHO_AT_5E9: f64 = 0.7;
pub const R_OPT_FULL: usize = 16;
