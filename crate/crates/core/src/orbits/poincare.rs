//! Planar Poincaré variables
//!
//! ```text
//! Λ = β √(μ a)        λ = M + ω
//! ξ =  √(2Λ) √(1 − √(1 − e²)) cos ω
//! η = −√(2Λ) √(1 − √(1 − e²)) sin ω
//! ```
//!
//! The pairs `(λ, Λ)` and `(η, ξ)` are canonical (coordinate first).

use serde::{Deserialize, Serialize};

use super::{kepler::wrap_angle, state_from_elements, OrbitalElements, Vec3};
use crate::error::{Error, Result};
use crate::pseries::PhasePoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareVars {
    pub big_lambda: [f64; 3],
    pub lambda: [f64; 3],
    pub xi: [f64; 3],
    pub eta: [f64; 3],
}

impl PoincareVars {
    /// Phase point in the translated actions `L = Λ − Λ*`.
    pub fn to_phase_point(&self, lambda_star: &[f64; 3]) -> PhasePoint {
        PhasePoint {
            l: std::array::from_fn(|j| self.big_lambda[j] - lambda_star[j]),
            lambda: self.lambda,
            xi: self.xi,
            eta: self.eta,
        }
    }

    pub fn from_phase_point(p: &PhasePoint, lambda_star: &[f64; 3]) -> Self {
        PoincareVars {
            big_lambda: std::array::from_fn(|j| lambda_star[j] + p.l[j]),
            lambda: p.lambda,
            xi: p.xi,
            eta: p.eta,
        }
    }
}

fn beta_mu(m0: f64, mj: f64) -> (f64, f64) {
    (m0 * mj / (m0 + mj), m0 + mj)
}

/// `Λ = β√(μa)`.
pub fn big_lambda_from_a(a: f64, m0: f64, mj: f64) -> f64 {
    let (beta, mu) = beta_mu(m0, mj);
    beta * (mu * a).sqrt()
}

/// Inverse of [`big_lambda_from_a`].
pub fn a_from_big_lambda(big_lambda: f64, m0: f64, mj: f64) -> f64 {
    let (beta, mu) = beta_mu(m0, mj);
    (big_lambda / beta).powi(2) / mu
}

pub fn poincare_from_elements(els: &[OrbitalElements; 3], m0: f64, masses: &[f64; 3]) -> Result<PoincareVars> {
    let mut out = PoincareVars {
        big_lambda: [0.0; 3],
        lambda: [0.0; 3],
        xi: [0.0; 3],
        eta: [0.0; 3],
    };
    for j in 0..3 {
        let el = &els[j];
        el.validate()?;
        if el.inclination.is_some_and(|i| i != 0.0) {
            return Err(Error::Precondition("Poincaré map requires planar elements".into()));
        }
        let bl = big_lambda_from_a(el.a, m0, masses[j]);
        // 1 − √(1 − e²) written without cancellation.
        let e2 = el.e * el.e;
        let g = e2 / (1.0 + (1.0 - e2).sqrt());
        let amp = (2.0 * bl * g).sqrt();
        out.big_lambda[j] = bl;
        out.lambda[j] = wrap_angle(el.mean_anomaly + el.omega);
        out.xi[j] = amp * el.omega.cos();
        out.eta[j] = -amp * el.omega.sin();
    }
    Ok(out)
}

pub fn elements_from_poincare(pv: &PoincareVars, m0: f64, masses: &[f64; 3]) -> Result<[OrbitalElements; 3]> {
    let mut out = Vec::with_capacity(3);
    for j in 0..3 {
        let bl = pv.big_lambda[j];
        if !(bl > 0.0) {
            return Err(Error::InvalidOrbit(format!("Λ_{} = {bl} not positive", j + 1)));
        }
        let gamma = 0.5 * (pv.xi[j].powi(2) + pv.eta[j].powi(2));
        let q = gamma / bl; // 1 − √(1 − e²)
        if q >= 1.0 {
            return Err(Error::InvalidOrbit(format!("planet {} has e ≥ 1", j + 1)));
        }
        let e = (q * (2.0 - q)).sqrt();
        let omega = if gamma > 0.0 {
            wrap_angle((-pv.eta[j]).atan2(pv.xi[j]))
        } else {
            0.0
        };
        out.push(OrbitalElements::planar(
            a_from_big_lambda(bl, m0, masses[j]),
            e,
            wrap_angle(pv.lambda[j] - omega),
            omega,
        ));
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

/// Heliocentric planar positions and canonical momenta of the planets.
pub fn cartesian_from_poincare(
    pv: &PoincareVars,
    m0: f64,
    masses: &[f64; 3],
) -> Result<([Vec3; 3], [Vec3; 3])> {
    let els = elements_from_poincare(pv, m0, masses)?;
    let mut r = [[0.0; 3]; 3];
    let mut p = [[0.0; 3]; 3];
    for j in 0..3 {
        let (beta, mu) = beta_mu(m0, masses[j]);
        let (rj, vj) = state_from_elements(&els[j], mu)?;
        r[j] = rj;
        p[j] = vj.map(|x| beta * x);
    }
    Ok((r, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{planet_masses, SUN_MASS};

    #[test]
    fn circular_orbit_has_zero_secular_variables() {
        let els = [
            OrbitalElements::planar(5.2, 0.0, 1.0, 0.4),
            OrbitalElements::planar(9.5, 0.0, 2.0, 0.5),
            OrbitalElements::planar(19.2, 0.0, 3.0, 0.6),
        ];
        let pv = poincare_from_elements(&els, SUN_MASS, &planet_masses()).unwrap();
        assert_eq!(pv.xi, [0.0; 3]);
        assert!(pv.eta.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_hyperbolic() {
        let mut els = [
            OrbitalElements::planar(5.2, 0.1, 1.0, 0.4),
            OrbitalElements::planar(9.5, 0.1, 2.0, 0.5),
            OrbitalElements::planar(19.2, 0.1, 3.0, 0.6),
        ];
        els[1].e = 1.0;
        assert!(poincare_from_elements(&els, SUN_MASS, &planet_masses()).is_err());
    }

    #[test]
    fn amplitude_tends_to_eccentricity() {
        let m = planet_masses();
        for &e in &[1e-2, 1e-3, 1e-4] {
            let els = [
                OrbitalElements::planar(5.2, e, 1.0, 0.4),
                OrbitalElements::planar(9.5, e, 2.0, 0.5),
                OrbitalElements::planar(19.2, e, 3.0, 0.6),
            ];
            let pv = poincare_from_elements(&els, SUN_MASS, &m).unwrap();
            let ratio = (pv.xi[0].powi(2) + pv.eta[0].powi(2)).sqrt() / (e * pv.big_lambda[0].sqrt());
            assert!((ratio - 1.0).abs() < e * e);
        }
    }
}
