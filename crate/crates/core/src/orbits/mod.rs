//! Ephemerides, orbital elements, Poincaré variables and a symplectic
//! N-body integrator for the Sun and three planets.
//!
//! Units: lengths in AU, times in years, `G = 1`, so the solar mass is
//! `(2π)²`. The planets move in canonical heliocentric coordinates: positions
//! relative to the Sun, momenta conjugate to them (barycentric momenta). The
//! osculating elements of planet `j` are those of the Kepler problem with
//! reduced mass `β_j = m₀m_j/(m₀+m_j)` and parameter `μ_j = m₀+m_j`, i.e. they
//! are computed from `(r_j, p_j/β_j)`.

mod ephemeris;
mod kepler;
mod nbody;
mod poincare;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use ephemeris::{
    parse_ephemeris, read_ephemeris, read_trajectory_csv, reference_elements, reference_system,
    write_elements, write_trajectory_csv, Ephemeris, EphemerisFormat,
};
pub use kepler::{elements_from_state, kepler_drift, solve_kepler, state_from_elements, wrap_angle};
pub use nbody::{average_semimajor, integrate_nbody, Sample, Trajectory};
pub(crate) use nbody::hamiltonian;
pub use poincare::{
    a_from_big_lambda, big_lambda_from_a, cartesian_from_poincare, elements_from_poincare,
    poincare_from_elements, PoincareVars,
};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Solar mass in units with `G = 1`, AU and years.
pub const SUN_MASS: f64 = TAU * TAU;

/// Sun-to-planet mass ratios of Jupiter, Saturn and Uranus.
pub const MASS_RATIOS: [f64; 3] = [1047.355, 3498.5, 22902.98];

/// Planet masses of Jupiter, Saturn and Uranus.
pub fn planet_masses() -> [f64; 3] {
    MASS_RATIOS.map(|r| SUN_MASS / r)
}

/// Heliocentric elements of one planet.
///
/// For planar elements `omega` is the perihelion longitude. When `node`
/// and `inclination` are present, `omega` is the argument of perihelion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub a: f64,
    pub e: f64,
    pub mean_anomaly: f64,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclination: Option<f64>,
}

impl OrbitalElements {
    pub fn planar(a: f64, e: f64, mean_anomaly: f64, omega: f64) -> Self {
        OrbitalElements {
            a,
            e,
            mean_anomaly,
            omega,
            node: None,
            inclination: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::InvalidOrbit(format!("semi-major axis {} not positive", self.a)));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Error::InvalidOrbit(format!("eccentricity {} outside [0, 1)", self.e)));
        }
        Ok(())
    }

    /// Mean longitude `M + ω` of planar elements.
    pub fn mean_longitude(&self) -> f64 {
        wrap_angle(self.mean_anomaly + self.omega)
    }
}

/// Folds the node into the perihelion longitude and drops the inclination.
pub fn planarize(el: &OrbitalElements) -> OrbitalElements {
    let omega = match el.node {
        Some(node) => wrap_angle(el.omega + node),
        None => el.omega,
    };
    OrbitalElements::planar(el.a, el.e, el.mean_anomaly, omega)
}

/// Sun and three planets in heliocentric coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanetSystem {
    pub m0: f64,
    pub masses: [f64; 3],
    /// Heliocentric positions.
    pub pos: [Vec3; 3],
    /// Heliocentric velocities.
    pub vel: [Vec3; 3],
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl PlanetSystem {
    pub fn new(m0: f64, masses: [f64; 3], pos: [Vec3; 3], vel: [Vec3; 3]) -> Result<Self> {
        if !(m0 > 0.0) || masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Precondition("masses must be positive".into()));
        }
        let mu = masses.iter().fold(0.0f64, |a, &m| a.max(m / m0));
        if mu >= 1e-2 {
            return Err(Error::Precondition(format!(
                "planetary mass ratio {mu:.3e} is not small (need < 1e-2)"
            )));
        }
        Ok(PlanetSystem {
            m0,
            masses,
            pos,
            vel,
        })
    }

    /// Reduced mass `β_j`.
    pub fn beta(&self, j: usize) -> f64 {
        self.m0 * self.masses[j] / (self.m0 + self.masses[j])
    }

    /// Keplerian parameter `μ_j = G(m₀ + m_j)`.
    pub fn mu(&self, j: usize) -> f64 {
        self.m0 + self.masses[j]
    }

    /// Momenta conjugate to the heliocentric positions.
    pub fn canonical_momenta(&self) -> [Vec3; 3] {
        let mtot = self.m0 + self.masses.iter().sum::<f64>();
        let mut vcm = [0.0; 3];
        for j in 0..3 {
            for c in 0..3 {
                vcm[c] += self.masses[j] * self.vel[j][c] / mtot;
            }
        }
        std::array::from_fn(|j| std::array::from_fn(|c| self.masses[j] * (self.vel[j][c] - vcm[c])))
    }

    /// Builds the system from heliocentric positions and canonical momenta.
    pub fn from_canonical(m0: f64, masses: [f64; 3], pos: [Vec3; 3], mom: [Vec3; 3]) -> Result<Self> {
        let psum: Vec3 = std::array::from_fn(|c| mom.iter().map(|p| p[c]).sum::<f64>());
        let vel = std::array::from_fn(|j| std::array::from_fn(|c| mom[j][c] / masses[j] + psum[c] / m0));
        PlanetSystem::new(m0, masses, pos, vel)
    }

    /// Builds the system from canonical heliocentric elements.
    pub fn from_elements(m0: f64, masses: [f64; 3], els: &[OrbitalElements; 3]) -> Result<Self> {
        let mut pos = [[0.0; 3]; 3];
        let mut mom = [[0.0; 3]; 3];
        for j in 0..3 {
            let beta = m0 * masses[j] / (m0 + masses[j]);
            let (r, v) = state_from_elements(&els[j], m0 + masses[j])?;
            pos[j] = r;
            mom[j] = v.map(|x| beta * x);
        }
        PlanetSystem::from_canonical(m0, masses, pos, mom)
    }

    /// Osculating canonical heliocentric elements (with node and inclination).
    pub fn elements(&self) -> Result<[OrbitalElements; 3]> {
        let mom = self.canonical_momenta();
        let mut out = Vec::with_capacity(3);
        for j in 0..3 {
            let beta = self.beta(j);
            out.push(elements_from_state(self.pos[j], mom[j].map(|p| p / beta), self.mu(j))?);
        }
        Ok([out[0].clone(), out[1].clone(), out[2].clone()])
    }

    /// Total angular momentum `Σ r_j × p_j` (equal to the barycentric one).
    pub fn angular_momentum(&self) -> Vec3 {
        let mom = self.canonical_momenta();
        let mut l = [0.0; 3];
        for j in 0..3 {
            let c = cross(self.pos[j], mom[j]);
            for i in 0..3 {
                l[i] += c[i];
            }
        }
        l
    }

    /// Value of the full Hamiltonian in canonical heliocentric variables.
    pub fn energy(&self) -> f64 {
        nbody::hamiltonian(self.m0, &self.masses, &self.pos, &self.canonical_momenta())
    }
}

/// Applies the rotation matrix `rot` to a vector.
fn apply(rot: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    std::array::from_fn(|i| rot[i][0] * v[0] + rot[i][1] * v[1] + rot[i][2] * v[2])
}

/// Rotates the system so that its total angular momentum points along the
/// third axis.
pub fn to_invariant_plane(sys: &PlanetSystem) -> Result<PlanetSystem> {
    let l = sys.angular_momentum();
    let ln = norm(l);
    let scale = sys
        .pos
        .iter()
        .zip(sys.canonical_momenta().iter())
        .map(|(r, p)| norm(*r) * norm(*p))
        .sum::<f64>();
    if !(ln > 1e-14 * scale) {
        return Err(Error::Degenerate("total angular momentum vanishes".into()));
    }
    let u = l.map(|x| x / ln);
    // Rotation taking u to e_z: axis u × e_z, angle acos(u_z).
    let axis = [u[1], -u[0], 0.0];
    let s = norm(axis);
    let c = u[2];
    let rot = if s < 1e-15 {
        if c > 0.0 {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        } else {
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
        }
    } else {
        let k = axis.map(|x| x / s);
        let t = 1.0 - c;
        [
            [c + k[0] * k[0] * t, k[0] * k[1] * t - k[2] * s, k[0] * k[2] * t + k[1] * s],
            [k[1] * k[0] * t + k[2] * s, c + k[1] * k[1] * t, k[1] * k[2] * t - k[0] * s],
            [k[2] * k[0] * t - k[1] * s, k[2] * k[1] * t + k[0] * s, c + k[2] * k[2] * t],
        ]
    };
    Ok(PlanetSystem {
        m0: sys.m0,
        masses: sys.masses,
        pos: sys.pos.map(|r| apply(&rot, r)),
        vel: sys.vel.map(|v| apply(&rot, v)),
    })
}

/// Planar elements of a system after reduction to its invariant plane.
pub fn planar_elements(sys: &PlanetSystem) -> Result<[OrbitalElements; 3]> {
    let inv = to_invariant_plane(sys)?;
    Ok(inv.elements()?.map(|e| planarize(&e)))
}
