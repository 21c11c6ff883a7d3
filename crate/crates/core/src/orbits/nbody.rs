//! Second-order symplectic integrator in canonical heliocentric variables.
//!
//! `H = Σ_j (|p_j|²/2β_j − m₀m_j/|r_j|) + (1/m₀) Σ_{i<j} p_i·p_j − Σ_{i<j} m_i m_j/|r_i − r_j|`
//!
//! The Keplerian part is advanced exactly; the momentum coupling is a drift
//! of the positions and the mutual attraction a kick of the momenta. One
//! step is the symmetric composition `U(h/2) T(h/2) K(h) T(h/2) U(h/2)`.

use serde::{Deserialize, Serialize};

use super::{kepler_drift, PlanetSystem, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pos: [Vec3; 3],
    /// Canonical (barycentric) momenta.
    pub mom: [Vec3; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub m0: f64,
    pub masses: [f64; 3],
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn system(&self, i: usize) -> Result<PlanetSystem> {
        let s = &self.samples[i];
        PlanetSystem::from_canonical(self.m0, self.masses, s.pos, s.mom)
    }

    /// Osculating semi-major axes at sample `i`.
    pub fn semimajor(&self, i: usize) -> [f64; 3] {
        let s = &self.samples[i];
        std::array::from_fn(|j| {
            let m = self.masses[j];
            let beta = self.m0 * m / (self.m0 + m);
            let mu = self.m0 + m;
            let v2 = dot(s.mom[j], s.mom[j]) / (beta * beta);
            let en = 0.5 * v2 - mu / dot(s.pos[j], s.pos[j]).sqrt();
            -mu / (2.0 * en)
        })
    }

    pub fn energy(&self, i: usize) -> f64 {
        let s = &self.samples[i];
        hamiltonian(self.m0, &self.masses, &s.pos, &s.mom)
    }

    pub fn span(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn hamiltonian(m0: f64, masses: &[f64; 3], pos: &[Vec3; 3], mom: &[Vec3; 3]) -> f64 {
    let mut h = 0.0;
    for j in 0..3 {
        let beta = m0 * masses[j] / (m0 + masses[j]);
        h += dot(mom[j], mom[j]) / (2.0 * beta) - m0 * masses[j] / dot(pos[j], pos[j]).sqrt();
    }
    for i in 0..3 {
        for j in i + 1..3 {
            h += dot(mom[i], mom[j]) / m0;
            h -= masses[i] * masses[j] / dot(sub(pos[i], pos[j]), sub(pos[i], pos[j])).sqrt();
        }
    }
    h
}

struct State<'a> {
    m0: f64,
    masses: &'a [f64; 3],
    pos: [Vec3; 3],
    mom: [Vec3; 3],
}

impl State<'_> {
    fn kepler(&mut self, h: f64) -> Result<()> {
        for j in 0..3 {
            let m = self.masses[j];
            let beta = self.m0 * m / (self.m0 + m);
            let v = self.mom[j].map(|p| p / beta);
            let (r, v) = kepler_drift(self.pos[j], v, self.m0 + m, h)?;
            self.pos[j] = r;
            self.mom[j] = v.map(|x| beta * x);
        }
        Ok(())
    }

    fn coupling_drift(&mut self, h: f64) {
        let psum: Vec3 = std::array::from_fn(|c| self.mom.iter().map(|p| p[c]).sum::<f64>());
        for j in 0..3 {
            for c in 0..3 {
                self.pos[j][c] += h * (psum[c] - self.mom[j][c]) / self.m0;
            }
        }
    }

    fn kick(&mut self, h: f64, t: f64) -> Result<()> {
        for i in 0..3 {
            for j in i + 1..3 {
                let d = sub(self.pos[i], self.pos[j]);
                let r2 = dot(d, d);
                let r = r2.sqrt();
                // Hill radius of the heavier planet of the pair.
                let (k, mk) = if self.masses[i] >= self.masses[j] { (i, self.masses[i]) } else { (j, self.masses[j]) };
                let hill = dot(self.pos[k], self.pos[k]).sqrt() * (mk / (3.0 * self.m0)).cbrt();
                if r < hill {
                    return Err(Error::CloseEncounter { i, j, t, dist: r });
                }
                let f = h * self.masses[i] * self.masses[j] / (r2 * r);
                for c in 0..3 {
                    self.mom[i][c] -= f * d[c];
                    self.mom[j][c] += f * d[c];
                }
            }
        }
        Ok(())
    }
}

/// Integrates the Sun–three-planet problem up to `t_end` with step `dt`,
/// storing a sample every `sample_dt` (rounded to a whole number of steps).
pub fn integrate_nbody(sys: &PlanetSystem, t_end: f64, dt: f64, sample_dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and t_end ≥ 0 (dt = {dt}, t_end = {t_end})")));
    }
    let nsteps = (t_end / dt).round() as u64;
    let every = ((sample_dt / dt).round() as u64).max(1);
    let mut st = State {
        m0: sys.m0,
        masses: &sys.masses,
        pos: sys.pos,
        mom: sys.canonical_momenta(),
    };
    let mut samples = Vec::with_capacity((nsteps / every + 1) as usize);
    samples.push(Sample {
        t: 0.0,
        pos: st.pos,
        mom: st.mom,
    });
    let half = 0.5 * dt;
    for n in 1..=nsteps {
        let t = n as f64 * dt;
        st.kick(half, t)?;
        st.coupling_drift(half);
        st.kepler(dt)?;
        st.coupling_drift(half);
        st.kick(half, t)?;
        if n % every == 0 {
            samples.push(Sample {
                t,
                pos: st.pos,
                mom: st.mom,
            });
        }
    }
    Ok(Trajectory {
        m0: sys.m0,
        masses: sys.masses,
        samples,
    })
}

/// Time average of the osculating semi-major axes over the first `window`
/// years of the trajectory.
pub fn average_semimajor(traj: &Trajectory, window: f64) -> Result<[f64; 3]> {
    if traj.samples.len() < 2 || traj.span() < window * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "trajectory spans {:.3e} yr, shorter than the averaging window {window:.3e} yr",
            traj.span()
        )));
    }
    let t0 = traj.samples[0].t;
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for (i, s) in traj.samples.iter().enumerate() {
        if s.t - t0 > window * (1.0 + 1e-12) {
            break;
        }
        let a = traj.semimajor(i);
        for j in 0..3 {
            sum[j] += a[j];
        }
        n += 1;
    }
    Ok(sum.map(|x| x / n as f64))
}
