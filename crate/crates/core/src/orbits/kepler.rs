//! Two-body conversions between orbital elements and state vectors.

use std::f64::consts::TAU;

use super::{OrbitalElements, Vec3};
use crate::error::{Error, Result};

const KEPLER_TOL: f64 = 1e-14;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Solves `E − e sin E = M` by Newton iteration seeded with `E = M`.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidOrbit(format!("eccentricity {e} outside [0, 1)")));
    }
    let m = mean_anomaly.rem_euclid(TAU);
    let mut ecc = if e > 0.8 { std::f64::consts::PI } else { m };
    for _ in 0..100 {
        let f = ecc - e * ecc.sin() - m;
        let d = f / (1.0 - e * ecc.cos());
        ecc -= d;
        if d.abs() < KEPLER_TOL {
            return Ok(ecc);
        }
    }
    Err(Error::InvalidOrbit(format!(
        "Kepler's equation did not converge for M = {mean_anomaly}, e = {e}"
    )))
}

fn rotate_z(v: Vec3, ang: f64) -> Vec3 {
    let (s, c) = ang.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

fn rotate_x(v: Vec3, ang: f64) -> Vec3 {
    let (s, c) = ang.sin_cos();
    [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
}

/// Position and velocity for elements with gravitational parameter `mu`.
///
/// When the elements carry a node and inclination, `omega` is the argument
/// of perihelion; otherwise it is the planar perihelion longitude.
pub fn state_from_elements(el: &OrbitalElements, mu: f64) -> Result<(Vec3, Vec3)> {
    el.validate()?;
    let ecc = solve_kepler(el.mean_anomaly, el.e)?;
    let (se, ce) = ecc.sin_cos();
    let b = (1.0 - el.e * el.e).sqrt();
    let n = (mu / el.a.powi(3)).sqrt();
    let rdot_fac = n * el.a / (1.0 - el.e * ce);
    let pos = [el.a * (ce - el.e), el.a * b * se, 0.0];
    let vel = [-rdot_fac * se, rdot_fac * b * ce, 0.0];
    let (node, inc) = (el.node.unwrap_or(0.0), el.inclination.unwrap_or(0.0));
    let tr = |v: Vec3| rotate_z(rotate_x(rotate_z(v, el.omega), inc), node);
    Ok((tr(pos), tr(vel)))
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Osculating elements from a state vector (bound orbits only).
///
/// The node and inclination are always reported; for a planar prograde
/// orbit the inclination is zero and the node is set to zero, so that
/// `omega` is the perihelion longitude.
pub fn elements_from_state(r: Vec3, v: Vec3, mu: f64) -> Result<OrbitalElements> {
    let rn = norm(r);
    let v2 = dot(v, v);
    let energy = v2 / 2.0 - mu / rn;
    if energy >= 0.0 {
        return Err(Error::InvalidOrbit(format!("unbound state (energy {energy:e})")));
    }
    let a = -mu / (2.0 * energy);
    let h = cross(r, v);
    let hn = norm(h);
    let inc = (h[2] / hn).clamp(-1.0, 1.0).acos();
    // Eccentricity vector.
    let rv = dot(r, v);
    let evec: Vec3 = std::array::from_fn(|i| ((v2 - mu / rn) * r[i] - rv * v[i]) / mu);
    let e = norm(evec);
    let node_vec = [-h[1], h[0], 0.0];
    let nn = norm(node_vec);
    let node = if nn > 1e-14 * hn { node_vec[1].atan2(node_vec[0]) } else { 0.0 };
    // Work in the orbital plane: rotate by −node about z and −inc about x.
    let to_plane = |x: Vec3| rotate_x(rotate_z(x, -node), -inc);
    let rp = to_plane(r);
    let ep = to_plane(evec);
    let true_lon = rp[1].atan2(rp[0]);
    let (omega, mean_anomaly) = if e > 1e-15 {
        let w = ep[1].atan2(ep[0]);
        let f = true_lon - w;
        let ecc = 2.0 * (((1.0 - e) / (1.0 + e)).sqrt() * (f / 2.0).tan()).atan();
        (w, ecc - e * ecc.sin())
    } else {
        (0.0, true_lon)
    };
    Ok(OrbitalElements {
        a,
        e,
        mean_anomaly: wrap_angle(mean_anomaly),
        omega: wrap_angle(omega),
        node: Some(wrap_angle(node)),
        inclination: Some(inc),
    })
}

/// Advances a Keplerian state by `dt` using Gauss' f and g functions.
pub fn kepler_drift(r: Vec3, v: Vec3, mu: f64, dt: f64) -> Result<(Vec3, Vec3)> {
    let r0 = norm(r);
    let v2 = dot(v, v);
    let inv_a = 2.0 / r0 - v2 / mu;
    if inv_a <= 0.0 {
        return Err(Error::InvalidOrbit("unbound orbit in Kepler drift".into()));
    }
    let a = 1.0 / inv_a;
    let n = (mu * inv_a.powi(3)).sqrt();
    let c = 1.0 - r0 / a;
    let s = dot(r, v) / (n * a * a);
    let ndt = n * dt;
    // n dt = ΔE − c sin ΔE + s (1 − cos ΔE)
    let mut de = ndt;
    let mut converged = false;
    for _ in 0..60 {
        let (sn, cs) = de.sin_cos();
        let f = de - c * sn + s * (1.0 - cs) - ndt;
        let fp = 1.0 - c * cs + s * sn;
        let d = f / fp;
        de -= d;
        if d.abs() < KEPLER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidOrbit("Kepler drift iteration failed".into()));
    }
    let (sn, cs) = de.sin_cos();
    let rn = a * (1.0 - c * cs + s * sn);
    let f = 1.0 - a / r0 * (1.0 - cs);
    let g = dt - (de - sn) / n;
    let fdot = -a * a * n * sn / (rn * r0);
    let gdot = 1.0 - a / rn * (1.0 - cs);
    let nr = std::array::from_fn(|i| f * r[i] + g * v[i]);
    let nv = std::array::from_fn(|i| fdot * r[i] + gdot * v[i]);
    Ok((nr, nv))
}
