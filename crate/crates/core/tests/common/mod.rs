//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::Rng;
use secstab_core::orbits::*;
use secstab_core::pseries::PhasePoint;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Λ* from the tabulated semi-major axes.
pub fn reference_lambda_star() -> [f64; 3] {
    let m = planet_masses();
    let els = reference_elements();
    std::array::from_fn(|j| big_lambda_from_a(els[j].a, SUN_MASS, m[j]))
}

/// Random phase point with `e_j ≤ emax`, `|L_j| ≤ lfrac·Λ*_j`.
pub fn random_point<R: Rng>(rng: &mut R, ls: &[f64; 3], emax: f64, lfrac: f64) -> PhasePoint {
    let mut p = PhasePoint::default();
    for j in 0..3 {
        p.l[j] = if lfrac > 0.0 { rng.random_range(-lfrac..lfrac) * ls[j] } else { 0.0 };
        p.lambda[j] = rng.random_range(0.0..TAU);
        let e: f64 = rng.random_range(0.0..emax);
        let w: f64 = rng.random_range(0.0..TAU);
        let amp = (2.0 * (ls[j] + p.l[j]) * (1.0 - (1.0 - e * e).sqrt())).sqrt();
        p.xi[j] = amp * w.cos();
        p.eta[j] = -amp * w.sin();
    }
    p
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Exact Keplerian energies and pair interactions, from Cartesian
/// coordinates.
pub fn exact_parts(pv: &PoincareVars) -> ([f64; 3], [[f64; 3]; 3]) {
    let m0 = SUN_MASS;
    let m = planet_masses();
    let (r, p) = cartesian_from_poincare(pv, m0, &m).unwrap();
    let kep = std::array::from_fn(|j| {
        let beta = m0 * m[j] / (m0 + m[j]);
        dot(p[j], p[j]) / (2.0 * beta) - m0 * m[j] / dot(r[j], r[j]).sqrt()
    });
    let mut pair = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let d: Vec3 = std::array::from_fn(|c| r[i][c] - r[j][c]);
            pair[i][j] = dot(p[i], p[j]) / m0 - m[i] * m[j] / dot(d, d).sqrt();
        }
    }
    (kep, pair)
}

/// Exact Hamiltonian with every pair interaction projected on the
/// harmonics `|k|₁ ≤ max_harm` by a discrete Fourier transform in the two
/// mean longitudes involved.
pub fn projected_oracle(p: &PhasePoint, ls: &[f64; 3], max_harm: i32) -> f64 {
    const N: usize = 64;
    let pv = PoincareVars::from_phase_point(p, ls);
    let (kep, _) = exact_parts(&pv);
    let mut total: f64 = kep.iter().sum();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut grid = vec![0.0; N * N];
        for a in 0..N {
            for b in 0..N {
                let mut q = pv.clone();
                q.lambda[i] = TAU * a as f64 / N as f64;
                q.lambda[j] = TAU * b as f64 / N as f64;
                grid[a * N + b] = exact_parts(&q).1[i][j];
            }
        }
        for ka in -max_harm..=max_harm {
            for kb in -(max_harm - ka.abs())..=(max_harm - ka.abs()) {
                let (mut re, mut im) = (0.0, 0.0);
                for a in 0..N {
                    for b in 0..N {
                        let ph = TAU * ((ka * a as i32 + kb * b as i32) as f64) / N as f64;
                        re += grid[a * N + b] * ph.cos();
                        im -= grid[a * N + b] * ph.sin();
                    }
                }
                let (re, im) = (re / (N * N) as f64, im / (N * N) as f64);
                let ph = ka as f64 * p.lambda[i] + kb as f64 * p.lambda[j];
                total += re * ph.cos() - im * ph.sin();
            }
        }
    }
    total
}

/// Hamiltonian flow of a series for time `t` by classical RK4:
/// `λ̇ = ∂χ/∂L`, `L̇ = −∂χ/∂λ`, `η̇ = ∂χ/∂ξ`, `ξ̇ = −∂χ/∂η`.
pub fn series_flow(chi: &secstab_core::PoissonSeries, p: &PhasePoint, t: f64, steps: usize) -> PhasePoint {
    use secstab_core::pseries::Var;
    let dl: Vec<_> = (0..3).map(|j| chi.derive(Var::L(j))).collect();
    let dlam: Vec<_> = (0..3).map(|j| chi.derive_angle(j)).collect();
    let dxi: Vec<_> = (0..3).map(|j| chi.derive(Var::Xi(j))).collect();
    let deta: Vec<_> = (0..3).map(|j| chi.derive(Var::Eta(j))).collect();
    let field = |q: &PhasePoint| -> [f64; 12] {
        let mut v = [0.0; 12];
        for j in 0..3 {
            v[j] = -dlam[j].evaluate(q);
            v[3 + j] = dl[j].evaluate(q);
            v[6 + j] = -deta[j].evaluate(q);
            v[9 + j] = dxi[j].evaluate(q);
        }
        v
    };
    let pack = |q: &PhasePoint| -> [f64; 12] {
        let mut v = [0.0; 12];
        v[0..3].copy_from_slice(&q.l);
        v[3..6].copy_from_slice(&q.lambda);
        v[6..9].copy_from_slice(&q.xi);
        v[9..12].copy_from_slice(&q.eta);
        v
    };
    let unpack = |v: &[f64; 12]| PhasePoint {
        l: [v[0], v[1], v[2]],
        lambda: [v[3], v[4], v[5]],
        xi: [v[6], v[7], v[8]],
        eta: [v[9], v[10], v[11]],
    };
    let h = t / steps as f64;
    let mut y = pack(p);
    for _ in 0..steps {
        let add = |a: &[f64; 12], b: &[f64; 12], s: f64| -> [f64; 12] { std::array::from_fn(|i| a[i] + s * b[i]) };
        let k1 = field(&unpack(&y));
        let k2 = field(&unpack(&add(&y, &k1, h / 2.0)));
        let k3 = field(&unpack(&add(&y, &k2, h / 2.0)));
        let k4 = field(&unpack(&add(&y, &k3, h)));
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    unpack(&y)
}
