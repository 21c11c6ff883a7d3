//! Expansion of the planar Sun–three-planet Hamiltonian in the translated
//! Poincaré variables `(L, λ, ξ, η)` about circular orbits.
//!
//! ```text
//! H = F₀ + n*·L + Σ_{j₁≥2} h^Kep_{j₁}(L) + Σ_{j₁,j₂} h_{j₁,j₂}(L, λ, ξ, η)
//! ```
//!
//! Each planet's heliocentric position is obtained from the eccentric
//! longitude `F = λ + k sin F − h cos F`, solved as a series; the velocity
//! follows from `v = n ∂r/∂λ`. The inverse mutual distance is developed as
//!
//! ```text
//! 1/D = Σ_n (−½ choose n) ε^n C^{−(2n+1)},   ε = D² − C²,
//! C²  = a*_i² + a*_j² − 2 a*_i a*_j cos(λ_i − λ_j)
//! ```
//!
//! with the Fourier coefficients of `C^{−(2n+1)}` taken by trapezoidal
//! quadrature, which is spectrally accurate for this analytic periodic
//! integrand.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbits::{cartesian_from_poincare, hamiltonian, PoincareVars};
use crate::pseries::{
    dalembert_violations, purge_dalembert, read_series, write_series, Frequencies, PhasePoint, PoissonSeries, Trig,
    TruncationPolicy, Var,
};

/// Working harmonic cap for intermediate products; never reached since the
/// harmonics of the intermediate series are bounded by their degree.
const WORK_HARM: u32 = 120;

/// Trapezoid nodes for the Fourier coefficients of `C^{−(2n+1)}`.
const QUAD_NODES: usize = 1024;

/// Fully expanded Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedHamiltonian {
    pub n_star: Frequencies,
    /// `F₀(Λ*)`, the Keplerian energy at the reference actions.
    pub kep_constant: f64,
    /// Keplerian terms of degree 2..=maxDegL in L.
    pub kep: PoissonSeries,
    /// Perturbation `h_{j₁,j₂}`, keyed by (L degree, (ξ,η) degree).
    pub pert: BTreeMap<(u32, u32), PoissonSeries>,
    pub policy: TruncationPolicy,
    pub lambda_star: [f64; 3],
    pub m0: f64,
    pub masses: [f64; 3],
    /// Largest coefficient removed because it breaks the D'Alembert rule.
    /// Such terms vanish identically by rotational symmetry; what is
    /// removed is rounding residue of the cancelling contributions.
    pub symmetry_residue: f64,
}

fn beta_mu(m0: f64, m: f64) -> (f64, f64) {
    (m0 * m / (m0 + m), m0 + m)
}

/// Taylor expansion of `F₀(Λ* + L) = −Σ β³μ²/(2Λ²)` up to degree
/// `max_deg_l` in L. Returns the mean motions, the constant `F₀(Λ*)` and the
/// series of degree ≥ 2.
pub fn keplerian_part(
    lambda_star: &[f64; 3],
    m0: f64,
    masses: &[f64; 3],
    max_deg_l: u32,
) -> Result<(Frequencies, f64, PoissonSeries)> {
    if lambda_star.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Precondition(format!("Λ* must be positive, got {lambda_star:?}")));
    }
    let policy = TruncationPolicy::new(max_deg_l, 0, 0);
    let mut n = [0.0; 3];
    let mut f0 = 0.0;
    let mut kep = PoissonSeries::zero(policy);
    for j in 0..3 {
        let (beta, mu) = beta_mu(m0, masses[j]);
        let c = beta.powi(3) * mu * mu;
        let ls = lambda_star[j];
        // −c/(2Λ*²) (1 + L/Λ*)^{−2} = −c/(2Λ*²) Σ (−1)^d (d+1) (L/Λ*)^d
        let base = -c / (2.0 * ls * ls);
        f0 += base;
        n[j] = c / ls.powi(3);
        let lj = PoissonSeries::var(Var::L(j), policy);
        let mut pw = lj.clone();
        for d in 1..=max_deg_l {
            if d >= 2 {
                let coef = base * if d % 2 == 0 { 1.0 } else { -1.0 } * (d + 1) as f64 / ls.powi(d as i32);
                kep = kep.add_scaled(&pw, coef);
            }
            pw = pw.mul(&lj, &policy)?;
        }
    }
    Ok((Frequencies::new(n)?, f0, kep))
}

/// `Σ c_d x^d` by Horner's rule.
fn compose(x: &PoissonSeries, coeffs: &[f64], policy: &TruncationPolicy) -> Result<PoissonSeries> {
    let mut acc = PoissonSeries::zero(*policy);
    for &c in coeffs.iter().rev() {
        acc = acc.mul(x, policy)?;
        if c != 0.0 {
            acc = acc.add_scaled(&PoissonSeries::constant(1.0, *policy), c);
        }
    }
    Ok(acc)
}

fn binomial(alpha: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |b, i| b * (alpha - i as f64) / (i + 1) as f64)
}

fn unit(j: usize, s: i32) -> [i32; 3] {
    let mut k = [0; 3];
    k[j] = s;
    k
}

/// Heliocentric position and velocity of one planet as series in
/// `(L_j, λ_j, ξ_j, η_j)`.
struct PlanetSeries {
    x: PoissonSeries,
    y: PoissonSeries,
    vx: PoissonSeries,
    vy: PoissonSeries,
    a_star: f64,
}

fn planet_series(j: usize, lambda_star: f64, m0: f64, m: f64, wp: &TruncationPolicy) -> Result<PlanetSeries> {
    let (beta, mu) = beta_mu(m0, m);
    let a_star = (lambda_star / beta).powi(2) / mu;
    let n_star = mu.sqrt() / a_star.powf(1.5);
    let deg = wp.max_deg_sec as usize + wp.max_deg_l as usize + 1;
    let one = PoissonSeries::constant(1.0, *wp);
    let ell = PoissonSeries::var(Var::L(j), *wp).scale(1.0 / lambda_star);

    // (1 + ℓ)^{−1/2}, (1 + ℓ)², (1 + ℓ)^{−3}
    let powf = |e: f64| -> Result<PoissonSeries> {
        let c: Vec<f64> = (0..=wp.max_deg_l as usize).map(|d| binomial(e, d)).collect();
        compose(&ell, &c, wp)
    };
    let inv_sqrt = powf(-0.5)?.scale(lambda_star.powf(-0.5));
    let a = powf(2.0)?.scale(a_star);
    let n = powf(-3.0)?.scale(n_star);

    let xh = PoissonSeries::var(Var::Xi(j), *wp).mul(&inv_sqrt, wp)?;
    let yh = PoissonSeries::var(Var::Eta(j), *wp).mul(&inv_sqrt, wp)?;
    // q = (X̂² + Ŷ²)/4 = (1 − √(1 − e²))/2
    let q = (&xh.mul(&xh, wp)? + &yh.mul(&yh, wp)?).scale(0.25);
    let half_deg = deg / 2 + 1;
    let sqrt_c: Vec<f64> = (0..=half_deg).map(|d| binomial(0.5, d) * if d % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let s = compose(&q, &sqrt_c, wp)?;
    let geo: Vec<f64> = (0..=half_deg).map(|_| 0.5).collect();
    let be = compose(&q, &geo, wp)?;
    // k = e cos ϖ, h = e sin ϖ
    let k = xh.mul(&s, wp)?;
    let h = -&yh.mul(&s, wp)?;

    let cosl = PoissonSeries::trig(unit(j, 1), Trig::Cos, 1.0, *wp);
    let sinl = PoissonSeries::trig(unit(j, 1), Trig::Sin, 1.0, *wp);
    let mut cos_c = vec![0.0; deg + 1];
    let mut sin_c = vec![0.0; deg + 1];
    let mut fact = 1.0;
    for d in 0..=deg {
        if d > 0 {
            fact *= d as f64;
        }
        let sgn = if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if d % 2 == 0 {
            cos_c[d] = sgn / fact;
        } else {
            sin_c[d] = sgn / fact;
        }
    }
    let mut delta = PoissonSeries::zero(*wp);
    let mut cos_f = cosl.clone();
    let mut sin_f = sinl.clone();
    // Each pass fixes one more degree of δ = F − λ.
    for _ in 0..=deg {
        delta = &k.mul(&sin_f, wp)? - &h.mul(&cos_f, wp)?;
        let cd = compose(&delta, &cos_c, wp)?;
        let sd = compose(&delta, &sin_c, wp)?;
        cos_f = &cosl.mul(&cd, wp)? - &sinl.mul(&sd, wp)?;
        sin_f = &sinl.mul(&cd, wp)? + &cosl.mul(&sd, wp)?;
    }
    log::trace!("planet {j}: eccentric longitude series with {} terms", delta.len());

    let hk_be = h.mul(&k, wp)?.mul(&be, wp)?;
    let hh_be = h.mul(&h, wp)?.mul(&be, wp)?;
    let kk_be = k.mul(&k, wp)?.mul(&be, wp)?;
    let xr = &(&(&one - &hh_be).mul(&cos_f, wp)? + &hk_be.mul(&sin_f, wp)?) - &k;
    let yr = &(&(&one - &kk_be).mul(&sin_f, wp)? + &hk_be.mul(&cos_f, wp)?) - &h;
    let x = xr.mul(&a, wp)?;
    let y = yr.mul(&a, wp)?;
    let vx = x.derive_angle(j).mul(&n, wp)?;
    let vy = y.derive_angle(j).mul(&n, wp)?;
    Ok(PlanetSeries { x, y, vx, vy, a_star })
}

/// Fourier cosine coefficients `c_q`, `q = 0..=qmax`, of
/// `(a² + b² − 2ab cos ψ)^{−p}`.
pub fn inverse_distance_fourier(a: f64, b: f64, p: f64, qmax: usize) -> Vec<f64> {
    let vals: Vec<f64> = (0..QUAD_NODES)
        .map(|m| {
            let psi = TAU * m as f64 / QUAD_NODES as f64;
            (a * a + b * b - 2.0 * a * b * psi.cos()).powf(-p)
        })
        .collect();
    (0..=qmax)
        .map(|q| {
            let s: f64 = vals
                .iter()
                .enumerate()
                .map(|(m, v)| v * (TAU * (q * m) as f64 / QUAD_NODES as f64).cos())
                .sum();
            let w = if q == 0 { 1.0 } else { 2.0 };
            w * s / QUAD_NODES as f64
        })
        .collect()
}

fn pair_harmonic(i: usize, j: usize, q: i32) -> [i32; 3] {
    let mut k = [0; 3];
    k[i] = q;
    k[j] = -q;
    k
}

/// `(1/m₀) p_i·p_j − m_i m_j/|r_i − r_j|` for one pair.
fn pair_interaction(
    (i, pi): (usize, &PlanetSeries),
    (j, pj): (usize, &PlanetSeries),
    m0: f64,
    masses: &[f64; 3],
    wp: &TruncationPolicy,
    fp: &TruncationPolicy,
) -> Result<PoissonSeries> {
    let (bi, _) = beta_mu(m0, masses[i]);
    let (bj, _) = beta_mu(m0, masses[j]);
    let kin = (&pi.vx.mul(&pj.vx, fp)? + &pj.vy.mul(&pi.vy, fp)?).scale(bi * bj / m0);

    let (ai, aj) = (pi.a_star, pj.a_star);
    let dx = &pi.x - &pj.x;
    let dy = &pi.y - &pj.y;
    let d2 = &dx.mul(&dx, wp)? + &dy.mul(&dy, wp)?;
    let c2 = &PoissonSeries::constant(ai * ai + aj * aj, *wp)
        + &PoissonSeries::trig(pair_harmonic(i, j, 1), Trig::Cos, -2.0 * ai * aj, *wp);
    // The circular part cancels exactly; drop its rounding residue.
    let eps = (&d2 - &c2).filter_terms(|t| t.mono.deg_total() > 0);

    let max_n = (wp.max_deg_sec + wp.max_deg_l) as usize;
    let mut inv_d = PoissonSeries::zero(*fp);
    let mut epow = PoissonSeries::constant(1.0, *wp);
    for n in 0..=max_n {
        if epow.is_empty() {
            break;
        }
        // Harmonics q(λ_i − λ_j) of C^{−(2n+1)} beyond this bound cannot be
        // brought back below maxHarm by ε^n.
        let qmax = (fp.max_harm + fp.max_deg_sec) as usize / 2 + n + 1;
        let c = inverse_distance_fourier(ai, aj, n as f64 + 0.5, qmax);
        let fourier = PoissonSeries::from_terms(
            c.iter().enumerate().map(|(q, &cq)| crate::pseries::Term {
                mono: crate::pseries::Monomial::ONE,
                wave: crate::pseries::Wave::new(pair_harmonic(i, j, q as i32), Trig::Cos),
                coeff: cq,
            }),
            TruncationPolicy { max_harm: WORK_HARM, ..*wp },
        );
        let term = epow.mul(&fourier, fp)?;
        inv_d = inv_d.add_scaled(&term, binomial(-0.5, n));
        if n < max_n {
            epow = epow.mul(&eps, wp)?;
        }
    }
    Ok(kin.add_scaled(&inv_d, -masses[i] * masses[j]))
}

/// Perturbation `(1/m₀) Σ p_i·p_j − Σ m_i m_j/|r_i − r_j|` as a series,
/// linear in L, truncated under `policy` (whose L cap is lowered to 1).
///
/// Also returns the largest coefficient dropped for violating the
/// D'Alembert rule.
pub fn expand_perturbation(
    m0: f64,
    masses: &[f64; 3],
    lambda_star: &[f64; 3],
    policy: &TruncationPolicy,
) -> Result<(BTreeMap<(u32, u32), PoissonSeries>, f64)> {
    policy.validate()?;
    let fp = pert_policy(policy);
    let wp = TruncationPolicy { max_harm: WORK_HARM, ..fp };
    let planets = (0..3)
        .into_par_iter()
        .map(|j| planet_series(j, lambda_star[j], m0, masses[j], &wp))
        .collect::<Result<Vec<_>>>()?;
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let parts = pairs
        .par_iter()
        .map(|&(i, j)| pair_interaction((i, &planets[i]), (j, &planets[j]), m0, masses, &wp, &fp))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(f64, &PoissonSeries)> = parts.iter().map(|p| (1.0, p)).collect();
    let total = PoissonSeries::weighted_sum(&refs, fp).truncate(fp);
    if total.len() > fp.term_limit {
        return Err(Error::TermLimit { count: total.len(), limit: fp.term_limit });
    }
    let (clean, residue) = purge_dalembert(&total);
    Ok((split_by_degree(&clean), residue))
}

/// Policy of the perturbation: linear in L.
pub fn pert_policy(policy: &TruncationPolicy) -> TruncationPolicy {
    TruncationPolicy { max_deg_l: policy.max_deg_l.min(1), ..*policy }
}

/// Regroups a series into homogeneous `(j₁, j₂)` slots.
pub fn split_by_degree(f: &PoissonSeries) -> BTreeMap<(u32, u32), PoissonSeries> {
    let mut keys: Vec<(u32, u32)> = f.terms().map(|t| (t.mono.deg_l(), t.mono.deg_sec())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(a, b)| ((a, b), f.filter_terms(|t| t.mono.deg_l() == a && t.mono.deg_sec() == b)))
        .collect()
}

/// Exact Hamiltonian at a Poincaré point, through heliocentric coordinates.
pub fn numeric_oracle(point: &PoincareVars, m0: f64, masses: &[f64; 3]) -> Result<f64> {
    let (r, p) = cartesian_from_poincare(point, m0, masses)?;
    Ok(hamiltonian(m0, masses, &r, &p))
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    lambda_star: [f64; 3],
    n_star: [f64; 3],
    kep_constant: f64,
    m0: f64,
    masses: [f64; 3],
    policy: TruncationPolicy,
    symmetry_residue: f64,
    slots: Vec<SlotEntry>,
}

#[derive(Serialize, Deserialize)]
struct SlotEntry {
    j1: u32,
    j2: u32,
    file: String,
    terms: usize,
}

impl ExpandedHamiltonian {
    /// Expands the Hamiltonian about the reference actions `Λ*`.
    pub fn build(m0: f64, masses: [f64; 3], lambda_star: [f64; 3], policy: TruncationPolicy) -> Result<Self> {
        let (n_star, kep_constant, kep) = keplerian_part(&lambda_star, m0, &masses, policy.max_deg_l)?;
        let (pert, symmetry_residue) = expand_perturbation(m0, &masses, &lambda_star, &policy)?;
        let h = ExpandedHamiltonian {
            n_star,
            kep_constant,
            kep,
            pert,
            policy,
            lambda_star,
            m0,
            masses,
            symmetry_residue,
        };
        log::info!("expanded Hamiltonian: {} perturbation terms", h.term_count());
        Ok(h)
    }

    /// The whole perturbation as one series.
    pub fn perturbation(&self) -> PoissonSeries {
        let parts: Vec<(f64, &PoissonSeries)> = self.pert.values().map(|s| (1.0, s)).collect();
        PoissonSeries::weighted_sum(&parts, pert_policy(&self.policy))
    }

    pub fn slot(&self, j1: u32, j2: u32) -> Option<&PoissonSeries> {
        self.pert.get(&(j1, j2))
    }

    pub fn term_count(&self) -> usize {
        self.pert.values().map(|s| s.len()).sum()
    }

    /// Value of the truncated Hamiltonian, including `F₀(Λ*)`.
    pub fn evaluate(&self, p: &PhasePoint) -> f64 {
        let lin: f64 = (0..3).map(|j| self.n_star.n_star[j] * p.l[j]).sum();
        self.kep_constant + lin + self.kep.evaluate(p) + self.pert.values().map(|s| s.evaluate(p)).sum::<f64>()
    }

    /// Exact value at the same point.
    pub fn exact(&self, p: &PhasePoint) -> Result<f64> {
        numeric_oracle(&PoincareVars::from_phase_point(p, &self.lambda_star), self.m0, &self.masses)
    }

    /// Harmonics violating the D'Alembert rule, over all slots.
    pub fn dalembert_violations(&self) -> usize {
        self.pert.values().map(|s| dalembert_violations(s).len()).sum()
    }

    /// Writes one series file per slot plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut slots = Vec::new();
        for (&(j1, j2), s) in &self.pert {
            let file = format!("h_{j1}_{j2}.series");
            write_series(s, fs::File::create(dir.join(&file))?)?;
            slots.push(SlotEntry { j1, j2, file, terms: s.len() });
        }
        write_series(&self.kep, fs::File::create(dir.join("kep.series"))?)?;
        let man = Manifest {
            lambda_star: self.lambda_star,
            n_star: self.n_star.n_star,
            kep_constant: self.kep_constant,
            m0: self.m0,
            masses: self.masses,
            policy: self.policy,
            symmetry_residue: self.symmetry_residue,
            slots,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).map_err(io_err)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let man: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?).map_err(io_err)?;
        let open = |f: &str| -> Result<PoissonSeries> {
            read_series(std::io::BufReader::new(fs::File::open(dir.join(f))?))
        };
        let mut pert = BTreeMap::new();
        for s in &man.slots {
            let series = open(&s.file)?;
            if series.len() != s.terms {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("{}: expected {} terms, found {}", s.file, s.terms, series.len()),
                });
            }
            pert.insert((s.j1, s.j2), series);
        }
        Ok(ExpandedHamiltonian {
            n_star: Frequencies::new(man.n_star)?,
            kep_constant: man.kep_constant,
            kep: open("kep.series")?,
            pert,
            policy: man.policy,
            lambda_star: man.lambda_star,
            m0: man.m0,
            masses: man.masses,
            symmetry_residue: man.symmetry_residue,
        })
    }
}

pub(crate) fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{big_lambda_from_a, planet_masses, SUN_MASS};

    fn lstar() -> [f64; 3] {
        let m = planet_masses();
        [5.2, 9.55, 19.2].iter().zip(m.iter()).map(|(&a, &mj)| big_lambda_from_a(a, SUN_MASS, mj)).collect::<Vec<_>>().try_into().unwrap()
    }

    #[test]
    fn kepler_quadratic_coefficient() {
        let ls = lstar();
        let (n, _, kep) = keplerian_part(&ls, SUN_MASS, &planet_masses(), 2).unwrap();
        for j in 0..3 {
            let m = crate::pseries::Monomial::var(Var::L(j)).mul(crate::pseries::Monomial::var(Var::L(j)));
            let c = kep.coeff(m, crate::pseries::Wave::CONST);
            assert!((c + 1.5 * n.n_star[j] / ls[j]).abs() < 1e-12 * c.abs());
        }
    }

    #[test]
    fn fourier_coefficients_of_unit_power() {
        // p = 0 gives the constant 1.
        let c = inverse_distance_fourier(1.0, 2.0, 0.0, 3);
        assert!((c[0] - 1.0).abs() < 1e-14 && c[1].abs() < 1e-14);
        // 1/(a² + b² − 2ab cos ψ) has c_q = 2 α^q / (b²(1 − α²)) for q ≥ 1.
        let (a, b) = (0.5, 1.0);
        let c = inverse_distance_fourier(a, b, 1.0, 5);
        let al: f64 = a / b;
        for (q, v) in c.iter().enumerate().skip(1) {
            let want = 2.0 * al.powi(q as i32) / (b * b * (1.0 - al * al));
            assert!((v - want).abs() < 1e-13, "q={q}");
        }
    }

    #[test]
    fn circular_planet_series_is_a_circle() {
        let wp = TruncationPolicy::new(1, 4, WORK_HARM);
        let p = planet_series(1, 0.3, SUN_MASS, 0.01, &wp).unwrap();
        let pt = PhasePoint { lambda: [0.0, 0.7, 0.0], ..Default::default() };
        let r = (p.x.evaluate(&pt).powi(2) + p.y.evaluate(&pt).powi(2)).sqrt();
        assert!((r - p.a_star).abs() < 1e-14 * p.a_star);
        assert!((p.x.evaluate(&pt) - p.a_star * 0.7f64.cos()).abs() < 1e-14);
    }
}
