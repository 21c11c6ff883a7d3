//! Estimated stability times from the remainder of a Birkhoff normal form.
//!
//! For a homogeneous polynomial `f` of degree `s` the weighted norm
//! `|f|_R = Σ |f_jk| Π R_i^(j_i+k_i) Θ_{j_i,k_i}` bounds `|f|` on the
//! polydisk `Δ_{ρR}` by `ρ^s |f|_R`. With `B_{r,j} = C |{Φ_j, 𝓕}|_R` for the
//! leading remainder `𝓕` of degree `d`, `ρ̇ ≤ B ρ^(d−1)/R_j²`, and the time
//! to go from `ρ₀` to `2ρ₀` is at least
//! `τ = min_j (1 − 2^(−p)) R_j² / (p B_{r,j} ρ₀^p)` with `p = d − 2`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::birkhoff::{action, NormalFormResult, PolyField};
use crate::error::{Error, Result};
use crate::pseries::{poisson_bracket, BracketBlock, PhasePoint, PoissonSeries, Term, TruncationPolicy};

pub const DEFAULT_C: f64 = 2.0;

/// `√(jʲ kᵏ / (j+k)^(j+k))`, the maximum of `|cosʲθ sinᵏθ|`, with `0⁰ = 1`.
pub fn theta(j: u32, k: u32) -> f64 {
    if j == 0 || k == 0 {
        return 1.0;
    }
    let (j, k) = (j as f64, k as f64);
    (0.5 * (j * j.ln() + k * k.ln() - (j + k) * (j + k).ln())).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolydiskRadii {
    pub r: [f64; 3],
    /// Constant `C ≥ 1` in the remainder bound.
    pub c: f64,
}

impl PolydiskRadii {
    pub fn new(r: [f64; 3], c: f64) -> Result<Self> {
        if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!("radii must be positive, got {r:?}")));
        }
        if !(c >= 1.0) {
            return Err(Error::Precondition(format!("bound constant must be ≥ 1, got {c}")));
        }
        Ok(PolydiskRadii { r, c })
    }
}

/// `R_j = √(x_j² + y_j²)`.
pub fn radii_from_initial(x0: &[f64; 3], y0: &[f64; 3]) -> Result<[f64; 3]> {
    let r: [f64; 3] = std::array::from_fn(|j| x0[j].hypot(y0[j]));
    if let Some(j) = r.iter().position(|&x| x == 0.0) {
        return Err(Error::Precondition(format!("mode {} has zero amplitude", j + 1)));
    }
    Ok(r)
}

fn term_weight(t: &Term, radii: &[f64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let (j, k) = (t.mono.exp(3 + i), t.mono.exp(6 + i));
            radii[i].powi((j + k) as i32) * theta(j, k)
        })
        .product::<f64>()
        * t.coeff.abs()
}

fn check_polynomial(f: &PoissonSeries) -> Result<()> {
    if f.terms().any(|t| t.mono.deg_l() != 0 || !t.wave.k.is_zero()) {
        return Err(Error::Precondition("expected a polynomial in (x, y) only".into()));
    }
    Ok(())
}

/// `|f|_R` of a homogeneous polynomial in `(x, y)`.
pub fn weighted_norm(f: &PoissonSeries, radii: &[f64; 3]) -> Result<f64> {
    check_polynomial(f)?;
    if f.min_deg_sec() != f.max_deg_sec() {
        return Err(Error::Precondition(format!(
            "polynomial is not homogeneous (degrees {:?}..{:?}); use weighted_norms_by_degree",
            f.min_deg_sec(),
            f.max_deg_sec()
        )));
    }
    Ok(f.terms().map(|t| term_weight(&t, radii)).sum())
}

/// `|f_s|_R` for every homogeneous piece `f_s`, by degree.
pub fn weighted_norms_by_degree(f: &PoissonSeries, radii: &[f64; 3]) -> Result<Vec<(u32, f64)>> {
    check_polynomial(f)?;
    let mut by: std::collections::BTreeMap<u32, f64> = Default::default();
    for t in f.terms() {
        *by.entry(t.mono.deg_sec()).or_insert(0.0) += term_weight(&t, radii);
    }
    Ok(by.into_iter().collect())
}

/// `{Φ_j, f}`.
pub fn phi_bracket(j: usize, f: &PoissonSeries) -> Result<PoissonSeries> {
    let deg = f.max_deg_sec().unwrap_or(2).max(2);
    poisson_bracket(&action(j, deg), f, BracketBlock::Secular, &TruncationPolicy::secular(deg))
}

/// `B_{r,j}` for one normalization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub r: usize,
    /// Degree of the remainder term the bound is built on.
    pub degree: u32,
    pub b: [f64; 3],
    /// `|{Φ_j, next}|_R / |{Φ_j, leading}|_R`, the size of the first
    /// neglected remainder term relative to the bounded one at `ρ = 1`.
    pub next_ratio: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub rows: Vec<BoundRow>,
    pub c: f64,
}

/// `B_{r,j} = C |{Φ_j, 𝓕^(r)}|_R` for `r = 1..=r_max`, built on the lowest
/// nonzero remainder term of each order.
pub fn remainder_bounds(nf: &NormalFormResult, radii: &PolydiskRadii) -> Result<BoundsTable> {
    let mut rows = Vec::with_capacity(nf.r_max);
    for r in 1..=nf.r_max {
        let o = nf.order(r).ok_or(Error::MissingRemainder(r))?;
        let lead = o.leading.as_ref().ok_or(Error::MissingRemainder(r))?;
        let mut b = [0.0; 3];
        let mut raw = [0.0; 3];
        for j in 0..3 {
            raw[j] = weighted_norm_or_zero(&phi_bracket(j, &lead.series)?, &radii.r)?;
            b[j] = radii.c * raw[j];
        }
        let next_ratio = match &o.next {
            Some(n) => {
                let mut q = [0.0; 3];
                for j in 0..3 {
                    let nn = weighted_norm_or_zero(&phi_bracket(j, &n.series)?, &radii.r)?;
                    q[j] = if raw[j] > 0.0 { nn / raw[j] } else { f64::INFINITY };
                }
                log::debug!("order {r}: next-to-leading remainder ratio {q:?}");
                Some(q)
            }
            None => None,
        };
        rows.push(BoundRow { r, degree: lead.degree, b, next_ratio });
    }
    Ok(BoundsTable { rows, c: radii.c })
}

fn weighted_norm_or_zero(f: &PoissonSeries, radii: &[f64; 3]) -> Result<f64> {
    if f.is_empty() {
        Ok(0.0)
    } else {
        weighted_norm(f, radii)
    }
}

/// `τ(ρ₀, r)` for the remainder degree `r + 3`; `+∞` when every `B` vanishes.
pub fn tau(rho0: f64, r: usize, b: &[f64; 3], radii: &[f64; 3]) -> f64 {
    tau_for_degree(rho0, r as u32 + 3, b, radii).0
}

/// `τ` for a remainder of degree `d`, with the limiting mode (smallest
/// index on ties).
pub fn tau_for_degree(rho0: f64, degree: u32, b: &[f64; 3], radii: &[f64; 3]) -> (f64, Option<usize>) {
    let p = degree as i32 - 2;
    let pf = p as f64;
    let mut best = (f64::INFINITY, None);
    for j in 0..3 {
        if b[j] > 0.0 {
            let t = (1.0 - 0.5f64.powi(p)) * radii[j] * radii[j] / (pf * b[j] * rho0.powi(p));
            if t < best.0 {
                best = (t, Some(j));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalTime {
    pub r_opt: usize,
    pub t: f64,
    pub limiting_j: Option<usize>,
    /// The largest computed order attains the maximum, so the optimum may
    /// lie beyond it.
    pub boundary: bool,
}

/// `T(ρ₀) = max_r τ(ρ₀, r)`, smallest `r` on ties.
pub fn optimal_time(rho0: f64, bounds: &BoundsTable, radii: &[f64; 3]) -> Result<OptimalTime> {
    if !(rho0 > 0.0) {
        return Err(Error::Precondition(format!("ρ₀ must be positive, got {rho0}")));
    }
    let mut best: Option<OptimalTime> = None;
    let mut last = 0.0;
    for row in &bounds.rows {
        let (t, j) = tau_for_degree(rho0, row.degree, &row.b, radii);
        last = t;
        if best.as_ref().is_none_or(|b| t > b.t) {
            best = Some(OptimalTime { r_opt: row.r, t, limiting_j: j, boundary: false });
        }
    }
    let mut best = best.ok_or_else(|| Error::Precondition("empty bounds table".into()))?;
    best.boundary = last >= best.t;
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub rho0: f64,
    pub r_opt: usize,
    pub t: f64,
    pub limiting_j: Option<usize>,
    pub boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub samples: Vec<CurveSample>,
    pub bounds: BoundsTable,
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// 40 log-spaced points in `[0.3, 1.2]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.3, 1.2, 40)
}

pub fn sweep_curve(bounds: &BoundsTable, radii: &[f64; 3], grid: &[f64]) -> Result<StabilityCurve> {
    if grid.is_empty() || grid.iter().any(|&r| !(r > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("ρ₀ grid must be positive and strictly increasing".into()));
    }
    let samples = grid
        .iter()
        .map(|&rho0| {
            let o = optimal_time(rho0, bounds, radii)?;
            Ok(CurveSample { rho0, r_opt: o.r_opt, t: o.t, limiting_j: o.limiting_j, boundary: o.boundary })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityCurve { samples, bounds: bounds.clone() })
}

impl StabilityCurve {
    /// `ρ₀` at which `T` crosses `target`, interpolating `log T` linearly in
    /// `log ρ₀`.
    pub fn rho_at_time(&self, target: f64) -> Option<f64> {
        self.samples.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if (a.t - target) * (b.t - target) > 0.0 || !a.t.is_finite() || !b.t.is_finite() {
                return None;
            }
            let s = (target.ln() - a.t.ln()) / (b.t.ln() - a.t.ln());
            Some((a.rho0.ln() + s * (b.rho0.ln() - a.rho0.ln())).exp())
        })
    }

    /// Slopes of `log T` against `log(1/ρ₀)` between neighbouring samples,
    /// ordered by decreasing `ρ₀`.
    pub fn log_slopes(&self) -> Vec<f64> {
        self.samples
            .windows(2)
            .rev()
            .map(|w| (w[0].t.ln() - w[1].t.ln()) / (w[1].rho0.ln() - w[0].rho0.ln()))
            .collect()
    }
}

/// Writes `rho0,r_opt,T_years,limiting_j,boundary_flag` rows (`limiting_j`
/// is 1-based, 0 when every bound vanishes).
pub fn write_curve_csv<W: Write>(curve: &StabilityCurve, mut w: W) -> Result<()> {
    writeln!(w, "rho0,r_opt,T_years,limiting_j,boundary_flag")?;
    for s in &curve.samples {
        writeln!(
            w,
            "{:e},{},{:e},{},{}",
            s.rho0,
            s.r_opt,
            s.t,
            s.limiting_j.map_or(0, |j| j + 1),
            u8::from(s.boundary)
        )?;
    }
    Ok(())
}

fn csv_rows<R: BufRead>(r: R, ncol: usize) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if f.len() != ncol {
            return Err(Error::Parse { line: i + 1, msg: format!("expected {ncol} columns, found {}", f.len()) });
        }
        out.push(f);
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number '{s}'") })
}

/// Reads the samples written by [`write_curve_csv`].
pub fn read_curve_csv<R: BufRead>(r: R) -> Result<Vec<CurveSample>> {
    csv_rows(r, 5)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let j: usize = num(&f[3], i + 2)?;
            Ok(CurveSample {
                rho0: num(&f[0], i + 2)?,
                r_opt: num(&f[1], i + 2)?,
                t: num(&f[2], i + 2)?,
                limiting_j: j.checked_sub(1),
                boundary: num::<u8>(&f[4], i + 2)? != 0,
            })
        })
        .collect()
}

/// Writes `r,j,B,degree` rows, `j` 1-based.
pub fn write_bounds_csv<W: Write>(bounds: &BoundsTable, mut w: W) -> Result<()> {
    writeln!(w, "r,j,B,degree")?;
    for row in &bounds.rows {
        for j in 0..3 {
            writeln!(w, "{},{},{:e},{}", row.r, j + 1, row.b[j], row.degree)?;
        }
    }
    Ok(())
}

/// Reads the table written by [`write_bounds_csv`]; `c` is not stored.
pub fn read_bounds_csv<R: BufRead>(r: R, c: f64) -> Result<BoundsTable> {
    let mut rows: Vec<BoundRow> = Vec::new();
    for (i, f) in csv_rows(r, 4)?.iter().enumerate() {
        let (r, j, b, degree): (usize, usize, f64, u32) =
            (num(&f[0], i + 2)?, num(&f[1], i + 2)?, num(&f[2], i + 2)?, num(&f[3], i + 2)?);
        if !(1..=3).contains(&j) {
            return Err(Error::Parse { line: i + 2, msg: format!("mode index {j} out of range") });
        }
        if rows.last().is_none_or(|x| x.r != r) {
            rows.push(BoundRow { r, degree, b: [0.0; 3], next_ratio: None });
        }
        rows.last_mut().expect("pushed above").b[j - 1] = b;
    }
    Ok(BoundsTable { rows, c })
}

/// Largest `ΔΦ_j` in order-`r` variables along an orbit of `h0`, where `r`
/// is `nf.r_max`: the orbit is integrated in the original variables, mapped
/// through `coords` (from [`NormalFormResult::normalizing_coordinates`]) and
/// `Φ̇_j = {Φ_j, H^(r) − Z}` is integrated by the trapezoid rule.
pub fn phi_drift(
    h0: &PoissonSeries,
    nf: &NormalFormResult,
    coords: &[PoissonSeries],
    start: &[f64; 6],
    t_end: f64,
    steps: usize,
) -> Result<[f64; 3]> {
    let field = PolyField::new(h0);
    let rem = nf.hamiltonian.filter_terms(|t| t.mono.deg_sec() > nf.r_max as u32 + 2);
    let rates = (0..3).map(|j| phi_bracket(j, &rem)).collect::<Result<Vec<_>>>()?;
    let rate = |v: &[f64; 6]| -> [f64; 3] {
        let p = PhasePoint::secular(
            [0, 1, 2].map(|i| coords[i].evaluate(&crate::birkhoff::point(v))),
            [3, 4, 5].map(|i| coords[i].evaluate(&crate::birkhoff::point(v))),
        );
        [0, 1, 2].map(|j| rates[j].evaluate(&p))
    };
    let dt = t_end / steps as f64;
    let mut v = *start;
    let mut prev = rate(&v);
    let mut acc = [0.0; 3];
    let mut worst = [0.0f64; 3];
    for _ in 0..steps {
        v = field.step(&v, dt);
        let cur = rate(&v);
        for j in 0..3 {
            acc[j] += 0.5 * dt * (prev[j] + cur[j]);
            worst[j] = worst[j].max(acc[j].abs());
        }
        prev = cur;
    }
    Ok(worst)
}

/// Largest `max_j |(x_j, y_j)| / R_j` along an orbit of `h0`.
pub fn max_excursion(h0: &PoissonSeries, radii: &[f64; 3], start: &[f64; 6], t_end: f64, dt: f64) -> f64 {
    let field = PolyField::new(h0);
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let size = |v: &[f64; 6]| (0..3).map(|j| v[j].hypot(v[3 + j]) / radii[j]).fold(0.0f64, f64::max);
    let mut v = *start;
    let mut worst = size(&v);
    for _ in 0..steps {
        v = field.step(&v, h);
        worst = worst.max(size(&v));
    }
    worst
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values() {
        assert_eq!(theta(5, 0), 1.0);
        assert_eq!(theta(0, 0), 1.0);
        assert!((theta(1, 1) - 0.5).abs() < 1e-15);
        assert!((theta(2, 1) - (4.0f64 / 27.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tau_unit_case() {
        assert!((tau(0.5, 1, &[1.0; 3], &[1.0; 3]) - 1.5).abs() < 1e-15);
        assert_eq!(tau(0.5, 1, &[0.0; 3], &[1.0; 3]), f64::INFINITY);
    }
}
