use log::warn;

use super::monomial::{Harmonic, Trig, Var, Wave};
use super::series::{product_sum, Accumulator, PoissonSeries, TruncationPolicy, WaveFilter};
use crate::error::{Error, Result};

/// Which canonical pairs enter a Poisson bracket.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BracketBlock {
    /// Fast pairs `(λ_j, L_j)` only.
    Fast,
    /// Secular pairs `(η_j, ξ_j)` only.
    Secular,
    /// Both.
    Full,
}

/// Default tolerance on `|k·n*|` for the homological equation (rad/yr).
pub const SMALL_DIVISOR_TOL: f64 = 1e-6;
/// Default maximum number of Lie-series terms.
pub const MAX_LIE_ORDER: usize = 24;

/// Poisson bracket `{a, b}`.
///
/// With `q`/`p` the coordinate/momentum of each pair,
/// `{a, b} = Σ ∂a/∂q ∂b/∂p − ∂a/∂p ∂b/∂q`, the fast pairs being
/// `(q, p) = (λ_j, L_j)` and the secular pairs `(q, p) = (η_j, ξ_j)`.
/// The secular orientation follows from `ξ + iη = √(2Γ) e^{-iϖ}` with
/// `(−ϖ, Γ)` canonical; it makes `ḟ = {f, H}` the true flow of the
/// planetary problem.
pub fn poisson_bracket(
    a: &PoissonSeries,
    b: &PoissonSeries,
    block: BracketBlock,
    policy: &TruncationPolicy,
) -> Result<PoissonSeries> {
    bracket_filtered(a, b, block, policy, None)
}

/// Poisson bracket whose output is restricted to the harmonics accepted by
/// `filter` (pairs of blocks that cannot reach an accepted harmonic are
/// skipped entirely).
pub fn bracket_filtered(
    a: &PoissonSeries,
    b: &PoissonSeries,
    block: BracketBlock,
    policy: &TruncationPolicy,
    filter: WaveFilter<'_>,
) -> Result<PoissonSeries> {
    let mut derivs: Vec<(PoissonSeries, PoissonSeries, f64)> = Vec::new();
    for j in 0..3 {
        if matches!(block, BracketBlock::Fast | BracketBlock::Full) {
            derivs.push((a.derive_angle(j), b.derive(Var::L(j)), 1.0));
            derivs.push((a.derive(Var::L(j)), b.derive_angle(j), -1.0));
        }
        if matches!(block, BracketBlock::Secular | BracketBlock::Full) {
            derivs.push((a.derive(Var::Eta(j)), b.derive(Var::Xi(j)), 1.0));
            derivs.push((a.derive(Var::Xi(j)), b.derive(Var::Eta(j)), -1.0));
        }
    }
    let parts: Vec<(&PoissonSeries, &PoissonSeries, f64)> =
        derivs.iter().map(|(x, y, s)| (x, y, *s)).collect();
    product_sum(&parts, policy, filter)
}

/// `⟨f⟩_λ`: keeps the λ-independent terms.
pub fn angle_average(f: &PoissonSeries) -> PoissonSeries {
    f.filter_waves(|w| w.k.is_zero())
}

/// `⌈f⌉_{λ;K}`: keeps the harmonics with `0 < |k|₁ ≤ K`.
pub fn fourier_select(f: &PoissonSeries, max_k: u32) -> PoissonSeries {
    f.filter_waves(|w| !w.k.is_zero() && w.k.norm1() <= max_k)
}

/// Keeps exactly the harmonics `±k*`.
pub fn resonant_project(f: &PoissonSeries, kstar: [i32; 3]) -> PoissonSeries {
    let (kc, _) = Harmonic(kstar).canonical();
    f.filter_waves(|w| w.k == kc)
}

/// Everything except the harmonics `±k*`.
pub fn resonant_complement(f: &PoissonSeries, kstar: [i32; 3]) -> PoissonSeries {
    let (kc, _) = Harmonic(kstar).canonical();
    f.filter_waves(|w| w.k != kc)
}

/// Solves `Σ_j n_j ∂χ/∂λ_j + f = 0` term by term.
///
/// `c cos(k·λ) P ↦ −c sin(k·λ) P/(k·n)` and `c sin(k·λ) P ↦ c cos(k·λ) P/(k·n)`.
pub fn solve_homological(f: &PoissonSeries, nstar: &[f64; 3], tol: f64) -> Result<PoissonSeries> {
    if f.blocks.keys().any(|w| w.k.is_zero()) {
        return Err(Error::Precondition(
            "homological equation requires a zero angle average".into(),
        ));
    }
    let mut acc = Accumulator::new(f.policy);
    for (w, b) in &f.blocks {
        let d = w.k.dot(nstar);
        if d.abs() <= tol {
            return Err(Error::SmallDivisor {
                k: w.k.0,
                divisor: d.abs(),
                tol,
            });
        }
        let (trig, s) = match w.trig {
            Trig::Cos => (Trig::Sin, -1.0 / d),
            Trig::Sin => (Trig::Cos, 1.0 / d),
        };
        let nw = Wave { k: w.k, trig };
        for &(m, c) in b {
            acc.push_canonical(nw, m, c * s);
        }
    }
    acc.finish()
}

/// `Σ_j n_j ∂f/∂λ_j`.
pub fn frequency_derivative(f: &PoissonSeries, n: &[f64; 3]) -> PoissonSeries {
    let parts: Vec<PoissonSeries> = (0..3).map(|j| f.derive_angle(j)).collect();
    PoissonSeries::weighted_sum(
        &[(n[0], &parts[0]), (n[1], &parts[1]), (n[2], &parts[2])],
        f.policy,
    )
}

/// Outcome of a Lie-series transform.
#[derive(Clone, Debug)]
pub struct LieTransform {
    pub series: PoissonSeries,
    /// Number of bracket iterations actually applied.
    pub orders_used: usize,
    /// ℓ¹ norm of the last nonzero term added.
    pub tail_norm: f64,
    pub converged: bool,
}

/// `exp(L_χ) H = Σ_s L_χ^s H / s!` with `L_χ · = {χ, ·}`.
///
/// Stops when a term vanishes under truncation or after `max_order`
/// brackets; in the latter case a non-convergence warning is logged when
/// the tail still exceeds the policy's drop tolerance.
pub fn lie_transform(
    h: &PoissonSeries,
    chi: &PoissonSeries,
    policy: &TruncationPolicy,
    max_order: usize,
) -> Result<LieTransform> {
    let mut total = h.truncate(*policy);
    let mut term = total.clone();
    let mut tail = term.norm1();
    let mut used = 0;
    let mut converged = true;
    for s in 1..=max_order {
        term = poisson_bracket(chi, &term, BracketBlock::Full, policy)?.scale(1.0 / s as f64);
        if term.is_empty() {
            break;
        }
        used = s;
        tail = term.norm1();
        total = total.add_scaled(&term, 1.0);
        if s == max_order && tail > policy.drop_tol {
            converged = false;
            warn!("Lie series not converged after {max_order} orders (tail {tail:.3e})");
        }
    }
    Ok(LieTransform {
        series: total,
        orders_used: used,
        tail_norm: tail,
        converged,
    })
}

/// Convenience wrapper returning only the transformed series.
pub fn lie_series(
    h: &PoissonSeries,
    chi: &PoissonSeries,
    policy: &TruncationPolicy,
) -> Result<PoissonSeries> {
    Ok(lie_transform(h, chi, policy, MAX_LIE_ORDER)?.series)
}

/// True when every harmonic satisfies the D'Alembert rule: the secular
/// degree `d` of its coefficient obeys `d ≥ |Σk|` and `d ≡ Σk (mod 2)`.
pub fn dalembert_violations(f: &PoissonSeries) -> Vec<(Wave, u32)> {
    f.terms().filter(|t| !dalembert_ok(t)).map(|t| (t.wave, t.mono.deg_sec())).collect()
}

fn dalembert_ok(t: &super::series::Term) -> bool {
    let s = t.wave.k.sum().unsigned_abs();
    let d = t.mono.deg_sec();
    d >= s && (d - s) % 2 == 0
}

/// Removes the terms breaking the D'Alembert rule and returns the largest
/// removed coefficient. For a rotation-invariant function these terms are
/// zero, so what is removed is rounding residue of cancellations.
pub fn purge_dalembert(f: &PoissonSeries) -> (PoissonSeries, f64) {
    let removed = f.terms().filter(|t| !dalembert_ok(t)).fold(0.0f64, |m, t| m.max(t.coeff.abs()));
    if removed == 0.0 {
        return (f.clone(), 0.0);
    }
    (f.filter_terms(dalembert_ok), removed)
}
