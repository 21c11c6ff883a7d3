//! Diagonalization of the quadratic secular part and Birkhoff normal form
//! about the elliptic equilibrium.
//!
//! Real polynomials in `(x, y)` are [`PoissonSeries`] with `x` in the ξ
//! slots and `y` in the η slots, so the secular bracket applies unchanged.
//! The normalization runs in `z = x + iy`, `z̄ = x − iy`, where
//! `{z_j, z̄_j} = 2i` and `{z^a z̄^b, ω·Φ} = i ω·(a − b) z^a z̄^b`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix6, Vector6};
use num_complex::Complex64 as C64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::io_err;
use crate::pseries::{read_series, write_series, Monomial, PhasePoint, PoissonSeries, Term, TruncationPolicy, Var, Wave};
use crate::secular::SecularHamiltonian;

/// Smallest admissible `|k·ω|`, rad/yr.
pub const RESONANCE_TOL: f64 = 1e-9;
/// Relative tolerance for the block structure of the quadratic form.
pub const BLOCK_TOL: f64 = 1e-10;
/// Terms breaking the rotational symmetry below this fraction of their
/// degree's largest coefficient are treated as rounding and dropped.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Linear symplectic change of variables `(ξ, η) = D (x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizingMap {
    /// Row-major 6×6 matrix; rows `(ξ₁, ξ₂, ξ₃, η₁, η₂, η₃)`, columns
    /// `(x₁, x₂, x₃, y₁, y₂, y₃)`.
    pub matrix: [[f64; 6]; 6],
    pub omega: [f64; 3],
    /// True when one orthogonal matrix diagonalizes both blocks.
    pub block_structure: bool,
    /// Largest off-diagonal quadratic coefficient after the change of
    /// variables, relative to `max |ω|`.
    pub residual: f64,
}

impl DiagonalizingMap {
    pub fn identity(omega: [f64; 3]) -> Self {
        DiagonalizingMap {
            matrix: std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 })),
            omega,
            block_structure: true,
            residual: 0.0,
        }
    }

    pub fn as_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.matrix[i][j])
    }

    /// `(ξ, η)` of the point `(x, y)`.
    pub fn apply(&self, x: &[f64; 3], y: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
        let v = self.as_matrix() * Vector6::new(x[0], x[1], x[2], y[0], y[1], y[2]);
        ([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }

    /// Largest entry of `DᵀJD − J`.
    pub fn symplectic_error(&self) -> f64 {
        let d = self.as_matrix();
        let j = symplectic_unit();
        (d.transpose() * j * d - j).amax()
    }
}

/// `J` with `ẋ = −∂H/∂y`, `ẏ = ∂H/∂x`, i.e. `v̇ = J ∇H` for `v = (x, y)`.
fn symplectic_unit() -> Matrix6<f64> {
    let mut j = Matrix6::zeros();
    for i in 0..3 {
        j[(i, 3 + i)] = -1.0;
        j[(3 + i, i)] = 1.0;
    }
    j
}

fn sec_var(i: usize) -> Var {
    if i < 3 {
        Var::Xi(i)
    } else {
        Var::Eta(i - 3)
    }
}

/// Hessian of the degree-2 part, variables ordered `(ξ₁, ξ₂, ξ₃, η₁, η₂, η₃)`.
pub fn quadratic_matrix(f: &PoissonSeries) -> Matrix6<f64> {
    Matrix6::from_fn(|i, j| {
        let m = Monomial::var(sec_var(i)).mul(Monomial::var(sec_var(j)));
        let c = f.coeff(m, Wave::CONST);
        if i == j {
            2.0 * c
        } else {
            c
        }
    })
}

/// Diagonalizes the quadratic part of the secular Hamiltonian and rewrites
/// the whole series in the new variables.
pub fn diagonalize_quadratic(sec: &SecularHamiltonian) -> Result<(DiagonalizingMap, PoissonSeries)> {
    diagonalize_series(&sec.series)
}

pub fn diagonalize_series(f: &PoissonSeries) -> Result<(DiagonalizingMap, PoissonSeries)> {
    if f.terms().any(|t| t.mono.deg_l() != 0 || !t.wave.k.is_zero()) {
        return Err(Error::Precondition("expected a series in (ξ, η) only".into()));
    }
    let m = quadratic_matrix(f);
    let scale = m.amax();
    if scale == 0.0 {
        return Err(Error::Degenerate("no quadratic part".into()));
    }
    let a = m.fixed_view::<3, 3>(0, 0).into_owned();
    let b = m.fixed_view::<3, 3>(3, 3).into_owned();
    let c = m.fixed_view::<3, 3>(0, 3).into_owned();
    let blocks = (a - b).amax() <= BLOCK_TOL * scale && c.amax() <= BLOCK_TOL * scale;
    let (d, omega) = if blocks {
        block_diagonalize(&((a + b) * 0.5), scale)?
    } else {
        log::warn!(
            "quadratic form lacks the ξ/η block structure (block mismatch {:.2e}, coupling {:.2e}); using general symplectic reduction",
            (a - b).amax() / scale,
            c.amax() / scale
        );
        williamson(&m, scale)?
    };
    let max_deg = f.max_deg_sec().unwrap_or(2);
    let h = substitute_linear(f, &d, max_deg);
    let quad = h.sec_degree_part(2);
    let target = PoissonSeries::from_terms(
        (0..3).flat_map(|j| {
            [
                Term::new([0; 3], unit(j, 2), [0; 3], [0; 3], crate::Trig::Cos, omega[j] / 2.0),
                Term::new([0; 3], [0; 3], unit(j, 2), [0; 3], crate::Trig::Cos, omega[j] / 2.0),
            ]
        }),
        *h.policy(),
    );
    let wmax = omega.iter().fold(0.0f64, |s, w| s.max(w.abs()));
    let residual = (&quad - &target).max_abs_coeff() / wmax;
    let h = &h.filter_terms(|t| t.mono.deg_sec() != 2) + &target;
    let map = DiagonalizingMap {
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| d[(i, j)])),
        omega,
        block_structure: blocks,
        residual,
    };
    log::info!("secular frequencies ω = {omega:?} rad/yr (diagonalization residual {residual:.2e})");
    Ok((map, h))
}

fn unit(j: usize, e: u32) -> [u32; 3] {
    let mut u = [0; 3];
    u[j] = e;
    u
}

/// One orthogonal `O` for both blocks: `ξ = O x`, `η = O y`. Modes are
/// sorted by increasing ω; each column has a positive diagonal entry.
fn block_diagonalize(a: &Matrix3<f64>, scale: f64) -> Result<(Matrix6<f64>, [f64; 3])> {
    let eig = a.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut d = Matrix6::zeros();
    let mut omega = [0.0; 3];
    for (col, &k) in idx.iter().enumerate() {
        omega[col] = eig.eigenvalues[k];
        if omega[col].abs() <= BLOCK_TOL * scale {
            return Err(Error::Degenerate(format!("zero frequency in mode {}", col + 1)));
        }
        let mut v = eig.eigenvectors.column(k).into_owned();
        if v[col] < 0.0 {
            v = -v;
        }
        for r in 0..3 {
            d[(r, col)] = v[r];
            d[(3 + r, 3 + col)] = v[r];
        }
    }
    Ok((d, omega))
}

/// Symplectic reduction of a definite quadratic form `½ vᵀ M v` to
/// `Σ ω_j (x_j² + y_j²)/2`.
fn williamson(m: &Matrix6<f64>, scale: f64) -> Result<(Matrix6<f64>, [f64; 3])> {
    let eig = m.symmetric_eigen();
    let sgn = if eig.eigenvalues.iter().all(|&e| e > BLOCK_TOL * scale) {
        1.0
    } else if eig.eigenvalues.iter().all(|&e| e < -BLOCK_TOL * scale) {
        -1.0
    } else {
        return Err(Error::Degenerate(format!(
            "indefinite or singular quadratic form, eigenvalues {:?}",
            eig.eigenvalues.as_slice()
        )));
    };
    let v = &eig.eigenvectors;
    let root = |p: f64| -> Matrix6<f64> {
        let diag = Matrix6::from_diagonal(&eig.eigenvalues.map(|e| (sgn * e).powf(p)));
        v * diag * v.transpose()
    };
    let (half, inv_half) = (root(0.5), root(-0.5));
    let k = half * symplectic_unit() * half;
    let (q, t) = nalgebra::Schur::new(k).unpack();
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < 6 {
        if i + 1 >= 6 || t[(i + 1, i)].abs() <= BLOCK_TOL * t.amax() {
            return Err(Error::Degenerate("quadratic form is not diagonalizable by a symplectic map".into()));
        }
        let beta = t[(i, i + 1)];
        let (cx, cy) = if beta < 0.0 { (i, i + 1) } else { (i + 1, i) };
        pairs.push((sgn * beta.abs(), cx, cy, beta.abs().sqrt()));
        i += 2;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ql = Matrix6::zeros();
    let mut omega = [0.0; 3];
    for (j, &(w, cx, cy, lam)) in pairs.iter().enumerate() {
        omega[j] = w;
        ql.set_column(j, &(q.column(cx) * lam));
        ql.set_column(3 + j, &(q.column(cy) * lam));
    }
    Ok((inv_half * ql, omega))
}

/// Rewrites a series in `(ξ, η)` through `(ξ, η) = D (x, y)`.
pub fn substitute_linear(f: &PoissonSeries, d: &Matrix6<f64>, max_deg: u32) -> PoissonSeries {
    let pol = TruncationPolicy::secular(max_deg);
    let forms: Vec<PoissonSeries> = (0..6)
        .map(|i| {
            PoissonSeries::from_terms(
                (0..6).filter(|&m| d[(i, m)] != 0.0).map(|m| {
                    let mono = Monomial::var(sec_var(m));
                    Term { mono, wave: Wave::CONST, coeff: d[(i, m)] }
                }),
                pol,
            )
        })
        .collect();
    let mut powers: FxHashMap<(usize, u32), PoissonSeries> = FxHashMap::default();
    let mut acc: FxHashMap<Monomial, f64> = FxHashMap::default();
    for t in f.sorted_terms() {
        let mut prod = PoissonSeries::constant(t.coeff, pol);
        for (i, form) in forms.iter().enumerate() {
            let e = t.mono.exp(3 + i);
            if e == 0 {
                continue;
            }
            let p = powers
                .entry((i, e))
                .or_insert_with(|| form.pow(e, &pol).expect("linear forms stay within the degree limit"))
                .clone();
            prod = prod.mul(&p, &pol).expect("degree within the limit");
        }
        for u in prod.terms() {
            *acc.entry(u.mono).or_insert(0.0) += u.coeff;
        }
    }
    let mut terms: Vec<Term> = acc
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(mono, coeff)| Term { mono, wave: Wave::CONST, coeff })
        .collect();
    terms.sort_by(|a, b| a.key_cmp(b));
    PoissonSeries::from_terms(terms, pol)
}

/// `(x, y) = D⁻¹ (ξ, η)`.
pub fn transform_initial_point(d: &DiagonalizingMap, xi0: &[f64; 3], eta0: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    let lu = d.as_matrix().lu();
    let w = lu
        .solve(&Vector6::new(xi0[0], xi0[1], xi0[2], eta0[0], eta0[1], eta0[2]))
        .ok_or_else(|| Error::Degenerate("singular diagonalizing map".into()))?;
    Ok(([w[0], w[1], w[2]], [w[3], w[4], w[5]]))
}

/// Reads `ω` from `Σ ω_j (x_j² + y_j²)/2`; the rest of the quadratic part
/// must vanish.
pub fn omega_of(h0: &PoissonSeries) -> Result<[f64; 3]> {
    let m = quadratic_matrix(h0);
    let omega = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let scale = m.amax();
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { omega[i % 3] } else { 0.0 };
            if (m[(i, j)] - want).abs() > BLOCK_TOL * scale {
                return Err(Error::Precondition("quadratic part is not in diagonal form".into()));
            }
        }
    }
    if omega.iter().any(|&w| w == 0.0) {
        return Err(Error::Degenerate(format!("zero frequency in {omega:?}")));
    }
    Ok(omega)
}

/// Smallest `|k·ω|` over `0 < |k|₁ ≤ order`, with the minimizing `k`.
pub fn resonance_margin(omega: &[f64; 3], order: usize) -> (f64, [i32; 3]) {
    let n = order as i32;
    let mut best = (f64::INFINITY, [0; 3]);
    for k1 in -n..=n {
        for k2 in -(n - k1.abs())..=(n - k1.abs()) {
            let rest = n - k1.abs() - k2.abs();
            for k3 in -rest..=rest {
                if k1 == 0 && k2 == 0 && k3 == 0 {
                    continue;
                }
                let v = (k1 as f64 * omega[0] + k2 as f64 * omega[1] + k3 as f64 * omega[2]).abs();
                if v < best.0 {
                    best = (v, [k1, k2, k3]);
                }
            }
        }
    }
    best
}

// Complex polynomials in (z, z̄): exponents packed eight bits each, z̄ in
// the upper half.
type Key = u64;
type CMap = FxHashMap<Key, C64>;

const ZSTEP: [Key; 3] = [1, 1 << 8, 1 << 16];
const ZBSTEP: [Key; 3] = [1 << 24, 1 << 32, 1 << 40];

#[inline]
fn unpack(k: Key) -> [u32; 6] {
    std::array::from_fn(|i| ((k >> (8 * i)) & 0xff) as u32)
}

fn pack(e: &[u32; 6]) -> Key {
    e.iter().enumerate().fold(0, |k, (i, &x)| k | ((x as Key) << (8 * i)))
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Degree-graded complex polynomial.
#[derive(Clone, Debug)]
struct CPoly {
    parts: Vec<CMap>,
}

impl CPoly {
    fn zero(max_deg: u32) -> Self {
        CPoly { parts: vec![CMap::default(); max_deg as usize + 1] }
    }

    fn max_deg(&self) -> usize {
        self.parts.len() - 1
    }

    fn from_real(f: &PoissonSeries, max_deg: u32) -> Result<Self> {
        let mut out = CPoly::zero(max_deg);
        for t in f.terms() {
            if t.mono.deg_l() != 0 || !t.wave.k.is_zero() {
                return Err(Error::Precondition("expected a polynomial in (x, y) only".into()));
            }
            let d = t.mono.deg_sec();
            if d <= max_deg {
                let e = [3, 4, 5, 6, 7, 8].map(|s| t.mono.exp(s));
                *out.parts[d as usize].entry(pack(&e)).or_default() += C64::new(t.coeff, 0.0);
            }
        }
        for p in out.parts.iter_mut() {
            *p = change_basis(std::mem::take(p), mode_to_complex);
        }
        Ok(out)
    }

    /// Real part as a polynomial in `(x, y)`.
    fn to_real(&self) -> PoissonSeries {
        real_of(self.parts.iter().flat_map(|p| p.iter()), self.max_deg() as u32)
    }

    fn add_assign(&mut self, o: &CPoly) {
        for (d, p) in o.parts.iter().enumerate() {
            for (k, c) in p {
                *self.parts[d].entry(*k).or_default() += c;
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }
}

fn breaks_rotation(k: Key) -> bool {
    let e = unpack(k);
    e[0] + e[1] + e[2] != e[3] + e[4] + e[5]
}

/// A Hamiltonian commuting with `Σ (x_j² + y_j²)/2` only has monomials
/// `z^a z̄^b` with `|a| = |b|`. When every other monomial is rounding-level
/// they are removed, since the small divisors of those monomials would
/// amplify them order after order. Returns the largest removed
/// coefficient relative to its degree, or `None` if nothing was removed
/// because the input is genuinely not invariant.
fn purge_symmetry_breaking(h: &mut CPoly) -> Option<f64> {
    let mut worst = 0.0f64;
    for p in &h.parts {
        let scale = p.values().fold(0.0f64, |s, c| s.max(c.norm()));
        let bad = p.iter().filter(|(k, _)| breaks_rotation(**k)).fold(0.0f64, |s, (_, c)| s.max(c.norm()));
        if bad > 0.0 {
            worst = worst.max(bad / scale);
        }
    }
    if worst > SYMMETRY_TOL {
        return None;
    }
    for p in h.parts.iter_mut() {
        p.retain(|k, _| !breaks_rotation(*k));
    }
    if worst > 0.0 {
        log::info!("dropped rotation-breaking rounding residue, relative size {worst:.1e}");
    }
    Some(worst)
}

/// The real function represented by a conjugate-symmetric map.
fn real_of<'a, I: Iterator<Item = (&'a Key, &'a C64)>>(terms: I, max_deg: u32) -> PoissonSeries {
    let mut half = CMap::default();
    for (&k, &c) in terms {
        // a ≠ b pairs with its conjugate; keep one and double it.
        match (k & HALF).cmp(&(k >> 24)) {
            std::cmp::Ordering::Greater => *half.entry(k).or_default() += 2.0 * c,
            std::cmp::Ordering::Equal => *half.entry(k).or_default() += c,
            std::cmp::Ordering::Less => {}
        }
    }
    let real = change_basis(half, mode_to_real);
    let mut terms: Vec<Term> = real
        .into_iter()
        .filter(|(_, c)| c.re != 0.0)
        .map(|(k, c)| {
            let e = unpack(k);
            Term {
                mono: Monomial::new([0; 3], [e[0], e[1], e[2]], [e[3], e[4], e[5]]),
                wave: Wave::CONST,
                coeff: c.re,
            }
        })
        .collect();
    terms.sort_by(|a, b| a.key_cmp(b));
    PoissonSeries::from_terms(terms, TruncationPolicy::secular(max_deg))
}

/// Applies a per-mode change of basis `(u, v) ↦ Σ c (u', v')` to every
/// mode in turn; exponent pairs of mode `j` sit in slots `j` and `3 + j`.
fn change_basis(mut f: CMap, per_mode: fn(u32, u32) -> Vec<(u32, u32, C64)>) -> CMap {
    let mut cache: FxHashMap<(u32, u32), Vec<(u32, u32, C64)>> = FxHashMap::default();
    for j in 0..3 {
        let mut out = CMap::with_capacity_and_hasher(f.len(), Default::default());
        for (k, c) in f {
            let mut e = unpack(k);
            let images = cache.entry((j as u32, (e[j] << 16) | e[3 + j])).or_insert_with(|| per_mode(e[j], e[3 + j]));
            for &(u, v, w) in images.iter() {
                e[j] = u;
                e[3 + j] = v;
                *out.entry(pack(&e)).or_default() += c * w;
            }
        }
        f = out;
    }
    f
}

/// `x^p y^q` with `x = (z + z̄)/2`, `y = (z − z̄)/(2i)`, as `(a, b, c)`
/// triples of `c z^a z̄^b`.
fn mode_to_complex(p: u32, q: u32) -> Vec<(u32, u32, C64)> {
    let mut acc: BTreeMap<u32, C64> = BTreeMap::new();
    let norm = C64::new(0.0, -0.5).powi(q as i32) * 0.5f64.powi(p as i32);
    for u in 0..=p {
        for v in 0..=q {
            let sign = if (q - v) % 2 == 0 { 1.0 } else { -1.0 };
            *acc.entry(u + v).or_default() += norm * binom(p, u) * binom(q, v) * sign;
        }
    }
    acc.into_iter().map(|(a, c)| (a, p + q - a, c)).collect()
}

/// `z^a z̄^b` with `z = x + iy` as `(p, q, c)` triples of `c x^p y^q`.
fn mode_to_real(a: u32, b: u32) -> Vec<(u32, u32, C64)> {
    let mut acc: BTreeMap<u32, C64> = BTreeMap::new();
    let i = C64::new(0.0, 1.0);
    for u in 0..=a {
        for v in 0..=b {
            *acc.entry(u + v).or_default() += i.powi(u as i32) * (-i).powi(v as i32) * binom(a, u) * binom(b, v);
        }
    }
    acc.into_iter().map(|(q, c)| (a + b - q, q, c)).collect()
}

const HALF: Key = (1 << 24) - 1;

#[inline]
fn conj_key(k: Key) -> Key {
    (k >> 24) | ((k & HALF) << 24)
}

/// `{f, g}` of two homogeneous pieces of real functions, accumulated into
/// `out`. Only the terms of `f` with `a ≥ b` are paired; the rest follow by
/// conjugation.
fn bracket_into(f: &CMap, g: &CMap, out: &mut CMap) {
    let gv: Vec<(Key, [i64; 6], C64)> = g.iter().map(|(&k, &c)| (k, unpack(k).map(i64::from), c)).collect();
    let mut half = CMap::default();
    for (&kf, &cf) in f {
        let (ka, kb) = (kf & HALF, kf >> 24);
        if ka < kb {
            continue;
        }
        let ef = unpack(kf).map(i64::from);
        let cf = C64::new(0.0, if ka == kb { 1.0 } else { 2.0 }) * cf;
        for &(kg, eg, cg) in &gv {
            let c = cf * cg;
            for j in 0..3 {
                let w = ef[j] * eg[3 + j] - ef[3 + j] * eg[j];
                if w != 0 {
                    *half.entry(kf + kg - ZSTEP[j] - ZBSTEP[j]).or_default() += c * w as f64;
                }
            }
        }
    }
    for (k, c) in half {
        *out.entry(k).or_default() += c;
        *out.entry(conj_key(k)).or_default() += c.conj();
    }
}

/// `exp(L_χ) h` for `χ` homogeneous of degree `q ≥ 3`.
fn lie_transform(h: &CPoly, chi: &CMap, q: usize) -> CPoly {
    let shift = q - 2;
    let max_deg = h.max_deg();
    let mut out = h.clone();
    let mut term = h.clone();
    let mut s = 1.0;
    loop {
        let mut next = CPoly::zero(max_deg as u32);
        for d in 0..=max_deg {
            if d + shift > max_deg || term.parts[d].is_empty() {
                continue;
            }
            bracket_into(chi, &term.parts[d], &mut next.parts[d + shift]);
        }
        if next.is_empty() {
            break;
        }
        for p in next.parts.iter_mut() {
            for c in p.values_mut() {
                *c /= s;
            }
        }
        out.add_assign(&next);
        term = next;
        s += 1.0;
    }
    out
}

/// A polynomial in the actions `Φ`, as `(exponent, coefficient)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiPoly(pub Vec<([u32; 3], f64)>);

impl PhiPoly {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn eval(&self, phi: &[f64; 3]) -> f64 {
        self.0.iter().map(|(a, c)| c * (0..3).map(|j| phi[j].powi(a[j] as i32)).product::<f64>()).sum()
    }

    /// The same function as a polynomial in `(x, y)`.
    pub fn to_series(&self, max_deg: u32) -> PoissonSeries {
        let pol = TruncationPolicy::secular(max_deg);
        let phi: Vec<PoissonSeries> = (0..3).map(|j| action(j, max_deg)).collect();
        let mut out = PoissonSeries::zero(pol);
        for (a, c) in &self.0 {
            let mut p = PoissonSeries::constant(*c, pol);
            for j in 0..3 {
                p = p.mul(&phi[j].pow(a[j], &pol).expect("within limit"), &pol).expect("within limit");
            }
            out = &out + &p;
        }
        out
    }
}

/// `Φ_j = (x_j² + y_j²)/2`.
pub fn action(j: usize, max_deg: u32) -> PoissonSeries {
    PoissonSeries::from_terms(
        [
            Term::new([0; 3], unit(j, 2), [0; 3], [0; 3], crate::Trig::Cos, 0.5),
            Term::new([0; 3], [0; 3], unit(j, 2), [0; 3], crate::Trig::Cos, 0.5),
        ],
        TruncationPolicy::secular(max_deg),
    )
}

fn phi_poly(part: &CMap) -> PhiPoly {
    let mut v: Vec<([u32; 3], f64)> = part
        .iter()
        .filter_map(|(&k, c)| {
            let e = unpack(k);
            (e[0..3] == e[3..6]).then(|| {
                let a = [e[0], e[1], e[2]];
                (a, c.re * 2f64.powi((a[0] + a[1] + a[2]) as i32))
            })
        })
        .collect();
    v.sort_by(|x, y| x.0.cmp(&y.0));
    PhiPoly(v)
}

/// A homogeneous remainder term and its degree.
#[derive(Clone, Debug)]
pub struct Remainder {
    pub degree: u32,
    pub series: PoissonSeries,
}

/// Everything recorded at normalization order `r`.
#[derive(Clone, Debug)]
pub struct NormalFormOrder {
    pub r: usize,
    /// `Z_r`, homogeneous of degree `r/2 + 1` in `Φ`.
    pub z: PhiPoly,
    /// `χ^(r)`, homogeneous of degree `r + 2` (empty for `r = 0`).
    pub chi: PoissonSeries,
    /// Lowest nonzero remainder term of `H^(r)`, of degree `r + 3` or, when
    /// that one vanishes, `r + 4`. `None` beyond the degree limit.
    pub leading: Option<Remainder>,
    /// The remainder term two degrees above `leading`.
    pub next: Option<Remainder>,
    /// `min |k·ω|` over `0 < |k|₁ ≤ r + 2`.
    pub resonance_margin: f64,
    /// Off-kernel part left by the homological solve that produced this
    /// order, relative to what it removed.
    pub homological_residue: f64,
}

/// Output of [`birkhoff_normalize`].
#[derive(Clone, Debug)]
pub struct NormalFormResult {
    pub omega: [f64; 3],
    pub r_max: usize,
    /// Degree limit of the polynomial algebra.
    pub max_degree: u32,
    pub orders: Vec<NormalFormOrder>,
    /// `H^(r_max)`, truncated at `max_degree`.
    pub hamiltonian: PoissonSeries,
    /// Largest dropped symmetry-breaking coefficient relative to its
    /// degree, when the input was rotation invariant up to rounding.
    pub symmetry_residue: Option<f64>,
}

/// Birkhoff normal form up to order `r_max`, keeping degrees `≤ r_max + 4`.
pub fn birkhoff_normalize(h0: &PoissonSeries, r_max: usize) -> Result<NormalFormResult> {
    birkhoff_normalize_to(h0, r_max, r_max as u32 + 4)
}

/// As [`birkhoff_normalize`] with an explicit degree limit.
pub fn birkhoff_normalize_to(h0: &PoissonSeries, r_max: usize, max_degree: u32) -> Result<NormalFormResult> {
    if max_degree < r_max as u32 + 2 {
        return Err(Error::Precondition(format!("degree limit {max_degree} below r_max + 2")));
    }
    let omega = omega_of(h0)?;
    let (margin, k) = resonance_margin(&omega, r_max + 2);
    if margin < RESONANCE_TOL {
        return Err(Error::ResonantFrequency { k, divisor: margin, tol: RESONANCE_TOL });
    }
    let md = max_degree as usize;
    let mut h = CPoly::from_real(h0, max_degree)?;
    let symmetry_residue = purge_symmetry_breaking(&mut h);
    let mut orders = Vec::with_capacity(r_max + 1);
    let mut chi_real = PoissonSeries::zero(TruncationPolicy::secular(2));
    let mut residue = 0.0;
    for r in 0..=r_max {
        let remainder_at = |d: usize| -> Option<Remainder> {
            (d <= md).then(|| Remainder {
                degree: d as u32,
                series: real_of(h.parts[d].iter(), d as u32),
            })
        };
        let lead_deg = if h.parts.get(r + 3).is_some_and(|p| !p.is_empty()) { r + 3 } else { r + 4 };
        let leading = remainder_at(lead_deg);
        let next = remainder_at(lead_deg + 2);
        orders.push(NormalFormOrder {
            r,
            z: phi_poly(&h.parts[r + 2]),
            chi: chi_real.clone(),
            leading,
            next,
            resonance_margin: resonance_margin(&omega, r + 2).0,
            homological_residue: residue,
        });
        if r == r_max {
            break;
        }
        let q = r + 3;
        if q > md {
            chi_real = PoissonSeries::zero(TruncationPolicy::secular(q as u32));
            residue = 0.0;
            continue;
        }
        let mut chi = CMap::default();
        for (&key, &c) in &h.parts[q] {
            let e = unpack(key);
            if e[0..3] == e[3..6] {
                continue;
            }
            let div: f64 = (0..3).map(|j| omega[j] * (e[j] as f64 - e[3 + j] as f64)).sum();
            chi.insert(key, C64::new(0.0, 1.0) * c / div);
        }
        let removed = h.parts[q].values().fold(0.0f64, |s, c| s.max(c.norm()));
        h = if chi.is_empty() { h } else { lie_transform(&h, &chi, q) };
        let left = h.parts[q].iter().filter(|(k, _)| {
            let e = unpack(**k);
            e[0..3] != e[3..6]
        });
        residue = if removed > 0.0 { left.fold(0.0f64, |s, (_, c)| s.max(c.norm())) / removed } else { 0.0 };
        h.parts[q].retain(|k, _| {
            let e = unpack(*k);
            e[0..3] == e[3..6]
        });
        chi_real = real_of(chi.iter(), q as u32);
        log::debug!("Birkhoff order {}: χ {} terms, homological residue {residue:.1e}", r + 1, chi.len());
    }
    Ok(NormalFormResult {
        omega,
        r_max,
        max_degree,
        orders,
        hamiltonian: h.to_real(),
        symmetry_residue,
    })
}

#[derive(Serialize, Deserialize)]
struct OrderManifest {
    r: usize,
    z: PhiPoly,
    leading_degree: Option<u32>,
    next_degree: Option<u32>,
    resonance_margin: f64,
    homological_residue: f64,
    chi_terms: usize,
    leading_terms: usize,
}

#[derive(Serialize, Deserialize)]
struct NormalFormManifest {
    omega: [f64; 3],
    r_max: usize,
    max_degree: u32,
    #[serde(default)]
    symmetry_residue: Option<f64>,
    orders: Vec<OrderManifest>,
}

impl NormalFormResult {
    pub fn order(&self, r: usize) -> Option<&NormalFormOrder> {
        self.orders.get(r)
    }

    /// `Z_s`.
    pub fn z(&self, s: usize) -> Option<&PhiPoly> {
        self.orders.get(s).map(|o| &o.z)
    }

    /// `𝓕^(r)_{r+1}`, of degree `r + 3`; identically zero for even `r`.
    pub fn remainder(&self, r: usize) -> Result<PoissonSeries> {
        let o = self.orders.get(r).ok_or(Error::MissingRemainder(r))?;
        match &o.leading {
            Some(l) if l.degree == r as u32 + 3 => Ok(l.series.clone()),
            Some(_) => Ok(PoissonSeries::zero(TruncationPolicy::secular(r as u32 + 3))),
            None => Err(Error::MissingRemainder(r)),
        }
    }

    /// The whole normal form `Z₀ + … + Z_r` as a polynomial in `(x, y)`.
    pub fn normal_form_series(&self, r: usize) -> PoissonSeries {
        let md = r as u32 + 2;
        let mut out = PoissonSeries::zero(TruncationPolicy::secular(md));
        for o in self.orders.iter().take(r + 1) {
            out = &out + &o.z.to_series(md);
        }
        out
    }

    /// Order-`r` variables `(x₁, x₂, x₃, y₁, y₂, y₃)` as polynomials in the
    /// original `(x, y)`, truncated at `max_deg`.
    pub fn normalizing_coordinates(&self, r: usize, max_deg: u32) -> Result<Vec<PoissonSeries>> {
        if r > self.r_max {
            return Err(Error::Precondition(format!("order {r} beyond r_max {}", self.r_max)));
        }
        let pol = TruncationPolicy::secular(max_deg);
        let chis = (1..=r)
            .map(|s| {
                let mut c = CPoly::from_real(&self.orders[s].chi, s as u32 + 2)?;
                Ok(std::mem::take(&mut c.parts[s + 2]))
            })
            .collect::<Result<Vec<_>>>()?;
        (0..6)
            .map(|i| {
                let mut f = CPoly::from_real(&PoissonSeries::var(sec_var(i), pol), max_deg)?;
                for s in (1..=r).rev() {
                    let neg: CMap = chis[s - 1].iter().map(|(k, c)| (*k, -c)).collect();
                    if !neg.is_empty() {
                        f = lie_transform(&f, &neg, s + 2);
                    }
                }
                Ok(f.to_real())
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let put = |name: String, s: &PoissonSeries| -> Result<()> { write_series(s, fs::File::create(dir.join(name))?) };
        let mut orders = Vec::new();
        for o in &self.orders {
            put(format!("chi_{}.series", o.r), &o.chi)?;
            if let Some(l) = &o.leading {
                put(format!("leading_{}.series", o.r), &l.series)?;
            }
            if let Some(n) = &o.next {
                put(format!("next_{}.series", o.r), &n.series)?;
            }
            orders.push(OrderManifest {
                r: o.r,
                z: o.z.clone(),
                leading_degree: o.leading.as_ref().map(|l| l.degree),
                next_degree: o.next.as_ref().map(|l| l.degree),
                resonance_margin: o.resonance_margin,
                homological_residue: o.homological_residue,
                chi_terms: o.chi.len(),
                leading_terms: o.leading.as_ref().map_or(0, |l| l.series.len()),
            });
        }
        put("hamiltonian.series".into(), &self.hamiltonian)?;
        let man = NormalFormManifest {
            omega: self.omega,
            r_max: self.r_max,
            max_degree: self.max_degree,
            symmetry_residue: self.symmetry_residue,
            orders,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).map_err(io_err)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let man: NormalFormManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?).map_err(io_err)?;
        let get = |name: String| -> Result<PoissonSeries> {
            read_series(std::io::BufReader::new(fs::File::open(dir.join(name))?))
        };
        let orders = man
            .orders
            .into_iter()
            .map(|o| {
                let rem = |deg: Option<u32>, stem: &str| -> Result<Option<Remainder>> {
                    deg.map(|degree| Ok(Remainder { degree, series: get(format!("{stem}_{}.series", o.r))? }))
                        .transpose()
                };
                Ok(NormalFormOrder {
                    r: o.r,
                    z: o.z,
                    chi: get(format!("chi_{}.series", o.r))?,
                    leading: rem(o.leading_degree, "leading")?,
                    next: rem(o.next_degree, "next")?,
                    resonance_margin: o.resonance_margin,
                    homological_residue: o.homological_residue,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalFormResult {
            omega: man.omega,
            r_max: man.r_max,
            max_degree: man.max_degree,
            orders,
            hamiltonian: get("hamiltonian.series".into())?,
            symmetry_residue: man.symmetry_residue,
        })
    }
}

/// Hamiltonian vector field of a polynomial in `(x, y)`:
/// `ẋ = −∂H/∂y`, `ẏ = ∂H/∂x`.
pub struct PolyField {
    dx: Vec<PoissonSeries>,
    dy: Vec<PoissonSeries>,
}

impl PolyField {
    pub fn new(h: &PoissonSeries) -> Self {
        PolyField {
            dx: (0..3).map(|j| h.derive(Var::Xi(j))).collect(),
            dy: (0..3).map(|j| h.derive(Var::Eta(j))).collect(),
        }
    }

    pub fn eval(&self, v: &[f64; 6]) -> [f64; 6] {
        let p = point(v);
        let mut out = [0.0; 6];
        for j in 0..3 {
            out[j] = -self.dy[j].evaluate(&p);
            out[3 + j] = self.dx[j].evaluate(&p);
        }
        out
    }

    /// Classical RK4 step.
    pub fn step(&self, v: &[f64; 6], h: f64) -> [f64; 6] {
        let add = |a: &[f64; 6], b: &[f64; 6], s: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + s * b[i]) };
        let k1 = self.eval(v);
        let k2 = self.eval(&add(v, &k1, h / 2.0));
        let k3 = self.eval(&add(v, &k2, h / 2.0));
        let k4 = self.eval(&add(v, &k3, h));
        std::array::from_fn(|i| v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }
}

/// `(x₁, x₂, x₃, y₁, y₂, y₃)` as a phase point with zero fast variables.
pub fn point(v: &[f64; 6]) -> PhasePoint {
    PhasePoint::secular([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}
