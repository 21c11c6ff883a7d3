use std::collections::BTreeMap;
use std::ops::{Add, Neg, Sub};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::monomial::{Harmonic, Monomial, Trig, Var, Wave, MAX_EXP, NVARS};
use crate::error::{Error, Result};

/// Degree and harmonic limits applied to every stored term.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Maximum total degree in the fast actions L.
    pub max_deg_l: u32,
    /// Maximum total degree in the secular variables (ξ, η).
    pub max_deg_sec: u32,
    /// Maximum `|k|₁` of a stored harmonic.
    pub max_harm: u32,
    /// Terms with `|coeff| <= drop_tol` are pruned.
    pub drop_tol: f64,
    /// Resource guard on the number of terms of a single series.
    #[serde(default = "default_term_limit")]
    pub term_limit: usize,
}

fn default_term_limit() -> usize {
    50_000_000
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_deg_l: 1,
            max_deg_sec: 8,
            max_harm: 10,
            drop_tol: 1e-20,
            term_limit: default_term_limit(),
        }
    }
}

impl TruncationPolicy {
    pub fn new(max_deg_l: u32, max_deg_sec: u32, max_harm: u32) -> Self {
        TruncationPolicy {
            max_deg_l,
            max_deg_sec,
            max_harm,
            ..Default::default()
        }
    }

    /// Policy for polynomials in (ξ, η) (or (x, y)) only.
    pub fn secular(max_deg_sec: u32) -> Self {
        TruncationPolicy::new(0, max_deg_sec, 0)
    }

    pub fn with_drop_tol(mut self, tol: f64) -> Self {
        self.drop_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_deg_l > MAX_EXP || self.max_deg_sec > MAX_EXP {
            return Err(Error::Precondition(format!(
                "degree caps must not exceed {MAX_EXP}"
            )));
        }
        if !(self.drop_tol >= 0.0) {
            return Err(Error::Precondition("drop_tol must be >= 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn admits(&self, m: Monomial, k: &Harmonic) -> bool {
        m.deg_l() <= self.max_deg_l
            && m.deg_sec() <= self.max_deg_sec
            && k.norm1() <= self.max_harm
    }

    /// Componentwise minimum of two policies.
    pub fn meet(&self, o: &TruncationPolicy) -> TruncationPolicy {
        TruncationPolicy {
            max_deg_l: self.max_deg_l.min(o.max_deg_l),
            max_deg_sec: self.max_deg_sec.min(o.max_deg_sec),
            max_harm: self.max_harm.min(o.max_harm),
            drop_tol: self.drop_tol.max(o.drop_tol),
            term_limit: self.term_limit.min(o.term_limit),
        }
    }
}

/// One monomial `coeff · L^a ξ^b η^c · trig(k·λ)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Term {
    pub mono: Monomial,
    pub wave: Wave,
    pub coeff: f64,
}

impl Term {
    pub fn new(l: [u32; 3], xi: [u32; 3], eta: [u32; 3], k: [i32; 3], trig: Trig, coeff: f64) -> Self {
        Term {
            mono: Monomial::new(l, xi, eta),
            wave: Wave::new(k, trig),
            coeff,
        }
    }

    /// Graded-lexicographic key used for serialization and ordered reductions.
    pub fn key_cmp(&self, o: &Term) -> std::cmp::Ordering {
        self.mono
            .cmp(&o.mono)
            .then_with(|| self.wave.k.norm1().cmp(&o.wave.k.norm1()))
            .then_with(|| self.wave.cmp(&o.wave))
    }
}

/// Numeric point of the phase space `(L, λ, ξ, η)`.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct PhasePoint {
    pub l: [f64; 3],
    pub lambda: [f64; 3],
    pub xi: [f64; 3],
    pub eta: [f64; 3],
}

impl PhasePoint {
    pub fn secular(xi: [f64; 3], eta: [f64; 3]) -> Self {
        PhasePoint {
            xi,
            eta,
            ..Default::default()
        }
    }

    pub(crate) fn vars(&self) -> [f64; NVARS] {
        let mut v = [0.0; NVARS];
        v[0..3].copy_from_slice(&self.l);
        v[3..6].copy_from_slice(&self.xi);
        v[6..9].copy_from_slice(&self.eta);
        v
    }
}

/// Polynomial coefficient of one trigonometric block, sorted by
/// (secular degree, L degree, packed exponents).
pub(crate) type Block = Vec<(Monomial, f64)>;

fn block_order(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    a.deg_sec()
        .cmp(&b.deg_sec())
        .then_with(|| a.deg_l().cmp(&b.deg_l()))
        .then_with(|| a.0.cmp(&b.0))
}

/// Sparse truncated Poisson series in `(L, λ, ξ, η)`.
///
/// Terms are grouped by trigonometric block; values are immutable once
/// built and every operation returns a new series.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSeries {
    pub(crate) blocks: BTreeMap<Wave, Block>,
    pub(crate) policy: TruncationPolicy,
}

impl PoissonSeries {
    pub fn zero(policy: TruncationPolicy) -> Self {
        PoissonSeries {
            blocks: BTreeMap::new(),
            policy,
        }
    }

    pub fn constant(c: f64, policy: TruncationPolicy) -> Self {
        Self::from_terms([Term { mono: Monomial::ONE, wave: Wave::CONST, coeff: c }], policy)
    }

    pub fn var(v: Var, policy: TruncationPolicy) -> Self {
        Self::from_terms([Term { mono: Monomial::var(v), wave: Wave::CONST, coeff: 1.0 }], policy)
    }

    /// `coeff · trig(k·λ)`.
    pub fn trig(k: [i32; 3], trig: Trig, coeff: f64, policy: TruncationPolicy) -> Self {
        Self::from_terms([Term { mono: Monomial::ONE, wave: Wave::new(k, trig), coeff }], policy)
    }

    /// Builds a series from arbitrary terms: harmonics are canonicalized,
    /// duplicates summed and out-of-policy terms discarded.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I, policy: TruncationPolicy) -> Self {
        let mut acc = Accumulator::new(policy);
        for t in terms {
            acc.push(t.wave.k, t.wave.trig, t.mono, t.coeff);
        }
        acc.finish_unchecked()
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.blocks.values().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Terms in internal (block) order.
    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.blocks
            .iter()
            .flat_map(|(w, b)| b.iter().map(move |&(m, c)| Term { mono: m, wave: *w, coeff: c }))
    }

    /// Terms in graded-lexicographic key order.
    pub fn sorted_terms(&self) -> Vec<Term> {
        let mut v: Vec<Term> = self.terms().collect();
        v.sort_by(|a, b| a.key_cmp(b));
        v
    }

    pub fn waves(&self) -> impl Iterator<Item = &Wave> {
        self.blocks.keys()
    }

    pub fn coeff(&self, mono: Monomial, wave: Wave) -> f64 {
        self.blocks
            .get(&wave)
            .and_then(|b| b.binary_search_by(|(m, _)| block_order(m, &mono)).ok().map(|i| b[i].1))
            .unwrap_or(0.0)
    }

    /// Re-truncates under a (usually tighter) policy.
    pub fn truncate(&self, policy: TruncationPolicy) -> Self {
        self.filter_terms(|t| policy.admits(t.mono, &t.wave.k) && t.coeff.abs() > policy.drop_tol)
            .with_policy(policy)
    }

    pub fn with_policy(mut self, policy: TruncationPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Keeps the terms satisfying `pred`.
    pub fn filter_terms<F: Fn(&Term) -> bool>(&self, pred: F) -> Self {
        let mut blocks = BTreeMap::new();
        for (w, b) in &self.blocks {
            let nb: Block = b
                .iter()
                .filter(|&&(m, c)| pred(&Term { mono: m, wave: *w, coeff: c }))
                .copied()
                .collect();
            if !nb.is_empty() {
                blocks.insert(*w, nb);
            }
        }
        PoissonSeries {
            blocks,
            policy: self.policy,
        }
    }

    /// Keeps whole trigonometric blocks satisfying `pred`.
    pub fn filter_waves<F: Fn(&Wave) -> bool>(&self, pred: F) -> Self {
        PoissonSeries {
            blocks: self
                .blocks
                .iter()
                .filter(|(w, _)| pred(w))
                .map(|(w, b)| (*w, b.clone()))
                .collect(),
            policy: self.policy,
        }
    }

    /// Applies `f(term) -> new coefficient` (zero results are dropped).
    pub fn map_coeffs<F: Fn(&Term) -> f64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for (w, b) in out.blocks.iter_mut() {
            for (m, c) in b.iter_mut() {
                *c = f(&Term { mono: *m, wave: *w, coeff: *c });
            }
            b.retain(|&(_, c)| c != 0.0);
        }
        out.blocks.retain(|_, b| !b.is_empty());
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return PoissonSeries::zero(self.policy);
        }
        self.map_coeffs(|t| t.coeff * s)
    }

    /// `Σ w_i f_i` accumulated in argument order.
    pub fn weighted_sum(parts: &[(f64, &PoissonSeries)], policy: TruncationPolicy) -> Self {
        let mut acc = Accumulator::new(policy);
        for (w, s) in parts {
            if *w == 0.0 {
                continue;
            }
            for t in s.terms() {
                acc.push_canonical(t.wave, t.mono, w * t.coeff);
            }
        }
        acc.finish_unchecked()
    }

    pub fn add_scaled(&self, other: &PoissonSeries, s: f64) -> Self {
        Self::weighted_sum(&[(1.0, self), (s, other)], self.policy)
    }

    /// Sum of absolute values of the coefficients.
    pub fn norm1(&self) -> f64 {
        self.terms().map(|t| t.coeff.abs()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms().map(|t| t.coeff.abs()).fold(0.0, f64::max)
    }

    pub fn max_deg_sec(&self) -> Option<u32> {
        self.terms().map(|t| t.mono.deg_sec()).max()
    }

    pub fn min_deg_sec(&self) -> Option<u32> {
        self.terms().map(|t| t.mono.deg_sec()).min()
    }

    /// Homogeneous part of secular degree `d`.
    pub fn sec_degree_part(&self, d: u32) -> Self {
        self.filter_terms(|t| t.mono.deg_sec() == d)
    }

    /// Homogeneous part of L degree `d`.
    pub fn l_degree_part(&self, d: u32) -> Self {
        self.filter_terms(|t| t.mono.deg_l() == d)
    }

    /// Numeric value at a phase-space point.
    pub fn evaluate(&self, p: &PhasePoint) -> f64 {
        let vars = p.vars();
        let maxd = MAX_EXP as usize + 1;
        // Powers are cached per variable up to the largest exponent present.
        let mut top = [0u32; NVARS];
        for t in self.terms() {
            for (i, e) in t.mono.exps().iter().enumerate() {
                top[i] = top[i].max(*e);
            }
        }
        let pows: Vec<Vec<f64>> = (0..NVARS)
            .map(|i| {
                let mut v = Vec::with_capacity((top[i] as usize + 1).min(maxd));
                let mut x = 1.0;
                for _ in 0..=top[i] {
                    v.push(x);
                    x *= vars[i];
                }
                v
            })
            .collect();
        let mut total = 0.0;
        for (w, b) in &self.blocks {
            let tr = w.eval(&p.lambda);
            let mut s = 0.0;
            for &(m, c) in b {
                let mut v = c;
                for (i, pw) in pows.iter().enumerate() {
                    let e = m.exp(i);
                    if e > 0 {
                        v *= pw[e as usize];
                    }
                }
                s += v;
            }
            total += tr * s;
        }
        total
    }

    /// Derivative with respect to a polynomial variable.
    pub fn derive(&self, v: Var) -> Self {
        let slot = v.slot();
        let mut blocks = BTreeMap::new();
        for (w, b) in &self.blocks {
            let mut nb: Block = b
                .iter()
                .filter_map(|&(m, c)| m.derive(slot).map(|(e, dm)| (dm, c * e as f64)))
                .collect();
            if !nb.is_empty() {
                nb.sort_by(|a, b| block_order(&a.0, &b.0));
                blocks.insert(*w, nb);
            }
        }
        PoissonSeries {
            blocks,
            policy: self.policy,
        }
    }

    /// Derivative with respect to the angle λ_j.
    pub fn derive_angle(&self, j: usize) -> Self {
        let mut blocks = BTreeMap::new();
        for (w, b) in &self.blocks {
            let kj = w.k.0[j];
            if kj == 0 {
                continue;
            }
            // d/dλ cos(kλ) = -k_j sin, d/dλ sin(kλ) = k_j cos
            let (trig, f) = match w.trig {
                Trig::Cos => (Trig::Sin, -(kj as f64)),
                Trig::Sin => (Trig::Cos, kj as f64),
            };
            let nb: Block = b.iter().map(|&(m, c)| (m, c * f)).collect();
            blocks.insert(Wave { k: w.k, trig }, nb);
        }
        PoissonSeries {
            blocks,
            policy: self.policy,
        }
    }

    /// Sets all L to zero.
    pub fn at_l_zero(&self) -> Self {
        self.filter_terms(|t| t.mono.deg_l() == 0)
    }

    /// Product truncated under `policy`.
    pub fn mul(&self, other: &PoissonSeries, policy: &TruncationPolicy) -> Result<PoissonSeries> {
        product_sum(&[(self, other, 1.0)], policy, None)
    }

    /// `self^n` under `policy`.
    pub fn pow(&self, n: u32, policy: &TruncationPolicy) -> Result<PoissonSeries> {
        let mut out = PoissonSeries::constant(1.0, *policy);
        for _ in 0..n {
            out = out.mul(self, policy)?;
        }
        Ok(out)
    }

    /// Value of the (λ-independent, L = ξ = η = 0) constant term.
    pub fn constant_term(&self) -> f64 {
        self.coeff(Monomial::ONE, Wave::CONST)
    }

    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.terms().all(|t| t.coeff.abs() <= tol)
    }
}

impl Add for &PoissonSeries {
    type Output = PoissonSeries;
    fn add(self, o: &PoissonSeries) -> PoissonSeries {
        PoissonSeries::weighted_sum(&[(1.0, self), (1.0, o)], self.policy)
    }
}

impl Sub for &PoissonSeries {
    type Output = PoissonSeries;
    fn sub(self, o: &PoissonSeries) -> PoissonSeries {
        PoissonSeries::weighted_sum(&[(1.0, self), (-1.0, o)], self.policy)
    }
}

impl Neg for &PoissonSeries {
    type Output = PoissonSeries;
    fn neg(self) -> PoissonSeries {
        self.scale(-1.0)
    }
}

/// Mutable collector of terms, finalized into an immutable series.
pub(crate) struct Accumulator {
    policy: TruncationPolicy,
    blocks: BTreeMap<Wave, FxHashMap<Monomial, f64>>,
}

impl Accumulator {
    pub(crate) fn new(policy: TruncationPolicy) -> Self {
        Accumulator {
            policy,
            blocks: BTreeMap::new(),
        }
    }

    pub(crate) fn push(&mut self, k: Harmonic, trig: Trig, mono: Monomial, coeff: f64) {
        if let Some((w, c)) = Wave::canonicalize(k, trig, coeff) {
            self.push_canonical(w, mono, c);
        }
    }

    pub(crate) fn push_canonical(&mut self, w: Wave, mono: Monomial, coeff: f64) {
        if coeff == 0.0 || !self.policy.admits(mono, &w.k) {
            return;
        }
        *self.blocks.entry(w).or_default().entry(mono).or_insert(0.0) += coeff;
    }

    fn merge(&mut self, other: Accumulator) {
        for (w, m) in other.blocks {
            match self.blocks.get_mut(&w) {
                None => {
                    self.blocks.insert(w, m);
                }
                Some(dst) => {
                    // fixed iteration order of the source keeps the merge deterministic
                    let mut items: Vec<(Monomial, f64)> = m.into_iter().collect();
                    items.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
                    for (k, v) in items {
                        *dst.entry(k).or_insert(0.0) += v;
                    }
                }
            }
        }
    }

    fn finish_unchecked(self) -> PoissonSeries {
        let tol = self.policy.drop_tol;
        let mut blocks = BTreeMap::new();
        for (w, m) in self.blocks {
            let mut b: Block = m.into_iter().filter(|&(_, c)| c != 0.0 && c.abs() > tol).collect();
            if b.is_empty() {
                continue;
            }
            b.sort_by(|a, b| block_order(&a.0, &b.0));
            blocks.insert(w, b);
        }
        PoissonSeries {
            blocks,
            policy: self.policy,
        }
    }

    pub(crate) fn finish(self) -> Result<PoissonSeries> {
        let limit = self.policy.term_limit;
        let s = self.finish_unchecked();
        let n = s.len();
        if n > limit {
            return Err(Error::TermLimit { count: n, limit });
        }
        Ok(s)
    }
}

/// Optional restriction on the output harmonics of a product.
pub type WaveFilter<'a> = Option<&'a (dyn Fn(&Harmonic) -> bool + Sync)>;

/// Product-to-sum outputs for `trig_a(ka·λ) · trig_b(kb·λ)`.
fn trig_product(wa: &Wave, wb: &Wave) -> [(Harmonic, Trig, f64); 2] {
    let s = wa.k.add(&wb.k);
    let d = wa.k.sub(&wb.k);
    match (wa.trig, wb.trig) {
        (Trig::Cos, Trig::Cos) => [(d, Trig::Cos, 0.5), (s, Trig::Cos, 0.5)],
        (Trig::Sin, Trig::Sin) => [(d, Trig::Cos, 0.5), (s, Trig::Cos, -0.5)],
        (Trig::Sin, Trig::Cos) => [(s, Trig::Sin, 0.5), (d, Trig::Sin, 0.5)],
        (Trig::Cos, Trig::Sin) => [(s, Trig::Sin, 0.5), (d, Trig::Sin, -0.5)],
    }
}

const CHUNK: usize = 8;

/// `Σ scale_i · a_i · b_i` truncated under `policy`.
///
/// Work is split over fixed-size chunks of left-hand blocks; partial
/// accumulators are merged in chunk order so results do not depend on the
/// number of worker threads.
pub(crate) fn product_sum(
    parts: &[(&PoissonSeries, &PoissonSeries, f64)],
    policy: &TruncationPolicy,
    filter: WaveFilter<'_>,
) -> Result<PoissonSeries> {
    let mut jobs: Vec<(usize, Vec<(&Wave, &Block)>)> = Vec::new();
    for (pi, (a, b, s)) in parts.iter().enumerate() {
        if *s == 0.0 || a.is_empty() || b.is_empty() {
            continue;
        }
        let blocks: Vec<(&Wave, &Block)> = a.blocks.iter().collect();
        for ch in blocks.chunks(CHUNK) {
            jobs.push((pi, ch.to_vec()));
        }
    }
    let partials: Vec<Accumulator> = jobs
        .par_iter()
        .map(|(pi, chunk)| {
            let (_, b, s) = parts[*pi];
            let mut acc = Accumulator::new(*policy);
            for (wa, pa) in chunk {
                for (wb, pb) in &b.blocks {
                    block_product(&mut acc, wa, pa, wb, pb, s, policy, filter);
                }
            }
            acc
        })
        .collect();
    let mut acc = Accumulator::new(*policy);
    for p in partials {
        acc.merge(p);
    }
    acc.finish()
}

#[allow(clippy::too_many_arguments)]
fn block_product(
    acc: &mut Accumulator,
    wa: &Wave,
    pa: &Block,
    wb: &Wave,
    pb: &Block,
    scale: f64,
    policy: &TruncationPolicy,
    filter: WaveFilter<'_>,
) {
    let mut outs: Vec<(Wave, f64)> = Vec::with_capacity(2);
    for (k, trig, f) in trig_product(wa, wb) {
        if k.norm1() > policy.max_harm {
            continue;
        }
        if let Some(flt) = filter {
            if !flt(&k) {
                continue;
            }
        }
        if let Some((w, c)) = Wave::canonicalize(k, trig, f) {
            match outs.iter_mut().find(|(ow, _)| *ow == w) {
                Some(o) => o.1 += c,
                None => outs.push((w, c)),
            }
        }
    }
    outs.retain(|(_, c)| *c != 0.0);
    if outs.is_empty() {
        return;
    }
    let max_sec = policy.max_deg_sec;
    let max_l = policy.max_deg_l;
    let mut maps: Vec<(Wave, f64, FxHashMap<Monomial, f64>)> = outs
        .into_iter()
        .map(|(w, f)| (w, f * scale, acc.blocks.remove(&w).unwrap_or_default()))
        .collect();
    for &(ma, ca) in pa {
        let da = ma.deg_sec();
        if da > max_sec {
            break;
        }
        let la = ma.deg_l();
        let end = pb.partition_point(|(m, _)| m.deg_sec() + da <= max_sec);
        for &(mb, cb) in &pb[..end] {
            if la + mb.deg_l() > max_l {
                continue;
            }
            let m = ma.mul(mb);
            let v = ca * cb;
            for (_, f, map) in maps.iter_mut() {
                *map.entry(m).or_insert(0.0) += v * *f;
            }
        }
    }
    for (w, _, map) in maps {
        if !map.is_empty() {
            acc.blocks.insert(w, map);
        }
    }
}
