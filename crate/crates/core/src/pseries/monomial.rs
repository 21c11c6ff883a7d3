use std::cmp::Ordering;
use std::fmt;

/// Number of polynomial variables: L₁..L₃, ξ₁..ξ₃, η₁..η₃.
pub const NVARS: usize = 9;
const BITS: u32 = 6;
const FIELD: u64 = (1 << BITS) - 1;
/// Largest exponent a single variable may carry.
pub const MAX_EXP: u32 = FIELD as u32;

/// A polynomial variable of the Poisson-series ring.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    L(usize),
    Xi(usize),
    Eta(usize),
}

impl Var {
    #[inline]
    pub fn slot(self) -> usize {
        match self {
            Var::L(j) => j,
            Var::Xi(j) => 3 + j,
            Var::Eta(j) => 6 + j,
        }
    }
}

/// Packed exponent vector `L^a ξ^b η^c`, six bits per variable.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub(crate) u64);

const L_MASK: u64 = (1 << (3 * BITS)) - 1;

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn new(l: [u32; 3], xi: [u32; 3], eta: [u32; 3]) -> Self {
        let mut m = 0u64;
        for (i, &e) in l.iter().chain(xi.iter()).chain(eta.iter()).enumerate() {
            assert!(e <= MAX_EXP, "exponent {e} exceeds {MAX_EXP}");
            m |= (e as u64) << (BITS * i as u32);
        }
        Monomial(m)
    }

    pub fn var(v: Var) -> Self {
        Monomial(1 << (BITS * v.slot() as u32))
    }

    #[inline]
    pub fn exp(self, slot: usize) -> u32 {
        ((self.0 >> (BITS * slot as u32)) & FIELD) as u32
    }

    pub fn exps(self) -> [u32; NVARS] {
        let mut e = [0; NVARS];
        for (i, x) in e.iter_mut().enumerate() {
            *x = self.exp(i);
        }
        e
    }

    #[inline]
    fn field_sum(mut x: u64) -> u32 {
        let mut s = 0u32;
        while x != 0 {
            s += (x & FIELD) as u32;
            x >>= BITS;
        }
        s
    }

    /// Degree in the fast actions L.
    #[inline]
    pub fn deg_l(self) -> u32 {
        Self::field_sum(self.0 & L_MASK)
    }

    /// Degree in the secular variables (ξ, η).
    #[inline]
    pub fn deg_sec(self) -> u32 {
        Self::field_sum(self.0 >> (3 * BITS))
    }

    pub fn deg_total(self) -> u32 {
        Self::field_sum(self.0)
    }

    /// Product of monomials. Callers guarantee no per-variable overflow,
    /// which holds whenever degree caps stay below [`MAX_EXP`].
    #[inline]
    pub fn mul(self, other: Monomial) -> Monomial {
        Monomial(self.0 + other.0)
    }

    /// `∂/∂v` of the monomial: returns the multiplicity and the lowered
    /// monomial, or `None` if `v` does not occur.
    #[inline]
    pub fn derive(self, slot: usize) -> Option<(u32, Monomial)> {
        let e = self.exp(slot);
        if e == 0 {
            None
        } else {
            Some((e, Monomial(self.0 - (1 << (BITS * slot as u32)))))
        }
    }

    /// Drops all L exponents.
    pub fn without_l(self) -> Monomial {
        Monomial(self.0 & !L_MASK)
    }

    pub fn eval(self, vars: &[f64; NVARS]) -> f64 {
        let mut v = 1.0;
        for (i, &x) in vars.iter().enumerate() {
            let e = self.exp(i);
            if e > 0 {
                v *= x.powi(e as i32);
            }
        }
        v
    }
}

impl Ord for Monomial {
    /// Graded order: total degree first, then exponent vectors lexicographically
    /// (L₁ first, η₃ last).
    fn cmp(&self, other: &Self) -> Ordering {
        self.deg_total()
            .cmp(&other.deg_total())
            .then_with(|| self.exps().cmp(&other.exps()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.exps();
        write!(f, "L{:?}ξ{:?}η{:?}", &e[0..3], &e[3..6], &e[6..9])
    }
}

/// Trigonometric factor of a term.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trig {
    Cos,
    Sin,
}

/// Wave vector `k` of the angle combination `k·λ`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Harmonic(pub [i32; 3]);

impl Harmonic {
    pub const ZERO: Harmonic = Harmonic([0, 0, 0]);

    pub fn norm1(&self) -> u32 {
        self.0.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        self.0[0] as f64 * v[0] + self.0[1] as f64 * v[1] + self.0[2] as f64 * v[2]
    }

    pub fn neg(&self) -> Harmonic {
        Harmonic([-self.0[0], -self.0[1], -self.0[2]])
    }

    pub fn add(&self, o: &Harmonic) -> Harmonic {
        Harmonic([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(&self, o: &Harmonic) -> Harmonic {
        Harmonic([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    /// True when the first nonzero component is positive (or k = 0).
    pub fn is_canonical(&self) -> bool {
        match self.0.iter().find(|&&k| k != 0) {
            Some(&k) => k > 0,
            None => true,
        }
    }

    /// Canonical representative of `±k` and the sign applied.
    pub fn canonical(&self) -> (Harmonic, f64) {
        if self.is_canonical() {
            (*self, 1.0)
        } else {
            (self.neg(), -1.0)
        }
    }

    /// Sum of the components; fixes the D'Alembert degree constraint.
    pub fn sum(&self) -> i32 {
        self.0.iter().sum()
    }
}

/// Trigonometric block key: harmonic plus cos/sin selector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wave {
    pub k: Harmonic,
    pub trig: Trig,
}

impl Wave {
    pub const CONST: Wave = Wave {
        k: Harmonic::ZERO,
        trig: Trig::Cos,
    };

    pub fn new(k: [i32; 3], trig: Trig) -> Self {
        Wave {
            k: Harmonic(k),
            trig,
        }
    }

    /// Normalizes `coeff · trig(k·λ)`; returns `None` for the vanishing `sin(0)`.
    pub fn canonicalize(k: Harmonic, trig: Trig, coeff: f64) -> Option<(Wave, f64)> {
        let (kc, sign) = k.canonical();
        match trig {
            Trig::Cos => Some((Wave { k: kc, trig }, coeff)),
            Trig::Sin if kc.is_zero() => None,
            Trig::Sin => Some((Wave { k: kc, trig }, sign * coeff)),
        }
    }

    pub fn eval(&self, lambda: &[f64; 3]) -> f64 {
        let phase = self.k.dot(lambda);
        match self.trig {
            Trig::Cos => phase.cos(),
            Trig::Sin => phase.sin(),
        }
    }
}
