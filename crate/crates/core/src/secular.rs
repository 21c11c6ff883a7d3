//! Reduction of the expanded Hamiltonian to the secular model, at order two
//! in the masses plus the resonant correction of `3λ₁ − 5λ₂ − 7λ₃`.
//!
//! Series carry an integer order in the masses: `parts[o]` is the part of
//! order `μ^o`, with `parts[0] = n*·L + h^Kep(L)`. Lie transforms combine
//! orders additively and drop everything above `max_mu_order`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{io_err, pert_policy, split_by_degree, ExpandedHamiltonian};
use crate::pseries::{
    angle_average, bracket_filtered, fourier_select, poisson_bracket, purge_dalembert, read_series, resonant_project,
    solve_homological, write_series, BracketBlock, Frequencies, Monomial, PhasePoint, PoissonSeries,
    TruncationPolicy, Var, WaveFilter, SMALL_DIVISOR_TOL,
};

/// Parameters of the two normalization steps and of the resonant reduction.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecularConfig {
    /// Fourier cut `K_F` of the terms removed by steps 1–2.
    pub k_f: u32,
    /// Largest (ξ,η)-degree of the terms removed by steps 1–2.
    pub gen_deg: u32,
    /// Resonant angle kept in the reduction.
    pub k_star: [i32; 3],
    /// Largest (ξ,η)-degree of the resonant generating function.
    pub res_gen_deg: u32,
    /// Orders in the masses kept by steps 1–2.
    pub max_mu_order: usize,
    pub divisor_tol: f64,
}

impl SecularConfig {
    /// Defaults for a given secular degree cap: `K_F = 8`, generating
    /// functions of degree `min(6, maxDegSec/2)` and `min(9, maxDegSec)`.
    pub fn for_degree(max_deg_sec: u32) -> Self {
        SecularConfig {
            k_f: 8,
            gen_deg: 6.min(max_deg_sec / 2),
            k_star: [3, -5, -7],
            res_gen_deg: 9.min(max_deg_sec),
            max_mu_order: 2,
            divisor_tol: SMALL_DIVISOR_TOL,
        }
    }
}

/// Hamiltonian split by order in the masses.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedHamiltonian {
    pub n_star: Frequencies,
    pub lambda_star: [f64; 3],
    /// `parts[o]` has order `μ^o`.
    pub parts: Vec<PoissonSeries>,
    /// Policy of the parts of order ≥ 1 (linear in L).
    pub policy: TruncationPolicy,
}

impl TaggedHamiltonian {
    pub fn from_expanded(h: &ExpandedHamiltonian) -> Self {
        let policy = pert_policy(&h.policy);
        let p0 = TruncationPolicy { max_deg_l: h.policy.max_deg_l.max(1), ..policy };
        let lin = PoissonSeries::weighted_sum(
            &[
                (h.n_star.n_star[0], &PoissonSeries::var(Var::L(0), p0)),
                (h.n_star.n_star[1], &PoissonSeries::var(Var::L(1), p0)),
                (h.n_star.n_star[2], &PoissonSeries::var(Var::L(2), p0)),
            ],
            p0,
        );
        let order0 = PoissonSeries::weighted_sum(&[(1.0, &lin), (1.0, &h.kep)], p0);
        TaggedHamiltonian {
            n_star: h.n_star.clone(),
            lambda_star: h.lambda_star,
            parts: vec![order0, h.perturbation()],
            policy,
        }
    }

    /// Sum over all orders ≥ 1.
    pub fn perturbation(&self) -> PoissonSeries {
        let parts: Vec<(f64, &PoissonSeries)> = self.parts.iter().skip(1).map(|s| (1.0, s)).collect();
        PoissonSeries::weighted_sum(&parts, self.policy)
    }

    pub fn order(&self, o: usize) -> Option<&PoissonSeries> {
        self.parts.get(o)
    }

    /// `h_{j₁,j₂}` summed over the orders ≥ 1.
    pub fn slot(&self, j1: u32, j2: u32) -> PoissonSeries {
        self.perturbation().filter_terms(|t| t.mono.deg_l() == j1 && t.mono.deg_sec() == j2)
    }

    pub fn term_count(&self) -> usize {
        self.parts.iter().skip(1).map(|s| s.len()).sum()
    }

    /// Value without the Keplerian constant `F₀(Λ*)`.
    pub fn evaluate(&self, p: &PhasePoint) -> f64 {
        self.parts.iter().map(|s| s.evaluate(p)).sum()
    }

    /// Writes `order_<o>.series` files plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut counts = Vec::new();
        for (o, s) in self.parts.iter().enumerate() {
            write_series(s, fs::File::create(dir.join(format!("order_{o}.series")))?)?;
            counts.push(s.len());
        }
        let man = TaggedManifest {
            n_star: self.n_star.n_star,
            lambda_star: self.lambda_star,
            policy: self.policy,
            terms_by_order: counts,
            slots: split_by_degree(&self.perturbation()).iter().map(|(k, s)| (k.0, k.1, s.len())).collect(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).map_err(io_err)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let man: TaggedManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?).map_err(io_err)?;
        let parts = (0..man.terms_by_order.len())
            .map(|o| read_series(std::io::BufReader::new(fs::File::open(dir.join(format!("order_{o}.series")))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TaggedHamiltonian {
            n_star: Frequencies::new(man.n_star)?,
            lambda_star: man.lambda_star,
            parts,
            policy: man.policy,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TaggedManifest {
    n_star: [f64; 3],
    lambda_star: [f64; 3],
    policy: TruncationPolicy,
    terms_by_order: Vec<usize>,
    /// (L degree, (ξ,η) degree, terms)
    slots: Vec<(u32, u32, usize)>,
}

/// `exp(L_χ) H` for a generating function split by order, keeping the
/// orders `≤ max_order`. `chi[o]` has order `μ^o` (`chi[0]` must be empty).
pub fn tagged_lie_transform(
    h: &[PoissonSeries],
    chi: &[PoissonSeries],
    policy: &TruncationPolicy,
    max_order: usize,
    filter: WaveFilter<'_>,
) -> Result<Vec<PoissonSeries>> {
    if chi.first().is_some_and(|c| !c.is_empty()) {
        return Err(Error::Precondition("generating function must be of positive order".into()));
    }
    let mut out: Vec<PoissonSeries> = (0..=max_order)
        .map(|o| h.get(o).cloned().unwrap_or_else(|| PoissonSeries::zero(*policy)))
        .collect();
    let mut term: Vec<PoissonSeries> = out.clone();
    for s in 1..=max_order {
        let mut next: Vec<PoissonSeries> = vec![PoissonSeries::zero(*policy); max_order + 1];
        let mut any = false;
        for (a, c) in chi.iter().enumerate().skip(1) {
            if c.is_empty() {
                continue;
            }
            for b in 0..=max_order {
                if a + b > max_order || term[b].is_empty() {
                    continue;
                }
                // Brackets landing on the top order are never reused.
                let last = a + b == max_order;
                let f = if last { filter } else { None };
                let br = bracket_filtered(c, &term[b], BracketBlock::Full, policy, f)?;
                if !br.is_empty() {
                    next[a + b] = next[a + b].add_scaled(&br, 1.0 / s as f64);
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        for (o, t) in next.iter().enumerate() {
            if !t.is_empty() {
                out[o] = out[o].add_scaled(t, 1.0);
            }
        }
        term = next;
    }
    Ok(out)
}

fn solve_block(f: &PoissonSeries, h: &TaggedHamiltonian, tol: f64) -> Result<PoissonSeries> {
    solve_homological(f, &h.n_star.n_star, tol)
}

/// Result of a normalization step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub hamiltonian: TaggedHamiltonian,
    /// Generating function by order.
    pub chi: Vec<PoissonSeries>,
    /// Largest coefficient removed for breaking the D'Alembert rule,
    /// relative to the largest coefficient of its order.
    pub symmetry_residue: f64,
}

/// Purges the D'Alembert residue of every order ≥ 1.
fn purge_parts(parts: Vec<PoissonSeries>) -> (Vec<PoissonSeries>, f64) {
    let mut worst = 0.0f64;
    let out = parts
        .into_iter()
        .enumerate()
        .map(|(o, p)| {
            if o == 0 {
                return p;
            }
            let (clean, removed) = purge_dalembert(&p);
            let scale = p.max_abs_coeff();
            if removed > 0.0 {
                worst = worst.max(removed / scale);
            }
            clean
        })
        .collect();
    (out, worst)
}

/// Removes `⌈h_{0,j₂}⌉_{λ;K}`, `j₂ ≤ max_gen_deg`, at first order.
pub fn kolmogorov_step1(h: &TaggedHamiltonian, cfg: &SecularConfig) -> Result<StepOutput> {
    kolmogorov_step1_filtered(h, cfg, None)
}

/// As [`kolmogorov_step1`], with the brackets of the highest order
/// restricted to the harmonics accepted by `filter` (used to probe single
/// harmonics of large models cheaply).
pub fn kolmogorov_step1_filtered(
    h: &TaggedHamiltonian,
    cfg: &SecularConfig,
    filter: WaveFilter<'_>,
) -> Result<StepOutput> {
    let first = h.order(1).ok_or_else(|| Error::Precondition("missing first-order part".into()))?;
    let f = fourier_select(&first.at_l_zero(), cfg.k_f).filter_terms(|t| t.mono.deg_sec() <= cfg.gen_deg);
    let chi1 = solve_block(&f, h, cfg.divisor_tol)?;
    log::info!("step 1: generating function with {} terms", chi1.len());
    let chi = vec![PoissonSeries::zero(h.policy), chi1];
    let parts = tagged_lie_transform(&h.parts, &chi, &h.policy, cfg.max_mu_order, filter)?;
    let (parts, symmetry_residue) = purge_parts(parts);
    Ok(StepOutput {
        hamiltonian: TaggedHamiltonian { parts, ..h.clone() },
        chi,
        symmetry_residue,
    })
}

/// Removes `⌈ĥ_{1,j₂}⌉_{λ;K}`, `j₂ ≤ max_gen_deg`, with a generating
/// function linear in L carrying every order of the block.
pub fn kolmogorov_step2(h: &TaggedHamiltonian, cfg: &SecularConfig) -> Result<StepOutput> {
    let mut chi = vec![PoissonSeries::zero(h.policy)];
    for o in 1..h.parts.len().min(cfg.max_mu_order + 1) {
        let f = fourier_select(&h.parts[o].l_degree_part(1), cfg.k_f).filter_terms(|t| t.mono.deg_sec() <= cfg.gen_deg);
        chi.push(solve_block(&f, h, cfg.divisor_tol)?);
    }
    log::info!("step 2: generating function with {} terms", chi.iter().map(|c| c.len()).sum::<usize>());
    let parts = tagged_lie_transform(&h.parts, &chi, &h.policy, cfg.max_mu_order, None)?;
    let (parts, symmetry_residue) = purge_parts(parts);
    Ok(StepOutput {
        hamiltonian: TaggedHamiltonian { parts, ..h.clone() },
        chi,
        symmetry_residue,
    })
}

/// Generating functions and settings behind a secular Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub chi1: Vec<PoissonSeries>,
    pub chi2: Vec<PoissonSeries>,
    pub chi1_res: PoissonSeries,
    pub chi2_res: PoissonSeries,
    pub config: SecularConfig,
    pub policy: TruncationPolicy,
}

/// Secular Hamiltonian in (ξ, η) only.
#[derive(Clone, Debug, PartialEq)]
pub struct SecularHamiltonian {
    pub series: PoissonSeries,
    /// Part of order one in the masses (the plain average of the expansion).
    pub first_order: PoissonSeries,
    /// Order-μ⁴ resonant correction.
    pub resonant_correction: PoissonSeries,
    pub provenance: Option<Provenance>,
}

fn to_secular(f: &PoissonSeries, max_deg: u32) -> PoissonSeries {
    f.at_l_zero().filter_waves(|w| w.k.is_zero()).truncate(TruncationPolicy::secular(max_deg))
}

/// Secular Hamiltonian
/// `⟨H^(O2)|_{L=0}⟩ + ⟨½{χ₁ʳ, {χ₁ʳ, h^Kep}}_F + {χ₁ʳ, h₁ʳ}_F + ½{χ₁ʳ, h₀ʳ}_S⟩`,
/// where `h₀ʳ`, `h₁ʳ` are the `±k*` harmonics (L-free and L-linear) and
/// `χ₁ʳ` removes `h₀ʳ` up to degree `res_gen_deg`.
///
/// The second resonant generating function (from the L-linear block) is
/// computed as well; its brackets with the L-linear terms remain linear in
/// L, so it contributes nothing to the L-free average at this order.
pub fn secular_reduce(h: &TaggedHamiltonian, cfg: &SecularConfig) -> Result<SecularHamiltonian> {
    let max_deg = h.policy.max_deg_sec;
    let pert = h.perturbation();
    let mean = to_secular(&pert, max_deg);
    let hres = resonant_project(&pert, cfg.k_star);
    let h0r = hres.at_l_zero();
    let h1r = hres.l_degree_part(1);
    let chi1r = solve_block(&h0r.filter_terms(|t| t.mono.deg_sec() <= cfg.res_gen_deg), h, cfg.divisor_tol)?;
    let kep = &h.parts[0];
    let pol = h.policy;
    let kep_br = poisson_bracket(&chi1r, kep, BracketBlock::Fast, &pol)?;
    let l_lin_block = &h1r + &kep_br.l_degree_part(1);
    let chi2r = solve_block(&resonant_project(&l_lin_block, cfg.k_star), h, cfg.divisor_tol)?;
    let corr = PoissonSeries::weighted_sum(
        &[
            (0.5, &poisson_bracket(&chi1r, &kep_br, BracketBlock::Fast, &pol)?),
            (1.0, &poisson_bracket(&chi1r, &h1r, BracketBlock::Fast, &pol)?),
            (0.5, &poisson_bracket(&chi1r, &h0r, BracketBlock::Secular, &pol)?),
        ],
        pol,
    );
    let corr = to_secular(&corr, max_deg);
    let series = &mean + &corr;
    let first_order = h
        .order(1)
        .map(|f| to_secular(f, max_deg))
        .unwrap_or_else(|| PoissonSeries::zero(TruncationPolicy::secular(max_deg)));
    log::info!(
        "secular Hamiltonian: {} terms ({} resonant terms, χ₁ʳ {} terms)",
        series.len(),
        hres.len(),
        chi1r.len()
    );
    Ok(SecularHamiltonian {
        series,
        first_order,
        resonant_correction: corr,
        provenance: Some(Provenance {
            chi1: Vec::new(),
            chi2: Vec::new(),
            chi1_res: chi1r,
            chi2_res: chi2r,
            config: *cfg,
            policy: h.policy,
        }),
    })
}

/// Runs step 1, step 2 and the resonant reduction.
pub fn secular_pipeline(h: &ExpandedHamiltonian, cfg: &SecularConfig) -> Result<(TaggedHamiltonian, SecularHamiltonian)> {
    let t = TaggedHamiltonian::from_expanded(h);
    let s1 = kolmogorov_step1(&t, cfg)?;
    let s2 = kolmogorov_step2(&s1.hamiltonian, cfg)?;
    let mut sec = secular_reduce(&s2.hamiltonian, cfg)?;
    if let Some(p) = sec.provenance.as_mut() {
        p.chi1 = s1.chi;
        p.chi2 = s2.chi;
    }
    Ok((s2.hamiltonian, sec))
}

impl SecularHamiltonian {
    pub fn from_series(series: PoissonSeries) -> Self {
        SecularHamiltonian {
            first_order: PoissonSeries::zero(*series.policy()),
            resonant_correction: PoissonSeries::zero(*series.policy()),
            series,
            provenance: None,
        }
    }

    /// Homogeneous part of degree `d`.
    pub fn degree_part(&self, d: u32) -> PoissonSeries {
        self.series.sec_degree_part(d)
    }

    /// Writes `secular.series`, the correction and the generating
    /// functions, plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let put = |name: &str, s: &PoissonSeries| -> Result<()> { write_series(s, fs::File::create(dir.join(name))?) };
        put("secular.series", &self.series)?;
        put("first_order.series", &self.first_order)?;
        put("resonant_correction.series", &self.resonant_correction)?;
        let mut man = SecularManifest { terms: self.series.len(), config: None, policy: None, chi_files: Vec::new() };
        if let Some(p) = &self.provenance {
            man.config = Some(p.config);
            man.policy = Some(p.policy);
            let mut files = Vec::new();
            for (o, c) in p.chi1.iter().enumerate().skip(1) {
                files.push((format!("chi1_order{o}.series"), c));
            }
            for (o, c) in p.chi2.iter().enumerate().skip(1) {
                files.push((format!("chi2_order{o}.series"), c));
            }
            files.push(("chi1_res.series".into(), &p.chi1_res));
            files.push(("chi2_res.series".into(), &p.chi2_res));
            for (f, c) in files {
                put(&f, c)?;
                man.chi_files.push((f, c.len()));
            }
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man).map_err(io_err)?)?;
        Ok(())
    }

    /// Loads the series (generating functions are not reloaded).
    pub fn load(dir: &Path) -> Result<Self> {
        let get = |name: &str| -> Result<PoissonSeries> {
            read_series(std::io::BufReader::new(fs::File::open(dir.join(name))?))
        };
        Ok(SecularHamiltonian {
            series: get("secular.series")?,
            first_order: get("first_order.series")?,
            resonant_correction: get("resonant_correction.series")?,
            provenance: None,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SecularManifest {
    terms: usize,
    config: Option<SecularConfig>,
    policy: Option<TruncationPolicy>,
    chi_files: Vec<(String, usize)>,
}

fn mono_label(m: Monomial) -> String {
    let e = m.exps();
    let mut s = String::new();
    for (name, off) in [("ξ", 3), ("η", 6)] {
        for j in 0..3 {
            match e[off + j] {
                0 => {}
                1 => {
                    let _ = write!(s, "{name}{}", j + 1);
                }
                p => {
                    let _ = write!(s, "{name}{}^{p}", j + 1);
                }
            }
        }
    }
    s
}

/// Table of the degree-2 and degree-4 coefficients, one monomial per row:
/// `degree  r1 r2 r3  s1 s2 s3  coefficient  monomial`, with `r`, `s` the
/// exponents of ξ and η.
pub fn emit_degree4_table(sec: &SecularHamiltonian) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# deg  r1 r2 r3  s1 s2 s3  {:>24}  monomial", "coefficient");
    for d in [2, 4] {
        for t in sec.series.sec_degree_part(d).sorted_terms() {
            if t.coeff == 0.0 {
                continue;
            }
            let e = t.mono.exps();
            let _ = writeln!(
                s,
                "{d:>5}  {:>2} {:>2} {:>2}  {:>2} {:>2} {:>2}  {:>24.16e}  {}",
                e[3],
                e[4],
                e[5],
                e[6],
                e[7],
                e[8],
                t.coeff,
                mono_label(t.mono)
            );
        }
    }
    s
}

/// Time derivative of `(ξ, η)` under a secular Hamiltonian:
/// `η̇ = ∂H/∂ξ`, `ξ̇ = −∂H/∂η`.
pub fn secular_vector_field(h: &PoissonSeries, xi: &[f64; 3], eta: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let p = PhasePoint::secular(*xi, *eta);
    let dxi = std::array::from_fn(|j| -h.derive(Var::Eta(j)).evaluate(&p));
    let deta = std::array::from_fn(|j| h.derive(Var::Xi(j)).evaluate(&p));
    (dxi, deta)
}

/// Wave filter accepting only `±k*`.
pub fn resonant_filter(k_star: [i32; 3]) -> impl Fn(&crate::pseries::Harmonic) -> bool + Sync {
    move |k: &crate::pseries::Harmonic| k.0 == k_star || k.0 == [-k_star[0], -k_star[1], -k_star[2]]
}

/// Order-one secular Hamiltonian: the plain average of the expansion.
pub fn first_order_secular(h: &ExpandedHamiltonian) -> PoissonSeries {
    to_secular(&angle_average(&h.perturbation()), h.policy.max_deg_sec)
}
