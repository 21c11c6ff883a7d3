//! Acceptance run: one PASS/FAIL line per criterion, followed by the
//! measured quantities. Exits non-zero when any criterion fails.
//!
//! The full-scale criterion runs only with `SECSTAB_FULL=1`.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use common::*;
use rand::{rngs::StdRng, Rng, SeedableRng};
use secstab_core::birkhoff::*;
use secstab_core::expansion::ExpandedHamiltonian;
use secstab_core::orbits::*;
use secstab_core::pseries::*;
use secstab_core::secular::*;
use secstab_core::stability::*;

const REF_OMEGA: [f64; 3] = [-1.1212724892e-4, -1.9688444678e-5, -1.1134564418e-5];
const FLOW_TOL: f64 = 1e-8;
const EXPANSION_TOL: f64 = 1e-6;
const OMEGA_TOL: f64 = 0.05;
const SLOPE_TOL: f64 = 0.5;
const T1_REF: f64 = 1e7;
const T1_DECADES: f64 = 2.0;
const RHO_5E9_REF: f64 = 0.7;
const RHO_5E9_TOL: f64 = 0.15;
const FULL_TERM_COUNT: usize = 94_109_751;
const DESK_DEG: u32 = 8;
const DESK_HARM: u32 = 10;
const R_MAX: usize = 20;
const AVERAGING_WINDOW: f64 = 1e5;

struct NormalForm {
    map: DiagonalizingMap,
    h0: PoissonSeries,
    x0: [f64; 3],
    y0: [f64; 3],
    radii: [f64; 3],
    nf: NormalFormResult,
    elapsed: Duration,
}

fn normal_form(sec: &SecularHamiltonian) -> NormalForm {
    let t = Instant::now();
    let (map, h0) = diagonalize_quadratic(sec).unwrap();
    let pv = poincare_from_elements(&reference_elements(), SUN_MASS, &planet_masses()).unwrap();
    let (x0, y0) = transform_initial_point(&map, &pv.xi, &pv.eta).unwrap();
    let radii = radii_from_initial(&x0, &y0).unwrap();
    let nf = birkhoff_normalize(&h0, R_MAX).unwrap();
    NormalForm { map, h0, x0, y0, radii, nf, elapsed: t.elapsed() }
}

fn curve_of(nf: &NormalFormResult, radii: &[f64; 3]) -> (StabilityCurve, OptimalTime) {
    let bounds = remainder_bounds(nf, &PolydiskRadii::new(*radii, DEFAULT_C).unwrap()).unwrap();
    let t1 = optimal_time(1.0, &bounds, radii).unwrap();
    (sweep_curve(&bounds, radii, &default_grid()).unwrap(), t1)
}

struct Outcome {
    pass: Option<bool>,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: Some(true), details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        if !ok {
            self.pass = Some(false);
        }
    }

    fn note(&mut self, what: String) {
        self.details.push(format!("     {what}"));
    }
}

struct Desk {
    expanded: ExpandedHamiltonian,
    tagged: TaggedHamiltonian,
    o2: TaggedHamiltonian,
    sec: SecularHamiltonian,
    elapsed: Duration,
}

/// Λ* from semi-major axes averaged over a 1e5 yr integration.
fn averaged_lambda_star() -> [f64; 3] {
    let traj = integrate_nbody(&reference_system(), AVERAGING_WINDOW, 0.25, 10.0).unwrap();
    let a = average_semimajor(&traj, AVERAGING_WINDOW).unwrap();
    let m = planet_masses();
    std::array::from_fn(|j| big_lambda_from_a(a[j], SUN_MASS, m[j]))
}

fn desk_pipeline(lambda_star: [f64; 3]) -> Desk {
    let t = Instant::now();
    let expanded =
        ExpandedHamiltonian::build(SUN_MASS, planet_masses(), lambda_star, TruncationPolicy::new(2, DESK_DEG, DESK_HARM))
            .unwrap();
    let cfg = SecularConfig::for_degree(DESK_DEG);
    let tagged = TaggedHamiltonian::from_expanded(&expanded);
    let s1 = kolmogorov_step1(&tagged, &cfg).unwrap();
    let s2 = kolmogorov_step2(&s1.hamiltonian, &cfg).unwrap();
    let sec = secular_reduce(&s2.hamiltonian, &cfg).unwrap();
    Desk { expanded, tagged, o2: s2.hamiltonian, sec, elapsed: t.elapsed() }
}

fn random_series(rng: &mut StdRng, pol: TruncationPolicy, n: usize, deg: u32, kmax: i32, size: f64) -> PoissonSeries {
    let t: Vec<Term> = (0..n)
        .map(|_| {
            let mut e = [0u32; 9];
            for _ in 0..rng.random_range(1..=deg) {
                e[rng.random_range(0..9)] += 1;
            }
            let k = [rng.random_range(-kmax..=kmax), rng.random_range(-kmax..=kmax), rng.random_range(-kmax..=kmax)];
            let trig = if rng.random::<bool>() { Trig::Sin } else { Trig::Cos };
            Term::new([e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]], k, trig, size * rng.random_range(-1.0..1.0))
        })
        .collect();
    PoissonSeries::from_terms(t, pol)
}

fn criterion1() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    let pol = TruncationPolicy::new(8, 14, 16);
    let br = |a: &PoissonSeries, b: &PoissonSeries| poisson_bracket(a, b, BracketBlock::Full, &pol).unwrap();
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut anti, mut jac, mut leib) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let f = random_series(&mut rng, pol, 5, 2, 2, 1.0);
        let g = random_series(&mut rng, pol, 5, 2, 2, 1.0);
        let h = random_series(&mut rng, pol, 5, 2, 2, 1.0);
        let scale = f.norm1() * g.norm1() * h.norm1() * 64.0;
        anti = anti.max((&br(&f, &g) + &br(&g, &f)).max_abs_coeff() / (f.norm1() * g.norm1() * 64.0));
        let j = &(&br(&f, &br(&g, &h)) + &br(&g, &br(&h, &f))) + &br(&h, &br(&f, &g));
        jac = jac.max(j.max_abs_coeff() / scale);
        let gh = g.mul(&h, &pol).unwrap();
        let l = &br(&f, &gh) - &(&br(&f, &g).mul(&h, &pol).unwrap() + &g.mul(&br(&f, &h), &pol).unwrap());
        leib = leib.max(l.max_abs_coeff() / scale);
    }
    o.check(anti < 1e-14, format!("antisymmetry residual {anti:.1e} (relative)"));
    o.check(jac < 1e-13, format!("Jacobi residual {jac:.1e}"));
    o.check(leib < 1e-13, format!("Leibniz residual {leib:.1e}"));

    let n = [529.69, 213.2, 74.66];
    let mut hom = 0.0f64;
    for _ in 0..100 {
        let f = fourier_select(&random_series(&mut rng, pol, 10, 4, 3, 1.0), 16);
        if let Ok(chi) = solve_homological(&f, &n, SMALL_DIVISOR_TOL) {
            let amp = f
                .waves()
                .map(|w| (0..3).map(|j| (w.k.0[j] as f64 * n[j]).abs()).sum::<f64>() / w.k.dot(&n).abs())
                .fold(1.0, f64::max);
            hom = hom.max((&frequency_derivative(&chi, &n) + &f).max_abs_coeff() / (amp * f.max_abs_coeff()));
        }
    }
    o.check(hom < 8.0 * f64::EPSILON, format!("homological residual {hom:.1e} (per unit amplification)"));

    let lp = TruncationPolicy::new(3, 9, 12);
    let mut flow = 0.0f64;
    for _ in 0..4 {
        let chi = random_series(&mut rng, lp, 6, 3, 1, 0.02).filter_terms(|t| t.mono.deg_sec() >= 2 && t.mono.deg_l() <= 1);
        let vars = [Var::L(0), Var::Xi(1), Var::Eta(2)];
        let imgs: Vec<_> = vars.iter().map(|&v| lie_transform(&PoissonSeries::var(v, lp), &chi, &lp, 24).unwrap().series).collect();
        for _ in 0..3 {
            let p = random_point(&mut rng, &[1.0; 3], 0.3, 0.05);
            let q = series_flow(&chi, &p, -1.0, 200);
            let scale = p.xi.iter().chain(&p.eta).chain(&p.l).fold(0.0f64, |m, x| m.max(x.abs()));
            flow = flow.max((imgs[0].evaluate(&p) - q.l[0]).abs() / scale);
            flow = flow.max((imgs[1].evaluate(&p) - q.xi[1]).abs() / scale);
            flow = flow.max((imgs[2].evaluate(&p) - q.eta[2]).abs() / scale);
        }
    }
    o.check(flow < FLOW_TOL, format!("Lie transform vs numeric flow {flow:.1e} (tol {FLOW_TOL:.0e})"));
    let el = t.elapsed();
    o.check(el < Duration::from_secs(60), format!("runtime {:.1} s (limit 60 s)", el.as_secs_f64()));
    o
}

fn criterion2() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    let ls = reference_lambda_star();
    let degs = [4u32, 6, 8];
    let hs: Vec<ExpandedHamiltonian> = degs
        .iter()
        .map(|&d| ExpandedHamiltonian::build(SUN_MASS, planet_masses(), ls, TruncationPolicy::new(2, d, DESK_HARM)).unwrap())
        .collect();
    let mut rng = StdRng::seed_from_u64(100);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let p = random_point(&mut rng, &ls, 0.01, 1e-4);
        let exact = hs[0].exact(&p).unwrap();
        for (w, h) in worst.iter_mut().zip(&hs) {
            *w = w.max(rel(h.evaluate(&p), exact));
        }
    }
    o.check(worst[2] < EXPANSION_TOL, format!("max rel. error at degree 8 / harmonics 10: {:.3e} (tol {EXPANSION_TOL:.0e})", worst[2]));
    o.check(
        worst[0] > worst[1] && worst[1] > worst[2],
        format!("monotone in degree: {:.7e} > {:.7e} > {:.7e}", worst[0], worst[1], worst[2]),
    );
    let mut proj = [0.0f64; 3];
    for _ in 0..10 {
        let p = random_point(&mut rng, &ls, 0.05, 1e-4);
        let exact = projected_oracle(&p, &ls, DESK_HARM as i32);
        for (w, h) in proj.iter_mut().zip(&hs) {
            *w = w.max(rel(h.evaluate(&p), exact));
        }
    }
    o.note(format!(
        "against the oracle projected onto |k| ≤ {DESK_HARM} (10 points, e ≤ 0.05): {:.2e}, {:.2e}, {:.2e} at degrees 4, 6, 8",
        proj[0], proj[1], proj[2]
    ));
    let el = t.elapsed();
    o.check(el < Duration::from_secs(1800), format!("runtime {:.1} s (limit 30 min)", el.as_secs_f64()));
    o.note("the error is set by the harmonic cap |k| ≤ 10 (Jupiter–Saturn q(λ₁−λ₂) kept only for q ≤ 5)".into());
    o
}

fn first_degree(f: &PoissonSeries, k: [i32; 3]) -> Option<u32> {
    resonant_project(f, k).min_deg_sec()
}

fn criterion3(d: &Desk) -> Outcome {
    let mut o = Outcome::new();
    let ht = d.tagged.perturbation();
    let vt = dalembert_violations(&ht).len();
    let vo: usize = d.o2.parts.iter().map(|p| dalembert_violations(p).len()).sum();
    o.check(vt == 0, format!("D'Alembert violations in H^(T): {vt} of {} terms", ht.len()));
    o.check(vo == 0, format!("D'Alembert violations in H^(O2): {vo} of {} terms", d.o2.term_count()));
    let a = first_degree(&ht, [2, -5, 0]);
    let b = first_degree(&ht, [1, 0, -7]);
    o.check(a == Some(3), format!("2λ₁−5λ₂ first at degree {a:?} (expected 3)"));
    o.check(b == Some(6), format!("λ₁−7λ₃ first at degree {b:?} (expected 6)"));

    let t = Instant::now();
    let h = ExpandedHamiltonian::build(SUN_MASS, planet_masses(), reference_lambda_star(), TruncationPolicy::new(1, 9, 15)).unwrap();
    let mut cfg = SecularConfig::for_degree(9);
    cfg.gen_deg = 6;
    let th = TaggedHamiltonian::from_expanded(&h);
    let filter = resonant_filter(cfg.k_star);
    let s1 = kolmogorov_step1_filtered(&th, &cfg, Some(&filter)).unwrap();
    let before = first_degree(&th.perturbation(), cfg.k_star);
    let after = s1.hamiltonian.parts.iter().filter_map(|p| first_degree(p, cfg.k_star)).min();
    let viol: usize = s1.hamiltonian.parts.iter().map(|p| resonant_project(p, cfg.k_star)).map(|p| dalembert_violations(&p).len()).sum();
    o.check(after.is_some_and(|x| x >= 9), format!("3λ₁−5λ₂−7λ₃ after step 1 first at degree {after:?} (≥ 9), {viol} violations"));
    o.check(viol == 0, "no D'Alembert violations on the 3λ₁−5λ₂−7λ₃ harmonic".into());
    o.note(format!(
        "probe: expansion (L 1, degree 9, harmonics 15), absent before step 1 ({before:?}); {:.1} s",
        t.elapsed().as_secs_f64()
    ));
    o
}

fn criterion4(d: &Desk, map: &DiagonalizingMap) -> Outcome {
    let mut o = Outcome::new();
    for j in 0..3 {
        let e = rel(map.omega[j], REF_OMEGA[j]);
        o.check(e < OMEGA_TOL, format!("ω{} = {:.6e} vs {:.6e}: rel. error {:.2}%", j + 1, map.omega[j], REF_OMEGA[j], 100.0 * e));
    }
    o.check(map.omega.iter().all(|&w| w < 0.0), "all frequencies negative".into());
    o.check(
        d.elapsed < Duration::from_secs(3600),
        format!("pipeline runtime {:.1} s (limit 1 h)", d.elapsed.as_secs_f64()),
    );
    o
}

fn criterion5() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    let mut theta_bad = 0;
    for j in 0..8u32 {
        for k in 0..8u32 {
            let th = theta(j, k);
            let m = (0..=20_000)
                .map(|i| {
                    let a = i as f64 * TAU / 20_000.0;
                    (a.cos().powi(j as i32) * a.sin().powi(k as i32)).abs()
                })
                .fold(0.0f64, f64::max);
            if m > th * (1.0 + 1e-14) {
                theta_bad += 1;
            }
        }
    }
    o.check(theta_bad == 0, format!("Θ bound violated on {theta_bad} of 64 (j, k) grids"));
    let mut rng = StdRng::seed_from_u64(55);
    let radii = [0.025, 0.036, 0.008];
    let mut worst = 0.0f64;
    let mut best_tight = 0.0f64;
    for case in 0..6 {
        let f = {
            let t: Vec<Term> = (0..1 + case % 3)
                .map(|_| {
                    let mut e = [0u32; 6];
                    for _ in 0..5 {
                        e[rng.random_range(0..6)] += 1;
                    }
                    Term::new([0; 3], [e[0], e[1], e[2]], [e[3], e[4], e[5]], [0; 3], Trig::Cos, rng.random_range(-1.0..1.0))
                })
                .collect();
            PoissonSeries::from_terms(t, TruncationPolicy::secular(5))
        };
        let norm = weighted_norm(&f, &radii).unwrap();
        for rho in [0.1f64, 0.5, 1.0, 2.0] {
            let bound = rho.powi(5) * norm;
            let mut m = 0.0f64;
            for s in 0..100_000 {
                let mut v = [0.0; 6];
                for j in 0..3 {
                    let a: f64 = if s % 2 == 0 { 1.0 } else { rng.random::<f64>().sqrt() };
                    let ph = rng.random_range(0.0..TAU);
                    v[j] = rho * radii[j] * a * ph.cos();
                    v[3 + j] = rho * radii[j] * a * ph.sin();
                }
                m = m.max(f.evaluate(&point(&v)).abs());
            }
            worst = worst.max(m / bound);
            best_tight = best_tight.max(m / bound);
        }
    }
    o.check(worst <= 1.0 + 1e-12, format!("Monte Carlo sup / (ρ⁵|f|_R) ≤ 1 over 1e5 samples × 24 cases: max {worst:.4}"));
    let t15 = tau(0.5, 1, &[1.0; 3], &[1.0; 3]);
    o.check((t15 - 1.5).abs() < 1e-14, format!("τ(1/2, r=1, B=1, R=1) = {t15}"));
    let el = t.elapsed();
    o.check(el < Duration::from_secs(60), format!("runtime {:.1} s (limit 60 s)", el.as_secs_f64()));
    o
}

fn criterion6(h0: &PoissonSeries, x0: &[f64; 3], y0: &[f64; 3], curve_nf: &NormalFormResult, radii: &[f64; 3]) -> Outcome {
    let mut o = Outcome::new();
    let norm = x0.iter().chain(y0).map(|v| v * v).sum::<f64>().sqrt();
    let dir: [f64; 6] = std::array::from_fn(|i| if i < 3 { x0[i] } else { y0[i - 3] } / norm);
    let rhos = log_grid(1e-3, 1e-2, 5);
    for r in [4usize, 8, 12] {
        let nf = birkhoff_normalize_to(h0, r, r as u32 + 6).unwrap();
        let coords = nf.normalizing_coordinates(r, r as u32 + 4).unwrap();
        let degree = nf.order(r).unwrap().leading.as_ref().unwrap().degree;
        let drift: Vec<f64> = rhos
            .iter()
            .map(|&rho| {
                let start = dir.map(|v| v * rho);
                phi_drift(h0, &nf, &coords, &start, 2e4, 200).unwrap().iter().cloned().fold(0.0, f64::max)
            })
            .collect();
        let slope = loglog_slope(&rhos, &drift);
        let target = (r + 3) as f64;
        o.check(
            (slope - target).abs() <= SLOPE_TOL,
            format!("r = {r}: Φ-drift slope {slope:.3} vs r+3 = {target} (±{SLOPE_TOL})"),
        );
        o.note(format!(
            "r = {r}: lowest nonzero remainder has degree {degree}; slope − degree = {:+.3}",
            slope - degree as f64
        ));
    }
    o.note("an even Hamiltonian has a vanishing degree-(r+3) remainder for even r, so the drift goes as ρ^(r+4)".into());

    let bounds = remainder_bounds(curve_nf, &PolydiskRadii::new(*radii, DEFAULT_C).unwrap()).unwrap();
    let mut rng = StdRng::seed_from_u64(66);
    let mut ratio = 0.0f64;
    for rho0 in [0.3, 0.6, 1.0, 1.2] {
        let t = optimal_time(rho0, &bounds, radii).unwrap().t;
        for trial in 0..3 {
            let start: [f64; 6] = if trial == 0 {
                std::array::from_fn(|i| rho0 * if i < 3 { x0[i] } else { y0[i - 3] })
            } else {
                let mut v = [0.0; 6];
                for j in 0..3 {
                    let ph = rng.random_range(0.0..TAU);
                    v[j] = rho0 * radii[j] * ph.cos();
                    v[3 + j] = rho0 * radii[j] * ph.sin();
                }
                v
            };
            ratio = ratio.max(max_excursion(h0, radii, &start, t.min(1e4), 10.0) / (2.0 * rho0));
        }
    }
    o.check(ratio <= 1.0, format!("integration up to min(T, 1e4 yr) stays in Δ_(2ρ₀R): max excursion / 2ρ₀ = {ratio:.3}"));
    o
}

fn criterion7(nf: &NormalFormResult, radii: &[f64; 3], reference_radii: &[f64; 3]) -> Outcome {
    let mut o = Outcome::new();
    let (curve, t1) = curve_of(nf, radii);
    let stair = curve.samples.windows(2).all(|w| w[1].r_opt <= w[0].r_opt);
    let steps: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        let mut last = usize::MAX;
        for s in &curve.samples {
            if s.r_opt != last {
                v.push(format!("{}@{:.3}", s.r_opt, s.rho0));
                last = s.r_opt;
            }
        }
        v
    };
    o.check(stair, format!("r_opt non-increasing in ρ₀: {}", steps.join(" ")));
    let slopes = curve.log_slopes();
    let nondecr = slopes.windows(2).all(|w| w[1] >= w[0] - 1e-6);
    let (first, last) = (slopes[0], *slopes.last().unwrap());
    o.check(
        nondecr && last > first,
        format!("d log T / d log(1/ρ₀) non-decreasing as ρ₀ falls: {first:.2} at ρ₀ = 1.2 → {last:.2} at ρ₀ = 0.3"),
    );
    let boundary = curve.samples.iter().filter(|s| s.boundary).count();
    o.note(format!("{boundary} of {} samples have r_opt = rMax = {R_MAX}", curve.samples.len()));
    let dec = (t1.t / T1_REF).log10();
    o.check(
        dec.abs() <= T1_DECADES,
        format!("T(1) = {:.3e} yr (r_opt {}) vs {T1_REF:.0e}: {dec:+.2} decades", t1.t, t1.r_opt),
    );
    match curve.rho_at_time(5e9) {
        Some(rho) => o.check(
            (rho - RHO_5E9_REF).abs() <= RHO_5E9_TOL,
            format!("T = 5e9 yr at ρ₀ = {rho:.3} (reference ~{RHO_5E9_REF}, tol ±{RHO_5E9_TOL})"),
        ),
        None => o.check(false, "T never crosses 5e9 yr on the grid".into()),
    }
    let b2 = remainder_bounds(nf, &PolydiskRadii::new(*reference_radii, DEFAULT_C).unwrap()).unwrap();
    let t2 = optimal_time(1.0, &b2, reference_radii).unwrap();
    o.note(format!("with radii from the reference initial point: T(1) = {:.3e} yr (r_opt {})", t2.t, t2.r_opt));
    o
}

fn criterion8() -> Outcome {
    if std::env::var("SECSTAB_FULL").as_deref() != Ok("1") {
        return Outcome { pass: None, details: vec!["     skipped: full truncation needs SECSTAB_FULL=1 and large memory".into()] };
    }
    let mut o = Outcome::new();
    let h = ExpandedHamiltonian::build(SUN_MASS, planet_masses(), averaged_lambda_star(), TruncationPolicy::new(2, 18, 16)).unwrap();
    let cfg = SecularConfig::for_degree(18);
    let t = TaggedHamiltonian::from_expanded(&h);
    let s1 = kolmogorov_step1(&t, &cfg).unwrap();
    let s2 = kolmogorov_step2(&s1.hamiltonian, &cfg).unwrap();
    let n = s2.hamiltonian.term_count();
    o.check(n == FULL_TERM_COUNT, format!("H^(O2) term count {n} vs {FULL_TERM_COUNT}"));
    let sec = secular_reduce(&s2.hamiltonian, &cfg).unwrap();
    let (d, h0) = diagonalize_quadratic(&sec).unwrap();
    let nf = birkhoff_normalize(&h0, 30).unwrap();
    let pv = poincare_from_elements(&reference_elements(), SUN_MASS, &planet_masses()).unwrap();
    let (x, y) = transform_initial_point(&d, &pv.xi, &pv.eta).unwrap();
    let radii = radii_from_initial(&x, &y).unwrap();
    let r = curve_of(&nf, &radii).1.r_opt;
    o.check(r == 16, format!("r_opt(1) = {r} (reference 16)"));
    o
}

fn report(id: usize, title: &str, o: &Outcome, t: Duration) -> bool {
    let tag = match o.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "SKIP",
    };
    println!("C{id} {tag} {title} [{:.1} s]", t.as_secs_f64());
    for d in &o.details {
        println!("    {d}");
    }
    o.pass != Some(false)
}

fn main() {
    let mut ok = true;
    let timed = |f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };

    let (o, t) = timed(&mut criterion1);
    ok &= report(1, "algebra property suite", &o, t);
    let (o, t) = timed(&mut criterion2);
    ok &= report(2, "expansion oracle", &o, t);

    // Sensitivity run with Λ* from the tabulated osculating semi-major axes.
    let osc = normal_form(&desk_pipeline(reference_lambda_star()).sec);
    let desk = desk_pipeline(averaged_lambda_star());
    let main_nf = normal_form(&desk.sec);
    let NormalForm { map, h0, x0, y0, radii, nf, elapsed: nf_time } = &main_nf;

    let (o, t) = timed(&mut || criterion3(&desk));
    ok &= report(3, "D'Alembert structure", &o, t);
    let (mut o, t) = timed(&mut || criterion4(&desk, map));
    let errs: Vec<String> = (0..3).map(|j| format!("{:.2}%", 100.0 * rel(osc.map.omega[j], REF_OMEGA[j]))).collect();
    o.note(format!("Λ* from the averaged a* ({AVERAGING_WINDOW:.0e} yr integration); with the osculating a*: {}", errs.join(", ")));
    ok &= report(4, "secular frequencies", &o, t);
    let (o, t) = timed(&mut criterion5);
    ok &= report(5, "norm machinery", &o, t);

    let reference_radii = radii_from_initial(
        &[1.5407573458e-2, -3.0574059274e-2, 1.1186486403e-2],
        &[-2.5320810665e-2, -5.2728862107e-3, 6.0669645406e-3],
    )
    .unwrap();
    let (o, t) = timed(&mut || criterion6(h0, x0, y0, nf, radii));
    ok &= report(6, "remainder scaling", &o, t);
    let (mut o, t) = timed(&mut || criterion7(nf, radii, &reference_radii));
    o.note(format!("diagonalization and Birkhoff normal form to r = {R_MAX}: {:.1} s", nf_time.as_secs_f64()));
    let (oc, ot) = curve_of(&osc.nf, &osc.radii);
    o.note(format!(
        "with the osculating a*: T(1) = {:.3e} yr (r_opt {}), T = 5e9 yr at ρ₀ = {}",
        ot.t,
        ot.r_opt,
        oc.rho_at_time(5e9).map_or("-".into(), |r| format!("{r:.3}"))
    ));
    ok &= report(7, "stability-time curve", &o, t);
    let (o, t) = timed(&mut criterion8);
    ok &= report(8, "full-scale term count and r_opt (optional)", &o, t);

    println!("desk pipeline (degree {DESK_DEG}, harmonics {DESK_HARM}): {:.1} s", desk.elapsed.as_secs_f64());
    println!("H^(T) {} terms, H^(O2) {} terms, secular {} terms", desk.expanded.term_count(), desk.o2.term_count(), desk.sec.series.len());
    if !ok {
        println!("acceptance: some criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
