use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};
use secstab_core::birkhoff::*;
use secstab_core::pseries::*;
use secstab_core::stability::*;
use secstab_core::Error;

const OMEGA: [f64; 3] = [-1.13e-4, -1.98e-5, -1.11e-5];

fn poly(terms: &[([u32; 3], [u32; 3], f64)]) -> PoissonSeries {
    let deg = terms.iter().map(|(a, b, _)| a.iter().chain(b).sum::<u32>()).max().unwrap_or(0);
    PoissonSeries::from_terms(
        terms.iter().map(|&(x, y, c)| Term::new([0; 3], x, y, [0; 3], Trig::Cos, c)),
        TruncationPolicy::secular(deg.max(1)),
    )
}

fn random_homogeneous(rng: &mut StdRng, deg: u32, nterms: usize) -> PoissonSeries {
    let t: Vec<_> = (0..nterms)
        .map(|_| {
            let mut e = [0u32; 6];
            for _ in 0..deg {
                e[rng.random_range(0..6)] += 1;
            }
            ([e[0], e[1], e[2]], [e[3], e[4], e[5]], rng.random_range(-1.0..1.0))
        })
        .collect();
    poly(&t)
}

fn synthetic_nf(r_max: usize, seed: u64) -> NormalFormResult {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut t = Vec::new();
    for j in 0..3 {
        let mut e = [0; 3];
        e[j] = 2;
        t.push((e, [0; 3], OMEGA[j] / 2.0));
        t.push(([0; 3], e, OMEGA[j] / 2.0));
    }
    for d in [3, 4, 5, 6] {
        for _ in 0..10 {
            let mut e = [0u32; 6];
            for _ in 0..d {
                e[rng.random_range(0..6)] += 1;
            }
            t.push(([e[0], e[1], e[2]], [e[3], e[4], e[5]], 1e-5 * rng.random_range(-1.0..1.0)));
        }
    }
    birkhoff_normalize(&poly(&t), r_max).unwrap()
}

#[test]
fn theta_table() {
    for j in 0..10 {
        assert_eq!(theta(j, 0), 1.0);
        assert_eq!(theta(0, j), 1.0);
    }
    assert!((theta(1, 1) - 0.5).abs() < 1e-15);
    assert!((theta(2, 1) - 0.38490017945975).abs() < 1e-12);
}

#[test]
fn theta_is_the_maximum_of_the_trig_product() {
    let n = 200_000;
    for j in 1..7u32 {
        for k in 1..7u32 {
            let th = theta(j, k);
            let grid_max = (0..=n)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::FRAC_PI_2 / n as f64;
                    a.cos().powi(j as i32) * a.sin().powi(k as i32)
                })
                .fold(0.0f64, f64::max);
            assert!(grid_max <= th * (1.0 + 1e-14), "({j},{k})");
            let star = (k as f64 / j as f64).sqrt().atan();
            let at = star.cos().powi(j as i32) * star.sin().powi(k as i32);
            assert!((at - th).abs() < 1e-6);
        }
    }
}

#[test]
fn weighted_norm_examples() {
    let f = poly(&[([1, 0, 0], [1, 0, 0], 1.0)]);
    assert!((weighted_norm(&f, &[1.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    let g = poly(&[([2, 0, 0], [0; 3], 1.0)]);
    assert_eq!(weighted_norm(&g, &[2.0, 1.0, 1.0]).unwrap(), 4.0);
    let mixed = poly(&[([1, 0, 0], [1, 0, 0], 1.0), ([3, 0, 0], [0; 3], 1.0)]);
    assert!(matches!(weighted_norm(&mixed, &[1.0; 3]), Err(Error::Precondition(_))));
    let by = weighted_norms_by_degree(&mixed, &[1.0; 3]).unwrap();
    assert_eq!(by, vec![(2, 0.5), (3, 1.0)]);
}

#[test]
fn sup_on_polydisk_is_bounded_by_weighted_norm() {
    let mut rng = StdRng::seed_from_u64(17);
    let radii = [0.03, 0.02, 0.01];
    let mut tight = 0;
    let cases = 12;
    for case in 0..cases {
        let f = random_homogeneous(&mut rng, 5, 1 + case % 3);
        let norm = weighted_norm(&f, &radii).unwrap();
        for rho in [0.1f64, 0.5, 1.0, 2.0] {
            let bound = rho.powi(5) * norm;
            let mut best = 0.0f64;
            for s in 0..100_000 {
                // Half the samples on the distinguished boundary, where the
                // supremum is attained.
                let v: [f64; 6] = {
                    let mut v = [0.0; 6];
                    for j in 0..3 {
                        let a = if s % 2 == 0 { 1.0 } else { rng.random::<f64>().sqrt() };
                        let th = rng.random_range(0.0..std::f64::consts::TAU);
                        v[j] = rho * radii[j] * a * th.cos();
                        v[3 + j] = rho * radii[j] * a * th.sin();
                    }
                    v
                };
                best = best.max(f.evaluate(&point(&v)).abs());
            }
            assert!(best <= bound * (1.0 + 1e-12), "case {case} ρ {rho}: {best:e} > {bound:e}");
            if rho == 1.0 && best > 0.5 * bound {
                tight += 1;
            }
        }
    }
    assert!(tight >= cases / 2, "bound tight in only {tight} of {cases} cases");
}

#[test]
fn tau_formula() {
    assert!((tau(0.5, 1, &[1.0; 3], &[1.0; 3]) - 1.5).abs() < 1e-15);
    let b = [2e-9, 5e-9, 1e-10];
    let r = [0.025, 0.036, 0.008];
    for rr in [1usize, 4, 9] {
        let t1 = tau(0.8, rr, &b, &r);
        let t2 = tau(0.4, rr, &b, &r);
        assert!((t2 / t1 - 2f64.powi(rr as i32 + 1)).abs() < 1e-9 * t2 / t1);
        assert!(tau(0.81, rr, &b, &r) < t1);
    }
    assert_eq!(tau(1.0, 3, &[0.0; 3], &r), f64::INFINITY);
    assert_eq!(tau_for_degree(1.0, 6, &[0.0; 3], &r), (f64::INFINITY, None));
    // Ties pick the smallest mode.
    assert_eq!(tau_for_degree(1.0, 6, &[1.0; 3], &[1.0; 3]).1, Some(0));
}

#[test]
fn bounds_follow_the_remainder() {
    let nf = synthetic_nf(5, 1);
    let radii = [0.02, 0.03, 0.01];
    let b2 = remainder_bounds(&nf, &PolydiskRadii::new(radii, 2.0).unwrap()).unwrap();
    let b6 = remainder_bounds(&nf, &PolydiskRadii::new(radii, 6.0).unwrap()).unwrap();
    assert_eq!(b2.rows.len(), 5);
    for (a, b) in b2.rows.iter().zip(&b6.rows) {
        for j in 0..3 {
            assert!((b.b[j] - 3.0 * a.b[j]).abs() <= 1e-15 * b.b[j]);
        }
        let lead = nf.order(a.r).unwrap().leading.as_ref().unwrap();
        assert_eq!(a.degree, lead.degree);
        for j in 0..3 {
            let br = phi_bracket(j, &lead.series).unwrap();
            assert!(br.terms().all(|t| t.mono.deg_sec() == lead.degree));
        }
    }
    // An exact normal form has a vanishing remainder and infinite time.
    let mut t = Vec::new();
    for j in 0..3 {
        let mut e = [0; 3];
        e[j] = 2;
        t.push((e, [0; 3], OMEGA[j] / 2.0));
        t.push(([0; 3], e, OMEGA[j] / 2.0));
    }
    let nf0 = birkhoff_normalize(&poly(&t), 2).unwrap();
    let b = remainder_bounds(&nf0, &PolydiskRadii::new(radii, 2.0).unwrap()).unwrap();
    assert!(b.rows.iter().all(|r| r.b == [0.0; 3]));
    assert_eq!(optimal_time(1.0, &b, &radii).unwrap().t, f64::INFINITY);
}

#[test]
fn missing_remainder_is_reported() {
    let mut nf = synthetic_nf(3, 2);
    nf.orders[2].leading = None;
    assert!(matches!(
        remainder_bounds(&nf, &PolydiskRadii::new([0.1; 3], 2.0).unwrap()),
        Err(Error::MissingRemainder(2))
    ));
}

#[test]
fn polydisk_radii_are_validated() {
    assert!(PolydiskRadii::new([1.0, 0.0, 1.0], 2.0).is_err());
    assert!(PolydiskRadii::new([1.0; 3], 0.5).is_err());
    assert_eq!(radii_from_initial(&[3.0, 1.0, 0.0], &[4.0, 0.0, 2.0]).unwrap(), [5.0, 1.0, 2.0]);
    assert!(radii_from_initial(&[3.0, 0.0, 1.0], &[4.0, 0.0, 1.0]).is_err());
}

fn table(rows: &[(usize, u32, [f64; 3])]) -> BoundsTable {
    BoundsTable {
        rows: rows.iter().map(|&(r, degree, b)| BoundRow { r, degree, b, next_ratio: None }).collect(),
        c: 2.0,
    }
}

#[test]
fn optimal_order_selection() {
    let radii = [1.0; 3];
    let one = table(&[(3, 6, [1.0, 2.0, 3.0])]);
    let o = optimal_time(0.5, &one, &radii).unwrap();
    assert_eq!((o.r_opt, o.limiting_j, o.boundary), (3, Some(2), true));
    // Two orders sharing a remainder tie; the smaller one wins.
    let tie = table(&[(1, 4, [1.0; 3]), (2, 6, [1.0; 3]), (3, 6, [1.0; 3]), (4, 8, [1e3; 3])]);
    let o = optimal_time(0.5, &tie, &radii).unwrap();
    assert_eq!(o.r_opt, 2);
    assert!(!o.boundary);
    for row in &tie.rows {
        assert!(o.t >= tau_for_degree(0.5, row.degree, &row.b, &radii).0);
    }
}

#[test]
fn curve_is_a_decreasing_staircase() {
    let nf = synthetic_nf(8, 3);
    let radii = [1.0, 1.0, 1.0];
    let b = remainder_bounds(&nf, &PolydiskRadii::new(radii, 2.0).unwrap()).unwrap();
    let grid = log_grid(0.05, 5.0, 60);
    let c = sweep_curve(&b, &radii, &grid).unwrap();
    assert_eq!(c.samples.len(), 60);
    for w in c.samples.windows(2) {
        assert!(w[1].t < w[0].t);
        assert!(w[1].r_opt <= w[0].r_opt);
    }
    assert!(c.samples.iter().all(|s| s.t > 0.0 && (1..=8).contains(&s.r_opt)));
    assert!(c.samples.first().unwrap().r_opt > c.samples.last().unwrap().r_opt);
    assert_eq!(c, sweep_curve(&b, &radii, &grid).unwrap());
    assert!(sweep_curve(&b, &radii, &[0.5, 0.4]).is_err());
    assert!(sweep_curve(&b, &radii, &[0.0, 0.4]).is_err());
}

#[test]
fn default_grid_spans_the_reference_range() {
    let g = default_grid();
    assert_eq!(g.len(), 40);
    assert!((g[0] - 0.3).abs() < 1e-15 && (g[39] - 1.2).abs() < 1e-12);
    let q = g[1] / g[0];
    assert!(g.windows(2).all(|w| (w[1] / w[0] - q).abs() < 1e-12));
}

#[test]
fn crossing_radius_interpolates_power_laws_exactly() {
    let radii = [1.0; 3];
    let b = table(&[(5, 8, [1.0, 1.0, 1.0])]);
    let c = sweep_curve(&b, &radii, &log_grid(0.1, 1.0, 7)).unwrap();
    // τ = (1 − 2⁻⁶)/(6 ρ⁶); invert for τ = 1e3.
    let k = (1.0 - 2f64.powi(-6)) / 6.0;
    let want = (k / 1e3).powf(1.0 / 6.0);
    assert!((c.rho_at_time(1e3).unwrap() - want).abs() < 1e-12);
    assert_eq!(c.rho_at_time(1e30), None);
    assert!(c.log_slopes().iter().all(|s| (s - 6.0).abs() < 1e-9));
}

#[test]
fn csv_files_roundtrip() {
    let nf = synthetic_nf(6, 4);
    let radii = [0.05, 0.04, 0.02];
    let b = remainder_bounds(&nf, &PolydiskRadii::new(radii, 2.0).unwrap()).unwrap();
    let c = sweep_curve(&b, &radii, &default_grid()).unwrap();
    let mut buf = Vec::new();
    write_curve_csv(&c, &mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("rho0,r_opt,T_years,limiting_j,boundary_flag\n"));
    assert_eq!(read_curve_csv(&buf[..]).unwrap(), c.samples);
    let mut buf = Vec::new();
    write_bounds_csv(&b, &mut buf).unwrap();
    let back = read_bounds_csv(&buf[..], 2.0).unwrap();
    assert_eq!(back.rows.len(), b.rows.len());
    for (x, y) in back.rows.iter().zip(&b.rows) {
        assert_eq!((x.r, x.degree, x.b), (y.r, y.degree, y.b));
    }
    assert!(matches!(read_curve_csv("h\n1,2\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    assert!(read_bounds_csv("h\n1,4,1e-3,4\n".as_bytes(), 2.0).is_err());
}

#[test]
fn infinite_time_survives_csv() {
    let c = StabilityCurve {
        samples: vec![CurveSample { rho0: 0.5, r_opt: 1, t: f64::INFINITY, limiting_j: None, boundary: true }],
        bounds: table(&[]),
    };
    let mut buf = Vec::new();
    write_curve_csv(&c, &mut buf).unwrap();
    assert_eq!(read_curve_csv(&buf[..]).unwrap(), c.samples);
}

#[test]
fn estimated_time_is_not_violated_by_the_flow() {
    let nf = synthetic_nf(6, 5);
    let radii = [0.05, 0.04, 0.03];
    let b = remainder_bounds(&nf, &PolydiskRadii::new(radii, 2.0).unwrap()).unwrap();
    let h0 = {
        // The original Hamiltonian is H^(r) pulled back; integrate the
        // normalized one instead, whose drift is the remainder itself.
        nf.hamiltonian.clone()
    };
    let mut rng = StdRng::seed_from_u64(6);
    for rho0 in [0.3, 0.7, 1.0] {
        let t = optimal_time(rho0, &b, &radii).unwrap().t;
        let t_end = t.min(1e4);
        for _ in 0..3 {
            let start: [f64; 6] = {
                let mut v = [0.0; 6];
                for j in 0..3 {
                    let th = rng.random_range(0.0..std::f64::consts::TAU);
                    v[j] = rho0 * radii[j] * th.cos();
                    v[3 + j] = rho0 * radii[j] * th.sin();
                }
                v
            };
            let m = max_excursion(&h0, &radii, &start, t_end, 10.0);
            assert!(m <= 2.0 * rho0, "ρ₀ {rho0}: excursion {m}");
        }
    }
}

#[test]
fn loglog_slope_recovers_exponents() {
    let x = log_grid(1e-3, 1e-2, 5);
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powi(7)).collect();
    assert!((loglog_slope(&x, &y) - 7.0).abs() < 1e-10);
}

proptest! {
    #[test]
    fn weighted_norm_scales_homogeneously(seed in 0u64..1000, s in 0.1f64..10.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let f = random_homogeneous(&mut rng, 4, 5);
        let r = [0.3, 0.5, 0.7];
        let a = weighted_norm(&f, &r).unwrap();
        let b = weighted_norm(&f, &r.map(|x| x * s)).unwrap();
        prop_assert!((b - s.powi(4) * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn theta_bounds_every_angle(j in 0u32..12, k in 0u32..12, a in 0.0f64..std::f64::consts::TAU) {
        prop_assert!((a.cos().powi(j as i32) * a.sin().powi(k as i32)).abs() <= theta(j, k) * (1.0 + 1e-14));
    }
}
