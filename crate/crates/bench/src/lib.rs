//! Fixtures shared by the benchmarks.

use rand::{rngs::StdRng, Rng, SeedableRng};
use secstab_core::birkhoff::diagonalize_quadratic;
use secstab_core::expansion::ExpandedHamiltonian;
use secstab_core::orbits::{big_lambda_from_a, planet_masses, reference_elements, SUN_MASS};
use secstab_core::secular::{secular_pipeline, SecularConfig};
use secstab_core::{PoissonSeries, Term, Trig, TruncationPolicy};

/// `n` random terms with total degree ≤ `deg` and harmonics `|k_j| ≤ kmax`.
pub fn random_series(seed: u64, n: usize, deg: u32, kmax: i32, policy: TruncationPolicy) -> PoissonSeries {
    let mut rng = StdRng::seed_from_u64(seed);
    let terms: Vec<Term> = (0..n)
        .map(|_| {
            let mut e = [0u32; 9];
            for _ in 0..rng.random_range(1..=deg) {
                e[rng.random_range(0..9)] += 1;
            }
            let k = [0; 3].map(|_| rng.random_range(-kmax..=kmax));
            let trig = if rng.random::<bool>() { Trig::Sin } else { Trig::Cos };
            Term::new([e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]], k, trig, rng.random_range(-1.0..1.0))
        })
        .collect();
    PoissonSeries::from_terms(terms, policy)
}

pub fn reference_lambda_star() -> [f64; 3] {
    let m = planet_masses();
    let els = reference_elements();
    std::array::from_fn(|j| big_lambda_from_a(els[j].a, SUN_MASS, m[j]))
}

/// Expanded Hamiltonian at a small truncation.
pub fn small_expansion(max_deg_sec: u32, max_harm: u32) -> ExpandedHamiltonian {
    ExpandedHamiltonian::build(SUN_MASS, planet_masses(), reference_lambda_star(), TruncationPolicy::new(2, max_deg_sec, max_harm))
        .expect("expansion")
}

/// Diagonalized secular Hamiltonian of the small truncation.
pub fn small_h0(max_deg_sec: u32, max_harm: u32) -> PoissonSeries {
    let h = small_expansion(max_deg_sec, max_harm);
    let (_, sec) = secular_pipeline(&h, &SecularConfig::for_degree(max_deg_sec)).expect("secular pipeline");
    diagonalize_quadratic(&sec).expect("diagonalization").1
}
