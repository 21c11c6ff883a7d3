//! Sparse truncated Poisson series: polynomials in the fast actions `L` and
//! the secular variables `(ξ, η)` with trigonometric coefficients in the mean
//! longitudes `λ`.

mod io;
mod monomial;
mod ops;
mod series;

use serde::{Deserialize, Serialize};

pub use io::{from_text, read_series, to_text, write_series};
pub use monomial::{Harmonic, Monomial, Trig, Var, Wave, MAX_EXP, NVARS};
pub use ops::{
    angle_average, bracket_filtered, dalembert_violations, fourier_select, frequency_derivative,
    lie_series, lie_transform, poisson_bracket, purge_dalembert, resonant_complement, resonant_project,
    solve_homological, BracketBlock, LieTransform, MAX_LIE_ORDER, SMALL_DIVISOR_TOL,
};
pub use series::{PhasePoint, PoissonSeries, Term, TruncationPolicy, WaveFilter};

use crate::error::{Error, Result};

/// Fast mean motions `n*` and (once known) secular frequencies `ω`, rad/yr.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub n_star: [f64; 3],
    pub omega: Option<[f64; 3]>,
}

impl Frequencies {
    pub fn new(n_star: [f64; 3]) -> Result<Self> {
        if n_star.iter().any(|&n| !(n > 0.0)) {
            return Err(Error::Precondition(format!(
                "mean motions must be positive, got {n_star:?}"
            )));
        }
        Ok(Frequencies {
            n_star,
            omega: None,
        })
    }

    /// Records the secular frequencies after checking they share one sign.
    pub fn with_omega(mut self, omega: [f64; 3]) -> Result<Self> {
        let pos = omega.iter().all(|&w| w > 0.0);
        let neg = omega.iter().all(|&w| w < 0.0);
        if !(pos || neg) {
            return Err(Error::Precondition(format!(
                "secular frequencies do not share one sign: {omega:?}"
            )));
        }
        self.omega = Some(omega);
        Ok(self)
    }
}
