//! Human-readable summary of an output directory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};

use crate::config::Stage;
use crate::manifest::StageManifest;
use crate::pipeline::{load_orbits, read_json, stage_dir, BirkhoffArtifact, StabilityArtifact, TimeEstimate};
use crate::reference::*;

fn fmt_time(t: &TimeEstimate) -> String {
    let time = t.t_years.map_or("inf".to_string(), |v| format!("{v:.3e} yr"));
    let j = t.limiting_j.map_or("-".to_string(), |j| (j + 1).to_string());
    let flag = if t.boundary { ", at the largest computed order" } else { "" };
    format!("T = {time}, r_opt = {}, limiting mode {j}{flag}", t.r_opt)
}

fn vec3(v: &[f64; 3]) -> String {
    format!("({:+.6e}, {:+.6e}, {:+.6e})", v[0], v[1], v[2])
}

pub fn report(out: &Path) -> Result<String> {
    let manifests: Vec<StageManifest> =
        Stage::ALL.iter().filter_map(|&s| StageManifest::load(&stage_dir(out, s)).ok()).collect();
    if manifests.is_empty() {
        bail!("no stage manifests under {}", out.display());
    }
    let mut s = String::new();
    let _ = writeln!(s, "output directory: {}", out.display());
    let _ = writeln!(s, "\nstages:");
    for m in &manifests {
        let _ = writeln!(s, "  {:<10} {:>9.1} s  {} files  input {}", m.stage.name(), m.seconds, m.files.len(), &m.input_hash[..12]);
    }
    let find = |st: Stage| manifests.iter().find(|m| m.stage == st);

    if find(Stage::Orbits).is_some() {
        let o = load_orbits(out)?;
        let _ = writeln!(s, "\norbits:");
        let _ = writeln!(s, "  a*  = {}", vec3(&o.a_star));
        let _ = writeln!(s, "  Λ*  = {}", vec3(&o.lambda_star));
        let _ = writeln!(s, "  ξ(0) = {}", vec3(&o.xi0));
        let _ = writeln!(s, "  η(0) = {}", vec3(&o.eta0));
        if let Some(e) = o.energy_error {
            let _ = writeln!(s, "  relative energy error of the averaging run: {e:.2e}");
        }
    }
    if let Some(m) = find(Stage::Expansion) {
        let _ = writeln!(s, "\nexpansion:");
        let _ = writeln!(s, "  H^(T) terms: {}", m.summary["terms"]);
        let _ = writeln!(s, "  D'Alembert violations: {}", m.summary["dalembert_violations"]);
    }
    if let Some(m) = find(Stage::Secular) {
        let _ = writeln!(s, "\nsecular:");
        let _ = writeln!(
            s,
            "  H^(O2) terms: {} (reference run, degree 18 / trig 16: {FULL_O2_TERMS})",
            m.summary["o2_terms"]
        );
        let _ = writeln!(s, "  H^(O2) terms by order in the masses: {}", m.summary["o2_terms_by_order"]);
        let _ = writeln!(s, "  secular Hamiltonian terms: {}", m.summary["secular_terms"]);
    }
    if find(Stage::Birkhoff).is_some() {
        let b: BirkhoffArtifact = read_json(&stage_dir(out, Stage::Birkhoff).join("birkhoff.json"))?;
        let _ = writeln!(s, "\nsecular frequencies (rad/yr):");
        for j in 0..3 {
            let (w, p) = (b.map.omega[j], REF_OMEGA[j]);
            let _ = writeln!(s, "  ω{} = {w:+.10e}   reference {p:+.10e}   rel. diff {:.2}%", j + 1, 100.0 * ((w - p) / p).abs());
        }
        let _ = writeln!(s, "  diagonalizing map symplectic error: {:.2e}", b.symplectic_error);
        let margin = b.resonance_margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "  smallest resonance margin |k·ω|: {margin:.3e}");
        let _ = writeln!(s, "  x(0) = {}   reference {}", vec3(&b.x0), vec3(&REF_X));
        let _ = writeln!(s, "  y(0) = {}   reference {}", vec3(&b.y0), vec3(&REF_Y));
    }
    if find(Stage::Stability).is_some() {
        let a: StabilityArtifact = read_json(&stage_dir(out, Stage::Stability).join("stability.json"))?;
        let _ = writeln!(s, "\nstability (C = {}):", a.c);
        let _ = writeln!(s, "  R (ours)            = {}", vec3(&a.radii));
        let _ = writeln!(s, "  R (reference point) = {}", vec3(&a.reference_radii));
        let _ = writeln!(s, "  ρ₀ = 1: {}   (reference ~{T_AT_UNIT_RHO:.0e} yr, r_opt {R_OPT_FULL})", fmt_time(&a.at_unit_rho));
        let _ = writeln!(s, "  ρ₀ = 1 with reference R: {}", fmt_time(&a.at_unit_rho_reference_radii));
        match a.rho_at_5e9 {
            Some(r) => {
                let _ = writeln!(s, "  T = 5e9 yr at ρ₀ = {r:.3}   (reference ~{RHO_AT_5E9})");
            }
            None => {
                let _ = writeln!(s, "  T does not cross 5e9 yr on the grid");
            }
        }
    }
    Ok(s)
}
