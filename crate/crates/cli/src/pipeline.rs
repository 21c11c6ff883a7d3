//! Stage execution: orbits → expansion → secular → birkhoff → stability.
//!
//! Every stage reads its input from the upstream artifact on disk, so a
//! resumed run and a fresh run see identical data.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use secstab_core::birkhoff::{birkhoff_normalize, diagonalize_quadratic, transform_initial_point, DiagonalizingMap, NormalFormResult};
use secstab_core::expansion::ExpandedHamiltonian;
use secstab_core::orbits::{
    average_semimajor, big_lambda_from_a, integrate_nbody, planar_elements, poincare_from_elements, read_ephemeris,
    to_invariant_plane, write_elements, write_trajectory_csv, EphemerisFormat, OrbitalElements, PlanetSystem,
};
use secstab_core::pseries::{read_series, write_series};
use secstab_core::secular::{secular_pipeline, SecularHamiltonian};
use secstab_core::stability::{
    optimal_time, radii_from_initial, remainder_bounds, sweep_curve, write_bounds_csv, write_curve_csv, PolydiskRadii,
    StabilityCurve,
};

use crate::config::{InputFormat, PipelineConfig, Stage};
use crate::manifest::{hash_file, hash_tree, input_hash, stage_inputs, StageManifest};
use crate::reference;

pub fn stage_dir(out: &Path, stage: Stage) -> PathBuf {
    out.join(stage.name())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitsArtifact {
    pub m0: f64,
    pub masses: [f64; 3],
    /// Planar elements at the initial epoch.
    pub elements: [OrbitalElements; 3],
    pub a_star: [f64; 3],
    pub lambda_star: [f64; 3],
    pub xi0: [f64; 3],
    pub eta0: [f64; 3],
    /// Largest relative energy error along the averaging integration.
    pub energy_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffArtifact {
    pub map: DiagonalizingMap,
    pub symplectic_error: f64,
    pub x0: [f64; 3],
    pub y0: [f64; 3],
    /// `(r, min |k·ω| over 0 < |k|₁ ≤ r + 2)`.
    pub resonance_margins: Vec<(usize, f64)>,
}

/// `None` stands for an infinite time, which JSON cannot hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    pub rho0: f64,
    pub r_opt: usize,
    pub t_years: Option<f64>,
    pub limiting_j: Option<usize>,
    pub boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityArtifact {
    pub radii: [f64; 3],
    pub c: f64,
    pub at_unit_rho: TimeEstimate,
    pub rho_at_5e9: Option<f64>,
    /// Same estimate with radii from the reference initial point.
    pub reference_radii: [f64; 3],
    pub at_unit_rho_reference_radii: TimeEstimate,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn time_estimate(rho0: f64, bounds: &secstab_core::stability::BoundsTable, radii: &[f64; 3]) -> Result<TimeEstimate> {
    let o = optimal_time(rho0, bounds, radii)?;
    Ok(TimeEstimate {
        rho0,
        r_opt: o.r_opt,
        t_years: o.t.is_finite().then_some(o.t),
        limiting_j: o.limiting_j,
        boundary: o.boundary,
    })
}

pub fn load_orbits(out: &Path) -> Result<OrbitsArtifact> {
    read_json(&stage_dir(out, Stage::Orbits).join("orbits.json"))
}

pub fn load_secular(out: &Path) -> Result<SecularHamiltonian> {
    Ok(SecularHamiltonian::load(&stage_dir(out, Stage::Secular))?)
}

pub fn load_birkhoff(out: &Path) -> Result<(BirkhoffArtifact, NormalFormResult)> {
    let dir = stage_dir(out, Stage::Birkhoff);
    let art = read_json(&dir.join("birkhoff.json"))?;
    let nf = NormalFormResult::load(&dir.join("normal_form"))?;
    Ok((art, nf))
}

fn run_orbits(cfg: &PipelineConfig, dir: &Path) -> Result<serde_json::Value> {
    let eph = read_ephemeris(&cfg.input.path).with_context(|| format!("reading {}", cfg.input.path.display()))?;
    match (cfg.input.format, eph.format) {
        (InputFormat::Elements, EphemerisFormat::StateVectors) | (InputFormat::StateVectors, EphemerisFormat::Elements) => {
            bail!("input format is {:?} but the file has the {:?} layout", cfg.input.format, eph.format)
        }
        _ => {}
    }
    let (m0, masses) = (eph.system.m0, eph.system.masses);
    let elements = match eph.elements {
        Some(els) => els,
        None => planar_elements(&to_invariant_plane(&eph.system)?)?,
    };
    let system = PlanetSystem::from_elements(m0, masses, &elements)?;
    let (a_star, energy_error) = if cfg.orbits.mean_window > 0.0 {
        let traj = integrate_nbody(&system, cfg.orbits.mean_window, cfg.orbits.dt, cfg.orbits.sample_dt)?;
        write_trajectory_csv(&traj, fs::File::create(dir.join("trajectory.csv"))?)?;
        let e0 = traj.energy(0);
        let err = (0..traj.samples.len()).map(|i| ((traj.energy(i) - e0) / e0).abs()).fold(0.0, f64::max);
        (average_semimajor(&traj, cfg.orbits.mean_window)?, Some(err))
    } else {
        (elements.clone().map(|e| e.a), None)
    };
    let lambda_star = std::array::from_fn(|j| big_lambda_from_a(a_star[j], m0, masses[j]));
    let pv = poincare_from_elements(&elements, m0, &masses)?;
    write_elements(m0, &masses, &elements, fs::File::create(dir.join("elements.txt"))?)?;
    let art = OrbitsArtifact { m0, masses, elements, a_star, lambda_star, xi0: pv.xi, eta0: pv.eta, energy_error };
    write_json(&dir.join("orbits.json"), &art)?;
    Ok(json!({ "a_star": a_star, "lambda_star": lambda_star, "energy_error": energy_error }))
}

fn run_expansion(cfg: &PipelineConfig, out: &Path, dir: &Path) -> Result<serde_json::Value> {
    let orb = load_orbits(out)?;
    let h = ExpandedHamiltonian::build(orb.m0, orb.masses, orb.lambda_star, cfg.policy())?;
    h.save(dir)?;
    Ok(json!({
        "terms": h.term_count(),
        "dalembert_violations": h.dalembert_violations(),
        "symmetry_residue": h.symmetry_residue,
        "n_star": h.n_star.n_star,
    }))
}

fn run_secular(cfg: &PipelineConfig, out: &Path, dir: &Path) -> Result<serde_json::Value> {
    let h = ExpandedHamiltonian::load(&stage_dir(out, Stage::Expansion))?;
    let sc = cfg.secular_config();
    let (o2, sec) = secular_pipeline(&h, &sc)?;
    sec.save(dir)?;
    Ok(json!({
        "o2_terms": o2.term_count(),
        "o2_terms_by_order": o2.parts.iter().map(|p| p.len()).collect::<Vec<_>>(),
        "secular_terms": sec.series.len(),
        "first_order_terms": sec.first_order.len(),
        "resonant_correction_terms": sec.resonant_correction.len(),
        "secular_config": sc,
    }))
}

fn run_birkhoff(cfg: &PipelineConfig, out: &Path, dir: &Path) -> Result<serde_json::Value> {
    let sec = load_secular(out)?;
    let orb = load_orbits(out)?;
    let (map, h0) = diagonalize_quadratic(&sec)?;
    let (x0, y0) = transform_initial_point(&map, &orb.xi0, &orb.eta0)?;
    write_series(&h0, fs::File::create(dir.join("h0.series"))?)?;
    let nf = birkhoff_normalize(&h0, cfg.birkhoff.r_max)?;
    nf.save(&dir.join("normal_form"))?;
    let art = BirkhoffArtifact {
        symplectic_error: map.symplectic_error(),
        resonance_margins: nf.orders.iter().map(|o| (o.r, o.resonance_margin)).collect(),
        map,
        x0,
        y0,
    };
    write_json(&dir.join("birkhoff.json"), &art)?;
    Ok(json!({
        "omega": art.map.omega,
        "x0": x0,
        "y0": y0,
        "symplectic_error": art.symplectic_error,
        "min_resonance_margin": art.resonance_margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
        "hamiltonian_terms": nf.hamiltonian.len(),
    }))
}

/// Bounds and curve for the given grid and safety factor.
pub fn stability_curve(nf: &NormalFormResult, radii: &[f64; 3], c: f64, grid: &[f64]) -> Result<StabilityCurve> {
    let bounds = remainder_bounds(nf, &PolydiskRadii::new(*radii, c)?)?;
    Ok(sweep_curve(&bounds, radii, grid)?)
}

fn run_stability(cfg: &PipelineConfig, out: &Path, dir: &Path) -> Result<serde_json::Value> {
    let (b, nf) = load_birkhoff(out)?;
    let c = cfg.stability.c;
    let radii = radii_from_initial(&b.x0, &b.y0)?;
    let curve = stability_curve(&nf, &radii, c, &cfg.rho_grid())?;
    write_bounds_csv(&curve.bounds, fs::File::create(dir.join("bounds.csv"))?)?;
    write_curve_csv(&curve, fs::File::create(dir.join("curve.csv"))?)?;
    let reference_radii = radii_from_initial(&reference::REF_X, &reference::REF_Y)?;
    let ref_bounds = remainder_bounds(&nf, &PolydiskRadii::new(reference_radii, c)?)?;
    let art = StabilityArtifact {
        radii,
        c,
        at_unit_rho: time_estimate(1.0, &curve.bounds, &radii)?,
        rho_at_5e9: curve.rho_at_time(5e9),
        reference_radii,
        at_unit_rho_reference_radii: time_estimate(1.0, &ref_bounds, &reference_radii)?,
    };
    write_json(&dir.join("stability.json"), &art)?;
    Ok(serde_json::to_value(&art)?)
}

fn input_file_hash(cfg: &PipelineConfig) -> Result<String> {
    hash_file(&cfg.input.path).with_context(|| format!("input {}", cfg.input.path.display()))
}

/// Outcome of one stage in a run.
#[derive(Clone, Debug, PartialEq)]
pub enum StageStatus {
    Ran { seconds: f64 },
    UpToDate,
}

/// Runs the configured stages; stages whose manifest matches are skipped
/// unless `force` is set.
pub fn run(cfg: &PipelineConfig, force: bool) -> Result<Vec<(Stage, StageStatus)>> {
    cfg.validate()?;
    let out = &cfg.output.dir;
    fs::create_dir_all(out)?;
    let file_hash = input_file_hash(cfg)?;
    let mut upstream: Option<String> = None;
    let mut status = Vec::new();
    for &stage in &cfg.stages {
        let dir = stage_dir(out, stage);
        let hash = input_hash(stage, &stage_inputs(cfg, stage, &file_hash), upstream.as_deref());
        if !force {
            if let Ok(m) = StageManifest::load(&dir) {
                if m.input_hash == hash && m.files_intact(&dir) {
                    info!("{stage}: up to date");
                    upstream = Some(m.output_hash());
                    status.push((stage, StageStatus::UpToDate));
                    continue;
                }
            }
        }
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        info!("{stage}: running");
        let t = Instant::now();
        let summary = match stage {
            Stage::Orbits => run_orbits(cfg, &dir),
            Stage::Expansion => run_expansion(cfg, out, &dir),
            Stage::Secular => run_secular(cfg, out, &dir),
            Stage::Birkhoff => run_birkhoff(cfg, out, &dir),
            Stage::Stability => run_stability(cfg, out, &dir),
        }
        .with_context(|| format!("stage {stage} failed"))?;
        let seconds = t.elapsed().as_secs_f64();
        let m = StageManifest { stage, input_hash: hash, files: hash_tree(&dir)?, seconds, summary, config: cfg.clone() };
        m.save(&dir)?;
        info!("{stage}: done in {seconds:.1} s");
        upstream = Some(m.output_hash());
        status.push((stage, StageStatus::Ran { seconds }));
    }
    Ok(status)
}

/// Reads a series file written by a stage.
pub fn read_series_file(path: &Path) -> Result<secstab_core::PoissonSeries> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_series(BufReader::new(f))?)
}
