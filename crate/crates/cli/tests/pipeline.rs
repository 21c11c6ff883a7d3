//! End-to-end runs at a small truncation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use secstab_cli::config::{PipelineConfig, Stage};
use secstab_cli::manifest::{hash_file, StageManifest};
use secstab_cli::pipeline::{load_birkhoff, stage_dir};
use secstab_cli::report::report;
use secstab_cli::{run, StageStatus};
use secstab_core::orbits::{parse_ephemeris, read_trajectory_csv};
use secstab_core::secular::SecularHamiltonian;
use secstab_core::stability::{read_bounds_csv, read_curve_csv};

fn data_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_elements.txt")
}

fn small(out: &Path, extra: &[&str]) -> PipelineConfig {
    let mut sets = vec![
        format!("input.path=\"{}\"", data_file().display()),
        format!("output.dir=\"{}\"", out.display()),
        "expansion.max_deg_sec=4".into(),
        "expansion.max_harm=6".into(),
        "orbits.mean_window=1000".into(),
        "birkhoff.r_max=6".into(),
        "stability.rho_points=8".into(),
    ];
    sets.extend(extra.iter().map(|s| s.to_string()));
    PipelineConfig::resolve(None, Vec::new(), &sets).unwrap()
}

fn ran(st: &[(Stage, StageStatus)]) -> Vec<Stage> {
    st.iter().filter(|(_, s)| matches!(s, StageStatus::Ran { .. })).map(|(s, _)| *s).collect()
}

fn file_hashes(dir: &Path) -> Vec<(String, String)> {
    StageManifest::load(dir).unwrap().files.into_iter().collect()
}

#[test]
fn orbits_only_writes_nothing_else() {
    let tmp = tempfile::tempdir().unwrap();
    let st = run(&small(tmp.path(), &["stages=orbits"]), false).unwrap();
    assert_eq!(ran(&st), vec![Stage::Orbits]);
    let entries: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("orbits")]);
    let m = StageManifest::load(&stage_dir(tmp.path(), Stage::Orbits)).unwrap();
    assert!(m.summary["lambda_star"].is_array());
    assert!(m.files.contains_key("orbits.json"));
}

#[test]
fn full_run_is_idempotent_and_resumable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path(), &[]);
    assert_eq!(ran(&run(&cfg, false).unwrap()), Stage::ALL.to_vec());
    let before: Vec<_> = Stage::ALL.iter().map(|&s| file_hashes(&stage_dir(tmp.path(), s))).collect();

    assert!(ran(&run(&cfg, false).unwrap()).is_empty());

    // A change downstream of secular reruns only the later stages.
    let cfg2 = small(tmp.path(), &["birkhoff.r_max=4"]);
    assert_eq!(ran(&run(&cfg2, false).unwrap()), vec![Stage::Birkhoff, Stage::Stability]);

    // Back to the first configuration: birkhoff is rebuilt from the
    // persisted secular artifact and comes out bit-identical.
    assert_eq!(ran(&run(&cfg, false).unwrap()), vec![Stage::Birkhoff, Stage::Stability]);
    let after: Vec<_> = Stage::ALL.iter().map(|&s| file_hashes(&stage_dir(tmp.path(), s))).collect();
    assert_eq!(before, after);

    // A damaged artifact is detected and recomputed.
    let curve = stage_dir(tmp.path(), Stage::Stability).join("curve.csv");
    fs::write(&curve, "garbage").unwrap();
    assert_eq!(ran(&run(&cfg, false).unwrap()), vec![Stage::Stability]);
    assert_eq!(file_hashes(&stage_dir(tmp.path(), Stage::Stability)), before[4]);

    assert_eq!(ran(&run(&cfg, true).unwrap()), Stage::ALL.to_vec());
    let forced: Vec<_> = Stage::ALL.iter().map(|&s| file_hashes(&stage_dir(tmp.path(), s))).collect();
    assert_eq!(before, forced);
}

#[test]
fn emitted_files_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path(), &[]);
    run(&cfg, false).unwrap();
    let o = stage_dir(tmp.path(), Stage::Orbits);
    let eph = parse_ephemeris(&fs::read_to_string(o.join("elements.txt")).unwrap()).unwrap();
    assert!(eph.elements.is_some());
    let traj = read_trajectory_csv(std::io::BufReader::new(fs::File::open(o.join("trajectory.csv")).unwrap())).unwrap();
    assert_eq!(traj.len(), 101);
    assert!(SecularHamiltonian::load(&stage_dir(tmp.path(), Stage::Secular)).unwrap().series.len() > 0);
    let (b, nf) = load_birkhoff(tmp.path()).unwrap();
    assert_eq!(nf.r_max, 6);
    assert!(b.map.omega.iter().all(|&w| w < 0.0));
    let s = stage_dir(tmp.path(), Stage::Stability);
    let curve = read_curve_csv(std::io::BufReader::new(fs::File::open(s.join("curve.csv")).unwrap())).unwrap();
    assert_eq!(curve.len(), 8);
    let bounds = read_bounds_csv(std::io::BufReader::new(fs::File::open(s.join("bounds.csv")).unwrap()), 2.0).unwrap();
    assert_eq!(bounds.rows.len(), 6);
}

#[test]
fn report_lists_frequencies_and_counts() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(report(tmp.path()).is_err());
    run(&small(tmp.path(), &[]), false).unwrap();
    let r = report(tmp.path()).unwrap();
    for needle in ["ω1 = -", "ω2 = -", "ω3 = -", "H^(O2) terms:", "94109751", "R (ours)", "ρ₀ = 1: T = ", "H^(T) terms:"] {
        assert!(r.contains(needle), "missing '{needle}' in\n{r}");
    }
}

#[test]
fn state_vector_input_matches_elements_input() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = secstab_core::orbits::reference_system();
    let mut text = format!("sun {:e}\n", sys.m0);
    for j in 0..3 {
        let (p, v) = (sys.pos[j], sys.vel[j]);
        text += &format!("{:e} {:e} {:e} {:e} {:e} {:e} {:e}\n", sys.masses[j], p[0], p[1], p[2], v[0], v[1], v[2]);
    }
    let input = tmp.path().join("sv.txt");
    fs::write(&input, text).unwrap();
    let a = small(&tmp.path().join("a"), &["stages=orbits", "orbits.mean_window=0"]);
    let mut b = small(&tmp.path().join("b"), &["stages=orbits", "orbits.mean_window=0", "input.format=\"state-vectors\""]);
    b.input.path = input;
    run(&a, false).unwrap();
    run(&b, false).unwrap();
    let oa = secstab_cli::pipeline::load_orbits(&a.output.dir).unwrap();
    let ob = secstab_cli::pipeline::load_orbits(&b.output.dir).unwrap();
    for j in 0..3 {
        assert!((oa.lambda_star[j] - ob.lambda_star[j]).abs() < 1e-12 * oa.lambda_star[j]);
        assert!((oa.xi0[j] - ob.xi0[j]).abs() < 1e-10);
        assert!((oa.eta0[j] - ob.eta0[j]).abs() < 1e-10);
    }
    let mut wrong = a.clone();
    wrong.input.format = secstab_cli::config::InputFormat::StateVectors;
    wrong.output.dir = tmp.path().join("c");
    assert!(run(&wrong, false).is_err());
}

#[test]
fn binary_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_secstab");
    let common = [
        "--set".to_string(),
        format!("input.path=\"{}\"", data_file().display()),
        "--set".into(),
        "expansion.max_deg_sec=4".into(),
        "--set".into(),
        "expansion.max_harm=6".into(),
        "--set".into(),
        "orbits.mean_window=0".into(),
        "--set".into(),
        "birkhoff.r_max=4".into(),
        "-o".into(),
        tmp.path().display().to_string(),
    ];
    let go = |args: &[&str]| {
        let out = Command::new(bin).args(args).args(&common).env("RUST_LOG", "warn").output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let r = go(&["run", "--stages", "orbits,expansion,secular,birkhoff"]);
    assert!(r.contains("birkhoff: ran"));
    assert!(!stage_dir(tmp.path(), Stage::Stability).exists());
    let r = go(&["run"]);
    assert!(r.contains("secular: up to date") && r.contains("stability: ran"));
    let csv = go(&["sweep", "--rho-min", "0.5", "--rho-max", "1", "--points", "3"]);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("rho0,r_opt,T_years,limiting_j,boundary_flag"));
    let dest = tmp.path().join("appendix.txt");
    go(&["emit-appendix", "--output", dest.to_str().unwrap()]);
    let table = fs::read_to_string(&dest).unwrap();
    assert!(table.lines().any(|l| l.trim_start().starts_with("4 ")));
    assert!(go(&["report"]).contains("secular frequencies"));
    assert!(hash_file(&dest).unwrap().len() == 64);

    let out = Command::new(bin).args(["run", "--stages", "orbits,secular"]).args(&common).output().unwrap();
    assert!(!out.status.success());
}
