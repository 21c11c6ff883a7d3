//! Plain-text ephemeris tables and trajectory CSV files.
//!
//! An ephemeris lists one planet per row, innermost first, in one of two
//! layouts (units AU, yr, rad, `G = 1`):
//!
//! ```text
//! # comment
//! sun 39.47841760435743          (optional; default (2π)²)
//! m x y z vx vy vz               heliocentric state vectors
//! m a M e omega                  planar canonical heliocentric elements
//! ```
//!
//! The layout is detected from the column count and must be the same on
//! every row.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{planet_masses, planarize, OrbitalElements, PlanetSystem, Trajectory, SUN_MASS};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EphemerisFormat {
    StateVectors,
    Elements,
}

#[derive(Clone, Debug)]
pub struct Ephemeris {
    pub format: EphemerisFormat,
    pub system: PlanetSystem,
    /// The rows as given, for the elements layout.
    pub elements: Option<[OrbitalElements; 3]>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_ephemeris(text: &str) -> Result<Ephemeris> {
    let mut m0 = SUN_MASS;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0].eq_ignore_ascii_case("sun") {
            if fields.len() != 2 {
                return Err(perr(ln, "expected 'sun <mass>'"));
            }
            m0 = fields[1].parse().map_err(|_| perr(ln, "bad solar mass"))?;
            continue;
        }
        let vals = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| perr(ln, format!("bad number '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((ln, vals));
    }
    if rows.len() != 3 {
        return Err(perr(0, format!("expected 3 planet rows, found {}", rows.len())));
    }
    let ncol = rows[0].1.len();
    let format = match ncol {
        7 => EphemerisFormat::StateVectors,
        5 => EphemerisFormat::Elements,
        n => return Err(perr(rows[0].0, format!("expected 5 or 7 columns, found {n}"))),
    };
    if let Some((ln, r)) = rows.iter().find(|(_, r)| r.len() != ncol) {
        return Err(perr(*ln, format!("expected {ncol} columns, found {}", r.len())));
    }
    let masses = [rows[0].1[0], rows[1].1[0], rows[2].1[0]];
    match format {
        EphemerisFormat::StateVectors => {
            let pos = std::array::from_fn(|j| [rows[j].1[1], rows[j].1[2], rows[j].1[3]]);
            let vel = std::array::from_fn(|j| [rows[j].1[4], rows[j].1[5], rows[j].1[6]]);
            Ok(Ephemeris {
                format,
                system: PlanetSystem::new(m0, masses, pos, vel)?,
                elements: None,
            })
        }
        EphemerisFormat::Elements => {
            let els: [OrbitalElements; 3] = std::array::from_fn(|j| {
                let r = &rows[j].1;
                OrbitalElements::planar(r[1], r[3], r[2], r[4])
            });
            for (j, el) in els.iter().enumerate() {
                el.validate().map_err(|e| perr(rows[j].0, e.to_string()))?;
            }
            Ok(Ephemeris {
                format,
                system: PlanetSystem::from_elements(m0, masses, &els)?,
                elements: Some(els),
            })
        }
    }
}

pub fn read_ephemeris(path: &Path) -> Result<Ephemeris> {
    parse_ephemeris(&std::fs::read_to_string(path)?)
}

/// Writes planar elements in the 5-column layout.
pub fn write_elements<W: Write>(m0: f64, masses: &[f64; 3], els: &[OrbitalElements; 3], mut w: W) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# m a M e omega");
    let _ = writeln!(s, "sun {m0:e}");
    for j in 0..3 {
        let el = planarize(&els[j]);
        let _ = writeln!(s, "{:e} {:e} {:e} {:e} {:e}", masses[j], el.a, el.mean_anomaly, el.e, el.omega);
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Jupiter, Saturn and Uranus planar elements at JD 2440400.5.
pub fn reference_elements() -> [OrbitalElements; 3] {
    [
        OrbitalElements::planar(5.20463727204700266, 0.04785365972484999, 3.04525729444853654, 0.24927354029554571),
        OrbitalElements::planar(9.54108529142232165, 0.05460848595674678, 5.32199311882584869, 1.61225062288036902),
        OrbitalElements::planar(19.2231635458410572, 0.04858667407651962, 0.19431922829271914, 2.99374344439246487),
    ]
}

pub fn reference_system() -> PlanetSystem {
    PlanetSystem::from_elements(SUN_MASS, planet_masses(), &reference_elements())
        .expect("tabulated elements are valid")
}

/// Writes `t, a1, e1, w1, a2, e2, w2, a3, e3, w3` rows of planar
/// osculating elements.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let mut s = String::from("t,a1,e1,w1,a2,e2,w2,a3,e3,w3\n");
    for i in 0..traj.samples.len() {
        let els = traj.system(i)?.elements()?;
        let _ = write!(s, "{:e}", traj.samples[i].t);
        for el in &els {
            let el = planarize(el);
            let _ = write!(s, ",{:e},{:e},{:e}", el.a, el.e, el.omega);
        }
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads the rows written by [`write_trajectory_csv`].
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<Vec<[f64; 10]>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if !line.starts_with("t,") {
                return Err(perr(1, "missing header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| perr(i + 1, format!("bad number '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        let row: [f64; 10] = vals
            .try_into()
            .map_err(|v: Vec<f64>| perr(i + 1, format!("expected 10 columns, found {}", v.len())))?;
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_file_roundtrip() {
        let mut buf = Vec::new();
        write_elements(SUN_MASS, &planet_masses(), &reference_elements(), &mut buf).unwrap();
        let eph = parse_ephemeris(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(eph.format, EphemerisFormat::Elements);
        assert_eq!(eph.elements.unwrap(), reference_elements());
        assert_eq!(eph.system.masses, planet_masses());
    }

    #[test]
    fn state_layout_detected() {
        let s = "sun 39.47841760435743\n\
                 0.0377 5.0 0.0 0.0 0.0 2.75 0.0\n\
                 0.0113 -9.5 0.0 0.0 0.0 -2.03 0.0 # comment\n\
                 0.0017 0.0 19.2 0.0 -1.43 0.0 0.0\n";
        let eph = parse_ephemeris(s).unwrap();
        assert_eq!(eph.format, EphemerisFormat::StateVectors);
        assert_eq!(eph.system.pos[1], [-9.5, 0.0, 0.0]);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(parse_ephemeris("1 2 3\n"), Err(Error::Parse { .. })));
        let mixed = "0.03 5.2 1 0.05 0.2\n0.01 9.5 1 0.05 0.2\n0.001 19 1 0.05 0.2 0 0\n";
        assert!(matches!(parse_ephemeris(mixed), Err(Error::Parse { line: 3, .. })));
    }
}
