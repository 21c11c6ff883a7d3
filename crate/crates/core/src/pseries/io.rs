//! Plain-text series format.
//!
//! ```text
//! # pseries max_deg_l=1 max_deg_sec=8 max_harm=10 drop_tol=1e-20
//! coeff jL1 jL2 jL3 r1 r2 r3 s1 s2 s3 k1 k2 k3 c|s
//! ```
//!
//! One term per line, sorted by the graded-lexicographic term key.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::monomial::Trig;
use super::series::{PoissonSeries, Term, TruncationPolicy};
use crate::error::{Error, Result};

const MAGIC: &str = "# pseries";

pub fn to_text(f: &PoissonSeries) -> String {
    let p = f.policy();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{MAGIC} max_deg_l={} max_deg_sec={} max_harm={} drop_tol={:e} term_limit={}",
        p.max_deg_l, p.max_deg_sec, p.max_harm, p.drop_tol, p.term_limit
    );
    for t in f.sorted_terms() {
        let e = t.mono.exps();
        let k = t.wave.k.0;
        let _ = writeln!(
            s,
            "{:e} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            t.coeff,
            e[0],
            e[1],
            e[2],
            e[3],
            e[4],
            e[5],
            e[6],
            e[7],
            e[8],
            k[0],
            k[1],
            k[2],
            if t.wave.trig == Trig::Cos { 'c' } else { 's' }
        );
    }
    s
}

pub fn write_series<W: Write>(f: &PoissonSeries, mut w: W) -> Result<()> {
    w.write_all(to_text(f).as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<TruncationPolicy> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err(1, "missing '# pseries' header"))?;
    let mut p = TruncationPolicy::default();
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad header field {kv}")))?;
        let bad = |_| parse_err(1, format!("bad value in {kv}"));
        match k {
            "max_deg_l" => p.max_deg_l = v.parse().map_err(bad)?,
            "max_deg_sec" => p.max_deg_sec = v.parse().map_err(bad)?,
            "max_harm" => p.max_harm = v.parse().map_err(bad)?,
            "drop_tol" => p.drop_tol = v.parse().map_err(|_| parse_err(1, format!("bad value in {kv}")))?,
            "term_limit" => p.term_limit = v.parse().map_err(bad)?,
            _ => return Err(parse_err(1, format!("unknown header field {k}"))),
        }
    }
    p.validate()?;
    Ok(p)
}

pub fn read_series<R: BufRead>(r: R) -> Result<PoissonSeries> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty input"))??;
    let policy = parse_header(header.trim())?;
    let mut terms = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let ln = i + 2;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 14 {
            return Err(parse_err(ln, format!("expected 14 fields, found {}", f.len())));
        }
        let coeff: f64 = f[0].parse().map_err(|_| parse_err(ln, "bad coefficient"))?;
        let mut e = [0u32; 9];
        for (j, x) in e.iter_mut().enumerate() {
            *x = f[1 + j].parse().map_err(|_| parse_err(ln, "bad exponent"))?;
            if *x > super::monomial::MAX_EXP {
                return Err(parse_err(ln, "exponent too large"));
            }
        }
        let mut k = [0i32; 3];
        for (j, x) in k.iter_mut().enumerate() {
            *x = f[10 + j].parse().map_err(|_| parse_err(ln, "bad harmonic"))?;
        }
        let trig = match f[13] {
            "c" => Trig::Cos,
            "s" => Trig::Sin,
            other => return Err(parse_err(ln, format!("bad trig selector {other}"))),
        };
        terms.push(Term::new(
            [e[0], e[1], e[2]],
            [e[3], e[4], e[5]],
            [e[6], e[7], e[8]],
            k,
            trig,
            coeff,
        ));
    }
    Ok(PoissonSeries::from_terms(terms, policy))
}

pub fn from_text(s: &str) -> Result<PoissonSeries> {
    read_series(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_lines() {
        let s = "# pseries max_deg_l=1 max_deg_sec=4 max_harm=4 drop_tol=0\n1.0 0 0 0 1 0 0 0 0 0 1 0 0 x\n";
        assert!(matches!(from_text(s), Err(Error::Parse { line: 2, .. })));
        assert!(from_text("nonsense\n").is_err());
    }

    #[test]
    fn header_carries_policy() {
        let s = "# pseries max_deg_l=0 max_deg_sec=6 max_harm=3 drop_tol=1e-12\n2.5 0 0 0 2 0 0 0 0 0 0 0 0 c\n";
        let f = from_text(s).unwrap();
        assert_eq!(f.policy().max_deg_sec, 6);
        assert_eq!(f.policy().drop_tol, 1e-12);
        assert_eq!(f.len(), 1);
        assert_eq!(to_text(&f).lines().count(), 2);
    }
}
