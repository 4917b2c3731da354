//! Plain-text MDP format.
//!
//! ```text
//! mdp <n_states> <n_actions> gamma=<g>      (or horizon=<H>)
//! d0 <p_0> ... <p_{S-1}>
//! terminal <s> ...                          (finite-horizon models only)
//! <s> <a> <r> <p(s'=0)> ... <p(s'=S-1)>     (one line per (s, a), s-major)
//! ```
//!
//! Floats are written in their shortest round-trip form, so
//! `parse_mdp(&write_mdp(m)) == m` bit for bit.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{Dynamics, FiniteMdp, Mdp, Policy, SaTable, TabularMdp};

pub fn write_mdp(mdp: &Mdp) -> String {
    let m = mdp.as_ref();
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut out = String::new();
    match mdp {
        Mdp::Discounted(d) => writeln!(out, "mdp {ns} {na} gamma={}", d.gamma()),
        Mdp::Finite(f) => writeln!(out, "mdp {ns} {na} horizon={}", f.horizon()),
    }
    .unwrap();
    out.push_str("d0");
    for p in m.dynamics().d0() {
        write!(out, " {p}").unwrap();
    }
    out.push('\n');
    if let Mdp::Finite(f) = mdp {
        out.push_str("terminal");
        for t in f.terminal_states() {
            write!(out, " {t}").unwrap();
        }
        out.push('\n');
    }
    for s in 0..ns {
        for a in 0..na {
            write!(out, "{s} {a} {}", m.reward().get(s, a)).unwrap();
            for p in m.dynamics().next(s, a) {
                write!(out, " {p}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number {tok:?}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::parse(line, format!("bad integer {tok:?}")))
}

enum Kind {
    Gamma(f64),
    Horizon(usize),
}

pub fn parse_mdp(text: &str) -> Result<Mdp> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty mdp file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "mdp" {
        return Err(Error::parse(ln, "expected `mdp <S> <A> gamma=<g>|horizon=<H>`"));
    }
    let ns = parse_usize(toks[1], ln)?;
    let na = parse_usize(toks[2], ln)?;
    let kind = if let Some(g) = toks[3].strip_prefix("gamma=") {
        Kind::Gamma(parse_f64(g, ln)?)
    } else if let Some(h) = toks[3].strip_prefix("horizon=") {
        Kind::Horizon(parse_usize(h, ln)?)
    } else {
        return Err(Error::parse(ln, format!("unknown model kind {:?}", toks[3])));
    };

    let (ln, d0_line) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing d0 line"))?;
    let mut toks = d0_line.split_whitespace();
    if toks.next() != Some("d0") {
        return Err(Error::parse(ln, "expected `d0 ...`"));
    }
    let d0 = toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>>>()?;

    let mut terminal = BTreeSet::new();
    if matches!(kind, Kind::Horizon(_)) {
        let (ln, line) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing terminal line"))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some("terminal") {
            return Err(Error::parse(ln, "expected `terminal ...`"));
        }
        for t in toks {
            terminal.insert(parse_usize(t, ln)?);
        }
    }

    let mut reward = vec![0.0; ns * na];
    let mut transition = vec![0.0; ns * na * ns];
    let mut seen = vec![false; ns * na];
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 + ns {
            return Err(Error::parse(ln, format!("expected {} fields, found {}", 3 + ns, toks.len())));
        }
        let s = parse_usize(toks[0], ln)?;
        let a = parse_usize(toks[1], ln)?;
        if s >= ns || a >= na {
            return Err(Error::parse(ln, format!("pair ({s}, {a}) out of range")));
        }
        let idx = s * na + a;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::parse(ln, format!("duplicate pair ({s}, {a})")));
        }
        reward[idx] = parse_f64(toks[2], ln)?;
        for (k, tok) in toks[3..].iter().enumerate() {
            transition[idx * ns + k] = parse_f64(tok, ln)?;
        }
    }
    if let Some(missing) = seen.iter().position(|x| !x) {
        return Err(Error::parse(0, format!("missing pair ({}, {})", missing / na, missing % na)));
    }

    let dynamics = Dynamics::new(ns, na, transition, d0)?;
    let reward = SaTable::new(ns, na, reward)?;
    Ok(match kind {
        Kind::Gamma(g) => Mdp::Discounted(TabularMdp::new(dynamics, reward, g)?),
        Kind::Horizon(h) => Mdp::Finite(FiniteMdp::new(dynamics, reward, h, terminal)?),
    })
}

/// Policy table: header `policy stationary <S> <A>` followed by `s a prob`
/// rows, or `policy time-indexed <H> <S> <A>` followed by `h s a prob` rows.
pub fn write_policy(policy: &Policy) -> String {
    let (ns, na) = (policy.n_states(), policy.n_actions());
    let mut out = String::new();
    match policy {
        Policy::Stationary(t) => {
            writeln!(out, "policy stationary {ns} {na}").unwrap();
            for s in 0..ns {
                for a in 0..na {
                    writeln!(out, "{s} {a} {}", t.get(s, a)).unwrap();
                }
            }
        }
        Policy::TimeIndexed(ts) => {
            writeln!(out, "policy time-indexed {} {ns} {na}", ts.len()).unwrap();
            for (h, t) in ts.iter().enumerate() {
                for s in 0..ns {
                    for a in 0..na {
                        writeln!(out, "{h} {s} {a} {}", t.get(s, a)).unwrap();
                    }
                }
            }
        }
    }
    out
}

pub fn parse_policy(text: &str) -> Result<Policy> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty policy file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let (horizon, ns, na) = match toks.as_slice() {
        ["policy", "stationary", s, a] => (None, parse_usize(s, ln)?, parse_usize(a, ln)?),
        ["policy", "time-indexed", h, s, a] => (Some(parse_usize(h, ln)?), parse_usize(s, ln)?, parse_usize(a, ln)?),
        _ => return Err(Error::parse(ln, "expected `policy stationary <S> <A>` or `policy time-indexed <H> <S> <A>`")),
    };
    let n_tables = horizon.unwrap_or(1);
    let mut tables = vec![SaTable::zeros(ns, na); n_tables];
    let mut seen = vec![false; n_tables * ns * na];
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (h, rest) = match (horizon, toks.len()) {
            (None, 3) => (0, &toks[..]),
            (Some(_), 4) => (parse_usize(toks[0], ln)?, &toks[1..]),
            _ => return Err(Error::parse(ln, "wrong number of fields")),
        };
        let s = parse_usize(rest[0], ln)?;
        let a = parse_usize(rest[1], ln)?;
        if h >= n_tables || s >= ns || a >= na {
            return Err(Error::parse(ln, "index out of range"));
        }
        let idx = (h * ns + s) * na + a;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::parse(ln, "duplicate entry"));
        }
        tables[h].set(s, a, parse_f64(rest[2], ln)?);
    }
    if seen.iter().any(|x| !x) {
        return Err(Error::parse(0, "policy table is incomplete"));
    }
    match horizon {
        None => Policy::stationary(tables.pop().expect("one table")),
        Some(_) => Policy::time_indexed(tables),
    }
}
