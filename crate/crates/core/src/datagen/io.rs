//! Dataset text format.
//!
//! ```text
//! # provenance=<sha256 hex>
//! # n_states=<S> n_actions=<A> horizon=<H|none>
//! episode,t,s,a,r,s_next,terminal,timeout
//! 0,0,19,0,-0.01,15,0,0
//! ```
//!
//! A new trajectory starts whenever the episode id changes or `t` does not
//! follow the previous row, so fold fragments survive a round trip.

use std::fmt::Write as _;

use crate::datagen::dataset::{Dataset, Trajectory, Transition};
use crate::error::{Error, Result};

const COLUMNS: &str = "episode,t,s,a,r,s_next,terminal,timeout";

pub fn write_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "# provenance={}", dataset.provenance()).unwrap();
    let horizon = dataset.horizon().map_or_else(|| "none".to_string(), |h| h.to_string());
    writeln!(out, "# n_states={} n_actions={} horizon={horizon}", dataset.n_states(), dataset.n_actions()).unwrap();
    writeln!(out, "{COLUMNS}").unwrap();
    for tr in dataset.transitions() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            tr.episode,
            tr.t,
            tr.s,
            tr.a,
            tr.r,
            tr.s_next,
            u8::from(tr.terminal),
            u8::from(tr.timeout)
        )
        .unwrap();
    }
    out
}

fn header_field<'a>(line: &'a str, key: &str, ln: usize) -> Result<&'a str> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or_else(|| Error::parse(ln, format!("missing `{key}=` in header")))
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str, ln: usize) -> Result<T> {
    tok.trim().parse().map_err(|_| Error::parse(ln, format!("bad {what} {tok:?}")))
}

fn parse_flag(tok: &str, what: &str, ln: usize) -> Result<bool> {
    match tok.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(ln, format!("{what} must be 0 or 1, got {other:?}"))),
    }
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let prov_line = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let provenance = prov_line
        .strip_prefix("# provenance=")
        .ok_or_else(|| Error::parse(1, "expected `# provenance=<digest>`"))?
        .trim()
        .to_string();
    let dims = lines.next().ok_or_else(|| Error::parse(2, "missing dimension header"))?;
    let dims = dims.strip_prefix('#').ok_or_else(|| Error::parse(2, "expected `# n_states=...` header"))?;
    let n_states: usize = parse_num(header_field(dims, "n_states", 2)?, "n_states", 2)?;
    let n_actions: usize = parse_num(header_field(dims, "n_actions", 2)?, "n_actions", 2)?;
    let horizon = match header_field(dims, "horizon", 2)? {
        "none" => None,
        h => Some(parse_num(h, "horizon", 2)?),
    };

    let mut reader = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(text.as_bytes());
    let expected: Vec<&str> = COLUMNS.split(',').collect();
    let found = reader.headers().map_err(|e| Error::parse(3, e.to_string()))?;
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::parse(3, format!("expected columns `{COLUMNS}`")));
    }

    let mut trajectories: Vec<Trajectory> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let ln = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(ln, e.to_string())
        })?;
        let ln = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 8 {
            return Err(Error::parse(ln, format!("expected 8 fields, found {}", record.len())));
        }
        let tr = Transition {
            episode: parse_num(&record[0], "episode", ln)?,
            t: parse_num(&record[1], "t", ln)?,
            s: parse_num(&record[2], "s", ln)?,
            a: parse_num(&record[3], "a", ln)?,
            r: parse_num(&record[4], "r", ln)?,
            s_next: parse_num(&record[5], "s_next", ln)?,
            terminal: parse_flag(&record[6], "terminal", ln)?,
            timeout: parse_flag(&record[7], "timeout", ln)?,
        };
        match trajectories.last_mut() {
            Some(traj) if traj.last().is_some_and(|p| p.episode == tr.episode && p.t + 1 == tr.t) => traj.push(tr),
            _ => trajectories.push(vec![tr]),
        }
    }
    Dataset::new(n_states, n_actions, horizon, trajectories, provenance)
}
