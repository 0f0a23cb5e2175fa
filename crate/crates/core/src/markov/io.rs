//! Plain-text chain and marked-set files.
//!
//! A chain file holds the state count on its first line followed by one line
//! of whitespace-separated probabilities per row. A marked-set file is a
//! whitespace-separated list of state indices. Lines starting with `#` are
//! ignored in both.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{MarkedSet, MarkovChain};
use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn write_chain(chain: &MarkovChain) -> String {
    let mut out = format!("# {}\n{}\n", chain.name, chain.n());
    for x in 0..chain.n() {
        let row: Vec<String> = (0..chain.n()).map(|y| format!("{:e}", chain.p(x, y))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_chain(name: &str, text: &str) -> Result<MarkovChain> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or(Error::Parse { line: 0, message: "empty chain file".into() })?;
    let n: usize = header.parse().map_err(|_| Error::Parse { line, message: format!("bad state count `{header}`") })?;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let (line, row) = lines.next().ok_or(Error::Parse { line: 0, message: format!("missing row {x}") })?;
        let vals = row
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("bad probability `{v}`") }))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(Error::Parse { line, message: format!("expected {n} entries, found {}", vals.len()) });
        }
        for (y, v) in vals.into_iter().enumerate() {
            t[(x, y)] = v;
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, message: "trailing content after the last row".into() });
    }
    MarkovChain::new(name, t)
}

pub fn write_marked(marked: &MarkedSet) -> String {
    let ids: Vec<String> = marked.members().iter().map(|x| x.to_string()).collect();
    format!("{}\n", ids.join(" "))
}

pub fn parse_marked(text: &str, n: usize) -> Result<MarkedSet> {
    let mut ids = Vec::new();
    for (line, l) in content_lines(text) {
        for tok in l.split_whitespace() {
            ids.push(tok.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("bad index `{tok}`") })?);
        }
    }
    MarkedSet::new(n, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{complete_graph_chain, johnson_chain};

    #[test]
    fn chain_round_trip() {
        for c in [complete_graph_chain(5).unwrap(), johnson_chain(6, 3).unwrap()] {
            let back = parse_chain(&c.name, &write_chain(&c)).unwrap();
            assert_eq!(back.n(), c.n());
            for x in 0..c.n() {
                for y in 0..c.n() {
                    assert!((back.p(x, y) - c.p(x, y)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn marked_round_trip_and_errors() {
        let m = MarkedSet::new(10, [7, 2, 3]).unwrap();
        assert_eq!(parse_marked(&write_marked(&m), 10).unwrap(), m);
        assert!(matches!(parse_marked("1 x", 4), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_chain("c", "2\n1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_chain("c", "2\n1 0\n0 1 0\n"), Err(Error::Parse { line: 3, .. })));
    }
}
