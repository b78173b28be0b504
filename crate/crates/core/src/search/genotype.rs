use std::fmt::Write as _;

use super::{ArchEncoding, CellTopology, Edge, OpKind};
use crate::error::{Error, Result};

/// A discretized cell: two retained operations per edge, plus the stack
/// shape the cell is deployed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genotype {
    pub channels: usize,
    pub cells: usize,
    pub unrolls: usize,
    pub edges: Vec<(Edge, [OpKind; 2])>,
}

/// Keeps the two highest-logit operations on every edge, ties going to the
/// lower canonical index.
pub fn discretize(arch: &ArchEncoding, channels: usize, cells: usize, unrolls: usize) -> Genotype {
    let edges = arch
        .topology
        .edges()
        .into_iter()
        .enumerate()
        .map(|(e, edge)| {
            let logits = arch.edge_logits(e);
            let mut order: Vec<usize> = (0..logits.len()).collect();
            order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
            (edge, [OpKind::ALL[order[0]], OpKind::ALL[order[1]]])
        })
        .collect();
    Genotype { channels, cells, unrolls, edges }
}

impl Genotype {
    pub fn topology(&self) -> Result<CellTopology> {
        let topo = CellTopology::from_edge_count(self.edges.len())?;
        for (expected, (edge, _)) in topo.edges().iter().zip(&self.edges) {
            if expected != edge {
                return Err(Error::Format(format!(
                    "edge {} {} out of canonical order (expected {} {})",
                    edge.from, edge.to, expected.from, expected.to
                )));
            }
        }
        Ok(topo)
    }

    pub fn ops(&self, edge: usize) -> [OpKind; 2] {
        self.edges[edge].1
    }

    /// Line-oriented text form: three `key=value` header lines, then one
    /// `edge <from> <to>: <op>,<op>` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "channels={}", self.channels);
        let _ = writeln!(s, "cells={}", self.cells);
        let _ = writeln!(s, "unrolls={}", self.unrolls);
        for (edge, [a, b]) in &self.edges {
            let _ = writeln!(s, "edge {} {}: {},{}", edge.from, edge.to, a, b);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = [None; 3];
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::Format(format!("genotype line {}: {what}", lineno + 1));
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("edge ") {
                let (ends, ops) = rest.split_once(": ").ok_or_else(|| bad("expected `: `"))?;
                let (from, to) = ends.split_once(' ').ok_or_else(|| bad("expected `<from> <to>`"))?;
                let from = from.parse().map_err(|_| bad("bad source index"))?;
                let to = to.parse().map_err(|_| bad("bad target index"))?;
                let (a, b) = ops.split_once(',').ok_or_else(|| bad("expected two operations"))?;
                edges.push((Edge { from, to }, [a.parse()?, b.parse()?]));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let slot = match key {
                "channels" => 0,
                "cells" => 1,
                "unrolls" => 2,
                _ => return Err(bad(&format!("unknown key `{key}`"))),
            };
            if header[slot].is_some() {
                return Err(bad(&format!("duplicate key `{key}`")));
            }
            header[slot] = Some(value.parse::<usize>().map_err(|_| bad("expected an integer"))?);
        }
        let [Some(channels), Some(cells), Some(unrolls)] = header else {
            return Err(Error::Format("genotype needs channels, cells and unrolls".into()));
        };
        if channels == 0 || cells == 0 {
            return Err(Error::Format("channels and cells must be positive".into()));
        }
        let g = Genotype { channels, cells, unrolls, edges };
        g.topology()?;
        Ok(g)
    }
}
