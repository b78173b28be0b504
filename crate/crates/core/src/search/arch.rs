use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::OpKind;

/// Directed edge between cell states. States 0 and 1 are the cell inputs
/// (output of the cell two back, output of the previous cell); state n+2 is
/// intermediate node n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

/// Fully connected cell DAG: every node receives both inputs and all earlier nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellTopology {
    pub nodes: usize,
}

impl CellTopology {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::invalid("a cell needs at least one node"));
        }
        Ok(CellTopology { nodes })
    }

    /// Edges ordered by target node, then by source state.
    pub fn edges(&self) -> Vec<Edge> {
        (0..self.nodes).flat_map(|n| (0..n + 2).map(move |from| Edge { from, to: n + 2 })).collect()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.nodes).map(|n| n + 2).sum()
    }

    /// Infers the node count from an edge count, if it is one of 2, 5, 9, 14, ...
    pub fn from_edge_count(edges: usize) -> Result<Self> {
        let mut nodes = 0;
        let mut count = 0;
        while count < edges {
            count += nodes + 2;
            nodes += 1;
        }
        if count != edges || nodes == 0 {
            return Err(Error::Format(format!("{edges} edges do not form a fully connected cell")));
        }
        Ok(CellTopology { nodes })
    }
}

/// Per-edge operation logits, one row of |OpKind::ALL| entries per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchEncoding {
    pub topology: CellTopology,
    pub logits: Tensor,
}

impl ArchEncoding {
    /// All-zero logits: every operation equally weighted.
    pub fn uniform(topology: CellTopology) -> Self {
        let logits = Tensor::zeros(&[topology.edge_count(), OpKind::ALL.len()]);
        ArchEncoding { topology, logits }
    }

    pub fn from_tensor(topology: CellTopology, logits: Tensor) -> Result<Self> {
        if logits.shape() != [topology.edge_count(), OpKind::ALL.len()] {
            return Err(Error::shape(format!(
                "architecture logits must be {}×{}, got {:?}",
                topology.edge_count(),
                OpKind::ALL.len(),
                logits.shape()
            )));
        }
        if !logits.is_finite() {
            return Err(Error::NonFinite("architecture logits".into()));
        }
        Ok(ArchEncoding { topology, logits })
    }

    pub fn edge_logits(&self, edge: usize) -> &[f64] {
        let n = OpKind::ALL.len();
        &self.logits.data()[edge * n..(edge + 1) * n]
    }
}
