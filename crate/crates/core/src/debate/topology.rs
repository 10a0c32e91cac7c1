//! Communication topologies over the agents of one debate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AgentId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("adjacency matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("adjacency matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("adjacency matrix has a self-loop at {0}")]
    SelfLoop(usize),
    #[error("custom topology is not connected")]
    Disconnected,
    #[error("fully connected topology is missing edge ({0}, {1})")]
    NotFullyConnected(usize, usize),
    #[error("topology has {actual} nodes, debate has {expected} agents")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("star hub {hub} out of range for {n} agents")]
    HubOutOfRange { hub: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    FullyConnected,
    Ring,
    Star,
    Chain,
    Tree,
    Custom,
}

impl TopologyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::FullyConnected => "fully_connected",
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Chain => "chain",
            TopologyKind::Tree => "tree",
            TopologyKind::Custom => "custom",
        }
    }
}

/// Undirected communication graph stored as a symmetric adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology")]
pub struct Topology {
    kind: TopologyKind,
    adjacency: Vec<Vec<bool>>,
}

#[derive(Deserialize)]
struct RawTopology {
    kind: TopologyKind,
    adjacency: Vec<Vec<bool>>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = TopologyError;

    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        let t = Topology {
            kind: raw.kind,
            adjacency: raw.adjacency,
        };
        t.validate()?;
        Ok(t)
    }
}

impl Topology {
    fn from_edges(kind: TopologyKind, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![vec![false; n]; n];
        for (a, b) in edges {
            if a != b {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        Self { kind, adjacency }
    }

    pub fn fully_connected(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::from_edges(TopologyKind::FullyConnected, n, edges)
    }

    pub fn ring(n: usize) -> Self {
        let edges = (0..n).filter(|_| n > 1).map(|a| (a, (a + 1) % n));
        Self::from_edges(TopologyKind::Ring, n, edges)
    }

    pub fn star(n: usize, hub: usize) -> Result<Self, TopologyError> {
        if hub >= n {
            return Err(TopologyError::HubOutOfRange { hub, n });
        }
        Ok(Self::from_edges(TopologyKind::Star, n, (0..n).map(|a| (hub, a))))
    }

    pub fn chain(n: usize) -> Self {
        Self::from_edges(TopologyKind::Chain, n, (1..n).map(|a| (a - 1, a)))
    }

    /// Binary tree rooted at 0, parent of `i` is `(i - 1) / 2`.
    pub fn tree(n: usize) -> Self {
        Self::from_edges(TopologyKind::Tree, n, (1..n).map(|a| ((a - 1) / 2, a)))
    }

    pub fn custom(adjacency: Vec<Vec<bool>>) -> Result<Self, TopologyError> {
        let t = Self {
            kind: TopologyKind::Custom,
            adjacency,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let n = self.adjacency.len();
        for (row, r) in self.adjacency.iter().enumerate() {
            if r.len() != n {
                return Err(TopologyError::NotSquare {
                    rows: n,
                    row,
                    len: r.len(),
                });
            }
        }
        for a in 0..n {
            if self.adjacency[a][a] {
                return Err(TopologyError::SelfLoop(a));
            }
            for b in a + 1..n {
                if self.adjacency[a][b] != self.adjacency[b][a] {
                    return Err(TopologyError::Asymmetric(a, b));
                }
                if self.kind == TopologyKind::FullyConnected && !self.adjacency[a][b] {
                    return Err(TopologyError::NotFullyConnected(a, b));
                }
            }
        }
        if self.kind == TopologyKind::Custom && !self.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(())
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn are_adjacent(&self, a: AgentId, b: AgentId) -> bool {
        self.adjacency
            .get(a.0)
            .and_then(|row| row.get(b.0))
            .copied()
            .unwrap_or(false)
    }

    /// `viewer` itself or one of its neighbours.
    pub fn can_see(&self, viewer: AgentId, sender: AgentId) -> bool {
        viewer == sender || self.are_adjacent(viewer, sender)
    }

    pub fn neighbors(&self, a: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.adjacency
            .get(a.0)
            .into_iter()
            .flat_map(|row| row.iter().enumerate().filter(|(_, &e)| e).map(|(i, _)| AgentId(i)))
    }

    pub fn degree(&self, a: AgentId) -> usize {
        self.neighbors(a).count()
    }

    /// Degree normalised by the largest possible degree, `n - 1`.
    pub fn degree_centrality(&self, a: AgentId) -> f64 {
        let n = self.n();
        if n <= 1 {
            return 0.0;
        }
        self.degree(a) as f64 / (n - 1) as f64
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for (b, &edge) in self.adjacency[a].iter().enumerate() {
                if edge && !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Topology description as it appears in configuration files; the agent
/// count comes from the surrounding config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    FullyConnected,
    Ring,
    Star {
        #[serde(default)]
        hub: usize,
    },
    Chain,
    Tree,
    Custom {
        adjacency: Vec<Vec<bool>>,
    },
}

impl TopologySpec {
    pub fn build(&self, n: usize) -> Result<Topology, TopologyError> {
        let t = match self {
            TopologySpec::FullyConnected => Topology::fully_connected(n),
            TopologySpec::Ring => Topology::ring(n),
            TopologySpec::Star { hub } => Topology::star(n, *hub)?,
            TopologySpec::Chain => Topology::chain(n),
            TopologySpec::Tree => Topology::tree(n),
            TopologySpec::Custom { adjacency } => Topology::custom(adjacency.clone())?,
        };
        if t.n() != n {
            return Err(TopologyError::SizeMismatch {
                expected: n,
                actual: t.n(),
            });
        }
        Ok(t)
    }
}
