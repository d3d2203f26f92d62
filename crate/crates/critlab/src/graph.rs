//! Small combinatorial graphs on integer vertices.
//!
//! The random-current, FK, and OSSS machinery all quantify over
//! arbitrary finite graphs rather than embedded lattices; this module
//! holds the shared graph type, a family of named presets used by the
//! exhaustive test catalogs, and conversion from geometric lattices.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::util::UnionFind;

/// An undirected multigraph on vertices `0 .. n_vertices`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Build from an explicit edge list. Self-loops are rejected;
    /// parallel edges are allowed (they are meaningful for currents).
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::invalid(format!(
                    "edge ({a},{b}) outside vertex range 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop at vertex {a}")));
            }
        }
        Ok(Graph { n_vertices, edges })
    }

    /// Path with `k` edges on `k+1` vertices.
    pub fn path(k: usize) -> Self {
        Graph {
            n_vertices: k + 1,
            edges: (0..k).map(|i| (i, i + 1)).collect(),
        }
    }

    /// Cycle on `k ≥ 3` vertices.
    pub fn cycle(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("cycle needs ≥ 3 vertices, got {k}")));
        }
        Ok(Graph {
            n_vertices: k,
            edges: (0..k).map(|i| (i, (i + 1) % k)).collect(),
        })
    }

    /// Star with `leaves` edges from the hub vertex 0.
    pub fn star(leaves: usize) -> Self {
        Graph {
            n_vertices: leaves + 1,
            edges: (1..=leaves).map(|i| (0, i)).collect(),
        }
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push((a, b));
            }
        }
        Graph {
            n_vertices: n,
            edges,
        }
    }

    /// K4 with one edge removed (5 edges).
    pub fn k4_minus_edge() -> Self {
        let mut g = Graph::complete(4);
        g.edges.pop();
        g
    }

    /// Two triangles sharing vertex 0 (6 edges, 5 vertices).
    pub fn bowtie() -> Self {
        Graph {
            n_vertices: 5,
            edges: vec![(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)],
        }
    }

    /// Triangle with a pendant edge (4 edges).
    pub fn triangle_with_pendant() -> Self {
        Graph {
            n_vertices: 4,
            edges: vec![(0, 1), (1, 2), (2, 0), (2, 3)],
        }
    }

    /// The coupling graph of a lattice: one vertex per site, one edge
    /// per lattice edge with both endpoints among the sites.
    pub fn from_lattice(lat: &Lattice) -> Self {
        let edges = lat
            .edges()
            .iter()
            .filter_map(|e| match (lat.site_index(e.a), lat.site_index(e.b)) {
                (Some(a), Some(b)) => Some((a, b)),
                _ => None,
            })
            .collect();
        Graph {
            n_vertices: lat.n_sites(),
            edges,
        }
    }

    /// Number of vertices.
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Number of edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// The edge list.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Vertex degrees (parallel edges counted with multiplicity).
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_vertices];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Whether the graph is connected (vertex-empty graphs count as
    /// connected).
    pub fn is_connected(&self) -> bool {
        if self.n_vertices <= 1 {
            return true;
        }
        let mut uf = UnionFind::new(self.n_vertices);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        uf.components() == 1
    }

    /// Number of connected components of the subgraph keeping edge e
    /// iff `open[e]`, counting isolated vertices.
    pub fn open_components(&self, open: &[bool], uf: &mut UnionFind) -> usize {
        debug_assert_eq!(open.len(), self.edges.len());
        uf.reset();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if open[e] {
                uf.union(a, b);
            }
        }
        uf.components()
    }
}
