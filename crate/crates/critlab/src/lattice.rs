//! Lattice geometry: boxes, the even sublattice, and the primal/dual
//! edge construction.
//!
//! The percolation construction used throughout the crate starts from the
//! *even sublattice* Λ_N = {u ∈ {−N..N}² : u₁ + u₂ even}. Every even
//! site u carries exactly one **primal edge** e_u and one **dual edge**
//! e_u*, both of length two and both with midpoint u:
//!
//! * u₁ even: e_u is vertical, from (u₁, u₂−1) to (u₁, u₂+1), and e_u*
//!   is horizontal, from (u₁−1, u₂) to (u₁+1, u₂);
//! * u₁ odd: e_u is horizontal, from (u₁−1, u₂) to (u₁+1, u₂), and e_u*
//!   is vertical, from (u₁, u₂−1) to (u₁, u₂+1).
//!
//! Primal edge endpoints always lie in ℤ_even × ℤ_odd and dual endpoints
//! in ℤ_odd × ℤ_even, so the primal and dual graphs never share a vertex
//! and a configuration together with its complement-on-duals tile the
//! plane — the geometric engine behind exact planar duality.
//!
//! The same `Lattice` type also provides plain rectangular grids, chains,
//! and square tori for the spin models. Site and edge orderings are
//! deterministic functions of the constructor arguments (sites sort
//! lexicographically by (u₂, u₁)); for even boxes the i-th edge is the
//! primal edge of the i-th site, which keeps edge configurations and
//! their duals aligned index-by-index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site with integer coordinates.
///
/// Serializes as a plain `[u1, u2]` pair. The ordering (used for all
/// deterministic site lists) is lexicographic by `(u2, u1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Site {
    /// First (horizontal) coordinate.
    pub u1: i64,
    /// Second (vertical) coordinate.
    pub u2: i64,
}

impl Site {
    /// Construct a site.
    pub fn new(u1: i64, u2: i64) -> Self {
        Site { u1, u2 }
    }

    /// Whether u₁ + u₂ is even.
    pub fn is_even(&self) -> bool {
        (self.u1 + self.u2).rem_euclid(2) == 0
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Site {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.u2, self.u1).cmp(&(other.u2, other.u1))
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.u1, self.u2).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (u1, u2) = <(i64, i64)>::deserialize(d)?;
        Ok(Site { u1, u2 })
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.u1, self.u2)
    }
}

/// An undirected edge, stored with endpoints in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    /// Smaller endpoint in `(u2, u1)` order.
    pub a: Site,
    /// Larger endpoint.
    pub b: Site,
}

impl Edge {
    /// Build an edge, normalizing endpoint order.
    pub fn new(x: Site, y: Site) -> Self {
        if x <= y {
            Edge { a: x, b: y }
        } else {
            Edge { a: y, b: x }
        }
    }

    /// Midpoint in ℝ² (exact for the even construction: the site itself).
    pub fn midpoint(&self) -> (f64, f64) {
        (
            0.5 * (self.a.u1 + self.b.u1) as f64,
            0.5 * (self.a.u2 + self.b.u2) as f64,
        )
    }
}

/// The primal/dual edge pair of an even site.
///
/// Returns `(e_u, e_u*)`: the primal edge is vertical when u₁ is even
/// and horizontal when u₁ is odd; the dual edge is its 90°-rotated
/// partner with the same midpoint u. Errors on odd-parity sites.
pub fn edge_pair(u: Site) -> Result<(Edge, Edge)> {
    if !u.is_even() {
        return Err(Error::invalid(format!(
            "edge_pair requires u1+u2 even, got {u}"
        )));
    }
    let vertical = Edge::new(Site::new(u.u1, u.u2 - 1), Site::new(u.u1, u.u2 + 1));
    let horizontal = Edge::new(Site::new(u.u1 - 1, u.u2), Site::new(u.u1 + 1, u.u2));
    if u.u1.rem_euclid(2) == 0 {
        Ok((vertical, horizontal))
    } else {
        Ok((horizontal, vertical))
    }
}

/// What kind of lattice a [`Lattice`] value represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    /// Centered box {−N..N}², optionally restricted to even sites.
    Box2D {
        /// Box radius N ≥ 1.
        n: i64,
        /// Restrict to u₁ + u₂ even.
        even_only: bool,
    },
    /// Rectangular grid {0..w−1} × {0..h−1} with nearest-neighbor edges.
    Grid {
        /// Width (number of columns).
        w: i64,
        /// Height (number of rows).
        h: i64,
    },
    /// Square torus of side L (L ≥ 3) with periodic nearest neighbors.
    Torus2D {
        /// Side length.
        l: i64,
    },
}

/// A finite lattice: deterministic site/edge lists plus adjacency.
#[derive(Clone, Debug)]
pub struct Lattice {
    kind: LatticeKind,
    sites: Vec<Site>,
    edges: Vec<Edge>,
    site_idx: HashMap<Site, usize>,
    /// adjacency[i] = list of (neighbor site index, edge index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Lattice {
    /// The box Λ_N: sites of {−N..N}², restricted to even parity when
    /// `even_only` is set.
    ///
    /// For even boxes, `edges[i]` is the primal edge e_{sites[i]} — edge
    /// bits and site bits stay aligned. For full boxes, edges are the
    /// nearest-neighbor pairs inside the box.
    pub fn build_box(n: i64, even_only: bool) -> Result<Lattice> {
        if n < 1 {
            return Err(Error::invalid(format!("box radius must be ≥ 1, got {n}")));
        }
        let mut sites = Vec::new();
        for u2 in -n..=n {
            for u1 in -n..=n {
                let s = Site::new(u1, u2);
                if !even_only || s.is_even() {
                    sites.push(s);
                }
            }
        }
        sites.sort();
        let edges = if even_only {
            sites
                .iter()
                .map(|&u| edge_pair(u).map(|(e, _)| e))
                .collect::<Result<Vec<_>>>()?
        } else {
            let index: HashMap<Site, ()> = sites.iter().map(|&s| (s, ())).collect();
            let mut es = Vec::new();
            for &s in &sites {
                for t in [Site::new(s.u1 + 1, s.u2), Site::new(s.u1, s.u2 + 1)] {
                    if index.contains_key(&t) {
                        es.push(Edge::new(s, t));
                    }
                }
            }
            es.sort();
            es
        };
        Ok(Lattice::assemble(
            LatticeKind::Box2D { n, even_only },
            sites,
            edges,
        ))
    }

    /// Rectangular w×h grid with free nearest-neighbor edges.
    pub fn grid(w: i64, h: i64) -> Result<Lattice> {
        if w < 1 || h < 1 {
            return Err(Error::invalid(format!("grid needs w,h ≥ 1, got {w}×{h}")));
        }
        let mut sites = Vec::new();
        for u2 in 0..h {
            for u1 in 0..w {
                sites.push(Site::new(u1, u2));
            }
        }
        let mut edges = Vec::new();
        for &s in &sites {
            if s.u1 + 1 < w {
                edges.push(Edge::new(s, Site::new(s.u1 + 1, s.u2)));
            }
            if s.u2 + 1 < h {
                edges.push(Edge::new(s, Site::new(s.u1, s.u2 + 1)));
            }
        }
        edges.sort();
        Ok(Lattice::assemble(LatticeKind::Grid { w, h }, sites, edges))
    }

    /// One-dimensional chain of `len` sites (a 1×len grid).
    pub fn chain(len: i64) -> Result<Lattice> {
        Lattice::grid(len, 1)
    }

    /// Square torus of side `l ≥ 3` with periodic nearest neighbors.
    pub fn torus(l: i64) -> Result<Lattice> {
        if l < 3 {
            return Err(Error::invalid(format!(
                "torus side must be ≥ 3 (duplicate edges below), got {l}"
            )));
        }
        let mut sites = Vec::new();
        for u2 in 0..l {
            for u1 in 0..l {
                sites.push(Site::new(u1, u2));
            }
        }
        let mut edges = Vec::new();
        for &s in &sites {
            edges.push(Edge::new(s, Site::new((s.u1 + 1).rem_euclid(l), s.u2)));
            edges.push(Edge::new(s, Site::new(s.u1, (s.u2 + 1).rem_euclid(l))));
        }
        edges.sort();
        edges.dedup();
        Ok(Lattice::assemble(LatticeKind::Torus2D { l }, sites, edges))
    }

    fn assemble(kind: LatticeKind, sites: Vec<Site>, edges: Vec<Edge>) -> Lattice {
        let site_idx: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut adjacency = vec![Vec::new(); sites.len()];
        // Adjacency is only meaningful when edge endpoints are sites
        // (grids, tori, full boxes). For even boxes the primal edge
        // endpoints are *not* sites, so adjacency stays empty there.
        for (ei, e) in edges.iter().enumerate() {
            if let (Some(&ia), Some(&ib)) = (site_idx.get(&e.a), site_idx.get(&e.b)) {
                adjacency[ia].push((ib, ei));
                adjacency[ib].push((ia, ei));
            }
        }
        Lattice {
            kind,
            sites,
            edges,
            site_idx,
            adjacency,
        }
    }

    /// Lattice kind tag.
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Deterministic site list (sorted by (u₂, u₁)).
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Deterministic edge list.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Number of edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Index of a site, if present.
    pub fn site_index(&self, s: Site) -> Option<usize> {
        self.site_idx.get(&s).copied()
    }

    /// Neighbors of site `i` as (site index, edge index) pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Whether this is the even-sublattice percolation construction.
    pub fn is_even_box(&self) -> bool {
        matches!(
            self.kind,
            LatticeKind::Box2D {
                even_only: true,
                ..
            }
        )
    }

    /// Neighbors of site `i` in the infinite lattice that fall *outside*
    /// this finite lattice — the sites a boundary condition speaks for.
    ///
    /// Empty for tori (no boundary) and for even boxes (whose sites are
    /// not coupled by nearest-neighbor edges in the first place). For
    /// full boxes and grids these are the nearest neighbors beyond the
    /// boundary.
    pub fn outside_neighbors(&self, i: usize) -> Vec<Site> {
        let s = self.sites[i];
        let candidates = [
            Site::new(s.u1 + 1, s.u2),
            Site::new(s.u1 - 1, s.u2),
            Site::new(s.u1, s.u2 + 1),
            Site::new(s.u1, s.u2 - 1),
        ];
        match self.kind {
            LatticeKind::Torus2D { .. } => Vec::new(),
            LatticeKind::Box2D { even_only: true, .. } => Vec::new(),
            _ => candidates
                .into_iter()
                .filter(|t| !self.site_idx.contains_key(t))
                .collect(),
        }
    }

    /// Dual edge list of an even box: `dual_edges()[i] = e_{sites[i]}*`.
    pub fn dual_edges(&self) -> Result<Vec<Edge>> {
        if !self.is_even_box() {
            return Err(Error::invalid(
                "dual edges exist only for the even-sublattice box construction",
            ));
        }
        self.sites
            .iter()
            .map(|&u| edge_pair(u).map(|(_, d)| d))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_box_site_counts() {
        // |Λ_1| = 5, |Λ_2| = 13, |Λ_3| = 25.
        assert_eq!(Lattice::build_box(1, true).unwrap().n_sites(), 5);
        assert_eq!(Lattice::build_box(2, true).unwrap().n_sites(), 13);
        assert_eq!(Lattice::build_box(3, true).unwrap().n_sites(), 25);
        // Full box is the plain (2N+1)² grid.
        assert_eq!(Lattice::build_box(1, false).unwrap().n_sites(), 9);
    }

    #[test]
    fn even_box_n1_sites_are_the_expected_five() {
        let lat = Lattice::build_box(1, true).unwrap();
        let mut got: Vec<(i64, i64)> = lat.sites().iter().map(|s| (s.u1, s.u2)).collect();
        got.sort();
        assert_eq!(got, vec![(-1, -1), (-1, 1), (0, 0), (1, -1), (1, 1)]);
    }

    #[test]
    fn build_box_rejects_nonpositive_radius() {
        assert!(Lattice::build_box(0, true).is_err());
        assert!(Lattice::build_box(-2, false).is_err());
    }

    #[test]
    fn edge_pair_matches_the_case_split() {
        // u₁ even → vertical primal edge.
        let (e, d) = edge_pair(Site::new(0, 0)).unwrap();
        assert_eq!(e, Edge::new(Site::new(0, -1), Site::new(0, 1)));
        assert_eq!(d, Edge::new(Site::new(-1, 0), Site::new(1, 0)));
        // u₁ odd → horizontal primal edge.
        let (e, d) = edge_pair(Site::new(1, 1)).unwrap();
        assert_eq!(e, Edge::new(Site::new(0, 1), Site::new(2, 1)));
        assert_eq!(d, Edge::new(Site::new(1, 0), Site::new(1, 2)));
    }

    #[test]
    fn edge_pair_rejects_odd_parity() {
        assert!(edge_pair(Site::new(0, 1)).is_err());
    }

    #[test]
    fn primal_and_dual_share_midpoint_and_are_perpendicular() {
        let lat = Lattice::build_box(3, true).unwrap();
        for &u in lat.sites() {
            let (e, d) = edge_pair(u).unwrap();
            // Same midpoint, equal to the site itself (exact integers:
            // endpoint sums are 2u).
            assert_eq!(e.a.u1 + e.b.u1, 2 * u.u1);
            assert_eq!(e.a.u2 + e.b.u2, 2 * u.u2);
            assert_eq!(d.a.u1 + d.b.u1, 2 * u.u1);
            assert_eq!(d.a.u2 + d.b.u2, 2 * u.u2);
            // Perpendicular: direction vectors have zero dot product.
            let (ex, ey) = (e.b.u1 - e.a.u1, e.b.u2 - e.a.u2);
            let (dx, dy) = (d.b.u1 - d.a.u1, d.b.u2 - d.a.u2);
            assert_eq!(ex * dx + ey * dy, 0);
        }
    }

    #[test]
    fn primal_endpoints_even_odd_dual_endpoints_odd_even() {
        let lat = Lattice::build_box(2, true).unwrap();
        for (e, d) in lat
            .edges()
            .iter()
            .zip(lat.dual_edges().unwrap().iter())
        {
            for v in [e.a, e.b] {
                assert_eq!(v.u1.rem_euclid(2), 0, "primal x even");
                assert_eq!(v.u2.rem_euclid(2).abs(), 1, "primal y odd");
            }
            for v in [d.a, d.b] {
                assert_eq!(v.u1.rem_euclid(2), 1, "dual x odd");
                assert_eq!(v.u2.rem_euclid(2), 0, "dual y even");
            }
        }
    }

    #[test]
    fn orderings_are_reproducible() {
        let a = Lattice::build_box(3, true).unwrap();
        let b = Lattice::build_box(3, true).unwrap();
        assert_eq!(a.sites(), b.sites());
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn grid_chain_torus_shapes() {
        let g = Lattice::grid(3, 2).unwrap();
        assert_eq!(g.n_sites(), 6);
        assert_eq!(g.n_edges(), 7); // 4 horizontal + 3 vertical

        let c = Lattice::chain(5).unwrap();
        assert_eq!(c.n_sites(), 5);
        assert_eq!(c.n_edges(), 4);

        let t = Lattice::torus(4).unwrap();
        assert_eq!(t.n_sites(), 16);
        assert_eq!(t.n_edges(), 32); // 2L² on a torus
        assert!(Lattice::torus(2).is_err());
    }

    #[test]
    fn adjacency_is_symmetric_and_degree_correct() {
        let t = Lattice::torus(4).unwrap();
        for i in 0..t.n_sites() {
            assert_eq!(t.neighbors(i).len(), 4, "torus degree");
            for &(j, _) in t.neighbors(i) {
                assert!(
                    t.neighbors(j).iter().any(|&(k, _)| k == i),
                    "adjacency not symmetric"
                );
            }
        }
        let c = Lattice::chain(4).unwrap();
        assert_eq!(c.neighbors(0).len(), 1);
        assert_eq!(c.neighbors(1).len(), 2);
    }

    #[test]
    fn outside_neighbors_of_grid_corner() {
        let g = Lattice::grid(3, 3).unwrap();
        let corner = g.site_index(Site::new(0, 0)).unwrap();
        let outside = g.outside_neighbors(corner);
        assert_eq!(outside.len(), 2);
        let t = Lattice::torus(4).unwrap();
        assert!(t.outside_neighbors(0).is_empty(), "torus has no boundary");
    }

    #[test]
    fn site_serialization_is_a_pair() {
        let s = Site::new(-3, 7);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[-3,7]");
        let back: Site = serde_json::from_str("[-3,7]").unwrap();
        assert_eq!(back, s);
    }
}
