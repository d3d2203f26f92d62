//! Random-current representation of ferromagnetic correlations.
//!
//! A current assigns a nonnegative integer to every edge; its sources
//! are the vertices of odd total incidence. Expanding every edge factor
//! e^{βσσ} into its power series and summing out the spins shows
//!
//!   ⟨σ_A⟩ = Σ_{∂n = A} w(n) / Σ_{∂n = ∅} w(n),
//!   w(n) = ∏_e β^{n_e} / n_e!,
//!
//! for any even source set A. This module evaluates the truncated sums
//! exactly by enumerating all currents with n_e ≤ n_max, reports the
//! crude union bound on the truncation error, and checks the tree
//! (four-point) inequality against exact enumerated measures.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gibbs::ExactMeasure;
use crate::graph::Graph;
use crate::lattice::{Edge, Lattice, Site};
use rayon::prelude::*;

/// Hard cap on the number of enumerated currents (n_max + 1)^{#edges}.
pub const CURRENT_ENUM_CAPACITY: u128 = 100_000_000;

/// Hard cap on vertices for the parity-indexed partition table.
pub const CURRENT_VERTEX_CAPACITY: usize = 16;

/// A current: a map from lattice edges to nonnegative multiplicities.
/// Edges with multiplicity zero are not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Current {
    n: BTreeMap<Edge, u32>,
}

impl Current {
    /// The zero current.
    pub fn new() -> Self {
        Current::default()
    }

    /// Build from (edge, multiplicity) pairs; repeated edges add up and
    /// zero entries are dropped.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Edge, u32)>,
    {
        let mut c = Current::new();
        for (e, k) in pairs {
            let v = c.n.get(&e).copied().unwrap_or(0) + k;
            c.set(e, v);
        }
        c
    }

    /// Set the multiplicity of an edge (zero removes it).
    pub fn set(&mut self, e: Edge, k: u32) {
        if k == 0 {
            self.n.remove(&e);
        } else {
            self.n.insert(e, k);
        }
    }

    /// Multiplicity of an edge.
    pub fn get(&self, e: &Edge) -> u32 {
        self.n.get(e).copied().unwrap_or(0)
    }

    /// Edges with nonzero multiplicity, in canonical edge order.
    pub fn support(&self) -> impl Iterator<Item = (&Edge, u32)> {
        self.n.iter().map(|(e, &k)| (e, k))
    }

    /// Total multiplicity Σ_e n_e.
    pub fn total(&self) -> u64 {
        self.n.values().map(|&k| k as u64).sum()
    }
}

/// w(n) = ∏_e β^{n_e} / n_e! over the support.
pub fn current_weight(c: &Current, beta: f64) -> f64 {
    let mut w = 1.0;
    for (_, k) in c.support() {
        for j in 1..=k {
            w *= beta / j as f64;
        }
    }
    w
}

/// Sources ∂n: endpoints with odd total incidence, sorted.
pub fn current_sources(c: &Current) -> Vec<Site> {
    let mut deg: BTreeMap<Site, u64> = BTreeMap::new();
    for (e, k) in c.support() {
        *deg.entry(e.a).or_insert(0) += k as u64;
        *deg.entry(e.b).or_insert(0) += k as u64;
    }
    deg.into_iter()
        .filter(|(_, d)| d % 2 == 1)
        .map(|(s, _)| s)
        .collect()
}

/// Truncated partition functions Z_A = Σ_{∂n = A, n ≤ n_max} w(n) for
/// every source set A at once, indexed by the parity bitmask of A.
///
/// Entries at odd-popcount masks are exactly zero (Σ_v deg_v = 2 Σ n_e
/// is always even). The zero mask holds the sourceless sum Z_∅ ≥ 1.
pub fn current_partition_functions(graph: &Graph, beta: f64, n_max: u32) -> Result<Vec<f64>> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid(format!(
            "inverse temperature must be finite and ≥ 0, got {beta}"
        )));
    }
    if graph.n_vertices() > CURRENT_VERTEX_CAPACITY {
        return Err(Error::capacity(format!(
            "parity table needs 2^{} entries; vertex cap is {}",
            graph.n_vertices(),
            CURRENT_VERTEX_CAPACITY
        )));
    }
    let mut states: u128 = 1;
    for _ in 0..graph.n_edges() {
        states = states.saturating_mul(n_max as u128 + 1);
        if states > CURRENT_ENUM_CAPACITY {
            return Err(Error::capacity(format!(
                "(n_max+1)^edges = ({}+1)^{} exceeds {CURRENT_ENUM_CAPACITY}",
                n_max,
                graph.n_edges()
            )));
        }
    }
    let table_len = 1usize << graph.n_vertices();
    let masks: Vec<usize> = graph
        .edges()
        .iter()
        .map(|&(a, b)| (1usize << a) | (1usize << b))
        .collect();
    let mut pow = vec![1.0f64; n_max as usize + 1];
    for k in 1..pow.len() {
        pow[k] = pow[k - 1] * beta / k as f64;
    }
    if masks.is_empty() {
        let mut z = vec![0.0; table_len];
        z[0] = 1.0;
        return Ok(z);
    }
    // One branch per multiplicity of the first edge; sum branch tables
    // in index order so the result is deterministic.
    let branch_mask = masks[0];
    let branches: Vec<Vec<f64>> = (0..pow.len())
        .into_par_iter()
        .map(|k0| {
            let mut acc = vec![0.0f64; table_len];
            let parity0 = if k0 % 2 == 1 { branch_mask } else { 0 };
            if masks.len() == 1 {
                acc[parity0] += pow[k0];
            } else {
                sweep(&masks, &pow, 1, pow[k0], parity0, &mut acc);
            }
            acc
        })
        .collect();
    let mut z = vec![0.0f64; table_len];
    for b in branches {
        for (zi, bi) in z.iter_mut().zip(b) {
            *zi += bi;
        }
    }
    Ok(z)
}

/// Depth-first accumulation over multiplicities of edges `depth..`.
fn sweep(masks: &[usize], pow: &[f64], depth: usize, weight: f64, parity: usize, acc: &mut [f64]) {
    let mask = masks[depth];
    let last = depth + 1 == masks.len();
    let mut p = parity;
    for &pk in pow {
        let w = weight * pk;
        if last {
            acc[p] += w;
        } else {
            sweep(masks, pow, depth + 1, w, p, acc);
        }
        p ^= mask;
    }
}

/// A truncated correlation with its worst-case truncation allowance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentCorrelation {
    /// Truncated Z_A / Z_∅.
    pub value: f64,
    /// Crude union bound on the truncation error:
    /// #edges · β^{n_max+1} / (n_max+1)!.
    pub truncation_bound: f64,
}

/// ⟨σ_A⟩ via the truncated current expansion.
pub fn current_correlation(
    graph: &Graph,
    beta: f64,
    sources: &[usize],
    n_max: u32,
) -> Result<CurrentCorrelation> {
    if sources.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "source set must have even size, got {}",
            sources.len()
        )));
    }
    let mut target = 0usize;
    for &v in sources {
        if v >= graph.n_vertices() {
            return Err(Error::invalid(format!(
                "source vertex {v} outside 0..{}",
                graph.n_vertices()
            )));
        }
        let bit = 1usize << v;
        if target & bit != 0 {
            return Err(Error::invalid(format!("duplicate source vertex {v}")));
        }
        target |= bit;
    }
    let z = current_partition_functions(graph, beta, n_max)?;
    let value = z[target] / z[0];
    let truncation_bound = if beta == 0.0 {
        0.0
    } else {
        // Compute β^{n+1}/(n+1)! in log space to dodge overflow.
        let log_term: f64 = (1..=n_max as u64 + 1).map(|k| (beta / k as f64).ln()).sum();
        graph.n_edges() as f64 * log_term.exp()
    };
    Ok(CurrentCorrelation {
        value,
        truncation_bound,
    })
}

/// Result of a tree (four-point) inequality check: |κ₄| ≤ rhs with
/// rhs = 2 Σ_y ⟨σ_{x₁}σ_y⟩⟨σ_{x₂}σ_y⟩⟨σ_{x₃}σ_y⟩⟨σ_{x₄}σ_y⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeBound {
    /// |κ₄(σ_{x₁}, …, σ_{x₄})|.
    pub lhs: f64,
    /// The summed product of two-point functions, doubled.
    pub rhs: f64,
    /// rhs − lhs; nonnegative when the inequality holds.
    pub slack: f64,
}

/// Evaluate the tree bound on an exact Ising measure.
pub fn tree_bound_check(
    m: &ExactMeasure,
    lat: &Lattice,
    xs: [Site; 4],
) -> Result<TreeBound> {
    let mut idx = [0usize; 4];
    for (slot, x) in idx.iter_mut().zip(xs) {
        *slot = lat
            .site_index(x)
            .ok_or_else(|| Error::invalid(format!("{x} is not a lattice site")))?;
    }
    let obs: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = idx
        .iter()
        .map(|&i| {
            let f: Box<dyn Fn(&[f64]) -> f64 + Sync> = Box::new(move |s: &[f64]| s[i]);
            f
        })
        .collect();
    let refs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
    let kappa4 = m.joint_cumulant(&refs)?;
    let mut rhs = 0.0;
    for y in 0..lat.n_sites() {
        let mut prod = 1.0;
        for &i in &idx {
            let c = if i == y {
                1.0
            } else {
                m.expectation(|s| s[i] * s[y])
            };
            prod *= c;
        }
        rhs += prod;
    }
    rhs *= 2.0;
    let lhs = kappa4.abs();
    Ok(TreeBound {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{enumerate, BoundaryCondition, EnergyModel};
    use approx::assert_abs_diff_eq;

    /// Brute-force ⟨σ_A⟩ on a small graph: sum over all ±1 assignments
    /// with weight e^{β Σ_e σσ}.
    fn spin_two_point(graph: &Graph, beta: f64, sources: &[usize]) -> f64 {
        let n = graph.n_vertices();
        assert!(n <= 20);
        let mut num = 0.0;
        let mut den = 0.0;
        for mask in 0..(1u32 << n) {
            let spin = |v: usize| if mask >> v & 1 == 1 { 1.0 } else { -1.0 };
            let energy: f64 = graph.edges().iter().map(|&(a, b)| spin(a) * spin(b)).sum();
            let w = (beta * energy).exp();
            let prod: f64 = sources.iter().map(|&v| spin(v)).product();
            num += prod * w;
            den += w;
        }
        num / den
    }

    #[test]
    fn weight_of_explicit_currents() {
        assert_abs_diff_eq!(current_weight(&Current::new(), 0.7), 1.0);
        let e = Edge::new(Site::new(0, 0), Site::new(1, 0));
        let f = Edge::new(Site::new(1, 0), Site::new(2, 0));
        let c = Current::from_pairs([(e, 2), (f, 1)]);
        // β²/2! · β/1! at β = 0.5 → 0.125 · 0.5.
        assert_abs_diff_eq!(current_weight(&c, 0.5), 0.0625, epsilon = 1e-15);
        assert_eq!(c.total(), 3);
        // Zero entries are dropped; repeated pairs accumulate.
        let c2 = Current::from_pairs([(e, 0), (f, 1), (f, 2)]);
        assert_eq!(c2.get(&e), 0);
        assert_eq!(c2.get(&f), 3);
        assert_eq!(c2.support().count(), 1);
    }

    #[test]
    fn sources_are_odd_incidence_vertices() {
        let a = Site::new(0, 0);
        let b = Site::new(1, 0);
        let c = Site::new(2, 0);
        let cur = Current::from_pairs([
            (Edge::new(a, b), 1),
            (Edge::new(b, c), 2),
        ]);
        // deg(a) = 1, deg(b) = 3, deg(c) = 2.
        assert_eq!(current_sources(&cur), vec![a, b]);
        assert_eq!(current_sources(&Current::new()), Vec::<Site>::new());
        // A doubled edge has no sources.
        let even = Current::from_pairs([(Edge::new(a, b), 2)]);
        assert!(current_sources(&even).is_empty());
    }

    #[test]
    fn single_edge_correlation_is_tanh() {
        let g = Graph::path(1);
        for beta in [0.1, 0.5, 1.0] {
            let cc = current_correlation(&g, beta, &[0, 1], 20).unwrap();
            assert_abs_diff_eq!(cc.value, beta.tanh(), epsilon = 1e-10);
            assert!(cc.truncation_bound < 1e-18);
        }
        // β = 0 decouples everything.
        let cc = current_correlation(&g, 0.0, &[0, 1], 20).unwrap();
        assert_eq!(cc.value, 0.0);
        assert_eq!(cc.truncation_bound, 0.0);
    }

    #[test]
    fn truncation_bound_is_honest_at_tiny_n_max() {
        // Single edge, n_max = 2: value = β / (1 + β²/2), far from
        // tanh β, but the reported bound must still cover the gap.
        let g = Graph::path(1);
        let beta = 1.0;
        let cc = current_correlation(&g, beta, &[0, 1], 2).unwrap();
        assert_abs_diff_eq!(cc.value, 1.0 / 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cc.truncation_bound, 1.0 / 6.0, epsilon = 1e-12);
        assert!((cc.value - beta.tanh()).abs() <= cc.truncation_bound);
    }

    #[test]
    fn preset_graphs_match_spin_enumeration() {
        let graphs = vec![
            Graph::path(2),
            Graph::path(3),
            Graph::cycle(3).unwrap(),
            Graph::cycle(4).unwrap(),
            Graph::star(3),
            Graph::triangle_with_pendant(),
            Graph::k4_minus_edge(),
        ];
        for g in &graphs {
            for beta in [0.3, 0.8] {
                let pairs = [(0usize, 1usize), (0, g.n_vertices() - 1)];
                for &(u, v) in &pairs {
                    if u == v {
                        continue;
                    }
                    let want = spin_two_point(g, beta, &[u, v]);
                    let got = current_correlation(g, beta, &[u, v], 20).unwrap();
                    assert_abs_diff_eq!(got.value, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn four_point_sources_match_spin_enumeration() {
        let g = Graph::cycle(4).unwrap();
        let beta = 0.6;
        let want = spin_two_point(&g, beta, &[0, 1, 2, 3]);
        let got = current_correlation(&g, beta, &[0, 1, 2, 3], 20).unwrap();
        assert_abs_diff_eq!(got.value, want, epsilon = 1e-12);
        // Empty source set is the normalization itself.
        let unit = current_correlation(&g, beta, &[], 20).unwrap();
        assert_eq!(unit.value, 1.0);
    }

    #[test]
    fn parity_table_vanishes_at_odd_popcount() {
        let g = Graph::cycle(3).unwrap();
        let z = current_partition_functions(&g, 0.9, 12).unwrap();
        assert_eq!(z.len(), 8);
        for (mask, &v) in z.iter().enumerate() {
            if mask.count_ones() % 2 == 1 {
                assert_eq!(v, 0.0, "odd-parity mask {mask:b} must be unreachable");
            }
        }
        assert!(z[0] >= 1.0);
    }

    #[test]
    fn disconnected_sources_decorrelate() {
        // Two disjoint edges: ⟨σ_0 σ_2⟩ = 0 across components.
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let cc = current_correlation(&g, 0.8, &[0, 2], 20).unwrap();
        assert_eq!(cc.value, 0.0);
    }

    #[test]
    fn validation_and_capacity_errors() {
        let g = Graph::cycle(4).unwrap();
        assert!(current_correlation(&g, 0.5, &[0], 10).is_err());
        assert!(current_correlation(&g, 0.5, &[0, 7], 10).is_err());
        assert!(current_correlation(&g, 0.5, &[0, 0], 10).is_err());
        assert!(current_correlation(&g, f64::NAN, &[0, 1], 10).is_err());
        assert!(current_correlation(&g, -1.0, &[0, 1], 10).is_err());
        let big = Graph::path(7);
        let err = current_correlation(&big, 0.5, &[0, 1], 20).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let wide = Graph::new(17, (0..16).map(|i| (i, i + 1)).collect()).unwrap();
        let err = current_partition_functions(&wide, 0.5, 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn tree_bound_holds_on_small_boxes() {
        for (w, h) in [(2, 2), (3, 2)] {
            let lat = Lattice::grid(w, h).unwrap();
            for beta in [0.2, 0.44, 0.8] {
                let m = enumerate(
                    &EnergyModel::ising(beta).unwrap(),
                    &lat,
                    &BoundaryCondition::Free,
                )
                .unwrap();
                let sites = lat.sites();
                let xs = [sites[0], sites[1], sites[2], sites[3]];
                let tb = tree_bound_check(&m, &lat, xs).unwrap();
                assert!(
                    tb.slack >= 0.0,
                    "tree bound violated on {w}x{h} at β={beta}: {tb:?}"
                );
                assert!(tb.lhs >= 0.0 && tb.rhs >= 0.0);
            }
        }
    }

    #[test]
    fn tree_bound_rejects_foreign_sites() {
        let lat = Lattice::grid(2, 2).unwrap();
        let m = enumerate(
            &EnergyModel::ising(0.4).unwrap(),
            &lat,
            &BoundaryCondition::Free,
        )
        .unwrap();
        let bad = [
            Site::new(0, 0),
            Site::new(1, 0),
            Site::new(0, 1),
            Site::new(5, 5),
        ];
        assert!(tree_bound_check(&m, &lat, bad).is_err());
    }
}
