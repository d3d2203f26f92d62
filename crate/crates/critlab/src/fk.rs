//! The random-cluster (FK) model for real q ≥ 1.
//!
//! An edge configuration ω gets weight
//!
//!   (∏_{e∈ω} p_e)(∏_{e∉ω} 1−p_e) · q^{k(ω)},
//!
//! with k(ω) the number of open components including isolated
//! vertices. The module provides exact enumeration (shared
//! [`ExactMeasure`] back end), a single-edge heat-bath sampler, the
//! Edwards–Sokal coupling to Potts colors in both directions (whose
//! composition is a Swendsen–Wang sweep), the self-dual point, a
//! connection-probability estimator, and the medial loop
//! representation of box configurations.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gibbs::{measure_from_log_weights, ExactMeasure};
use crate::graph::Graph;
use crate::lattice::{edge_pair, Lattice, Site};
use crate::percolation::{ball_edges, EdgeConfig, Estimate, Layer, Mode};
use crate::rng::{stream_rng, Rng};
use crate::util::UnionFind;
use rand::Rng as _;
use rayon::prelude::*;

/// Enumeration cap for [`fk_exact`] (2^22 states ≈ 4M).
pub const FK_EXACT_EDGE_CAPACITY: usize = 22;

/// Exhaustive-conditional cap for [`check_monotone_conditionals`].
pub const FK_MONOTONE_EDGE_CAPACITY: usize = 12;

/// Edge probabilities: one shared value or one per edge (the per-edge
/// form serves isoradial reweightings).
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeProb {
    /// The same p for every edge.
    Uniform(f64),
    /// p_e aligned with the graph's edge list.
    PerEdge(Vec<f64>),
}

/// Random-cluster parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FKParams {
    /// Cluster weight q ≥ 1.
    pub q: f64,
    /// Open probabilities.
    pub p: EdgeProb,
}

impl FKParams {
    /// Uniform edge probability.
    pub fn uniform(q: f64, p: f64) -> Result<Self> {
        check_q(q)?;
        check_p(p)?;
        Ok(FKParams {
            q,
            p: EdgeProb::Uniform(p),
        })
    }

    /// Per-edge probabilities.
    pub fn per_edge(q: f64, ps: Vec<f64>) -> Result<Self> {
        check_q(q)?;
        for &p in &ps {
            check_p(p)?;
        }
        Ok(FKParams {
            q,
            p: EdgeProb::PerEdge(ps),
        })
    }

    /// Open probability of edge `e`.
    pub fn p_edge(&self, e: usize) -> f64 {
        match &self.p {
            EdgeProb::Uniform(p) => *p,
            EdgeProb::PerEdge(ps) => ps[e],
        }
    }

    /// Check the per-edge vector (if any) covers this graph.
    pub fn validate_for(&self, graph: &Graph) -> Result<()> {
        if let EdgeProb::PerEdge(ps) = &self.p {
            if ps.len() != graph.n_edges() {
                return Err(Error::invalid(format!(
                    "{} edge probabilities for {} edges",
                    ps.len(),
                    graph.n_edges()
                )));
            }
        }
        Ok(())
    }
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() || q < 1.0 {
        return Err(Error::invalid(format!("cluster weight must be ≥ 1, got {q}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::invalid(format!("edge probability {p} outside [0,1]")));
    }
    Ok(())
}

/// An open/closed flag per graph edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FkConfig {
    open: Vec<bool>,
}

impl FkConfig {
    /// All edges closed.
    pub fn all_closed(n_edges: usize) -> Self {
        FkConfig {
            open: vec![false; n_edges],
        }
    }

    /// All edges open.
    pub fn all_open(n_edges: usize) -> Self {
        FkConfig {
            open: vec![true; n_edges],
        }
    }

    /// Wrap explicit flags.
    pub fn from_bits(open: Vec<bool>) -> Self {
        FkConfig { open }
    }

    /// The flags, aligned with the graph's edge list.
    pub fn open(&self) -> &[bool] {
        &self.open
    }

    /// Set one edge.
    pub fn set(&mut self, e: usize, v: bool) {
        self.open[e] = v;
    }

    /// Number of open edges.
    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&b| b).count()
    }
}

/// Number of open components, isolated vertices included.
pub fn cluster_count(graph: &Graph, cfg: &FkConfig) -> usize {
    let mut uf = UnionFind::new(graph.n_vertices());
    graph.open_components(cfg.open(), &mut uf)
}

/// log of the random-cluster weight (natural base). Zero-probability
/// configurations give −∞.
pub fn fk_log_weight(graph: &Graph, cfg: &FkConfig, params: &FKParams) -> Result<f64> {
    params.validate_for(graph)?;
    if cfg.open().len() != graph.n_edges() {
        return Err(Error::invalid(format!(
            "{} flags for {} edges",
            cfg.open().len(),
            graph.n_edges()
        )));
    }
    let mut lw = 0.0;
    for e in 0..graph.n_edges() {
        let p = params.p_edge(e);
        lw += if cfg.open()[e] { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(lw + cluster_count(graph, cfg) as f64 * params.q.ln())
}

/// The random-cluster weight itself (fine at desk scale; use
/// [`fk_log_weight`] when q^k would overflow).
pub fn fk_weight(graph: &Graph, cfg: &FkConfig, params: &FKParams) -> Result<f64> {
    Ok(fk_log_weight(graph, cfg, params)?.exp())
}

/// Exact conditional P(ω_e = open | rest of cfg): p_e when the
/// endpoints are already connected without e, else
/// p_e / (p_e + q (1 − p_e)).
pub fn heat_bath_open_probability(
    graph: &Graph,
    cfg: &FkConfig,
    e: usize,
    params: &FKParams,
) -> Result<f64> {
    params.validate_for(graph)?;
    if e >= graph.n_edges() {
        return Err(Error::invalid(format!(
            "edge {e} outside 0..{}",
            graph.n_edges()
        )));
    }
    let p = params.p_edge(e);
    let (a, b) = graph.edges()[e];
    let mut uf = UnionFind::new(graph.n_vertices());
    for (i, &(x, y)) in graph.edges().iter().enumerate() {
        if i != e && cfg.open()[i] {
            uf.union(x, y);
        }
    }
    Ok(if uf.find(a) == uf.find(b) {
        p
    } else {
        p / (p + params.q * (1.0 - p))
    })
}

/// Resample one edge from its exact conditional; returns the new flag.
pub fn heat_bath_step(
    graph: &Graph,
    cfg: &mut FkConfig,
    e: usize,
    params: &FKParams,
    rng: &mut Rng,
) -> Result<bool> {
    let prob = heat_bath_open_probability(graph, cfg, e, params)?;
    let v = rng.gen::<f64>() < prob;
    cfg.set(e, v);
    Ok(v)
}

/// One deterministic-scan sweep: every edge resampled once, in order.
pub fn heat_bath_sweep(
    graph: &Graph,
    cfg: &mut FkConfig,
    params: &FKParams,
    rng: &mut Rng,
) -> Result<()> {
    for e in 0..graph.n_edges() {
        heat_bath_step(graph, cfg, e, params, rng)?;
    }
    Ok(())
}

/// Exact random-cluster measure by enumerating all 2^{#edges} edge
/// configurations. State index bit `e` is the flag of edge `e`, which
/// matches [`ExactMeasure::decode`] over the value set {0, 1}.
pub fn fk_exact(graph: &Graph, params: &FKParams) -> Result<ExactMeasure> {
    params.validate_for(graph)?;
    let m = graph.n_edges();
    if m > FK_EXACT_EDGE_CAPACITY {
        return Err(Error::capacity(format!(
            "fk_exact enumerates 2^{m} configs; edge cap is {FK_EXACT_EDGE_CAPACITY}"
        )));
    }
    let log_q = params.q.ln();
    let log_p: Vec<(f64, f64)> = (0..m)
        .map(|e| {
            let p = params.p_edge(e);
            (p.ln(), (1.0 - p).ln())
        })
        .collect();
    let log_w: Vec<f64> = (0..1usize << m)
        .into_par_iter()
        .map_init(
            || (UnionFind::new(graph.n_vertices()), vec![false; m]),
            |(uf, open), mask| {
                let mut lw = 0.0;
                for (e, slot) in open.iter_mut().enumerate() {
                    *slot = mask >> e & 1 == 1;
                    lw += if *slot { log_p[e].0 } else { log_p[e].1 };
                }
                let k = graph.open_components(open, uf);
                lw + k as f64 * log_q
            },
        )
        .collect();
    measure_from_log_weights(vec![0.0, 1.0], m, log_w)
}

/// A Potts coloring, one color in 1..=q per graph vertex (vertex i of
/// a lattice-derived graph is site i in lattice order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PottsConfig {
    /// Colors, 1-based.
    pub colors: Vec<u32>,
}

/// Edwards–Sokal upward map: color every open cluster uniformly and
/// independently.
pub fn edwards_sokal_color(
    graph: &Graph,
    cfg: &FkConfig,
    q_int: u32,
    rng: &mut Rng,
) -> Result<PottsConfig> {
    if q_int < 2 {
        return Err(Error::invalid(format!(
            "Potts needs an integer q ≥ 2, got {q_int}"
        )));
    }
    if cfg.open().len() != graph.n_edges() {
        return Err(Error::invalid("config/graph edge count mismatch"));
    }
    let mut uf = UnionFind::new(graph.n_vertices());
    graph.open_components(cfg.open(), &mut uf);
    // Draw one color per root, in vertex order, for determinism.
    let mut root_color: HashMap<usize, u32> = HashMap::new();
    let mut colors = Vec::with_capacity(graph.n_vertices());
    for v in 0..graph.n_vertices() {
        let r = uf.find(v);
        let c = *root_color
            .entry(r)
            .or_insert_with(|| rng.gen_range(1..=q_int));
        colors.push(c);
    }
    Ok(PottsConfig { colors })
}

/// Edwards–Sokal downward map: given colors, open each monochromatic
/// edge with probability p_e and close every bichromatic edge.
pub fn edwards_sokal_percolate(
    graph: &Graph,
    potts: &PottsConfig,
    params: &FKParams,
    rng: &mut Rng,
) -> Result<FkConfig> {
    params.validate_for(graph)?;
    if potts.colors.len() != graph.n_vertices() {
        return Err(Error::invalid(format!(
            "{} colors for {} vertices",
            potts.colors.len(),
            graph.n_vertices()
        )));
    }
    let mut cfg = FkConfig::all_closed(graph.n_edges());
    for (e, &(a, b)) in graph.edges().iter().enumerate() {
        if potts.colors[a] == potts.colors[b] && rng.gen::<f64>() < params.p_edge(e) {
            cfg.set(e, true);
        }
    }
    Ok(cfg)
}

/// One Swendsen–Wang sweep: FK → colors → FK. Requires integer q ≥ 2.
pub fn swendsen_wang_sweep(
    graph: &Graph,
    cfg: &mut FkConfig,
    params: &FKParams,
    rng: &mut Rng,
) -> Result<()> {
    let q_int = integer_q(params.q)?;
    let colors = edwards_sokal_color(graph, cfg, q_int, rng)?;
    *cfg = edwards_sokal_percolate(graph, &colors, params, rng)?;
    Ok(())
}

fn integer_q(q: f64) -> Result<u32> {
    let r = q.round();
    if (q - r).abs() > 1e-9 || !(2.0..=1e6).contains(&r) {
        return Err(Error::invalid(format!(
            "coloring needs an integer q ≥ 2, got {q}"
        )));
    }
    Ok(r as u32)
}

/// The self-dual point p_sd = √q / (1 + √q), the solution of
/// p/(1−p) = √q.
pub fn self_dual_point(q: f64) -> Result<f64> {
    check_q(q)?;
    let r = q.sqrt();
    Ok(r / (1.0 + r))
}

/// p = 1 − e^{−β}, the FK probability matching the Potts convention
/// H = 1_{σ_u = σ_v} (one unit of energy per monochromatic edge).
pub fn potts_p_from_beta(beta: f64) -> f64 {
    1.0 - (-beta).exp()
}

/// p = 1 − e^{−2β}, the FK probability matching the ±1 spin
/// convention H = −σ_u σ_v.
pub fn ising_p_from_beta(beta: f64) -> f64 {
    1.0 - (-2.0 * beta).exp()
}

/// Exhaustively check that every conditional P(ω_e = 1 | ω_F) is
/// nondecreasing in the revealed configuration ω_F, over all edges e,
/// all revealed subsets F ⊆ E∖{e}, and all comparable pairs on F.
/// Returns descriptions of violations (empty means monotone).
pub fn check_monotone_conditionals(graph: &Graph, params: &FKParams) -> Result<Vec<String>> {
    let m = graph.n_edges();
    if m > FK_MONOTONE_EDGE_CAPACITY {
        return Err(Error::capacity(format!(
            "monotone conditional check is exhaustive; edge cap is {FK_MONOTONE_EDGE_CAPACITY}"
        )));
    }
    let measure = fk_exact(graph, params)?;
    let probs: Vec<f64> = (0..1usize << m).map(|s| measure.prob(s)).collect();
    let mut violations = Vec::new();
    for e in 0..m {
        let e_bit = 1usize << e;
        let rest: Vec<usize> = (0..m).filter(|&f| f != e).collect();
        for f_sel in 0..1usize << rest.len() {
            let f_mask: usize = rest
                .iter()
                .enumerate()
                .filter(|&(i, _)| f_sel >> i & 1 == 1)
                .map(|(_, &f)| 1usize << f)
                .sum();
            // P(e open | ω_F = x) for each assignment x ⊆ f_mask.
            let mut cond: HashMap<usize, f64> = HashMap::new();
            for x in subsets_of(f_mask) {
                let mut joint = 0.0;
                let mut marg = 0.0;
                for s in 0..probs.len() {
                    if s & f_mask == x {
                        marg += probs[s];
                        if s & e_bit != 0 {
                            joint += probs[s];
                        }
                    }
                }
                if marg > 0.0 {
                    cond.insert(x, joint / marg);
                }
            }
            for (&x, &px) in &cond {
                for (&y, &py) in &cond {
                    if x & y == x && x != y && px > py + 1e-12 {
                        violations.push(format!(
                            "edge {e}, revealed {f_mask:b}: P({x:b}) = {px} > P({y:b}) = {py}"
                        ));
                    }
                }
            }
        }
    }
    Ok(violations)
}

/// All subsets of a bitmask.
fn subsets_of(mask: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut sub = mask;
    while sub != 0 {
        out.push(sub);
        sub = (sub - 1) & mask;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Connection probability of the origin to the ℓ¹ sphere of radius n
/// under the random-cluster measure on the ball, free boundary.
pub fn fk_theta(n: i64, params: &FKParams, mode: Mode) -> Result<Estimate> {
    if n < 1 {
        return Err(Error::invalid(format!("radius must be ≥ 1, got {n}")));
    }
    let (sites, graph) = ball_graph(n);
    params.validate_for(&graph)?;
    let origin = sites
        .iter()
        .position(|s| s.u1 == 0 && s.u2 == 0)
        .expect("origin is in every ball");
    let boundary: Vec<usize> = sites
        .iter()
        .enumerate()
        .filter(|(_, s)| s.u1.abs() + s.u2.abs() == n)
        .map(|(i, _)| i)
        .collect();

    let connected = |open: &[bool], uf: &mut UnionFind| -> bool {
        uf.reset();
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            if open[e] {
                uf.union(a, b);
            }
        }
        let r = uf.find(origin);
        boundary.iter().any(|&b| uf.find(b) == r)
    };

    match mode {
        Mode::Exact => {
            let measure = fk_exact(&graph, params)?;
            let m = graph.n_edges();
            let value: f64 = (0..measure.n_states())
                .into_par_iter()
                .map_init(
                    || (UnionFind::new(graph.n_vertices()), vec![false; m]),
                    |(uf, open), s| {
                        for (e, slot) in open.iter_mut().enumerate() {
                            *slot = s >> e & 1 == 1;
                        }
                        if connected(open, uf) {
                            measure.prob(s)
                        } else {
                            0.0
                        }
                    },
                )
                .sum();
            Ok(Estimate::exact(value))
        }
        Mode::MonteCarlo { replicas, seed } => {
            if replicas == 0 {
                return Err(Error::invalid("replicas must be ≥ 1"));
            }
            const BURN_IN_SWEEPS: usize = 96;
            let hits: u64 = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(seed, r);
                    // Start from the q = 1 (independent) configuration
                    // and burn in with heat-bath sweeps.
                    let mut cfg = FkConfig::from_bits(
                        (0..graph.n_edges())
                            .map(|e| rng.gen::<f64>() < params.p_edge(e))
                            .collect(),
                    );
                    for _ in 0..BURN_IN_SWEEPS {
                        heat_bath_sweep(&graph, &mut cfg, params, &mut rng)
                            .expect("validated above");
                    }
                    let mut uf = UnionFind::new(graph.n_vertices());
                    u64::from(connected(cfg.open(), &mut uf))
                })
                .sum();
            Ok(Estimate::bernoulli(hits, replicas))
        }
    }
}

/// Vertices and coupling graph of the ℓ¹ ball of radius n, vertex
/// order sorted by (u₂, u₁).
pub fn ball_graph(n: i64) -> (Vec<Site>, Graph) {
    let mut sites = Vec::new();
    for x in -n..=n {
        let h = n - x.abs();
        for y in -h..=h {
            sites.push(Site::new(x, y));
        }
    }
    sites.sort();
    let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let edges = ball_edges(n)
        .into_iter()
        .map(|(a, b)| (index[&a], index[&b]))
        .collect();
    let graph = Graph::new(sites.len(), edges).expect("ball edges are valid");
    (sites, graph)
}

/// Primal coupling graph of an even-sublattice box: vertex list is the
/// sorted primal vertices; edge i is the primal edge of site i, so an
/// [`FkConfig`] on this graph aligns bit-for-bit with an
/// [`EdgeConfig`] on the box.
pub fn box_primal_graph(lat: &Lattice) -> Result<(Vec<Site>, Graph)> {
    if !lat.is_even_box() {
        return Err(Error::invalid(
            "primal graph extraction needs the even-sublattice box construction",
        ));
    }
    let mut vertices = Vec::new();
    let mut pairs = Vec::with_capacity(lat.n_sites());
    for &u in lat.sites() {
        let (e, _) = edge_pair(u)?;
        vertices.push(e.a);
        vertices.push(e.b);
        pairs.push((e.a, e.b));
    }
    vertices.sort();
    vertices.dedup();
    let index: HashMap<Site, usize> = vertices.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let edges = pairs.into_iter().map(|(a, b)| (index[&a], index[&b])).collect();
    let graph = Graph::new(vertices.len(), edges)?;
    Ok((vertices, graph))
}

/// The loops of the medial graph separating primal from dual clusters.
///
/// Loop vertices are medial-edge midpoints stored in doubled integer
/// coordinates (so all geometry is exact); each belongs to exactly one
/// loop, which makes the loops vertex-disjoint by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopSet {
    loops: Vec<Vec<(i64, i64)>>,
}

impl LoopSet {
    /// Number of loops.
    pub fn n_loops(&self) -> usize {
        self.loops.len()
    }

    /// Raw loops in doubled coordinates (closed cyclically; the first
    /// point is not repeated at the end).
    pub fn loops(&self) -> &[Vec<(i64, i64)>] {
        &self.loops
    }

    /// Loop `i` as float points with the closing point appended.
    pub fn closed_points(&self, i: usize) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.loops[i]
            .iter()
            .map(|&(x, y)| (x as f64 / 2.0, y as f64 / 2.0))
            .collect();
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
        pts
    }
}

// Port directions at a midpoint: 0 = NE, 1 = NW, 2 = SW, 3 = SE.
const PORT_DELTA: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];
// Arcs pass vertically (N↔S on each side) or horizontally (E↔W).
const PAIR_VERTICAL: [usize; 4] = [3, 2, 1, 0];
const PAIR_HORIZONTAL: [usize; 4] = [1, 0, 3, 2];

/// Extract the medial loops of a box configuration. Every edge outside
/// the box is treated as closed (free boundary for the primal model),
/// and only loops visiting at least one in-box midpoint are returned.
pub fn loop_representation(cfg: &EdgeConfig) -> Result<LoopSet> {
    let lat = cfg.lat();
    if !lat.is_even_box() {
        return Err(Error::invalid(
            "loop representation needs the even-sublattice box construction",
        ));
    }
    let n = match lat.kind() {
        crate::lattice::LatticeKind::Box2D { n, .. } => n,
        _ => unreachable!("is_even_box implies a box kind"),
    };
    // Kept loops stay within the collar |u|_∞ ≤ n + 2: outside the box
    // everything is closed, where loops are diamonds hugging single
    // primal vertices, and box-touching diamonds reach at most n + 2.
    let reach = n + 2;
    let g = (2 * reach + 1) as usize;
    let grid_index = |u: Site| -> usize {
        ((u.u1 + reach) as usize) + ((u.u2 + reach) as usize) * g
    };
    let in_grid = |u: Site| u.u1.abs() <= reach && u.u2.abs() <= reach;
    let primal_open = |u: Site| -> bool {
        match lat.site_index(u) {
            Some(i) => match cfg.layer() {
                Layer::Primal => cfg.bits()[i],
                Layer::Dual => !cfg.bits()[i],
            },
            None => false,
        }
    };
    let pairing = |u: Site| -> &'static [usize; 4] {
        let open = primal_open(u);
        let vertical = if u.u1.rem_euclid(2) == 0 { open } else { !open };
        if vertical {
            &PAIR_VERTICAL
        } else {
            &PAIR_HORIZONTAL
        }
    };

    let mut visited = vec![false; g * g * 4];
    let mut loops = Vec::new();
    for &seed in lat.sites() {
        for d0 in 0..4 {
            if visited[grid_index(seed) * 4 + d0] {
                continue;
            }
            let mut pts = Vec::new();
            let mut u = seed;
            let mut d_in = d0;
            loop {
                debug_assert!(in_grid(u), "loop escaped the collar at {u}");
                let gi = grid_index(u) * 4;
                visited[gi + d_in] = true;
                let d_out = pairing(u)[d_in];
                visited[gi + d_out] = true;
                let (dx, dy) = PORT_DELTA[d_out];
                pts.push((2 * u.u1 + dx, 2 * u.u2 + dy));
                u = Site::new(u.u1 + dx, u.u2 + dy);
                d_in = (d_out + 2) % 4;
                if u == seed && d_in == d0 {
                    break;
                }
            }
            loops.push(pts);
        }
    }
    Ok(LoopSet { loops })
}
