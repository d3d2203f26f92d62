//! The acceptance suite: desk-scale checks that tie the library's exact
//! enumerations, samplers, and property verifiers together.
//!
//! Each criterion (`A1`–`A18`) is a self-contained runner returning
//! pass/fail plus a detail line quoting the measured values. Failures
//! are *report entries*, not errors: problems inside a runner are
//! converted into failed entries, so a suite run always yields exactly
//! one entry per criterion.
//!
//! Two tiers: [`Tier::Fast`] covers the exact and enumerative checks
//! (about five minutes); [`Tier::Full`] adds the Monte Carlo
//! phenomenology on larger systems (A4, A5, A11, A18). A fast run
//! still reports the full-tier criteria, marked skipped, so every id
//! appears in every report.
//!
//! All randomized criteria run from pinned seeds; a suite run is
//! deterministic end to end.

use std::collections::BTreeSet;

use num::{BigInt, BigRational};
use rayon::prelude::*;

use crate::currents::{current_correlation, current_partition_functions, tree_bound_check};
use crate::error::{Error, Result};
use crate::fk::{
    check_monotone_conditionals, fk_exact, fk_weight, ising_p_from_beta, self_dual_point,
    FKParams, FkConfig,
};
use crate::gibbs::{enumerate, BoundaryCondition, EnergyModel, ExactMeasure};
use crate::graph::Graph;
use crate::homotopy::{
    critical_fk_loop_families, default_eta_grid, ensemble_distance, homotopy_word, rotate_family,
    winding_numbers, CyclicWord, DistanceReport, Loop, PunctureGrid,
};
use crate::ising::{
    beta_c, decay_fit, iid_linear_statistic_samples, susceptibility_scan,
    torus_correlation_profile, two_point_exact, LinearStatistic, McOptions,
};
use crate::isoradial::{check_isoradial, isoradial_embed, swap_rows, IsoradialSequence};
use crate::lattice::{Lattice, Site};
use crate::osss::{osss_verify, random_instance, BooleanFunctional, CubeMeasure, DecisionTree};
use crate::percolation::{
    crossing_counts, crossing_probability, dual_config, has_crossing, theta, theta_exact,
    CrossingSpec, Direction, EdgeConfig, Layer, Mode,
};
use crate::phi4::{block_spin_law, chain_sum_fourth_cumulant, double_well_concentration, BlockSpinSpec};
use crate::rng::{root_rng, stream_rng};
use crate::sixv::{
    binomial, c_of_q, eigen_ratios, enumerate_tilings, full_transfer_dense, leading_eigen,
    sector_basis, transfer_block, transfer_trace_exact, TilingBoundary, TransferBlock,
};
use crate::util::{ols_fit, sample_cumulants, UnionFind};

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// Which slice of the suite to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    /// Exact and enumerative checks; minutes.
    Fast,
    /// Everything, including large-lattice Monte Carlo; up to hours.
    Full,
}

impl Tier {
    /// Parse `"fast"` / `"full"`.
    pub fn parse(s: &str) -> Result<Tier> {
        match s {
            "fast" => Ok(Tier::Fast),
            "full" => Ok(Tier::Full),
            other => Err(Error::invalid(format!("unknown tier {other:?}; use fast or full"))),
        }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not run at this tier (full-tier criterion in a fast run).
    Skip,
}

/// One report entry.
#[derive(Clone, Debug)]
pub struct CriterionResult {
    /// Criterion id, `"A1"` … `"A18"`.
    pub id: &'static str,
    /// The tier the criterion belongs to.
    pub tier: Tier,
    /// Pass / fail / skipped.
    pub status: Status,
    /// Measured values, or the reason for failure.
    pub detail: String,
}

/// Every criterion id with its tier, in report order.
pub const CRITERIA: [(&str, Tier); 18] = [
    ("A1", Tier::Fast),
    ("A2", Tier::Fast),
    ("A3", Tier::Fast),
    ("A4", Tier::Full),
    ("A5", Tier::Full),
    ("A6", Tier::Fast),
    ("A7", Tier::Fast),
    ("A8", Tier::Fast),
    ("A9", Tier::Fast),
    ("A10", Tier::Fast),
    ("A11", Tier::Full),
    ("A12", Tier::Fast),
    ("A13", Tier::Fast),
    ("A14", Tier::Fast),
    ("A15", Tier::Fast),
    ("A16", Tier::Fast),
    ("A17", Tier::Fast),
    ("A18", Tier::Full),
];

type Runner = fn() -> Result<(bool, String)>;

fn runner(id: &str) -> Option<Runner> {
    Some(match id {
        "A1" => a1,
        "A2" => a2,
        "A3" => a3,
        "A4" => a4,
        "A5" => a5,
        "A6" => a6,
        "A7" => a7,
        "A8" => a8,
        "A9" => a9,
        "A10" => a10,
        "A11" => a11,
        "A12" => a12,
        "A13" => a13,
        "A14" => a14,
        "A15" => a15,
        "A16" => a16,
        "A17" => a17,
        "A18" => a18,
        _ => return None,
    })
}

/// Run a single criterion by id. `Err` only for an unknown id; runner
/// errors come back as failed entries.
pub fn run_criterion(id: &str) -> Result<CriterionResult> {
    let &(canon, tier) = CRITERIA
        .iter()
        .find(|(c, _)| *c == id)
        .ok_or_else(|| Error::invalid(format!("unknown criterion id {id:?}")))?;
    let f = runner(canon).expect("catalogued id has a runner");
    Ok(match f() {
        Ok((true, detail)) => CriterionResult { id: canon, tier, status: Status::Pass, detail },
        Ok((false, detail)) => CriterionResult { id: canon, tier, status: Status::Fail, detail },
        Err(e) => CriterionResult {
            id: canon,
            tier,
            status: Status::Fail,
            detail: format!("runner error: {e}"),
        },
    })
}

/// Run a tier. The report always contains all 18 ids; in a fast run
/// the full-tier criteria appear as [`Status::Skip`] entries.
pub fn run_tier(tier: Tier) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, t)| {
            if tier == Tier::Fast && t == Tier::Full {
                CriterionResult {
                    id,
                    tier: t,
                    status: Status::Skip,
                    detail: "full-tier criterion; rerun with the full tier".into(),
                }
            } else {
                run_criterion(id).expect("catalogued id")
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// A small graph under construction for the isomorphism catalog.
#[derive(Clone)]
struct CatGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

fn permutations(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        f(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permutations(perm, k + 1, f);
        perm.swap(k, i);
    }
}

impl CatGraph {
    fn key_under(&self, perm: &[usize]) -> u64 {
        let mut key = 0u64;
        for &(a, b) in &self.edges {
            let (x, y) = (perm[a], perm[b]);
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            key |= 1 << (lo * 8 + hi);
        }
        key
    }

    /// Minimum adjacency bitmask over all vertex relabelings — equal
    /// keys iff isomorphic (vertex counts matching).
    fn canonical_key(&self) -> u64 {
        let mut perm: Vec<usize> = (0..self.n).collect();
        let mut best = u64::MAX;
        permutations(&mut perm, 0, &mut |p| best = best.min(self.key_under(p)));
        best
    }

    /// All one-edge extensions: a new edge between existing vertices,
    /// or a pendant edge to a fresh vertex.
    fn extensions(&self) -> Vec<CatGraph> {
        let have: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if !have.contains(&(a, b)) {
                    let mut g = self.clone();
                    g.edges.push((a, b));
                    out.push(g);
                }
            }
        }
        for a in 0..self.n {
            let mut g = self.clone();
            g.edges.push((a, self.n));
            g.n += 1;
            out.push(g);
        }
        out
    }

    fn to_graph(&self) -> Graph {
        Graph::new(self.n, self.edges.clone()).expect("catalog graphs are simple and valid")
    }
}

/// One representative per isomorphism class of connected simple graphs
/// with 1..=`max_edges` edges and no isolated vertices.
///
/// Built by breadth-first edge extension from K₂: every connected
/// graph with m+1 edges arises from a connected one with m edges by
/// deleting a leaf edge (trees) or a non-bridge edge (otherwise), so
/// extending every class by one edge in both modes reaches every
/// class. Deduplication is by canonical adjacency key.
pub(crate) fn connected_graph_catalog(max_edges: usize) -> Vec<Graph> {
    assert!(max_edges >= 1 && max_edges <= 7, "catalog sized for small graphs");
    let k2 = CatGraph { n: 2, edges: vec![(0, 1)] };
    let mut seen: BTreeSet<(usize, u64)> = BTreeSet::new();
    seen.insert((k2.n, k2.canonical_key()));
    let mut out = vec![k2.to_graph()];
    let mut level = vec![k2];
    for _ in 1..max_edges {
        let mut next = Vec::new();
        for g in &level {
            for cand in g.extensions() {
                if seen.insert((cand.n, cand.canonical_key())) {
                    out.push(cand.to_graph());
                    next.push(cand);
                }
            }
        }
        level = next;
    }
    out
}

/// ⟨σ_u σ_v⟩ for the Ising model on an arbitrary graph by direct
/// enumeration of all 2^V spin assignments (β times the sum of
/// neighbor products in the exponent).
fn graph_two_point(g: &Graph, beta: f64, u: usize, v: usize) -> f64 {
    let nv = g.n_vertices();
    let spin = |mask: u32, i: usize| if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
    let mut z = 0.0;
    let mut num = 0.0;
    for mask in 0u32..1 << nv {
        let mut h = 0.0;
        for &(a, b) in g.edges() {
            h += spin(mask, a) * spin(mask, b);
        }
        let w = (beta * h).exp();
        z += w;
        num += spin(mask, u) * spin(mask, v) * w;
    }
    num / z
}

/// P[u ↔ v] under an exact FK measure on the graph.
pub(crate) fn fk_connect_prob(g: &Graph, m: &ExactMeasure, u: usize, v: usize) -> f64 {
    m.expectation(|bits: &[f64]| {
        let open: Vec<bool> = bits.iter().map(|&b| b > 0.5).collect();
        let mut uf = UnionFind::new(g.n_vertices());
        g.open_components(&open, &mut uf);
        if uf.find(u) == uf.find(v) {
            1.0
        } else {
            0.0
        }
    })
}

/// ⟨σ_0 σ_x⟩ on the free-boundary length-`len` chain via 2×2 transfer
/// products — the independent oracle route for A3.
fn transfer_two_point(len: usize, beta: f64, x: usize) -> f64 {
    let t = [
        [beta.exp(), (-beta).exp()],
        [(-beta).exp(), beta.exp()],
    ];
    let prop = |mut v: [f64; 2], steps: usize| -> [f64; 2] {
        for _ in 0..steps {
            v = [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]];
        }
        v
    };
    let mut num = [1.0, -1.0]; // σ inserted at site 0
    num = prop(num, x);
    num = [num[0], -num[1]]; // σ inserted at site x
    num = prop(num, len - 1 - x);
    let den = prop([1.0, 1.0], len - 1);
    (num[0] + num[1]) / (den[0] + den[1])
}

/// Dominant eigenvalue of a transfer block by normalized repeated
/// squaring of the dense matrix: tr(A^{2^k})^{1/2^k} → λ_max with
/// relative error ≤ dim^{1/2^k} − 1, driven far below 1e−12 by k = 45.
/// Independent of the power iteration it cross-checks.
fn dominant_by_squaring(block: &TransferBlock) -> f64 {
    let d = block.dim();
    let mut a = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = block.entry(i, j);
        }
    }
    let mut log_scale = 0.0f64; // A^{2^k} = B · exp(log_scale)
    for _ in 0..45 {
        let mu = a.iter().cloned().fold(0.0f64, f64::max);
        let mut b = vec![0.0f64; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = a[i * d + k] / mu;
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    b[i * d + j] += aik * (a[k * d + j] / mu);
                }
            }
        }
        log_scale = 2.0 * (log_scale + mu.ln());
        a = b;
    }
    let trace: f64 = (0..d).map(|i| a[i * d + i]).sum();
    ((trace.ln() + log_scale) / 2f64.powi(45)).exp()
}

fn half() -> num::rational::Ratio<BigInt> {
    num::rational::Ratio::new(BigInt::from(1), BigInt::from(2))
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn a1() -> Result<(bool, String)> {
    a1_with_convention(false)
}

/// A1 with an optional deliberately wrong duality convention
/// (primal-LR against dual-LR instead of dual-TB); the mutation test
/// checks the criterion catches the wrong convention.
fn a1_with_convention(wrong_convention: bool) -> Result<(bool, String)> {
    let mut exact_ok = true;
    for n in 1..=3 {
        let counts = crossing_counts(n)?;
        exact_ok &= counts.eval_lr(half()) == half();
    }
    let lr = CrossingSpec::full(Direction::LeftRight);
    let dual_dir = if wrong_convention { Direction::LeftRight } else { Direction::TopBottom };
    let tb = CrossingSpec::full(dual_dir);
    let mut duality_ok = true;
    let mut checked = 0usize;
    for n in 1..=2 {
        let lat = Lattice::build_box(n, true)?;
        let edges = lat.n_sites();
        for mask in 0u64..1 << edges {
            let bits: Vec<bool> = (0..edges).map(|e| mask >> e & 1 == 1).collect();
            let cfg = EdgeConfig::from_bits(&lat, Layer::Primal, bits)?;
            let primal = has_crossing(&cfg, &lr)?;
            let dual = has_crossing(&dual_config(&cfg)?, &tb)?;
            duality_ok &= primal != dual;
            checked += 1;
        }
    }
    Ok((
        exact_ok && duality_ok,
        format!(
            "p_N(1/2) = 1/2 in exact rational arithmetic for N ∈ {{1,2,3}}; \
             primal-LR xor dual-TB held on all {checked} configurations of Λ_1 ∪ Λ_2"
        ),
    ))
}

fn a2() -> Result<(bool, String)> {
    let mc = |p: f64, seed: u64| {
        crossing_probability(11, p, Mode::MonteCarlo { replicas: 100_000, seed })
    };
    let mid = mc(0.5, 21)?;
    let lo = mc(0.45, 22)?;
    let hi = mc(0.55, 23)?;
    let dev = (mid.value - 0.5).abs();
    let pass = dev <= 3.0 * mid.stderr
        && lo.value < mid.value
        && mid.value < hi.value
        && lo.value < 0.5
        && hi.value > 0.5;
    Ok((
        pass,
        format!(
            "p=0.5 → {:.5} ± {:.5} (|Δ| = {:.5} ≤ 3σ); bracket {:.4} (p=0.45) < 0.5 < {:.4} (p=0.55)",
            mid.value, mid.stderr, dev, lo.value, hi.value
        ),
    ))
}

fn a3() -> Result<(bool, String)> {
    let len = 7usize;
    let lat = Lattice::chain(len as i64)?;
    let mut worst = 0.0f64;
    for &beta in &[0.2, 0.5, 1.0] {
        let m = enumerate(&EnergyModel::ising(beta)?, &lat, &BoundaryCondition::Free)?;
        let t = beta.tanh();
        for x in 1..=6 {
            let enumerated = two_point_exact(&m, &lat, Site::new(0, 0), Site::new(x, 0))?;
            let transfer = transfer_two_point(len, beta, x as usize);
            let oracle = t.powi(x as i32);
            worst = worst
                .max((enumerated - oracle).abs())
                .max((transfer - oracle).abs());
        }
    }
    Ok((
        worst <= 1e-10,
        format!(
            "max |⟨σ₀σ_x⟩ − tanh(β)^x| = {worst:.2e} over β ∈ {{0.2, 0.5, 1.0}}, x ≤ 6 \
             (enumeration and transfer product; tolerance 1e-10)"
        ),
    ))
}

fn a4() -> Result<(bool, String)> {
    let betas: Vec<f64> = (0..=12).map(|k| 0.38 + 0.01 * k as f64).collect();
    let opts = McOptions { burn_in: 800, samples: 4000, stride: 1, seed: 44 };
    let scan = susceptibility_scan(32, &betas, opts)?;
    let (b_star, chi) = scan
        .iter()
        .fold((f64::NAN, f64::MIN), |acc, &(b, chi, _)| if chi > acc.1 { (b, chi) } else { acc });
    let pass = (0.40..=0.48).contains(&b_star);
    Ok((
        pass,
        format!(
            "χ peaks at β = {b_star:.2} (χ = {chi:.1}) on the 32² torus; \
             window [0.40, 0.48] brackets log√(1+√2) ≈ 0.44069"
        ),
    ))
}

fn a5() -> Result<(bool, String)> {
    let rs: Vec<usize> = (4..=16).collect();
    let opts = McOptions { burn_in: 1500, samples: 4000, stride: 2, seed: 55 };
    let profile = torus_correlation_profile(64, beta_c(), &rs, opts)?;
    let fit = decay_fit(&profile, (4, 16))?;
    let delta = -fit.slope;
    let pass = (0.15..=0.35).contains(&delta);
    Ok((
        pass,
        format!(
            "critical decay exponent δ = {delta:.3} from the r ∈ [4,16] fit on the 64² torus \
             (prediction 1/4; window [0.15, 0.35])"
        ),
    ))
}

fn a6() -> Result<(bool, String)> {
    let catalog = connected_graph_catalog(6);
    let mut by_edges = [0usize; 7];
    for g in &catalog {
        by_edges[g.n_edges()] += 1;
    }
    if by_edges[1..] != [1, 1, 3, 5, 12, 30] {
        return Ok((false, format!("graph catalog sizes {:?} ≠ [1, 1, 3, 5, 12, 30]", &by_edges[1..])));
    }
    let n_max = 20u32;
    // One current sweep per graph and β yields every source pair at once.
    let per_graph: Vec<(f64, f64)> = catalog
        .par_iter()
        .map(|g| -> Result<(f64, f64)> {
            let mut worst_excess = f64::MIN;
            let mut worst_diff = 0.0f64;
            for &beta in &[0.3, 1.0] {
                let z = current_partition_functions(g, beta, n_max)?;
                // The documented truncation allowance: |E| β^{n+1}/(n+1)!.
                let log_term: f64 = (1..=n_max as u64 + 1).map(|k| (beta / k as f64).ln()).sum();
                let bound = g.n_edges() as f64 * log_term.exp();
                for u in 0..g.n_vertices() {
                    for v in u + 1..g.n_vertices() {
                        let value = z[(1 << u) | (1 << v)] / z[0];
                        let oracle = graph_two_point(g, beta, u, v);
                        let diff = (value - oracle).abs();
                        worst_diff = worst_diff.max(diff);
                        worst_excess = worst_excess.max(diff - (bound + 1e-12));
                    }
                }
            }
            Ok((worst_excess, worst_diff))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_excess = per_graph.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    let worst_diff = per_graph.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let k2 = Graph::path(2);
    let mut worst_edge = 0.0f64;
    for k in 1..=10 {
        let beta = k as f64 / 10.0;
        let cc = current_correlation(&k2, beta, &[0, 1], n_max)?;
        worst_edge = worst_edge.max((cc.value - beta.tanh()).abs());
    }
    let pass = worst_excess <= 0.0 && worst_edge <= 1e-8;
    Ok((
        pass,
        format!(
            "52 connected graphs (≤ 6 edges) × β ∈ {{0.3, 1.0}}: max |current − enumeration| = \
             {worst_diff:.2e}, within the truncation bound plus 1e-12 float slack; \
             single edge off tanh(β) by ≤ {worst_edge:.2e}"
        ),
    ))
}

fn a7() -> Result<(bool, String)> {
    let mut min_slack = f64::INFINITY;
    let mut subsets = 0usize;
    for (w, h) in [(2, 2), (3, 2)] {
        let lat = Lattice::grid(w, h)?;
        let sites = lat.sites().to_vec();
        let n = sites.len();
        for &beta in &[0.2, 0.44, 0.8] {
            let m = enumerate(&EnergyModel::ising(beta)?, &lat, &BoundaryCondition::Free)?;
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        for l in k + 1..n {
                            let tb = tree_bound_check(&m, &lat, [sites[i], sites[j], sites[k], sites[l]])?;
                            min_slack = min_slack.min(tb.slack);
                            subsets += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((
        min_slack >= 0.0,
        format!("tree-bound slack ≥ 0 on all {subsets} (box, β, 4-site) cases; minimum slack {min_slack:.3e}"),
    ))
}

fn a8() -> Result<(bool, String)> {
    // (i) q = 1 weights coincide with Bernoulli products.
    let mut worst_q1 = 0.0f64;
    for g in [Graph::cycle(4)?, Graph::k4_minus_edge()] {
        for &p in &[0.3, 0.7] {
            let params = FKParams::uniform(1.0, p)?;
            let m_edges = g.n_edges();
            for mask in 0u32..1 << m_edges {
                let cfg = FkConfig::from_bits((0..m_edges).map(|e| mask >> e & 1 == 1).collect());
                let w = fk_weight(&g, &cfg, &params)?;
                let k = cfg.open_count();
                let bern = p.powi(k as i32) * (1.0 - p).powi((m_edges - k) as i32);
                worst_q1 = worst_q1.max((w / bern - 1.0).abs());
            }
        }
    }
    // (ii) Edwards–Sokal two-point identity on the ≤ 6-edge catalog.
    let p: f64 = 0.45;
    let beta = -0.5 * (1.0 - p).ln(); // p = 1 − e^{−2β}
    let catalog = connected_graph_catalog(6);
    let deviations: Vec<f64> = catalog
        .par_iter()
        .map(|g| -> Result<f64> {
            let m = fk_exact(g, &FKParams::uniform(2.0, p)?)?;
            let mut worst = 0.0f64;
            for u in 0..g.n_vertices() {
                for v in u + 1..g.n_vertices() {
                    let connect = fk_connect_prob(g, &m, u, v);
                    let ising = graph_two_point(g, beta, u, v);
                    worst = worst.max((connect - ising).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_es = deviations.into_iter().fold(0.0f64, f64::max);
    // (iii) self-dual pins.
    let sd1 = self_dual_point(1.0)?;
    let sd2 = self_dual_point(2.0)?;
    let onsager_gap = (sd2 - ising_p_from_beta(beta_c())).abs();
    let pass = worst_q1 <= 1e-12 && worst_es <= 1e-10 && sd1 == 0.5 && onsager_gap <= 1e-12;
    Ok((
        pass,
        format!(
            "q=1 weights match Bernoulli to relative {worst_q1:.1e}; ES identity deviation ≤ \
             {worst_es:.1e} over 52 graphs; p_sd(1) = {sd1}; |p_sd(2) − p(β_c)| = {onsager_gap:.1e}"
        ),
    ))
}

fn a9() -> Result<(bool, String)> {
    let catalog = connected_graph_catalog(5);
    let n_graphs = catalog.len();
    let counts: Vec<usize> = catalog
        .par_iter()
        .map(|g| -> Result<usize> {
            let mut v = 0;
            for &q in &[1.0, 1.5, 2.0, 3.0, 4.0] {
                for &p in &[0.2, 0.5, 0.8] {
                    v += check_monotone_conditionals(g, &FKParams::uniform(q, p)?)?.len();
                }
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let violations: usize = counts.iter().sum();
    Ok((
        violations == 0,
        format!(
            "{violations} monotonicity violations over {n_graphs} graphs (≤ 5 edges) × \
             q ∈ {{1, 1.5, 2, 3, 4}} × p ∈ {{0.2, 0.5, 0.8}}, exhaustive over conditioning configs"
        ),
    ))
}

fn a10() -> Result<(bool, String)> {
    let mut rng = root_rng(1010);
    let mut min_slack = f64::INFINITY;
    let mut violations = 0usize;
    for i in 0..1000usize {
        let edges = 1 + i % 4;
        let inst = random_instance(edges, &mut rng)?;
        let rep = osss_verify(&inst.measure, &inst.functional, &inst.tree)?;
        min_slack = min_slack.min(rep.slack);
        if rep.slack < -1e-12 {
            violations += 1;
        }
    }
    let tight = osss_verify(
        &CubeMeasure::product(&[0.5])?,
        &BooleanFunctional::coordinate(1, 0)?,
        &DecisionTree::fixed_order(&[0])?,
    )?;
    let pass = violations == 0 && tight.slack == 0.0;
    Ok((
        pass,
        format!(
            "{violations} violations over 1000 random (measure, f, tree) instances with |E| ≤ 4; \
             min slack {min_slack:.2e} ≥ −1e-12; uniform single-edge slack = {} exactly",
            tight.slack
        ),
    ))
}

fn a11() -> Result<(bool, String)> {
    let xs: Vec<f64> = (1..=6).map(|n| n as f64).collect();
    let ys = (1..=6)
        .map(|n| theta_exact(n, 0.3).map(f64::ln))
        .collect::<Result<Vec<_>>>()?;
    let fit = ols_fit(&xs, &ys)?;
    let mut min_theta = f64::INFINITY;
    for (k, n) in [8i64, 16, 32, 64].into_iter().enumerate() {
        let est = theta(n, 0.7, Mode::MonteCarlo { replicas: 4000, seed: 1100 + k as u64 })?;
        min_theta = min_theta.min(est.value);
    }
    let pass = fit.slope < -0.1 && min_theta >= 0.5;
    Ok((
        pass,
        format!(
            "log θ_n(0.3) slope = {:.3} < −0.1 (exact, n ≤ 6); min MC θ_n(0.7) = {min_theta:.3} ≥ 0.5 \
             over n ∈ {{8, 16, 32, 64}}",
            fit.slope
        ),
    ))
}

fn a12() -> Result<(bool, String)> {
    // (i) sector dimensions.
    let mut dims_ok = true;
    for n in 1..=8 {
        for k in 0..=n {
            dims_ok &= sector_basis(n, k).len() == binomial(n, k);
        }
    }
    // (ii) V_2 and V_4 block-diagonalize exactly against the dense operator.
    let c = 1.75;
    let mut block_exact = true;
    for n in [2usize, 4] {
        let dense = full_transfer_dense(n, c)?;
        let size = 1usize << n;
        for row in 0..size {
            for col in 0..size {
                if (row as u32).count_ones() != (col as u32).count_ones() {
                    block_exact &= dense[row * size + col] == 0.0;
                }
            }
        }
        for k in 0..=n {
            let basis = sector_basis(n, k);
            let block = transfer_block(n, k, c)?;
            for (i, &out) in basis.iter().enumerate() {
                for (j, &inp) in basis.iter().enumerate() {
                    block_exact &= block.entry(i, j) == dense[out as usize * size + inp as usize];
                }
            }
        }
    }
    // (iii) trace identity against cylinder tiling enumeration, rational c.
    let c_rat = BigRational::new(BigInt::from(7), BigInt::from(4));
    let mut trace_ok = true;
    for (w, h) in [(1, 16), (2, 8), (3, 5), (4, 4), (5, 3), (6, 2), (8, 2), (16, 1)] {
        let lhs = transfer_trace_exact(w, h, &c_rat)?;
        let rhs = enumerate_tilings(w, h, &TilingBoundary::Torus, &c_rat)?.weighted;
        trace_ok &= lhs == rhs;
    }
    // (iv) power iteration vs squaring oracle; Perron positivity.
    let mut eig_dev = 0.0f64;
    let mut perron = true;
    for n in [2usize, 4, 6] {
        for k in 0..=n {
            let block = transfer_block(n, k, c)?;
            let lead = leading_eigen(&block, 1e-13, 100_000)?;
            perron &= lead.vector.iter().all(|&x| x > 0.0);
            let oracle = dominant_by_squaring(&block);
            eig_dev = eig_dev.max((lead.lambda - oracle).abs() / oracle);
        }
    }
    let pass = dims_ok && block_exact && trace_ok && eig_dev <= 1e-10 && perron;
    Ok((
        pass,
        format!(
            "dims C(N,n) exact to N = 8; V_2/V_4 block structure exact; trace = tiling count on 8 \
             cylinders (W·H ≤ 16, c = 7/4 rational); power iteration off squaring oracle by ≤ \
             {eig_dev:.1e}; Perron vectors positive: {perron}"
        ),
    ))
}

fn a13() -> Result<(bool, String)> {
    let c4 = c_of_q(4.0)?;
    let c9 = c_of_q(9.0)?;
    let mut all_ok = true;
    let mut lo = f64::INFINITY;
    let mut hi = f64::MIN;
    for n in [8usize, 10, 12] {
        for &r in eigen_ratios(n, n / 2, c9, 1e-12)?.iter() {
            all_ok &= r.is_finite() && r > 0.0;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let pass = c4 == 2.0 && all_ok;
    Ok((
        pass,
        format!(
            "c_of_q(4) = {c4} exactly; eigen_ratios finite and positive for N ∈ {{8, 10, 12}} at \
             q = 9 (range [{lo:.3e}, {hi:.3}])"
        ),
    ))
}

fn a14() -> Result<(bool, String)> {
    let lat = Lattice::build_box(100, true)?;
    let stat = LinearStatistic::constant(1.0);
    // Density of the even sublattice is 1/2, so Var = |Λ_N|/N² → 2.
    let var = sample_cumulants(&iid_linear_statistic_samples(&lat, &stat, 10_000, 1414)).1;
    let excess = sample_cumulants(&iid_linear_statistic_samples(&lat, &stat, 100_000, 1415)).4;
    let pass = (var - 2.0).abs() <= 0.04 && excess.abs() < 0.05;
    Ok((
        pass,
        format!(
            "Var(I_1^100) = {var:.4} (target 2 ± 2%; exact finite-N value 2.0201); \
             excess kurtosis = {excess:+.4} (|·| < 0.05 at 10⁵ replicas)"
        ),
    ))
}

fn a15() -> Result<(bool, String)> {
    let mut max_k4 = f64::MIN;
    for &g in &[0.5, 1.0, 2.0] {
        for &nu in &[-1.0, 0.0, 1.0] {
            max_k4 = max_k4.max(chain_sum_fourth_cumulant(g, nu, 4, 14)?);
        }
    }
    let shallow = double_well_concentration(10.0, 0.1)?;
    let deep = double_well_concentration(100.0, 0.1)?;
    let pass = max_k4 <= 1e-10 && deep > shallow;
    Ok((
        pass,
        format!(
            "max κ₄(Σφ) = {max_k4:.3e} ≤ 0 on the 4-chain over g ∈ {{0.5, 1, 2}} × ν ∈ {{−1, 0, 1}}; \
             well mass within 0.1 of ±√(α/2): {shallow:.4} (α=10) < {deep:.4} (α=100), monotone"
        ),
    ))
}

fn a16() -> Result<(bool, String)> {
    let mut sym_exact = true;
    let mut worst_norm = 0.0f64;
    for k in 1..=6 {
        let law = block_spin_law(&BlockSpinSpec::uniform(k, 0.2, 0.5)?)?;
        let pmf = law.pmf();
        for m in 0..pmf.len() {
            sym_exact &= pmf[m] == pmf[pmf.len() - 1 - m];
        }
        worst_norm = worst_norm.max((pmf.iter().sum::<f64>() - 1.0).abs());
    }
    // K = 2 hand enumeration: states ++, +−, −+, −− with kernel exp(2a s₁s₂).
    let a = 0.3;
    let law2 = block_spin_law(&BlockSpinSpec::uniform(2, a, 1.0)?)?;
    let z = 2.0 * (2.0 * a).exp() + 2.0 * (-2.0 * a).exp();
    let p_pm2 = (2.0 * a).exp() / z;
    let p_0 = 2.0 * (-2.0 * a).exp() / z;
    let hand_dev = (law2.prob_of_sum(2) - p_pm2)
        .abs()
        .max((law2.prob_of_sum(-2) - p_pm2).abs())
        .max((law2.prob_of_sum(0) - p_0).abs());
    let pass = sym_exact && worst_norm <= 1e-12 && hand_dev <= 1e-12;
    Ok((
        pass,
        format!(
            "pmfs bitwise symmetric for K ≤ 6; normalization off by ≤ {worst_norm:.1e}; \
             K = 2 law matches the 4-state hand enumeration to {hand_dev:.1e}"
        ),
    ))
}

fn a17() -> Result<(bool, String)> {
    let size = 5i64;
    let mut worst_dev = 0.0f64;
    let mut worst_diamond = 0.0f64;
    let mut involution_exact = true;
    for w in 0..100u64 {
        let mut rng = stream_rng(1717, w);
        let angles: Vec<f64> = (0..=2 * size)
            .map(|_| rand::Rng::gen_range(&mut rng, -0.4..0.4))
            .collect();
        let alpha = IsoradialSequence::new(-size, angles)?;
        let emb = isoradial_embed(&alpha, (-size, size), (-size, size))?;
        worst_dev = worst_dev.max(check_isoradial(&emb, 1e-9)?.max_deviation);
        for (a, b) in emb.diamond_edges() {
            let pa = emb.position(a).expect("edge endpoints are embedded");
            let pb = emb.position(b).expect("edge endpoints are embedded");
            let len = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            worst_diamond = worst_diamond.max((len - 1.0).abs());
        }
        let j = -size + (w as i64 % (2 * size));
        let twice = swap_rows(&swap_rows(&alpha, j)?, j)?;
        for y in -size..=size {
            involution_exact &= twice.get(y) == alpha.get(y);
        }
    }
    let pass = worst_dev < 1e-9 && worst_diamond <= 1e-12 && involution_exact;
    Ok((
        pass,
        format!(
            "100 random α windows: isoradial deviation ≤ {worst_dev:.1e} < 1e-9; diamond edges \
             unit to {worst_diamond:.1e}; T_j ∘ T_j = id bitwise: {involution_exact}"
        ),
    ))
}

fn a18() -> Result<(bool, String)> {
    // (i) word/winding exactness on constructed loops.
    let grid = PunctureGrid::new(0.5)?;
    let origin = nearest_puncture(&grid, (0.0, 0.0));
    let east = nearest_puncture(&grid, (0.5, 0.0));
    let p0 = grid.points()[origin];
    let single = Loop::circle(p0, 0.2, 64)?;
    let word_single = homotopy_word(&single, &grid)?;
    let expect_single = CyclicWord::reduce(&[(origin as u32, 1)]);
    let winds = winding_numbers(&single, &grid)?;
    let mut exact_ok = word_single == expect_single
        && winds[origin] == 1
        && winds.iter().enumerate().all(|(i, &w)| i == origin || w == 0);
    // A doubled circle winds twice and says so in both instruments.
    let double: Vec<(f64, f64)> = {
        let once = single.points();
        let mut pts = once[..once.len() - 1].to_vec();
        pts.extend_from_slice(once);
        pts
    };
    let double_loop = Loop::new(double)?;
    exact_ok &= winding_numbers(&double_loop, &grid)?[origin] == 2
        && homotopy_word(&double_loop, &grid)?
            == CyclicWord::reduce(&[(origin as u32, 1), (origin as u32, 1)]);
    // A box around two neighbors reduces to the two-letter product.
    let p1 = grid.points()[east];
    let cx = (p0.0 + p1.0) / 2.0;
    let cy = (p0.1 + p1.1) / 2.0;
    let pair_box = Loop::new(vec![
        (cx - 0.4, cy - 0.15),
        (cx + 0.4, cy - 0.15),
        (cx + 0.4, cy + 0.15),
        (cx - 0.4, cy + 0.15),
        (cx - 0.4, cy - 0.15),
    ])?;
    // The box word may carry conjugators from rays that pass through,
    // so the checked invariants are its exponent sums and windings.
    let pair_word = homotopy_word(&pair_box, &grid)?;
    let pair_winds = winding_numbers(&pair_box, &grid)?;
    exact_ok &= pair_word.exponent_sum(origin as u32) == 1
        && pair_word.exponent_sum(east as u32) == 1
        && pair_winds[origin] == 1
        && pair_winds[east] == 1
        && pair_winds.iter().sum::<i64>() == 2;

    // (ii) π/2 relabeling vs an independent ensemble on the 64² box.
    let samples = 64usize;
    let a = critical_fk_loop_families(64, samples, 48, 1818)?;
    let a_prime = critical_fk_loop_families(64, samples, 48, 1819)?;
    let rotated: Vec<Vec<Loop>> = a
        .iter()
        .map(|fam| rotate_family(fam, std::f64::consts::FRAC_PI_2))
        .collect();
    let etas = default_eta_grid();
    let d_rot = ensemble_distance(&a, &rotated, &etas)?;
    let d_ind = ensemble_distance(&a, &a_prime, &etas)?;
    // Control: the metric must not be blind — identical ensembles match
    // down to the finest mesh, so any rotation artifact would register.
    let d_self = ensemble_distance(&a, &a, &etas)?;
    let finest = etas.iter().cloned().fold(f64::INFINITY, f64::min);
    let self_ok = (d_self.mean_cost - finest).abs() <= 1e-12;
    let sem = |r: &DistanceReport| {
        let n = r.costs.len() as f64;
        let mean = r.mean_cost;
        let var = r.costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    let sigma = (sem(&d_rot).powi(2) + sem(&d_ind).powi(2)).sqrt();
    let diff = (d_rot.mean_cost - d_ind.mean_cost).abs();
    let stat_ok = diff <= 3.0 * sigma || diff == 0.0;
    Ok((
        exact_ok && stat_ok && self_ok,
        format!(
            "constructed words and windings exact; d(A, R_π/2 A) = {:.4}, d(A, A′) = {:.4}, \
             |Δ| = {:.4} ≤ 3σ̂ = {:.4}; control d(A, A) = {:.4} hits the finest mesh \
             (64 samples, critical FK on the 64² box)",
            d_rot.mean_cost,
            d_ind.mean_cost,
            diff,
            3.0 * sigma,
            d_self.mean_cost
        ),
    ))
}

fn nearest_puncture(grid: &PunctureGrid, target: (f64, f64)) -> usize {
    grid.points()
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (a.0 - target.0).powi(2) + (a.1 - target.1).powi(2);
            let db = (b.0 - target.0).powi(2) + (b.1 - target.1).powi(2);
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .expect("grids are nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_counts_match_the_census() {
        let catalog = connected_graph_catalog(6);
        let mut by_edges = [0usize; 7];
        for g in &catalog {
            assert!(g.is_connected(), "catalog graph must be connected");
            assert!(g.degrees().iter().all(|&d| d > 0), "no isolated vertices");
            by_edges[g.n_edges()] += 1;
        }
        assert_eq!(&by_edges[1..], &[1, 1, 3, 5, 12, 30]);
    }

    #[test]
    fn catalog_has_no_duplicate_classes_at_small_sizes() {
        // Brute-force cross-check at ≤ 4 edges: all canonical keys distinct.
        let catalog = connected_graph_catalog(4);
        let mut keys = BTreeSet::new();
        for g in &catalog {
            let cat = CatGraph { n: g.n_vertices(), edges: g.edges().to_vec() };
            assert!(keys.insert((cat.n, cat.canonical_key())), "duplicate class in catalog");
        }
        assert_eq!(catalog.len(), 1 + 1 + 3 + 5);
    }

    #[test]
    fn graph_two_point_agrees_with_gibbs_enumeration() {
        let lat = Lattice::grid(2, 2).unwrap();
        let g = Graph::from_lattice(&lat);
        let beta = 0.37;
        let m = enumerate(&EnergyModel::ising(beta).unwrap(), &lat, &BoundaryCondition::Free).unwrap();
        for u in 0..4 {
            for v in (u + 1)..4 {
                let a = two_point_exact(&m, &lat, lat.sites()[u], lat.sites()[v]).unwrap();
                let b = graph_two_point(&g, beta, u, v);
                assert!((a - b).abs() < 1e-13, "pair ({u},{v}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn transfer_product_reproduces_the_closed_form() {
        for &beta in &[0.2, 0.5, 1.0] {
            for x in 1..=6 {
                let v = transfer_two_point(7, beta, x);
                assert!((v - beta.tanh().powi(x as i32)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn squaring_oracle_matches_a_hand_eigenvalue() {
        // Block with a known dominant eigenvalue: width 2, one arrow up.
        let block = transfer_block(2, 1, 1.75).unwrap();
        let lead = leading_eigen(&block, 1e-13, 10_000).unwrap();
        let oracle = dominant_by_squaring(&block);
        assert!((lead.lambda - oracle).abs() / oracle < 1e-12);
    }

    #[test]
    fn wrong_duality_convention_is_caught() {
        let (ok, _) = a1_with_convention(false).unwrap();
        assert!(ok, "the correct convention must pass");
        let (bad, _) = a1_with_convention(true).unwrap();
        assert!(!bad, "primal-LR against dual-LR must fail the criterion");
    }

    #[test]
    fn criterion_lookup_and_tier_structure() {
        assert!(run_criterion("A99").is_err());
        assert_eq!(CRITERIA.len(), 18);
        assert_eq!(CRITERIA.iter().filter(|(_, t)| *t == Tier::Full).count(), 4);
        assert!(Tier::parse("fast").is_ok());
        assert!(Tier::parse("warp").is_err());
        // One cheap criterion end to end.
        let r = run_criterion("A3").unwrap();
        assert_eq!(r.id, "A3");
        assert_eq!(r.status, Status::Pass, "A3 failed: {}", r.detail);
    }
}
