//! Bernoulli bond percolation on the even-sublattice edge construction:
//! sampling, exact planar duality, crossing events, connection
//! probabilities θ_n, and Russo pivotal derivatives.
//!
//! Configurations live on the edges e_u of an even box Λ_N (one bit per
//! site u, see [`crate::lattice`]). The dual configuration opens e_u*
//! exactly when e_u is closed; planarity makes a left–right primal
//! crossing and a top–bottom dual crossing mutually exclusive and
//! exhaustive, which pins the critical density at ½.
//!
//! Two exact engines live here:
//!
//! * [`crossing_counts`] enumerates all 2^{|Λ_N|} configurations
//!   (feasible through N = 3) and tallies, per number of open edges,
//!   how many configurations have a primal left–right crossing and how
//!   many have a dual top–bottom crossing. Crossing probabilities then
//!   evaluate exactly in rational arithmetic.
//! * [`theta`] computes θ_n(p) = P(0 ↔ ∂Λ_n) on the ℓ¹ ball of radius
//!   n *exactly* by a column-sweep transfer over boundary connectivity
//!   partitions — no 2^{#edges} blow-up — with a dual-number variant
//!   supplying dθ_n/dp and forced-edge runs supplying the Russo
//!   pivotal sum.

use std::collections::HashMap;

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{BigUint, One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{edge_pair, Lattice, Site};
use crate::rng::{stream_rng, Rng};
use rand::Rng as _;

/// Which family of edges the bits of a configuration describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    /// The edges e_u (primal endpoints: even x, odd y).
    Primal,
    /// The perpendicular partners e_u* (dual endpoints: odd x, even y).
    Dual,
}

/// An open/closed flag per lattice edge.
#[derive(Clone, Debug)]
pub struct EdgeConfig<'a> {
    lat: &'a Lattice,
    layer: Layer,
    bits: Vec<bool>,
}

impl<'a> EdgeConfig<'a> {
    /// Wrap explicit bits (bit i belongs to the edge of site i).
    pub fn from_bits(lat: &'a Lattice, layer: Layer, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != lat.n_sites() {
            return Err(Error::invalid(format!(
                "{} bits for {} edges",
                bits.len(),
                lat.n_sites()
            )));
        }
        Ok(EdgeConfig { lat, layer, bits })
    }

    /// The open/closed flags.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The lattice the configuration lives on.
    pub fn lat(&self) -> &Lattice {
        self.lat
    }

    /// Which edge family the bits describe.
    pub fn layer(&self) -> Layer {
        self.layer
    }

    /// Number of open edges.
    pub fn open_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Sample iid Bernoulli(p) edges on an even box. Edges are visited in
/// site order with one uniform each, so configurations sampled from the
/// same seed at p ≤ p' are pathwise ordered.
pub fn sample_config<'a>(lat: &'a Lattice, p: f64, rng: &mut Rng) -> Result<EdgeConfig<'a>> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::invalid(format!("open probability {p} outside [0,1]")));
    }
    if !lat.is_even_box() {
        return Err(Error::invalid(
            "percolation configs live on the even-sublattice box construction",
        ));
    }
    let bits = (0..lat.n_sites()).map(|_| rng.gen::<f64>() < p).collect();
    Ok(EdgeConfig {
        lat,
        layer: Layer::Primal,
        bits,
    })
}

/// The planar dual: e_u* open iff e_u closed (and vice versa).
pub fn dual_config<'a>(cfg: &EdgeConfig<'a>) -> Result<EdgeConfig<'a>> {
    if !cfg.lat.is_even_box() {
        return Err(Error::invalid(
            "duality requires the even-sublattice box construction",
        ));
    }
    Ok(EdgeConfig {
        lat: cfg.lat,
        layer: match cfg.layer {
            Layer::Primal => Layer::Dual,
            Layer::Dual => Layer::Primal,
        },
        bits: cfg.bits.iter().map(|&b| !b).collect(),
    })
}

/// Crossing direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftRight,
    TopBottom,
}

/// Crossing region: the whole box, or a polygonal shape 𝒰 ⊂ [−1,1]²
/// scaled by N (an edge participates iff its midpoint lies in N𝒰).
#[derive(Clone, Debug)]
pub enum Region {
    FullBox,
    Shape(Vec<(f64, f64)>),
}

/// A crossing event specification.
#[derive(Clone, Debug)]
pub struct CrossingSpec {
    pub direction: Direction,
    pub region: Region,
}

impl CrossingSpec {
    /// Full-box crossing in a direction.
    pub fn full(direction: Direction) -> Self {
        CrossingSpec {
            direction,
            region: Region::FullBox,
        }
    }
}

/// Even–odd ray casting. Boundary behavior follows the usual half-open
/// convention; shapes should not thread polygon edges through lattice
/// midpoints.
fn point_in_polygon(pt: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let (x, y) = pt;
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % n];
        if (y1 > y) != (y2 > y) {
            let x_cross = x1 + (y - y1) / (y2 - y1) * (x2 - x1);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn validate_polygon(poly: &[(f64, f64)]) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::invalid("shape polygon needs at least 3 vertices"));
    }
    if poly.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::invalid("shape polygon has non-finite vertices"));
    }
    Ok(())
}

/// The geometric side of a crossing check: which edges participate and
/// which vertex sets must be joined.
struct CrossingArena {
    /// Edge endpoints as vertex indices, aligned with config bits;
    /// `None` for edges excluded by the region.
    endpoints: Vec<Option<(usize, usize)>>,
    n_vertices: usize,
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

fn build_arena(lat: &Lattice, layer: Layer, spec: &CrossingSpec) -> Result<CrossingArena> {
    let n = match lat.kind() {
        crate::lattice::LatticeKind::Box2D { n, even_only: true } => n,
        _ => {
            return Err(Error::invalid(
                "crossings are defined on the even-sublattice box construction",
            ))
        }
    };
    // Collect the edges of the requested layer, in site order.
    let mut vertex_ids: HashMap<Site, usize> = HashMap::new();
    let mut endpoints = Vec::with_capacity(lat.n_sites());
    let id_of = |s: Site, ids: &mut HashMap<Site, usize>| -> usize {
        let next = ids.len();
        *ids.entry(s).or_insert(next)
    };
    for &u in lat.sites() {
        let (e, e_star) = edge_pair(u)?;
        let edge = match layer {
            Layer::Primal => e,
            Layer::Dual => e_star,
        };
        let include = match &spec.region {
            Region::FullBox => true,
            Region::Shape(poly) => {
                validate_polygon(poly)?;
                let (mx, my) = edge.midpoint();
                let scale = n as f64;
                point_in_polygon((mx / scale, my / scale), poly)
            }
        };
        if include {
            let ia = id_of(edge.a, &mut vertex_ids);
            let ib = id_of(edge.b, &mut vertex_ids);
            endpoints.push(Some((ia, ib)));
        } else {
            endpoints.push(None);
        }
    }
    // Boundary sets: extreme coordinates among participating vertices.
    let mut side_a = Vec::new();
    let mut side_b = Vec::new();
    let coord = |s: Site| match spec.direction {
        Direction::LeftRight => s.u1,
        Direction::TopBottom => s.u2,
    };
    let lo = vertex_ids.keys().map(|&s| coord(s)).min();
    let hi = vertex_ids.keys().map(|&s| coord(s)).max();
    if let (Some(lo), Some(hi)) = (lo, hi) {
        if lo == hi {
            return Err(Error::invalid("crossing region is degenerate (one column)"));
        }
        for (&s, &i) in &vertex_ids {
            if coord(s) == lo {
                side_a.push(i);
            } else if coord(s) == hi {
                side_b.push(i);
            }
        }
    }
    if side_a.is_empty() || side_b.is_empty() {
        return Err(Error::invalid("crossing region misses the lattice"));
    }
    Ok(CrossingArena {
        endpoints,
        n_vertices: vertex_ids.len(),
        side_a,
        side_b,
    })
}

impl CrossingArena {
    /// Union each side set into its virtual node (so the crossing check
    /// is a single connectivity query between the two virtual nodes).
    fn merge_sides(&self, uf: &mut crate::util::UnionFind) {
        for &i in &self.side_a {
            uf.union(i, self.n_vertices);
        }
        for &i in &self.side_b {
            uf.union(i, self.n_vertices + 1);
        }
    }

    /// Does the bit pattern connect the two sides?
    fn crosses(&self, bits: &[bool], uf: &mut crate::util::UnionFind) -> bool {
        uf.reset();
        self.merge_sides(uf);
        for (ei, ends) in self.endpoints.iter().enumerate() {
            if let Some((ia, ib)) = ends {
                if bits[ei] {
                    uf.union(*ia, *ib);
                }
            }
        }
        uf.connected(self.n_vertices, self.n_vertices + 1)
    }

    fn fresh_uf(&self) -> crate::util::UnionFind {
        crate::util::UnionFind::new(self.n_vertices + 2)
    }
}

/// Whether a path of open edges joins the two designated boundary sets.
pub fn has_crossing(cfg: &EdgeConfig<'_>, spec: &CrossingSpec) -> Result<bool> {
    let arena = build_arena(cfg.lat, cfg.layer, spec)?;
    let mut uf = arena.fresh_uf();
    Ok(arena.crosses(&cfg.bits, &mut uf))
}

/// Exact crossing tallies for an even box, by number of open edges.
#[derive(Clone, Debug)]
pub struct CrossingCounts {
    /// Number of edges m = |Λ_N|.
    pub m: usize,
    /// `lr_primal[k]` = #configs with k open edges and a primal
    /// left–right crossing.
    pub lr_primal: Vec<u64>,
    /// `tb_dual[k]` = #configs with k open (primal) edges whose dual has
    /// a top–bottom crossing.
    pub tb_dual: Vec<u64>,
}

impl CrossingCounts {
    /// Evaluate P(LR primal crossing) at exact rational p.
    pub fn eval_lr(&self, p: Ratio<BigInt>) -> Ratio<BigInt> {
        eval_counts(&self.lr_primal, self.m, p)
    }

    /// Evaluate P(TB dual crossing) at exact rational p (probability
    /// that the *primal* density-p configuration has a TB dual crossing).
    pub fn eval_tb_dual(&self, p: Ratio<BigInt>) -> Ratio<BigInt> {
        eval_counts(&self.tb_dual, self.m, p)
    }
}

fn eval_counts(counts: &[u64], m: usize, p: Ratio<BigInt>) -> Ratio<BigInt> {
    let one = Ratio::from_integer(BigInt::one());
    let q = one.clone() - p.clone();
    let mut total = Ratio::from_integer(BigInt::zero());
    // Horner over k would be fine; direct powers are clear and cheap here.
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mut term = Ratio::from_integer(BigInt::from(c));
        for _ in 0..k {
            term *= p.clone();
        }
        for _ in 0..(m - k) {
            term *= q.clone();
        }
        total += term;
    }
    total
}

/// Binomial coefficient as a big integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k.min(n - k) {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    num / den
}

/// Enumerate all 2^m configurations of Λ_N and tally crossings.
///
/// Feasible through m = |Λ_3| = 25; refuses beyond 26 bits.
pub fn crossing_counts(n: i64) -> Result<CrossingCounts> {
    let lat = Lattice::build_box(n, true)?;
    let m = lat.n_sites();
    if m > 26 {
        return Err(Error::capacity(format!(
            "exhaustive crossing enumeration over 2^{m} configurations"
        )));
    }
    let primal = build_arena(&lat, Layer::Primal, &CrossingSpec::full(Direction::LeftRight))?;
    let dual = build_arena(&lat, Layer::Dual, &CrossingSpec::full(Direction::TopBottom))?;
    let total: u64 = 1 << m;
    // Parallelize over the high bits of the configuration index; each
    // task pre-merges its fixed high edges into a union-find template
    // and replays only the low edges per configuration.
    let prefix_bits = if m >= 12 { 8 } else { 0 };
    let suffix_bits = m - prefix_bits;
    let tallies = (0u64..(1 << prefix_bits))
        .into_par_iter()
        .map(|prefix| {
            let mut lr = vec![0u64; m + 1];
            let mut tb = vec![0u64; m + 1];
            let mut tpl_p = primal.fresh_uf();
            let mut tpl_d = dual.fresh_uf();
            primal.merge_sides(&mut tpl_p);
            dual.merge_sides(&mut tpl_d);
            for ei in suffix_bits..m {
                // The dual opens edge ei exactly when the primal doesn't.
                if (prefix >> (ei - suffix_bits)) & 1 == 1 {
                    if let Some((a, b)) = primal.endpoints[ei] {
                        tpl_p.union(a, b);
                    }
                } else if let Some((a, b)) = dual.endpoints[ei] {
                    tpl_d.union(a, b);
                }
            }
            let prefix_pop = prefix.count_ones() as usize;
            let mut uf_p = primal.fresh_uf();
            let mut uf_d = dual.fresh_uf();
            let (pa, pb) = (primal.n_vertices, primal.n_vertices + 1);
            let (da, db) = (dual.n_vertices, dual.n_vertices + 1);
            // Planar duality says exactly one of the two events holds
            // per configuration, but we *measure* both rather than
            // assume it.
            for suffix in 0u64..(1 << suffix_bits) {
                let k = prefix_pop + suffix.count_ones() as usize;
                uf_p.reset_from(&tpl_p);
                for (ei, ends) in primal.endpoints[..suffix_bits].iter().enumerate() {
                    if (suffix >> ei) & 1 == 1 {
                        if let Some((a, b)) = ends {
                            uf_p.union(*a, *b);
                        }
                    }
                }
                if uf_p.connected(pa, pb) {
                    lr[k] += 1;
                }
                uf_d.reset_from(&tpl_d);
                for (ei, ends) in dual.endpoints[..suffix_bits].iter().enumerate() {
                    if (suffix >> ei) & 1 == 0 {
                        if let Some((a, b)) = ends {
                            uf_d.union(*a, *b);
                        }
                    }
                }
                if uf_d.connected(da, db) {
                    tb[k] += 1;
                }
            }
            (lr, tb)
        })
        .reduce(
            || (vec![0u64; m + 1], vec![0u64; m + 1]),
            |(mut a, mut b), (c, d)| {
                for (x, y) in a.iter_mut().zip(c) {
                    *x += y;
                }
                for (x, y) in b.iter_mut().zip(d) {
                    *x += y;
                }
                (a, b)
            },
        );
    let (lr_primal, tb_dual) = tallies;
    debug_assert_eq!(lr_primal.iter().sum::<u64>() + tb_dual.iter().sum::<u64>(), total);
    Ok(CrossingCounts {
        m,
        lr_primal,
        tb_dual,
    })
}

/// How to evaluate a probability.
#[derive(Clone, Copy, Debug)]
pub enum Mode {
    /// Exact arithmetic (enumeration or transfer).
    Exact,
    /// Monte Carlo with this many replicas from this seed.
    MonteCarlo { replicas: u64, seed: u64 },
}

/// A point estimate with its standard error (0 for exact values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: u64,
}

impl Estimate {
    pub(crate) fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            replicas: 0,
        }
    }

    pub(crate) fn bernoulli(successes: u64, replicas: u64) -> Self {
        let v = successes as f64 / replicas as f64;
        Estimate {
            value: v,
            stderr: (v * (1.0 - v) / replicas as f64).sqrt(),
            replicas,
        }
    }
}

fn validate_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::invalid(format!("probability {p} outside [0,1]")));
    }
    Ok(())
}

/// Probability of a primal left–right crossing of Λ_N at density p.
pub fn crossing_probability(n: i64, p: f64, mode: Mode) -> Result<Estimate> {
    validate_p(p)?;
    match mode {
        Mode::Exact => {
            let counts = crossing_counts(n)?;
            let p_rat = Ratio::from_float(p)
                .ok_or_else(|| Error::invalid("p is not a finite float"))?;
            let exact = counts.eval_lr(p_rat);
            Ok(Estimate::exact(ratio_to_f64(&exact)))
        }
        Mode::MonteCarlo { replicas, seed } => {
            if replicas == 0 {
                return Err(Error::invalid("need at least one replica"));
            }
            let lat = Lattice::build_box(n, true)?;
            let arena = build_arena(&lat, Layer::Primal, &CrossingSpec::full(Direction::LeftRight))?;
            let hits: u64 = (0..replicas)
                .into_par_iter()
                .map_init(
                    || (arena.fresh_uf(), vec![false; lat.n_sites()]),
                    |(uf, bits), r| {
                        let mut rng = stream_rng(seed, r);
                        for b in bits.iter_mut() {
                            *b = rng.gen::<f64>() < p;
                        }
                        arena.crosses(bits, uf) as u64
                    },
                )
                .sum();
            Ok(Estimate::bernoulli(hits, replicas))
        }
    }
}

fn ratio_to_f64(r: &Ratio<BigInt>) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------
// θ_n(p) on the ℓ¹ ball: exact transfer over boundary partitions.
// ---------------------------------------------------------------------

/// Largest radius accepted by the exact θ engine. The sweep retires
/// each site as soon as its last edge is processed, so the frontier
/// never exceeds 16 slots through n = 6 (the scale the sharpness
/// phenomenology needs); state keys pack into a u128 at that size.
pub const THETA_EXACT_MAX_N: i64 = 6;

/// Arithmetic the partition transfer is generic over: plain numbers for
/// θ itself, dual numbers for dθ/dp.
pub trait DpWeight: Copy + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
}

impl DpWeight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
}

/// First-order dual number (value, derivative).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl DpWeight for Dual {
    fn zero() -> Self {
        Dual { v: 0.0, d: 0.0 }
    }
    fn one() -> Self {
        Dual { v: 1.0, d: 0.0 }
    }
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: self.v * o.d + self.d * o.v,
        }
    }
}

/// Sites of the ℓ¹ ball of radius n, and its 4n² nearest-neighbor edges
/// listed in the order the transfer sweep consumes them.
pub(crate) fn ball_edges(n: i64) -> Vec<(Site, Site)> {
    let inside = |x: i64, y: i64| x.abs() + y.abs() <= n;
    let mut edges = Vec::new();
    for x in -n..=n {
        let h = n - x.abs();
        for y in -h..=h {
            if inside(x, y - 1) {
                edges.push((Site::new(x, y - 1), Site::new(x, y)));
            }
            if inside(x - 1, y) {
                edges.push((Site::new(x - 1, y), Site::new(x, y)));
            }
        }
    }
    edges
}

const FLAG_ORIGIN: u8 = 1;
const FLAG_BOUNDARY: u8 = 2;

/// Frontier cap: slot block-ids pack 4 bits each into the low 64 bits
/// of the key, per-block flags 2 bits each into the high bits.
const MAX_SLOTS: usize = 16;
const FLAG_SHIFT: u32 = 64;

#[inline]
fn key_slot(key: u128, i: usize) -> u8 {
    ((key >> (4 * i)) & 0xF) as u8
}

#[inline]
fn key_flags(key: u128, block: u8) -> u8 {
    ((key >> (FLAG_SHIFT as usize + 2 * block as usize)) & 0x3) as u8
}

/// Re-encode a partition in canonical (first-occurrence) label order.
fn canonical_key(slots: &[u8], flags: &[u8; MAX_SLOTS]) -> u128 {
    let mut relabel = [u8::MAX; MAX_SLOTS];
    let mut next = 0u8;
    let mut key: u128 = 0;
    for (i, &b) in slots.iter().enumerate() {
        let r = &mut relabel[b as usize];
        if *r == u8::MAX {
            *r = next;
            next += 1;
        }
        key |= (*r as u128) << (4 * i);
    }
    for (old, &f) in flags.iter().enumerate() {
        let nb = relabel[old];
        if nb != u8::MAX && f != 0 {
            key |= (f as u128) << (FLAG_SHIFT as usize + 2 * nb as usize);
        }
    }
    key
}

/// Sort states by key and sum weights of duplicates in place.
fn merge_states<W: DpWeight>(states: &mut Vec<(u128, W)>) {
    states.sort_unstable_by_key(|e| e.0);
    let mut out = 0usize;
    for i in 0..states.len() {
        if out > 0 && states[out - 1].0 == states[i].0 {
            states[out - 1].1 = states[out - 1].1.add(states[i].1);
        } else {
            states[out] = states[i];
            out += 1;
        }
    }
    states.truncate(out);
}

/// Exact θ_n(p) with per-edge open/closed weights supplied by `edge_w`
/// (indexed in [`ball_edges`] order). Returns the total weight of
/// configurations connecting the origin to ∂Λ_n.
///
/// Column sweep over the ball; the frontier holds only sites with
/// unprocessed edges (each site retires as soon as its right neighbor
/// has consumed their shared edge), and every state is a canonical
/// connectivity partition of the frontier with origin/boundary flags
/// per block. A block joining both flags is absorbed into the success
/// weight; a block losing its last frontier slot while carrying only
/// the origin flag kills its state.
fn theta_transfer<W: DpWeight>(n: i64, edge_w: &dyn Fn(usize) -> (W, W)) -> W {
    let inside = |x: i64, y: i64| x.abs() + y.abs() <= n;
    let mut success = W::zero();
    let mut frontier: Vec<Site> = Vec::new();
    let mut states: Vec<(u128, W)> = vec![(0, W::one())];
    let mut scratch: Vec<(u128, W)> = Vec::new();
    let mut edge_idx = 0usize;

    // Remove one frontier slot from every state.
    let retire = |slot: usize,
                  frontier: &mut Vec<Site>,
                  states: &mut Vec<(u128, W)>,
                  scratch: &mut Vec<(u128, W)>| {
        let len = frontier.len();
        scratch.clear();
        for &(key, w) in states.iter() {
            let block = key_slot(key, slot);
            let lonely = (0..len).all(|i| i == slot || key_slot(key, i) != block);
            if lonely && key_flags(key, block) & FLAG_ORIGIN != 0 {
                // The origin block lost its last contact with the
                // frontier before reaching the boundary: dead state.
                continue;
            }
            let mut slots = [0u8; MAX_SLOTS];
            let mut flags = [0u8; MAX_SLOTS];
            let mut m = 0usize;
            for i in 0..len {
                if i != slot {
                    slots[m] = key_slot(key, i);
                    m += 1;
                }
            }
            for b in 0..len as u8 {
                flags[b as usize] = key_flags(key, b);
            }
            scratch.push((canonical_key(&slots[..m], &flags), w));
        }
        std::mem::swap(states, scratch);
        merge_states(states);
        frontier.remove(slot);
    };

    for x in -n..=n {
        let h = n - x.abs();
        // Shrinking side: previous-column sites above/below the current
        // span have no remaining edges.
        while let Some(slot) = frontier
            .iter()
            .position(|s| s.u1 == x - 1 && s.u2.abs() > h)
        {
            retire(slot, &mut frontier, &mut states, &mut scratch);
        }
        for y in -h..=h {
            // Append the new site as a singleton block.
            let mut site_flags = 0u8;
            if x == 0 && y == 0 {
                site_flags |= FLAG_ORIGIN;
            }
            if x.abs() + y.abs() == n {
                site_flags |= FLAG_BOUNDARY;
            }
            let new_slot = frontier.len();
            frontier.push(Site::new(x, y));
            debug_assert!(frontier.len() <= MAX_SLOTS);
            for (key, _) in states.iter_mut() {
                // The singleton gets the next free block id; appending
                // it last preserves canonical first-occurrence order.
                let next_block = if new_slot == 0 {
                    0
                } else {
                    (0..new_slot).map(|i| key_slot(*key, i)).max().unwrap() + 1
                };
                *key |= (next_block as u128) << (4 * new_slot);
                *key |= (site_flags as u128) << (FLAG_SHIFT as usize + 2 * next_block as usize);
            }
            // Process the ≤ 2 edges ending at this site.
            let mut pending: Vec<(usize, usize)> = Vec::with_capacity(2);
            if inside(x, y - 1) {
                let slot = frontier
                    .iter()
                    .position(|s| *s == Site::new(x, y - 1))
                    .expect("down neighbor on frontier");
                pending.push((edge_idx, slot));
                edge_idx += 1;
            }
            if inside(x - 1, y) {
                let slot = frontier
                    .iter()
                    .position(|s| *s == Site::new(x - 1, y))
                    .expect("left neighbor on frontier");
                pending.push((edge_idx, slot));
                edge_idx += 1;
            }
            for &(e, partner_slot) in &pending {
                let (w_open, w_closed) = edge_w(e);
                let last = frontier.len() - 1;
                scratch.clear();
                for &(key, w) in states.iter() {
                    // Closed branch: nothing merges.
                    scratch.push((key, w.mul(w_closed)));
                    // Open branch: merge the two endpoint blocks.
                    let wo = w.mul(w_open);
                    let (ba, bb) = (key_slot(key, last), key_slot(key, partner_slot));
                    if ba == bb {
                        scratch.push((key, wo));
                        continue;
                    }
                    let merged = key_flags(key, ba) | key_flags(key, bb);
                    if merged == FLAG_ORIGIN | FLAG_BOUNDARY {
                        success = success.add(wo);
                        continue;
                    }
                    let keep = ba.min(bb);
                    let gone = ba.max(bb);
                    let mut slots = [0u8; MAX_SLOTS];
                    let mut flags = [0u8; MAX_SLOTS];
                    for (i, s) in slots.iter_mut().enumerate().take(frontier.len()) {
                        let b = key_slot(key, i);
                        *s = if b == gone { keep } else { b };
                    }
                    for b in 0..MAX_SLOTS as u8 {
                        flags[b as usize] = key_flags(key, b);
                    }
                    flags[keep as usize] = merged;
                    flags[gone as usize] = 0;
                    scratch.push((canonical_key(&slots[..frontier.len()], &flags), wo));
                }
                std::mem::swap(&mut states, &mut scratch);
                merge_states(&mut states);
            }
            // The left neighbor's last edge was just consumed.
            if inside(x - 1, y) {
                let slot = frontier
                    .iter()
                    .position(|s| *s == Site::new(x - 1, y))
                    .expect("left neighbor still on frontier");
                retire(slot, &mut frontier, &mut states, &mut scratch);
            }
        }
    }
    success
}

/// Exact θ_n(p) = P_p(0 ↔ ∂Λ_n) on the ℓ¹ ball of radius n.
pub fn theta_exact(n: i64, p: f64) -> Result<f64> {
    validate_p(p)?;
    if n < 1 || n > THETA_EXACT_MAX_N {
        return Err(Error::capacity(format!(
            "exact θ_n supports 1 ≤ n ≤ {THETA_EXACT_MAX_N}, got {n}"
        )));
    }
    Ok(theta_transfer(n, &|_| (p, 1.0 - p)))
}

/// Exact dθ_n/dp via dual-number transfer.
pub fn theta_derivative(n: i64, p: f64) -> Result<f64> {
    validate_p(p)?;
    if n < 1 || n > THETA_EXACT_MAX_N {
        return Err(Error::capacity(format!(
            "exact θ_n supports 1 ≤ n ≤ {THETA_EXACT_MAX_N}, got {n}"
        )));
    }
    let w = theta_transfer(n, &|_| {
        (Dual { v: p, d: 1.0 }, Dual { v: 1.0 - p, d: -1.0 })
    });
    Ok(w.d)
}

/// θ_n(p), exact or Monte Carlo.
pub fn theta(n: i64, p: f64, mode: Mode) -> Result<Estimate> {
    validate_p(p)?;
    if n < 1 {
        return Err(Error::invalid(format!("box radius must be ≥ 1, got {n}")));
    }
    match mode {
        Mode::Exact => Ok(Estimate::exact(theta_exact(n, p)?)),
        Mode::MonteCarlo { replicas, seed } => {
            if replicas == 0 {
                return Err(Error::invalid("need at least one replica"));
            }
            // Index the ball sites; a virtual node stands for ∂Λ_n.
            let mut index: HashMap<Site, usize> = HashMap::new();
            for x in -n..=n {
                let h = n - x.abs();
                for y in -h..=h {
                    let next = index.len();
                    index.insert(Site::new(x, y), next);
                }
            }
            let edges: Vec<(usize, usize)> = ball_edges(n)
                .iter()
                .map(|&(a, b)| (index[&a], index[&b]))
                .collect();
            let origin = index[&Site::new(0, 0)];
            let boundary_node = index.len();
            let boundary: Vec<usize> = index
                .iter()
                .filter(|(s, _)| s.u1.abs() + s.u2.abs() == n)
                .map(|(_, &i)| i)
                .collect();
            let hits: u64 = (0..replicas)
                .into_par_iter()
                .map_init(
                    || crate::util::UnionFind::new(index.len() + 1),
                    |uf, r| {
                        let mut rng = stream_rng(seed, r);
                        uf.reset();
                        for &b in &boundary {
                            uf.union(b, boundary_node);
                        }
                        for &(a, b) in &edges {
                            if rng.gen::<f64>() < p {
                                uf.union(a, b);
                            }
                        }
                        uf.connected(origin, boundary_node) as u64
                    },
                )
                .sum();
            Ok(Estimate::bernoulli(hits, replicas))
        }
    }
}

/// Russo pivotal sum Σ_e P(e is pivotal for {0 ↔ ∂Λ_n}), computed by
/// forced-edge transfer runs; equals dθ_n/dp for this increasing event.
pub fn russo_derivative(n: i64, p: f64) -> Result<f64> {
    validate_p(p)?;
    if n < 1 || n > THETA_EXACT_MAX_N {
        return Err(Error::capacity(format!(
            "pivotal sums support 1 ≤ n ≤ {THETA_EXACT_MAX_N}, got {n}"
        )));
    }
    let n_edges = ball_edges(n).len();
    let pivotal: f64 = (0..n_edges)
        .into_par_iter()
        .map(|e| {
            let forced_open = theta_transfer(n, &|i| {
                if i == e {
                    (1.0, 0.0)
                } else {
                    (p, 1.0 - p)
                }
            });
            let forced_closed = theta_transfer(n, &|i| {
                if i == e {
                    (0.0, 1.0)
                } else {
                    (p, 1.0 - p)
                }
            });
            forced_open - forced_closed
        })
        .sum();
    Ok(pivotal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_extremes_and_determinism() {
        let lat = Lattice::build_box(2, true).unwrap();
        let mut rng = crate::rng::root_rng(1);
        assert!(sample_config(&lat, 0.0, &mut rng).unwrap().bits().iter().all(|&b| !b));
        assert!(sample_config(&lat, 1.0, &mut rng).unwrap().bits().iter().all(|&b| b));
        assert!(sample_config(&lat, 1.5, &mut rng).is_err());
        let a = sample_config(&lat, 0.5, &mut crate::rng::root_rng(7)).unwrap();
        let b = sample_config(&lat, 0.5, &mut crate::rng::root_rng(7)).unwrap();
        assert_eq!(a.bits(), b.bits());
    }

    #[test]
    fn shared_uniforms_give_monotone_coupling() {
        let lat = Lattice::build_box(3, true).unwrap();
        for seed in 0..50 {
            let lo = sample_config(&lat, 0.3, &mut crate::rng::root_rng(seed)).unwrap();
            let hi = sample_config(&lat, 0.7, &mut crate::rng::root_rng(seed)).unwrap();
            for (a, b) in lo.bits().iter().zip(hi.bits()) {
                assert!(!a || *b, "open at p=0.3 must stay open at p=0.7");
            }
        }
    }

    #[test]
    fn dual_is_an_involution_and_complements() {
        let lat = Lattice::build_box(2, true).unwrap();
        let cfg = sample_config(&lat, 0.4, &mut crate::rng::root_rng(3)).unwrap();
        let dual = dual_config(&cfg).unwrap();
        assert_eq!(dual.layer(), Layer::Dual);
        assert_eq!(cfg.open_count() + dual.open_count(), lat.n_sites());
        let back = dual_config(&dual).unwrap();
        assert_eq!(back.bits(), cfg.bits());
        assert_eq!(back.layer(), Layer::Primal);
    }

    #[test]
    fn crossing_extremes() {
        let lat = Lattice::build_box(2, true).unwrap();
        let all_open = EdgeConfig::from_bits(&lat, Layer::Primal, vec![true; 13]).unwrap();
        let all_closed = EdgeConfig::from_bits(&lat, Layer::Primal, vec![false; 13]).unwrap();
        let spec = CrossingSpec::full(Direction::LeftRight);
        assert!(has_crossing(&all_open, &spec).unwrap());
        assert!(!has_crossing(&all_closed, &spec).unwrap());
    }

    #[test]
    fn exhaustive_duality_dichotomy_small_boxes() {
        // For every configuration: primal LR crossing XOR dual TB crossing.
        for n in [1i64, 2] {
            let lat = Lattice::build_box(n, true).unwrap();
            let m = lat.n_sites();
            let lr = CrossingSpec::full(Direction::LeftRight);
            let tb = CrossingSpec::full(Direction::TopBottom);
            for code in 0u64..(1 << m) {
                let bits: Vec<bool> = (0..m).map(|i| (code >> i) & 1 == 1).collect();
                let cfg = EdgeConfig::from_bits(&lat, Layer::Primal, bits).unwrap();
                let dual = dual_config(&cfg).unwrap();
                let a = has_crossing(&cfg, &lr).unwrap();
                let b = has_crossing(&dual, &tb).unwrap();
                assert!(a ^ b, "config {code} at N={n}: primal {a}, dual {b}");
            }
        }
    }

    #[test]
    fn coefficient_level_duality() {
        // Counting both events per open count k: lr[k] + tb[k] = C(m, k).
        let counts = crossing_counts(2).unwrap();
        for k in 0..=counts.m {
            let total = BigUint::from(counts.lr_primal[k]) + BigUint::from(counts.tb_dual[k]);
            assert_eq!(total, binomial(counts.m, k), "k = {k}");
        }
    }

    #[test]
    fn crossing_probability_is_exactly_half_at_half() {
        for n in [1i64, 2] {
            let counts = crossing_counts(n).unwrap();
            let half = Ratio::new(BigInt::from(1), BigInt::from(2));
            assert_eq!(
                counts.eval_lr(half),
                Ratio::new(BigInt::from(1), BigInt::from(2)),
                "N = {n}"
            );
        }
    }

    #[test]
    fn exact_duality_identity_at_asymmetric_p() {
        // P_p(LR primal) + P_{p}(TB dual) = 1 exactly, any rational p.
        let counts = crossing_counts(2).unwrap();
        let p = Ratio::new(BigInt::from(3), BigInt::from(10));
        let sum = counts.eval_lr(p.clone()) + counts.eval_tb_dual(p);
        assert_eq!(sum, Ratio::from_integer(BigInt::one()));
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let exact = crossing_probability(2, 0.45, Mode::Exact).unwrap();
        let mc = crossing_probability(
            2,
            0.45,
            Mode::MonteCarlo {
                replicas: 20_000,
                seed: 20260825,
            },
        )
        .unwrap();
        assert!(
            (mc.value - exact.value).abs() < 4.0 * mc.stderr,
            "MC {} ± {} vs exact {}",
            mc.value,
            mc.stderr,
            exact.value
        );
    }

    #[test]
    fn shape_region_covering_the_box_matches_full() {
        let lat = Lattice::build_box(2, true).unwrap();
        let cfg = sample_config(&lat, 0.5, &mut crate::rng::root_rng(9)).unwrap();
        let square = Region::Shape(vec![(-1.5, -1.5), (1.5, -1.5), (1.5, 1.5), (-1.5, 1.5)]);
        let full = CrossingSpec::full(Direction::LeftRight);
        let shaped = CrossingSpec {
            direction: Direction::LeftRight,
            region: square,
        };
        assert_eq!(
            has_crossing(&cfg, &full).unwrap(),
            has_crossing(&cfg, &shaped).unwrap()
        );
        // A polygon away from the lattice has no edges to cross.
        let far = CrossingSpec {
            direction: Direction::LeftRight,
            region: Region::Shape(vec![(5.0, 5.0), (6.0, 5.0), (6.0, 6.0)]),
        };
        assert!(has_crossing(&cfg, &far).is_err());
    }

    #[test]
    fn ball_edge_counts() {
        // The ℓ¹ ball of radius n has 4n² edges.
        for n in 1..=6 {
            assert_eq!(ball_edges(n).len(), (4 * n * n) as usize, "n = {n}");
        }
    }

    #[test]
    fn theta_radius_one_closed_form() {
        // θ_1(p) = 1 − (1−p)⁴: any open edge at the origin reaches ∂Λ_1.
        for p in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let t = theta_exact(1, p).unwrap();
            assert_relative_eq!(t, 1.0 - (1.0 - p).powi(4), epsilon = 1e-12);
        }
    }

    #[test]
    fn theta_transfer_matches_brute_force_at_radius_two() {
        // 16 edges at n=2: brute force over 2^16 configurations.
        let edges = ball_edges(2);
        let mut index: HashMap<Site, usize> = HashMap::new();
        for &(a, b) in &edges {
            for s in [a, b] {
                let next = index.len();
                index.entry(s).or_insert(next);
            }
        }
        let origin = index[&Site::new(0, 0)];
        let p: f64 = 0.37;
        let mut brute = 0.0;
        let mut uf = crate::util::UnionFind::new(index.len() + 1);
        let bnode = index.len();
        for code in 0u32..(1 << 16) {
            uf.reset();
            let k = code.count_ones();
            for (s, &i) in &index {
                if s.u1.abs() + s.u2.abs() == 2 {
                    uf.union(i, bnode);
                }
            }
            for (e, &(a, b)) in edges.iter().enumerate() {
                if (code >> e) & 1 == 1 {
                    uf.union(index[&a], index[&b]);
                }
            }
            if uf.connected(origin, bnode) {
                brute += p.powi(k as i32) * (1.0 - p).powi(16 - k as i32);
            }
        }
        let t = theta_exact(2, p).unwrap();
        assert_relative_eq!(t, brute, epsilon = 1e-12);
    }

    #[test]
    fn theta_monotone_in_p_and_decreasing_in_n() {
        let ps = [0.1, 0.3, 0.5, 0.7, 0.9];
        for w in ps.windows(2) {
            assert!(theta_exact(3, w[0]).unwrap() <= theta_exact(3, w[1]).unwrap() + 1e-15);
        }
        for n in 1..4 {
            assert!(theta_exact(n, 0.4).unwrap() >= theta_exact(n + 1, 0.4).unwrap() - 1e-15);
        }
    }

    #[test]
    fn theta_monte_carlo_tracks_exact() {
        let exact = theta_exact(3, 0.6).unwrap();
        let mc = theta(
            3,
            0.6,
            Mode::MonteCarlo {
                replicas: 20_000,
                seed: 42,
            },
        )
        .unwrap();
        assert!(
            (mc.value - exact).abs() < 4.0 * mc.stderr,
            "MC {} ± {} vs exact {exact}",
            mc.value,
            mc.stderr
        );
    }

    #[test]
    fn russo_sum_matches_derivative() {
        // n=1: dθ/dp = 4(1−p)³.
        for p in [0.2, 0.5, 0.8] {
            let piv = russo_derivative(1, p).unwrap();
            assert_relative_eq!(piv, 4.0 * (1.0 - p).powi(3), epsilon = 1e-12);
        }
        // Pivotal sum equals the dual-number derivative of the transfer.
        for (n, p) in [(2i64, 0.35), (3, 0.5)] {
            let piv = russo_derivative(n, p).unwrap();
            let ad = theta_derivative(n, p).unwrap();
            assert_relative_eq!(piv, ad, epsilon = 1e-10);
        }
        // Finite differences as an independent oracle.
        let h = 1e-4;
        let fd = (theta_exact(2, 0.4 + h).unwrap() - theta_exact(2, 0.4 - h).unwrap()) / (2.0 * h);
        assert!((russo_derivative(2, 0.4).unwrap() - fd).abs() < 1e-6);
        // Nothing is pivotal at p=1 (every edge has a detour).
        assert_relative_eq!(russo_derivative(2, 1.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn capacity_errors() {
        assert_eq!(crossing_counts(4).unwrap_err().exit_code(), 3);
        assert_eq!(theta_exact(9, 0.5).unwrap_err().exit_code(), 3);
    }
}
