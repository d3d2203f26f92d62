//! The OSSS inequality for monotonic measures.
//!
//! A probability measure P on {0,1}^E is monotonic when every
//! conditional P(w_e = 1 | revealed bits) is nondecreasing in the
//! revealed configuration. For such P, any increasing f : {0,1}^E →
//! [0,1], and any decision tree that reveals coordinates one by one
//! until f is determined,
//!
//!   Var(f) ≤ Σ_{e∈E} P(e ∈ Ê) · Cov(f, w_e),
//!
//! where Ê is the (random) set of revealed coordinates. This module
//! verifies the inequality by exact summation on small edge sets.

use crate::error::{Error, Result};
use crate::fk::{fk_exact, FKParams};
use crate::graph::Graph;
use crate::rng::Rng;
use rand::Rng as _;

/// Edge cap for cube measures and functionals (2^20 table entries).
pub const CUBE_EDGE_CAPACITY: usize = 20;

/// Edge cap for the exhaustive monotonicity check and for
/// [`osss_verify`] (which requires it as a precondition).
pub const OSSS_EDGE_CAPACITY: usize = 12;

/// A probability measure on {0,1}^E, stored as one weight per point
/// (index = edge bitmask).
#[derive(Clone, Debug, PartialEq)]
pub struct CubeMeasure {
    n_edges: usize,
    probs: Vec<f64>,
}

impl CubeMeasure {
    /// Wrap explicit point weights; must be nonnegative and sum to 1
    /// within 1e−12.
    pub fn new(n_edges: usize, probs: Vec<f64>) -> Result<Self> {
        if n_edges == 0 || n_edges > CUBE_EDGE_CAPACITY {
            return Err(Error::invalid(format!(
                "edge count must be in 1..={CUBE_EDGE_CAPACITY}, got {n_edges}"
            )));
        }
        if probs.len() != 1 << n_edges {
            return Err(Error::invalid(format!(
                "{} weights for 2^{n_edges} points",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("point weights must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(CubeMeasure { n_edges, probs })
    }

    /// Independent bits with P(w_e = 1) = ps[e].
    pub fn product(ps: &[f64]) -> Result<Self> {
        for &p in ps {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::invalid(format!("probability {p} outside [0,1]")));
            }
        }
        let n = ps.len();
        if n == 0 || n > CUBE_EDGE_CAPACITY {
            return Err(Error::invalid(format!(
                "edge count must be in 1..={CUBE_EDGE_CAPACITY}, got {n}"
            )));
        }
        let probs = (0..1usize << n)
            .map(|s| {
                (0..n)
                    .map(|e| if s >> e & 1 == 1 { ps[e] } else { 1.0 - ps[e] })
                    .product()
            })
            .collect();
        Ok(CubeMeasure { n_edges: n, probs })
    }

    /// The uniform measure (independent fair bits).
    pub fn uniform(n_edges: usize) -> Result<Self> {
        CubeMeasure::product(&vec![0.5; n_edges])
    }

    /// The random-cluster measure of a graph, bit e = edge e open.
    pub fn from_fk(graph: &Graph, params: &FKParams) -> Result<Self> {
        let m = fk_exact(graph, params)?;
        let probs = (0..m.n_states()).map(|s| m.prob(s)).collect();
        CubeMeasure::new(graph.n_edges(), probs)
    }

    /// Number of coordinates.
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Weight of one point (index = bitmask).
    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    /// E[g] for a function of the bitmask.
    pub fn expectation(&self, g: impl Fn(usize) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(s, &p)| p * g(s))
            .sum()
    }
}

/// A function {0,1}^E → [0,1], stored pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct BooleanFunctional {
    n_edges: usize,
    values: Vec<f64>,
}

impl BooleanFunctional {
    /// Wrap explicit values; all must lie in [0,1].
    pub fn new(n_edges: usize, values: Vec<f64>) -> Result<Self> {
        if n_edges == 0 || n_edges > CUBE_EDGE_CAPACITY {
            return Err(Error::invalid(format!(
                "edge count must be in 1..={CUBE_EDGE_CAPACITY}, got {n_edges}"
            )));
        }
        if values.len() != 1 << n_edges {
            return Err(Error::invalid(format!(
                "{} values for 2^{n_edges} points",
                values.len()
            )));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v) || v.is_nan()) {
            return Err(Error::invalid("functional values must lie in [0,1]"));
        }
        Ok(BooleanFunctional { n_edges, values })
    }

    /// Tabulate a predicate-style function.
    pub fn tabulate(n_edges: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        BooleanFunctional::new(n_edges, (0..1usize << n_edges).map(f).collect())
    }

    /// The coordinate function w ↦ w_e.
    pub fn coordinate(n_edges: usize, e: usize) -> Result<Self> {
        if e >= n_edges {
            return Err(Error::invalid(format!("edge {e} outside 0..{n_edges}")));
        }
        BooleanFunctional::tabulate(n_edges, |s| f64::from(s >> e & 1 == 1))
    }

    /// The constant function.
    pub fn constant(n_edges: usize, v: f64) -> Result<Self> {
        BooleanFunctional::new(n_edges, vec![v; 1 << n_edges])
    }

    /// Number of coordinates.
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Value at one point.
    pub fn value(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// Whether f takes a single value everywhere.
    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// Witness of a monotonicity failure: two comparable revealed
/// configurations on `revealed` whose conditionals for `edge` decrease.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneWitness {
    /// The coordinate whose conditional decreases.
    pub edge: usize,
    /// Bitmask of the revealed coordinates F.
    pub revealed: usize,
    /// The smaller assignment on F.
    pub low: usize,
    /// The larger assignment on F.
    pub high: usize,
    /// P(w_e = 1 | low).
    pub low_prob: f64,
    /// P(w_e = 1 | high).
    pub high_prob: f64,
}

/// Exhaustive monotonicity check: every conditional P(w_e = 1 | ω_F)
/// must be nondecreasing over comparable assignment pairs, for every
/// edge e and every F ⊆ E∖{e}. Zero-probability conditioning events
/// are vacuous and skipped. Returns `None` when monotone.
pub fn is_monotonic(m: &CubeMeasure) -> Result<Option<MonotoneWitness>> {
    let n = m.n_edges();
    if n > OSSS_EDGE_CAPACITY {
        return Err(Error::capacity(format!(
            "monotonicity check is exhaustive; edge cap is {OSSS_EDGE_CAPACITY}"
        )));
    }
    let size = 1usize << n;
    for e in 0..n {
        let e_bit = 1usize << e;
        let rest: Vec<usize> = (0..n).filter(|&f| f != e).collect();
        for f_sel in 0..1usize << rest.len() {
            let f_mask: usize = rest
                .iter()
                .enumerate()
                .filter(|&(i, _)| f_sel >> i & 1 == 1)
                .map(|(_, &f)| 1usize << f)
                .sum();
            // Conditional table over assignments x ⊆ f_mask.
            let mut joint = vec![0.0; size];
            let mut marg = vec![0.0; size];
            for s in 0..size {
                let x = s & f_mask;
                marg[x] += m.prob(s);
                if s & e_bit != 0 {
                    joint[x] += m.prob(s);
                }
            }
            // Compare all comparable pairs x ⊆ y.
            let mut y = f_mask;
            loop {
                if y != 0 && marg[y] > 0.0 {
                    let py = joint[y] / marg[y];
                    let mut x = y;
                    loop {
                        x = (x - 1) & y;
                        if marg[x] > 0.0 {
                            let px = joint[x] / marg[x];
                            if px > py + 1e-12 {
                                return Ok(Some(MonotoneWitness {
                                    edge: e,
                                    revealed: f_mask,
                                    low: x,
                                    high: y,
                                    low_prob: px,
                                    high_prob: py,
                                }));
                            }
                        }
                        if x == 0 {
                            break;
                        }
                    }
                }
                if y == 0 {
                    break;
                }
                y = (y - 1) & f_mask;
            }
        }
    }
    Ok(None)
}

/// Whether f is nondecreasing under the coordinatewise order, checked
/// over all covering pairs (sufficient by transitivity).
pub fn is_increasing(f: &BooleanFunctional) -> bool {
    let n = f.n_edges();
    for s in 0..1usize << n {
        for e in 0..n {
            if s >> e & 1 == 0 && f.value(s) > f.value(s | 1 << e) {
                return false;
            }
        }
    }
    true
}

/// A decision tree over coordinates: each internal node reveals one
/// coordinate and branches on its value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecisionTree {
    /// Stop revealing.
    Leaf,
    /// Reveal `edge`, then continue per observed bit.
    Query {
        /// The coordinate to reveal.
        edge: usize,
        /// Subtree when the bit is 0.
        on_zero: Box<DecisionTree>,
        /// Subtree when the bit is 1.
        on_one: Box<DecisionTree>,
    },
}

impl DecisionTree {
    /// A non-adaptive tree querying coordinates in the given order.
    pub fn fixed_order(order: &[usize]) -> Result<DecisionTree> {
        let mut tree = DecisionTree::Leaf;
        for &e in order.iter().rev() {
            tree = DecisionTree::Query {
                edge: e,
                on_zero: Box::new(tree.clone()),
                on_one: Box::new(tree),
            };
        }
        match tree {
            DecisionTree::Leaf => Err(Error::invalid(
                "a decision tree must reveal at least one coordinate",
            )),
            t => Ok(t),
        }
    }

    /// Validate edge ranges, the no-repeat rule along every path, and
    /// the fixed first query.
    pub fn validate(&self, n_edges: usize) -> Result<()> {
        fn walk(t: &DecisionTree, n: usize, path: usize) -> Result<()> {
            if let DecisionTree::Query { edge, on_zero, on_one } = t {
                if *edge >= n {
                    return Err(Error::invalid(format!("tree queries edge {edge} outside 0..{n}")));
                }
                let bit = 1usize << edge;
                if path & bit != 0 {
                    return Err(Error::invalid(format!(
                        "tree queries edge {edge} twice on one path"
                    )));
                }
                walk(on_zero, n, path | bit)?;
                walk(on_one, n, path | bit)?;
            }
            Ok(())
        }
        if matches!(self, DecisionTree::Leaf) {
            return Err(Error::invalid(
                "the first coordinate to reveal must be fixed: root cannot be a leaf",
            ));
        }
        walk(self, n_edges, 0)
    }

    /// A full adaptive tree choosing a uniformly random unqueried
    /// coordinate at every branch (always determines any functional).
    pub fn random_full(n_edges: usize, rng: &mut Rng) -> Result<DecisionTree> {
        if n_edges == 0 || n_edges > OSSS_EDGE_CAPACITY {
            return Err(Error::invalid(format!(
                "edge count must be in 1..={OSSS_EDGE_CAPACITY}, got {n_edges}"
            )));
        }
        fn build(remaining: &[usize], rng: &mut Rng) -> DecisionTree {
            if remaining.is_empty() {
                return DecisionTree::Leaf;
            }
            let pick = rng.gen_range(0..remaining.len());
            let edge = remaining[pick];
            let rest: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&e| e != edge)
                .collect();
            DecisionTree::Query {
                edge,
                on_zero: Box::new(build(&rest, rng)),
                on_one: Box::new(build(&rest, rng)),
            }
        }
        Ok(build(&(0..n_edges).collect::<Vec<_>>(), rng))
    }
}

/// Whether f is constant on the cylinder of points agreeing with `w`
/// on the revealed coordinates.
fn determined(f: &BooleanFunctional, w: usize, revealed: usize) -> bool {
    let free = !revealed & ((1usize << f.n_edges()) - 1);
    if free == 0 {
        return true;
    }
    let base = w & revealed;
    let first = f.value(base | free);
    let mut sub = free;
    loop {
        sub = (sub - 1) & free;
        if f.value(base | sub) != first {
            return false;
        }
        if sub == 0 {
            return true;
        }
    }
}

/// Run the tree on input `w`: reveal along the branches, stopping as
/// soon as f is determined on the revealed cylinder (checked after
/// every reveal, including the mandatory first). Returns f(w) and the
/// revealed set Ê as a bitmask. A leaf reached before determination
/// simply stops revealing — [`osss_verify`] rejects such trees.
pub fn run_tree(tree: &DecisionTree, f: &BooleanFunctional, w: usize) -> (f64, usize) {
    let mut revealed = 0usize;
    let mut node = tree;
    loop {
        match node {
            DecisionTree::Leaf => return (f.value(w), revealed),
            DecisionTree::Query { edge, on_zero, on_one } => {
                revealed |= 1 << edge;
                if determined(f, w, revealed) {
                    return (f.value(w), revealed);
                }
                node = if w >> edge & 1 == 1 { on_one } else { on_zero };
            }
        }
    }
}

/// Revealment probabilities P(e ∈ Ê) under the measure.
pub fn revealment(m: &CubeMeasure, f: &BooleanFunctional, tree: &DecisionTree) -> Vec<f64> {
    let n = m.n_edges();
    let mut out = vec![0.0; n];
    for w in 0..1usize << n {
        let p = m.prob(w);
        if p == 0.0 {
            continue;
        }
        let (_, revealed) = run_tree(tree, f, w);
        for (e, slot) in out.iter_mut().enumerate() {
            if revealed >> e & 1 == 1 {
                *slot += p;
            }
        }
    }
    out
}

/// Both sides of the inequality, exactly.
#[derive(Clone, Debug)]
pub struct OsssReport {
    /// Var(f).
    pub var: f64,
    /// Σ_e P(e ∈ Ê) Cov(f, w_e).
    pub rhs: f64,
    /// rhs − Var(f); the inequality says ≥ 0.
    pub slack: f64,
    /// P(e ∈ Ê) per edge.
    pub revealment: Vec<f64>,
    /// Cov(f, w_e) per edge.
    pub covariances: Vec<f64>,
}

/// Verify the inequality by exact summation over {0,1}^E.
///
/// Preconditions enforced: the measure is monotonic, f is increasing,
/// the tree is well-formed, and the tree determines f on every input.
pub fn osss_verify(
    m: &CubeMeasure,
    f: &BooleanFunctional,
    tree: &DecisionTree,
) -> Result<OsssReport> {
    let n = m.n_edges();
    if f.n_edges() != n {
        return Err(Error::invalid(format!(
            "functional on {} edges for a measure on {n}",
            f.n_edges()
        )));
    }
    tree.validate(n)?;
    if let Some(witness) = is_monotonic(m)? {
        return Err(Error::invalid(format!(
            "measure is not monotonic: P(w_{} = 1 | {:0width$b}) = {:.6} > {:.6} at the larger {:0width$b}",
            witness.edge,
            witness.low,
            witness.low_prob,
            witness.high_prob,
            witness.high,
            width = n
        )));
    }
    if !is_increasing(f) {
        return Err(Error::invalid("functional is not increasing"));
    }

    let mut e_f = 0.0;
    let mut e_f2 = 0.0;
    let mut e_w = vec![0.0; n];
    let mut e_fw = vec![0.0; n];
    let mut reveal = vec![0.0; n];
    for w in 0..1usize << n {
        let p = m.prob(w);
        let v = f.value(w);
        e_f += p * v;
        e_f2 += p * v * v;
        let (_, revealed) = run_tree(tree, f, w);
        if p > 0.0 && !determined(f, w, revealed) {
            return Err(Error::invalid(format!(
                "tree leaves f undetermined on input {w:0n$b} (revealed {revealed:0n$b})"
            )));
        }
        for e in 0..n {
            if w >> e & 1 == 1 {
                e_w[e] += p;
                e_fw[e] += p * v;
            }
            if revealed >> e & 1 == 1 {
                reveal[e] += p;
            }
        }
    }
    let var = e_f2 - e_f * e_f;
    let covariances: Vec<f64> = (0..n).map(|e| e_fw[e] - e_f * e_w[e]).collect();
    let rhs: f64 = reveal
        .iter()
        .zip(&covariances)
        .map(|(r, c)| r * c)
        .sum();
    Ok(OsssReport {
        var,
        rhs,
        slack: rhs - var,
        revealment: reveal,
        covariances,
    })
}

/// One randomized (measure, functional, tree) verification instance.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    /// A random-cluster measure (random graph, q ∈ [1,4], per-edge p).
    pub measure: CubeMeasure,
    /// A random increasing functional into [0,1].
    pub functional: BooleanFunctional,
    /// A random full adaptive tree.
    pub tree: DecisionTree,
}

/// Draw a random instance on `n_edges` coordinates. Measures are FK
/// measures (monotonic by construction for q ≥ 1); functionals are
/// random increasing maps; trees are full and adaptive.
pub fn random_instance(n_edges: usize, rng: &mut Rng) -> Result<RandomInstance> {
    if n_edges == 0 || n_edges > OSSS_EDGE_CAPACITY {
        return Err(Error::invalid(format!(
            "edge count must be in 1..={OSSS_EDGE_CAPACITY}, got {n_edges}"
        )));
    }
    // Random multigraph on ≤ n_edges + 1 vertices (no self-loops).
    let n_vertices = rng.gen_range(2..=n_edges + 1);
    let edges = (0..n_edges)
        .map(|_| {
            let a = rng.gen_range(0..n_vertices);
            let b = (a + rng.gen_range(1..n_vertices)) % n_vertices;
            (a, b)
        })
        .collect();
    let graph = Graph::new(n_vertices, edges)?;
    let q = rng.gen_range(1.0..=4.0);
    let ps = (0..n_edges).map(|_| rng.gen_range(0.05..0.95)).collect();
    let params = FKParams::per_edge(q, ps)?;
    let measure = CubeMeasure::from_fk(&graph, &params)?;

    // Random increasing functional: pointwise uniform values pushed up
    // the lattice by a running max (a max-zeta transform).
    let size = 1usize << n_edges;
    let mut values: Vec<f64> = match rng.gen_range(0..4u8) {
        0 => vec![rng.gen_range(0.0..=1.0); size],
        1 => {
            let e = rng.gen_range(0..n_edges);
            (0..size).map(|s| f64::from(s >> e & 1 == 1)).collect()
        }
        _ => (0..size).map(|_| rng.gen_range(0.0..=1.0)).collect(),
    };
    for e in 0..n_edges {
        for s in 0..size {
            if s >> e & 1 == 1 {
                values[s] = values[s].max(values[s ^ (1 << e)]);
            }
        }
    }
    let functional = BooleanFunctional::new(n_edges, values)?;
    let tree = DecisionTree::random_full(n_edges, rng)?;
    Ok(RandomInstance {
        measure,
        functional,
        tree,
    })
}
