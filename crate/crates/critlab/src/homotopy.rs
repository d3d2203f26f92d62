//! Homotopy classes of loop families relative to puncture grids, and
//! the empirical ensemble distance built on them.
//!
//! # The construction
//!
//! A [`PunctureGrid`] places punctures at η·ℤ² ∩ [−η⁻¹, η⁻¹]², each
//! shifted by the fixed irrational jitter (√2/1000, √3/1000) so that
//! loops with rational vertex coordinates never touch a puncture. The
//! free-homotopy class of a closed polyline in the punctured plane is
//! read off as a [`CyclicWord`]: walking the loop once, every signed
//! transversal crossing of the downward ray hanging from puncture i
//! emits a letter x_i^{±1}; free and cyclic reduction then yield a
//! canonical representative. Two loops are freely homotopic in the
//! punctured plane iff their cyclic words agree (loop orientation is
//! preserved, as the medial-loop construction orients curves
//! canonically).
//!
//! Punctures in the same grid column would hang nested rays (the ray
//! from an upper puncture passes through the punctures below it), so
//! internally the whole picture — punctures and loops together — is
//! rotated by the fixed tiny angle −τ, τ = √7/2000, before rays are
//! dropped. Rotation is a homeomorphism of the plane fixing nothing
//! relevant: words are unchanged, and in the rotated frame every
//! puncture owns a genuinely disjoint ray.
//!
//! # Ensemble distance
//!
//! [`ensemble_distance`] compares two equal-size sets of loop
//! families. For each pair the cost is the *smallest* η in a dyadic
//! grid at which [`family_match`] holds (families agreeing at a fine
//! mesh are close); a minimum-cost perfect matching then averages
//! these costs. Matching is exact up to 256 samples and greedy beyond,
//! via [`crate::util::min_cost_assignment`].

use std::collections::BTreeSet;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::util::min_cost_assignment;

/// Puncture counts beyond this are refused (word extraction is
/// output-sensitive, but index construction is not free).
pub const PUNCTURE_CAPACITY: usize = 300_000;
/// Distance of a loop vertex to a ray below which the configuration
/// is declared degenerate and the grid is re-jittered.
pub const RAY_TOLERANCE: f64 = 1e-9;
/// Frame tilt (radians) applied to punctures and loops alike before
/// rays are dropped; see the module docs.
const FRAME_TILT: f64 = 0.001_322_875_655_532_295; // √7 / 2000

/// The default dyadic η grid used by the ensemble distance.
pub fn default_eta_grid() -> Vec<f64> {
    vec![0.5, 0.25, 0.125, 0.0625]
}

fn jitter() -> (f64, f64) {
    (2.0f64.sqrt() / 1000.0, 3.0f64.sqrt() / 1000.0)
}

fn rejitter_shift() -> (f64, f64) {
    (5.0f64.sqrt() / 1e6, 0.0)
}

// ---------------------------------------------------------------------------
// Loops
// ---------------------------------------------------------------------------

/// A closed polyline in the plane. The point list is stored closed:
/// the last point equals the first bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    points: Vec<(f64, f64)>,
}

impl Loop {
    /// Build a loop from a closed point list (first ≈ last within
    /// 1e−12; the stored closing point is snapped to the first).
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::invalid(format!(
                "a closed loop needs ≥ 4 points (closure included), got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::invalid("loop points must be finite"));
        }
        let first = points[0];
        let last = *points.last().expect("nonempty");
        if (first.0 - last.0).abs() > 1e-12 || (first.1 - last.1).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "loop is not closed: first {first:?} vs last {last:?}"
            )));
        }
        *points.last_mut().expect("nonempty") = first;
        Ok(Loop { points })
    }

    /// Regular n-gon approximation of a circle, counterclockwise.
    pub fn circle(center: (f64, f64), radius: f64, segments: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || segments < 3 {
            return Err(Error::invalid("circle needs radius > 0 and ≥ 3 segments"));
        }
        let mut pts: Vec<(f64, f64)> = (0..segments)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
                (center.0 + radius * a.cos(), center.1 + radius * a.sin())
            })
            .collect();
        pts.push(pts[0]);
        Loop::new(pts)
    }

    /// The closed point list (last point equals the first).
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// The loop with every point scaled by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Loop {
        Loop { points: self.points.iter().map(|&(x, y)| (s * x, s * y)).collect() }
    }

    /// The loop traversed from a different starting vertex (same
    /// curve, same orientation; used to test word invariance).
    pub fn restarted_at(&self, offset: usize) -> Loop {
        let open = &self.points[..self.points.len() - 1];
        let n = open.len();
        let mut pts: Vec<(f64, f64)> = (0..n).map(|k| open[(k + offset) % n]).collect();
        pts.push(pts[0]);
        Loop { points: pts }
    }
}

/// Rotate one loop by `theta` about the origin.
pub fn rotate_loop(l: &Loop, theta: f64) -> Loop {
    let (c, s) = (theta.cos(), theta.sin());
    Loop {
        points: l.points.iter().map(|&(x, y)| (c * x - s * y, s * x + c * y)).collect(),
    }
}

/// Rotate a whole family by `theta` about the origin.
pub fn rotate_family(family: &[Loop], theta: f64) -> Vec<Loop> {
    family.iter().map(|l| rotate_loop(l, theta)).collect()
}

// ---------------------------------------------------------------------------
// Puncture grids
// ---------------------------------------------------------------------------

/// The punctures η·ℤ² ∩ [−η⁻¹, η⁻¹]², jittered by (√2/1000, √3/1000).
///
/// A grid also remembers which way its rays hang: freshly built grids
/// drop rays straight down (plus the internal tilt), and
/// [`PunctureGrid::rotated`] rotates rays together with the punctures
/// so that rotation acts equivariantly on words.
#[derive(Debug, Clone)]
pub struct PunctureGrid {
    eta: f64,
    points: Vec<(f64, f64)>,
    ray_angle: f64,
}

impl PunctureGrid {
    /// The standard grid at mesh η ∈ (0, 1].
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("puncture mesh needs 0 < η ≤ 1, got {eta}")));
        }
        let reach = (1.0 / (eta * eta)).floor() as i64;
        let side = 2 * reach + 1;
        if (side * side) as usize > PUNCTURE_CAPACITY {
            return Err(Error::capacity(format!(
                "η = {eta} needs {} punctures; the cap is {PUNCTURE_CAPACITY}",
                side * side
            )));
        }
        let (jx, jy) = jitter();
        let mut points = Vec::with_capacity((side * side) as usize);
        for i in -reach..=reach {
            for j in -reach..=reach {
                points.push((eta * i as f64 + jx, eta * j as f64 + jy));
            }
        }
        Ok(PunctureGrid { eta, points, ray_angle: 0.0 })
    }

    /// A grid with explicit puncture positions (instrumentation and
    /// hand-built tests; `new` is the canonical constructor). Points
    /// must be finite and pairwise distinct.
    pub fn custom(eta: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!("mesh label must be > 0, got {eta}")));
        }
        if points.is_empty() {
            return Err(Error::invalid("a puncture grid needs at least one puncture"));
        }
        if points.len() > PUNCTURE_CAPACITY {
            return Err(Error::capacity(format!(
                "{} punctures exceed the cap {PUNCTURE_CAPACITY}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::invalid("puncture positions must be finite"));
        }
        for (a, pa) in points.iter().enumerate() {
            for pb in points.iter().skip(a + 1) {
                if (pa.0 - pb.0).abs() < 1e-9 && (pa.1 - pb.1).abs() < 1e-9 {
                    return Err(Error::invalid(format!("coincident punctures at {pa:?}")));
                }
            }
        }
        Ok(PunctureGrid { eta, points, ray_angle: 0.0 })
    }

    /// Mesh size η.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Puncture positions (jitter included).
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Number of punctures.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the grid is empty (never true for validated grids).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The grid with every puncture rotated by `theta` about the
    /// origin (for equivariance checks: words of rotated loops with
    /// respect to the rotated grid equal the original words).
    pub fn rotated(&self, theta: f64) -> PunctureGrid {
        let (c, s) = (theta.cos(), theta.sin());
        PunctureGrid {
            eta: self.eta,
            points: self.points.iter().map(|&(x, y)| (c * x - s * y, s * x + c * y)).collect(),
            ray_angle: self.ray_angle + theta,
        }
    }

    /// The direction rays hang in: 0 is straight down, and rotations
    /// of the grid carry their rays along.
    pub fn ray_angle(&self) -> f64 {
        self.ray_angle
    }

    /// The deterministic fallback grid: every puncture shifted by
    /// (√5·10⁻⁶, 0), used once when a ray grazes a loop vertex.
    fn rejittered(&self) -> PunctureGrid {
        let (dx, dy) = rejitter_shift();
        PunctureGrid {
            eta: self.eta,
            points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
            ray_angle: self.ray_angle,
        }
    }
}

// ---------------------------------------------------------------------------
// Cyclic words
// ---------------------------------------------------------------------------

/// A letter x_i^{±1}: (puncture index, sign).
pub type Letter = (u32, i8);

/// A freely and cyclically reduced word in the free group generated by
/// the punctures, stored in a canonical cyclic rotation so words
/// compare with `==`. Orientation is preserved: a loop and its
/// reversal are distinct classes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CyclicWord {
    letters: Vec<Letter>,
}

impl CyclicWord {
    /// Reduce a raw crossing sequence: free reduction, then cyclic
    /// reduction, then the lexicographically minimal rotation.
    pub fn reduce(raw: &[Letter]) -> CyclicWord {
        let mut stack: Vec<Letter> = Vec::with_capacity(raw.len());
        for &(g, s) in raw {
            debug_assert!(s == 1 || s == -1, "letter signs are ±1");
            if stack.last() == Some(&(g, -s)) {
                stack.pop();
            } else {
                stack.push((g, s));
            }
        }
        // Cyclic reduction: cancel matching first/last letters.
        let (mut lo, mut hi) = (0usize, stack.len());
        while hi - lo >= 2 {
            let (g, s) = stack[lo];
            if stack[hi - 1] == (g, -s) {
                lo += 1;
                hi -= 1;
            } else {
                break;
            }
        }
        let core = &stack[lo..hi];
        CyclicWord { letters: minimal_rotation(core) }
    }

    /// The empty (contractible) word.
    pub fn identity() -> CyclicWord {
        CyclicWord { letters: Vec::new() }
    }

    /// Canonical letters.
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Reduced length.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    /// Whether this is the trivial class.
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Exponent sum of generator `g` — the winding number around
    /// puncture `g` when the word came from a crossing sequence.
    pub fn exponent_sum(&self, g: u32) -> i64 {
        self.letters.iter().filter(|&&(h, _)| h == g).map(|&(_, s)| s as i64).sum()
    }
}

/// Lexicographically smallest cyclic rotation (words are short after
/// reduction, so the quadratic scan is fine).
fn minimal_rotation(w: &[Letter]) -> Vec<Letter> {
    if w.len() < 2 {
        return w.to_vec();
    }
    let n = w.len();
    let mut best = 0usize;
    for start in 1..n {
        for k in 0..n {
            let a = w[(start + k) % n];
            let b = w[(best + k) % n];
            if a < b {
                best = start;
                break;
            }
            if a > b {
                break;
            }
        }
    }
    (0..n).map(|k| w[(best + k) % n]).collect()
}

// ---------------------------------------------------------------------------
// Ray crossings
// ---------------------------------------------------------------------------

/// Signal that a vertex grazed a ray; callers re-jitter and retry.
#[derive(Debug, Clone, Copy)]
struct Degenerate;

/// Rotate a point by −angle, given (cos angle, sin angle): the frame
/// in which every ray hangs straight down.
fn frame_map(frame: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let (c, s) = frame;
    (c * p.0 + s * p.1, -s * p.0 + c * p.1)
}

/// Punctures in the tilted frame, sorted by x so each segment finds
/// the rays it straddles by binary search. The tilt makes all frame
/// x-coordinates distinct (same-column punctures separate by
/// η·sin τ ≈ η·1.3·10⁻³ ≫ the 1e−9 tolerance).
struct RayIndex {
    /// (frame x, frame y, original puncture index), sorted by x.
    cols: Vec<(f64, f64, u32)>,
    /// cos/sin of the frame rotation −(ray_angle + τ).
    frame: (f64, f64),
}

impl RayIndex {
    fn build(grid: &PunctureGrid) -> RayIndex {
        let angle = grid.ray_angle + FRAME_TILT;
        let frame = (angle.cos(), angle.sin());
        let mut cols: Vec<(f64, f64, u32)> = grid
            .points
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let (x, y) = frame_map(frame, p);
                (x, y, i as u32)
            })
            .collect();
        cols.sort_by(|a, b| a.0.total_cmp(&b.0));
        RayIndex { cols, frame }
    }

    /// Sorted slots with frame x in [lo, hi].
    fn slots_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.cols.partition_point(|c| c.0 < lo);
        let b = self.cols.partition_point(|c| c.0 <= hi);
        a..b
    }

    /// Ordered signed crossings of the downward rays by the loop.
    ///
    /// Letters are emitted in traversal order (segment index, then
    /// intersection parameter). A vertex within [`RAY_TOLERANCE`] of a
    /// ray — same frame x, at or below the puncture — aborts with
    /// [`Degenerate`], as does a crossing at the puncture's own height.
    fn crossings(&self, l: &Loop) -> std::result::Result<Vec<Letter>, Degenerate> {
        let pts: Vec<(f64, f64)> = l.points.iter().map(|&p| frame_map(self.frame, p)).collect();
        // Vertex-on-ray scan (the closing duplicate needs no re-check).
        for &(vx, vy) in &pts[..pts.len() - 1] {
            for slot in self.slots_in(vx - RAY_TOLERANCE, vx + RAY_TOLERANCE) {
                let (_, py, _) = self.cols[slot];
                if vy < py + RAY_TOLERANCE {
                    return Err(Degenerate);
                }
            }
        }
        let mut out: Vec<Letter> = Vec::new();
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if a.0 == b.0 {
                continue; // vertical in frame: parallel to every ray
            }
            let (lo, hi) = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
            let sign: i8 = if b.0 > a.0 { 1 } else { -1 };
            let mut hits: Vec<(f64, Letter)> = Vec::new();
            for slot in self.slots_in(lo, hi) {
                let (px, py, id) = self.cols[slot];
                // Strict straddle; grazes were caught by the vertex scan.
                if (a.0 - px) * (b.0 - px) >= 0.0 {
                    continue;
                }
                let t = (px - a.0) / (b.0 - a.0);
                let y_cross = a.1 + t * (b.1 - a.1);
                if (y_cross - py).abs() < RAY_TOLERANCE {
                    return Err(Degenerate); // crossing at puncture height
                }
                if y_cross < py {
                    hits.push((t, (id, sign)));
                }
            }
            hits.sort_by(|x, y| x.0.total_cmp(&y.0));
            out.extend(hits.into_iter().map(|(_, l)| l));
        }
        Ok(out)
    }
}

/// Run `f` against the grid's ray index, once re-jittered on a
/// degenerate grazing, and fail only if the fallback also grazes.
fn with_ray_index<T>(
    grid: &PunctureGrid,
    f: impl Fn(&RayIndex) -> std::result::Result<T, Degenerate>,
) -> Result<T> {
    if let Ok(t) = f(&RayIndex::build(grid)) {
        return Ok(t);
    }
    f(&RayIndex::build(&grid.rejittered())).map_err(|_| {
        Error::GeometricDegeneracy(
            "a loop vertex sits within 1e−9 of a puncture ray even after re-jittering"
                .to_string(),
        )
    })
}

// ---------------------------------------------------------------------------
// Words, winding, relevance
// ---------------------------------------------------------------------------

/// The unreduced crossing sequence of a loop (letters in traversal
/// order). Its per-generator exponent sums are exactly the winding
/// numbers; [`CyclicWord::reduce`] turns it into the homotopy class.
pub fn raw_crossing_word(l: &Loop, grid: &PunctureGrid) -> Result<Vec<Letter>> {
    with_ray_index(grid, |idx| idx.crossings(l))
}

/// The free-homotopy class of the loop in the punctured plane.
pub fn homotopy_word(l: &Loop, grid: &PunctureGrid) -> Result<CyclicWord> {
    Ok(CyclicWord::reduce(&raw_crossing_word(l, grid)?))
}

/// Winding number of the loop around every puncture.
pub fn winding_numbers(l: &Loop, grid: &PunctureGrid) -> Result<Vec<i64>> {
    let raw = raw_crossing_word(l, grid)?;
    let mut w = vec![0i64; grid.len()];
    for (g, s) in raw {
        w[g as usize] += s as i64;
    }
    Ok(w)
}

/// How many punctures the loop encloses (nonzero winding number).
pub fn encloses_count(l: &Loop, grid: &PunctureGrid) -> Result<usize> {
    Ok(winding_numbers(l, grid)?.iter().filter(|&&w| w != 0).count())
}

/// Indices of the *relevant* loops: those enclosing at least two
/// punctures but not all of them.
pub fn relevant_loops(family: &[Loop], grid: &PunctureGrid) -> Result<Vec<usize>> {
    let n = grid.len();
    let mut out = Vec::new();
    for (i, l) in family.iter().enumerate() {
        let k = encloses_count(l, grid)?;
        if k >= 2 && k < n {
            out.push(i);
        }
    }
    Ok(out)
}

/// Word set of one family against a prebuilt ray index.
fn family_words(
    family: &[Loop],
    idx: &RayIndex,
    n: usize,
) -> std::result::Result<BTreeSet<CyclicWord>, Degenerate> {
    let mut words = BTreeSet::new();
    for l in family {
        let raw = idx.crossings(l)?;
        let mut winding = vec![0i64; n];
        for &(g, s) in &raw {
            winding[g as usize] += s as i64;
        }
        let enclosed = winding.iter().filter(|&&w| w != 0).count();
        if enclosed >= 2 && enclosed < n {
            words.insert(CyclicWord::reduce(&raw));
        }
    }
    Ok(words)
}

/// The set of homotopy classes realized by the relevant loops.
pub fn relevant_word_set(family: &[Loop], grid: &PunctureGrid) -> Result<BTreeSet<CyclicWord>> {
    // One shared ray index (and one shared fallback) keeps every loop
    // of the family measured against the same punctures.
    with_ray_index(grid, |idx| family_words(family, idx, grid.len()))
}

/// Word sets of many families against one grid, sharing a single ray
/// index (and at most one re-jittered fallback) across all of them.
/// Families are processed in parallel.
pub fn word_sets(families: &[Vec<Loop>], grid: &PunctureGrid) -> Result<Vec<BTreeSet<CyclicWord>>> {
    let idx = RayIndex::build(grid);
    let fallback: OnceLock<RayIndex> = OnceLock::new();
    families
        .par_iter()
        .map(|fam| {
            if let Ok(w) = family_words(fam, &idx, grid.len()) {
                return Ok(w);
            }
            let fb = fallback.get_or_init(|| RayIndex::build(&grid.rejittered()));
            family_words(fam, fb, grid.len()).map_err(|_| {
                Error::GeometricDegeneracy(
                    "a loop vertex sits within 1e−9 of a puncture ray even after re-jittering"
                        .to_string(),
                )
            })
        })
        .collect()
}

/// Whether two families realize the same homotopy classes among their
/// relevant loops (set equality, hence symmetric by construction).
pub fn family_match(f: &[Loop], g: &[Loop], grid: &PunctureGrid) -> Result<bool> {
    Ok(relevant_word_set(f, grid)? == relevant_word_set(g, grid)?)
}

// ---------------------------------------------------------------------------
// Critical FK loop ensembles
// ---------------------------------------------------------------------------

/// Sample independent loop families from the critical FK–Ising measure
/// on the even box Λ_n, rescaled by 1/n so every family lives at unit
/// scale around the origin.
///
/// Family k is the final state of its own Swendsen–Wang chain, seeded
/// from `stream_rng(seed, k)` and started all-closed — families are
/// independent and the ensemble is reproducible from the seed alone.
/// Chains run in parallel.
pub fn critical_fk_loop_families(
    n: i64,
    count: usize,
    sweeps: usize,
    seed: u64,
) -> Result<Vec<Vec<Loop>>> {
    if count == 0 || sweeps == 0 {
        return Err(Error::invalid("ensemble needs ≥ 1 sample and ≥ 1 sweep"));
    }
    let lat = crate::lattice::Lattice::build_box(n, true)?;
    let (_, graph) = crate::fk::box_primal_graph(&lat)?;
    let params = crate::fk::FKParams::uniform(2.0, crate::fk::self_dual_point(2.0)?)?;
    let scale = 1.0 / n as f64;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::rng::stream_rng(seed, k as u64);
            let mut cfg = crate::fk::FkConfig::all_closed(graph.n_edges());
            for _ in 0..sweeps {
                crate::fk::swendsen_wang_sweep(&graph, &mut cfg, &params, &mut rng)?;
            }
            let edges = crate::percolation::EdgeConfig::from_bits(
                &lat,
                crate::percolation::Layer::Primal,
                cfg.open().to_vec(),
            )?;
            let loops = crate::fk::loop_representation(&edges)?;
            (0..loops.n_loops())
                .map(|i| Ok(Loop::new(loops.closed_points(i))?.scaled(scale)))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ensemble distance
// ---------------------------------------------------------------------------

/// Outcome of an ensemble comparison.
#[derive(Debug, Clone)]
pub struct DistanceReport {
    /// Average matched pair cost (the distance estimate).
    pub mean_cost: f64,
    /// Minimum-cost matching: `pairs[i] = j` matches A\[i\] to B\[j\].
    pub pairs: Vec<usize>,
    /// Cost of each matched pair: `costs[i]` is the cost of (A\[i\], B\[pairs\[i\]\]).
    pub costs: Vec<f64>,
    /// For each η (descending), the fraction of all n² sample pairs
    /// whose families match at that mesh.
    pub per_eta_match_rate: Vec<(f64, f64)>,
}

/// Wasserstein-style distance between two equal-size sets of loop
/// families.
///
/// Pair cost = the smallest η in `etas` at which the two families
/// match, or max(etas) if they never do. The reported distance is the
/// average cost under a minimum-cost perfect matching (exact ≤ 256
/// samples, greedy beyond) — an upper-bound estimator of the lifted
/// distance.
pub fn ensemble_distance(
    a: &[Vec<Loop>],
    b: &[Vec<Loop>],
    etas: &[f64],
) -> Result<DistanceReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ensemble distance needs nonempty sample sets"));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "sample sets must have equal size, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if etas.is_empty() || etas.iter().any(|&e| !(e.is_finite() && e > 0.0 && e <= 1.0)) {
        return Err(Error::invalid("η grid must be nonempty with entries in (0, 1]"));
    }
    let mut etas: Vec<f64> = etas.to_vec();
    etas.sort_by(|x, y| y.total_cmp(x)); // descending: coarse → fine
    etas.dedup();
    let coarsest = etas[0];
    let n = a.len();

    // Word sets per sample per mesh, computed once (one shared ray
    // index per mesh, families in parallel).
    let mut words_a: Vec<Vec<BTreeSet<CyclicWord>>> = vec![Vec::with_capacity(etas.len()); n];
    let mut words_b: Vec<Vec<BTreeSet<CyclicWord>>> = vec![Vec::with_capacity(etas.len()); n];
    for &eta in &etas {
        let grid = PunctureGrid::new(eta)?;
        for (slot, w) in words_a.iter_mut().zip(word_sets(a, &grid)?) {
            slot.push(w);
        }
        for (slot, w) in words_b.iter_mut().zip(word_sets(b, &grid)?) {
            slot.push(w);
        }
    }

    let mut match_counts = vec![0usize; etas.len()];
    let mut cost = vec![vec![coarsest; n]; n];
    for i in 0..n {
        for j in 0..n {
            // etas are descending, so scan from the back (finest) up.
            for (e, _) in etas.iter().enumerate() {
                if words_a[i][e] == words_b[j][e] {
                    match_counts[e] += 1;
                    cost[i][j] = etas[e]; // keeps shrinking as e grows finer
                }
            }
        }
    }
    let (pairs, total) = min_cost_assignment(&cost);
    let costs: Vec<f64> = pairs.iter().enumerate().map(|(i, &j)| cost[i][j]).collect();
    Ok(DistanceReport {
        mean_cost: total / n as f64,
        pairs,
        costs,
        per_eta_match_rate: etas
            .iter()
            .zip(&match_counts)
            .map(|(&e, &c)| (e, c as f64 / (n * n) as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(center: (f64, f64), half: f64) -> Loop {
        let (cx, cy) = center;
        Loop::new(vec![
            (cx - half, cy - half),
            (cx + half, cy - half),
            (cx + half, cy + half),
            (cx - half, cy + half),
            (cx - half, cy - half),
        ])
        .unwrap()
    }

    #[test]
    fn grid_construction_and_caps() {
        let g = PunctureGrid::new(0.5).unwrap();
        // reach = ⌊1/η²⌋ = 4 → 9×9 points.
        assert_eq!(g.len(), 81);
        assert!(!g.is_empty());
        let (jx, jy) = jitter();
        assert!(g.points().iter().any(|&(x, y)| {
            (x - jx).abs() < 1e-15 && (y - jy).abs() < 1e-15
        }));
        assert!(PunctureGrid::new(0.0).is_err());
        assert!(PunctureGrid::new(1.5).is_err());
        assert_eq!(PunctureGrid::new(0.01).unwrap_err().exit_code(), 3);
        assert!(PunctureGrid::custom(0.5, vec![]).is_err());
        assert!(PunctureGrid::custom(0.5, vec![(0.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn circle_words_windings_and_counts() {
        let g = PunctureGrid::new(0.5).unwrap();
        let center = g.points()[40]; // middle of the 9×9 grid
        let ccw = Loop::circle(center, 0.1, 48).unwrap();
        let w = homotopy_word(&ccw, &g).unwrap();
        assert_eq!(w.letters(), &[(40, 1)]);
        assert_eq!(encloses_count(&ccw, &g).unwrap(), 1);
        let winding = winding_numbers(&ccw, &g).unwrap();
        assert_eq!(winding[40], 1);
        assert_eq!(winding.iter().sum::<i64>(), 1);

        // Reversed orientation → inverse letter.
        let mut rev: Vec<(f64, f64)> = ccw.points().to_vec();
        rev.reverse();
        let cw = Loop::new(rev).unwrap();
        assert_eq!(homotopy_word(&cw, &g).unwrap().letters(), &[(40, -1)]);

        // A loop in a gap between punctures is contractible.
        let gap = (center.0 + 0.25, center.1 + 0.25);
        let tiny = Loop::circle(gap, 0.02, 16).unwrap();
        assert!(homotopy_word(&tiny, &g).unwrap().is_empty());
        assert_eq!(encloses_count(&tiny, &g).unwrap(), 0);

        // A box around everything encloses every puncture.
        let all = square((0.0, 0.0), 3.0);
        assert_eq!(encloses_count(&all, &g).unwrap(), g.len());
    }

    #[test]
    fn figure_eight_concatenates_words() {
        let g = PunctureGrid::custom(
            1.0,
            vec![(-1.0 + 0.0013, 0.0007), (1.0 + 0.0011, 0.0005)],
        )
        .unwrap();
        let left = Loop::new(vec![
            (0.0, 0.0),
            (0.0, -1.0),
            (-2.0, -1.0),
            (-2.0, 1.0),
            (0.0, 1.0),
            (0.0, 0.0),
        ])
        .unwrap();
        let right = Loop::new(vec![
            (0.0, 0.0),
            (0.0, 1.0),
            (2.0, 1.0),
            (2.0, -1.0),
            (0.0, -1.0),
            (0.0, 0.0),
        ])
        .unwrap();
        let raw_l = raw_crossing_word(&left, &g).unwrap();
        let raw_r = raw_crossing_word(&right, &g).unwrap();
        assert_eq!(CyclicWord::reduce(&raw_l).len(), 1);
        assert_eq!(CyclicWord::reduce(&raw_r).len(), 1);

        // The based concatenation of the two loops.
        let mut pts: Vec<(f64, f64)> = left.points()[..left.points().len() - 1].to_vec();
        pts.extend_from_slice(right.points());
        let eight = Loop::new(pts).unwrap();
        let raw_eight = raw_crossing_word(&eight, &g).unwrap();

        let mut concat = raw_l.clone();
        concat.extend_from_slice(&raw_r);
        assert_eq!(CyclicWord::reduce(&raw_eight), CyclicWord::reduce(&concat));
        assert_eq!(CyclicWord::reduce(&raw_eight).len(), 2);
    }

    #[test]
    fn word_is_invariant_under_reparametrization() {
        let g = PunctureGrid::new(0.5).unwrap();
        let center = g.points()[40];
        let base = Loop::circle(center, 0.6, 40).unwrap(); // encloses several
        let want = homotopy_word(&base, &g).unwrap();
        assert!(!want.is_empty());
        for offset in [1, 7, 23] {
            let re = base.restarted_at(offset);
            assert_eq!(homotopy_word(&re, &g).unwrap(), want, "offset {offset}");
        }
        // Denser sampling of the same curve.
        let dense = Loop::circle(center, 0.6, 160).unwrap();
        assert_eq!(homotopy_word(&dense, &g).unwrap(), want);
    }

    #[test]
    fn exponent_sums_equal_windings() {
        let g = PunctureGrid::new(0.5).unwrap();
        // A doubled circle: winds twice around its punctures.
        let center = g.points()[40];
        let mut pts = Vec::new();
        for lap in 0..2 {
            for k in 0..48 {
                let a = 2.0 * std::f64::consts::PI * (lap * 48 + k) as f64 / 48.0;
                let _ = lap;
                pts.push((center.0 + 0.1 * a.cos(), center.1 + 0.1 * a.sin()));
            }
        }
        pts.push(pts[0]);
        let double = Loop::new(pts).unwrap();
        let raw = raw_crossing_word(&double, &g).unwrap();
        let winding = winding_numbers(&double, &g).unwrap();
        assert_eq!(winding[40], 2);
        let mut sums = vec![0i64; g.len()];
        for (gen, s) in raw {
            sums[gen as usize] += s as i64;
        }
        assert_eq!(sums, winding);
        // The reduced word also keeps the exponent sum.
        let w = homotopy_word(&double, &g).unwrap();
        assert_eq!(w.exponent_sum(40), 2);
    }

    #[test]
    fn relevance_and_family_match() {
        let g = PunctureGrid::new(0.5).unwrap();
        let center = g.points()[40];
        let tiny = Loop::circle((center.0 + 0.25, center.1 + 0.25), 0.02, 16).unwrap();
        let medium = Loop::circle(center, 0.6, 64).unwrap(); // a few punctures
        let everything = square((0.0, 0.0), 3.0);
        assert!(encloses_count(&medium, &g).unwrap() >= 2);

        let family = vec![tiny.clone(), medium.clone(), everything.clone()];
        assert_eq!(relevant_loops(&family, &g).unwrap(), vec![1]);
        assert!(relevant_loops(&[tiny.clone()], &g).unwrap().is_empty());
        assert!(relevant_loops(&[everything.clone()], &g).unwrap().is_empty());

        // Matching ignores irrelevant loops entirely.
        let f = vec![medium.clone(), tiny.clone()];
        let h = vec![medium.clone(), everything.clone()];
        assert!(family_match(&f, &h, &g).unwrap());
        assert!(family_match(&h, &f, &g).unwrap()); // symmetry

        // An extra relevant class breaks the match, both ways.
        let other = Loop::circle(g.points()[22], 0.55, 64).unwrap();
        assert!(encloses_count(&other, &g).unwrap() >= 2);
        let bigger = vec![medium.clone(), other];
        assert!(!family_match(&f, &bigger, &g).unwrap());
        assert!(!family_match(&bigger, &f, &g).unwrap());

        // Translating a far-from-punctures loop by η/10 keeps its class.
        let nudged = Loop::new(
            medium.points().iter().map(|&(x, y)| (x + 0.05, y)).collect(),
        )
        .unwrap();
        assert!(family_match(&[medium], &[nudged], &g).unwrap());
    }

    #[test]
    fn rotation_acts_equivariantly() {
        let g = PunctureGrid::new(0.5).unwrap();
        let gamma = Loop::circle(g.points()[40], 0.6, 64).unwrap();
        let want = homotopy_word(&gamma, &g).unwrap();
        for theta in [0.7, std::f64::consts::FRAC_PI_2] {
            let rg = g.rotated(theta);
            let rl = rotate_loop(&gamma, theta);
            assert_eq!(homotopy_word(&rl, &rg).unwrap(), want, "θ = {theta}");
        }
        // θ = 0 is the bitwise identity.
        let same = rotate_family(&[gamma.clone()], 0.0);
        assert_eq!(same[0], gamma);
    }

    #[test]
    fn degenerate_rays_rejitter_then_fail() {
        // Rays hang in direction (sin τ, −cos τ); place a vertex
        // exactly on the ray, one unit below the puncture.
        let p = (0.5, 2.0);
        let on_ray = |base: (f64, f64), t: f64| {
            (base.0 + t * FRAME_TILT.sin(), base.1 - t * FRAME_TILT.cos())
        };
        let g = PunctureGrid::custom(1.0, vec![p]).unwrap();
        let v1 = on_ray(p, 1.0);
        let diamond = Loop::new(vec![v1, (1.5, 2.0), (0.5, 3.0), (-0.5, 2.0), v1]).unwrap();
        let w = homotopy_word(&diamond, &g).unwrap(); // re-jitter saves it
        assert_eq!(w.len(), 1);

        // A second vertex on the *re-jittered* ray defeats the
        // fallback too.
        let (dx, _) = rejitter_shift();
        let v2 = on_ray((p.0 + dx, p.1), 1.5);
        let trap = Loop::new(vec![v1, v2, (1.5, 2.0), (0.5, 3.0), (-0.5, 2.0), v1]).unwrap();
        let err = homotopy_word(&trap, &g).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ensemble_distance_identity_and_full_turn() {
        let g2 = PunctureGrid::new(0.5).unwrap();
        // Four families with genuinely different relevant classes.
        let mk = |slot: usize| -> Vec<Loop> {
            vec![Loop::circle(g2.points()[slot], 0.6, 64).unwrap()]
        };
        let a: Vec<Vec<Loop>> = vec![mk(40), mk(22), mk(58), mk(31)];
        let etas = default_eta_grid();

        let self_d = ensemble_distance(&a, &a, &etas).unwrap();
        // Every family matches itself at every mesh: the matching can
        // sit on the diagonal and pay the finest η for every pair.
        assert!((self_d.mean_cost - 0.0625).abs() < 1e-12);
        assert_eq!(self_d.per_eta_match_rate.len(), 4);
        let (coarsest_eta, coarsest_rate) = self_d.per_eta_match_rate[0];
        assert_eq!(coarsest_eta, 0.5);
        assert!(coarsest_rate >= 0.25); // at least the diagonal matches

        // A full turn is homotopically invisible.
        let turned: Vec<Vec<Loop>> =
            a.iter().map(|f| rotate_family(f, 2.0 * std::f64::consts::PI)).collect();
        let turn_d = ensemble_distance(&a, &turned, &etas).unwrap();
        assert!((turn_d.mean_cost - self_d.mean_cost).abs() < 1e-12);

        // Symmetry of the reported distance.
        let ba = ensemble_distance(&turned, &a, &etas).unwrap();
        assert!((ba.mean_cost - turn_d.mean_cost).abs() < 1e-12);

        assert!(ensemble_distance(&a, &a[..2].to_vec(), &etas).is_err());
        assert!(ensemble_distance(&a, &a, &[]).is_err());
        let empty: Vec<Vec<Loop>> = Vec::new();
        assert!(ensemble_distance(&empty, &empty, &etas).is_err());
    }

    #[test]
    fn fk_loop_families_feed_the_pipeline() {
        use crate::fk::{loop_representation, self_dual_point};
        use crate::lattice::Lattice;
        use crate::percolation::sample_config;

        // Four independent near-critical configurations on a small box.
        let lat = Lattice::build_box(6, true).unwrap();
        let p = self_dual_point(2.0).unwrap();
        let mut families: Vec<Vec<Loop>> = Vec::new();
        for replica in 0..4u64 {
            let mut rng = crate::rng::stream_rng(913, replica);
            let cfg = sample_config(&lat, p, &mut rng).unwrap();
            let loops = loop_representation(&cfg).unwrap();
            let fam: Vec<Loop> = (0..loops.n_loops())
                .map(|i| {
                    let pts = loops.closed_points(i);
                    Loop::new(pts).unwrap().scaled(1.0 / 6.0)
                })
                .collect();
            families.push(fam);
        }
        let etas = vec![0.5, 0.25];
        let d = ensemble_distance(&families, &families, &etas).unwrap();
        assert!((d.mean_cost - 0.25).abs() < 1e-12, "self distance {}", d.mean_cost);
        // Rates are within [0,1] and weakly decreasing with finer mesh.
        let rates: Vec<f64> = d.per_eta_match_rate.iter().map(|&(_, r)| r).collect();
        assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
    }
}
