//! The six-vertex model and its row transfer matrix.
//!
//! Each vertex of a rectangular patch of Z² receives one of six tiles,
//! subject to the seam rule that adjacent tiles agree on the shared
//! edge orientation. Encoding vertical edges by "arrow up" flags and
//! horizontal edges by "arrow right" flags, a vertex with south, west,
//! north, east flags (s, w, n, e) is admissible iff s + w = n + e (two
//! arrows in, two out), which leaves exactly six local states. The two
//! states with s ≠ n are the c-type pair, and a configuration carries
//! weight c^{#c-tiles}.
//!
//! The row-to-row transfer operator V_N on a width-N cylinder
//! conserves the up-arrow count, so it is block diagonal with blocks
//! V_N^[n] of dimension C(N,n). Each block is symmetric, nonnegative,
//! and (for 0 < n < N, c > 0) irreducible with a strictly positive
//! diagonal, so power iteration converges to its Perron eigenpair.

use num::rational::BigRational;
use num::{BigInt, One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense block storage below this dimension; matrix-free above.
pub const DENSE_DIM_CAP: usize = 4096;

/// Row-width cap for transfer operators (the matrix-free apply sweeps
/// buffers of length 2^N).
pub const TRANSFER_ROW_CAPACITY: usize = 20;

/// Vertex cap for full tiling enumeration.
pub const TILING_VERTEX_CAPACITY: usize = 20;

/// Vertex cap for the exact rational trace (2^{W·H} row sequences).
pub const TRACE_VERTEX_CAPACITY: usize = 16;

/// Default relative tolerance for power iteration.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;

/// Default iteration cap for power iteration.
pub const DEFAULT_MAX_ITERS: usize = 20_000;

/// The weight c = √(2 + √q) coupling the six-vertex model to the
/// q-state random-cluster model at its self-dual point.
pub fn c_of_q(q: f64) -> Result<f64> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::invalid(format!("cluster weight must be ≥ 0, got {q}")));
    }
    Ok((2.0 + q.sqrt()).sqrt())
}

/// Binomial coefficient as usize (panics on overflow, fine for N ≤ 64).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Up/down flags on the N vertical edges of one row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrowRow {
    arrows: Vec<bool>,
}

impl ArrowRow {
    /// Wrap explicit flags (true = arrow up); length must be ≥ 1.
    pub fn new(arrows: Vec<bool>) -> Result<Self> {
        if arrows.is_empty() {
            return Err(Error::invalid("arrow row must have width ≥ 1"));
        }
        Ok(ArrowRow { arrows })
    }

    /// Decode a bitmask (bit i = edge i points up).
    pub fn from_mask(width: usize, mask: u32) -> Result<Self> {
        if width == 0 || width > TRANSFER_ROW_CAPACITY {
            return Err(Error::invalid(format!(
                "row width must be in 1..={TRANSFER_ROW_CAPACITY}, got {width}"
            )));
        }
        Ok(ArrowRow {
            arrows: (0..width).map(|i| mask >> i & 1 == 1).collect(),
        })
    }

    /// The flags.
    pub fn arrows(&self) -> &[bool] {
        &self.arrows
    }

    /// Encode as a bitmask.
    pub fn mask(&self) -> u32 {
        self.arrows
            .iter()
            .enumerate()
            .map(|(i, &b)| u32::from(b) << i)
            .sum()
    }

    /// Number of up arrows.
    pub fn up_count(&self) -> usize {
        self.arrows.iter().filter(|&&b| b).count()
    }

    /// Row width.
    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    /// Always false (width ≥ 1 by construction).
    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }
}

/// All up-arrow masks of width `n_row` with exactly `n_up` bits set,
/// ascending.
pub fn sector_basis(n_row: usize, n_up: usize) -> Vec<u32> {
    (0..1u32 << n_row)
        .filter(|m| m.count_ones() as usize == n_up)
        .collect()
}

/// Transfer-matrix entry V_N(out, in) on the width-`n_row` cylinder.
///
/// Summing the two horizontal completions: equal rows admit both
/// constant horizontal states (entry 2); otherwise exactly one
/// completion exists iff the disagreement signs alternate cyclically
/// (+ where the in-row has the up arrow, − where the out-row does),
/// and it carries one c-vertex per disagreement.
pub fn transfer_entry(n_row: usize, c: f64, out_mask: u32, in_mask: u32) -> f64 {
    if out_mask == in_mask {
        return 2.0;
    }
    let diff = out_mask ^ in_mask;
    let mut first = None;
    let mut prev = None;
    let mut k = 0i32;
    for i in 0..n_row {
        if diff >> i & 1 == 1 {
            let sign = in_mask >> i & 1 == 1;
            if first.is_none() {
                first = Some(sign);
            }
            if prev == Some(sign) {
                return 0.0;
            }
            prev = Some(sign);
            k += 1;
        }
    }
    // Cyclic adjacency: the last disagreement must differ from the
    // first (this also kills unequal up-counts).
    if prev == first {
        return 0.0;
    }
    c.powi(k)
}

/// One conserved-sector block V_N^[n] of the row transfer operator.
#[derive(Clone, Debug)]
pub struct TransferBlock {
    n_row: usize,
    n_up: usize,
    c: f64,
    basis: Vec<u32>,
    dense: Option<Vec<f64>>,
}

/// Build the block with dense storage below [`DENSE_DIM_CAP`].
pub fn transfer_block(n_row: usize, n_up: usize, c: f64) -> Result<TransferBlock> {
    let dim = binomial(n_row, n_up);
    transfer_block_with(n_row, n_up, c, dim < DENSE_DIM_CAP)
}

/// Build the block with explicit storage choice (dense or matrix-free).
pub fn transfer_block_with(n_row: usize, n_up: usize, c: f64, dense: bool) -> Result<TransferBlock> {
    if n_row == 0 || n_row > TRANSFER_ROW_CAPACITY {
        return Err(Error::capacity(format!(
            "row width must be in 1..={TRANSFER_ROW_CAPACITY}, got {n_row}"
        )));
    }
    if n_up > n_row {
        return Err(Error::invalid(format!(
            "up-arrow count {n_up} exceeds row width {n_row}"
        )));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::invalid(format!("weight c must be positive, got {c}")));
    }
    let basis = sector_basis(n_row, n_up);
    let dense = if dense {
        let dim = basis.len();
        let mut m = vec![0.0; dim * dim];
        m.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = transfer_entry(n_row, c, basis[i], basis[j]);
            }
        });
        Some(m)
    } else {
        None
    };
    Ok(TransferBlock {
        n_row,
        n_up,
        c,
        basis,
        dense,
    })
}

impl TransferBlock {
    /// Block dimension C(N, n).
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Row width N.
    pub fn n_row(&self) -> usize {
        self.n_row
    }

    /// Conserved up-arrow count n.
    pub fn n_up(&self) -> usize {
        self.n_up
    }

    /// Weight parameter c.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Sector basis masks, ascending.
    pub fn basis(&self) -> &[u32] {
        &self.basis
    }

    /// Whether entries are stored densely.
    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Entry (i, j) in the sector basis.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(m) => m[i * self.dim() + j],
            None => transfer_entry(self.n_row, self.c, self.basis[i], self.basis[j]),
        }
    }

    /// Apply the block to a sector vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(Error::invalid(format!(
                "vector length {} for block dimension {dim}",
                x.len()
            )));
        }
        match &self.dense {
            Some(m) => {
                let mut y = vec![0.0; dim];
                y.par_chunks_mut(256)
                    .enumerate()
                    .for_each(|(chunk, slice)| {
                        for (off, slot) in slice.iter_mut().enumerate() {
                            let i = chunk * 256 + off;
                            *slot = m[i * dim..(i + 1) * dim]
                                .iter()
                                .zip(x)
                                .map(|(a, b)| a * b)
                                .sum();
                        }
                    });
                Ok(y)
            }
            None => {
                let mut full = vec![0.0; 1 << self.n_row];
                for (i, &mask) in self.basis.iter().enumerate() {
                    full[mask as usize] = x[i];
                }
                let out = mpo_apply_full(self.n_row, self.c, &full);
                Ok(self.basis.iter().map(|&m| out[m as usize]).collect())
            }
        }
    }

    /// Whether the nonzero pattern is connected (symmetric matrix, so
    /// reachability is plain connectivity).
    pub fn is_irreducible(&self) -> bool {
        let dim = self.dim();
        if dim == 0 {
            return false;
        }
        let mut seen = vec![false; dim];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut found = 1;
        while let Some(i) = stack.pop() {
            for j in 0..dim {
                if !seen[j] && self.entry(i, j) != 0.0 {
                    seen[j] = true;
                    found += 1;
                    stack.push(j);
                }
            }
        }
        found == dim
    }
}

/// Apply the full transfer operator V_N to a vector on all 2^N row
/// states, sweeping the row as a product of local vertex operators
/// with the horizontal edge as a two-state bond (the cylinder closes
/// the bond into a trace). Cost O(N·2^N).
pub fn mpo_apply_full(n_row: usize, c: f64, x: &[f64]) -> Vec<f64> {
    let size = 1usize << n_row;
    assert_eq!(x.len(), size, "vector must cover all 2^N row states");
    let mut y = vec![0.0; size];
    for h0 in 0..2usize {
        // t[h] holds amplitudes with current bond state h; bits below
        // the sweep position are out-arrows, bits above are in-arrows.
        let mut t = [vec![0.0; size], vec![0.0; size]];
        t[h0].copy_from_slice(x);
        for i in 0..n_row {
            let bit = 1usize << i;
            let mut next = [vec![0.0; size], vec![0.0; size]];
            let (n0, rest) = next.split_at_mut(1);
            let (t0, t1) = (&t[0], &t[1]);
            // Pass-through (n = s, bond unchanged) has weight 1; the
            // c-vertices toggle the bond: 0→1 swaps in-arrow for none
            // (s=1, n=0), 1→0 emits the up arrow (s=0, n=1).
            n0[0].par_iter_mut().enumerate().for_each(|(m, slot)| {
                let mut v = t0[m];
                if m & bit != 0 {
                    v += c * t1[m ^ bit];
                }
                *slot = v;
            });
            rest[0].par_iter_mut().enumerate().for_each(|(m, slot)| {
                let mut v = t1[m];
                if m & bit == 0 {
                    v += c * t0[m ^ bit];
                }
                *slot = v;
            });
            t = next;
        }
        for (slot, v) in y.iter_mut().zip(&t[h0]) {
            *slot += v;
        }
    }
    y
}

/// The full 2^N × 2^N transfer matrix, row-major (small N only).
pub fn full_transfer_dense(n_row: usize, c: f64) -> Result<Vec<f64>> {
    if n_row == 0 || n_row > 12 {
        return Err(Error::capacity(format!(
            "full dense operator kept to widths 1..=12, got {n_row}"
        )));
    }
    let size = 1usize << n_row;
    let mut m = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            m[i * size + j] = transfer_entry(n_row, c, i as u32, j as u32);
        }
    }
    Ok(m)
}

/// Result of a Perron eigenpair extraction.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Leading eigenvalue.
    pub lambda: f64,
    /// Unit eigenvector (strictly positive for irreducible blocks).
    pub vector: Vec<f64>,
    /// Iterations used.
    pub iters: usize,
    /// Final relative residual ‖Vx − λx‖ / λ.
    pub residual: f64,
}

/// Power iteration from the uniform positive vector, stopping on the
/// Rayleigh-quotient residual ‖Vx − λx‖₂ / λ ≤ tol. The blocks are
/// nonnegative, irreducible, and have positive diagonal, so the
/// dominant eigenpair is simple and the iteration converges.
pub fn leading_eigen(block: &TransferBlock, tol: f64, max_iters: usize) -> Result<EigenResult> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be ≥ 1"));
    }
    let dim = block.dim();
    let mut x = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        let y = block.apply(&x)?;
        lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        if lambda <= 0.0 {
            return Err(Error::NumericRange(format!(
                "Rayleigh quotient {lambda} on a nonnegative block"
            )));
        }
        residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - lambda * a).powi(2))
            .sum::<f64>()
            .sqrt()
            / lambda;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (slot, v) in x.iter_mut().zip(&y) {
            *slot = v / norm;
        }
        if residual <= tol {
            return Ok(EigenResult {
                lambda,
                vector: x,
                iters: iter,
                residual,
            });
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "power iteration stalled at residual {residual:.3e} (λ ≈ {lambda:.12}) after {max_iters} iterations"
    )))
}

/// Perron eigenvalue ratios λ(V_N^[N/2−r]) / λ(V_N^[N/2]) for
/// r = 0..=r_max, computed block-parallel.
pub fn eigen_ratios(n_row: usize, r_max: usize, c: f64, tol: f64) -> Result<Vec<f64>> {
    if n_row % 2 != 0 || n_row == 0 {
        return Err(Error::invalid(format!("row width must be even, got {n_row}")));
    }
    if r_max > n_row / 2 {
        return Err(Error::invalid(format!(
            "r_max {r_max} exceeds N/2 = {}",
            n_row / 2
        )));
    }
    let lambdas: Vec<f64> = (0..=r_max)
        .into_par_iter()
        .map(|r| {
            let block = transfer_block(n_row, n_row / 2 - r, c)?;
            Ok(leading_eigen(&block, tol, DEFAULT_MAX_ITERS)?.lambda)
        })
        .collect::<Result<_>>()?;
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(r, l)| if r == 0 { 1.0 } else { l / lambdas[0] })
        .collect())
}

/// One of the six admissible vertex tiles. The letter groups the
/// classic pairing: A = source/sink-free saturation states, B =
/// straight passes, C = the turning pair that carries weight c.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tile {
    /// All four arrows outward-down-left: (s,w,n,e) = (0,0,0,0).
    A1,
    /// All four flags set: (1,1,1,1).
    A2,
    /// Vertical pass: (1,0,1,0).
    B1,
    /// Horizontal pass: (0,1,0,1).
    B2,
    /// Up-arrow absorbed, emitted east: (1,0,0,1). Weight c.
    C1,
    /// West arrow turned north: (0,1,1,0). Weight c.
    C2,
}

/// All six tiles in display order (the c-pair last).
pub const TILES: [Tile; 6] = [Tile::A1, Tile::A2, Tile::B1, Tile::B2, Tile::C1, Tile::C2];

impl Tile {
    /// Edge flags (s, w, n, e): vertical flags mean "arrow up",
    /// horizontal flags mean "arrow right".
    pub fn edges(self) -> (bool, bool, bool, bool) {
        match self {
            Tile::A1 => (false, false, false, false),
            Tile::A2 => (true, true, true, true),
            Tile::B1 => (true, false, true, false),
            Tile::B2 => (false, true, false, true),
            Tile::C1 => (true, false, false, true),
            Tile::C2 => (false, true, true, false),
        }
    }

    /// The admissible tile with these edge flags, if any.
    pub fn from_edges(s: bool, w: bool, n: bool, e: bool) -> Option<Tile> {
        TILES.into_iter().find(|t| t.edges() == (s, w, n, e))
    }

    /// Whether this is one of the two weight-c tiles.
    pub fn is_purple(self) -> bool {
        matches!(self, Tile::C1 | Tile::C2)
    }
}

/// A full tile assignment on a width × height patch, row-major with
/// row 0 at the bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileConfig {
    /// Patch width.
    pub width: usize,
    /// Patch height.
    pub height: usize,
    /// Tiles, index col + row·width.
    pub tiles: Vec<Tile>,
}

impl TileConfig {
    /// Tile at (row, col).
    pub fn tile(&self, row: usize, col: usize) -> Tile {
        self.tiles[row * self.width + col]
    }

    /// Number of weight-c tiles.
    pub fn purple_count(&self) -> usize {
        self.tiles.iter().filter(|t| t.is_purple()).count()
    }

    /// Whether every internal seam (and, if `wrap`, every wrap-around
    /// seam) carries a consistent edge orientation.
    pub fn is_admissible(&self, wrap: bool) -> bool {
        if self.tiles.len() != self.width * self.height {
            return false;
        }
        for row in 0..self.height {
            for col in 0..self.width {
                let (_, _, n, e) = self.tile(row, col).edges();
                if col + 1 < self.width {
                    let (_, w_right, _, _) = self.tile(row, col + 1).edges();
                    if e != w_right {
                        return false;
                    }
                } else if wrap {
                    let (_, w_first, _, _) = self.tile(row, 0).edges();
                    if e != w_first {
                        return false;
                    }
                }
                if row + 1 < self.height {
                    let (s_above, _, _, _) = self.tile(row + 1, col).edges();
                    if n != s_above {
                        return false;
                    }
                } else if wrap {
                    let (s_bottom, _, _, _) = self.tile(0, col).edges();
                    if n != s_bottom {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Boundary convention for tiling enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TilingBoundary {
    /// Dangling boundary edges are free.
    Free,
    /// Periodic in both directions (the trace convention).
    Torus,
    /// Explicit orientations on the dangling edges: `bottom`/`top`
    /// have `width` vertical flags, `west`/`east` have `height`
    /// horizontal flags.
    Fixed {
        /// Vertical flags below row 0.
        bottom: Vec<bool>,
        /// Vertical flags above the top row.
        top: Vec<bool>,
        /// Horizontal flags west of column 0.
        west: Vec<bool>,
        /// Horizontal flags east of the last column.
        east: Vec<bool>,
    },
}

/// Exact tiling census: total admissible count and the weighted sum
/// Σ c^{#purple} in rational arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingSummary {
    /// Number of admissible configurations.
    pub count: u64,
    /// Σ c^{#purple} over admissible configurations.
    pub weighted: BigRational,
    /// count split by purple-tile number (index = #purple).
    pub by_purple: Vec<u64>,
}

/// Enumerate all admissible configurations of a width × height patch
/// by a pruned sweep over edge orientations. Inconsistent fixed
/// boundaries yield count 0 (not an error).
pub fn enumerate_tilings(
    width: usize,
    height: usize,
    boundary: &TilingBoundary,
    c: &BigRational,
) -> Result<TilingSummary> {
    check_patch(width, height, boundary, TILING_VERTEX_CAPACITY)?;
    let mut counts = vec![0u64; width * height + 1];
    let mut svals = vec![false; width];
    let mut bottom_guess = vec![false; width];
    sweep_rows(
        width,
        height,
        boundary,
        0,
        &mut svals,
        &mut bottom_guess,
        0,
        &mut counts,
    );
    Ok(summarize(counts, c))
}

fn summarize(counts: Vec<u64>, c: &BigRational) -> TilingSummary {
    let mut weighted = BigRational::zero();
    let mut power = BigRational::one();
    for &k in &counts {
        weighted += BigRational::from_integer(BigInt::from(k)) * &power;
        power *= c;
    }
    TilingSummary {
        count: counts.iter().sum(),
        weighted,
        by_purple: counts,
    }
}

fn check_patch(
    width: usize,
    height: usize,
    boundary: &TilingBoundary,
    cap: usize,
) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("patch dimensions must be ≥ 1"));
    }
    if width * height > cap {
        return Err(Error::capacity(format!(
            "enumeration over {width}×{height} = {} vertices exceeds the cap {cap}",
            width * height
        )));
    }
    if let TilingBoundary::Fixed {
        bottom,
        top,
        west,
        east,
    } = boundary
    {
        if bottom.len() != width || top.len() != width || west.len() != height || east.len() != height
        {
            return Err(Error::invalid(
                "fixed boundary lengths must match the patch sides",
            ));
        }
    }
    Ok(())
}

/// Recursive sweep over vertex rows. `svals` carries the vertical
/// flags entering the current row; bottom-row flags are branched on
/// first touch (and recorded for the torus closure).
#[allow(clippy::too_many_arguments)]
fn sweep_rows(
    width: usize,
    height: usize,
    boundary: &TilingBoundary,
    row: usize,
    svals: &mut Vec<bool>,
    bottom_guess: &mut Vec<bool>,
    purple: usize,
    counts: &mut [u64],
) {
    if row == height {
        counts[purple] += 1;
        return;
    }
    let west_options: &[bool] = match boundary {
        TilingBoundary::Fixed { west, .. } => std::slice::from_ref(&west[row]),
        _ => &[false, true],
    };
    for &w0 in west_options {
        sweep_cols(
            width, height, boundary, row, 0, w0, w0, svals, bottom_guess, purple, counts,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep_cols(
    width: usize,
    height: usize,
    boundary: &TilingBoundary,
    row: usize,
    col: usize,
    w: bool,
    w0: bool,
    svals: &mut Vec<bool>,
    bottom_guess: &mut Vec<bool>,
    purple: usize,
    counts: &mut [u64],
) {
    if col == width {
        sweep_rows(
            width, height, boundary, row + 1, svals, bottom_guess, purple, counts,
        );
        return;
    }
    let s_options: &[bool] = if row == 0 {
        match boundary {
            TilingBoundary::Fixed { bottom, .. } => std::slice::from_ref(&bottom[col]),
            _ => &[false, true],
        }
    } else {
        std::slice::from_ref(&svals[col])
    };
    // Copy, since svals[col] is overwritten by the n-branch below.
    let s_options: Vec<bool> = s_options.to_vec();
    for s in s_options {
        if row == 0 {
            bottom_guess[col] = s;
        }
        for n in [false, true] {
            let e = i8::from(s) + i8::from(w) - i8::from(n);
            if !(0..=1).contains(&e) {
                continue;
            }
            let e = e == 1;
            // Top closure on the last row.
            if row + 1 == height {
                let ok = match boundary {
                    TilingBoundary::Free => true,
                    TilingBoundary::Torus => n == bottom_guess[col],
                    TilingBoundary::Fixed { top, .. } => n == top[col],
                };
                if !ok {
                    continue;
                }
            }
            // East closure on the last column.
            if col + 1 == width {
                let ok = match boundary {
                    TilingBoundary::Free => true,
                    TilingBoundary::Torus => e == w0,
                    TilingBoundary::Fixed { east, .. } => e == east[row],
                };
                if !ok {
                    continue;
                }
            }
            let saved = svals[col];
            svals[col] = n;
            sweep_cols(
                width,
                height,
                boundary,
                row,
                col + 1,
                e,
                w0,
                svals,
                bottom_guess,
                purple + usize::from(s != n),
                counts,
            );
            svals[col] = saved;
        }
    }
}

/// All admissible tile configurations of a tiny patch, by brute force
/// over the 6^{W·H} tile assignments (an independent cross-check of
/// [`enumerate_tilings`]). Capped at 6 vertices.
pub fn tile_configs(
    width: usize,
    height: usize,
    boundary: &TilingBoundary,
) -> Result<Vec<TileConfig>> {
    check_patch(width, height, boundary, 6)?;
    let cells = width * height;
    let mut out = Vec::new();
    let mut tiles = vec![Tile::A1; cells];
    let mut idx = vec![0usize; cells];
    'outer: loop {
        for (slot, &i) in tiles.iter_mut().zip(&idx) {
            *slot = TILES[i];
        }
        let cfg = TileConfig {
            width,
            height,
            tiles: tiles.clone(),
        };
        if admissible_with_boundary(&cfg, boundary) {
            out.push(cfg);
        }
        // Odometer over tile choices.
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < 6 {
                continue 'outer;
            }
            *slot = 0;
        }
        return Ok(out);
    }
}

fn admissible_with_boundary(cfg: &TileConfig, boundary: &TilingBoundary) -> bool {
    match boundary {
        TilingBoundary::Free => cfg.is_admissible(false),
        TilingBoundary::Torus => cfg.is_admissible(true),
        TilingBoundary::Fixed {
            bottom,
            top,
            west,
            east,
        } => {
            if !cfg.is_admissible(false) {
                return false;
            }
            for col in 0..cfg.width {
                let (s, _, _, _) = cfg.tile(0, col).edges();
                let (_, _, n, _) = cfg.tile(cfg.height - 1, col).edges();
                if s != bottom[col] || n != top[col] {
                    return false;
                }
            }
            for row in 0..cfg.height {
                let (_, w, _, _) = cfg.tile(row, 0).edges();
                let (_, _, _, e) = cfg.tile(row, cfg.width - 1).edges();
                if w != west[row] || e != east[row] {
                    return false;
                }
            }
            true
        }
    }
}

/// trace(V_W^H) in exact rational arithmetic for rational c, by
/// enumerating all 2^{W·H} cyclic row-state sequences with the entry
/// rule. Matches the torus tiling census.
pub fn transfer_trace_exact(width: usize, height: usize, c: &BigRational) -> Result<BigRational> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("patch dimensions must be ≥ 1"));
    }
    if width * height > TRACE_VERTEX_CAPACITY {
        return Err(Error::capacity(format!(
            "exact trace enumerates 2^{} sequences; vertex cap is {TRACE_VERTEX_CAPACITY}",
            width * height
        )));
    }
    // Rational entry: 2 on the diagonal, c^k on alternating
    // disagreements — recovered from the float rule at c = 1, where
    // admissible entries are exactly 1 or 2.
    let two = BigRational::from_integer(BigInt::from(2));
    let mut c_pow = vec![BigRational::one()];
    for _ in 0..width {
        let last = c_pow.last().expect("nonempty").clone();
        c_pow.push(last * c);
    }
    let entry = |out: u32, inn: u32| -> Option<BigRational> {
        if out == inn {
            return Some(two.clone());
        }
        match transfer_entry(width, 1.0, out, inn) {
            v if v == 0.0 => None,
            _ => Some(c_pow[(out ^ inn).count_ones() as usize].clone()),
        }
    };
    let mask = (1u64 << width) - 1;
    let mut trace = BigRational::zero();
    for seq in 0..1u64 << (width * height) {
        let row = |r: usize| -> u32 { (seq >> (r * width) & mask) as u32 };
        let mut term = BigRational::one();
        let mut dead = false;
        for r in 0..height {
            match entry(row((r + 1) % height), row(r)) {
                Some(v) => term *= v,
                None => {
                    dead = true;
                    break;
                }
            }
        }
        if !dead {
            trace += term;
        }
    }
    Ok(trace)
}
