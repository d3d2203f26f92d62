//! Isoradial embeddings ι_α of ℤ² and their row-swap dynamics.
//!
//! Given a sequence of angles α : ℤ → (−π/2, π/2) (held on a finite
//! window), the embedding moves row y to height c_y and shears it by
//! s_y, where
//!
//! ```text
//! s_y = Σ_{k ∈ (0, y]} sin(α_k),   c_y = Σ_{k ∈ (0, y]} cos(α_k),
//! ι_α(x, y) = (x + s_y, c_y),
//! ```
//!
//! with the convention Σ_{(0,y]} = −Σ_{(y,0]} for y < 0 (so α_0 enters
//! the sums for negative rows). Every unit step of ℤ² embeds as a unit
//! vector — (1, 0) horizontally and (sin α_{y+1}, cos α_{y+1}) vertically
//! — so the embedded picture is a rhombic tiling: the "diamond graph".
//!
//! The sublattice of even sites (x + y even) with diagonal edges is the
//! isoradial graph L(α); odd sites give its dual L*(α). Each face of
//! L(α) is the quadrilateral with vertices o ± (1,0), o ± (0,1) around
//! an odd center o, and all four vertices lie at distance exactly 1 from
//! ι(o): every face is inscribed in a unit circle whose center is the
//! embedded dual vertex. [`check_isoradial`] verifies this numerically
//! via perpendicular-bisector circumcenters.
//!
//! [`swap_rows`] implements the elementary transposition T_j exchanging
//! α_j and α_{j+1}; chains of such swaps are the local dynamics that
//! deform one isoradial embedding into another.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::Site;

/// Angles within this distance of ±π/2 are rejected: the corresponding
/// rhombi are numerically flat.
pub const ANGLE_MARGIN: f64 = 0.01;

/// A finite window of the angle sequence α : ℤ → (−π/2, π/2).
#[derive(Clone, Debug, PartialEq)]
pub struct IsoradialSequence {
    lo: i64,
    angles: Vec<f64>,
}

impl IsoradialSequence {
    /// New sequence with indices `lo ..= lo + angles.len() − 1`.
    ///
    /// Every angle must satisfy |α| ≤ π/2 − [`ANGLE_MARGIN`].
    pub fn new(lo: i64, angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("angle window must be nonempty"));
        }
        let limit = std::f64::consts::FRAC_PI_2 - ANGLE_MARGIN;
        for (k, &a) in angles.iter().enumerate() {
            if !a.is_finite() || a.abs() > limit {
                return Err(Error::invalid(format!(
                    "angle at index {} is {a}, outside ±(π/2 − {ANGLE_MARGIN})",
                    lo + k as i64
                )));
            }
        }
        Ok(IsoradialSequence { lo, angles })
    }

    /// Constant sequence on `lo ..= hi`.
    pub fn constant(lo: i64, hi: i64, angle: f64) -> Result<Self> {
        if hi < lo {
            return Err(Error::invalid("empty index range"));
        }
        IsoradialSequence::new(lo, vec![angle; (hi - lo + 1) as usize])
    }

    /// Window as `(lo, hi)` inclusive.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.angles.len() as i64 - 1)
    }

    /// Angle at index k, if inside the window.
    pub fn get(&self, k: i64) -> Option<f64> {
        if k < self.lo {
            return None;
        }
        self.angles.get((k - self.lo) as usize).copied()
    }

    /// Partial sums (s_y, c_y) for a row y, with the sign convention for
    /// negative rows. Errors if a required index is missing.
    pub fn partial_sums(&self, y: i64) -> Result<(f64, f64)> {
        let (mut s, mut c) = (0.0, 0.0);
        if y > 0 {
            for k in 1..=y {
                let a = self
                    .get(k)
                    .ok_or_else(|| Error::invalid(format!("row {y} needs angle index {k}")))?;
                s += a.sin();
                c += a.cos();
            }
        } else {
            for k in (y + 1)..=0 {
                let a = self
                    .get(k)
                    .ok_or_else(|| Error::invalid(format!("row {y} needs angle index {k}")))?;
                s -= a.sin();
                c -= a.cos();
            }
        }
        Ok((s, c))
    }
}

/// The row-swap operator T_j: exchanges α_j and α_{j+1}, fixing all
/// other indices. An involution; errors when j or j+1 leaves the window.
pub fn swap_rows(alpha: &IsoradialSequence, j: i64) -> Result<IsoradialSequence> {
    let (lo, hi) = alpha.window();
    if j < lo || j + 1 > hi {
        return Err(Error::invalid(format!(
            "swap needs rows {j} and {} inside window [{lo}, {hi}]",
            j + 1
        )));
    }
    let mut angles = alpha.angles.clone();
    angles.swap((j - lo) as usize, (j - lo + 1) as usize);
    Ok(IsoradialSequence { lo: alpha.lo, angles })
}

/// An embedded window of the diamond graph with its inscribed faces.
#[derive(Clone, Debug)]
pub struct EmbeddedLattice {
    rows: (i64, i64),
    cols: (i64, i64),
    positions: HashMap<Site, (f64, f64)>,
    /// Faces in cyclic order (east, north, west, south vertex).
    faces: Vec<[Site; 4]>,
    /// Lattice center point of each face (a vertex of the other
    /// sublattice); its embedding is the face's designed circumcenter.
    centers: Vec<Site>,
}

impl EmbeddedLattice {
    /// Position of a site in the window.
    pub fn position(&self, s: Site) -> Option<(f64, f64)> {
        self.positions.get(&s).copied()
    }

    /// All embedded faces.
    pub fn faces(&self) -> &[[Site; 4]] {
        &self.faces
    }

    /// Face centers, aligned with [`faces`](Self::faces). Centers with
    /// even coordinate sum belong to L*(α) faces and odd ones to L(α).
    pub fn centers(&self) -> &[Site] {
        &self.centers
    }

    /// The window as ((row lo, row hi), (col lo, col hi)).
    pub fn extent(&self) -> ((i64, i64), (i64, i64)) {
        (self.rows, self.cols)
    }

    /// All unit edges of the embedded diamond graph.
    pub fn diamond_edges(&self) -> Vec<(Site, Site)> {
        let mut out = Vec::new();
        for (&s, _) in &self.positions {
            for t in [Site::new(s.u1 + 1, s.u2), Site::new(s.u1, s.u2 + 1)] {
                if self.positions.contains_key(&t) {
                    out.push((s, t));
                }
            }
        }
        out.sort();
        out
    }
}

/// Embed a rows×cols window of ℤ² under ι_α.
///
/// Face list contains every interior point of the window as a center:
/// odd centers give the faces of L(α), even centers those of L*(α); both
/// families are inscribed in unit circles.
pub fn isoradial_embed(
    alpha: &IsoradialSequence,
    rows: (i64, i64),
    cols: (i64, i64),
) -> Result<EmbeddedLattice> {
    let (rlo, rhi) = rows;
    let (clo, chi) = cols;
    if rhi < rlo || chi < clo {
        return Err(Error::invalid("empty embedding window"));
    }
    // Per-row partial sums (validates window coverage once per row).
    let mut row_sums = HashMap::new();
    for y in rlo..=rhi {
        row_sums.insert(y, alpha.partial_sums(y)?);
    }
    let mut positions = HashMap::new();
    for y in rlo..=rhi {
        let (s, c) = row_sums[&y];
        for x in clo..=chi {
            positions.insert(Site::new(x, y), (x as f64 + s, c));
        }
    }
    let mut faces = Vec::new();
    let mut centers = Vec::new();
    for y in (rlo + 1)..rhi {
        for x in (clo + 1)..chi {
            let o = Site::new(x, y);
            faces.push([
                Site::new(x + 1, y),
                Site::new(x, y + 1),
                Site::new(x - 1, y),
                Site::new(x, y - 1),
            ]);
            centers.push(o);
        }
    }
    Ok(EmbeddedLattice {
        rows,
        cols,
        positions,
        faces,
        centers,
    })
}

/// Circumcenter of three points via perpendicular bisectors.
fn circumcenter(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> Result<(f64, f64)> {
    // Solve |z−p|² = |z−q|² = |z−r|² as a 2×2 linear system.
    let (ax, ay) = (q.0 - p.0, q.1 - p.1);
    let (bx, by) = (r.0 - p.0, r.1 - p.1);
    let det = 2.0 * (ax * by - ay * bx);
    if det.abs() < 1e-12 {
        return Err(Error::GeometricDegeneracy(
            "collinear face vertices: no circumcircle".into(),
        ));
    }
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let ux = (by * a2 - ay * b2) / det;
    let uy = (ax * b2 - bx * a2) / det;
    Ok((p.0 + ux, p.1 + uy))
}

/// Result of an isoradiality check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoradialReport {
    /// Max over faces and vertices of |distance to circumcenter − 1|.
    pub max_deviation: f64,
    /// Whether `max_deviation ≤ tol`.
    pub pass: bool,
    /// Number of faces inspected.
    pub faces: usize,
}

/// Verify that every face is inscribed in a circle of radius 1.
///
/// For each face the circumcenter of three vertices is computed; the
/// deviation is the worst |distance − 1| over all *four* vertices, so a
/// non-cyclic quadrilateral cannot sneak through. Errors on degenerate
/// (collinear) faces and on windows with no faces at all.
pub fn check_isoradial(emb: &EmbeddedLattice, tol: f64) -> Result<IsoradialReport> {
    if emb.faces.is_empty() {
        return Err(Error::invalid(
            "embedding window has no interior faces to check",
        ));
    }
    let mut max_dev: f64 = 0.0;
    for quad in &emb.faces {
        let pts: Vec<(f64, f64)> = quad
            .iter()
            .map(|s| emb.positions[s])
            .collect();
        let c = circumcenter(pts[0], pts[1], pts[2])?;
        for p in &pts {
            let r = ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt();
            max_dev = max_dev.max((r - 1.0).abs());
        }
    }
    Ok(IsoradialReport {
        max_deviation: max_dev,
        pass: max_dev <= tol,
        faces: emb.faces.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn seq(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> IsoradialSequence {
        IsoradialSequence::new(lo, (lo..=hi).map(f).collect()).unwrap()
    }

    #[test]
    fn zero_angles_embed_identically() {
        let alpha = IsoradialSequence::constant(-3, 3, 0.0).unwrap();
        let emb = isoradial_embed(&alpha, (-2, 2), (-2, 2)).unwrap();
        for y in -2..=2 {
            for x in -2..=2 {
                let (px, py) = emb.position(Site::new(x, y)).unwrap();
                assert_eq!((px, py), (x as f64, y as f64));
            }
        }
        let rep = check_isoradial(&emb, 1e-12).unwrap();
        assert!(rep.pass, "identity embedding deviation {}", rep.max_deviation);
    }

    #[test]
    fn constant_pi_over_6_row_heights() {
        let alpha = IsoradialSequence::constant(0, 4, std::f64::consts::FRAC_PI_6).unwrap();
        // c_2 = 2·cos(π/6) = √3.
        let (_, c2) = alpha.partial_sums(2).unwrap();
        assert_relative_eq!(c2, 3.0f64.sqrt(), epsilon = 1e-14);
        let emb = isoradial_embed(&alpha, (0, 4), (0, 4)).unwrap();
        let rep = check_isoradial(&emb, 1e-9).unwrap();
        assert!(rep.pass, "deviation {}", rep.max_deviation);
    }

    #[test]
    fn single_nonzero_angle_shifts_upper_rows_only() {
        // α_1 = π/4, all other angles 0: rows y ≥ 1 shift rigidly by
        // (sin π/4, cos π/4 − 1) relative to the identity embedding.
        let a = std::f64::consts::FRAC_PI_4;
        let alpha = seq(-2, 3, |k| if k == 1 { a } else { 0.0 });
        let emb = isoradial_embed(&alpha, (-2, 3), (-1, 1)).unwrap();
        for y in -2..=0 {
            let (px, py) = emb.position(Site::new(0, y)).unwrap();
            assert_relative_eq!(px, 0.0, epsilon = 1e-14);
            assert_relative_eq!(py, y as f64, epsilon = 1e-14);
        }
        for y in 1..=3 {
            let (px, py) = emb.position(Site::new(0, y)).unwrap();
            assert_relative_eq!(px, a.sin(), epsilon = 1e-14);
            assert_relative_eq!(py, y as f64 + a.cos() - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn negative_row_sign_convention() {
        // s_{−1} = −sin α_0, c_{−1} = −cos α_0.
        let alpha = seq(-1, 1, |k| 0.1 * (k + 2) as f64); // α_0 = 0.2
        let (s, c) = alpha.partial_sums(-1).unwrap();
        assert_relative_eq!(s, -(0.2f64.sin()), epsilon = 1e-15);
        assert_relative_eq!(c, -(0.2f64.cos()), epsilon = 1e-15);
    }

    #[test]
    fn random_angle_windows_are_isoradial() {
        let mut rng = crate::rng::root_rng(42);
        for _ in 0..10 {
            let alpha = IsoradialSequence::new(
                -3,
                (0..8).map(|_| rng.gen_range(-1.2..1.2)).collect(),
            )
            .unwrap();
            let emb = isoradial_embed(&alpha, (-2, 4), (-3, 3)).unwrap();
            let rep = check_isoradial(&emb, 1e-9).unwrap();
            assert!(rep.pass, "deviation {}", rep.max_deviation);
        }
    }

    #[test]
    fn diamond_edges_have_unit_length() {
        let mut rng = crate::rng::root_rng(7);
        let alpha = IsoradialSequence::new(
            -2,
            (0..6).map(|_| rng.gen_range(-1.2..1.2)).collect(),
        )
        .unwrap();
        let emb = isoradial_embed(&alpha, (-1, 3), (-2, 2)).unwrap();
        for (s, t) in emb.diamond_edges() {
            let (ax, ay) = emb.position(s).unwrap();
            let (bx, by) = emb.position(t).unwrap();
            let len = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            assert!(
                (len - 1.0).abs() < 1e-12,
                "edge {s}-{t} has length {len}"
            );
        }
    }

    #[test]
    fn swap_rows_is_the_three_case_transposition() {
        // Constant sequences are fixed points.
        let alpha = IsoradialSequence::constant(0, 3, 0.3).unwrap();
        assert_eq!(swap_rows(&alpha, 1).unwrap(), alpha);
        // (0, π/6) at rows (1, 2) swaps to (π/6, 0).
        let alpha = IsoradialSequence::new(1, vec![0.0, std::f64::consts::FRAC_PI_6]).unwrap();
        let swapped = swap_rows(&alpha, 1).unwrap();
        assert_eq!(swapped.get(1), Some(std::f64::consts::FRAC_PI_6));
        assert_eq!(swapped.get(2), Some(0.0));
        // Involution on an arbitrary sequence.
        let alpha = seq(-2, 4, |k| 0.07 * k as f64);
        let twice = swap_rows(&swap_rows(&alpha, 0).unwrap(), 0).unwrap();
        assert_eq!(twice, alpha);
        // Boundary rows are rejected.
        let (lo, hi) = alpha.window();
        assert!(swap_rows(&alpha, hi).is_err());
        assert!(swap_rows(&alpha, lo - 1).is_err());
    }

    #[test]
    fn equal_permutations_from_different_swap_orders_agree() {
        let alpha = seq(0, 3, |k| 0.1 + 0.2 * k as f64);
        // Disjoint swaps commute: T_0 T_2 = T_2 T_0.
        let a = swap_rows(&swap_rows(&alpha, 0).unwrap(), 2).unwrap();
        let b = swap_rows(&swap_rows(&alpha, 2).unwrap(), 0).unwrap();
        assert_eq!(a, b);
        // Braid relation for value transpositions: T_0 T_1 T_0 = T_1 T_0 T_1.
        let l = swap_rows(&swap_rows(&swap_rows(&alpha, 0).unwrap(), 1).unwrap(), 0).unwrap();
        let r = swap_rows(&swap_rows(&swap_rows(&alpha, 1).unwrap(), 0).unwrap(), 1).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn near_flat_angles_are_rejected() {
        let bad = std::f64::consts::FRAC_PI_2 - 0.005;
        assert!(IsoradialSequence::new(0, vec![bad]).is_err());
        assert!(IsoradialSequence::new(0, vec![-bad]).is_err());
        assert!(IsoradialSequence::new(0, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn embedding_outside_window_errors() {
        let alpha = IsoradialSequence::constant(0, 2, 0.1).unwrap();
        // Row 4 needs α_3 and α_4, which are missing.
        assert!(isoradial_embed(&alpha, (0, 4), (0, 1)).is_err());
    }

    #[test]
    fn collinear_points_are_degenerate() {
        assert!(circumcenter((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)).is_err());
    }
}
