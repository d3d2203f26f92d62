//! One-dimensional quadrature rules.
//!
//! Gauss–Legendre nodes drive the tensorized exact-enumeration oracle for
//! continuous spin spaces; the composite midpoint rule provides the very
//! fine grids needed to resolve sharply concentrated single-site
//! densities (double-well potentials at large quartic coupling).

/// Gauss–Legendre nodes and weights on `[a, b]`.
///
/// Nodes are computed by Newton iteration on the Legendre polynomial
/// P_n with the standard Chebyshev-based initial guesses; this is
/// accurate to machine precision for the modest orders (n ≤ 128) used
/// here. Returns `(nodes, weights)` with weights summing to `b − a`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots come in symmetric pairs; solve for the non-negative half.
    for i in 0..n.div_ceil(2) {
        // Initial guess: Chebyshev-like approximation to the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    // Affine map from [−1, 1] to [a, b].
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// Composite midpoint rule on `[a, b]` with `cells` equal cells.
///
/// Returns `(nodes, weights)`; each weight is the cell width. Midpoint is
/// preferred over higher-order rules here because the integrands it is
/// used on (Boltzmann densities) are evaluated as *probability masses*,
/// and strictly positive weights keep those masses nonnegative.
pub fn composite_midpoint(cells: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(cells >= 1, "need at least one cell");
    let h = (b - a) / cells as f64;
    let nodes = (0..cells).map(|i| a + (i as f64 + 0.5) * h).collect();
    let weights = vec![h; cells];
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// ∫ over [a,b] of f via a rule.
    fn integrate(rule: &(Vec<f64>, Vec<f64>), f: impl Fn(f64) -> f64) -> f64 {
        rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(*x)).sum()
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        // n-point Gauss–Legendre integrates degree ≤ 2n−1 exactly.
        let rule = gauss_legendre(5, -1.0, 1.0);
        // ∫_{-1}^{1} x^8 dx = 2/9, degree 8 ≤ 9.
        assert_relative_eq!(integrate(&rule, |x| x.powi(8)), 2.0 / 9.0, epsilon = 1e-13);
        // Odd powers vanish by symmetry.
        assert_relative_eq!(integrate(&rule, |x| x.powi(7)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_interval_length() {
        for n in [1, 2, 3, 8, 32, 64] {
            let (_, w) = gauss_legendre(n, -3.0, 5.0);
            assert_relative_eq!(w.iter().sum::<f64>(), 8.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn gauss_legendre_gaussian_moment() {
        // ∫ x² e^{−x²/2} dx / ∫ e^{−x²/2} dx = 1 over a wide window.
        let rule = gauss_legendre(64, -10.0, 10.0);
        let z = integrate(&rule, |x| (-0.5 * x * x).exp());
        let m2 = integrate(&rule, |x| x * x * (-0.5 * x * x).exp());
        assert_relative_eq!(m2 / z, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn midpoint_converges_on_smooth_function() {
        let rule = composite_midpoint(20_000, 0.0, std::f64::consts::PI);
        assert_relative_eq!(integrate(&rule, f64::sin), 2.0, epsilon = 1e-7);
    }
}
