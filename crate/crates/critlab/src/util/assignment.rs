//! Minimum-cost perfect matching (the assignment problem).
//!
//! The ensemble distance between loop families matches samples of one
//! ensemble to samples of another so as to minimize the average pair
//! cost. Instances up to 256×256 are solved exactly with the Hungarian
//! algorithm (Kuhn–Munkres in its O(n³) potentials form); larger
//! instances fall back to a deterministic greedy matching, which upper
//! bounds the optimum.

/// Size threshold up to which the exact Hungarian solver is used.
pub const EXACT_LIMIT: usize = 256;

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `(assignment, total_cost)` where `assignment[row] = column`.
/// Exact for `n ≤ EXACT_LIMIT`, greedy above.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let assignment = if n <= EXACT_LIMIT {
        hungarian(cost)
    } else {
        greedy(cost)
    };
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    (assignment, total)
}

/// O(n³) Hungarian algorithm with row/column potentials.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; p[j] = row currently matched to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path backwards.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Deterministic greedy matching: repeatedly take the cheapest unmatched
/// pair, ties broken by (row, column) order.
fn greedy(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|&(i1, j1), &(i2, j2)| {
        cost[i1][j1]
            .partial_cmp(&cost[i2][j2])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i1.cmp(&i2))
            .then(j1.cmp(&j2))
    });
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut assignment = vec![usize::MAX; n];
    let mut matched = 0;
    for (i, j) in pairs {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            assignment[i] = j;
            matched += 1;
            if matched == n {
                break;
            }
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_is_optimal_for_diagonal_dominance() {
        // Zero diagonal, positive off-diagonal: identity matching is optimal.
        let n = 6;
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let (a, total) = min_cost_assignment(&cost);
        assert_eq!(a, (0..n).collect::<Vec<_>>());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn solves_a_known_3x3_instance() {
        // Optimal assignment: 0→1 (2), 1→0 (3), 2→2 (4); total 9.
        let cost = vec![
            vec![8.0, 2.0, 5.0],
            vec![3.0, 9.0, 7.0],
            vec![6.0, 6.0, 4.0],
        ];
        let (a, total) = min_cost_assignment(&cost);
        assert_eq!(a, vec![1, 0, 2]);
        assert_relative_eq!(total, 9.0);
    }

    #[test]
    fn beats_or_ties_greedy_on_pseudorandom_instances() {
        // Deterministic LCG-filled matrices; the exact optimum can never
        // exceed the greedy value.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in [2usize, 5, 9, 17] {
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| next()).collect())
                .collect();
            let (_, exact) = min_cost_assignment(&cost);
            let ga = greedy(&cost);
            let gtotal: f64 = ga.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            assert!(
                exact <= gtotal + 1e-12,
                "exact {exact} worse than greedy {gtotal} at n={n}"
            );
        }
    }

    #[test]
    fn assignment_is_a_permutation() {
        let cost = vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 4.0, 6.0, 8.0],
            vec![3.0, 6.0, 9.0, 12.0],
            vec![4.0, 8.0, 12.0, 16.0],
        ];
        let (a, _) = min_cost_assignment(&cost);
        let mut seen = vec![false; 4];
        for &j in &a {
            assert!(!seen[j], "column used twice");
            seen[j] = true;
        }
    }
}
