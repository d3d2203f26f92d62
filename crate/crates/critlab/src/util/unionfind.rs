//! Disjoint-set union with path compression and union by size.
//!
//! This is the connectivity workhorse for percolation crossings, FK
//! cluster counting, and Edwards–Sokal coloring. `reset` lets hot loops
//! (exhaustive enumeration over millions of configurations) reuse one
//! allocation.

/// Disjoint-set forest over `0..len`.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    components: usize,
}

impl UnionFind {
    /// New forest of `n` singletons.
    pub fn new(n: usize) -> Self {
        assert!(n < u32::MAX as usize, "union-find index space exhausted");
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Whether the forest is empty.
    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Re-initialize to all-singletons without reallocating.
    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
        self.components = self.parent.len();
    }

    /// Re-initialize to a copy of `template` (same length) without
    /// reallocating — the fast path for enumerations that share a fixed
    /// set of pre-merged nodes.
    pub fn reset_from(&mut self, template: &UnionFind) {
        debug_assert_eq!(self.parent.len(), template.parent.len());
        self.parent.copy_from_slice(&template.parent);
        self.size.copy_from_slice(&template.size);
        self.components = template.components;
    }

    /// Representative of `x`'s component (with path halving).
    pub fn find(&mut self, mut x: usize) -> usize {
        loop {
            let p = self.parent[x] as usize;
            if p == x {
                return x;
            }
            let gp = self.parent[p];
            self.parent[x] = gp;
            x = gp as usize;
        }
    }

    /// Merge the components of `a` and `b`; returns true if they were
    /// previously distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    /// Whether `a` and `b` share a component.
    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Current number of components (counting singletons).
    pub fn components(&self) -> usize {
        self.components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unions_merge_and_count() {
        let mut uf = UnionFind::new(5);
        assert_eq!(uf.components(), 5);
        assert!(uf.union(0, 1));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 2), "second merge of same component");
        assert_eq!(uf.components(), 3);
        assert!(uf.connected(0, 2));
        assert!(!uf.connected(0, 3));
    }

    #[test]
    fn reset_restores_singletons() {
        let mut uf = UnionFind::new(4);
        uf.union(0, 3);
        uf.reset();
        assert_eq!(uf.components(), 4);
        assert!(!uf.connected(0, 3));
    }

    #[test]
    fn spanning_tree_gives_one_component() {
        let mut uf = UnionFind::new(8);
        for i in 1..8 {
            uf.union(i - 1, i);
        }
        assert_eq!(uf.components(), 1);
    }
}
