//! Ordering of the `Q = N(N+1)/2` node pairs used by the coupled
//! second-moment system: all one-node pairs `(k,k)` first, then the
//! off-diagonal pairs `(k,l)`, `k < l`, in lexicographic order.

/// Bijection between unordered node pairs and row/column indices of the
/// `Q x Q` moment system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOrdering {
    n: usize,
}

impl PairOrdering {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of unordered pairs `Q = N(N+1)/2`.
    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Index of the unordered pair `{k, l}`.
    pub fn index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < self.n && l < self.n);
        if k == l {
            return k;
        }
        let (a, b) = if k < l { (k, l) } else { (l, k) };
        // off-diagonal block starts at n; rows of the pair triangle are
        // (0,1)..(0,n-1), (1,2)..(1,n-1), ...
        self.n + a * self.n - a * (a + 1) / 2 + (b - a - 1)
    }

    /// Pair `(k, l)` with `k <= l` at index `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.len());
        if i < self.n {
            return (i, i);
        }
        let mut rem = i - self.n;
        for a in 0..self.n {
            let row = self.n - a - 1;
            if rem < row {
                return (a, a + 1 + rem);
            }
            rem -= row;
        }
        unreachable!("index within Q")
    }

    /// All pairs in system order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |i| self.pair(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_matches_convention() {
        let ord = PairOrdering::new(3);
        assert_eq!(ord.len(), 6);
        let pairs: Vec<_> = ord.pairs().collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn index_and_pair_are_inverse() {
        for n in 1..8 {
            let ord = PairOrdering::new(n);
            for i in 0..ord.len() {
                let (k, l) = ord.pair(i);
                assert_eq!(ord.index(k, l), i);
                assert_eq!(ord.index(l, k), i);
            }
        }
    }
}
