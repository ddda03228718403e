//! Binary indexed tree over nonnegative channel weights, used for
//! proportional channel selection in `O(log n)`.

use rand::Rng;

#[derive(Debug, Clone)]
pub struct RateTree {
    weights: Vec<f64>,
    tree: Vec<f64>,
    top: usize,
}

impl RateTree {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        let mut t = Self {
            weights,
            tree: vec![0.0; n + 1],
            top,
        };
        t.rebuild();
        t
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Recomputes every internal node from the stored weights in `O(n)`.
    pub fn rebuild(&mut self) {
        let n = self.weights.len();
        self.tree[1..].copy_from_slice(&self.weights);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn set(&mut self, i: usize, w: f64) {
        debug_assert!(w >= 0.0 && w.is_finite(), "channel weight {w}");
        let delta = w - self.weights[i];
        self.weights[i] = w;
        let n = self.weights.len();
        let mut k = i + 1;
        while k <= n {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Sum of weights `0..i`.
    pub fn prefix(&self, i: usize) -> f64 {
        let mut k = i;
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.weights.len()).max(0.0)
    }

    /// Index `i` with `prefix(i) <= target < prefix(i + 1)`, clamped to the
    /// last index when rounding pushes `target` past the end.
    pub fn find(&self, target: f64) -> usize {
        let n = self.weights.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    /// Draws a channel with probability proportional to its weight.
    ///
    /// Returns `None` when the total weight is zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return None;
        }
        loop {
            let i = self.find(rng.random::<f64>() * total);
            if self.weights[i] > 0.0 {
                return Some(i);
            }
        }
    }

    /// Largest relative deviation between the incremental total and a fresh
    /// summation of the stored weights.
    pub fn total_drift(&self) -> f64 {
        let fresh = crate::numeric::compensated_sum(self.weights.iter().copied());
        if fresh == 0.0 {
            self.total().abs()
        } else {
            (self.total() - fresh).abs() / fresh
        }
    }
}
