//! Per-block sufficient statistics.

use std::ops::{AddAssign, SubAssign};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn new(v: f64) -> Self {
        Compensated { sum: v, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    #[inline]
    fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    fn unmerge(&mut self, other: &Compensated) {
        self.add(-other.sum);
        self.add(-other.comp);
    }
}

/// Aggregates over the dyads of one block in one layer.
///
/// Which fields matter depends on the modality: `edges` is the number of
/// nonzero dyads (or active dyads under zero inflation), `total` the integer
/// value sum, `sum`/`sum_sq` the real moments and `cats[1..]` the nonzero
/// category counts. `cats[0]` is never stored; it is `dyads` minus the rest.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockStats {
    pub dyads: u64,
    pub edges: u64,
    pub total: u64,
    pub sum: Compensated,
    pub sum_sq: Compensated,
    pub cats: [u64; 4],
}

impl BlockStats {
    pub fn is_empty(&self) -> bool {
        self.dyads == 0
    }

    /// Category counts including the implied zero category, for `m` categories.
    pub fn categories(&self, m: usize) -> [u64; 4] {
        let mut out = self.cats;
        let nonzero: u64 = self.cats[1..m].iter().sum();
        out[0] = self.dyads - nonzero;
        out
    }

    /// Swap the two asymmetric dyad states (i→j only and j→i only).
    pub fn swapped(&self) -> BlockStats {
        let mut s = *self;
        s.cats.swap(1, 2);
        s
    }

    /// Equality with tolerance on the real accumulators only.
    pub fn approx_eq(&self, other: &BlockStats, tol: f64) -> bool {
        self.dyads == other.dyads
            && self.edges == other.edges
            && self.total == other.total
            && self.cats == other.cats
            && (self.sum.value() - other.sum.value()).abs() <= tol
            && (self.sum_sq.value() - other.sum_sq.value()).abs() <= tol
    }
}

impl AddAssign<&BlockStats> for BlockStats {
    #[inline]
    fn add_assign(&mut self, o: &BlockStats) {
        self.dyads += o.dyads;
        self.edges += o.edges;
        self.total += o.total;
        self.sum.merge(&o.sum);
        self.sum_sq.merge(&o.sum_sq);
        for (a, b) in self.cats.iter_mut().zip(o.cats.iter()) {
            *a += b;
        }
    }
}

impl SubAssign<&BlockStats> for BlockStats {
    #[inline]
    fn sub_assign(&mut self, o: &BlockStats) {
        self.dyads -= o.dyads;
        self.edges -= o.edges;
        self.total -= o.total;
        self.sum.unmerge(&o.sum);
        self.sum_sq.unmerge(&o.sum_sq);
        for (a, b) in self.cats.iter_mut().zip(o.cats.iter()) {
            *a -= b;
        }
    }
}
