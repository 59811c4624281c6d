//! Order-independent exact summation of finite `f64` values.
//!
//! Activities are accumulated with [`ExactSum`], which keeps the running sum
//! as a list of non-overlapping partials (Shewchuk's algorithm). Adding and
//! later subtracting the same term restores the exact prior value, and the
//! rounded result does not depend on summation order. Incremental activity
//! updates therefore agree bit-for-bit with a recomputation from scratch.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        debug_assert!(value.is_finite(), "ExactSum only accepts finite values");
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        if x != 0.0 {
            self.partials.push(x);
        }
    }

    pub fn sub(&mut self, value: f64) {
        self.add(-value);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.partials.is_empty()
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way correction so that the result is the round-to-nearest value
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancels_catastrophic_terms() {
        let s: ExactSum = [1e100, 1.0, -1e100, 1e-30].into_iter().collect();
        assert_eq!(s.value(), 1.0 + 1e-30);
        let t: ExactSum = [0.1, 0.2, -0.3].into_iter().collect();
        // exact value of the binary fractions, not 5.55e-17 by accident of order
        let mut u = ExactSum::new();
        u.add(-0.3);
        u.add(0.2);
        u.add(0.1);
        assert_eq!(t.value(), u.value());
    }

    proptest! {
        #[test]
        fn order_independent(mut v in prop::collection::vec(-1e6f64..1e6, 0..40), seed in any::<u64>()) {
            let a: ExactSum = v.iter().copied().collect();
            // deterministic shuffle
            let mut s = seed | 1;
            for i in (1..v.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                v.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let b: ExactSum = v.iter().copied().collect();
            prop_assert_eq!(a.value().to_bits(), b.value().to_bits());
        }

        #[test]
        fn add_then_remove_restores(base in prop::collection::vec(-1e3f64..1e3, 0..20), extra in prop::collection::vec(-1e9f64..1e9, 0..20)) {
            let a: ExactSum = base.iter().copied().collect();
            let mut b = a.clone();
            for &e in &extra { b.add(e); }
            for &e in extra.iter().rev() { b.sub(e); }
            prop_assert_eq!(a.value().to_bits(), b.value().to_bits());
        }
    }
}
