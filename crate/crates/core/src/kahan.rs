//! Kahan compensated summation.
//!
//! Series and piece masses are accumulated in a fixed ascending order so
//! results are reproducible bit for bit; the compensation term keeps the
//! rounding error independent of the number of terms.

use core::ops::AddAssign;

#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

impl AddAssign<f64> for KahanSum {
    fn add_assign(&mut self, value: f64) {
        self.add(value);
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_small_terms() {
        let mut naive = 0.0f64;
        let mut kahan = KahanSum::new();
        for _ in 0..10_000_000 {
            naive += 0.1;
            kahan += 0.1;
        }
        let exact = 1_000_000.0;
        assert!((kahan.total() - exact).abs() < 1e-7);
        assert!((kahan.total() - exact).abs() <= (naive - exact).abs());
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(KahanSum::new().total(), 0.0);
    }
}
