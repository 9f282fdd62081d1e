//! Banded LU factorization with partial pivoting.
//!
//! Row `i` of the compact storage holds columns `i - m1 ..= i + m2` of the full
//! matrix, so entry `(i, j)` lives at `band[i][j + m1 - i]`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    m1: usize,
    m2: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, m1: usize, m2: usize) -> Self {
        Self {
            n,
            m1,
            m2,
            data: vec![0.0; n * (m1 + m2 + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.m1
    }

    pub fn upper(&self) -> usize {
        self.m2
    }

    fn width(&self) -> usize {
        self.m1 + self.m2 + 1
    }

    /// Whether `(i, j)` falls inside the band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.m1 >= i && j <= i + self.m2
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.m1 - i]
        } else {
            0.0
        }
    }

    /// Add `v` to entry `(i, j)`. Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band ({}, {})",
            self.m1,
            self.m2
        );
        let w = self.width();
        self.data[i * w + j + self.m1 - i] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j));
        let w = self.width();
        self.data[i * w + j + self.m1 - i] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.m1);
                let hi = (i + self.m2).min(self.n - 1);
                (lo..=hi)
                    .map(|j| self.data[i * w + j + self.m1 - i] * x[j])
                    .sum()
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Factor in place. `pivot_tol` is relative to the largest stored entry; a
    /// pivot at or below it is reported as a singular matrix.
    pub fn factor(mut self, pivot_tol: f64) -> Result<BandLu> {
        let n = self.n;
        let (m1, mm) = (self.m1, self.width());
        let threshold = pivot_tol * self.max_abs();
        let mut al = vec![0.0; n * m1.max(1)];
        let mut indx = vec![0usize; n];
        let a = &mut self.data;

        // Shift the first m1 rows left so every row starts at its first
        // structurally nonzero column.
        let mut l = m1;
        for i in 0..m1.min(n) {
            for j in (m1 - i)..mm {
                a[i * mm + j - l] = a[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                a[i * mm + j] = 0.0;
            }
        }

        let mut l = m1;
        for k in 0..n {
            let mut dum = a[k * mm];
            let mut piv = k;
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                if a[j * mm].abs() > dum.abs() {
                    dum = a[j * mm];
                    piv = j;
                }
            }
            indx[k] = piv;
            if dum.abs() <= threshold {
                return Err(Error::Gauge(format!(
                    "pivot {dum:e} at row {k} below {threshold:e}"
                )));
            }
            if piv != k {
                for j in 0..mm {
                    a.swap(k * mm + j, piv * mm + j);
                }
            }
            for i in (k + 1)..l {
                let f = a[i * mm] / a[k * mm];
                al[k * m1 + i - k - 1] = f;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - f * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(BandLu {
            n,
            m1,
            mm,
            upper: self.data,
            lower: al,
            indx,
        })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    m1: usize,
    mm: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    indx: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, m1, mm) = (self.n, self.m1, self.mm);
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        let mut l = m1;
        for k in 0..n {
            let j = self.indx[k];
            if j != k {
                x.swap(k, j);
            }
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                x[j] -= self.lower[k * m1 + j - k - 1] * x[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut dum = x[i];
            for k in 1..l {
                dum -= self.upper[i * mm + k] * x[k + i];
            }
            x[i] = dum / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, m1: usize, m2: usize, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, m1, m2);
        for i in 0..n {
            for j in i.saturating_sub(m1)..=(i + m2).min(n - 1) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal_poisson() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, -2.0);
            if i > 0 {
                a.set(i, i - 1, 1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, 1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let lu = a.factor(1e-14).unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        // Zero leading diagonal forces a row swap.
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 3.0);
        let x = [1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let y = a.factor(1e-14).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            a.set(i, i, 1.0);
        }
        a.set(2, 2, 0.0);
        assert!(matches!(a.factor(1e-12), Err(Error::Gauge(_))));
    }

    proptest! {
        #[test]
        fn random_band_round_trip(n in 5usize..80, m1 in 0usize..6, m2 in 0usize..6, seed in 0u64..1000) {
            let mut a = random_band(n, m1, m2, seed);
            // Diagonal shift keeps the test matrices comfortably invertible.
            for i in 0..n {
                a.add(i, i, 4.0);
            }
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let b = a.matvec(&x);
            let y = a.factor(1e-14).unwrap().solve(&b);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
