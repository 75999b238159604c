//! Symmetric positive-definite band matrices with in-place Cholesky.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix with half-bandwidth `p`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    p: usize,
    // row i holds entries (i, i-p) ..= (i, i)
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * (p + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.p);
        i * (self.p + 1) + self.p - (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.p {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `value` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.p, "entry ({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.p)..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Replaces the band by its Cholesky factor `L` with `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let p = self.p;
        for i in 0..self.n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let mut s = self.data[self.idx(i, j)];
                for k in lo.max(j.saturating_sub(p))..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let k = self.idx(i, j);
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::DegenerateConstraint(format!(
                            "banded system not positive definite at row {i}"
                        )));
                    }
                    self.data[k] = s.sqrt();
                } else {
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place; requires [`factor`](Self::factor) first.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "solve before factor");
        let p = self.p;
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + p + 1).min(self.n) {
                s -= self.data[self.idx(k, i)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn matches_dense_solve() {
        let mut rng = StdRng::seed_from_u64(7);
        for &(n, p) in &[(1, 0), (5, 1), (12, 4), (30, 6)] {
            let mut band = BandedSpd::zeros(n, p);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(p)..i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    band.add(i, j, x);
                    dense[(i, j)] += x;
                    dense[(j, i)] += x;
                }
                let d = 2.0 * p as f64 + 1.0 + rng.gen::<f64>();
                band.add(i, i, d);
                dense[(i, i)] += d;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = band.matvec(&b);
            let yd = &dense * DVector::from_column_slice(&b);
            for i in 0..n {
                assert!((y[i] - yd[i]).abs() < 1e-12);
            }
            let expected = dense.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
            band.factor().unwrap();
            let mut x = b.clone();
            band.solve_in_place(&mut x);
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-10, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut band = BandedSpd::zeros(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 2.0);
        band.add(1, 1, 1.0);
        assert!(band.factor().is_err());
    }
}
