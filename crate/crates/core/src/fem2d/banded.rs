use crate::error::{Error, Result};

/// Symmetric matrix stored by its lower band.
///
/// Row `i` keeps the entries `A[i][i−bw..=i]`; entry `A[i][j]` with `j ≤ i` lives
/// at `data[i·(bw+1) + bw − (i − j)]`. Symmetry is exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        (i - j <= self.bw).then(|| i * (self.bw + 1) + self.bw - (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `value` to `A[i][j]` (and so to `A[j][i]`).
    ///
    /// # Panics
    /// If `|i − j|` exceeds the bandwidth.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside half-bandwidth {}", self.bw));
        self.data[s] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * (self.bw + 1) + self.bw]).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let j0 = i.saturating_sub(self.bw);
            let off = self.bw - (i - j0);
            let mut acc = row[self.bw] * x[i];
            for (k, j) in (j0..i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// `max_i Σ_j |A_ij|`.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        let w = self.bw + 1;
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let a = self.data[i * w + self.bw - (i - j)].abs();
                rows[i] += a;
                if j != i {
                    rows[j] += a;
                }
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Banded Cholesky factor `A = LLᵀ`, stored in the same layout.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        let max_diag = self.diagonal().into_iter().fold(0.0, f64::max);
        let floor = 1e-300_f64.max(1e-20 * max_diag);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // L[i][j] = (A[i][j] − Σ_k L[i][k] L[j][k]) / L[j][j], k from max(i,j)−bw to j−1.
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + bw - (i - j)];
                for k in k0..j {
                    s -= l[i * w + bw - (i - k)] * l[j * w + bw - (j - k)];
                }
                if j == i {
                    if !(s > floor) {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {i} is {s:e}"
                        )));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw - (i - j)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = b[i];
            for j in j0..i {
                s -= self.l[i * w + bw - (i - j)] * b[j];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            b[i] /= self.l[i * w + bw];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                b[j] -= self.l[i * w + bw - (i - j)] * b[i];
            }
        }
    }
}
