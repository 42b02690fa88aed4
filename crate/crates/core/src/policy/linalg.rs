//! Dense lower-triangular Cholesky factor with rank-one updates.

/// `A = L Lᵀ`, `L` stored row-major as a full `n × n` matrix (upper part zero).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor of `lambda · I`.
    pub fn scaled_identity(n: usize, lambda: f64) -> Self {
        let mut l = vec![0.0; n * n];
        let d = lambda.sqrt();
        for i in 0..n {
            l[i * n + i] = d;
        }
        Self { n, l }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Rebuilds from the packed lower triangle (row by row).
    pub fn from_packed(n: usize, packed: &[f64]) -> Option<Self> {
        if packed.len() != n * (n + 1) / 2 {
            return None;
        }
        let mut l = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = packed[k];
                k += 1;
            }
        }
        let ok = (0..n).all(|i| l[i * n + i].is_finite() && l[i * n + i] > 0.0)
            && l.iter().all(|v| v.is_finite());
        ok.then_some(Self { n, l })
    }

    pub fn packed(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.l[i * self.n..i * self.n + i + 1]);
        }
        out
    }

    /// `L Lᵀ ← L Lᵀ + x xᵀ`. `x` is consumed as scratch.
    pub fn rank_one_update(&mut self, x: &mut [f64]) {
        let n = self.n;
        let start = x.iter().position(|v| *v != 0.0).unwrap_or(n);
        for k in start..n {
            let lkk = self.l[k * n + k];
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            let r = lkk.hypot(xk);
            let c = r / lkk;
            let s = xk / lkk;
            self.l[k * n + k] = r;
            for i in k + 1..n {
                let lik = (self.l[i * n + k] + s * x[i]) / c;
                self.l[i * n + k] = lik;
                x[i] = c * x[i] - s * lik;
            }
        }
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        let start = b.iter().position(|v| *v != 0.0).unwrap_or(n);
        for i in start..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for j in start..i {
                s -= row[j] * y[j];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `A = L Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.at(i, k) * self.at(j, k)).sum();
                a[i * n + j] = s;
                a[j * n + i] = s;
            }
        }
        a
    }
}
