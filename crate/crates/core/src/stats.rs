//! Streaming means and co-moments with Chan's pairwise merge.

/// Running count, mean vector and co-moment matrix of `dim`-dimensional
/// observations.
#[derive(Debug, Clone)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    // row-major dim x dim: sum of (x_i - mean_i)(x_j - mean_j)
    comoment: Vec<f64>,
    scratch: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
            scratch: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        let d = self.dim();
        self.count += 1;
        let n = self.count as f64;
        for i in 0..d {
            self.scratch[i] = x[i] - self.mean[i];
            self.mean[i] += self.scratch[i] / n;
        }
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] += self.scratch[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        debug_assert_eq!(self.dim(), other.dim());
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.comoment.clone_from(&other.comoment);
            return;
        }
        let d = self.dim();
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..d {
            self.scratch[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] +=
                    other.comoment[i * d + j] + self.scratch[i] * self.scratch[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += self.scratch[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Unbiased sample covariance of components `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.comoment[i * self.dim() + j] / (self.count - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i)
    }

    /// Standard error of the mean of component `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        (self.variance(i).max(0.0) / self.count as f64).sqrt()
    }

    /// Mean and standard error of `sum_i w_i x_i`.
    pub fn linear_combination(&self, weights: &[f64]) -> (f64, f64) {
        let d = self.dim();
        debug_assert_eq!(weights.len(), d);
        let mean = weights.iter().zip(&self.mean).map(|(w, m)| w * m).sum();
        let mut var = 0.0;
        for i in 0..d {
            for j in 0..d {
                var += weights[i] * weights[j] * self.covariance(i, j);
            }
        }
        (mean, (var.max(0.0) / self.count as f64).sqrt())
    }
}
