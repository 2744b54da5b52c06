//! Dense direct linear solver: LU with partial pivoting, plus a bordered
//! variant for systems whose kernel is spanned by the constant vector.
//!
//! Single-threaded and allocation-light on purpose; for the problem sizes
//! used here (a few thousand unknowns) a dense factorization is fast enough
//! and bitwise reproducible across runs.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// Factorizes in place (PA = LU, partial pivoting). Fails only on an
    /// exactly zero pivot; near-singularity is reported through
    /// [`LuFactors::pivot_ratio`] so the caller can pick a fallback.
    pub fn factor(mut self) -> Result<LuFactors> {
        let n = self.n;
        let a = &mut self.data;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularSystem { pivot_ratio: 0.0 });
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let (upper, lower) = a.split_at_mut((k + 1) * n);
            let row_k = &upper[k * n..(k + 1) * n];
            let inv_pivot = 1.0 / row_k[k];
            for i in (k + 1)..n {
                let row_i = &mut lower[(i - k - 1) * n..(i - k) * n];
                let l = row_i[k] * inv_pivot;
                row_i[k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        row_i[j] -= l * row_k[j];
                    }
                }
            }
        }
        Ok(LuFactors { n, lu: self.data, perm, min_pivot, max_pivot })
    }
}

pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl LuFactors {
    /// min |pivot| / max |pivot|; a crude but effective conditioning probe.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let row = &self.lu[i * n..i * n + i];
            let mut s = x[i];
            for (j, &lij) in row.iter().enumerate() {
                s -= lij * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// Threshold on the pivot ratio below which a factorization is treated as
/// numerically singular. Matrices arriving here come from finite differences,
/// so a pivot that should vanish exactly carries noise around sqrt(eps) times
/// the matrix scale; the threshold sits well below that but far above the
/// pivot ratios of healthy systems.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-10;

/// Solves A x = b. When A is numerically singular with (approximately) the
/// constant vector in its kernel, falls back to the bordered system
/// [A 1; 1^T 0] [x; m] = [b; 0], which selects the zero-mean solution.
/// If the kernel is not actually constant the bordered step is wrong, but a
/// caller validating steps (as the Newton line search does) rejects it.
pub fn solve_or_border(a: DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, bool)> {
    let n = a.size();
    let bordered = DenseMatrix::from_fn(n + 1, |i, j| match (i == n, j == n) {
        (false, false) => a.at(i, j),
        (true, true) => 0.0,
        _ => 1.0,
    });
    let factors = a.factor();
    match factors {
        Ok(f) if f.pivot_ratio() >= SINGULAR_PIVOT_RATIO => Ok((f.solve(b), false)),
        _ => {
            let mut rhs = b.to_vec();
            rhs.push(0.0);
            let f = bordered.factor()?;
            if f.pivot_ratio() < SINGULAR_PIVOT_RATIO {
                return Err(Error::SingularSystem { pivot_ratio: f.pivot_ratio() });
            }
            let mut x = f.solve(&rhs);
            x.pop();
            Ok((x, true))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_known_3x3() {
        // x = (1, -2, 3) against a matrix needing a row swap.
        let a = DenseMatrix::from_fn(3, |i, j| {
            [[0.0, 2.0, 1.0], [4.0, 1.0, -1.0], [2.0, -1.0, 3.0]][i][j]
        });
        let x_true = [1.0, -2.0, 3.0];
        let b = a.mul_vec(&x_true);
        let x = a.factor().unwrap().solve(&b);
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn random_systems_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[5usize, 40, 173] {
            let a = DenseMatrix::from_fn(n, |i, j| {
                let diag = if i == j { n as f64 } else { 0.0 };
                diag + rng.gen_range(-1.0..1.0)
            });
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = a.mul_vec(&x_true);
            let x = a.clone().factor().unwrap().solve(&b);
            let r = a.mul_vec(&x);
            let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n} residual {err}");
        }
    }

    #[test]
    fn exactly_singular_detected() {
        let a = DenseMatrix::from_fn(2, |i, _| if i == 0 { 1.0 } else { 2.0 });
        assert!(matches!(a.factor(), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn bordered_solve_handles_constant_kernel() {
        // Periodic graph Laplacian: kernel = constants. Zero-mean b gives a
        // consistent system; the bordered solve picks the zero-mean solution.
        let n = 12;
        let a = DenseMatrix::from_fn(n, |i, j| {
            if i == j {
                2.0
            } else if (i + 1) % n == j || (j + 1) % n == i {
                -1.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        let b: Vec<f64> = b.iter().map(|v| v - mean).collect();
        let (x, used_border) = solve_or_border(a.clone(), &b).unwrap();
        assert!(used_border);
        let xm = x.iter().sum::<f64>() / n as f64;
        assert!(xm.abs() < 1e-10, "solution mean {xm}");
        let r = a.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "residual {err}");
    }

    #[test]
    fn well_posed_system_skips_border() {
        let a = DenseMatrix::from_fn(4, |i, j| if i == j { 3.0 } else { 0.5 });
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let (x, used_border) = solve_or_border(a.clone(), &b).unwrap();
        assert!(!used_border);
        let r = a.mul_vec(&x);
        for i in 0..4 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    #[ignore]
    fn lu_benchmark_4096() {
        let n = 4096;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DenseMatrix::from_fn(n, |i, j| {
            let diag = if i == j { 10.0 } else { 0.0 };
            diag + rng.gen_range(-1.0..1.0) / n as f64
        });
        let start = std::time::Instant::now();
        let f = a.factor().unwrap();
        let elapsed = start.elapsed();
        println!("LU factorization at n={n}: {elapsed:?}, pivot ratio {:.3e}", f.pivot_ratio());
    }
}
