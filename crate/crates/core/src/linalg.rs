//! Dense row-major matrices and the handful of vector kernels the solvers need.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// A dense `rows x cols` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "shape {rows}x{cols} has an empty dimension"
            )));
        }
        check_len("matrix entries", rows * cols, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n);
        for row in rows {
            check_len("matrix row length", n, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(m, n, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(n, n, data).expect("identity is well formed")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `Ax`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec operand", self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// `A^T y`.
    pub fn rmatvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("rmatvec operand", self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        self.rmatvec_into(y, &mut out);
        Ok(out)
    }

    /// Unchecked `out = Ax`; lengths must already agree.
    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    /// Unchecked `out = A^T y`; accumulates row by row so the summation
    /// order is fixed.
    pub(crate) fn rmatvec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o += yi * a;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Euclidean distance `||a - b||_2`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(x: &[f64]) -> Norms {
    Norms {
        l1: x.iter().map(|v| v.abs()).sum(),
        l2: norm2(x),
        linf: x.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Options for power iteration on `A^T A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// Lower estimate of `||A||_2`.
    pub sigma: f64,
    pub iterations: usize,
    /// False when `max_iter` was exhausted; `sigma` is then the best value seen.
    pub converged: bool,
    pub tol: f64,
}

impl SpectralEstimate {
    /// The estimate inflated by `1 + 10 tol`, used wherever an upper bound
    /// on `||A||_2` is required.
    pub fn inflated(&self) -> f64 {
        self.sigma * (1.0 + 10.0 * self.tol)
    }
}

/// Estimates the largest singular value of `a` by power iteration on `A^T A`
/// from a seeded Gaussian start, stopping once the relative change of the
/// estimate drops below `tol`.
///
/// Each estimate is `||A v||` for a unit vector `v`, so it never exceeds the
/// true norm.
pub fn spectral_norm(a: &DenseMatrix, opts: &SpectralOptions) -> Result<SpectralEstimate> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: opts.tol,
            reason: "must be positive",
        });
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..a.cols())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut best = 0.0_f64;
    let mut prev = 0.0_f64;
    for it in 1..=opts.max_iter {
        a.matvec_into(&v, &mut av);
        let sigma = norm2(&av);
        best = best.max(sigma);
        if sigma == 0.0 {
            // v is in the null space; A^T A v = 0 gives no direction to follow.
            return Ok(SpectralEstimate {
                sigma: best,
                iterations: it,
                converged: best == 0.0 && a.data().iter().all(|&x| x == 0.0),
                tol: opts.tol,
            });
        }
        if it > 1 && (sigma - prev).abs() <= opts.tol * sigma {
            return Ok(SpectralEstimate {
                sigma: best,
                iterations: it,
                converged: true,
                tol: opts.tol,
            });
        }
        prev = sigma;
        a.rmatvec_into(&av, &mut v);
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
    }
    log::warn!(
        "power iteration did not reach tol {:e} in {} iterations",
        opts.tol,
        opts.max_iter
    );
    Ok(SpectralEstimate {
        sigma: best,
        iterations: opts.max_iter,
        converged: false,
        tol: opts.tol,
    })
}
