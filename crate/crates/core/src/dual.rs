//! The generalized augmented model
//!
//! ```text
//! min ||x||_1 + ||x - u||^2 / (2 tau)   s.t.  Ax = b,  x in X
//! ```
//!
//! and its Lagrange dual `D(y) = min_{x in X} L(x, y)`. The inner minimizer
//! has the closed form `x*(y) = [tau * shrink(u / tau + A^T y)]_X` and
//! `grad D(y) = b - A x*(y)`.

use crate::boxset::BoxSet;
use crate::error::{check_len, Result};
use crate::linalg::{dist2, dot, DenseMatrix};
use crate::operators::shrink;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    a: DenseMatrix,
    b: Vec<f64>,
    set: BoxSet,
    tau: f64,
    u: Vec<f64>,
}

impl Problem {
    pub fn new(a: DenseMatrix, b: Vec<f64>, set: BoxSet, tau: f64, u: Vec<f64>) -> Result<Self> {
        check_len("rhs", a.rows(), b.len())?;
        check_len("box", a.cols(), set.len())?;
        check_len("anchor u", a.cols(), u.len())?;
        crate::operators::ProxSpec::new(tau, &set)?;
        Ok(Self { a, b, set, tau, u })
    }

    /// The model with `u = 0`.
    pub fn augmented(a: DenseMatrix, b: Vec<f64>, set: BoxSet, tau: f64) -> Result<Self> {
        let n = a.cols();
        Self::new(a, b, set, tau, vec![0.0; n])
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn set(&self) -> &BoxSet {
        &self.set
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn m(&self) -> usize {
        self.a.rows()
    }
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub(crate) fn view(&self) -> ProblemView<'_> {
        ProblemView {
            a: &self.a,
            b: &self.b,
            set: &self.set,
            tau: self.tau,
            u: &self.u,
        }
    }

    pub fn primal_from_dual(&self, y: &[f64]) -> Result<Vec<f64>> {
        let aty = self.a.rmatvec(y)?;
        let mut x = vec![0.0; self.n()];
        self.view().primal_into(&aty, &mut x);
        Ok(x)
    }

    pub fn dual_value(&self, y: &[f64]) -> Result<f64> {
        let x = self.primal_from_dual(y)?;
        let ax = self.a.matvec(&x)?;
        let r: Vec<f64> = self.b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        Ok(self.view().lagrangian(&x, y, &r))
    }

    pub fn dual_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = self.primal_from_dual(y)?;
        let ax = self.a.matvec(&x)?;
        Ok(self.b.iter().zip(&ax).map(|(b, ax)| b - ax).collect())
    }
}

/// Borrowed problem data; lets the outer proximal-point loop swap `u` and
/// `tau` without copying the matrix.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProblemView<'a> {
    pub a: &'a DenseMatrix,
    pub b: &'a [f64],
    pub set: &'a BoxSet,
    pub tau: f64,
    pub u: &'a [f64],
}

impl ProblemView<'_> {
    /// `out = [tau * shrink(u / tau + aty)]_X`.
    #[inline]
    pub fn primal_into(&self, aty: &[f64], out: &mut [f64]) {
        let tau = self.tau;
        for (((o, &g), &u), iv) in out
            .iter_mut()
            .zip(aty)
            .zip(self.u)
            .zip(self.set.intervals())
        {
            *o = iv.project(tau * shrink(u / tau + g));
        }
    }

    /// `L(x, y) = ||x||_1 + ||x - u||^2 / (2 tau) + <y, r>` with `r = b - Ax`.
    pub fn lagrangian(&self, x: &[f64], y: &[f64], r: &[f64]) -> f64 {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let prox = dist2(x, self.u);
        l1 + prox * prox / (2.0 * self.tau) + dot(y, r)
    }
}
