//! Solvers for diagonal-plus-separable systems and full-image reconstruction.

pub mod direct;
pub mod pinv;
pub mod q0;
pub mod reconstruct;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

pub use direct::{direct_solve, series_mjk, solve_finite, solve_normal, DirectSolution, Series};
pub use pinv::{apply_pinv, recursive_pinv, PseudoInverseState, StepRecord};
pub use q0::{solve_q0, Q0Solution};
pub use reconstruct::{reconstruct, Method, Q0Mode, ReconstructOptions, Reconstruction, SliceReport};

/// A = D + Σ_k |b_k⟩⟨a_k|, acting as x ↦ D x + Σ_k b_k (a_k^H x).
/// D is rows × cols with the diagonal d of length min(rows, cols).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagPlusSeparable {
    pub rows: usize,
    pub cols: usize,
    pub d: Vec<C>,
    pub b: Vec<Vec<C>>,
    pub a: Vec<Vec<C>>,
}

impl DiagPlusSeparable {
    pub fn new(rows: usize, cols: usize, d: Vec<C>, b: Vec<Vec<C>>, a: Vec<Vec<C>>) -> Self {
        assert_eq!(d.len(), rows.min(cols), "diagonal length");
        assert_eq!(b.len(), a.len(), "term count");
        assert!(b.iter().all(|v| v.len() == rows), "b length");
        assert!(a.iter().all(|v| v.len() == cols), "a length");
        DiagPlusSeparable { rows, cols, d, b, a }
    }

    pub fn terms(&self) -> usize {
        self.b.len()
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.d.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![C::new(0.0, 0.0); self.rows];
        for (i, d) in self.d.iter().enumerate() {
            y[i] = d * x[i];
        }
        for (b, a) in self.b.iter().zip(&self.a) {
            let s = dot_h(a, x);
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += bi * s;
            }
        }
        y
    }

    /// A^H y.
    pub fn apply_adjoint(&self, y: &[C]) -> Vec<C> {
        assert_eq!(y.len(), self.rows);
        let mut x = vec![C::new(0.0, 0.0); self.cols];
        for (i, d) in self.d.iter().enumerate() {
            x[i] = d.conj() * y[i];
        }
        for (b, a) in self.b.iter().zip(&self.a) {
            let s = dot_h(b, y);
            for (xi, ai) in x.iter_mut().zip(a) {
                *xi += ai * s;
            }
        }
        x
    }

    /// Column j of the materialized matrix.
    pub fn column(&self, j: usize) -> Vec<C> {
        let mut e = vec![C::new(0.0, 0.0); self.cols];
        e[j] = C::new(1.0, 0.0);
        self.apply(&e)
    }

    pub fn dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::<C>::zeros(self.rows, self.cols);
        for (i, d) in self.d.iter().enumerate() {
            m[(i, i)] = *d;
        }
        for (b, a) in self.b.iter().zip(&self.a) {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    m[(i, j)] += b[i] * a[j].conj();
                }
            }
        }
        m
    }

    /// The first `k` separable terms only.
    pub fn prefix(&self, k: usize) -> Self {
        DiagPlusSeparable {
            rows: self.rows,
            cols: self.cols,
            d: self.d.clone(),
            b: self.b[..k].to_vec(),
            a: self.a[..k].to_vec(),
        }
    }
}

/// u^H v.
pub fn dot_h(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_matches_dense() {
        let c = |re: f64, im: f64| C::new(re, im);
        let a = DiagPlusSeparable::new(
            3,
            2,
            vec![c(1.0, 0.5), c(-2.0, 0.0)],
            vec![vec![c(0.1, 0.2), c(0.0, 1.0), c(3.0, -1.0)]],
            vec![vec![c(0.5, 0.5), c(-1.0, 0.25)]],
        );
        let x = vec![c(0.3, -0.7), c(1.1, 0.4)];
        let y = a.apply(&x);
        let yd = a.dense() * nalgebra::DVector::from_vec(x.clone());
        for i in 0..3 {
            assert!((y[i] - yd[i]).norm() < 1e-14);
        }
        let z = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let w = a.apply_adjoint(&z);
        let wd = a.dense().adjoint() * nalgebra::DVector::from_vec(z);
        for i in 0..2 {
            assert!((w[i] - wd[i]).norm() < 1e-14);
        }
    }
}
