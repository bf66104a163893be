//! Direct inversion by reduction to a K×K system.
//!
//! With x_k = ⟨a_k|μ⟩, A μ = Φ becomes (I + M) x = R where
//! M_jk = ⟨a_j|D^{-1}|b_k⟩ and R_j = ⟨a_j|D^{-1}|Φ⟩, after which
//! μ_n = (Φ_n − Σ_k b_k(n) x_k)/d_n for any n. On the infinite system the
//! entries of M are series over all n; they converge like 1/n² and are
//! accelerated by subtracting the τ/κ_n² asymptote in closed form.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

use super::{dot_h, DiagPlusSeparable};
use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::spectral::{assemble, Lazy, SpectralSystem, Term};

const I: C = C { re: 0.0, im: 1.0 };

/// Above this condition number (I + M) counts as singular.
pub const MAX_CONDITION: f64 = 1e13;

/// |d_n| below this fraction of max|d_n| flags the slice.
pub const SMALL_DIAG: f64 = 1e-12;

/// Σ_{n > m} 1/n².
fn zeta2_tail(m: i64) -> f64 {
    let mut s = 0.0;
    for n in (1..=m).rev() {
        let n = n as f64;
        s += 1.0 / (n * n);
    }
    PI * PI / 6.0 - s
}

/// Accelerated evaluation of Σ_n u(n) v(n)/d_n for one spectral system.
pub struct Series<'a> {
    sys: &'a SpectralSystem,
    n_sum: i64,
    kappa1: f64,
}

impl<'a> Series<'a> {
    /// `n_sum` is raised when needed so the asymptote is used only where
    /// κ_n is much larger than every |β_k|.
    pub fn new(sys: &'a SpectralSystem, n_sum: usize) -> Result<Self> {
        let scale: f64 = sys.rays.iter().map(|r| r.weight.abs() / r.uz.abs()).sum();
        if sys.sigma1.abs() <= 1e-9 * scale {
            return Err(Error::Solver("series acceleration needs Sigma1 != 0".into()));
        }
        if n_sum == 0 {
            return Err(Error::Domain("n_sum must be at least 1".into()));
        }
        let floor = (16.0 * sys.beta_extent()).ceil() as i64 + 16;
        let n_sum = (n_sum as i64).max(floor).max(4 * sys.nmax as i64);
        Ok(Series { sys, n_sum, kappa1: sys.kappa1() })
    }

    pub fn n_sum(&self) -> i64 {
        self.n_sum
    }

    /// Coefficient τ of the paired terms t_n = f(n) + f(−n) ≈ τ/κ_n².
    pub fn tau(&self, beta_u: f64, beta_v: f64) -> C {
        let s1 = self.sys.sigma1;
        2.0 * I * ((beta_u + beta_v) * s1 - self.sys.beta_moment) / (s1 * s1)
    }

    fn f(&self, u: Lazy, v: Lazy, n: i64) -> Result<C> {
        let uv = u.eval(n, self.kappa1) * v.eval(n, self.kappa1);
        if uv == 0.0 {
            return Ok(C::new(0.0, 0.0));
        }
        let d = self.sys.diag(n);
        if d.norm() == 0.0 {
            return Err(Error::SingularSystem { condition: f64::INFINITY });
        }
        Ok(uv / d)
    }

    /// Σ u(n) v(n)/d_n over all n (`from = None`) or over |n| > n0.
    pub fn sum(&self, u: Lazy, v: Lazy, from: Option<i64>) -> Result<C> {
        let inside = |p: i64| from.is_none_or(|n0| p.abs() > n0);
        match (u, v) {
            (Lazy::Unit { p }, _) | (_, Lazy::Unit { p }) => {
                if inside(p) {
                    self.f(u, v, p)
                } else {
                    Ok(C::new(0.0, 0.0))
                }
            }
            _ => {
                let bu = u.pole_beta(self.kappa1).expect("pole vector");
                let bv = v.pole_beta(self.kappa1).expect("pole vector");
                let tau = self.tau(bu, bv);
                let start = from.map_or(1, |n0| n0 + 1);
                let mut acc = if from.is_none() { self.f(u, v, 0)? } else { C::new(0.0, 0.0) };
                let end = self.n_sum.max(start + 16);
                for n in start..=end {
                    let kn = self.kappa1 * n as f64;
                    acc += self.f(u, v, n)? + self.f(u, v, -n)? - tau / (kn * kn);
                }
                let l_over = 1.0 / self.kappa1;
                acc += tau * l_over * l_over * zeta2_tail(start - 1);
                Ok(acc)
            }
        }
    }
}

/// Primary vector of ray k at this q: its pole vector, with the resonant
/// entry removed when the ray is resonant.
fn primary(sys: &SpectralSystem, k: usize) -> Lazy {
    let r = &sys.rays[k];
    match r.resonance {
        Some(p) => Lazy::PoleDeleted { p },
        None => Lazy::Pole { beta: r.beta },
    }
}

/// ⟨a_j|D^{-1}|a_k⟩ over all n, accelerated, for rays j and k of `g` at
/// frequency q. The leading n = 0 term is 1/(β_jβ_k d_0) and the tail of
/// the paired series is summed in closed form as τ_jk·L²/24.
pub fn series_mjk(g: &StarGeometry, q: f64, j: usize, k: usize, n_sum: usize) -> Result<C> {
    if q == 0.0 {
        return Err(Error::Domain("series_mjk needs q != 0".into()));
    }
    if j >= g.len() || k >= g.len() {
        return Err(Error::Domain(format!("ray index out of range for K = {}", g.len())));
    }
    let sys = assemble(g, q, 0, &[C::new(0.0, 0.0)])?;
    let s = Series::new(&sys, n_sum)?;
    s.sum(primary(&sys, j), primary(&sys, k), None)
}

/// Solution of the infinite system with Φ_n zero-extended beyond n_max.
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub terms: Vec<Term>,
    pub x: Vec<C>,
    pub condition: f64,
    sys: SpectralSystem,
}

impl DirectSolution {
    /// μ_n for any n.
    pub fn mu(&self, n: i64) -> C {
        let k1 = self.sys.kappa1();
        let nm = self.sys.nmax as i64;
        let phi = if n.abs() <= nm { self.sys.rhs[(n + nm) as usize] } else { C::new(0.0, 0.0) };
        let coupling: C = self.terms.iter().zip(&self.x).map(|(t, x)| t.coef * t.b.eval(n, k1) * x).sum();
        (phi - coupling) / self.sys.diag(n)
    }

    pub fn band(&self) -> Vec<C> {
        let nm = self.sys.nmax as i64;
        (-nm..=nm).map(|n| self.mu(n)).collect()
    }
}

fn condition_number(m: &DMatrix<C>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_diag(d: impl Iterator<Item = C> + Clone) -> Result<()> {
    let max = d.clone().map(|v| v.norm()).fold(0.0, f64::max);
    let min = d.map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(min > SMALL_DIAG * max) {
        return Err(Error::Solver(format!("near-zero diagonal entry ({min:.3e} vs max {max:.3e})")));
    }
    Ok(())
}

/// Paper-style direct solve of the infinite system (zero-data truncation).
pub fn direct_solve(sys: &SpectralSystem, n_sum: usize) -> Result<DirectSolution> {
    let series = Series::new(sys, n_sum)?;
    let k1 = sys.kappa1();
    let nm = sys.nmax as i64;
    check_diag((-series.n_sum()..=series.n_sum()).map(|n| sys.diag(n)))?;
    let terms = sys.terms();
    let kk = terms.len();
    let mut m = DMatrix::<C>::identity(kk, kk);
    let mut r = DVector::<C>::zeros(kk);
    for (j, tj) in terms.iter().enumerate() {
        for (k, tk) in terms.iter().enumerate() {
            m[(j, k)] += tk.coef * series.sum(tj.a, tk.b, None)?;
        }
        r[j] = (-nm..=nm).map(|n| tj.a.eval(n, k1) * sys.rhs[(n + nm) as usize] / sys.diag(n)).sum();
    }
    let condition = condition_number(&m);
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = m.lu().solve(&r).ok_or(Error::SingularSystem { condition })?;
    Ok(DirectSolution { terms, x: x.data.into(), condition, sys: sys.clone() })
}

/// Solve a square finite diagonal-plus-separable system by the same
/// reduction. Returns the solution and the condition number of (I + M).
pub fn solve_finite(a: &DiagPlusSeparable, rhs: &[C]) -> Result<(Vec<C>, f64)> {
    if a.rows != a.cols {
        return Err(Error::Dimension { expected: a.rows, got: a.cols });
    }
    if rhs.len() != a.rows {
        return Err(Error::Dimension { expected: a.rows, got: rhs.len() });
    }
    check_diag(a.d.iter().copied())?;
    let dinv_phi: Vec<C> = rhs.iter().zip(&a.d).map(|(p, d)| p / d).collect();
    let dinv_b: Vec<Vec<C>> = a.b.iter().map(|b| b.iter().zip(&a.d).map(|(v, d)| v / d).collect()).collect();
    let kk = a.terms();
    let mut m = DMatrix::<C>::identity(kk, kk);
    let mut r = DVector::<C>::zeros(kk);
    for j in 0..kk {
        for k in 0..kk {
            m[(j, k)] += dot_h(&a.a[j], &dinv_b[k]);
        }
        r[j] = dot_h(&a.a[j], &dinv_phi);
    }
    let condition = if kk == 0 { 1.0 } else { condition_number(&m) };
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = if kk == 0 { DVector::zeros(0) } else { m.lu().solve(&r).ok_or(Error::SingularSystem { condition })? };
    let mut mu = dinv_phi;
    for (k, bk) in dinv_b.iter().enumerate() {
        for (v, b) in mu.iter_mut().zip(bk) {
            *v -= b * x[k];
        }
    }
    Ok((mu, condition))
}

/// Regularized least squares (A^H A + λ²) μ = A^H Φ. The normal matrix is
/// again diagonal plus separable, with 2K terms, and is solved by
/// [`solve_finite`].
pub fn solve_normal(a: &DiagPlusSeparable, rhs: &[C], lambda: f64) -> Result<(Vec<C>, f64)> {
    if a.rows < a.cols {
        return Err(Error::Solver("normal equations need at least as many rows as unknowns".into()));
    }
    let l2 = lambda * lambda;
    let d: Vec<C> = a.d.iter().map(|v| C::new(v.norm_sqr() + l2, 0.0)).collect();
    let dh = |v: &[C]| -> Vec<C> { a.d.iter().zip(v).map(|(d, x)| d.conj() * x).collect() };
    let mut bs = Vec::with_capacity(2 * a.terms());
    let mut as_ = Vec::with_capacity(2 * a.terms());
    for k in 0..a.terms() {
        let dhb = dh(&a.b[k]);
        // w_k = D^H b_k + Σ_j (b_j^H b_k) a_j
        let mut w = dhb.clone();
        for j in 0..a.terms() {
            let g = dot_h(&a.b[j], &a.b[k]);
            for (wi, aj) in w.iter_mut().zip(&a.a[j]) {
                *wi += g * aj;
            }
        }
        bs.push(dhb);
        as_.push(a.a[k].clone());
        bs.push(a.a[k].clone());
        as_.push(w);
    }
    let normal = DiagPlusSeparable::new(a.cols, a.cols, d, bs, as_);
    solve_finite(&normal, &a.apply_adjoint(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::table1_geometry;

    #[test]
    fn pure_diagonal() {
        let d = vec![C::new(1.0, 2.0), C::new(-0.5, 0.1), C::new(0.0, 3.0)];
        let a = DiagPlusSeparable::new(3, 3, d.clone(), vec![], vec![]);
        let rhs = vec![C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(2.0, -1.0)];
        let (mu, _) = solve_finite(&a, &rhs).unwrap();
        for i in 0..3 {
            assert!((mu[i] - rhs[i] / d[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn normal_equations_match_dense() {
        let c = |re: f64, im: f64| C::new(re, im);
        let a = DiagPlusSeparable::new(
            4,
            3,
            vec![c(1.0, 0.5), c(-2.0, 0.0), c(0.3, 1.0)],
            vec![vec![c(0.1, 0.2), c(0.0, 1.0), c(3.0, -1.0), c(0.5, 0.5)]],
            vec![vec![c(0.5, 0.5), c(-1.0, 0.25), c(0.2, 0.0)]],
        );
        let rhs = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0), c(-1.0, 0.5)];
        let lambda = 0.2;
        let (mu, _) = solve_normal(&a, &rhs, lambda).unwrap();
        let m = a.dense();
        let lhs = m.adjoint() * &m + DMatrix::<C>::identity(3, 3) * C::new(lambda * lambda, 0.0);
        let want = lhs.lu().solve(&(m.adjoint() * DVector::from_vec(rhs))).unwrap();
        for i in 0..3 {
            assert!((mu[i] - want[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn series_is_symmetric() {
        let g = table1_geometry("2b", 1.0).unwrap();
        for (j, k) in [(0, 1), (1, 2), (0, 2)] {
            let a = series_mjk(&g, 3.3, j, k, 200).unwrap();
            let b = series_mjk(&g, 3.3, k, j, 200).unwrap();
            assert!((a - b).norm() < 1e-14 * a.norm());
        }
        assert!(series_mjk(&g, 0.0, 0, 1, 200).is_err());
    }

    #[test]
    fn zeta_tail() {
        assert!((zeta2_tail(0) - PI * PI / 6.0).abs() < 1e-16);
        assert!((zeta2_tail(1) - (PI * PI / 6.0 - 1.0)).abs() < 1e-15);
    }
}
