//! Fourier machinery. Fields are transformed with
//! X_n(q) = ∫dY e^{−iqY} ∫_0^L dZ e^{−iκ_n Z} X(Y, Z), κ_n = 2πn/L,
//! and for each q the star transform becomes
//! Φ_n = d_n μ_n + Σ_k s_k α_k a_k(n) Σ_m a_k(m) μ_m,  a_k(n) = 1/(β_k + κ_n).

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::grid::{DataField, Grid, ImageGrid};
use crate::solver::DiagPlusSeparable;
use crate::stability::sigma_moments;

const I: C = C { re: 0.0, im: 1.0 };

/// A ray counts as resonant when |β_k + κ_p| < RESONANCE_REL·κ_1.
pub const RESONANCE_REL: f64 = 1e-8;

/// Coefficients X_n(q_m), n ∈ [−n_max, n_max], m in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub grid: Grid,
    pub nmax: usize,
    values: Vec<C>,
}

impl CoefficientTable {
    pub fn zeros(grid: Grid, nmax: usize) -> Self {
        CoefficientTable { grid, nmax, values: vec![C::new(0.0, 0.0); grid.ny * (2 * nmax + 1)] }
    }

    pub fn width(&self) -> usize {
        2 * self.nmax + 1
    }

    pub fn q_count(&self) -> usize {
        self.grid.ny
    }

    /// Signed frequency index of FFT slot m.
    pub fn signed_index(&self, m: usize) -> i64 {
        signed(m, self.grid.ny)
    }

    pub fn q(&self, m: usize) -> f64 {
        2.0 * PI * self.signed_index(m) as f64 / self.grid.window()
    }

    /// FFT slot holding signed frequency index s.
    pub fn slot(&self, s: i64) -> usize {
        s.rem_euclid(self.grid.ny as i64) as usize
    }

    pub fn get(&self, m: usize, n: i64) -> C {
        self.values[m * self.width() + (n + self.nmax as i64) as usize]
    }

    pub fn set(&mut self, m: usize, n: i64, v: C) {
        let w = self.width();
        self.values[m * w + (n + self.nmax as i64) as usize] = v;
    }

    /// Column n = −n_max..=n_max at slot m.
    pub fn column(&self, m: usize) -> &[C] {
        let w = self.width();
        &self.values[m * w..(m + 1) * w]
    }

    pub fn column_mut(&mut self, m: usize) -> &mut [C] {
        let w = self.width();
        &mut self.values[m * w..(m + 1) * w]
    }

    pub fn kappa(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.grid.strip_width
    }

    /// (n, q, Re, Im) rows for debugging dumps.
    pub fn to_rows(&self) -> Vec<(i64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for m in 0..self.q_count() {
            for n in -(self.nmax as i64)..=self.nmax as i64 {
                let v = self.get(m, n);
                out.push((n, self.q(m), v.re, v.im));
            }
        }
        out
    }
}

fn signed(m: usize, ny: usize) -> i64 {
    if m <= (ny - 1) / 2 {
        m as i64
    } else {
        m as i64 - ny as i64
    }
}

/// Continuous-normalized Y transform of each row of `rows` (row length ny).
fn y_transform(grid: Grid, rows: &[f64]) -> Vec<C> {
    let ny = grid.ny;
    let h = grid.h();
    let c = (ny - 1) as f64 / 2.0;
    let fft = FftPlanner::new().plan_fft_forward(ny);
    let phase: Vec<C> = (0..ny).map(|m| h * C::from_polar(1.0, 2.0 * PI * signed(m, ny) as f64 * c / ny as f64)).collect();
    let mut out: Vec<C> = rows.iter().map(|&v| C::new(v, 0.0)).collect();
    for row in out.chunks_mut(ny) {
        fft.process(row);
        for (v, p) in row.iter_mut().zip(&phase) {
            *v *= p;
        }
    }
    out
}

/// One-sided derivative weights at a left end, orders 1 and 2, from the
/// first four samples (third and second order accurate).
const END_D1: [f64; 4] = [-11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0];
const END_D2: [f64; 4] = [2.0, -5.0, 4.0, -1.0];

/// Bernoulli polynomials scaled by 1/k!, k = 1..=3.
fn bernoulli_scaled(k: usize, x: f64) -> f64 {
    match k {
        1 => x - 0.5,
        2 => (x * x - x + 1.0 / 6.0) / 2.0,
        3 => (x * x * x - 1.5 * x * x + 0.5 * x) / 6.0,
        _ => unreachable!(),
    }
}

/// Z coefficients of one column given samples at rows 0..=N+1 (boundaries
/// included). The column is split into a periodic remainder, summed with
/// the trapezoid rule, and a combination of Bernoulli polynomials carrying
/// the jumps of the value and of the first two derivatives between Z = 0
/// and Z = L, whose coefficients are known in closed form.
fn z_transform(nmax: usize, h: f64, col: &[C], fft: &dyn rustfft::Fft<f64>, corrected: bool) -> Vec<C> {
    let np = col.len() - 1; // N + 1 nodes per period
    let l = h * np as f64;
    let jumps = if corrected { end_jumps(col, h) } else { [C::new(0.0, 0.0); 3] };
    let g = |z: f64| -> C {
        let x = z / l;
        (0..3).map(|m| jumps[m] * l.powi(m as i32) * bernoulli_scaled(m + 1, x)).sum()
    };
    let mut buf: Vec<C> = (0..np).map(|r| col[r] - g(r as f64 * h)).collect();
    fft.process(&mut buf);
    let mut out = Vec::with_capacity(2 * nmax + 1);
    for n in -(nmax as i64)..=nmax as i64 {
        let idx = n.rem_euclid(np as i64) as usize;
        let mut v = h * buf[idx];
        if n != 0 {
            let ik = C::new(0.0, 2.0 * PI * n as f64 / l);
            let mut p = ik;
            for jm in &jumps {
                v -= jm / p;
                p *= ik;
            }
        }
        out.push(v);
    }
    out
}

/// f(L) − f(0) and the same for the first two derivatives.
fn end_jumps(col: &[C], h: f64) -> [C; 3] {
    let last = col.len() - 1;
    let mut j = [col[last] - col[0], C::new(0.0, 0.0), C::new(0.0, 0.0)];
    if col.len() < 4 {
        return j;
    }
    let left = |w: &[f64; 4]| -> C { (0..4).map(|i| w[i] * col[i]).sum() };
    let right = |w: &[f64; 4]| -> C { (0..4).map(|i| w[i] * col[last - i]).sum() };
    // mirrored stencils: odd derivatives change sign
    j[1] = (-right(&END_D1) - left(&END_D1)) / h;
    j[2] = (right(&END_D2) - left(&END_D2)) / (h * h);
    j
}

fn table_from_rows(grid: Grid, nmax: usize, rows: &[f64], corrected: bool) -> Result<CoefficientTable> {
    let ny = grid.ny;
    let nrows = grid.n + 2;
    if rows.len() != nrows * ny {
        return Err(Error::Dimension { expected: nrows * ny, got: rows.len() });
    }
    if 2 * nmax + 1 > grid.n + 1 {
        return Err(Error::Domain(format!("n_max = {nmax} exceeds the Z resolution of {} samples", grid.n)));
    }
    let yt = y_transform(grid, rows);
    let fft = FftPlanner::new().plan_fft_forward(grid.n + 1);
    let mut table = CoefficientTable::zeros(grid, nmax);
    let h = grid.h();
    let mut col = vec![C::new(0.0, 0.0); nrows];
    for m in 0..ny {
        for r in 0..nrows {
            col[r] = yt[r * ny + m];
        }
        let z = z_transform(nmax, h, &col, fft.as_ref(), corrected);
        table.column_mut(m).copy_from_slice(&z);
    }
    Ok(table)
}

/// Φ_n(q) of a data field (boundary rows used for the Z = 0 node and jump).
pub fn field_to_coefficients(f: &DataField, nmax: usize) -> Result<CoefficientTable> {
    table_from_rows(f.grid, nmax, &f.values, true)
}

/// μ_n(q) of an image; values at Z = 0 and Z = L are taken as zero and the
/// plain trapezoid rule is used, so this inverts [`coefficients_to_image`]
/// exactly on band-limited input.
pub fn image_to_coefficients(img: &ImageGrid, nmax: usize) -> Result<CoefficientTable> {
    let ny = img.grid.ny;
    let mut rows = vec![0.0; (img.grid.n + 2) * ny];
    rows[ny..ny * (img.grid.n + 1)].copy_from_slice(&img.values);
    table_from_rows(img.grid, nmax, &rows, false)
}

/// μ(Y_i, z_j) = (1/W) Σ_q e^{iqY} (1/L) Σ_n μ_n(q) e^{iκ_n z}.
pub fn coefficients_to_image(t: &CoefficientTable) -> ImageGrid {
    let grid = t.grid;
    let (ny, n) = (grid.ny, grid.n);
    let l = grid.strip_width;
    // Z synthesis for every q slot.
    let mut zq = vec![C::new(0.0, 0.0); n * ny];
    let nm = t.nmax as i64;
    let phases: Vec<Vec<C>> = (0..n)
        .map(|j| (-nm..=nm).map(|k| C::from_polar(1.0, 2.0 * PI * k as f64 * (j + 1) as f64 / (n + 1) as f64)).collect())
        .collect();
    for m in 0..ny {
        let col = t.column(m);
        for j in 0..n {
            let s: C = col.iter().zip(&phases[j]).map(|(a, b)| a * b).sum();
            zq[j * ny + m] = s / l;
        }
    }
    // Y synthesis row by row.
    let ifft = FftPlanner::new().plan_fft_inverse(ny);
    let c = (ny - 1) as f64 / 2.0;
    let phase: Vec<C> = (0..ny).map(|m| C::from_polar(1.0, -2.0 * PI * signed(m, ny) as f64 * c / ny as f64)).collect();
    let w = grid.window();
    let mut values = Vec::with_capacity(n * ny);
    for row in zq.chunks_mut(ny) {
        for (v, p) in row.iter_mut().zip(&phase) {
            *v *= p;
        }
        ifft.process(row);
        values.extend(row.iter().map(|v| v.re / w));
    }
    ImageGrid { grid, values }
}

/// Y transform of one row of samples (length ny), e.g. ballistic
/// projections P(Y) = ∫μ dz, whose transform is μ_0(q).
pub fn y_coefficients(grid: Grid, samples: &[f64]) -> Result<Vec<C>> {
    if samples.len() != grid.ny {
        return Err(Error::Dimension { expected: grid.ny, got: samples.len() });
    }
    Ok(y_transform(grid, samples))
}

/// Δ(Y) = ½[Φ(Y,0) + Φ(Y,L)] and its transform Δ̃(q_m) in FFT order.
pub fn boundary_average(f: &DataField) -> (Vec<f64>, Vec<C>) {
    let delta = f.boundary_average();
    let t = y_transform(f.grid, &delta);
    (delta, t)
}

/// Lazily evaluated real vector over n ∈ ℤ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lazy {
    /// 1/(β + κ_n).
    Pole { beta: f64 },
    /// 1/(κ_n − κ_p), zero at n = p.
    PoleDeleted { p: i64 },
    /// δ_{np}.
    Unit { p: i64 },
}

impl Lazy {
    pub fn eval(&self, n: i64, kappa1: f64) -> f64 {
        match *self {
            Lazy::Pole { beta } => 1.0 / (beta + kappa1 * n as f64),
            Lazy::PoleDeleted { p } => {
                if n == p {
                    0.0
                } else {
                    1.0 / (kappa1 * (n - p) as f64)
                }
            }
            Lazy::Unit { p } => {
                if n == p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The β whose pole the vector follows at large |n|; None for units.
    pub fn pole_beta(&self, kappa1: f64) -> Option<f64> {
        match *self {
            Lazy::Pole { beta } => Some(beta),
            Lazy::PoleDeleted { p } => Some(-kappa1 * p as f64),
            Lazy::Unit { .. } => None,
        }
    }
}

/// One separable term coef·|b⟩⟨a| of the infinite system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: C,
    pub b: Lazy,
    pub a: Lazy,
}

/// Per-ray data at one q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTerm {
    pub weight: f64,
    pub uz: f64,
    /// β_k, snapped to −κ_p when resonant.
    pub beta: f64,
    pub alpha: C,
    /// Index p with β_k + κ_p = 0, if any.
    pub resonance: Option<i64>,
}

/// How the infinite system is cut down to |n| ≤ n_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Unmeasured Φ_n are set to zero and the infinite system is solved;
    /// only the band of μ_n is kept.
    ZeroData,
    /// μ_n = 0 outside the band; only the in-band equations are kept.
    /// The more accurate of the two on sampled data.
    #[default]
    ZeroCoefficients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSystem {
    pub q: f64,
    pub nmax: usize,
    pub strip_width: f64,
    pub rays: Vec<RayTerm>,
    pub sigma1: f64,
    /// B = Σ_k s_k β_k / u_kz; d_n ≈ i(Σ1 − B/κ_n)/κ_n at large |n|.
    pub beta_moment: f64,
    /// Φ_n for n = −n_max..=n_max.
    pub rhs: Vec<C>,
}

/// Build the system for one q. Rays with β_k = −κ_p are handled by their
/// exact limit: the ray adds s·L/(2|u_z|) to d_p and the rank-two coupling
/// −(i s/u_z)(|e_p⟩⟨r_p| + |r_p⟩⟨e_p|), r_p(n) = 1/(κ_n − κ_p).
pub fn assemble(g: &StarGeometry, q: f64, nmax: usize, rhs: &[C]) -> Result<SpectralSystem> {
    if rhs.len() != 2 * nmax + 1 {
        return Err(Error::Dimension { expected: 2 * nmax + 1, got: rhs.len() });
    }
    let l = g.strip_width();
    let kappa1 = 2.0 * PI / l;
    let mut rays = Vec::with_capacity(g.len());
    let mut beta_moment = 0.0;
    for (k, r) in g.rays().iter().enumerate() {
        let mut beta = g.beta(k, q);
        let p = (-beta / kappa1).round();
        let resonance = if (beta + p * kappa1).abs() < RESONANCE_REL * kappa1 {
            beta = -p * kappa1;
            Some(p as i64)
        } else {
            None
        };
        let alpha = match resonance {
            Some(_) => C::new(0.0, 0.0),
            None => {
                let xi = g.exit_z(k);
                C::from_polar(1.0, beta * xi) * (C::from_polar(1.0, -beta * l) - 1.0) / (l * r.uz())
            }
        };
        beta_moment += r.weight() * beta / r.uz();
        rays.push(RayTerm { weight: r.weight(), uz: r.uz(), beta, alpha, resonance });
    }
    Ok(SpectralSystem {
        q,
        nmax,
        strip_width: l,
        rays,
        sigma1: sigma_moments(g).sigma1,
        beta_moment,
        rhs: rhs.to_vec(),
    })
}

impl SpectralSystem {
    pub fn kappa1(&self) -> f64 {
        2.0 * PI / self.strip_width
    }

    pub fn width(&self) -> usize {
        2 * self.nmax + 1
    }

    /// Band index → n.
    pub fn n_of(&self, i: usize) -> i64 {
        i as i64 - self.nmax as i64
    }

    /// d_n for any n.
    pub fn diag(&self, n: i64) -> C {
        let k1 = self.kappa1();
        let l = self.strip_width;
        let mut d = C::new(0.0, 0.0);
        for r in &self.rays {
            if r.resonance == Some(n) {
                d += r.weight * l / (2.0 * r.uz.abs());
            } else {
                d += I * r.weight / (r.uz * (r.beta + k1 * n as f64));
            }
        }
        d
    }

    pub fn diag_band(&self) -> Vec<C> {
        (0..self.width()).map(|i| self.diag(self.n_of(i))).collect()
    }

    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for r in &self.rays {
            match r.resonance {
                None => {
                    let v = Lazy::Pole { beta: r.beta };
                    out.push(Term { coef: r.weight * r.alpha, b: v, a: v });
                }
                Some(p) => {
                    let c = -I * r.weight / r.uz;
                    out.push(Term { coef: c, b: Lazy::Unit { p }, a: Lazy::PoleDeleted { p } });
                    out.push(Term { coef: c, b: Lazy::PoleDeleted { p }, a: Lazy::Unit { p } });
                }
            }
        }
        out
    }

    /// Largest scale |β| among rays and resonance indices, in units of κ_1.
    pub fn beta_extent(&self) -> f64 {
        let k1 = self.kappa1();
        self.rays.iter().map(|r| r.beta.abs() / k1).fold(0.0, f64::max)
    }

    /// The in-band operator under the chosen truncation, as a square
    /// diagonal-plus-separable matrix (rows and columns ordered n = −n_max..).
    pub fn band_operator(&self, trunc: Truncation, n_sum: usize) -> Result<DiagPlusSeparable> {
        let k1 = self.kappa1();
        let w = self.width();
        let d = self.diag_band();
        let terms = self.terms();
        let mut bs: Vec<Vec<C>> = Vec::with_capacity(terms.len());
        let mut as_: Vec<Vec<C>> = Vec::with_capacity(terms.len());
        for t in &terms {
            bs.push((0..w).map(|i| t.coef * t.b.eval(self.n_of(i), k1)).collect());
            as_.push((0..w).map(|i| C::new(t.a.eval(self.n_of(i), k1), 0.0)).collect());
        }
        if trunc == Truncation::ZeroData {
            // Eliminate the out-of-band unknowns: ã_k = Σ_j conj(G_kj) a_j,
            // G = (I + E)^{-1}, E_kj = Σ_{|n|>n_max} a_k(n) b_j(n)/d_n.
            let kk = terms.len();
            let series = crate::solver::direct::Series::new(self, n_sum)?;
            let mut e = nalgebra::DMatrix::<C>::identity(kk, kk);
            for a in 0..kk {
                for b in 0..kk {
                    e[(a, b)] += terms[b].coef * series.sum(terms[a].a, terms[b].b, Some(self.nmax as i64))?;
                }
            }
            let g = e
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::SingularSystem { condition: f64::INFINITY })?;
            let plain = as_.clone();
            for (kidx, a_new) in as_.iter_mut().enumerate() {
                for (i, v) in a_new.iter_mut().enumerate() {
                    *v = (0..kk).map(|j| g[(kidx, j)].conj() * plain[j][i]).sum();
                }
            }
        }
        Ok(DiagPlusSeparable::new(w, w, d, bs, as_))
    }
}

/// Overdetermined system with μ_0 known: unknowns μ_n, n ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    /// Rows ordered n = −n_max..−1, 1..n_max, then n = 0.
    pub operator: DiagPlusSeparable,
    pub rhs: Vec<C>,
    pub mu0: C,
    pub nmax: usize,
}

impl ReducedSystem {
    /// Unknown index → n.
    pub fn n_of(&self, i: usize) -> i64 {
        let nm = self.nmax as i64;
        let i = i as i64;
        if i < nm {
            i - nm
        } else {
            i - nm + 1
        }
    }
}

/// Row/column order that puts n = 0 last.
fn reduced_order(nmax: usize) -> Vec<i64> {
    let nm = nmax as i64;
    (-nm..0).chain(1..=nm).chain(std::iter::once(0)).collect()
}

/// Move the known μ_0 column to the right-hand side:
/// Ψ = Φ − μ_0·A[:, 0] over all 2n_max+1 rows, unknowns n ≠ 0.
pub fn projection_reduce(s: &SpectralSystem, mu0: C, trunc: Truncation, n_sum: usize) -> Result<ReducedSystem> {
    if s.q == 0.0 {
        return Err(Error::Domain("projection reduction needs q != 0".into()));
    }
    let full = s.band_operator(trunc, n_sum)?;
    let nm = s.nmax as i64;
    let idx = |n: i64| (n + nm) as usize;
    let order = reduced_order(s.nmax);
    let col0 = full.column(idx(0));
    let rhs: Vec<C> = order.iter().map(|&n| s.rhs[idx(n)] - mu0 * col0[idx(n)]).collect();
    let m = order.len() - 1;
    let d: Vec<C> = order[..m].iter().map(|&n| full.d[idx(n)]).collect();
    let bs = full.b.iter().map(|b| order.iter().map(|&n| b[idx(n)]).collect()).collect();
    let as_ = full.a.iter().map(|a| order[..m].iter().map(|&n| a[idx(n)]).collect()).collect();
    Ok(ReducedSystem { operator: DiagPlusSeparable::new(order.len(), m, d, bs, as_), rhs, mu0, nmax: s.nmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::stability::table1_geometry;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn ramp_is_transformed_exactly() {
        // f(z) = z on every row: ∫ z e^{−iκz} dz = iL/κ, and L²/2 at n = 0.
        let grid = Grid::new(31, 3, 1.0).unwrap();
        let mut f = DataField::zeros(grid);
        for r in 0..grid.n + 2 {
            for i in 0..3 {
                f.set(i, r, f.z_row(r));
            }
        }
        let t = field_to_coefficients(&f, 15).unwrap();
        let w = grid.window();
        assert!(close(t.get(0, 0), C::new(0.5 * w, 0.0), 1e-12));
        for n in 1..=15i64 {
            let kappa = 2.0 * PI * n as f64;
            assert!(close(t.get(0, n), I * w / kappa, 1e-12), "n = {n}");
            assert!(close(t.get(0, -n), -I * w / kappa, 1e-12));
        }
    }

    #[test]
    fn constant_field() {
        let grid = Grid::new(15, 9, 2.0).unwrap();
        let mut f = DataField::zeros(grid);
        f.values.iter_mut().for_each(|v| *v = 3.0);
        let t = field_to_coefficients(&f, 7).unwrap();
        assert!(close(t.get(0, 0), C::new(3.0 * 2.0 * grid.window(), 0.0), 1e-12));
        for n in 1..=7 {
            assert!(t.get(0, n).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_band_limited() {
        let grid = Grid::new(31, 17, 1.0).unwrap();
        let img = ImageGrid::from_fn(grid, |y, z| {
            (2.0 * PI * z).sin() * (1.0 + 0.3 * y) + 0.2 * (6.0 * PI * z).sin() * (y * 5.0).cos()
        });
        let t = image_to_coefficients(&img, 15).unwrap();
        let back = coefficients_to_image(&t);
        for (a, b) in img.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn q_zero_limit() {
        let g = table1_geometry("2a", 1.0).unwrap();
        let s = assemble(&g, 0.0, 5, &vec![C::new(0.0, 0.0); 11]).unwrap();
        let sig = crate::stability::sigma_moments(&g);
        assert!(s.rays.iter().all(|r| r.alpha == C::new(0.0, 0.0)));
        for n in [-5i64, -1, 1, 3] {
            let kappa = 2.0 * PI * n as f64;
            assert!(close(s.diag(n), I * sig.sigma1 / kappa, 1e-12));
        }
        assert!(close(s.diag(0), C::new(0.5 * sig.sigma0, 0.0), 1e-12));
    }

    #[test]
    fn diag_matches_direct_formula_off_resonance() {
        let g = table1_geometry("3a", 1.0).unwrap();
        let q = 3.7;
        let s = assemble(&g, q, 10, &vec![C::new(0.0, 0.0); 21]).unwrap();
        for n in -10..=10i64 {
            let kappa = 2.0 * PI * n as f64;
            let direct: C = g.rays().iter().map(|r| I * r.weight() / (r.uy() * q + r.uz() * kappa)).sum();
            assert!(close(s.diag(n), direct, 1e-12));
        }
    }

    #[test]
    fn diag_asymptote() {
        let g = table1_geometry("2b", 1.0).unwrap();
        let sig = crate::stability::sigma_moments(&g);
        let q = 2.0;
        let s = assemble(&g, q, 3, &vec![C::new(0.0, 0.0); 7]).unwrap();
        let n = 100_000i64;
        let kappa = 2.0 * PI * n as f64;
        let asym = I * sig.sigma1 / kappa + I * sig.sigma2 * q / (kappa * kappa);
        assert!((s.diag(n) - asym).norm() < 1e-3 / (kappa * kappa));
    }

    #[test]
    fn reduced_shape() {
        let g = table1_geometry("2b", 1.0).unwrap();
        let s = assemble(&g, 1.3, 6, &vec![C::new(1.0, 0.0); 13]).unwrap();
        let r = projection_reduce(&s, C::new(0.0, 0.0), Truncation::ZeroCoefficients, 100).unwrap();
        assert_eq!(r.operator.rows, 13);
        assert_eq!(r.operator.cols, 12);
        assert!(r.rhs.iter().all(|v| *v == C::new(1.0, 0.0)));
    }
}
