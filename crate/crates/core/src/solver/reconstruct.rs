//! Full-image reconstruction: transform the data, solve one system per q,
//! transform back.

use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::direct::{direct_solve, solve_finite, solve_normal};
use super::pinv::{apply_pinv, recursive_pinv};
use super::q0::solve_q0;
use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::grid::{DataField, ImageGrid};
use crate::spectral::{
    assemble, boundary_average, coefficients_to_image, field_to_coefficients, projection_reduce, y_coefficients,
    CoefficientTable, Truncation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Tikhonov pseudo-inverse built term by term.
    Recursive,
    /// K×K reduction (normal equations when λ > 0).
    #[default]
    Direct,
}

/// How the q = 0 slice is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Q0Mode {
    /// Closed form from Δ̃(0), Σ0 and Σ1.
    #[default]
    Analytic,
    /// Same solver as every other slice.
    System,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    pub method: Method,
    pub lambda: f64,
    /// Defaults to (N − 1)/2.
    pub nmax: Option<usize>,
    pub n_sum: usize,
    pub truncation: Truncation,
    /// Vertical projections P(Y_i) = ∫_0^L μ(Y_i, z) dz on the data grid; when
    /// present every q ≠ 0 slice uses the reduced overdetermined system.
    pub ballistic: Option<Vec<f64>>,
    pub q0: Q0Mode,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            method: Method::Direct,
            lambda: 0.0,
            nmax: None,
            n_sum: 200,
            truncation: Truncation::default(),
            ballistic: None,
            q0: Q0Mode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceReport {
    pub q: f64,
    /// Condition number of the reduced K×K (or 2K×2K) system, if one was formed.
    pub condition: Option<f64>,
    /// Set when the slice failed and was zero-filled.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ImageGrid,
    pub coefficients: CoefficientTable,
    /// One entry per q ≥ 0, in increasing q.
    pub slices: Vec<SliceReport>,
    pub warnings: Vec<String>,
}

impl Reconstruction {
    pub fn failures(&self) -> usize {
        self.slices.iter().filter(|s| s.failure.is_some()).count()
    }
}

struct Ctx<'a> {
    g: &'a StarGeometry,
    opts: &'a ReconstructOptions,
    lambda: f64,
    delta0: C,
    mu0: Option<Vec<C>>,
}

fn solve_slice(ctx: &Ctx, table: &CoefficientTable, slot: usize) -> Result<(Vec<C>, Option<f64>)> {
    let q = table.q(slot);
    let rhs = table.column(slot);
    let opts = ctx.opts;
    let mu0 = ctx.mu0.as_ref().map(|m| m[slot]);
    if q == 0.0 && opts.q0 == Q0Mode::Analytic {
        let s = solve_q0(ctx.g, rhs, ctx.delta0, mu0)?;
        return Ok((s.mu, None));
    }
    let sys = assemble(ctx.g, q, table.nmax, rhs)?;
    if let (Some(m0), true) = (mu0, q != 0.0) {
        let red = projection_reduce(&sys, m0, opts.truncation, opts.n_sum)?;
        let (x, cond) = match opts.method {
            Method::Recursive => (apply_pinv(&recursive_pinv(&red.operator, ctx.lambda)?, &red.rhs)?, None),
            Method::Direct => {
                let (x, c) = solve_normal(&red.operator, &red.rhs, ctx.lambda)?;
                (x, Some(c))
            }
        };
        let nm = table.nmax;
        let mut mu = vec![C::new(0.0, 0.0); 2 * nm + 1];
        mu[nm] = m0;
        for (i, v) in x.into_iter().enumerate() {
            mu[(red.n_of(i) + nm as i64) as usize] = v;
        }
        return Ok((mu, cond));
    }
    match opts.method {
        Method::Recursive => {
            let a = sys.band_operator(opts.truncation, opts.n_sum)?;
            Ok((apply_pinv(&recursive_pinv(&a, ctx.lambda)?, rhs)?, None))
        }
        Method::Direct if ctx.lambda > 0.0 => {
            let a = sys.band_operator(opts.truncation, opts.n_sum)?;
            let (x, c) = solve_normal(&a, rhs, ctx.lambda)?;
            Ok((x, Some(c)))
        }
        Method::Direct => match opts.truncation {
            Truncation::ZeroData => {
                let s = direct_solve(&sys, opts.n_sum)?;
                Ok((s.band(), Some(s.condition)))
            }
            Truncation::ZeroCoefficients => {
                let a = sys.band_operator(opts.truncation, opts.n_sum)?;
                let (x, c) = solve_finite(&a, rhs)?;
                Ok((x, Some(c)))
            }
        },
    }
}

/// Reconstruct μ on the data grid. Slices that fail are zero-filled and
/// reported rather than aborting the run.
pub fn reconstruct(data: &DataField, g: &StarGeometry, opts: &ReconstructOptions) -> Result<Reconstruction> {
    let grid = data.grid;
    if (grid.strip_width - g.strip_width()).abs() > 1e-12 * g.strip_width() {
        return Err(Error::Domain("data grid and geometry disagree on the strip width".into()));
    }
    if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and non-negative, got {}", opts.lambda)));
    }
    let nmax = opts.nmax.unwrap_or_else(|| grid.default_nmax());
    let table = field_to_coefficients(data, nmax)?;
    let (_, delta) = boundary_average(data);
    let mu0 = match &opts.ballistic {
        Some(p) => Some(y_coefficients(grid, p)?),
        None => None,
    };

    let mut warnings = Vec::new();
    let mut lambda = opts.lambda;
    if opts.method == Method::Recursive && lambda == 0.0 {
        // Scale from the q = 0 diagonal, which bounds |d_n| from above.
        let sys0 = assemble(g, 0.0, nmax, table.column(0))?;
        let dmax = sys0.diag_band().iter().map(|v| v.norm()).fold(0.0, f64::max);
        lambda = 1e-12 * dmax;
        warnings.push(format!("lambda = 0 with the recursive method; using {lambda:.3e}"));
    }
    let ctx = Ctx { g, opts, lambda, delta0: delta[0], mu0 };

    let half = (grid.ny - 1) / 2;
    let results: Vec<(Vec<C>, SliceReport)> = (0..=half)
        .into_par_iter()
        .map(|slot| {
            let q = table.q(slot);
            match solve_slice(&ctx, &table, slot) {
                Ok((mu, condition)) => (mu, SliceReport { q, condition, failure: None }),
                Err(e) => {
                    let condition = match e {
                        Error::SingularSystem { condition } => Some(condition),
                        _ => None,
                    };
                    (vec![C::new(0.0, 0.0); 2 * nmax + 1], SliceReport { q, condition, failure: Some(e.to_string()) })
                }
            }
        })
        .collect();

    let mut out = CoefficientTable::zeros(grid, nmax);
    let mut slices = Vec::with_capacity(results.len());
    for (slot, (mu, report)) in results.into_iter().enumerate() {
        if let Some(f) = &report.failure {
            warnings.push(format!("q = {:.6e}: {f}", report.q));
        }
        out.column_mut(slot).copy_from_slice(&mu);
        if slot > 0 {
            // X_{−n}(−q) = conj X_n(q) for real fields.
            let neg = out.slot(-(slot as i64));
            let col: Vec<C> = mu.iter().rev().map(|v| v.conj()).collect();
            out.column_mut(neg).copy_from_slice(&col);
        }
        slices.push(report);
    }
    if let Some(s) = slices.first() {
        if s.failure.is_none() && opts.q0 == Q0Mode::Analytic && ctx.mu0.is_none() {
            let sig = crate::stability::sigma_moments(g);
            if sig.sigma0.abs() < super::q0::POOR_SIGMA0 {
                warnings.push(format!("Sigma0 = {:.3e}: the q = 0 mean term is poorly conditioned", sig.sigma0));
            }
        }
    }
    let image = coefficients_to_image(&out);
    Ok(Reconstruction { image, coefficients: out, slices, warnings })
}
