//! Forward data: ray integrals, star transforms, pairwise measurements,
//! photon-count noise, and recombination of pairs into a star transform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CoefficientMatrix, StarGeometry};
use crate::grid::{DataField, Grid, PairwiseField};
use crate::phantom::Phantom;

/// I_k(R): integral of δμ from the vertex to the strip boundary along ray k.
pub fn ray_integral(p: &Phantom, g: &StarGeometry, k: usize, vertex: (f64, f64)) -> Result<f64> {
    let len = g.exit_distance(k, vertex.1)?;
    Ok(p.line_integral(vertex, g.ray(k).direction(), len))
}

fn field_from(grid: Grid, f: impl Fn(f64, f64) -> f64 + Sync) -> DataField {
    let ny = grid.ny;
    let h = grid.h();
    let mut out = DataField::zeros(grid);
    out.values.par_chunks_mut(ny).enumerate().for_each(|(r, row)| {
        let z = r as f64 * h;
        for (i, v) in row.iter_mut().enumerate() {
            *v = f(grid.y(i), z);
        }
    });
    out
}

fn check_strip(p: &Phantom, g: &StarGeometry, grid: Grid) -> Result<()> {
    let (a, b, c) = (p.strip_width, g.strip_width(), grid.strip_width);
    if (a - b).abs() > 1e-12 * a || (a - c).abs() > 1e-12 * a {
        return Err(Error::Geometry(format!("strip widths disagree: phantom {a}, geometry {b}, grid {c}")));
    }
    Ok(())
}

/// I_k sampled on every data row, boundaries included.
pub fn ray_field(p: &Phantom, g: &StarGeometry, k: usize, grid: Grid) -> Result<DataField> {
    check_strip(p, g, grid)?;
    let dir = g.ray(k).direction();
    let l = grid.strip_width;
    let xi = g.exit_z(k);
    let uz = g.ray(k).uz();
    Ok(field_from(grid, |y, z| {
        let z = z.min(l);
        let len = ((xi - z) / uz).max(0.0);
        p.line_integral((y, z), dir, len)
    }))
}

/// Φ(R) = Σ s_k I_k(R).
pub fn star_transform(p: &Phantom, g: &StarGeometry, grid: Grid) -> Result<DataField> {
    let mut out = DataField::zeros(grid);
    for (k, r) in g.rays().iter().enumerate() {
        out.add_scaled(&ray_field(p, g, k, grid)?, r.weight())?;
    }
    Ok(out)
}

/// φ_jk = I_j + I_k + η for every pair j < k. η comes from the phantom's
/// scattering stack when `with_scattering` is set.
pub fn pairwise_fields(p: &Phantom, g: &StarGeometry, grid: Grid, with_scattering: bool) -> Result<Vec<PairwiseField>> {
    let rays: Vec<DataField> = (0..g.len()).map(|k| ray_field(p, g, k, grid)).collect::<Result<_>>()?;
    let eta = if with_scattering && !p.scattering.is_empty() {
        Some(field_from(grid, |y, z| p.scattering_value(y, z)))
    } else {
        None
    };
    let mut out = Vec::new();
    for j in 0..g.len() {
        for k in j + 1..g.len() {
            let mut f = rays[j].clone();
            f.add_scaled(&rays[k], 1.0)?;
            if let Some(e) = &eta {
                f.add_scaled(e, 1.0)?;
            }
            out.push(PairwiseField { j, k, field: f });
        }
    }
    Ok(out)
}

/// Expected count nint(𝒩·e^{−φ}).
pub fn expected_count(phi: f64, photons: f64) -> f64 {
    (photons * (-phi).exp()).round()
}

const MAX_REDRAWS: usize = 100;

/// Noisy copy of a pairwise field. Each node draws M ~ Poisson(nint(𝒩e^{−φ}))
/// and reports φ' = −ln(M/𝒩). Zero counts are redrawn, then clamped to 1;
/// the second return value is the number of clamps. The stream for a node
/// depends only on (seed, pair, node).
pub fn add_poisson_noise(field: &PairwiseField, photons: f64, seed: u64) -> Result<(PairwiseField, usize)> {
    if !(photons >= 1.0) || !photons.is_finite() {
        return Err(Error::Domain(format!("photon count must be >= 1, got {photons}")));
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let pair_id = ((field.j as u64) << 16) | field.k as u64;
    let draws: Vec<(f64, bool)> = field
        .field
        .values
        .par_iter()
        .enumerate()
        .map(|(node, &phi)| {
            let mut rng = base.clone();
            rng.set_stream((pair_id << 40) | node as u64);
            let mean = expected_count(phi, photons);
            let mut m = 0.0;
            if mean > 0.0 {
                let dist = Poisson::new(mean).expect("positive finite mean");
                for _ in 0..MAX_REDRAWS {
                    m = dist.sample(&mut rng);
                    if m > 0.0 {
                        break;
                    }
                }
            }
            let clamped = m == 0.0;
            if clamped {
                m = 1.0;
            }
            (-(m / photons).ln(), clamped)
        })
        .collect();
    let clamps = draws.iter().filter(|d| d.1).count();
    let mut out = field.clone();
    out.field.values = draws.into_iter().map(|d| d.0).collect();
    Ok((out, clamps))
}

/// Φ = ½ Σ_jk c_jk φ_jk = Σ_{j<k} c_jk φ_jk.
pub fn combine_pairs(fields: &[PairwiseField], c: &CoefficientMatrix) -> Result<DataField> {
    let first = fields.first().ok_or_else(|| Error::MissingPair(0, 1))?;
    let mut out = DataField::zeros(first.field.grid);
    for j in 0..c.len() {
        for k in j + 1..c.len() {
            let w = c.get(j, k);
            if w == 0.0 {
                continue;
            }
            let f = fields.iter().find(|f| f.j == j && f.k == k).ok_or(Error::MissingPair(j, k))?;
            out.add_scaled(&f.field, w)?;
        }
    }
    Ok(out)
}
