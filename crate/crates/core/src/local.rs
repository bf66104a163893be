//! Local reconstruction from vector combinations of pairwise data:
//! Φ⃗ = Σ_{j<k} c⃗_jk φ_jk = Σ_k σ_k û_k I_k, and μ = −(1/ζ) ∇·Φ⃗ with
//! ζ = Σ_k σ_k.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::grid::{DataField, ImageGrid, PairwiseField};

#[derive(Debug, Clone, PartialEq)]
pub struct VectorScheme {
    /// c⃗_jk as (y, z) components.
    pub c: Vec<Vec<[f64; 2]>>,
    pub sigma: Vec<f64>,
    pub zeta: f64,
}

impl VectorScheme {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Largest violation of the four scheme conditions against `g`.
    pub fn defect(&self, g: &StarGeometry) -> f64 {
        let k = self.len();
        let mut worst = 0.0_f64;
        let mut total = [0.0; 2];
        for a in 0..k {
            worst = worst.max(self.c[a][a][0].abs()).max(self.c[a][a][1].abs());
            let mut col = [0.0; 2];
            for b in 0..k {
                for d in 0..2 {
                    worst = worst.max((self.c[a][b][d] - self.c[b][a][d]).abs());
                    col[d] += self.c[b][a][d];
                    total[d] += self.c[b][a][d];
                }
            }
            let (uy, uz) = g.ray(a).direction();
            worst = worst.max((col[0] - self.sigma[a] * uy).abs()).max((col[1] - self.sigma[a] * uz).abs());
        }
        worst.max(total[0].abs()).max(total[1].abs())
    }
}

/// σ with Σ σ_k û_k = 0 and σ_k = 0 on `zero_set`, of least norm for its
/// sum, scaled so ζ equals the number of rays used. With one excluded ray
/// that ray becomes the hub of a star pattern (c⃗_{hk} = σ_k û_k); otherwise
/// c⃗_jk = (σ_j û_j + σ_k û_k)/(K' − 2) over the K' used rays.
pub fn solve_sigmas(g: &StarGeometry, zero_set: &[usize]) -> Result<VectorScheme> {
    let k = g.len();
    if let Some(&bad) = zero_set.iter().find(|&&z| z >= k) {
        return Err(Error::Domain(format!("ray index {bad} out of range for K = {k}")));
    }
    let used: Vec<usize> = (0..k).filter(|i| !zero_set.contains(i)).collect();
    let kp = used.len();
    if kp < 3 {
        return Err(Error::Geometry(format!("local schemes need at least 3 rays, {kp} usable")));
    }
    let u = DMatrix::from_fn(2, kp, |r, c| {
        let (uy, uz) = g.ray(used[c]).direction();
        if r == 0 {
            uy
        } else {
            uz
        }
    });
    let pinv = u.clone().pseudo_inverse(1e-12).map_err(|e| Error::Solver(e.to_string()))?;
    let ones = DVector::from_element(kp, 1.0);
    let proj = &ones - &pinv * (&u * &ones);
    let sum: f64 = proj.iter().sum();
    if sum.abs() <= 1e-9 * kp as f64 {
        return Err(Error::Geometry("every sigma with sum(sigma_k u_k) = 0 has zero sum".into()));
    }
    let mut sigma = vec![0.0; k];
    for (c, &i) in used.iter().enumerate() {
        sigma[i] = proj[c] * kp as f64 / sum;
    }
    let su = |i: usize| {
        let (uy, uz) = g.ray(i).direction();
        [sigma[i] * uy, sigma[i] * uz]
    };
    let mut c = vec![vec![[0.0; 2]; k]; k];
    if zero_set.len() == 1 {
        let hub = zero_set[0];
        for &i in &used {
            c[hub][i] = su(i);
            c[i][hub] = su(i);
        }
    } else {
        let w = 1.0 / (kp as f64 - 2.0);
        for &a in &used {
            for &b in &used {
                if a != b {
                    let (x, y) = (su(a), su(b));
                    c[a][b] = [w * (x[0] + y[0]), w * (x[1] + y[1])];
                }
            }
        }
    }
    let zeta = sigma.iter().sum();
    Ok(VectorScheme { c, sigma, zeta })
}

/// Two-component data field (Φ_y, Φ_z).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub y: DataField,
    pub z: DataField,
}

impl VectorField {
    /// w·û·I for a single field, e.g. one ray integral.
    pub fn along(direction: (f64, f64), field: &DataField, weight: f64) -> Self {
        let mut y = field.clone();
        let mut z = field.clone();
        y.scale(weight * direction.0);
        z.scale(weight * direction.1);
        VectorField { y, z }
    }
}

pub fn vector_combine(fields: &[PairwiseField], scheme: &VectorScheme) -> Result<VectorField> {
    let first = fields.first().ok_or(Error::MissingPair(0, 1))?;
    let mut y = DataField::zeros(first.field.grid);
    let mut z = DataField::zeros(first.field.grid);
    for a in 0..scheme.len() {
        for b in a + 1..scheme.len() {
            let [cy, cz] = scheme.c[a][b];
            if cy == 0.0 && cz == 0.0 {
                continue;
            }
            let f = fields.iter().find(|f| f.j == a && f.k == b).ok_or(Error::MissingPair(a, b))?;
            y.add_scaled(&f.field, cy)?;
            z.add_scaled(&f.field, cz)?;
        }
    }
    Ok(VectorField { y, z })
}

/// μ = −(1/ζ)(∂_Y Φ_y + ∂_Z Φ_z) on the interior nodes. Central differences
/// throughout, except one-sided ones at the two ends of the Y window.
pub fn divergence_reconstruct(field: &VectorField, zeta: f64) -> Result<ImageGrid> {
    if !(zeta.abs() > 1e-12) || !zeta.is_finite() {
        return Err(Error::Domain(format!("zeta must be nonzero, got {zeta}")));
    }
    let grid = field.y.grid;
    if field.z.grid != grid {
        return Err(Error::Dimension { expected: field.y.values.len(), got: field.z.values.len() });
    }
    let (ny, h) = (grid.ny, grid.h());
    let mut out = ImageGrid::zeros(grid);
    out.values.par_chunks_mut(ny).enumerate().for_each(|(j, row)| {
        let r = j + 1;
        let fy = field.y.row(r);
        let (below, above) = (field.z.row(r - 1), field.z.row(r + 1));
        for (i, v) in row.iter_mut().enumerate() {
            let dy = if ny == 1 {
                0.0
            } else if i == 0 {
                (fy[1] - fy[0]) / h
            } else if i == ny - 1 {
                (fy[i] - fy[i - 1]) / h
            } else {
                (fy[i + 1] - fy[i - 1]) / (2.0 * h)
            };
            let dz = (above[i] - below[i]) / (2.0 * h);
            *v = -(dy + dz) / zeta;
        }
    });
    Ok(out)
}
