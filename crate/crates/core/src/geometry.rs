//! Star geometries and the scalar coefficient schemes that combine pairwise
//! measurements into a star transform.

use crate::error::{Error, Result};

/// Rays closer to horizontal than this are rejected; the exit distance would
/// otherwise exceed 1e9 strip widths.
pub const MIN_ABS_UZ: f64 = 1e-9;

/// One ray of a star. The unit vector is derived from the angle at
/// construction and never set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    theta: f64,
    weight: f64,
    uy: f64,
    uz: f64,
}

impl Ray {
    fn new(theta: f64, weight: f64) -> Self {
        let (uy, uz) = theta.sin_cos();
        Ray { theta, weight, uy, uz }
    }

    /// Angle from the +Z axis, counter-clockwise positive.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn uy(&self) -> f64 {
        self.uy
    }

    pub fn uz(&self) -> f64 {
        self.uz
    }

    pub fn direction(&self) -> (f64, f64) {
        (self.uy, self.uz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarGeometry {
    rays: Vec<Ray>,
    strip_width: f64,
}

impl StarGeometry {
    pub fn new(angles: &[f64], weights: &[f64], strip_width: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Geometry("at least one ray is required".into()));
        }
        if angles.len() != weights.len() {
            return Err(Error::Geometry(format!(
                "{} angles but {} weights",
                angles.len(),
                weights.len()
            )));
        }
        if !(strip_width > 0.0) || !strip_width.is_finite() {
            return Err(Error::Geometry(format!("strip width must be positive, got {strip_width}")));
        }
        let mut rays = Vec::with_capacity(angles.len());
        for (k, (&t, &s)) in angles.iter().zip(weights).enumerate() {
            if !t.is_finite() || !s.is_finite() {
                return Err(Error::Geometry(format!("ray {k}: non-finite angle or weight")));
            }
            if s == 0.0 {
                return Err(Error::Geometry(format!("ray {k}: weight must be nonzero")));
            }
            let ray = Ray::new(t, s);
            if ray.uz.abs() < MIN_ABS_UZ {
                return Err(Error::Geometry(format!(
                    "ray {k}: angle {t} is parallel to the strip (|cos| < {MIN_ABS_UZ:e})"
                )));
            }
            rays.push(ray);
        }
        Ok(StarGeometry { rays, strip_width })
    }

    /// Same as [`StarGeometry::new`] with angles given in units of π.
    pub fn from_turns(theta_over_pi: &[f64], weights: &[f64], strip_width: f64) -> Result<Self> {
        let angles: Vec<f64> = theta_over_pi.iter().map(|t| t * std::f64::consts::PI).collect();
        Self::new(&angles, weights, strip_width)
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn ray(&self, k: usize) -> &Ray {
        &self.rays[k]
    }

    pub fn strip_width(&self) -> f64 {
        self.strip_width
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rays.iter().map(|r| r.weight).collect()
    }

    /// Copy of this geometry with new weights (same angles).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        let angles: Vec<f64> = self.rays.iter().map(|r| r.theta).collect();
        Self::new(&angles, weights, self.strip_width)
    }

    /// Z coordinate of the strip boundary the ray leaves through.
    pub fn exit_z(&self, k: usize) -> f64 {
        if self.rays[k].uz > 0.0 {
            self.strip_width
        } else {
            0.0
        }
    }

    /// Distance from a vertex at height `z` to the exit boundary along ray `k`.
    pub fn exit_distance(&self, k: usize, z: f64) -> Result<f64> {
        let l = self.strip_width;
        if !(z >= 0.0 && z <= l) {
            return Err(Error::Domain(format!("vertex z = {z} outside [0, {l}]")));
        }
        let d = (self.exit_z(k) - z) / self.rays[k].uz;
        Ok(d.max(0.0))
    }

    /// β_k(q) = q u_ky / u_kz.
    pub fn beta(&self, k: usize, q: f64) -> f64 {
        let r = &self.rays[k];
        q * r.uy / r.uz
    }

    /// Largest |tan θ_k|; sets how far a ray drifts in Y while crossing the strip.
    pub fn max_abs_slope(&self) -> f64 {
        self.rays.iter().map(|r| (r.uy / r.uz).abs()).fold(0.0, f64::max)
    }
}

/// How strictly a coefficient scheme is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// All four conditions, including Σ c_jk = 0. Needed to cancel the
    /// scattering contrast η.
    ExcludeScattering,
    /// Drops the zero-sum condition. Enough when the scattering coefficient
    /// is uniform (η = 0), e.g. for cyclic schemes.
    UniformScattering,
    /// Only symmetry and a zero diagonal. Admits degenerate schemes with
    /// vanishing column sums, such as those isolating a single ray.
    Structural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Cyclic nearest-neighbour pairs, every s_k = 1.
    Uniform,
    /// Zero-sum tables that cancel η.
    ZeroSum,
}

/// Symmetric K×K table c_jk with zero diagonal. Column sums give the ray
/// weights s_k of the resulting star transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    k: usize,
    c: Vec<f64>,
    excludes_scattering: bool,
}

const COEF_TOL: f64 = 1e-12;

impl CoefficientMatrix {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.c[j * self.k + k]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.k).map(|k| (0..self.k).map(|j| self.get(j, k)).sum()).collect()
    }

    /// True when Σ c_jk = 0, so η drops out of the combination.
    pub fn excludes_scattering(&self) -> bool {
        self.excludes_scattering
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.c.chunks(self.k).map(|r| r.to_vec()).collect()
    }
}

/// Strict validation: all four conditions.
pub fn validate_coefficients(c: &[Vec<f64>]) -> Result<CoefficientMatrix> {
    validate_coefficients_with(c, Requirement::ExcludeScattering)
}

pub fn validate_coefficients_with(c: &[Vec<f64>], req: Requirement) -> Result<CoefficientMatrix> {
    let k = c.len();
    if k == 0 {
        return Err(Error::Coefficients("empty table".into()));
    }
    let mut flat = Vec::with_capacity(k * k);
    for (j, row) in c.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Coefficients(format!("row {j} has {} entries, expected {k}", row.len())));
        }
        for &v in row {
            if !v.is_finite() {
                return Err(Error::Coefficients(format!("row {j}: non-finite entry")));
            }
        }
        flat.extend_from_slice(row);
    }
    let scale = flat.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = COEF_TOL * scale;
    for j in 0..k {
        if flat[j * k + j].abs() > tol {
            return Err(Error::Coefficients(format!("diagonal entry c[{j}][{j}] must be zero")));
        }
        for i in 0..j {
            if (flat[i * k + j] - flat[j * k + i]).abs() > tol {
                return Err(Error::Coefficients(format!("table is not symmetric at ({i}, {j})")));
            }
        }
    }
    let total: f64 = flat.iter().sum();
    let zero_sum = total.abs() <= tol * (k * k) as f64;
    if req == Requirement::ExcludeScattering && !zero_sum {
        return Err(Error::Coefficients(format!("entries sum to {total}, not zero")));
    }
    let m = CoefficientMatrix { k, c: flat, excludes_scattering: zero_sum };
    if req == Requirement::Structural {
        return Ok(m);
    }
    for (i, s) in m.column_sums().iter().enumerate() {
        if s.abs() <= tol {
            return Err(Error::Coefficients(format!("column {i} sums to zero")));
        }
    }
    Ok(m)
}

/// Built-in schemes. Zero-sum tables exist for K = 3 and K = 4.
pub fn default_scheme(k: usize, kind: SchemeKind) -> Result<CoefficientMatrix> {
    match kind {
        SchemeKind::Uniform => {
            if k < 2 {
                return Err(Error::Coefficients("uniform scheme needs K >= 2".into()));
            }
            let mut c = vec![vec![0.0; k]; k];
            for i in 0..k {
                let j = (i + 1) % k;
                c[i][j] += 0.5;
                c[j][i] += 0.5;
            }
            validate_coefficients_with(&c, Requirement::UniformScattering)
        }
        SchemeKind::ZeroSum => match k {
            3 => validate_coefficients(&[
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, -2.0],
                vec![1.0, -2.0, 0.0],
            ]),
            4 => validate_coefficients(&[
                vec![0.0, 1.0, 1.0, -1.0],
                vec![1.0, 0.0, -1.0, -1.0],
                vec![1.0, -1.0, 0.0, 1.0],
                vec![-1.0, -1.0, 1.0, 0.0],
            ]),
            _ => Err(Error::Coefficients(format!("no built-in zero-sum scheme for K = {k}"))),
        },
    }
}

/// Least-norm symmetric table with zero diagonal whose column sums equal
/// `weights`. Unique for K = 3, e.g. (1, 1, −2) gives c12 = 2, c13 = c23 = −1.
/// For K = 2 both weights must agree.
pub fn scheme_for_weights(weights: &[f64]) -> Result<CoefficientMatrix> {
    let k = weights.len();
    if k < 2 {
        return Err(Error::Coefficients("a pairwise scheme needs K >= 2".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|j| (j + 1..k).map(move |i| (j, i))).collect();
    let a = nalgebra::DMatrix::from_fn(k, pairs.len(), |r, c| {
        let (j, i) = pairs[c];
        if r == j || r == i {
            1.0
        } else {
            0.0
        }
    });
    let s = nalgebra::DVector::from_column_slice(weights);
    let pinv = a.clone().pseudo_inverse(1e-12).map_err(|e| Error::Coefficients(e.to_string()))?;
    let x = &pinv * &s;
    let scale = weights.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if (&a * &x - &s).amax() > 1e-10 * scale {
        return Err(Error::Coefficients(format!("no pairwise scheme has column sums {weights:?}")));
    }
    let mut c = vec![vec![0.0; k]; k];
    for (&(j, i), v) in pairs.iter().zip(x.iter()) {
        let v = if v.abs() < 1e-14 * scale { 0.0 } else { *v };
        c[j][i] = v;
        c[i][j] = v;
    }
    validate_coefficients_with(&c, Requirement::UniformScattering)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_vectors_follow_angle_convention() {
        let g = StarGeometry::from_turns(&[1.0, 0.25], &[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(g.ray(0).uy(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.ray(0).uz(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.ray(1).uy(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.ray(1).uz(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn exit_boundary() {
        let g = StarGeometry::from_turns(&[0.0], &[1.0], 1.0).unwrap();
        assert_eq!(g.exit_z(0), 1.0);
        let g = StarGeometry::from_turns(&[0.25, 1.0], &[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(g.exit_distance(0, 0.5).unwrap(), 0.5 / 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.exit_distance(1, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(g.exit_distance(0, 1.0).unwrap(), 0.0);
        assert!(g.exit_distance(0, 1.5).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StarGeometry::from_turns(&[0.5], &[1.0], 1.0).is_err());
        assert!(StarGeometry::from_turns(&[0.2], &[0.0], 1.0).is_err());
        assert!(StarGeometry::from_turns(&[0.2], &[1.0], 0.0).is_err());
        assert!(StarGeometry::from_turns(&[0.2, 0.3], &[1.0], 1.0).is_err());
        assert!(StarGeometry::from_turns(&[], &[], 1.0).is_err());
    }

    #[test]
    fn scheme_from_weights() {
        let c = scheme_for_weights(&[1.0, 1.0, -2.0]).unwrap();
        assert_abs_diff_eq!(c.get(0, 1), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.get(0, 2), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.get(1, 2), -1.0, epsilon = 1e-12);
        assert!(c.excludes_scattering());
        let c = scheme_for_weights(&[1.0, 2.0, -1.0, 0.5]).unwrap();
        for (a, b) in c.column_sums().iter().zip([1.0, 2.0, -1.0, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(scheme_for_weights(&[1.0, 1.0]).unwrap().get(0, 1), 1.0);
        assert!(scheme_for_weights(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn printed_tables() {
        let c3 = default_scheme(3, SchemeKind::ZeroSum).unwrap();
        assert_eq!(c3.column_sums(), vec![2.0, -1.0, -1.0]);
        let c4 = default_scheme(4, SchemeKind::ZeroSum).unwrap();
        assert_eq!(c4.column_sums(), vec![1.0, -1.0, 1.0, -1.0]);
        assert!(c4.excludes_scattering());
    }

    #[test]
    fn two_by_two_fails_strict_check() {
        let c = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(validate_coefficients(&c), Err(Error::Coefficients(_))));
        let m = validate_coefficients_with(&c, Requirement::UniformScattering).unwrap();
        assert_eq!(m.column_sums(), vec![1.0, 1.0]);
        assert!(!m.excludes_scattering());
    }

    #[test]
    fn cyclic_schemes() {
        for k in 2..=8 {
            let m = default_scheme(k, SchemeKind::Uniform).unwrap();
            for s in m.column_sums() {
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn asymmetric_and_diagonal_rejected() {
        let c = vec![vec![0.0, 1.0, -1.0], vec![2.0, 0.0, -1.0], vec![-1.0, -1.0, 0.0]];
        assert!(validate_coefficients(&c).is_err());
        let c = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert!(validate_coefficients(&c).is_err());
    }
}
