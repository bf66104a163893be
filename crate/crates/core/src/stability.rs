//! Invertibility diagnostics: Σ-moments for small q, zeros of the angular
//! symbol f(θ) for large q, and the half-plane test.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::StarGeometry;

const SAMPLES_PER_INTERVAL: usize = 4096;
const BISECT_TOL: f64 = 1e-10;
const NONZERO_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaMoments {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub sigma: SigmaMoments,
    pub zero_count: usize,
    pub zero_locations: Vec<f64>,
    pub k_odd: bool,
    pub halfplane_confined: bool,
    pub low_q_stable: bool,
    pub high_q_stable: bool,
}

pub fn sigma_moments(g: &StarGeometry) -> SigmaMoments {
    let mut m = SigmaMoments { sigma0: 0.0, sigma1: 0.0, sigma2: 0.0 };
    for r in g.rays() {
        let s = r.weight();
        m.sigma0 += s / r.uz().abs();
        m.sigma1 += s / r.uz();
        m.sigma2 -= s * r.uy() / (r.uz() * r.uz());
    }
    m
}

/// Scale used to decide whether a Σ-moment counts as zero.
fn moment_scale(g: &StarGeometry) -> f64 {
    g.rays().iter().map(|r| r.weight().abs() / r.uz().abs()).sum()
}

fn f_unchecked(g: &StarGeometry, theta: f64) -> f64 {
    g.rays().iter().map(|r| r.weight() / (theta - r.theta()).cos()).sum()
}

/// f(θ) = Σ s_k / cos(θ − θ_k).
pub fn f_theta(g: &StarGeometry, theta: f64) -> Result<f64> {
    for (k, r) in g.rays().iter().enumerate() {
        if (theta - r.theta()).cos().abs() < 1e-12 {
            return Err(Error::SingularAngle { theta, ray: k });
        }
    }
    Ok(f_unchecked(g, theta))
}

/// Singular angles of f reduced to [0, π), sorted and deduplicated.
fn singular_angles(g: &StarGeometry) -> Vec<f64> {
    let mut a: Vec<f64> = g
        .rays()
        .iter()
        .map(|r| {
            let t = (r.theta() + PI / 2.0).rem_euclid(PI);
            if PI - t < 1e-14 {
                0.0
            } else {
                t
            }
        })
        .collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    a
}

fn bisect(g: &StarGeometry, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f_unchecked(g, lo);
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f_unchecked(g, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign-changing zeros of f on [0, π). Tangential zeros are not detected.
pub fn count_zeros(g: &StarGeometry) -> (usize, Vec<f64>) {
    let sing = singular_angles(g);
    // Pieces of [0, π) on which f is continuous. The first and last pieces
    // touch the artificial cut at 0 ≡ π.
    let mut bounds = Vec::with_capacity(sing.len() + 2);
    bounds.push((0.0, false));
    for &s in &sing {
        bounds.push((s, true));
    }
    let cut_singular = sing.first().is_some_and(|&s| s < 1e-14);
    bounds.push((PI, cut_singular));

    let mut zeros = Vec::new();
    for w in bounds.windows(2) {
        let ((a, a_sing), (b, b_sing)) = (w[0], w[1]);
        let width = b - a;
        if width <= 0.0 {
            continue;
        }
        let margin = 1e-12 * width.max(1e-3);
        let lo = if a_sing { a + margin } else { a };
        let hi = if b_sing { b - margin } else { b };
        let step = (hi - lo) / SAMPLES_PER_INTERVAL as f64;
        let mut t_prev = lo;
        let mut f_prev = f_unchecked(g, lo);
        for i in 1..=SAMPLES_PER_INTERVAL {
            let t = if i == SAMPLES_PER_INTERVAL { hi } else { lo + step * i as f64 };
            // f(π) is the antisymmetric image of f(0); a sign change in the
            // last step up to π belongs to a zero just below π.
            let f = f_unchecked(g, t);
            if f_prev == 0.0 {
                if t_prev < PI {
                    zeros.push(t_prev);
                }
            } else if f != 0.0 && (f > 0.0) != (f_prev > 0.0) {
                let z = bisect(g, t_prev, t);
                if z < PI {
                    zeros.push(z);
                }
            }
            t_prev = t;
            f_prev = f;
        }
    }
    zeros.sort_by(|x, y| x.partial_cmp(y).unwrap());
    zeros.dedup_by(|x, y| (*x - *y).abs() < 1e-8);
    (zeros.len(), zeros)
}

/// True when all vectors s_k û_k lie in a closed half-plane.
pub fn halfplane_confined(g: &StarGeometry) -> bool {
    let mut ang: Vec<f64> = g
        .rays()
        .iter()
        .map(|r| {
            let (y, z) = (r.weight() * r.uy(), r.weight() * r.uz());
            y.atan2(z).rem_euclid(2.0 * PI)
        })
        .collect();
    ang.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = ang.len();
    let mut max_gap = 2.0 * PI - (ang[n - 1] - ang[0]);
    for w in ang.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap >= PI - 1e-12
}

pub fn classify(g: &StarGeometry) -> StabilityReport {
    let sigma = sigma_moments(g);
    let tol = NONZERO_REL * moment_scale(g);
    let (zero_count, zero_locations) = count_zeros(g);
    StabilityReport {
        sigma,
        zero_count,
        zero_locations,
        k_odd: g.len() % 2 == 1,
        halfplane_confined: halfplane_confined(g),
        low_q_stable: sigma.sigma0.abs() > tol && sigma.sigma1.abs() > tol,
        high_q_stable: zero_count == 0,
    }
}

/// The six reference geometries (angles in units of π), with strip width 1.
pub fn table1_cases() -> Vec<(&'static str, Vec<f64>, Vec<f64>)> {
    vec![
        ("1a", vec![1.0, 0.25], vec![1.0, 1.0]),
        ("1b", vec![0.82, 0.23], vec![1.0, 1.0]),
        ("2a", vec![1.0, 0.25, -0.25], vec![1.0, 1.0, 1.0]),
        ("2b", vec![1.0, 0.25, -1.0 / 6.0], vec![1.0, 1.0, 1.0]),
        ("3a", vec![0.25, 1.1, -0.2], vec![1.0, 1.0, -2.0]),
        ("3b", vec![0.25, 1.1, 0.8], vec![1.0, 1.0, -2.0]),
    ]
}

pub fn table1_geometry(case: &str, strip_width: f64) -> Result<StarGeometry> {
    let (_, t, s) = table1_cases()
        .into_iter()
        .find(|(name, _, _)| name.eq_ignore_ascii_case(case))
        .ok_or_else(|| Error::Geometry(format!("unknown reference case '{case}'")))?;
    StarGeometry::from_turns(&t, &s, strip_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_ray_value() {
        let g = StarGeometry::new(&[0.0], &[1.0], 1.0).unwrap();
        assert_abs_diff_eq!(f_theta(&g, PI / 3.0).unwrap(), 2.0, epsilon = 1e-12);
        assert!(f_theta(&g, PI / 2.0).is_err());
        assert!(halfplane_confined(&g));
    }

    #[test]
    fn f_at_zero_is_sigma1() {
        let g = table1_geometry("2a", 1.0).unwrap();
        assert_abs_diff_eq!(f_theta(&g, 0.0).unwrap(), sigma_moments(&g).sigma1, epsilon = 1e-12);
    }

    #[test]
    fn mirror_pair_has_vanishing_moments() {
        let g = StarGeometry::from_turns(&[0.25, -0.25], &[1.0, -1.0], 1.0).unwrap();
        let m = sigma_moments(&g);
        assert_abs_diff_eq!(m.sigma0, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.sigma1, 0.0, epsilon = 1e-14);
        let r = classify(&g);
        assert!(!r.low_q_stable);
        assert!(!r.high_q_stable);
    }

    #[test]
    fn two_ray_zero_is_perpendicular_to_weighted_sum() {
        // For K = 2, f vanishes where v̂ is orthogonal to s2·û1 + s1·û2.
        let g = table1_geometry("1a", 1.0).unwrap();
        let (n, z) = count_zeros(&g);
        assert_eq!(n, 1);
        let (r1, r2) = (g.ray(0), g.ray(1));
        let wy = r2.weight() * r1.uy() + r1.weight() * r2.uy();
        let wz = r2.weight() * r1.uz() + r1.weight() * r2.uz();
        let expected = (wy.atan2(wz) + PI / 2.0).rem_euclid(PI);
        assert_abs_diff_eq!(z[0], expected, epsilon = 1e-9);
        assert_abs_diff_eq!(z[0], PI / 8.0, epsilon = 1e-9);
    }

    #[test]
    fn zeros_are_zeros() {
        for (name, _, _) in table1_cases() {
            let g = table1_geometry(name, 1.0).unwrap();
            for z in count_zeros(&g).1 {
                let scale: f64 = g.rays().iter().map(|r| (r.weight() / (z - r.theta()).cos()).abs()).sum();
                assert!(f_unchecked(&g, z).abs() < 1e-6 * scale, "case {name} at {z}");
            }
        }
    }
}
