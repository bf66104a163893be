//! Oracles shared by the integration tests. Everything here is computed
//! from first principles, without going through the library's spectral code.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;

/// Half side and center of the reference square on a strip of width 1.
pub const SQUARE_HALF: f64 = 21.5 / 126.0;
pub const SQUARE_CENTER: f64 = 0.5;
pub const SQUARE_VALUE: f64 = 5.0;

/// n-point Gauss-Legendre nodes and weights on [−1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature nodes and weights on [a, b] split at `breaks`, with panels no
/// longer than `max_panel`.
pub fn panel_rule(a: f64, b: f64, breaks: &[f64], max_panel: f64, order: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(order);
    let mut cuts: Vec<f64> = std::iter::once(a).chain(breaks.iter().copied().filter(|&t| t > a && t < b)).collect();
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / max_panel).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let (lo, hi) = (w[0] + p as f64 * step, w[0] + (p + 1) as f64 * step);
            for (x, wt) in gx.iter().zip(&gw) {
                out.push((0.5 * (lo + hi) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * wt));
            }
        }
    }
    out
}

/// ∫ 1[|y| ≤ a] e^{−iqy} dy.
pub fn box_transform(q: f64, a: f64) -> f64 {
    if q == 0.0 {
        2.0 * a
    } else {
        2.0 * (q * a).sin() / q
    }
}

/// ∫_0^1 1[|z − c| ≤ a] e^{−iκ_n z} dz with κ_n = 2πn.
pub fn interval_transform(n: i64, c: f64, a: f64) -> C {
    if n == 0 {
        return C::new(2.0 * a, 0.0);
    }
    let k = 2.0 * PI * n as f64;
    (C::from_polar(1.0, -k * (c - a)) - C::from_polar(1.0, -k * (c + a))) / C::new(0.0, k)
}

/// μ_n(q) of the reference square, L = 1.
pub fn square_coefficient(q: f64, n: i64) -> C {
    SQUARE_VALUE * box_transform(q, SQUARE_HALF) * interval_transform(n, SQUARE_CENTER, SQUARE_HALF)
}

/// ∫_lo^hi e^{ib(z − z0)} dz.
pub fn phase_integral(b: f64, lo: f64, hi: f64, z0: f64) -> C {
    if hi <= lo {
        return C::new(0.0, 0.0);
    }
    if (b * (hi - lo)).abs() < 1e-8 {
        return C::from_polar(1.0, b * (0.5 * (lo + hi) - z0)) * (hi - lo);
    }
    (C::from_polar(1.0, b * (hi - z0)) - C::from_polar(1.0, b * (lo - z0))) / C::new(0.0, b)
}

/// Y transform of the ray integral I(Y, Z) for the reference square, L = 1,
/// for a ray with direction (uy, uz): substituting z = Z + t·uz turns the
/// ray integral into a Z integral over the part of the square between Z
/// and the exit line.
pub fn square_ray_transform(q: f64, uy: f64, uz: f64, z: f64) -> C {
    let (z0, z1) = (SQUARE_CENTER - SQUARE_HALF, SQUARE_CENTER + SQUARE_HALF);
    let (lo, hi) = if uz > 0.0 { (z.max(z0), z1.min(1.0)) } else { (z0.max(0.0), z.min(z1)) };
    let b = q * uy / uz;
    SQUARE_VALUE * box_transform(q, SQUARE_HALF) / uz.abs() * phase_integral(b, lo, hi, z)
}

pub fn rel_l2(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
