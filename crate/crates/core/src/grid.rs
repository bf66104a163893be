//! Sampling grids. Z has N interior nodes z_j = j·h, j = 1..N, with
//! h = L/(N+1); Y is a centered window of odd width ny with the same step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::phantom::Phantom;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Interior Z samples.
    pub n: usize,
    /// Y samples (odd, centered on y = 0).
    pub ny: usize,
    pub strip_width: f64,
}

impl Grid {
    pub fn new(n: usize, ny: usize, strip_width: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 interior samples, got {n}")));
        }
        if ny == 0 || ny % 2 == 0 {
            return Err(Error::Domain(format!("Y sample count must be odd, got {ny}")));
        }
        if !(strip_width > 0.0) {
            return Err(Error::Domain("strip width must be positive".into()));
        }
        Ok(Grid { n, ny, strip_width })
    }

    /// N×N grid.
    pub fn square(n: usize, strip_width: f64) -> Result<Self> {
        Self::new(n, if n % 2 == 0 { n + 1 } else { n }, strip_width)
    }

    /// Grid whose Y window holds every vertex whose rays can touch the
    /// phantom: support half-width plus the widest ray drift across the
    /// strip, plus a small margin. Never narrower than the square grid.
    pub fn covering(n: usize, phantom: &Phantom, geometry: &StarGeometry) -> Result<Self> {
        let l = phantom.strip_width;
        let h = l / (n + 1) as f64;
        let y_max = phantom.support_half_width() + l * geometry.max_abs_slope() + 4.0 * h;
        let half = (y_max / h).ceil() as usize;
        let ny = (2 * half + 1).max(if n % 2 == 0 { n + 1 } else { n });
        Self::new(n, ny, l)
    }

    pub fn h(&self) -> f64 {
        self.strip_width / (self.n + 1) as f64
    }

    pub fn y(&self, i: usize) -> f64 {
        (i as f64 - (self.ny - 1) as f64 / 2.0) * self.h()
    }

    /// Interior row j (0-based) sits at z = (j+1)·h.
    pub fn z(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h()
    }

    /// Window width W = ny·h (the Y period of the discrete transform).
    pub fn window(&self) -> f64 {
        self.ny as f64 * self.h()
    }

    /// Default truncation order (N−1)/2.
    pub fn default_nmax(&self) -> usize {
        (self.n - 1) / 2
    }
}

/// Interior samples, row-major with Z rows: value(i, j) at (y_i, z_j).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(grid: Grid) -> Self {
        ImageGrid { grid, values: vec![0.0; grid.n * grid.ny] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n * grid.ny);
        for j in 0..grid.n {
            let z = grid.z(j);
            for i in 0..grid.ny {
                values.push(f(grid.y(i), z));
            }
        }
        ImageGrid { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.ny + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.grid.ny + i] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Data samples on the interior rows plus the boundary rows Z = 0 and Z = L.
/// Row 0 is Z = 0, row N+1 is Z = L.
#[derive(Debug, Clone, PartialEq)]
pub struct DataField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl DataField {
    pub fn zeros(grid: Grid) -> Self {
        DataField { grid, values: vec![0.0; (grid.n + 2) * grid.ny] }
    }

    pub fn rows(&self) -> usize {
        self.grid.n + 2
    }

    /// Z coordinate of data row r (0..=N+1).
    pub fn z_row(&self, r: usize) -> f64 {
        r as f64 * self.grid.h()
    }

    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.values[r * self.grid.ny + i]
    }

    pub fn set(&mut self, i: usize, r: usize, v: f64) {
        self.values[r * self.grid.ny + i] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.grid.ny..(r + 1) * self.grid.ny]
    }

    /// Interior rows only.
    pub fn interior(&self) -> ImageGrid {
        let ny = self.grid.ny;
        ImageGrid { grid: self.grid, values: self.values[ny..ny * (self.grid.n + 1)].to_vec() }
    }

    /// Δ(Y) = ½[Φ(Y,0) + Φ(Y,L)].
    pub fn boundary_average(&self) -> Vec<f64> {
        let top = self.row(self.grid.n + 1);
        self.row(0).iter().zip(top).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn scale(&mut self, f: f64) {
        self.values.iter_mut().for_each(|v| *v *= f);
    }

    pub fn add_scaled(&mut self, other: &DataField, f: f64) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::Dimension { expected: self.values.len(), got: other.values.len() });
        }
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += f * b);
        Ok(())
    }
}

/// Measurement φ_jk for the ray pair j < k.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseField {
    pub j: usize,
    pub k: usize,
    pub field: DataField,
}

/// Relative L2 error and max error over pixels at least `margin` away from
/// each edge of the Z range and of the Y window.
pub fn interior_error(recon: &ImageGrid, truth: &ImageGrid, margin: usize) -> (f64, f64) {
    let g = recon.grid;
    let (mut num, mut den, mut max) = (0.0, 0.0, 0.0_f64);
    for j in margin..g.n.saturating_sub(margin) {
        for i in margin..g.ny.saturating_sub(margin) {
            let d = recon.get(i, j) - truth.get(i, j);
            num += d * d;
            den += truth.get(i, j).powi(2);
            max = max.max(d.abs());
        }
    }
    ((num / den).sqrt(), max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::square_phantom;

    #[test]
    fn grid_conventions() {
        let g = Grid::square(125, 1.0).unwrap();
        assert_eq!(g.h(), 1.0 / 126.0);
        assert_eq!(g.y(62), 0.0);
        assert!((g.z(124) - 125.0 / 126.0).abs() < 1e-15);
        assert_eq!(g.default_nmax(), 62);
        assert!(Grid::new(125, 124, 1.0).is_err());
    }

    #[test]
    fn covering_window_holds_drift() {
        let p = square_phantom(1.0);
        let geo = crate::stability::table1_geometry("2a", 1.0).unwrap();
        let g = Grid::covering(125, &p, &geo).unwrap();
        assert!(g.y(g.ny - 1) >= p.support_half_width() + 1.0);
    }

    #[test]
    fn boundary_rows() {
        let g = Grid::square(5, 1.0).unwrap();
        let mut d = DataField::zeros(g);
        for i in 0..5 {
            d.set(i, 0, 1.0);
            d.set(i, 6, 3.0);
        }
        assert_eq!(d.boundary_average(), vec![2.0; 5]);
        assert!(d.interior().values.iter().all(|&v| v == 0.0));
    }
}
