//! Analytic attenuation phantoms. Values are the increment δμ over the
//! background, so the empty phantom is identically zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned rectangle.
    Rect { cy: f64, cz: f64, hy: f64, hz: f64 },
    /// Ellipse with semi-axes `a` (along the rotated Y axis) and `b`; `angle`
    /// rotates the Y axis toward Z, in radians.
    Ellipse { cy: f64, cz: f64, a: f64, b: f64, angle: f64 },
    /// Isotropic Gaussian bump exp(−r²/2σ²), peak value equal to the amplitude.
    Gaussian { cy: f64, cz: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub amplitude: f64,
}

/// Gaussians are treated as supported within this many σ when checking
/// strip containment and sizing the Y window.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 8.0;

impl Primitive {
    pub fn rect(cy: f64, cz: f64, hy: f64, hz: f64, amplitude: f64) -> Self {
        Primitive { shape: Shape::Rect { cy, cz, hy, hz }, amplitude }
    }

    pub fn ellipse(cy: f64, cz: f64, a: f64, b: f64, angle: f64, amplitude: f64) -> Self {
        Primitive { shape: Shape::Ellipse { cy, cz, a, b, angle }, amplitude }
    }

    pub fn gaussian(cy: f64, cz: f64, sigma: f64, amplitude: f64) -> Self {
        Primitive { shape: Shape::Gaussian { cy, cz, sigma }, amplitude }
    }

    /// Bounding box (y_min, y_max, z_min, z_max).
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self.shape {
            Shape::Rect { cy, cz, hy, hz } => (cy - hy, cy + hy, cz - hz, cz + hz),
            Shape::Ellipse { cy, cz, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                let ey = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
                let ez = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
                (cy - ey, cy + ey, cz - ez, cz + ez)
            }
            Shape::Gaussian { cy, cz, sigma } => {
                let r = GAUSSIAN_SUPPORT_SIGMAS * sigma;
                (cy - r, cy + r, cz - r, cz + r)
            }
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self.shape {
            Shape::Rect { cy, cz, hy, hz } => hy > 0.0 && hz > 0.0 && [cy, cz, hy, hz].iter().all(|v| v.is_finite()),
            Shape::Ellipse { cy, cz, a, b, angle } => {
                a > 0.0 && b > 0.0 && [cy, cz, a, b, angle].iter().all(|v| v.is_finite())
            }
            Shape::Gaussian { cy, cz, sigma } => sigma > 0.0 && [cy, cz, sigma].iter().all(|v| v.is_finite()),
        };
        if !ok || !self.amplitude.is_finite() {
            return Err(Error::Phantom(format!("malformed primitive {:?}", self)));
        }
        Ok(())
    }

    pub fn value(&self, y: f64, z: f64) -> f64 {
        let inside = match self.shape {
            Shape::Rect { cy, cz, hy, hz } => (y - cy).abs() <= hy && (z - cz).abs() <= hz,
            Shape::Ellipse { cy, cz, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                let (dy, dz) = (y - cy, z - cz);
                let u = c * dy + s * dz;
                let v = -s * dy + c * dz;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
            Shape::Gaussian { cy, cz, sigma } => {
                let r2 = (y - cy).powi(2) + (z - cz).powi(2);
                return self.amplitude * (-r2 / (2.0 * sigma * sigma)).exp();
            }
        };
        if inside {
            self.amplitude
        } else {
            0.0
        }
    }

    /// ∫_0^ℓ value(o + t·d) dt for a unit direction d.
    pub fn chord(&self, oy: f64, oz: f64, dy: f64, dz: f64, len: f64) -> f64 {
        if len <= 0.0 {
            return 0.0;
        }
        match self.shape {
            Shape::Rect { cy, cz, hy, hz } => {
                let (mut t0, mut t1) = (0.0_f64, len);
                for (o, d, lo, hi) in [(oy, dy, cy - hy, cy + hy), (oz, dz, cz - hz, cz + hz)] {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return 0.0;
                        }
                    } else {
                        let (a, b) = ((lo - o) / d, (hi - o) / d);
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                self.amplitude * (t1 - t0).max(0.0)
            }
            Shape::Ellipse { cy, cz, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                let (py, pz) = (oy - cy, oz - cz);
                let pu = (c * py + s * pz) / a;
                let pv = (-s * py + c * pz) / b;
                let du = (c * dy + s * dz) / a;
                let dv = (-s * dy + c * dz) / b;
                let qa = du * du + dv * dv;
                let qb = pu * du + pv * dv;
                let qc = pu * pu + pv * pv - 1.0;
                let disc = qb * qb - qa * qc;
                if disc <= 0.0 {
                    return 0.0;
                }
                let r = disc.sqrt();
                let t0 = ((-qb - r) / qa).max(0.0);
                let t1 = ((-qb + r) / qa).min(len);
                self.amplitude * (t1 - t0).max(0.0)
            }
            Shape::Gaussian { cy, cz, sigma } => {
                let (py, pz) = (cy - oy, cz - oz);
                let tc = py * dy + pz * dz;
                let perp2 = (py * py + pz * pz - tc * tc).max(0.0);
                let w = sigma * std::f64::consts::SQRT_2;
                let span = libm::erf((len - tc) / w) - libm::erf(-tc / w);
                self.amplitude
                    * (-perp2 / (2.0 * sigma * sigma)).exp()
                    * sigma
                    * (std::f64::consts::PI / 2.0).sqrt()
                    * span
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub strip_width: f64,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    /// Scattering contrast η = ln(μ_s/μ̄_s), as its own primitive stack.
    #[serde(default)]
    pub scattering: Vec<Primitive>,
}

impl Phantom {
    pub fn new(strip_width: f64, primitives: Vec<Primitive>) -> Result<Self> {
        let p = Phantom { strip_width, primitives, scattering: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn empty(strip_width: f64) -> Self {
        Phantom { strip_width, primitives: Vec::new(), scattering: Vec::new() }
    }

    pub fn with_scattering(mut self, scattering: Vec<Primitive>) -> Result<Self> {
        self.scattering = scattering;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.strip_width;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Phantom(format!("strip width must be positive, got {l}")));
        }
        for p in self.primitives.iter().chain(&self.scattering) {
            p.check()?;
            let (_, _, z0, z1) = p.bounds();
            if z0 <= 0.0 || z1 >= l {
                return Err(Error::Phantom(format!(
                    "primitive {:?} reaches outside the strip 0 < z < {l}",
                    p.shape
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, y: f64, z: f64) -> f64 {
        if z < 0.0 || z > self.strip_width {
            return 0.0;
        }
        self.primitives.iter().map(|p| p.value(y, z)).sum()
    }

    pub fn scattering_value(&self, y: f64, z: f64) -> f64 {
        self.scattering.iter().map(|p| p.value(y, z)).sum()
    }

    pub fn line_integral(&self, origin: (f64, f64), dir: (f64, f64), len: f64) -> f64 {
        self.primitives.iter().map(|p| p.chord(origin.0, origin.1, dir.0, dir.1, len)).sum()
    }

    /// Largest |y| reached by any primitive (0 for the empty phantom).
    pub fn support_half_width(&self) -> f64 {
        self.primitives
            .iter()
            .chain(&self.scattering)
            .map(|p| {
                let (y0, y1, _, _) = p.bounds();
                y0.abs().max(y1.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        for q in &mut p.primitives {
            q.amplitude *= factor;
        }
        p
    }
}

/// Point samples of δμ on the interior nodes of `grid`.
pub fn rasterize(p: &Phantom, grid: Grid) -> ImageGrid {
    ImageGrid::from_fn(grid, |y, z| p.value(y, z))
}

/// Number of grid steps spanned by the square's side at the reference
/// resolution (h = L/126). An odd count centered on L/2 puts every edge
/// halfway between sample nodes.
pub const SQUARE_SIDE_STEPS: f64 = 43.0;
pub const REFERENCE_STEPS: f64 = 126.0;

/// Centered square of side ≈ L/3 with δμ = 5/L.
pub fn square_phantom(strip_width: f64) -> Phantom {
    let l = strip_width;
    let half = 0.5 * SQUARE_SIDE_STEPS / REFERENCE_STEPS * l;
    Phantom::new(l, vec![Primitive::rect(0.0, 0.5 * l, half, half, 5.0 / l)]).expect("square fits the strip")
}

/// Modified Shepp-Logan ellipses on [−1, 1]²: (x0, y0, a, b, angle in degrees, value).
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
];

/// Smallest and largest value attained inside the outer ellipse of the table
/// above; the affine rescale maps them to 1/L and 5/L.
pub const SHEPP_LOGAN_RANGE: (f64, f64) = (0.0, 1.0);

/// Scale from table units to strip units; the long axis then spans 0.92·L.
const SHEPP_LOGAN_SCALE: f64 = 0.5;

/// Ten-ellipse head phantom, upright in the strip, values in [1/L, 5/L].
pub fn shepp_logan(strip_width: f64) -> Phantom {
    let l = strip_width;
    let (lo, hi) = SHEPP_LOGAN_RANGE;
    let gain = 4.0 / (hi - lo) / l;
    let offset = 1.0 / l - gain * lo;
    let prims = SHEPP_LOGAN
        .iter()
        .enumerate()
        .map(|(i, &(x0, y0, a, b, deg, v))| {
            let amp = if i == 0 { gain * v + offset } else { gain * v };
            let s = SHEPP_LOGAN_SCALE * l;
            Primitive::ellipse(s * x0, 0.5 * l + s * y0, s * a, s * b, deg.to_radians(), amp)
        })
        .collect();
    Phantom::new(l, prims).expect("head phantom fits the strip")
}
