mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use proptest::prelude::*;

use common::gauss_legendre;
use star_transform::experiment::{
    run_reconstruction, simulate, ExperimentConfig, GeometryConfig, GridConfig, MethodName, NoiseConfig, PhantomConfig,
    PhantomKind, RayConfig, SolverConfig,
};
use star_transform::geometry::StarGeometry;
use star_transform::grid::{interior_error, DataField, Grid};
use star_transform::io;
use star_transform::phantom::{rasterize, Primitive};
use star_transform::solver::{recursive_pinv, solve_finite, DiagPlusSeparable};
use star_transform::stability::{count_zeros, sigma_moments};

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(7);
    let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
    assert!((s - 2.0 / 13.0).abs() < 1e-14);
}

/// Angle in units of π, kept away from the strip direction.
fn turn() -> impl Strategy<Value = f64> {
    (-0.95f64..0.95).prop_map(|t| if t.abs() < 0.5 { t } else { t.signum() * (t.abs() + 0.05) })
}

fn weight() -> impl Strategy<Value = f64> {
    (0.2f64..2.0, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m })
}

fn rays(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((turn(), weight()), k)
}

fn geometry(r: &[(f64, f64)]) -> StarGeometry {
    let t: Vec<f64> = r.iter().map(|x| x.0).collect();
    let s: Vec<f64> = r.iter().map(|x| x.1).collect();
    StarGeometry::from_turns(&t, &s, 1.0).unwrap()
}

fn cplx() -> impl Strategy<Value = C> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C::new(a, b))
}

fn system(rows: usize, cols: usize, k: usize) -> impl Strategy<Value = DiagPlusSeparable> {
    (
        prop::collection::vec(cplx(), rows.min(cols)),
        prop::collection::vec(prop::collection::vec(cplx(), rows), k),
        prop::collection::vec(prop::collection::vec(cplx(), cols), k),
    )
        .prop_map(move |(d, b, a)| {
            // Keep the diagonal away from zero so the instance is well conditioned.
            let d = d.into_iter().map(|v| v + C::new(2.0, 0.0)).collect();
            DiagPlusSeparable::new(rows, cols, d, b, a)
        })
}

fn sized_system() -> impl Strategy<Value = DiagPlusSeparable> {
    (1usize..12, 1usize..12, 0usize..4).prop_flat_map(|(r, c, k)| system(r, c, k))
}

fn tikhonov(a: &DiagPlusSeparable, lambda: f64) -> DMatrix<C> {
    let m = a.dense();
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let f = DMatrix::from_diagonal(&svd.singular_values.map(|s| C::new(s / (s * s + lambda * lambda), 0.0)));
    vt.adjoint() * f * u.adjoint()
}

fn max_rel(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(1e-300, f64::max);
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_ignore_ray_order(r in rays(1..=6), shift in 0usize..6) {
        let g = geometry(&r);
        let mut p = r.clone();
        p.rotate_left(shift % r.len());
        p.reverse();
        let h = geometry(&p);
        let (a, b) = (sigma_moments(&g), sigma_moments(&h));
        prop_assert!((a.sigma0 - b.sigma0).abs() < 1e-9 && (a.sigma1 - b.sigma1).abs() < 1e-9);
        prop_assert!((a.sigma2 - b.sigma2).abs() < 1e-9 * (1.0 + a.sigma2.abs()));
        prop_assert_eq!(count_zeros(&g).0, count_zeros(&h).0);
    }

    #[test]
    fn even_stars_have_a_zero(r in rays(1..=3), extra in rays(1..=3)) {
        let mut all = r.clone();
        all.extend(extra.iter().take(r.len()).copied());
        all.truncate(2 * r.len().min(extra.len()));
        prop_assert!(count_zeros(&geometry(&all)).0 >= 1);
    }

    #[test]
    fn recursive_pinv_matches_tikhonov(a in sized_system(), l in -3.0f64..0.0) {
        let lambda = 10f64.powf(l);
        let st = recursive_pinv(&a, lambda).unwrap();
        prop_assert!(max_rel(&st.matrix().unwrap(), &tikhonov(&a, lambda)) < 1e-9);
    }

    #[test]
    fn left_and_right_forms_agree_when_well_conditioned(a in sized_system(), l in -1.0f64..0.0) {
        let st = recursive_pinv(&a, 10f64.powf(l)).unwrap();
        prop_assert!(max_rel(&st.dense_left(), &st.dense_right()) < 1e-8);
    }

    #[test]
    fn finite_solve_has_small_residual(a in (1usize..16, 0usize..4).prop_flat_map(|(n, k)| system(n, n, k)),
                                       rhs in prop::collection::vec(cplx(), 16)) {
        let rhs = &rhs[..a.rows];
        if let Ok((x, cond)) = solve_finite(&a, rhs) {
            let ax = a.apply(&x);
            let res: f64 = ax.iter().zip(rhs).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
            let norm: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-10 * cond.max(1.0) * norm.max(1e-300));
        }
    }

    #[test]
    fn config_round_trips(r in rays(1..=5), n in 3usize..200, lambda in 0.0f64..1.0,
                          noise in prop::option::of((1.0f64..1e6, 0u64..1000)), local in any::<bool>()) {
        let cfg = ExperimentConfig {
            geometry: GeometryConfig {
                strip_width: 1.0,
                rays: r.iter().map(|&(t, w)| RayConfig { theta_over_pi: t, weight: w }).collect(),
                scheme: None,
            },
            phantom: PhantomConfig { kind: PhantomKind::Custom, primitives: vec![Primitive::rect(0.0, 0.5, 0.1, 0.2, 3.0)], scattering: vec![] },
            grid: GridConfig { n, ny: None },
            noise: noise.map(|(photons, seed)| NoiseConfig { photons, seed }),
            solver: SolverConfig { lambda, method: if local { MethodName::Local } else { MethodName::Recursive }, ..Default::default() },
            output: Default::default(),
        };
        // Only configurations that validate are expected to round trip.
        if cfg.setup().is_ok() {
            let text = cfg.to_toml().unwrap();
            prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn field_and_image_round_trip(n in 3usize..9, half in 0usize..4, vals in prop::collection::vec(-1e6f64..1e6, 99),
                                  j in 0usize..3) {
        let ny = 2 * half + 1;
        let grid = Grid::new(n, ny, 0.7).unwrap();
        let mut f = DataField::zeros(grid);
        for (v, s) in f.values.iter_mut().zip(vals.iter().cycle()) {
            *v = *s;
        }
        let pair = Some((j, j + 1));
        prop_assert_eq!(io::read_field(&io::write_field(&f, pair)).unwrap(), (f.clone(), pair));
        let img = f.interior();
        prop_assert_eq!(io::read_image(&io::write_image(&img)).unwrap(), img);
        let b: Vec<f64> = vals[..ny].to_vec();
        prop_assert_eq!(io::read_ballistic(&io::write_ballistic(grid, &b).unwrap()).unwrap(), (grid, b));
    }

    #[test]
    fn scheme_text_round_trips(c in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 4)) {
        prop_assert_eq!(io::read_scheme(&io::write_scheme(&c)).unwrap(), c);
    }
}

fn smooth_config(method: MethodName) -> ExperimentConfig {
    ExperimentConfig {
        geometry: GeometryConfig {
            strip_width: 1.0,
            rays: [(1.0, 1.0), (0.25, 1.0), (-0.25, 1.0)]
                .iter()
                .map(|&(t, w)| RayConfig { theta_over_pi: t, weight: w })
                .collect(),
            scheme: None,
        },
        phantom: PhantomConfig {
            kind: PhantomKind::Custom,
            primitives: vec![Primitive::gaussian(0.0, 0.5, 0.06, 4.0)],
            scattering: vec![],
        },
        grid: GridConfig { n: 125, ny: None },
        noise: None,
        solver: SolverConfig { method, ..Default::default() },
        output: Default::default(),
    }
}

#[test]
fn local_and_fourier_methods_agree_on_a_smooth_phantom() {
    let mut images = Vec::new();
    for m in [MethodName::Direct, MethodName::Local] {
        let cfg = smooth_config(m);
        let setup = cfg.setup().unwrap();
        let sim = simulate(&setup, None).unwrap();
        let out = run_reconstruction(&setup, &cfg.solver, &sim.data, &sim.pairs, None).unwrap();
        let truth = rasterize(&setup.phantom, setup.grid);
        assert!(interior_error(&out.image, &truth, 2).0 < 0.02, "{m:?}");
        images.push(out.image);
    }
    assert!(interior_error(&images[1], &images[0], 2).0 < 0.03);
}

#[test]
fn coefficient_table_round_trips() {
    let cfg = smooth_config(MethodName::Direct);
    let setup = cfg.setup().unwrap();
    let img = rasterize(&setup.phantom, setup.grid);
    let t = star_transform::spectral::image_to_coefficients(&img, 20).unwrap();
    let back = io::read_coefficients(&io::write_coefficients(&t)).unwrap();
    assert_eq!(back.to_rows(), t.to_rows());
    assert!((back.q(1) - 2.0 * PI / setup.grid.window()).abs() < 1e-15);
}

#[test]
fn local_and_fourier_methods_agree_on_the_square() {
    let mut images = Vec::new();
    for m in [MethodName::Direct, MethodName::Local] {
        let mut cfg = smooth_config(m);
        cfg.phantom = PhantomConfig::default();
        let setup = cfg.setup().unwrap();
        let sim = simulate(&setup, None).unwrap();
        images.push(run_reconstruction(&setup, &cfg.solver, &sim.data, &sim.pairs, None).unwrap().image);
    }
    let diff = interior_error(&images[1], &images[0], 2).0;
    assert!(diff < 0.10, "{diff}");
}
