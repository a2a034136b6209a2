use std::collections::HashMap;

use num_rational::Ratio;
use proptest::prelude::*;

use robin_shape::ball_analysis::{
    abc_decomposition, beta_thresholds, mode_second_variation, stability_lhs, BallProblem, BoundaryCondition,
    SourceTrace, Thresholds,
};
use robin_shape::disk_spectral::{solve_disk, SpectralConfig};
use robin_shape::fem2d::{assemble_solve, FemBoundary, Mesh, StarDomain};
use robin_shape::flows::PerturbationSpec;
use robin_shape::rearrange::{two_disk_counterexample, GridField};
use robin_shape::sources::{RadialSource, Shifted};

type Q = Ratio<i128>;

fn poly_source(a: f64, b: f64, c: f64, n: usize) -> RadialSource<f64> {
    RadialSource::polynomial(vec![a, -b, -c], n, 2.0).unwrap()
}

fn decreasing_source() -> impl Strategy<Value = (RadialSource<f64>, usize)> {
    (2usize..=4, any::<bool>(), 0.2f64..3.0, 2.0f64..3.0, 0.0f64..0.2, 0.0f64..0.05).prop_map(
        |(n, gauss, delta, a, b, c)| {
            let src = if gauss {
                RadialSource::gaussian(delta, n).unwrap()
            } else {
                poly_source(a, b, c, n)
            };
            (src, n)
        },
    )
}

fn disk_grid(cell: f64) -> GridField<f64> {
    GridField::from_region([-1.0, -1.0], [1.0, 1.0], cell, |x| x[0].hypot(x[1]) < 1.0, |_| 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_mean_is_monotone(a in 2.0f64..3.0, b in 0.0f64..0.2, c in 0.0f64..0.05,
                             d in 0.0f64..1.0, e in 0.0f64..0.1, r in 0.1f64..2.0) {
        let f = poly_source(a, b, c, 2);
        let g = RadialSource::polynomial(vec![a + d, -b + e, -c], 2, 2.0).unwrap();
        let fbar = f.ball_mean(r).unwrap().fbar;
        let gbar = g.ball_mean(r).unwrap().fbar;
        prop_assert!(fbar <= gbar + 1e-14);
    }

    #[test]
    fn mean_dominates_boundary_value((src, _n) in decreasing_source(), r in 0.1f64..2.0) {
        let tr = SourceTrace::of(&src, r).unwrap();
        prop_assert!(tr.fbar >= tr.f - 1e-14 * tr.fbar.abs());
    }

    #[test]
    fn lhs_matches_decomposition((src, n) in decreasing_source(), r in 0.2f64..2.0, lb in -2.0f64..2.0) {
        let beta = 10f64.powf(lb);
        let tr = SourceTrace::of(&src, r).unwrap();
        let p = BallProblem::robin(n, r, beta).unwrap();
        let lhs = stability_lhs(&p, &tr).unwrap();
        let abc = abc_decomposition(n, r, &tr);
        let scale = abc.a0.abs().max(beta * abc.a1.abs()).max(abc.a2.abs() / beta).max(tr.fbar * tr.fbar);
        prop_assert!((lhs - abc.lhs_at(beta)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn mode_one_is_rescaled_lhs((src, n) in decreasing_source(), r in 0.2f64..2.0, lb in -2.0f64..2.0) {
        let beta = 10f64.powf(lb);
        let tr = SourceTrace::of(&src, r).unwrap();
        let p = BallProblem::robin(n, r, beta).unwrap();
        let q1 = mode_second_variation(&p, &tr, 1).unwrap().q_l;
        let lhs = stability_lhs(&p, &tr).unwrap();
        let u = r * tr.fbar / (n as f64 * beta);
        let scale = q1.abs().max(lhs.abs()).max(tr.fbar * tr.fbar * r).max(u * u);
        prop_assert!((q1 + r / (1.0 + beta * r) * lhs).abs() <= 1e-10 * scale);
    }

    #[test]
    fn exact_lhs_matches_decomposition(f in 0i64..50, gap in 0i64..50, df in -50i64..=0,
                                       n in 2usize..5, r in 1i64..20, b in 1i64..40) {
        let q = |a: i64, d: i64| Q::new(a as i128, d as i128);
        let tr = SourceTrace::new(q(f, 10), q(df, 10), q(f + gap, 10));
        let radius = q(r, 4);
        let beta = q(b, 8);
        let p = BallProblem::robin(n, radius, beta).unwrap();
        let abc = abc_decomposition(n, radius, &tr);
        prop_assert_eq!(stability_lhs(&p, &tr).unwrap(), abc.lhs_at(beta));
    }

    #[test]
    fn window_matches_two_disk_boundary(eps in 0.01f64..3.0) {
        let r = two_disk_counterexample(eps, 1.0).unwrap();
        let at = two_disk_counterexample(eps, r.beta0).unwrap();
        prop_assert!(at.delta.abs() <= 1e-12);
        let below = two_disk_counterexample(eps, 0.9 * r.beta0).unwrap();
        let above = two_disk_counterexample(eps, 1.1 * r.beta0).unwrap();
        prop_assert!(!below.comparison_holds && above.comparison_holds);
    }

    #[test]
    fn velocities_preserve_volume(r in 0.2f64..3.0, k in 1u32..8, amp in -1.0f64..1.0,
                                  dx in -1.0f64..1.0, dy in 0.1f64..1.0, t in -0.1f64..0.1) {
        for spec in [PerturbationSpec::translation(r, [dx, dy]).unwrap(),
                     PerturbationSpec::star_mode(r, k, amp).unwrap()] {
            prop_assert_eq!(spec.normal_velocity().circle_mean_integral(r), 0.0);
            let d = spec.perturbed_domain(t * r).unwrap();
            prop_assert!((d.area() - std::f64::consts::PI * r * r).abs() <= 1e-12 * r * r);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// The ball is unstable exactly inside the threshold window.
    #[test]
    fn sign_dichotomy((src, n) in decreasing_source(), r in 0.2f64..2.0, lb in -2.0f64..2.0) {
        let beta = 10f64.powf(lb);
        let tr = SourceTrace::of(&src, r).unwrap();
        let p = BallProblem::robin(n, r, beta).unwrap();
        let lhs = stability_lhs(&p, &tr).unwrap();
        let abc = abc_decomposition(n, r, &tr);
        let scale = abc.a0.abs().max(beta * abc.a1).max(abc.a2 / beta).max(1e-300);
        prop_assume!(lhs.abs() > 1e-9 * scale);
        match beta_thresholds(&abc).unwrap() {
            Thresholds::AlwaysStable => prop_assert!(lhs < 0.0),
            Thresholds::Window { beta1, beta2, .. } => {
                let inside = beta > beta1 && beta < beta2;
                prop_assert_eq!(lhs > 0.0, inside);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rearrangement_is_equimeasurable(values in prop::collection::vec(-1.0f64..2.0, 400), t in -1.0f64..2.0) {
        let base = disk_grid(0.1);
        let vals: Vec<f64> = (0..base.values().len()).map(|k| values[k % values.len()]).collect();
        let f = base.with_values(vals).unwrap();
        let s = f.spherical().unwrap();
        prop_assert!((s.distribution(t) - f.distribution(t)).abs() <= f.cell_area() + 1e-12);
    }

    #[test]
    fn rearrangement_preserves_order(values in prop::collection::vec(0.0f64..1.0, 400),
                                     bumps in prop::collection::vec(0.0f64..0.5, 400)) {
        let base = disk_grid(0.1);
        let n = base.values().len();
        let f = base.with_values((0..n).map(|k| values[k % 400]).collect()).unwrap();
        let g = base.with_values((0..n).map(|k| values[k % 400] + bumps[(7 * k) % 400]).collect()).unwrap();
        let (fs, gs) = (f.spherical().unwrap(), g.spherical().unwrap());
        prop_assert_eq!(fs.shape(), gs.shape());
        for (a, b) in fs.values().iter().zip(gs.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn hardy_littlewood(values in prop::collection::vec(0.0f64..1.0, 400),
                        others in prop::collection::vec(0.0f64..1.0, 400)) {
        let base = disk_grid(0.1);
        let n = base.values().len();
        let f = base.with_values((0..n).map(|k| values[k % 400]).collect()).unwrap();
        let g = base.with_values((0..n).map(|k| others[k % 400]).collect()).unwrap();
        let lhs = f.inner(&g);
        let rhs = f.decreasing().product_integral(&g.decreasing());
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        let (fs, gs) = (f.spherical().unwrap(), g.spherical().unwrap());
        prop_assert!(lhs <= fs.inner(&gs) + 2.0 * f.cell_area());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fem_respects_mirror_symmetry(a in 1.0f64..1.25, delta in 0.3f64..1.0, sx in -0.3f64..0.3, beta in 0.5f64..3.0) {
        let domain = StarDomain::ellipse(a, 1.0 / a).unwrap();
        let mesh = Mesh::star(&domain, 0.08).unwrap();
        let g = RadialSource::gaussian(delta, 2).unwrap();
        let src = Shifted::new(&g, [sx, 0.0]);
        let field = assemble_solve(&mesh, FemBoundary::Robin(beta), &src).unwrap();
        let key = |x: [f64; 2]| ((x[0] * 1e9).round() as i64, (x[1] * 1e9).round() as i64);
        let index: HashMap<_, _> = mesh.vertices().iter().enumerate().map(|(i, &x)| (key(x), i)).collect();
        let u = field.values();
        let top = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, &x) in mesh.vertices().iter().enumerate() {
            let j = index.get(&key([x[0], -x[1]]));
            prop_assert!(j.is_some(), "vertex {:?} has no mirror", x);
            prop_assert!((u[i] - u[*j.unwrap()]).abs() <= 1e-10 * top);
        }
    }

    #[test]
    fn spectral_solves_are_rotation_equivariant(delta in 0.3f64..1.0, s in 0.0f64..0.4, phi in 0.0f64..std::f64::consts::TAU,
                                                beta in 0.5f64..3.0, x in -0.6f64..0.6, y in -0.6f64..0.6) {
        let g = RadialSource::gaussian(delta, 2).unwrap();
        let cfg = SpectralConfig::new(32, 32).unwrap();
        let bc = BoundaryCondition::Robin(beta);
        let u = solve_disk(1.0, bc, &Shifted::new(&g, [s, 0.0]), cfg).unwrap();
        let (c, sn) = (phi.cos(), phi.sin());
        let v = solve_disk(1.0, bc, &Shifted::new(&g, [s * c, s * sn]), cfg).unwrap();
        let a = u.value([x, y]);
        let b = v.value([c * x - sn * y, sn * x + c * y]);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        prop_assert!((u.energy() - v.energy()).abs() <= 1e-8 * u.energy().abs());
    }

    #[test]
    fn spectral_energy_converges_under_doubling(delta in 0.3f64..1.0, s in 0.0f64..0.5, beta in 0.5f64..3.0) {
        let g = RadialSource::gaussian(delta, 2).unwrap();
        let src = Shifted::new(&g, [s, 0.0]);
        let bc = BoundaryCondition::Robin(beta);
        let coarse = SpectralConfig::new(16, 16).unwrap();
        let e1 = solve_disk(1.0, bc, &src, coarse).unwrap().energy();
        let e2 = solve_disk(1.0, bc, &src, coarse.doubled()).unwrap().energy();
        let e4 = solve_disk(1.0, bc, &src, coarse.doubled().doubled()).unwrap().energy();
        prop_assert!((e4 - e2).abs() <= (e2 - e1).abs() + 1e-13 * e4.abs());
        prop_assert!((e4 - e2).abs() <= 1e-8 * e4.abs());
    }
}
