use std::f64::consts::PI;
use std::sync::Arc;

use robin_shape::ball_analysis::{stationarity_constant, BallProblem, BoundaryCondition, SourceTrace};
use robin_shape::disk_spectral::{solve_disk, SpectralConfig};
use robin_shape::fem2d::{assemble_solve, solve_insulation, FemBoundary, Mesh, StarDomain};
use robin_shape::rearrange::{talenti_experiments, TalentiSettings};
use robin_shape::sources::{RadialSource, Shifted};

#[test]
fn fem_energy_converges_at_second_order() {
    let one = RadialSource::<f64>::constant(1.0, 2).unwrap();
    let disk = StarDomain::<f64>::disk(1.0).unwrap();
    // u = (3 − r²)/4 for β = 1, so J = −½∫u = −5π/16.
    let exact = -5.0 * PI / 16.0;
    let hs = [0.08, 0.04, 0.02];
    let mut errs = Vec::new();
    let mut last = f64::INFINITY;
    for &h in &hs {
        let mesh = Mesh::star(&disk, h).unwrap();
        let j = assemble_solve(&mesh, FemBoundary::Robin(1.0), &one).unwrap().energy();
        assert!(j > exact, "discrete energy must stay above the minimum");
        assert!(j < last, "energy must decrease under refinement");
        last = j;
        errs.push(j - exact);
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn fem_solution_is_positive() {
    let g = RadialSource::<f64>::gaussian(0.3, 2).unwrap();
    let src = Shifted::new(&g, [0.2, 0.1]);
    let domain = StarDomain::<f64>::ellipse(1.2, 1.0 / 1.2).unwrap();
    let mesh = Mesh::star(&domain, 0.05).unwrap();
    let field = assemble_solve(&mesh, FemBoundary::Robin(0.7), &src).unwrap();
    assert!(field.values().iter().all(|&u| u > 0.0));
    let dir = assemble_solve(&mesh, FemBoundary::Dirichlet, &src).unwrap();
    for (i, &u) in dir.values().iter().enumerate() {
        if !mesh.is_boundary_node(i) {
            assert!(u > 0.0);
        }
    }
}

#[test]
fn stationarity_residual_on_disk_and_perturbed_disk() {
    let one = RadialSource::<f64>::constant(1.0, 2).unwrap();
    let p = BallProblem::robin(2, 1.0, 1.0).unwrap();
    let tr = SourceTrace::of(&one, 1.0).unwrap();
    // −β²u² + ½u_r² + (β/2)u²H − fu with u = 1/2, u_r = −1/2, H = 1.
    let oracle = -0.25 + 0.125 + 0.125 - 0.5;
    assert!((stationarity_constant(&p, &tr).unwrap() - oracle).abs() < 1e-15);
    let disk = StarDomain::<f64>::disk(1.0).unwrap();
    let mesh = Mesh::star(&disk, 0.02).unwrap();
    let res = assemble_solve(&mesh, FemBoundary::Robin(1.0), &one)
        .unwrap()
        .stationarity_residual(&disk, &one)
        .unwrap();
    assert!(res.spread <= 0.05, "{res:?}");
    assert!((res.mean - oracle).abs() <= 0.01, "{res:?}");
    let bumpy = StarDomain::<f64>::fourier(1.0, vec![0.0, 0.2], vec![]).unwrap();
    for h in [0.04, 0.02] {
        let mesh = Mesh::star(&bumpy, h).unwrap();
        let res = assemble_solve(&mesh, FemBoundary::Robin(1.0), &one)
            .unwrap()
            .stationarity_residual(&bumpy, &one)
            .unwrap();
        assert!(res.spread > 0.01, "h = {h}: {res:?}");
    }
}

#[test]
fn constant_insulation_matches_limit_problem() {
    let one = RadialSource::<f64>::constant(1.0, 2).unwrap();
    let disk = StarDomain::<f64>::disk(1.0).unwrap();
    let mesh = Mesh::star(&disk, 0.02).unwrap();
    let m = 1.0;
    let h = m / (2.0 * PI);
    let field = solve_insulation(&mesh, Arc::new(move |_| h), 1e-6, &one).unwrap();
    // β = P/m = 2π: w = (1 − r²)/4 + 1/(2β), ∫w = π/8 + π/(2β).
    let beta = 2.0 * PI / m;
    let oracle = PI / 8.0 + PI / (2.0 * beta);
    assert!((field.heat_content() - oracle).abs() <= 1e-3 * oracle);
    assert!(solve_insulation(&mesh, Arc::new(|_| 1e-9), 1e-6, &one).is_err());
}

#[test]
fn talenti_on_disk_is_an_equality() {
    let g = RadialSource::<f64>::gaussian(0.5, 2).unwrap();
    let disk = StarDomain::<f64>::disk(1.0).unwrap();
    let settings = TalentiSettings {
        mesh_h: 0.04,
        spectral: SpectralConfig::new(32, 32).unwrap(),
        grid_cell: 0.02,
    };
    let r = talenti_experiments(&disk, &g, BoundaryCondition::Robin(1.0), &settings).unwrap();
    assert!(r.energy.margin.abs() <= 1e-12 && r.heat_content.margin.abs() <= 1e-12, "{r:?}");
    let centered = StarDomain::<f64>::shifted_disk(1.0, [0.0, 0.0]).unwrap();
    let r = talenti_experiments(&centered, &g, BoundaryCondition::Robin(1.0), &settings).unwrap();
    assert_eq!(r.solver, "spectral");
    assert!(r.heat_content.margin.abs() <= 1e-12);
}

#[test]
fn gaussian_means_approach_the_ball_limit() {
    // f̄_δ(R) = (1 − e^{−πR²/δ²})/(πR²) → 1/|B_R| as δ → 0.
    let r = 1.0;
    let limit = 1.0 / (PI * r * r);
    let mut last = 0.0;
    for delta in [0.8, 0.5, 0.3, 0.2, 0.1, 0.05] {
        let g = RadialSource::<f64>::gaussian(delta, 2).unwrap();
        let fbar = g.ball_mean(r).unwrap().fbar;
        let oracle = (1.0 - (-PI * r * r / (delta * delta)).exp()) / (PI * r * r);
        assert!((fbar - oracle).abs() <= 1e-12 * oracle);
        assert!(fbar >= last && fbar <= limit * (1.0 + 1e-15));
        last = fbar;
    }
    assert!((last - limit).abs() < 1e-12);
}

#[test]
fn spectral_and_fem_agree_off_center() {
    let g = RadialSource::<f64>::gaussian(0.5, 2).unwrap();
    let c = [0.25, -0.1];
    let shifted = StarDomain::<f64>::shifted_disk(1.0, c).unwrap();
    let mesh = Mesh::star(&shifted, 0.02).unwrap();
    let fem = assemble_solve(&mesh, FemBoundary::Robin(1.5), &g).unwrap();
    let spec = solve_disk(1.0, BoundaryCondition::Robin(1.5), &Shifted::new(&g, c), SpectralConfig::default()).unwrap();
    let gap = (fem.energy() - spec.energy()).abs() / spec.energy().abs();
    assert!(gap <= 2e-3, "gap {gap}");
}
