use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robin_shape::ball_analysis::{
    abc_decomposition, beta_thresholds, classify, mode_second_variation, stability_lhs, BallProblem,
    BoundaryCondition, SourceTrace, Thresholds, Verdict,
};
use robin_shape::disk_spectral::{solve_disk, SpectralConfig};
use robin_shape::fem2d::{assemble_solve, solve_insulation, FemBoundary, Mesh, StarDomain};
use robin_shape::flows::{second_variation_check, FlowSettings, PerturbationSpec};
use robin_shape::rearrange::{lemma_domination_check, talenti_experiments, two_disk_counterexample, TalentiSettings};
use robin_shape::sources::{RadialSource, Shifted};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn constant_source() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 4] {
        let src = RadialSource::<f64>::constant(1.0, n).map_err(err)?;
        for r in [0.5, 1.0, 2.0] {
            let tr = SourceTrace::of(&src, r).map_err(err)?;
            for beta in [0.1, 1.0, 10.0] {
                let p = BallProblem::robin(n, r, beta).map_err(err)?;
                worst = worst.max(stability_lhs(&p, &tr).map_err(err)?.abs());
            }
        }
    }
    ensure(worst <= 1e-12, format!("max |lhs| = {worst:e}"))?;
    Ok(format!("max |lhs| = {worst:e}"))
}

fn gaussian_window() -> Outcome {
    let src = RadialSource::<f64>::gaussian(0.1, 2).map_err(err)?;
    let tr = SourceTrace::of(&src, 1.0).map_err(err)?;
    // f̄(1) = (1 − e^{−100π})/π; f(1) and f_r(1) are far below f64 resolution.
    let fbar = (1.0 - (-100.0 * PI).exp()) / PI;
    ensure((tr.fbar - fbar).abs() < 1e-10, format!("fbar {} vs {}", tr.fbar, fbar))?;
    let abc = abc_decomposition(2, 1.0, &tr);
    ensure(abc.a0 > 2.0 * (abc.a1 * abc.a2).sqrt(), "A0 ≤ 2√(A1A2)")?;
    let (b1, b2, degenerate) = match beta_thresholds(&abc).map_err(err)? {
        Thresholds::Window {
            beta1,
            beta2,
            degenerate_lower,
        } => (beta1, beta2, degenerate_lower),
        Thresholds::AlwaysStable => return Err("no window".into()),
    };
    // With f = f_r = 0: A0 = f̄²/2, A1 = f̄²/2, A2 = 0, so β2 = 1.
    ensure(b1 == 0.0 && degenerate && tr.underflow, format!("β1 = {b1}"))?;
    ensure((b2 - 1.0).abs() <= 0.05, format!("β2 = {b2}"))?;
    let at = |beta: f64| -> Result<Verdict, String> {
        let p = BallProblem::robin(2, 1.0, beta).map_err(err)?;
        Ok(classify(&p, &tr, true).map_err(err)?.verdict)
    };
    ensure(at(0.5)? == Verdict::Unstable, "β = 0.5 not unstable")?;
    ensure(at(2.0)?.is_stable(), "β = 2 not stable")?;
    Ok(format!("β1 = {b1}, β2 = {b2:.6}"))
}

fn random_source(rng: &mut ChaCha8Rng, n: usize) -> RadialSource<f64> {
    if rng.gen_bool(0.5) {
        RadialSource::gaussian(rng.gen_range(0.3..3.0), n).unwrap()
    } else {
        let a = rng.gen_range(2.0..3.0);
        let b = rng.gen_range(0.0..0.2);
        let c = rng.gen_range(0.0..0.05);
        RadialSource::polynomial(vec![a, -b, -c], n, 2.0).unwrap()
    }
}

fn mode_one_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=4);
        let src = random_source(&mut rng, n);
        let r = rng.gen_range(0.3..2.0);
        let beta = 10f64.powf(rng.gen_range(-1.5..1.5));
        let p = BallProblem::robin(n, r, beta).map_err(err)?;
        let tr = SourceTrace::of(&src, r).map_err(err)?;
        let q1 = mode_second_variation(&p, &tr, 1).map_err(err)?.q_l;
        let term = r / (1.0 + beta * r) * stability_lhs(&p, &tr).map_err(err)?;
        let u = r * tr.fbar / (n as f64 * beta);
        let scale = q1.abs().max(term.abs()).max(tr.fbar * tr.fbar * r).max(u * u);
        worst = worst.max((q1 + term).abs() / scale);
    }
    ensure(worst <= 1e-10, format!("max scaled residual {worst:e}"))?;
    Ok(format!("max scaled residual {worst:e} over 200 draws"))
}

fn translation_check() -> Outcome {
    let src = RadialSource::<f64>::gaussian(0.3, 2).map_err(err)?;
    let settings = FlowSettings::for_radius(1.0);
    let spec = PerturbationSpec::translation(1.0, [1.0, 0.0]).map_err(err)?;
    let mut signs = Vec::new();
    let mut lines = Vec::new();
    for beta in [0.5, 2.0] {
        let p = BallProblem::robin(2, 1.0, beta).map_err(err)?;
        let c = second_variation_check(&p, &src, &spec, &settings).map_err(err)?;
        ensure(
            c.relative_error <= 0.01 && c.signs_agree,
            format!("β = {beta}: J'' = {} vs {}", c.numeric, c.analytic),
        )?;
        signs.push(c.numeric.signum());
        lines.push(format!("β={beta}: {:.6e} vs {:.6e}", c.numeric, c.analytic));
    }
    ensure(signs[0] != signs[1], "no sign flip across the window")?;
    Ok(lines.join("; "))
}

fn mode_two_check() -> Outcome {
    let src = RadialSource::<f64>::constant(1.0, 2).map_err(err)?;
    let p = BallProblem::robin(2, 1.0, 1.0).map_err(err)?;
    let spec = PerturbationSpec::star_mode(1.0, 2, 1.0).map_err(err)?;
    // f ≡ 1, β = R = 1: u = (3 − r²)/4, so u = 1/2, u_r = u_rr = −1/2, D = −1,
    // Q2 = (1/2)(1/4)(3) + (−1/2)(−1) − 1/3 = 13/24.
    let q2 = 13.0 / 24.0;
    let oracle = q2 * PI;
    let c = second_variation_check(&p, &src, &spec, &FlowSettings::for_radius(1.0)).map_err(err)?;
    ensure((c.analytic - oracle).abs() < 1e-12, format!("analytic {} vs {}", c.analytic, oracle))?;
    let rel = (c.numeric - oracle).abs() / oracle;
    ensure(rel <= 0.02, format!("J'' = {} vs {}", c.numeric, oracle))?;
    Ok(format!("J'' = {:.6} vs {:.6} ({:.3}%)", c.numeric, oracle, 100.0 * rel))
}

fn solver_agreement() -> Outcome {
    let one = RadialSource::<f64>::constant(1.0, 2).map_err(err)?;
    let disk = StarDomain::disk(1.0).map_err(err)?;
    let mesh = Mesh::star(&disk, 0.02).map_err(err)?;
    let fem = assemble_solve(&mesh, FemBoundary::Robin(1.0), &one).map_err(err)?;
    let spec = solve_disk(1.0, BoundaryCondition::Robin(1.0), &one, SpectralConfig::default()).map_err(err)?;
    // Exact: u = (3 − r²)/4, J = −½∫u = −5π/16.
    let exact = -5.0 * PI / 16.0;
    ensure((spec.energy() - exact).abs() < 1e-10, format!("spectral J = {}", spec.energy()))?;
    let gap = (fem.energy() - spec.energy()).abs() / spec.energy().abs();
    ensure(gap <= 1e-3, format!("FEM/spectral gap {gap:e}"))?;
    let g = RadialSource::<f64>::gaussian(0.5, 2).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (shift, bc) in [
        ([0.0, 0.0], BoundaryCondition::Robin(1.0)),
        ([0.2, -0.1], BoundaryCondition::Robin(0.5)),
        ([0.3, 0.0], BoundaryCondition::Dirichlet),
    ] {
        let s = Shifted::new(&g, shift);
        let f = solve_disk(1.0, bc, &s, SpectralConfig::default()).map_err(err)?;
        worst = worst.max((f.energy() + 0.5 * f.total_heat()).abs() / f.energy().abs());
    }
    ensure(worst <= 1e-9, format!("energy identity {worst:e}"))?;
    Ok(format!("FEM/spectral gap {gap:.2e}, energy identity {worst:.1e}"))
}

fn two_disk() -> Outcome {
    let r = two_disk_counterexample(0.5f64, 0.5).map_err(err)?;
    // Oracle: c = √1.25, β0 = (1 − 1/c)/ln c.
    let c = 1.25f64.sqrt();
    let beta0 = (1.0 - 1.0 / c) / c.ln();
    ensure((r.beta0 - beta0).abs() < 1e-12 && (r.beta0 - 0.946233).abs() < 1e-6, format!("β0 = {}", r.beta0))?;
    ensure(!r.comparison_holds && r.linf_ball < r.linf_omega, "β = 0.5 should fail")?;
    ensure((r.linf_ball - 1.200213).abs() < 1e-6 && r.linf_omega == 1.25, "β = 0.5 values")?;
    let h = two_disk_counterexample(0.5f64, 2.0).map_err(err)?;
    ensure(h.comparison_holds && (h.linf_ball - 0.529393).abs() < 1e-6 && h.linf_omega == 0.5, "β = 2 values")?;
    let at = two_disk_counterexample(0.5f64, r.beta0).map_err(err)?;
    ensure(at.delta.abs() <= 1e-12, format!("delta(β0) = {:e}", at.delta))?;
    Ok(format!("β0 = {:.6}, delta(β0) = {:.1e}", r.beta0, at.delta))
}

fn talenti() -> Outcome {
    let settings = TalentiSettings::default();
    let ellipse = StarDomain::ellipse(1.2, 1.0 / 1.2).map_err(err)?;
    let mut lines = Vec::new();
    for (name, src) in [
        ("f≡1", RadialSource::<f64>::constant(1.0, 2).map_err(err)?),
        ("gauss 0.5", RadialSource::gaussian(0.5, 2).map_err(err)?),
    ] {
        let r = talenti_experiments(&ellipse, &src, BoundaryCondition::Dirichlet, &settings).map_err(err)?;
        ensure(r.energy.margin > 0.0 && r.passes(), format!("{name}: {:?}", r.energy))?;
        lines.push(format!("J margin ({name}) {:.3e}", r.energy.margin));
    }
    let shifted = StarDomain::shifted_disk(1.0, [0.3, 0.0]).map_err(err)?;
    let g = RadialSource::gaussian(0.5, 2).map_err(err)?;
    let r = talenti_experiments(&shifted, &g, BoundaryCondition::Robin(1.0), &settings).map_err(err)?;
    ensure(r.heat_content.margin > 0.0 && r.passes(), format!("{:?}", r.heat_content))?;
    lines.push(format!("A margin {:.3e}", r.heat_content.margin));
    Ok(lines.join(", "))
}

fn domination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let src = RadialSource::<f64>::gaussian(rng.gen_range(0.3..1.5), 2).map_err(err)?;
        let domain = if i % 2 == 0 {
            let r: f64 = rng.gen_range(0.05..0.5);
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            StarDomain::shifted_disk(1.0, [r * a.cos(), r * a.sin()])
        } else {
            let a: f64 = rng.gen_range(1.05..1.5);
            StarDomain::ellipse(a, 1.0 / a)
        }
        .map_err(err)?;
        let rep = lemma_domination_check(&src, &domain, 1.0, 0.01).map_err(err)?;
        ensure(rep.violations == 0, format!("domain {i}: {rep:?}"))?;
        checked += rep.cells_checked;
        worst = worst.max(rep.max_violation);
    }
    Ok(format!("0 violations over {checked} cells"))
}

fn insulation() -> Outcome {
    let m = 1.0;
    let src = RadialSource::<f64>::gaussian(0.5, 2).map_err(err)?;
    let disk = StarDomain::disk(1.0).map_err(err)?;
    let mesh = Mesh::star(&disk, 0.04).map_err(err)?;
    let h0 = m / (2.0 * PI);
    let base = solve_insulation(&mesh, Arc::new(move |_| h0), 1e-6, &src).map_err(err)?;
    let best = base.heat_content();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut min_margin = f64::INFINITY;
    for _ in 0..20 {
        let terms = rng.gen_range(1..=4);
        let budget = rng.gen_range(0.2..0.9);
        let weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let modes: Vec<(f64, f64, f64)> = weights
            .iter()
            .map(|w| {
                (
                    rng.gen_range(1..=6) as f64,
                    budget * w / total,
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let h = move |theta: f64| {
            h0 * (1.0 + modes.iter().map(|&(k, c, phi)| c * (k * theta + phi).cos()).sum::<f64>())
        };
        let field = solve_insulation(&mesh, Arc::new(h), 1e-6, &src).map_err(err)?;
        min_margin = min_margin.min(best - field.heat_content());
    }
    ensure(min_margin >= -1e-6 * best, format!("min margin {min_margin:e}"))?;
    Ok(format!("∫u (constant h) = {best:.6}, min margin {min_margin:.3e}"))
}

fn dirichlet_limit_sign() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut done = 0;
    while done < 50 {
        let n = rng.gen_range(2..=3);
        let src = random_source(&mut rng, n);
        let r = rng.gen_range(0.5..1.5);
        let tr = SourceTrace::of(&src, r).map_err(err)?;
        let gap = tr.f - tr.fbar;
        if gap.abs() < 1e-6 * tr.fbar {
            continue;
        }
        let p = BallProblem::robin(n, r, 1e3).map_err(err)?;
        let lhs = stability_lhs(&p, &tr).map_err(err)?;
        ensure(lhs.signum() == gap.signum(), format!("lhs {lhs} vs f − f̄ = {gap}"))?;
        done += 1;
    }
    Ok("50 of 50 signs agree".into())
}

fn volume_preservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        let specs = [
            PerturbationSpec::translation(r, [0.6, -0.8]).map_err(err)?,
            PerturbationSpec::star_mode(r, 2, 1.0).map_err(err)?,
            PerturbationSpec::star_mode(r, 3, -0.5).map_err(err)?,
            PerturbationSpec::star_mode(r, 5, 0.3).map_err(err)?,
        ];
        for spec in &specs {
            let z = spec.normal_velocity();
            ensure(z.constant == 0.0 && z.circle_mean_integral(r) == 0.0, "∮ζ ≠ 0")?;
            for t in [-0.1, -0.02, 0.0, 0.05, 0.1] {
                let d = spec.perturbed_domain(t).map_err(err)?;
                // Independent oracle: periodic trapezoid for ½∮ρ² dθ around the origin,
                // valid because every perturbed domain stays star-shaped about 0.
                let k = 4096;
                let quad: f64 = (0..k)
                    .map(|i| {
                        let th = 2.0 * PI * i as f64 / k as f64;
                        0.5 * d.rho(th).powi(2)
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI
                    / k as f64;
                let target = PI * r * r;
                worst = worst.max((d.area() - target).abs()).max((quad - target).abs());
            }
        }
    }
    ensure(worst <= 1e-10, format!("max area error {worst:e}"))?;
    Ok(format!("max area error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 12] = [
        ("constant-source stability", constant_source, Duration::from_secs(1)),
        ("gaussian instability window", gaussian_window, Duration::from_secs(1)),
        ("mode-1 identity", mode_one_identity, Duration::from_secs(5)),
        ("translation second variation", translation_check, Duration::from_secs(60)),
        ("mode-2 second variation", mode_two_check, Duration::from_secs(300)),
        ("FEM/spectral agreement", solver_agreement, Duration::from_secs(60)),
        ("two-disk counterexample", two_disk, Duration::from_secs(1)),
        ("Talenti comparisons", talenti, Duration::from_secs(300)),
        ("rearrangement domination", domination, Duration::from_secs(120)),
        ("constant insulation optimal", insulation, Duration::from_secs(600)),
        ("large-β sign consistency", dirichlet_limit_sign, Duration::from_secs(5)),
        ("volume preservation", volume_preservation, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<30} {} ({:.2?}) {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed,
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
