use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use robin_shape::ball_analysis::{
    abc_decomposition, classify, dirichlet_stability, mode_second_variation, source_thresholds, stability_lhs,
    stationarity_constant, BallProblem, BoundaryCondition, Classification, Clause, SourceTrace, StabilityReport,
    Thresholds, Verdict,
};
use robin_shape::disk_spectral::solve_disk;
use robin_shape::fem2d::{assemble_solve, solve_insulation, FemBoundary, Mesh, Profile, StarDomain};
use robin_shape::flows::{first_variation_check, second_variation_check, FlowSettings, Perturbation};
use robin_shape::rearrange::{lemma_domination_check, talenti_experiments, two_disk_counterexample, GridField, TalentiSettings};
use robin_shape::sources::{RadialSource, Shifted};

use crate::config::{ExperimentConfig, InsulationSpec, PerturbationConfig};
use crate::output::{Report, Sink};

pub struct Context<'a> {
    pub cfg: ExperimentConfig,
    pub mode_l: Option<u32>,
    pub sink: &'a Sink,
}

impl Context<'_> {
    fn source(&self) -> Result<RadialSource<f64>> {
        let spec = self
            .cfg
            .source
            .as_ref()
            .ok_or_else(|| anyhow!("this command needs a `source` (or --delta)"))?;
        spec.build(self.cfg.problem.n)
    }

    fn csv_name(&self, default: &str) -> String {
        self.cfg.output.csv.clone().unwrap_or_else(|| default.to_string())
    }
}

fn f(x: f64) -> String {
    format!("{x:.6e}")
}

/// Human-readable verdict, e.g. `stable (marginal, all β)`.
pub fn verdict_text(c: &Classification) -> String {
    let all = matches!(c.clause, Clause::FlatBoundary | Clause::NoWindow);
    match (c.verdict, all) {
        (Verdict::Unstable, _) => "unstable".into(),
        (Verdict::MarginallyStable, true) => "stable (marginal, all β)".into(),
        (Verdict::MarginallyStable, false) => "stable (marginal)".into(),
        (Verdict::AlwaysStable, _) => "stable (all β)".into(),
        (Verdict::Stable, _) => "stable".into(),
    }
}

fn identity_checks(report: &mut Report, p: &BallProblem<f64>, tr: &SourceTrace<f64>, tol: f64) -> Result<()> {
    let beta = p.beta().ok_or_else(|| anyhow!("Robin coefficient required"))?;
    let lhs = stability_lhs(p, tr)?;
    let abc = abc_decomposition(p.n, p.radius, tr);
    let scale = abc
        .a0
        .abs()
        .max(beta * abc.a1.abs())
        .max(abc.a2.abs() / beta)
        .max(tr.fbar * tr.fbar)
        .max(f64::MIN_POSITIVE);
    let gap = (lhs - abc.lhs_at(beta)).abs() / scale;
    report.check("lhs = A0 − βA1 − A2/β", gap <= tol, format!("relative gap {}", f(gap)));
    let q1 = mode_second_variation(p, tr, 1)?.q_l;
    let r = p.radius;
    let term = r / (1.0 + beta * r) * lhs;
    let u = r * tr.fbar / (p.n as f64 * beta);
    let scale = q1.abs().max(term.abs()).max(tr.fbar * tr.fbar * r).max(u * u).max(f64::MIN_POSITIVE);
    let gap = (q1 + term).abs() / scale;
    report.check("Q1 = −R/(1+βR)·lhs", gap <= tol, format!("relative gap {}", f(gap)));
    Ok(())
}

pub fn stability(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("stability");
    let p = ctx.cfg.problem.build()?;
    let src = ctx.source()?;
    let tr = SourceTrace::of(&src, p.radius)?;
    let trace = json!({ "f": tr.f, "f_r": tr.df, "fbar": tr.fbar, "underflow": tr.underflow });
    match p.bc {
        BoundaryCondition::Dirichlet => {
            let v = dirichlet_stability(&tr);
            report.result = json!({ "trace": trace, "dirichlet": v });
        }
        BoundaryCondition::Robin(_) => {
            let decreasing = src.is_radially_decreasing();
            let full = StabilityReport::evaluate(&p, &tr, decreasing)?;
            let class = classify(&p, &tr, decreasing)?;
            identity_checks(&mut report, &p, &tr, ctx.cfg.tolerances.identity)?;
            report.result = json!({
                "verdict": verdict_text(&class),
                "trace": trace,
                "stationarity_constant": stationarity_constant(&p, &tr)?,
                "report": full,
            });
        }
    }
    Ok(report)
}

pub fn thresholds(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("thresholds");
    let n = ctx.cfg.problem.n;
    let r = ctx.cfg.problem.radius;
    let src = ctx.source()?;
    let (th, tr) = source_thresholds(&src, r)?;
    let abc = abc_decomposition(n, r, &tr);
    let lhs = |beta: f64| -> Result<f64> { Ok(stability_lhs(&BallProblem::robin(n, r, beta)?, &tr)?) };
    let window = match th {
        Thresholds::AlwaysStable => {
            let worst = [1e-2, 1e-1, 1.0, 1e1, 1e2]
                .iter()
                .map(|&b| lhs(b))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-12 * tr.fbar * tr.fbar;
            report.check("lhs ≤ 0 for all β", worst <= slack, format!("max sampled lhs {}", f(worst)));
            json!(null)
        }
        Thresholds::Window {
            beta1,
            beta2,
            degenerate_lower,
        } => {
            let mid = if beta1 > 0.0 { (beta1 * beta2).sqrt() } else { 0.5 * beta2 };
            let inside = lhs(mid)?;
            report.check("lhs > 0 inside the window", inside > 0.0, format!("lhs({}) = {}", f(mid), f(inside)));
            let outside = lhs(2.0 * beta2)?;
            report.check("lhs < 0 above β2", outside < 0.0, format!("lhs({}) = {}", f(2.0 * beta2), f(outside)));
            if beta1 > 0.0 {
                let below = lhs(0.5 * beta1)?;
                report.check("lhs < 0 below β1", below < 0.0, format!("lhs({}) = {}", f(0.5 * beta1), f(below)));
            }
            json!({ "beta1": beta1, "beta2": beta2, "degenerate_lower": degenerate_lower })
        }
    };
    report.result = json!({
        "n": n,
        "radius": r,
        "abc": abc,
        "discriminant": abc.discriminant(),
        "window": window,
        "underflow": tr.underflow,
    });
    Ok(report)
}

pub fn modes(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("modes");
    let p = ctx.cfg.problem.build()?;
    let src = ctx.source()?;
    let tr = SourceTrace::of(&src, p.radius)?;
    let degrees: Vec<u32> = match ctx.mode_l {
        Some(l) => vec![l],
        None => (1..=6).collect(),
    };
    let rows = degrees
        .iter()
        .map(|&l| mode_second_variation(&p, &tr, l))
        .collect::<Result<Vec<_>, _>>()?;
    identity_checks(&mut report, &p, &tr, ctx.cfg.tolerances.identity)?;
    report.result = json!({ "lhs": stability_lhs(&p, &tr)?, "modes": rows });
    Ok(report)
}

fn flow_settings(ctx: &Context) -> Result<FlowSettings<f64>> {
    let r = ctx.cfg.problem.radius;
    let mut s = FlowSettings::for_radius(r);
    s.spectral = ctx.cfg.solver.spectral()?;
    if let Some(h) = ctx.cfg.solver.mesh_h {
        s.mesh_h = h;
    }
    if let Some(t) = ctx.cfg.solver.step {
        s.step = t;
    }
    s.refine_mesh = ctx.cfg.solver.refine_mesh;
    Ok(s)
}

pub fn translate_check(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("translate-check");
    let p = ctx.cfg.problem.build()?;
    let src = ctx.source()?;
    let pert = ctx
        .cfg
        .perturbation
        .clone()
        .unwrap_or(PerturbationConfig::Translation { direction: [1.0, 0.0] });
    let spec = pert.build(p.radius)?;
    let settings = flow_settings(ctx)?;
    let check = second_variation_check(&p, &src, &spec, &settings)?;
    let first = first_variation_check(&p, &src, &spec, &settings)?;
    let tol = match spec.kind {
        Perturbation::Translation { .. } => ctx.cfg.tolerances.translation,
        Perturbation::StarMode { .. } => ctx.cfg.tolerances.star_mode,
    };
    report.check(
        "numeric J'' matches Q_l·∮ζ²",
        check.relative_error <= tol,
        format!("{} vs {} (relative error {})", f(check.numeric), f(check.analytic), f(check.relative_error)),
    );
    report.check("signs agree", check.signs_agree, format!("numeric {}", f(check.numeric)));
    let name = ctx.csv_name("flow.csv");
    ctx.sink.write(&name, |w| check.sample.write_csv(w))?;
    report.result = json!({ "first_variation": first, "check": check, "csv": name });
    Ok(report)
}

fn fem_boundary(bc: BoundaryCondition<f64>) -> FemBoundary<f64> {
    match bc {
        BoundaryCondition::Robin(b) => FemBoundary::Robin(b),
        BoundaryCondition::Dirichlet => FemBoundary::Dirichlet,
    }
}

fn write_nodes(w: &mut dyn Write, mesh: &Mesh<f64>, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "x,y,u")?;
    for (x, u) in mesh.vertices().iter().zip(values) {
        writeln!(w, "{},{},{}", x[0], x[1], u)?;
    }
    Ok(())
}

pub fn fem_compare(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("fem-compare");
    let r = ctx.cfg.problem.radius;
    let bc = ctx.cfg.problem.boundary();
    let src = ctx.source()?;
    if src.dim() != 2 {
        bail!("fem-compare is planar: set problem.n = 2");
    }
    let domain = match &ctx.cfg.domain {
        Some(d) => d.build()?,
        None => StarDomain::disk(r)?,
    };
    let h = ctx.cfg.solver.mesh_h.unwrap_or(0.02 * domain.max_rho());
    let mesh = Mesh::star(&domain, h)?;
    let audit = mesh.audit();
    let fem = assemble_solve(&mesh, fem_boundary(bc), &src)?;
    let summary = fem.summary();
    let stationarity = match bc {
        BoundaryCondition::Robin(_) => Some(fem.stationarity_residual(&domain, &src)?),
        BoundaryCondition::Dirichlet => None,
    };
    let reference = match domain.profile() {
        Profile::Fourier { cos, sin } if cos.is_empty() && sin.is_empty() && domain.scale() == 1.0 => {
            Some(solve_disk(domain.radius(), bc, &src, ctx.cfg.solver.spectral()?)?)
        }
        Profile::ShiftedDisk { center } if domain.scale() == 1.0 => {
            let shifted = Shifted::new(&src, *center);
            Some(solve_disk(domain.radius(), bc, &shifted, ctx.cfg.solver.spectral()?)?)
        }
        _ => None,
    };
    let spectral = match reference {
        Some(s) => {
            let gap = (summary.energy - s.energy()).abs() / s.energy().abs();
            report.check(
                "FEM and spectral energies agree",
                gap <= ctx.cfg.tolerances.fem,
                format!("relative gap {}", f(gap)),
            );
            let id = (s.energy() + 0.5 * s.total_heat()).abs() / s.energy().abs();
            report.check("spectral J = −½∫fu", id <= 1e-9, format!("relative gap {}", f(id)));
            json!(s.summary())
        }
        None => json!(null),
    };
    let name = ctx.csv_name("fem_field.csv");
    ctx.sink.write(&name, |w| write_nodes(w, &mesh, fem.values()))?;
    report.result = json!({
        "mesh_h": h,
        "mesh": audit,
        "fem": summary,
        "stationarity": stationarity,
        "spectral": spectral,
        "csv": name,
    });
    Ok(report)
}

pub fn counterexample(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("counterexample");
    let eps = ctx.cfg.eps.unwrap_or(0.5);
    let beta = match ctx.cfg.problem.boundary() {
        BoundaryCondition::Robin(b) => b,
        BoundaryCondition::Dirichlet => bail!("the two-disk example needs a finite Robin coefficient"),
    };
    let r = two_disk_counterexample(eps, beta)?;
    let at = two_disk_counterexample(eps, r.beta0)?;
    report.check("delta(β0) = 0", at.delta.abs() <= 1e-12, format!("delta(β0) = {}", f(at.delta)));
    report.check(
        "verdict matches the sup norms",
        r.comparison_holds == (r.linf_ball >= r.linf_omega),
        format!("{} vs {}", f(r.linf_ball), f(r.linf_omega)),
    );
    report.result = json!(r);
    Ok(report)
}

pub fn rearrange_check(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("rearrange-check");
    let src = ctx.source()?;
    if src.dim() != 2 {
        bail!("rearrange-check is planar: set problem.n = 2");
    }
    let domain = match &ctx.cfg.domain {
        Some(d) => d.build()?,
        None => StarDomain::shifted_disk(ctx.cfg.problem.radius, [0.3 * ctx.cfg.problem.radius, 0.0])?,
    };
    let cell = ctx.cfg.solver.grid_cell;
    let radius = (domain.area() / PI).sqrt();
    let lemma = lemma_domination_check(&src, &domain, radius, cell)?;
    report.check(
        "f restricted to Ω rearranges below f",
        lemma.violations == 0,
        format!("{} violations over {} cells", lemma.violations, lemma.cells_checked),
    );
    let settings = TalentiSettings {
        mesh_h: ctx.cfg.solver.mesh_h.unwrap_or(0.02 * radius),
        spectral: ctx.cfg.solver.spectral()?,
        grid_cell: cell.max(0.01 * radius),
    };
    let bc = ctx.cfg.problem.boundary();
    let talenti = talenti_experiments(&domain, &src, bc, &settings)?;
    report.check(
        "∫_Ω u ≤ ∫_{Ω♯} u",
        talenti.heat_content.holds,
        format!("margin {}", f(talenti.heat_content.margin)),
    );
    if talenti.dirichlet {
        report.check(
            "J(Ω♯) ≤ J(Ω)",
            talenti.energy.holds,
            format!("margin {}", f(talenti.energy.margin)),
        );
    }
    report.check(
        "Hardy–Littlewood",
        talenti.hardy_littlewood.holds,
        format!("{} ≤ {}", f(talenti.hardy_littlewood.integral), f(talenti.hardy_littlewood.rearranged)),
    );
    let reach = domain.max_rho() + cell;
    let field = GridField::from_region([-reach, -reach], [reach, reach], cell, |x| domain.contains(x), |x| {
        src.planar_value(x)
    })?;
    let name = ctx.csv_name("rearranged.csv");
    let sharp = field.spherical()?;
    ctx.sink.write(&name, |w| sharp.write_csv(w))?;
    report.result = json!({ "lemma": lemma, "talenti": talenti, "csv": name });
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct InsulationRun {
    modes: Vec<(u32, f64, f64)>,
    heat_content: f64,
    margin: f64,
}

fn random_profiles(spec: &InsulationSpec) -> Result<Vec<Vec<(u32, f64, f64)>>> {
    if !(spec.max_amplitude > 0.0 && spec.max_amplitude < 1.0) || spec.max_mode == 0 {
        bail!("insulation profiles need 0 < max_amplitude < 1 and max_mode ≥ 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.profiles)
        .map(|_| {
            let terms = rng.gen_range(1..=4);
            let budget = rng.gen_range(0.1..=1.0) * spec.max_amplitude;
            let weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights
                .iter()
                .map(|w| (rng.gen_range(1..=spec.max_mode), budget * w / total, rng.gen_range(0.0..2.0 * PI)))
                .collect()
        })
        .collect())
}

pub fn insulation(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("insulation");
    let spec = ctx.cfg.insulation.clone().unwrap_or_default();
    if !(spec.mass > 0.0) {
        bail!("insulation mass must be positive");
    }
    let r = ctx.cfg.problem.radius;
    let src = ctx.source()?;
    if src.dim() != 2 {
        bail!("insulation is planar: set problem.n = 2");
    }
    let disk = StarDomain::disk(r)?;
    let mesh = Mesh::star(&disk, ctx.cfg.solver.mesh_h.unwrap_or(0.04 * r))?;
    let h0 = spec.mass / (2.0 * PI * r);
    let h_min = 1e-9 * h0;
    let base = solve_insulation(&mesh, Arc::new(move |_| h0), h_min, &src)?;
    let best = base.heat_content();
    let limit = assemble_solve(&mesh, FemBoundary::Robin(1.0 / h0), &src)?;
    let gap = (limit.heat_content() - best).abs() / best.abs();
    report.check("constant h equals the β = P/m problem", gap <= 1e-10, format!("relative gap {}", f(gap)));
    let profiles = random_profiles(&spec)?;
    let rows = profiles
        .into_par_iter()
        .map(|modes| -> Result<InsulationRun> {
            let m = modes.clone();
            let h = move |theta: f64| {
                h0 * (1.0 + m.iter().map(|&(k, c, phi)| c * (k as f64 * theta + phi).cos()).sum::<f64>())
            };
            let field = solve_insulation(&mesh, Arc::new(h), h_min, &src)?;
            let heat_content = field.heat_content();
            Ok(InsulationRun {
                modes,
                heat_content,
                margin: best - heat_content,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    report.check(
        "constant h maximizes ∫u",
        rows.is_empty() || worst >= -1e-6 * best.abs(),
        format!("smallest margin {}", f(worst)),
    );
    report.result = json!({ "mass": spec.mass, "constant_h": h0, "heat_content": best, "profiles": rows });
    Ok(report)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    beta: f64,
    delta: f64,
    radius: f64,
    n: usize,
    lhs: f64,
    #[serde(rename = "A0")]
    a0: f64,
    #[serde(rename = "A1")]
    a1: f64,
    #[serde(rename = "A2")]
    a2: f64,
    beta1: Option<f64>,
    beta2: Option<f64>,
    verdict: String,
    underflow: bool,
}

pub fn sweep(ctx: &Context) -> Result<Report> {
    let mut report = Report::new("sweep");
    let spec = ctx.cfg.sweep.clone().unwrap_or_default();
    let n = ctx.cfg.problem.n;
    let betas = spec.beta.points()?;
    let deltas = spec.delta.points()?;
    let radii = spec.radius.points()?;
    let mut grid = Vec::with_capacity(betas.len() * deltas.len() * radii.len());
    for &delta in &deltas {
        for &radius in &radii {
            for &beta in &betas {
                grid.push((beta, delta, radius));
            }
        }
    }
    let rows = grid
        .into_par_iter()
        .map(|(beta, delta, radius)| -> Result<SweepRow> {
            let src = RadialSource::gaussian(delta, n)?;
            let p = BallProblem::robin(n, radius, beta)?;
            let tr = SourceTrace::of(&src, radius)?;
            let s = StabilityReport::evaluate(&p, &tr, true)?;
            Ok(SweepRow {
                beta,
                delta,
                radius,
                n,
                lhs: s.lhs,
                a0: s.a0,
                a1: s.a1,
                a2: s.a2,
                beta1: s.beta1,
                beta2: s.beta2,
                verdict: s.verdict.to_string(),
                underflow: s.underflow,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inconsistent = rows
        .iter()
        .filter(|r| r.verdict != Verdict::MarginallyStable.to_string() && (r.lhs > 0.0) != (r.verdict == "unstable"))
        .count();
    report.check(
        "verdicts follow the sign of the lhs",
        inconsistent == 0,
        format!("{inconsistent} inconsistent points"),
    );
    let name = ctx.csv_name("sweep.csv");
    ctx.sink.write(&name, |w| {
        let mut out = csv::Writer::from_writer(w);
        for r in &rows {
            out.serialize(r).map_err(std::io::Error::other)?;
        }
        out.flush()
    })?;
    let unstable = rows.iter().filter(|r| r.verdict == "unstable").count();
    report.result = json!({ "points": rows.len(), "unstable": unstable, "csv": name });
    Ok(report)
}
