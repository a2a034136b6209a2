//! Closed-form analysis of the centered ball `B_R` for radial sources.
//!
//! Everything here is a function of four numbers: the dimension `n`, the
//! radius `R`, the Robin coefficient `β`, and the trace of the source on the
//! sphere, `(f(R), f_r(R), f̄(R))`. The arithmetic only needs a field, so most
//! functions are generic over [`Scalar`] and run exactly over rationals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scalar::{Real, Scalar};
use crate::sources::{RadialPolynomial, RadialSource, SourceKind};

/// Normalized LHS magnitude (`|lhs| / f̄²`) treated as zero.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition<T> {
    Robin(T),
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallProblem<T> {
    pub n: usize,
    pub radius: T,
    pub bc: BoundaryCondition<T>,
}

impl<T: Scalar> BallProblem<T> {
    pub fn robin(n: usize, radius: T, beta: T) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(Error::InvalidProblem(format!("Robin coefficient must be positive, got {beta}")));
        }
        Self::checked(n, radius, BoundaryCondition::Robin(beta))
    }

    pub fn dirichlet(n: usize, radius: T) -> Result<Self> {
        Self::checked(n, radius, BoundaryCondition::Dirichlet)
    }

    fn checked(n: usize, radius: T, bc: BoundaryCondition<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidProblem(format!("dimension must be at least 2, got {n}")));
        }
        if !(radius > T::zero()) {
            return Err(Error::InvalidProblem(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { n, radius, bc })
    }

    pub fn beta(&self) -> Option<T> {
        match self.bc {
            BoundaryCondition::Robin(b) => Some(b),
            BoundaryCondition::Dirichlet => None,
        }
    }

    fn require_beta(&self) -> Result<T> {
        self.beta()
            .ok_or_else(|| Error::InvalidProblem("operation needs a Robin boundary condition".into()))
    }

    /// Mean curvature `(n-1)/R` of the boundary sphere.
    pub fn mean_curvature(&self) -> T {
        T::from_usize(self.n - 1) / self.radius
    }
}

/// Values of the source on the boundary sphere: `f(R)`, `f_r(R)` and `f̄(R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTrace<T> {
    pub f: T,
    pub df: T,
    pub fbar: T,
    /// Some trace value was flushed to zero.
    pub underflow: bool,
}

impl<T: Scalar> SourceTrace<T> {
    pub fn new(f: T, df: T, fbar: T) -> Self {
        Self {
            f,
            df,
            fbar,
            underflow: false,
        }
    }

    /// Exact trace of a polynomial source.
    pub fn of_polynomial(p: &RadialPolynomial<T>, n: usize, radius: T) -> Self {
        Self::new(p.value(radius), p.radial_derivative(radius), p.ball_mean(n, radius))
    }
}

impl<T: Real> SourceTrace<T> {
    /// Trace of `src` on the sphere of radius `radius`.
    ///
    /// `f(R)` below `ε·f̄` and `f_r(R)` below `ε·f̄/R` are flushed to zero and
    /// flagged, as are values that underflowed during evaluation.
    pub fn of(src: &RadialSource<T>, radius: T) -> Result<Self> {
        let fbar = src.ball_mean(radius)?.fbar;
        let mut f = src.value(radius)?;
        let mut df = src.radial_derivative(radius)?;
        let eps = T::epsilon();
        let mut underflow = matches!(src.kind(), SourceKind::Gaussian { .. }) && f == T::zero();
        if f != T::zero() && f.abs() < eps * fbar.abs() {
            f = T::zero();
            underflow = true;
        }
        if df != T::zero() && df.abs() * radius < eps * fbar.abs() {
            df = T::zero();
            underflow = true;
        }
        Ok(Self {
            f,
            df,
            fbar,
            underflow,
        })
    }
}

/// `u(R)`, `u_r(R)`, `u_rr(R)` of the radial state on the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData<T> {
    pub u: T,
    pub ur: T,
    pub urr: T,
    pub fbar: T,
    pub f: T,
    pub fr: T,
}

/// Boundary values of the state, from the divergence theorem and the radial ODE.
pub fn boundary_data<T: Scalar>(p: &BallProblem<T>, tr: &SourceTrace<T>) -> BoundaryData<T> {
    let n = T::from_usize(p.n);
    let r = p.radius;
    let (u, ur) = match p.bc {
        BoundaryCondition::Robin(beta) => {
            let u = r * tr.fbar / (n * beta);
            (u, -beta * u)
        }
        BoundaryCondition::Dirichlet => (T::zero(), -r * tr.fbar / n),
    };
    let urr = -tr.f + T::from_usize(p.n - 1) / n * tr.fbar;
    BoundaryData {
        u,
        ur,
        urr,
        fbar: tr.fbar,
        f: tr.f,
        fr: tr.df,
    }
}

/// Left side of the ball stability criterion; the ball is stable iff it is `≤ 0`.
pub fn stability_lhs<T: Scalar>(p: &BallProblem<T>, tr: &SourceTrace<T>) -> Result<T> {
    let beta = p.require_beta()?;
    let n = T::from_usize(p.n);
    let r = p.radius;
    let a = (T::from_usize(p.n - 1) - r * beta) / n;
    Ok((tr.f - a * tr.fbar) * (tr.f - tr.fbar) + (T::one() + beta * r) / (n * beta) * tr.df * tr.fbar)
}

/// Coefficients of the criterion rewritten as `A₀ ≤ βA₁ + A₂/β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Abc<T> {
    #[serde(rename = "A0")]
    pub a0: T,
    #[serde(rename = "A1")]
    pub a1: T,
    #[serde(rename = "A2")]
    pub a2: T,
}

impl<T: Scalar> Abc<T> {
    /// `A₀ − βA₁ − A₂/β`, equal to the stability LHS.
    pub fn lhs_at(&self, beta: T) -> T {
        self.a0 - beta * self.a1 - self.a2 / beta
    }

    /// `A₀² − 4A₁A₂`.
    pub fn discriminant(&self) -> T {
        self.a0 * self.a0 - T::from_int(4) * self.a1 * self.a2
    }

    /// `A₀ ≤ 2√(A₁A₂)`, decided without square roots (assumes `A₁, A₂ ≥ 0`).
    pub fn stable_for_all_beta(&self) -> bool {
        self.a0 <= T::zero() || self.discriminant() <= T::zero()
    }
}

pub fn abc_decomposition<T: Scalar>(n: usize, radius: T, tr: &SourceTrace<T>) -> Abc<T> {
    let nn = T::from_usize(n);
    let fbar = tr.fbar;
    let a0 = (tr.f - fbar) * (tr.f - T::from_usize(n - 1) / nn * fbar) + radius / nn * tr.df * fbar;
    let a1 = radius / nn * fbar * (fbar - tr.f);
    let a2 = (T::zero() - tr.df) * fbar / nn;
    Abc { a0, a1, a2 }
}

/// Instability window of the Robin coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholds<T> {
    /// `A₀ ≤ 2√(A₁A₂)`: stable for every `β > 0`.
    AlwaysStable,
    /// Unstable exactly for `β ∈ (beta1, beta2)`.
    Window {
        beta1: T,
        beta2: T,
        /// `A₂` vanished, so `beta1 = 0` by degeneration rather than as a root.
        degenerate_lower: bool,
    },
}

/// Roots of `A₁β² − A₀β + A₂ = 0` when the window is nonempty.
pub fn beta_thresholds<T: Real>(abc: &Abc<T>) -> Result<Thresholds<T>> {
    if abc.a1 < T::zero() || abc.a2 < T::zero() {
        return Err(Error::Inconsistent(format!(
            "A1 = {} and A2 = {} must be nonnegative for a radially decreasing source",
            abc.a1, abc.a2
        )));
    }
    if abc.stable_for_all_beta() {
        return Ok(Thresholds::AlwaysStable);
    }
    if abc.a1 == T::zero() {
        return Err(Error::Inconsistent(format!(
            "A1 = 0 with A0 = {} > 0 cannot occur for a radially decreasing source",
            abc.a0
        )));
    }
    let sq = abc.discriminant().max(T::zero()).sqrt();
    // Cancellation-free pair of roots.
    let big = abc.a0 + sq;
    let beta2 = big / (T::from_int(2) * abc.a1);
    let beta1 = if abc.a2 == T::zero() { T::zero() } else { T::from_int(2) * abc.a2 / big };
    Ok(Thresholds::Window {
        beta1,
        beta2,
        degenerate_lower: abc.a2 == T::zero(),
    })
}

/// Thresholds of a source on `B_R`, with the source's monotonicity checked.
pub fn source_thresholds<T: Real>(src: &RadialSource<T>, radius: T) -> Result<(Thresholds<T>, SourceTrace<T>)> {
    if !src.is_radially_decreasing() {
        return Err(Error::InvalidSource(
            "threshold analysis needs a radially decreasing source".into(),
        ));
    }
    let tr = SourceTrace::of(src, radius)?;
    let abc = abc_decomposition(src.dim(), radius, &tr);
    Ok((beta_thresholds(&abc)?, tr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AlwaysStable,
    Stable,
    MarginallyStable,
    Unstable,
}

impl Verdict {
    /// Marginal counts as stable.
    pub fn is_stable(self) -> bool {
        !matches!(self, Verdict::Unstable)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::AlwaysStable => "always-stable",
            Verdict::Stable => "stable",
            Verdict::MarginallyStable => "marginally-stable",
            Verdict::Unstable => "unstable",
        })
    }
}

/// Which statement of the radially-decreasing classification decided the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    /// `f(R) ≥ ((n−1)/n)·f̄(R)`, hence `A₀ ≤ 0`.
    FlatBoundary,
    /// `A₀ ≤ 2√(A₁A₂)`.
    NoWindow,
    /// `βR ≥ n − 1`.
    LargeBetaRadius,
    /// `A₀ > 2√(A₁A₂)`: decided by the position of `β` against `(β₁, β₂)`.
    Window,
    /// Source not radially decreasing; sign of the LHS only.
    Direct,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clause::FlatBoundary => "flat-boundary",
            Clause::NoWindow => "no-window",
            Clause::LargeBetaRadius => "large-beta-radius",
            Clause::Window => "window",
            Clause::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub clause: Clause,
}

fn is_marginal<T: Scalar>(lhs: T, fbar: T) -> bool {
    if T::is_exact() {
        return lhs == T::zero();
    }
    let scale = fbar * fbar;
    let tol = T::from_ratio(1, 1_000_000_000) * if scale > T::zero() { scale } else { T::one() };
    lhs.abs_val() <= tol
}

/// Classifies the ball at `β` for a source with trace `tr`.
///
/// For radially decreasing sources the clauses are tried in order: flat
/// boundary, empty window, `βR ≥ n − 1`, then window membership. Otherwise
/// only the sign of the LHS is used.
pub fn classify<T: Scalar>(p: &BallProblem<T>, tr: &SourceTrace<T>, radially_decreasing: bool) -> Result<Classification> {
    let beta = p.require_beta()?;
    let lhs = stability_lhs(p, tr)?;
    let marginal = is_marginal(lhs, tr.fbar);
    let pick = |stable: Verdict, clause| Classification {
        verdict: if marginal { Verdict::MarginallyStable } else { stable },
        clause,
    };
    if !radially_decreasing {
        let v = if lhs > T::zero() { Verdict::Unstable } else { Verdict::Stable };
        return Ok(pick(v, Clause::Direct));
    }
    let n = T::from_usize(p.n);
    let abc = abc_decomposition(p.n, p.radius, tr);
    if tr.f * n >= T::from_usize(p.n - 1) * tr.fbar {
        return Ok(pick(Verdict::AlwaysStable, Clause::FlatBoundary));
    }
    if abc.stable_for_all_beta() {
        return Ok(pick(Verdict::AlwaysStable, Clause::NoWindow));
    }
    if beta * p.radius >= T::from_usize(p.n - 1) {
        return Ok(pick(Verdict::Stable, Clause::LargeBetaRadius));
    }
    // Inside the window iff A₁β² − A₀β + A₂ < 0, i.e. iff the LHS is positive.
    let q = abc.a1 * beta * beta - abc.a0 * beta + abc.a2;
    let v = if q < T::zero() { Verdict::Unstable } else { Verdict::Stable };
    Ok(pick(v, Clause::Window))
}

/// Second variation along a single spherical-harmonic mode of degree `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSecondVariation<T> {
    pub l: u32,
    /// Eigenvalue `l(l+n−2)/R²` of `−Δ` on the sphere.
    pub lambda_l: T,
    /// Coefficient of the shape derivative `v = c_l r^l Y_l`.
    pub c_l: T,
    /// `d²J/dt²` per unit `∮ζ² dσ`.
    pub q_l: T,
}

/// Second variation of the energy for normal velocity `ζ = Y_l` on the sphere.
pub fn mode_second_variation<T: Scalar>(p: &BallProblem<T>, tr: &SourceTrace<T>, l: u32) -> Result<ModeSecondVariation<T>> {
    let beta = p.require_beta()?;
    if l == 0 {
        return Err(Error::InvalidProblem(
            "degree 0 moves volume; volume-preserving modes start at l = 1".into(),
        ));
    }
    let bd = boundary_data(p, tr);
    let r = p.radius;
    let lt = T::from_int(l as i64);
    let lambda_l = lt * (lt + T::from_usize(p.n) - T::from_int(2)) / (r * r);
    let lambda_1 = T::from_usize(p.n - 1) / (r * r);
    let d = bd.urr - beta * beta * bd.u;
    let c_l = -d / (lt * r.powu(l - 1) + beta * r.powu(l));
    let q_l = beta / T::from_int(2) * bd.u * bd.u * (lambda_l - lambda_1) - tr.df * bd.u + bd.ur * d
        - r / (lt + beta * r) * d * d;
    Ok(ModeSecondVariation {
        l,
        lambda_l,
        c_l,
        q_l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirichletVerdict {
    StrictlyStable,
    MarginallyStable,
    Unstable,
}

/// Stability of `B_R` for the Dirichlet energy: stable iff `f(R) ≤ f̄(R)`.
pub fn dirichlet_stability<T: Scalar>(tr: &SourceTrace<T>) -> DirichletVerdict {
    let gap = tr.f - tr.fbar;
    let tol = if T::is_exact() {
        T::zero()
    } else {
        T::from_ratio(1, 1_000_000_000) * tr.fbar.abs_val()
    };
    if gap.abs_val() <= tol {
        DirichletVerdict::MarginallyStable
    } else if gap < T::zero() {
        DirichletVerdict::StrictlyStable
    } else {
        DirichletVerdict::Unstable
    }
}

/// Value of `−β²u² + ½|∇u|² + (β/2)u²H − fu` on the sphere.
pub fn stationarity_constant<T: Scalar>(p: &BallProblem<T>, tr: &SourceTrace<T>) -> Result<T> {
    let beta = p.require_beta()?;
    let bd = boundary_data(p, tr);
    let half = T::from_ratio(1, 2);
    Ok(-beta * beta * bd.u * bd.u + half * bd.ur * bd.ur + half * beta * bd.u * bd.u * p.mean_curvature()
        - tr.f * bd.u)
}

/// Radial state `u(r)` and `u_r(r)` at each radius of `grid`.
///
/// `u_r(r) = −r^{1−n}∫₀^r f s^{n−1} ds`, and `u(r) − u(R)` is written as a
/// single integral `∫₀^R f(τ)τ^{n−1} G(max(r,τ)) dτ` with `G(ρ) = ∫_ρ^R s^{1−n} ds`.
pub fn radial_profile<T: Real>(p: &BallProblem<T>, src: &RadialSource<T>, grid: &[T]) -> Result<Vec<(T, T, T)>> {
    if src.dim() != p.n {
        return Err(Error::InvalidProblem(format!(
            "source dimension {} does not match problem dimension {}",
            src.dim(),
            p.n
        )));
    }
    let big_r = p.radius;
    let n = p.n as i32;
    let kernel = |rho: T| -> T {
        if n == 2 {
            (big_r / rho).ln()
        } else {
            (rho.powi(2 - n) - big_r.powi(2 - n)) / T::from_int((n - 2) as i64)
        }
    };
    let tr = SourceTrace::of(src, big_r)?;
    let u_boundary = boundary_data(p, &tr).u;
    let tol = Tolerance::default();
    let weight = |s: T| src.value(s).unwrap_or(T::zero()) * s.powi(n - 1);
    let mut out = Vec::with_capacity(grid.len());
    for &r in grid {
        if r < T::zero() || r > big_r {
            return Err(Error::OutOfRange {
                radius: r.to_f64(),
                min: 0.0,
                max: big_r.to_f64(),
            });
        }
        let inner = integrate(weight, T::zero(), r, tol)?.value;
        let ur = if r > T::zero() { -inner / r.powi(n - 1) } else { T::zero() };
        let head = if r > T::zero() { inner * kernel(r) } else { T::zero() };
        let tail = integrate(|s: T| weight(s) * kernel(s), r, big_r, tol)?.value;
        out.push((r, u_boundary + head + tail, ur));
    }
    Ok(out)
}

/// Complete stability analysis of a Robin ball problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport<T> {
    pub lhs: T,
    #[serde(rename = "A0")]
    pub a0: T,
    #[serde(rename = "A1")]
    pub a1: T,
    #[serde(rename = "A2")]
    pub a2: T,
    pub discriminant: T,
    pub beta1: Option<T>,
    pub beta2: Option<T>,
    pub verdict: Verdict,
    pub clause: Clause,
    pub underflow: bool,
}

impl<T: Real> StabilityReport<T> {
    pub fn evaluate(p: &BallProblem<T>, tr: &SourceTrace<T>, radially_decreasing: bool) -> Result<Self> {
        let lhs = stability_lhs(p, tr)?;
        let abc = abc_decomposition(p.n, p.radius, tr);
        let class = classify(p, tr, radially_decreasing)?;
        let (beta1, beta2) = if radially_decreasing {
            match beta_thresholds(&abc)? {
                Thresholds::AlwaysStable => (None, None),
                Thresholds::Window { beta1, beta2, .. } => (Some(beta1), Some(beta2)),
            }
        } else {
            (None, None)
        };
        Ok(Self {
            lhs,
            a0: abc.a0,
            a1: abc.a1,
            a2: abc.a2,
            discriminant: abc.discriminant(),
            beta1,
            beta2,
            verdict: class.verdict,
            clause: class.clause,
            underflow: tr.underflow,
        })
    }

    pub fn for_source(p: &BallProblem<T>, src: &RadialSource<T>) -> Result<Self> {
        let tr = SourceTrace::of(src, p.radius)?;
        Self::evaluate(p, &tr, src.is_radially_decreasing())
    }
}
