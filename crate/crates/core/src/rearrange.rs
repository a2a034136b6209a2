//! Decreasing and spherical rearrangements on Cartesian grids, the domination
//! lemma for restricted radial sources, Talenti-type comparisons and the
//! two-disk example.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::ball_analysis::BoundaryCondition;
use crate::disk_spectral::{solve_disk, SpectralConfig};
use crate::error::{Error, Result};
use crate::fem2d::{assemble_solve, FemBoundary, Mesh, Profile, StarDomain};
use crate::scalar::Real;
use crate::sources::{RadialSource, Shifted};

const SUBSAMPLES: usize = 4;

/// Values on a uniform grid, each cell carrying the fraction of its area that
/// belongs to the underlying domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    origin: [T; 2],
    cell: T,
    nx: usize,
    ny: usize,
    values: Vec<T>,
    fraction: Vec<T>,
}

impl<T: Real> GridField<T> {
    /// Samples `value` at cell centers over `[lo, hi]`; membership fractions
    /// come from a 4×4 subsample of `inside`.
    pub fn from_region<R, F>(lo: [T; 2], hi: [T; 2], cell: T, inside: R, value: F) -> Result<Self>
    where
        R: Fn([T; 2]) -> bool,
        F: Fn([T; 2]) -> T,
    {
        if !(cell > T::zero()) || !(hi[0] > lo[0]) || !(hi[1] > lo[1]) {
            return Err(Error::Config("grid needs a positive cell size and a nonempty box".into()));
        }
        let nx = ((hi[0] - lo[0]) / cell).to_f64().ceil() as usize;
        let ny = ((hi[1] - lo[1]) / cell).to_f64().ceil() as usize;
        let mut values = Vec::with_capacity(nx * ny);
        let mut fraction = Vec::with_capacity(nx * ny);
        let sub = T::from_usize(SUBSAMPLES);
        let half = T::lit(0.5);
        for j in 0..ny {
            for i in 0..nx {
                let x0 = lo[0] + cell * T::from_usize(i);
                let y0 = lo[1] + cell * T::from_usize(j);
                let mut hits = 0usize;
                for a in 0..SUBSAMPLES {
                    for b in 0..SUBSAMPLES {
                        let p = [
                            x0 + cell * (T::from_usize(a) + half) / sub,
                            y0 + cell * (T::from_usize(b) + half) / sub,
                        ];
                        if inside(p) {
                            hits += 1;
                        }
                    }
                }
                let frac = T::from_usize(hits) / (sub * sub);
                let center = [x0 + half * cell, y0 + half * cell];
                fraction.push(frac);
                values.push(if hits > 0 { value(center) } else { T::zero() });
            }
        }
        Ok(Self {
            origin: lo,
            cell,
            nx,
            ny,
            values,
            fraction,
        })
    }

    /// Same grid and fractions, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Config("value count does not match the grid".into()));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn map<F: Fn([T; 2], T) -> T>(&self, f: F) -> Self {
        let values = (0..self.values.len())
            .map(|k| if self.fraction[k] > T::zero() { f(self.center(k), self.values[k]) } else { T::zero() })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn cell(&self) -> T {
        self.cell
    }

    pub fn cell_area(&self) -> T {
        self.cell * self.cell
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn fractions(&self) -> &[T] {
        &self.fraction
    }

    pub fn center(&self, k: usize) -> [T; 2] {
        let (i, j) = (k % self.nx, k / self.nx);
        let half = T::lit(0.5);
        [
            self.origin[0] + self.cell * (T::from_usize(i) + half),
            self.origin[1] + self.cell * (T::from_usize(j) + half),
        ]
    }

    /// `Σ fraction · cell area`.
    pub fn measure(&self) -> T {
        self.fraction.iter().copied().sum::<T>() * self.cell_area()
    }

    /// `∫ f` over the domain.
    pub fn integral(&self) -> T {
        let a = self.cell_area();
        self.values.iter().zip(&self.fraction).map(|(&v, &w)| v * w * a).sum()
    }

    /// `∫ f g` for a field on the same grid.
    pub fn inner(&self, other: &Self) -> T {
        let a = self.cell_area();
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.fraction)
            .map(|((&f, &g), &w)| f * g * w * a)
            .sum()
    }

    /// `|{f > t}|`.
    pub fn distribution(&self, t: T) -> T {
        let a = self.cell_area();
        self.values
            .iter()
            .zip(&self.fraction)
            .filter(|(&v, _)| v > t)
            .map(|(_, &w)| w * a)
            .sum()
    }

    /// Decreasing rearrangement `f*` as an exact step function.
    pub fn decreasing(&self) -> DecreasingRearrangement<T> {
        let a = self.cell_area();
        let mut pairs: Vec<(T, T)> = self
            .values
            .iter()
            .zip(&self.fraction)
            .filter(|(_, &w)| w > T::zero())
            .map(|(&v, &w)| (v, w * a))
            .collect();
        pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal));
        let mut cum = Vec::with_capacity(pairs.len());
        let mut acc = T::zero();
        for p in &pairs {
            acc += p.1;
            cum.push(acc);
        }
        DecreasingRearrangement {
            values: pairs.into_iter().map(|p| p.0).collect(),
            cumulative: cum,
        }
    }

    /// Spherical rearrangement on the centered disk of equal measure, on a grid
    /// with the same cell size. Cells are filled in order of distance from the
    /// origin until the measure is exhausted, so the output has exactly the
    /// measure of the input.
    pub fn spherical(&self) -> Result<Self> {
        let star = self.decreasing();
        let measure = star.total_measure();
        let radius = (measure / T::PI()).sqrt();
        let pad = self.cell * T::from_int(3);
        let lo = [-radius - pad, -radius - pad];
        let hi = [radius + pad, radius + pad];
        let mut out = Self::from_region(lo, hi, self.cell, |_| false, |_| T::zero())?;
        let norm = |k: usize| {
            let c = out.center(k);
            c[0] * c[0] + c[1] * c[1]
        };
        let mut order: Vec<usize> = (0..out.values.len()).collect();
        order.sort_by(|&a, &b| norm(a).partial_cmp(&norm(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let a = out.cell_area();
        let half = T::lit(0.5);
        let mut acc = T::zero();
        for &k in &order {
            if acc >= measure {
                break;
            }
            let w = (measure - acc).min(a);
            out.fraction[k] = w / a;
            out.values[k] = star.at(acc + half * w);
            acc += w;
        }
        if acc < measure {
            return Err(Error::Inconsistent("rearranged disk does not fit its grid".into()));
        }
        Ok(out)
    }

    /// `x,y,value,fraction` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value,fraction")?;
        for k in 0..self.values.len() {
            let c = self.center(k);
            writeln!(w, "{},{},{},{}", c[0], c[1], self.values[k], self.fraction[k])?;
        }
        Ok(())
    }
}

/// Nonincreasing step function `f*(s) = v_k` for `m_{k-1} < s ≤ m_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreasingRearrangement<T> {
    values: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> DecreasingRearrangement<T> {
    pub fn total_measure(&self) -> T {
        self.cumulative.last().copied().unwrap_or(T::zero())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.cumulative
    }

    pub fn at(&self, s: T) -> T {
        if self.values.is_empty() || s > self.total_measure() {
            return T::zero();
        }
        let k = self.cumulative.partition_point(|&m| m < s);
        self.values[k.min(self.values.len() - 1)]
    }

    /// `∫ f* g* ds` by merging the breakpoints of both step functions.
    pub fn product_integral(&self, other: &Self) -> T {
        let (mut i, mut j) = (0usize, 0usize);
        let mut s = T::zero();
        let mut total = T::zero();
        while i < self.values.len() && j < other.values.len() {
            let next = self.cumulative[i].min(other.cumulative[j]);
            total += (next - s) * self.values[i] * other.values[j];
            s = next;
            if self.cumulative[i] <= s {
                i += 1;
            }
            if other.cumulative[j] <= s {
                j += 1;
            }
        }
        total
    }
}

/// Outcome of the domination check `(f|_Ω)^♯ ≤ f` on `B_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationReport<T> {
    pub radius: T,
    pub cell: T,
    pub cells_checked: usize,
    pub violations: usize,
    pub max_violation: T,
    /// Grid measure of `Ω` minus its exact area.
    pub measure_mismatch: T,
}

/// Checks `f*_Ω(π|x|²) ≤ f(max(|x| − cell/√2, 0))` at every cell center of `B_R`.
/// `radius` must match the measure of `domain` to within two cells.
pub fn lemma_domination_check<T: Real>(
    src: &RadialSource<T>,
    domain: &StarDomain<T>,
    radius: T,
    cell: T,
) -> Result<DominationReport<T>> {
    if src.dim() != 2 {
        return Err(Error::InvalidSource("grid rearrangements are planar".into()));
    }
    let area = domain.area();
    let gap = T::PI() * radius * radius - area;
    if !(cell > T::zero()) || gap.abs() > T::from_int(2) * cell * cell {
        return Err(Error::Inconsistent(format!(
            "|B_R| differs from |Ω| by {gap}, more than two cells"
        )));
    }
    let reach = domain.max_rho() + cell;
    let field = GridField::from_region(
        [-reach, -reach],
        [reach, reach],
        cell,
        |x| domain.contains(x),
        |x| src.planar_value(x),
    )?;
    let mismatch = field.measure() - area;
    let star = field.decreasing();
    let slack = cell / T::from_int(2).sqrt();
    let tol = T::epsilon() * T::from_int(64) * src.planar_value([T::zero(), T::zero()]).abs().max(T::one());
    let n = ((radius / cell).to_f64().ceil() as i64) + 1;
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = T::zero();
    for j in -n..=n {
        for i in -n..=n {
            let x = [cell * T::from_int(i), cell * T::from_int(j)];
            let r = x[0].hypot(x[1]);
            if !(r < radius) {
                continue;
            }
            checked += 1;
            let lhs = star.at(T::PI() * r * r);
            let rhs = src.planar_value([(r - slack).max(T::zero()), T::zero()]);
            let v = lhs - rhs;
            if v > tol {
                violations += 1;
            }
            worst = worst.max(v);
        }
    }
    Ok(DominationReport {
        radius,
        cell,
        cells_checked: checked,
        violations,
        max_violation: worst,
        measure_mismatch: mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalentiSettings<T> {
    pub mesh_h: T,
    pub spectral: SpectralConfig,
    pub grid_cell: T,
}

impl<T: Real> Default for TalentiSettings<T> {
    fn default() -> Self {
        Self {
            mesh_h: T::lit(0.02),
            spectral: SpectralConfig::new(48, 48).expect("valid default"),
            grid_cell: T::lit(0.02),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison<T> {
    pub domain: T,
    pub ball: T,
    /// Signed margin in the direction the comparison predicts (≥ 0 when it holds).
    pub margin: T,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyLittlewood<T> {
    pub integral: T,
    pub rearranged: T,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalentiReport<T> {
    pub solver: &'static str,
    pub dirichlet: bool,
    /// `J(Ω^♯) ≤ J(Ω)`; asserted only for Dirichlet data.
    pub energy: Comparison<T>,
    /// `∫_Ω u ≤ ∫_{Ω^♯} u`.
    pub heat_content: Comparison<T>,
    pub hardy_littlewood: HardyLittlewood<T>,
}

impl<T: Real> TalentiReport<T> {
    /// Whether every ordering predicted for this boundary condition holds.
    pub fn passes(&self) -> bool {
        self.heat_content.holds && self.hardy_littlewood.holds && (!self.dirichlet || self.energy.holds)
    }
}

struct Solved<T> {
    energy: T,
    heat_content: T,
}

/// Solves on `domain` and on the centered disk of equal area and compares
/// the energy and the heat content.
pub fn talenti_experiments<T: Real>(
    domain: &StarDomain<T>,
    src: &RadialSource<T>,
    bc: BoundaryCondition<T>,
    settings: &TalentiSettings<T>,
) -> Result<TalentiReport<T>> {
    if src.dim() != 2 {
        return Err(Error::InvalidProblem("Talenti experiments are planar (n = 2)".into()));
    }
    if !src.is_radially_decreasing() {
        return Err(Error::InvalidSource("comparison needs a radially decreasing source".into()));
    }
    let radius = (domain.area() / T::PI()).sqrt();
    let dirichlet = matches!(bc, BoundaryCondition::Dirichlet);
    let reach = domain.max_rho() + settings.grid_cell;
    let f_grid = GridField::from_region(
        [-reach, -reach],
        [reach, reach],
        settings.grid_cell,
        |x| domain.contains(x),
        |x| src.planar_value(x),
    )?;
    let (solver, on_domain, on_ball, u_grid) = match domain.profile() {
        Profile::ShiftedDisk { center } if domain.scale() == T::one() => {
            let c = *center;
            // Ω = B_R + c is solved on B_R with the source seen from c.
            let shifted = Shifted::new(src, c);
            let fd = solve_disk(radius, bc, &shifted, settings.spectral)?;
            let fb = solve_disk(radius, bc, src, settings.spectral)?;
            let u = f_grid.map(|x, _| {
                let y = [x[0] - c[0], x[1] - c[1]];
                let r = y[0].hypot(y[1]);
                let s = if r > radius { radius / r } else { T::one() };
                fd.value([y[0] * s, y[1] * s])
            });
            let a = Solved {
                energy: fd.energy(),
                heat_content: fd.heat_content(),
            };
            let b = Solved {
                energy: fb.energy(),
                heat_content: fb.heat_content(),
            };
            ("spectral", a, b, u)
        }
        _ => {
            let fem_bc = match bc {
                BoundaryCondition::Robin(b) => FemBoundary::Robin(b),
                BoundaryCondition::Dirichlet => FemBoundary::Dirichlet,
            };
            let mesh = Mesh::star(domain, settings.mesh_h)?;
            let disk = StarDomain::disk(radius)?;
            let disk_mesh = Mesh::star(&disk, settings.mesh_h)?;
            let fd = assemble_solve(&mesh, fem_bc.clone(), src)?;
            let fb = assemble_solve(&disk_mesh, fem_bc, src)?;
            let u = f_grid.map(|x, _| fd.sample(x));
            let a = Solved {
                energy: fd.energy(),
                heat_content: fd.heat_content(),
            };
            let b = Solved {
                energy: fb.energy(),
                heat_content: fb.heat_content(),
            };
            ("fem", a, b, u)
        }
    };
    let energy_margin = on_domain.energy - on_ball.energy;
    let heat_margin = on_ball.heat_content - on_domain.heat_content;
    let integral = f_grid.inner(&u_grid);
    let rearranged = f_grid.decreasing().product_integral(&u_grid.decreasing());
    let hl_tol = T::epsilon() * T::from_int(1024) * rearranged.abs();
    Ok(TalentiReport {
        solver,
        dirichlet,
        energy: Comparison {
            domain: on_domain.energy,
            ball: on_ball.energy,
            margin: energy_margin,
            holds: energy_margin >= T::zero(),
        },
        heat_content: Comparison {
            domain: on_domain.heat_content,
            ball: on_ball.heat_content,
            margin: heat_margin,
            holds: heat_margin >= T::zero(),
        },
        hardy_littlewood: HardyLittlewood {
            integral,
            rearranged,
            holds: integral <= rearranged + hl_tol,
        },
    })
}

/// Closed forms for the union of the unit disk (with `f = 1`) and a disjoint
/// disk of radius `ε` (with `f = 0`) against its symmetrization `B_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoDiskReport<T> {
    pub eps: T,
    pub c: T,
    pub beta: T,
    pub beta0: T,
    pub linf_omega: T,
    pub linf_ball: T,
    pub delta: T,
    /// `‖u_{Ω^♯}‖∞ ≥ ‖u_Ω‖∞`.
    pub comparison_holds: bool,
    pub verdict: &'static str,
}

pub fn two_disk_counterexample<T: Real>(eps: T, beta: T) -> Result<TwoDiskReport<T>> {
    if !(eps > T::zero()) || !(beta > T::zero()) {
        return Err(Error::InvalidProblem(format!(
            "two-disk example needs ε > 0 and β > 0, got ε = {eps}, β = {beta}"
        )));
    }
    let e2 = eps * eps;
    let c = (T::one() + e2).sqrt();
    let ln_c = T::lit(0.5) * e2.ln_1p();
    // 1 − 1/c = (c − 1)/c with c − 1 = ε²/(c + 1).
    let one_minus_inv = e2 / ((c + T::one()) * c);
    let beta0 = one_minus_inv / ln_c;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let linf_omega = half / beta + quarter;
    let linf_ball = half / (beta * c) + half * ln_c + quarter;
    let delta = -half / beta * one_minus_inv + half * ln_c;
    let holds = delta >= T::zero();
    Ok(TwoDiskReport {
        eps,
        c,
        beta,
        beta0,
        linf_omega,
        linf_ball,
        delta,
        comparison_holds: holds,
        verdict: if holds { "comparison holds" } else { "comparison fails" },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_field(cell: f64, f: impl Fn([f64; 2]) -> f64) -> GridField<f64> {
        GridField::from_region([-1.0, -1.0], [1.0, 1.0], cell, |x| x[0] * x[0] + x[1] * x[1] < 1.0, f).unwrap()
    }

    #[test]
    fn constant_rearranges_to_constant() {
        let f = disk_field(0.05, |_| 1.0);
        let s = f.spherical().unwrap();
        assert!(s.values().iter().zip(s.fractions()).all(|(&v, &w)| w == 0.0 || v == 1.0));
        assert!((s.measure() - f.measure()).abs() < 1e-12);
    }

    #[test]
    fn radial_decreasing_is_fixed() {
        let g = |x: [f64; 2]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let cell = 0.02;
        let f = disk_field(cell, g);
        let s = f.spherical().unwrap();
        let modulus = 2.0 * (2.0f64).sqrt() * cell;
        for k in 0..s.values().len() {
            if s.fractions()[k] == 1.0 {
                let c = s.center(k);
                assert!((s.values()[k] - g(c)).abs() <= modulus, "{:?}", c);
            }
        }
    }

    #[test]
    fn step_function_and_hardy_littlewood() {
        let f = disk_field(0.1, |x| 1.0 + x[0]);
        let star = f.decreasing();
        assert!(star.values().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(star.at(star.total_measure() * 2.0), 0.0);
        assert_eq!(star.at(0.0), star.values()[0]);
        let g = f.map(|x, _| 2.0 - x[1]);
        assert!(f.inner(&g) <= star.product_integral(&g.decreasing()) + 1e-12);
        assert!((star.product_integral(&star) - f.inner(&f)).abs() < 1e-12);
    }

    #[test]
    fn domination_for_shifted_disk() {
        let src = RadialSource::gaussian(0.5, 2).unwrap();
        let d = StarDomain::shifted_disk(1.0, [0.3, 0.0]).unwrap();
        let r = lemma_domination_check(&src, &d, 1.0, 0.01).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(r.cells_checked > 30000);
        let one = RadialSource::constant(1.0, 2).unwrap();
        let r = lemma_domination_check(&one, &d, 1.0, 0.02).unwrap();
        assert_eq!(r.max_violation, 0.0);
        assert!(lemma_domination_check(&src, &d, 1.01, 0.01).is_err());
    }

    #[test]
    fn two_disk_closed_forms() {
        let r = two_disk_counterexample(0.5f64, 0.5).unwrap();
        assert!((r.c - 1.118034).abs() < 1e-6);
        assert!((r.beta0 - 0.946233).abs() < 1e-6);
        assert!((r.linf_omega - 1.25).abs() < 1e-15);
        assert!((r.linf_ball - 1.200213).abs() < 1e-6);
        assert!(!r.comparison_holds);
        let r = two_disk_counterexample(0.5f64, 2.0).unwrap();
        assert!((r.linf_omega - 0.5).abs() < 1e-15);
        assert!((r.linf_ball - 0.529393).abs() < 1e-6);
        assert!(r.comparison_holds);
        let r = two_disk_counterexample(1e-9f64, 1.0).unwrap();
        assert!(r.delta.abs() < 1e-15);
        assert!((r.beta0 - 1.0).abs() < 1e-9);
        assert!(two_disk_counterexample(0.0f64, 1.0).is_err());
    }
}
