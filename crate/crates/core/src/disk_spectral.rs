//! Poisson problems on a disk by angular Fourier decomposition.
//!
//! Each Fourier mode `u_k(r)` is resolved by Chebyshev collocation on
//! `[-R, R]` using the parity `u_k(-r) = (-1)^k u_k(r)`, so only the nodes in
//! `(0, R]` are unknowns and the origin is never a collocation point.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::ball_analysis::BoundaryCondition;
use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::quadrature::gauss_legendre_on;
use crate::scalar::Real;
use crate::sources::PlanarSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpectralConfig {
    /// Highest angular wavenumber `K`.
    pub modes: usize,
    /// Collocation nodes in `(0, R]`.
    pub radial: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { modes: 64, radial: 64 }
    }
}

impl SpectralConfig {
    pub fn new(modes: usize, radial: usize) -> Result<Self> {
        let cfg = Self { modes, radial };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 1 {
            return Err(Error::Config("spectral solver needs at least one angular mode".into()));
        }
        if self.radial < 16 {
            return Err(Error::Config(format!(
                "spectral solver needs at least 16 radial nodes, got {}",
                self.radial
            )));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            modes: 2 * self.modes,
            radial: 2 * self.radial,
        }
    }
}

/// Chebyshev points `x_j = cos(jπ/N)`, `N = 2M - 1`, with the differentiation
/// matrix rows belonging to the positive half.
struct Chebyshev<T> {
    m: usize,
    n: usize,
    x: Vec<T>,
    d1: Vec<T>,
    d2: Vec<T>,
}

impl<T: Real> Chebyshev<T> {
    fn new(m: usize) -> Self {
        let n = 2 * m - 1;
        let nf = T::from_usize(n);
        let pi = T::PI();
        let x: Vec<T> = (0..=n)
            .map(|j| (pi * T::from_usize(j) / nf).cos())
            .collect();
        let c = |j: usize| {
            let base = if j == 0 || j == n { T::from_int(2) } else { T::one() };
            if j.is_multiple_of(2) {
                base
            } else {
                -base
            }
        };
        let two = T::from_int(2);
        let mut full = vec![T::zero(); (n + 1) * (n + 1)];
        for i in 0..=n {
            let mut diag = T::zero();
            for j in 0..=n {
                if i == j {
                    continue;
                }
                // x_i - x_j without cancellation.
                let fi = T::from_usize(i);
                let fj = T::from_usize(j);
                let dx = two * (pi * (fj + fi) / (two * nf)).sin() * (pi * (fj - fi) / (two * nf)).sin();
                let v = c(i) / c(j) / dx;
                full[i * (n + 1) + j] = v;
                diag -= v;
            }
            full[i * (n + 1) + i] = diag;
        }
        let mut d2 = vec![T::zero(); m * (n + 1)];
        for i in 0..m {
            for k in 0..=n {
                let a = full[i * (n + 1) + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..=n {
                    d2[i * (n + 1) + j] += a * full[k * (n + 1) + j];
                }
            }
        }
        let d1 = full[..m * (n + 1)].to_vec();
        Self { m, n, x, d1, d2 }
    }

    /// Folds a full-grid row onto the positive nodes for parity `even`.
    fn fold(&self, row: &[T], even: bool) -> Vec<T> {
        (0..self.m)
            .map(|j| {
                let mirror = row[self.n - j];
                if even {
                    row[j] + mirror
                } else {
                    row[j] - mirror
                }
            })
            .collect()
    }

    fn d1_row(&self, i: usize, even: bool) -> Vec<T> {
        self.fold(&self.d1[i * (self.n + 1)..(i + 1) * (self.n + 1)], even)
    }

    fn d2_row(&self, i: usize, even: bool) -> Vec<T> {
        self.fold(&self.d2[i * (self.n + 1)..(i + 1) * (self.n + 1)], even)
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Angular sampling with `4K` equispaced points and its trigonometric table.
struct AngularGrid<T> {
    theta: Vec<T>,
    cos: Vec<Vec<T>>,
    sin: Vec<Vec<T>>,
}

impl<T: Real> AngularGrid<T> {
    fn new(k_max: usize) -> Self {
        let l = 4 * k_max;
        let theta: Vec<T> = (0..l)
            .map(|m| T::from_int(2) * T::PI() * T::from_usize(m) / T::from_usize(l))
            .collect();
        let cos = (0..=k_max)
            .map(|k| theta.iter().map(|&t| (T::from_usize(k) * t).cos()).collect())
            .collect();
        let sin = (0..=k_max)
            .map(|k| theta.iter().map(|&t| (T::from_usize(k) * t).sin()).collect())
            .collect();
        Self { theta, cos, sin }
    }

    /// Real Fourier coefficients `(a_k, b_k)` of the source on the circle of radius `r`.
    fn source_modes<S: PlanarSource<T> + ?Sized>(&self, src: &S, r: T) -> (Vec<T>, Vec<T>) {
        let samples: Vec<T> = self
            .theta
            .iter()
            .map(|&t| src.at([r * t.cos(), r * t.sin()]))
            .collect();
        let l = T::from_usize(self.theta.len());
        let k_max = self.cos.len() - 1;
        let mut a = vec![T::zero(); k_max + 1];
        let mut b = vec![T::zero(); k_max + 1];
        for k in 0..=k_max {
            let scale = if k == 0 { T::one() / l } else { T::from_int(2) / l };
            a[k] = dot(&samples, &self.cos[k]) * scale;
            b[k] = dot(&samples, &self.sin[k]) * scale;
        }
        (a, b)
    }
}

/// Solution of `-Δu = f` on the disk `|x| < R`, stored as Fourier modes
/// `u = a_0(r) + Σ_k a_k(r) cos kθ + b_k(r) sin kθ` at the collocation nodes.
#[derive(Debug, Clone)]
pub struct FourierRadialField<T> {
    radius: T,
    bc: BoundaryCondition<T>,
    cfg: SpectralConfig,
    nodes: Vec<T>,
    cos: Vec<Vec<T>>,
    sin: Vec<Vec<T>>,
    gradient_sq: T,
    boundary_sq: T,
    heat: T,
    mass: T,
    boundary_residual: T,
    aliasing: bool,
    cheb: std::sync::Arc<ChebyshevHandle<T>>,
}

/// The node set needed to interpolate after the solve.
#[derive(Debug)]
struct ChebyshevHandle<T> {
    x: Vec<T>,
    m: usize,
    n: usize,
}

impl<T: Real> ChebyshevHandle<T> {
    fn interpolation_row(&self, x: T, even: bool) -> Vec<T> {
        let n = self.n;
        let mut row = vec![T::zero(); n + 1];
        if let Some(hit) = self.x.iter().position(|&xj| xj == x) {
            row[hit] = T::one();
        } else {
            let mut total = T::zero();
            for j in 0..=n {
                let mut w = if j % 2 == 0 { T::one() } else { -T::one() };
                if j == 0 || j == n {
                    w = w / T::from_int(2);
                }
                let v = w / (x - self.x[j]);
                row[j] = v;
                total += v;
            }
            for v in &mut row {
                *v = *v / total;
            }
        }
        (0..self.m)
            .map(|j| if even { row[j] + row[n - j] } else { row[j] - row[n - j] })
            .collect()
    }
}

/// Solves `-Δu = f` in the disk of radius `R` with Robin or Dirichlet data.
pub fn solve_disk<T: Real, S: PlanarSource<T> + ?Sized>(
    radius: T,
    bc: BoundaryCondition<T>,
    source: &S,
    cfg: SpectralConfig,
) -> Result<FourierRadialField<T>> {
    cfg.validate()?;
    if !(radius > T::zero()) {
        return Err(Error::InvalidProblem(format!("disk radius must be positive, got {radius}")));
    }
    if let BoundaryCondition::Robin(beta) = bc {
        if !(beta > T::zero()) {
            return Err(Error::InvalidProblem(format!("Robin coefficient must be positive, got {beta}")));
        }
    }
    let m = cfg.radial;
    let k_max = cfg.modes;
    let cheb = Chebyshev::<T>::new(m);
    let nodes: Vec<T> = cheb.x[..m].iter().map(|&x| x * radius).collect();
    let angular = AngularGrid::<T>::new(k_max);

    // Source modes at the collocation nodes, indexed [node][k].
    let node_modes: Vec<(Vec<T>, Vec<T>)> = nodes.iter().map(|&r| angular.source_modes(source, r)).collect();

    let r2 = radius * radius;
    let mut cos = vec![vec![T::zero(); m]; k_max + 1];
    let mut sin = vec![vec![T::zero(); m]; k_max + 1];
    let mut boundary_residual = T::zero();
    for k in 0..=k_max {
        let even = k % 2 == 0;
        let kk = T::from_usize(k * k);
        let mut a = vec![T::zero(); m * m];
        match bc {
            BoundaryCondition::Robin(beta) => {
                let row = cheb.d1_row(0, even);
                for j in 0..m {
                    a[j] = row[j] / radius;
                }
                a[0] += beta;
            }
            BoundaryCondition::Dirichlet => a[0] = T::one(),
        }
        for i in 1..m {
            let d1 = cheb.d1_row(i, even);
            let d2 = cheb.d2_row(i, even);
            let x = cheb.x[i];
            for j in 0..m {
                a[i * m + j] = d2[j] / r2 + d1[j] / (r2 * x);
            }
            a[i * m + i] -= kk / (r2 * x * x);
        }
        let lu = DenseLu::factor(m, a.clone())?;
        let mut rhs_c = vec![T::zero(); m];
        let mut rhs_s = vec![T::zero(); m];
        for i in 1..m {
            rhs_c[i] = -node_modes[i].0[k];
            rhs_s[i] = -node_modes[i].1[k];
        }
        let uc = lu.solve(&rhs_c);
        let us = if k == 0 { vec![T::zero(); m] } else { lu.solve(&rhs_s) };
        let scale = uc.iter().chain(&us).fold(T::zero(), |s, v| s.max(v.abs()));
        let bres = dot(&a[..m], &uc).abs().max(dot(&a[..m], &us).abs());
        let rel = if scale > T::zero() { bres / scale } else { bres };
        boundary_residual = boundary_residual.max(rel);
        cos[k] = uc;
        sin[k] = us;
    }

    let handle = std::sync::Arc::new(ChebyshevHandle {
        x: cheb.x.clone(),
        m,
        n: cheb.n,
    });

    // Integrals by Gauss–Legendre in r; modes are interpolated, source modes sampled.
    let (rq, wq) = gauss_legendre_on::<T>(2 * m + 16, T::zero(), radius);
    let pi = T::PI();
    let two_pi = T::from_int(2) * pi;
    let d1_even: Vec<Vec<T>> = (0..m).map(|i| cheb.d1_row(i, true)).collect();
    let d1_odd: Vec<Vec<T>> = (0..m).map(|i| cheb.d1_row(i, false)).collect();
    let deriv = |vals: &[T], even: bool| -> Vec<T> {
        let rows = if even { &d1_even } else { &d1_odd };
        rows.iter().map(|row| dot(row, vals) / radius).collect()
    };
    let dcos: Vec<Vec<T>> = (0..=k_max).map(|k| deriv(&cos[k], k % 2 == 0)).collect();
    let dsin: Vec<Vec<T>> = (0..=k_max).map(|k| deriv(&sin[k], k % 2 == 0)).collect();

    let mut gradient_sq = T::zero();
    let mut heat = T::zero();
    let mut mass = T::zero();
    let mut source_sq = T::zero();
    let mut top_sq = T::zero();
    for (&r, &w) in rq.iter().zip(&wq) {
        let x = r / radius;
        let even_row = handle.interpolation_row(x, true);
        let odd_row = handle.interpolation_row(x, false);
        let (fa, fb) = angular.source_modes(source, r);
        let mut g = T::zero();
        let mut h = T::zero();
        let mut fs = T::zero();
        for k in 0..=k_max {
            let even = k % 2 == 0;
            let (vrow, drow) = if even { (&even_row, &odd_row) } else { (&odd_row, &even_row) };
            let a = dot(vrow, &cos[k]);
            let da = dot(drow, &dcos[k]);
            let weight = if k == 0 { two_pi } else { pi };
            let kr = T::from_usize(k) / r;
            if k == 0 {
                g += weight * da * da;
                h += weight * fa[0] * a;
                fs += weight * fa[0] * fa[0];
                mass += w * r * weight * a;
            } else {
                let b = dot(vrow, &sin[k]);
                let db = dot(drow, &dsin[k]);
                g += weight * (da * da + db * db + kr * kr * (a * a + b * b));
                h += weight * (fa[k] * a + fb[k] * b);
                let e = weight * (fa[k] * fa[k] + fb[k] * fb[k]);
                fs += e;
                if k == k_max {
                    top_sq += w * r * e;
                }
            }
        }
        gradient_sq += w * r * g;
        heat += w * r * h;
        source_sq += w * r * fs;
    }
    let mut boundary_sq = two_pi * cos[0][0] * cos[0][0];
    for k in 1..=k_max {
        boundary_sq += pi * (cos[k][0] * cos[k][0] + sin[k][0] * sin[k][0]);
    }
    boundary_sq *= radius;
    let aliasing = k_max > 0 && source_sq > T::zero() && top_sq > T::lit(1e-6) * source_sq;

    Ok(FourierRadialField {
        radius,
        bc,
        cfg,
        nodes,
        cos,
        sin,
        gradient_sq,
        boundary_sq,
        heat,
        mass,
        boundary_residual,
        aliasing,
        cheb: handle,
    })
}

/// Scalar summaries of a spectral solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary<T> {
    pub energy: T,
    pub total_heat: T,
    pub average: T,
    pub linf: T,
    pub aliasing_warning: bool,
}

impl<T: Real> FourierRadialField<T> {
    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn boundary_condition(&self) -> BoundaryCondition<T> {
        self.bc
    }

    pub fn config(&self) -> SpectralConfig {
        self.cfg
    }

    /// Collocation radii, descending from `R`.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Cosine and sine coefficients of mode `k` at the collocation nodes.
    pub fn mode(&self, k: usize) -> (&[T], &[T]) {
        (&self.cos[k], &self.sin[k])
    }

    /// Complex coefficient `u_k` of `e^{ikθ}` at node `j`, for `|k| ≤ K`.
    pub fn complex_mode(&self, k: i64, j: usize) -> Complex<T> {
        let ka = k.unsigned_abs() as usize;
        if ka == 0 {
            return Complex::new(self.cos[0][j], T::zero());
        }
        let half = T::lit(0.5);
        let c = Complex::new(half * self.cos[ka][j], -half * self.sin[ka][j]);
        if k > 0 {
            c
        } else {
            c.conj()
        }
    }

    /// Largest relative boundary-condition residual over all modes.
    pub fn boundary_residual(&self) -> T {
        self.boundary_residual
    }

    /// Set when the highest resolved mode carries more than 1e-6 of the source energy.
    pub fn aliasing_warning(&self) -> bool {
        self.aliasing
    }

    /// `½∫|∇u|² + (β/2)∮u² − ∫fu` (the boundary term is absent for Dirichlet data).
    pub fn energy(&self) -> T {
        let half = T::lit(0.5);
        let boundary = match self.bc {
            BoundaryCondition::Robin(beta) => half * beta * self.boundary_sq,
            BoundaryCondition::Dirichlet => T::zero(),
        };
        half * self.gradient_sq + boundary - self.heat
    }

    /// `∫fu`.
    pub fn total_heat(&self) -> T {
        self.heat
    }

    /// `∫u`.
    pub fn heat_content(&self) -> T {
        self.mass
    }

    /// `|Ω|⁻¹∫u`.
    pub fn average(&self) -> T {
        self.mass / (T::PI() * self.radius * self.radius)
    }

    pub fn dirichlet_integral(&self) -> T {
        self.gradient_sq
    }

    pub fn boundary_l2_sq(&self) -> T {
        self.boundary_sq
    }

    fn radial_values(&self, r: T) -> (Vec<T>, Vec<T>) {
        let x = (r / self.radius).min(T::one()).max(T::zero());
        let even = self.cheb.interpolation_row(x, true);
        let odd = self.cheb.interpolation_row(x, false);
        let k_max = self.cos.len() - 1;
        let mut a = Vec::with_capacity(k_max + 1);
        let mut b = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let row = if k % 2 == 0 { &even } else { &odd };
            a.push(dot(row, &self.cos[k]));
            b.push(dot(row, &self.sin[k]));
        }
        (a, b)
    }

    fn synthesize(a: &[T], b: &[T], theta: T) -> T {
        let mut s = a[0];
        for k in 1..a.len() {
            let kt = T::from_usize(k) * theta;
            s += a[k] * kt.cos() + b[k] * kt.sin();
        }
        s
    }

    /// `u(r, θ)` for `0 ≤ r ≤ R`.
    pub fn value_polar(&self, r: T, theta: T) -> T {
        let (a, b) = self.radial_values(r);
        Self::synthesize(&a, &b, theta)
    }

    /// `u(x)` for a point of the closed disk.
    pub fn value(&self, x: [T; 2]) -> T {
        self.value_polar(x[0].hypot(x[1]), x[1].atan2(x[0]))
    }

    /// Values on the tensor grid of `radii` × `angles` equispaced angles.
    pub fn polar_grid(&self, radii: &[T], angles: usize) -> Vec<Vec<T>> {
        let step = T::from_int(2) * T::PI() / T::from_usize(angles);
        radii
            .iter()
            .map(|&r| {
                let (a, b) = self.radial_values(r);
                (0..angles)
                    .map(|m| Self::synthesize(&a, &b, step * T::from_usize(m)))
                    .collect()
            })
            .collect()
    }

    fn search_radii(&self) -> Vec<T> {
        let mut radii = self.nodes.clone();
        radii.push(T::zero());
        radii
    }

    /// Smallest value on the collocation grid including the center.
    pub fn grid_min(&self) -> T {
        let grid = self.polar_grid(&self.search_radii(), 4 * self.cfg.modes.max(4));
        grid.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }

    /// `max |u|`, located on the polar grid and refined by a local pattern search.
    pub fn linf_norm(&self) -> T {
        let radii = self.search_radii();
        let angles = 4 * self.cfg.modes.max(4);
        let grid = self.polar_grid(&radii, angles);
        let mut best = (T::zero(), 0usize, 0usize);
        for (i, row) in grid.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        if best.0 == T::zero() {
            return T::zero();
        }
        let theta0 = T::from_int(2) * T::PI() * T::from_usize(best.2) / T::from_usize(angles);
        let r0 = radii[best.1];
        let mut p = [r0 * theta0.cos(), r0 * theta0.sin()];
        let mut val = best.0;
        let mut step = self.radius * T::PI() / T::from_usize(2 * self.cfg.radial);
        let r2 = self.radius * self.radius;
        let floor = self.radius * T::lit(1e-10);
        let dirs: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        for _ in 0..400 {
            if step < floor {
                break;
            }
            let mut moved = false;
            for &(dx, dy) in &dirs {
                let q = [p[0] + step * T::from_int(dx as i64), p[1] + step * T::from_int(dy as i64)];
                if q[0] * q[0] + q[1] * q[1] > r2 {
                    continue;
                }
                let v = self.value(q).abs();
                if v > val {
                    val = v;
                    p = q;
                    moved = true;
                }
            }
            if !moved {
                step = step / T::from_int(2);
            }
        }
        val
    }

    pub fn summary(&self) -> SpectralSummary<T> {
        SpectralSummary {
            energy: self.energy(),
            total_heat: self.total_heat(),
            average: self.average(),
            linf: self.linf_norm(),
            aliasing_warning: self.aliasing,
        }
    }

    /// Writes `r,theta,u` rows on an `n_r × n_theta` structured grid.
    pub fn write_csv<W: Write>(&self, mut w: W, n_r: usize, n_theta: usize) -> std::io::Result<()> {
        writeln!(w, "r,theta,u")?;
        let n_r = n_r.max(2);
        let radii: Vec<T> = (0..n_r)
            .map(|i| self.radius * T::from_usize(i) / T::from_usize(n_r - 1))
            .collect();
        let grid = self.polar_grid(&radii, n_theta.max(1));
        let step = T::from_int(2) * T::PI() / T::from_usize(n_theta.max(1));
        for (r, row) in radii.iter().zip(&grid) {
            for (m, u) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", r, step * T::from_usize(m), u)?;
            }
        }
        Ok(())
    }
}
