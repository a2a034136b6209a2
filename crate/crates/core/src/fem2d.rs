//! P1 finite elements on star-shaped planar domains.
//!
//! Meshes are built on a reference hexagonal polar layout of the unit disk
//! (ring `i` carries `6i` nodes) and pushed forward by
//! `ξ(cos θ, sin θ) ↦ ξ ρ(θ)(cos θ, sin θ)`, so boundary nodes sit exactly on
//! the curve and a smooth family of domains gives a smooth family of meshes
//! with fixed connectivity.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Envelope;
use crate::scalar::Real;
use crate::sources::PlanarSource;

#[derive(Debug, Clone, PartialEq)]
pub enum Profile<T> {
    /// `ρ(θ) = R(1 + Σ_k a_k cos kθ + b_k sin kθ)`, `k = 1, 2, …`.
    Fourier { cos: Vec<T>, sin: Vec<T> },
    /// Axis-aligned ellipse with semi-axes `a`, `b`.
    Ellipse { a: T, b: T },
    /// Disk of radius `R` centered at `center` (star-shaped about the origin when `|center| < R`).
    ShiftedDisk { center: [T; 2] },
}

/// Domain `{ rθ-polar : r < s·ρ(θ) }`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDomain<T> {
    radius: T,
    scale: T,
    profile: Profile<T>,
}

impl<T: Real> StarDomain<T> {
    fn build(radius: T, profile: Profile<T>) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::Geometry(format!("base radius must be positive, got {radius}")));
        }
        let d = Self {
            radius,
            scale: T::one(),
            profile,
        };
        d.check_star()?;
        Ok(d)
    }

    pub fn disk(radius: T) -> Result<Self> {
        Self::build(radius, Profile::Fourier { cos: vec![], sin: vec![] })
    }

    /// Fourier perturbation of the disk; `cos[k-1]`, `sin[k-1]` multiply `cos kθ`, `sin kθ`.
    pub fn fourier(radius: T, cos: Vec<T>, sin: Vec<T>) -> Result<Self> {
        Self::build(radius, Profile::Fourier { cos, sin })
    }

    /// Ellipse with semi-axes `a`, `b`; the base radius is that of the disk of equal area.
    pub fn ellipse(a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b > T::zero()) {
            return Err(Error::Geometry(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
        }
        Self::build((a * b).sqrt(), Profile::Ellipse { a, b })
    }

    pub fn shifted_disk(radius: T, center: [T; 2]) -> Result<Self> {
        if !(center[0].hypot(center[1]) < radius) {
            return Err(Error::Geometry("shifted disk must contain the origin".into()));
        }
        Self::build(radius, Profile::ShiftedDisk { center })
    }

    /// Rescales so that the enclosed area equals `πR²` exactly.
    pub fn preserving_area(mut self) -> Self {
        let target = T::PI() * self.radius * self.radius;
        self.scale = (target / self.unscaled_area()).sqrt();
        self
    }

    pub fn with_scale(mut self, scale: T) -> Self {
        self.scale = scale;
        self
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    fn unscaled_area(&self) -> T {
        let pi = T::PI();
        let r = self.radius;
        match &self.profile {
            Profile::Fourier { cos, sin } => {
                let s: T = cos.iter().chain(sin).map(|&c| c * c).sum();
                pi * r * r * (T::one() + T::lit(0.5) * s)
            }
            Profile::Ellipse { a, b } => pi * *a * *b,
            Profile::ShiftedDisk { .. } => pi * r * r,
        }
    }

    /// Enclosed area, in closed form.
    pub fn area(&self) -> T {
        self.scale * self.scale * self.unscaled_area()
    }

    /// `(ρ, ρ', ρ'')` at angle `θ`.
    pub fn rho_derivatives(&self, theta: T) -> (T, T, T) {
        let (r0, r1, r2) = match &self.profile {
            Profile::Fourier { cos, sin } => {
                let mut v = T::one();
                let mut d1 = T::zero();
                let mut d2 = T::zero();
                for (i, (&a, &b)) in cos
                    .iter()
                    .chain(std::iter::repeat(&T::zero()))
                    .zip(sin.iter().chain(std::iter::repeat(&T::zero())))
                    .take(cos.len().max(sin.len()))
                    .enumerate()
                {
                    let k = T::from_usize(i + 1);
                    let (s, c) = (k * theta).sin_cos();
                    v += a * c + b * s;
                    d1 += k * (b * c - a * s);
                    d2 -= k * k * (a * c + b * s);
                }
                (self.radius * v, self.radius * d1, self.radius * d2)
            }
            Profile::Ellipse { a, b } => {
                let (a, b) = (*a, *b);
                let (s, c) = theta.sin_cos();
                let g = b * b * c * c + a * a * s * s;
                let diff = a * a - b * b;
                let g1 = diff * (T::from_int(2) * theta).sin();
                let g2 = T::from_int(2) * diff * (T::from_int(2) * theta).cos();
                let ab = a * b;
                let rho = ab / g.sqrt();
                let d1 = -T::lit(0.5) * ab * g1 / (g * g.sqrt());
                let d2 = ab * (T::lit(0.75) * g1 * g1 / (g * g * g.sqrt()) - T::lit(0.5) * g2 / (g * g.sqrt()));
                (rho, d1, d2)
            }
            Profile::ShiftedDisk { center } => {
                let (s, c) = theta.sin_cos();
                let p = center[0] * c + center[1] * s;
                let q = center[0] * s - center[1] * c;
                let root = (self.radius * self.radius - q * q).sqrt();
                let rho = p + root;
                let d1 = -q - q * p / root;
                let d2 = -p - (p * p - q * q) / root - q * q * p * p / (root * root * root);
                (rho, d1, d2)
            }
        };
        (self.scale * r0, self.scale * r1, self.scale * r2)
    }

    pub fn rho(&self, theta: T) -> T {
        self.rho_derivatives(theta).0
    }

    /// Curvature of the boundary curve from the analytic profile.
    pub fn curvature(&self, theta: T) -> T {
        let (r, r1, r2) = self.rho_derivatives(theta);
        let q = r * r + r1 * r1;
        (r * r + T::from_int(2) * r1 * r1 - r * r2) / (q * q.sqrt())
    }

    /// Inward test for a point of the plane.
    pub fn contains(&self, x: [T; 2]) -> bool {
        let r = x[0].hypot(x[1]);
        r < self.rho(x[1].atan2(x[0]))
    }

    fn check_star(&self) -> Result<()> {
        let n = 4096;
        for i in 0..n {
            let theta = T::from_int(2) * T::PI() * T::from_usize(i) / T::from_usize(n);
            let r = self.rho(theta);
            if !(r > T::zero()) {
                return Err(Error::Geometry(format!(
                    "boundary radius is not positive at θ = {theta} (ρ = {r})"
                )));
            }
        }
        Ok(())
    }

    pub fn max_rho(&self) -> T {
        let n = 1024;
        (0..n)
            .map(|i| self.rho(T::from_int(2) * T::PI() * T::from_usize(i) / T::from_usize(n)))
            .fold(T::zero(), |m, v| m.max(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge<T> {
    pub nodes: [usize; 2],
    /// Angular parameters of the endpoints; the second exceeds the first.
    pub theta: [T; 2],
    /// Triangle adjacent to the edge.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge<T>>,
    on_boundary: Vec<bool>,
    h: T,
    buckets: Arc<Buckets<T>>,
}

/// Reference layout: per-node `(ξ, θ)` and triangles.
fn reference_layout(rings: usize) -> (Vec<(usize, usize)>, Vec<[usize; 3]>) {
    let start = |i: usize| if i == 0 { 0 } else { 1 + 3 * i * (i - 1) };
    let mut nodes = vec![(0usize, 0usize)];
    for i in 1..=rings {
        for j in 0..6 * i {
            nodes.push((i, j));
        }
    }
    let idx = |i: usize, j: usize| if i == 0 { 0 } else { start(i) + j % (6 * i) };
    let mut tris = Vec::new();
    if rings >= 1 {
        for j in 0..6 {
            tris.push([0, idx(1, j), idx(1, j + 1)]);
        }
    }
    for i in 2..=rings {
        // Zipper inside one sector, in local positions: inner 0..=i-1, outer 0..=i.
        let mut local: Vec<[(bool, usize); 3]> = Vec::new();
        let (mut p, mut q) = (0usize, 0usize);
        while p < i - 1 || q < i {
            let advance_outer = if p == i - 1 {
                true
            } else if q == i {
                false
            } else {
                (q + 1) * (i - 1) <= (p + 1) * i
            };
            if advance_outer {
                local.push([(false, p), (true, q), (true, q + 1)]);
                q += 1;
            } else {
                local.push([(false, p), (true, q), (false, p + 1)]);
                p += 1;
            }
        }
        for sector in 0..6 {
            let mirrored = sector >= 3;
            for t in &local {
                let map = |(outer, pos): (bool, usize)| {
                    let (ring, count) = if outer { (i, i) } else { (i - 1, i - 1) };
                    let pos = if mirrored { count - pos } else { pos };
                    idx(ring, sector * count + pos)
                };
                tris.push([map(t[0]), map(t[1]), map(t[2])]);
            }
        }
    }
    (nodes, tris)
}

fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Uniform bucket grid over the bounding box for point location.
#[derive(Debug)]
struct Buckets<T> {
    origin: [T; 2],
    cell: T,
    nx: usize,
    ny: usize,
    items: Vec<Vec<usize>>,
}

impl<T: Real> Buckets<T> {
    fn new(vertices: &[[T; 2]], triangles: &[[usize; 3]], h: T) -> Self {
        let mut lo = [T::infinity(); 2];
        let mut hi = [T::neg_infinity(); 2];
        for v in vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let cell = h.max(T::epsilon());
        let nx = ((hi[0] - lo[0]) / cell).to_f64().ceil().max(1.0) as usize;
        let ny = ((hi[1] - lo[1]) / cell).to_f64().ceil().max(1.0) as usize;
        let mut b = Self {
            origin: lo,
            cell,
            nx,
            ny,
            items: vec![Vec::new(); nx * ny],
        };
        for (t, tri) in triangles.iter().enumerate() {
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for &v in tri {
                let (cx, cy) = b.cell_of(vertices[v]);
                x0 = x0.min(cx);
                y0 = y0.min(cy);
                x1 = x1.max(cx);
                y1 = y1.max(cy);
            }
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    b.items[cy * nx + cx].push(t);
                }
            }
        }
        b
    }

    fn cell_of(&self, x: [T; 2]) -> (usize, usize) {
        let clamp = |v: T, n: usize| {
            let f = v.to_f64().floor();
            if f < 0.0 {
                0
            } else {
                (f as usize).min(n - 1)
            }
        };
        (
            clamp((x[0] - self.origin[0]) / self.cell, self.nx),
            clamp((x[1] - self.origin[1]) / self.cell, self.ny),
        )
    }
}

/// Quality and consistency figures of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshAudit {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub euler: i64,
    pub min_signed_area: f64,
    pub min_angle_deg: f64,
    pub area: f64,
}

impl<T: Real> Mesh<T> {
    /// Deterministic mesh of a star domain with target edge length `h`.
    pub fn star(domain: &StarDomain<T>, h: T) -> Result<Self> {
        if !(h > T::zero()) || !(h < domain.radius() / T::from_int(4)) {
            return Err(Error::Geometry(format!(
                "mesh size must satisfy 0 < h < R/4, got h = {h}, R = {}",
                domain.radius()
            )));
        }
        domain.check_star()?;
        let rings = (domain.max_rho() / h).to_f64().ceil().max(2.0) as usize;
        Self::star_with_rings(domain, rings, h)
    }

    /// Mesh with an explicit number of rings; `h` is recorded as the nominal size.
    pub fn star_with_rings(domain: &StarDomain<T>, rings: usize, h: T) -> Result<Self> {
        if rings < 2 {
            return Err(Error::Geometry("a star mesh needs at least two rings".into()));
        }
        let (nodes, mut triangles) = reference_layout(rings);
        let two_pi = T::from_int(2) * T::PI();
        let nr = T::from_usize(rings);
        let mut vertices = Vec::with_capacity(nodes.len());
        let mut angle = Vec::with_capacity(nodes.len());
        for &(i, j) in &nodes {
            if i == 0 {
                vertices.push([T::zero(), T::zero()]);
                angle.push(T::zero());
                continue;
            }
            let theta = two_pi * T::from_usize(j) / T::from_usize(6 * i);
            let xi = T::from_usize(i) / nr;
            let r = if i == rings { domain.rho(theta) } else { xi * domain.rho(theta) };
            let (s, c) = theta.sin_cos();
            vertices.push([r * c, r * s]);
            angle.push(theta);
        }
        // Orientation is fixed on the reference layout so that it cannot flip with the map.
        for t in &mut triangles {
            let refpt = |v: usize| {
                let (i, j) = nodes[v];
                if i == 0 {
                    return [0.0, 0.0];
                }
                let th = 2.0 * std::f64::consts::PI * j as f64 / (6 * i) as f64;
                [i as f64 * th.cos(), i as f64 * th.sin()]
            };
            if signed_area(refpt(t[0]), refpt(t[1]), refpt(t[2])) < 0.0 {
                t.swap(1, 2);
            }
        }
        let bstart = 1 + 3 * rings * (rings - 1);
        let nb = 6 * rings;
        let mut on_boundary = vec![false; vertices.len()];
        for b in bstart..bstart + nb {
            on_boundary[b] = true;
        }
        let tri_of_edge = edge_triangles(&triangles);
        let mut boundary = Vec::with_capacity(nb);
        for j in 0..nb {
            let a = bstart + j;
            let b = bstart + (j + 1) % nb;
            let t0 = angle[a];
            let t1 = if j + 1 == nb { two_pi } else { angle[b] };
            let key = (a.min(b), a.max(b));
            let triangle = tri_of_edge
                .binary_search_by(|e| e.0.cmp(&key))
                .map(|k| tri_of_edge[k].1)
                .map_err(|_| Error::Geometry("boundary edge without a triangle".into()))?;
            boundary.push(BoundaryEdge {
                nodes: [a, b],
                theta: [t0, t1],
                triangle,
            });
        }
        let buckets = Arc::new(Buckets::new(&vertices, &triangles, h));
        let mesh = Self {
            vertices,
            triangles,
            boundary,
            on_boundary,
            h,
            buckets,
        };
        let bad = mesh
            .triangles
            .iter()
            .any(|t| !(signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) > T::zero()));
        if bad {
            return Err(Error::Geometry("mesh map produced an inverted triangle".into()));
        }
        Ok(mesh)
    }

    /// Builds a mesh from raw data; boundary edges are recovered from the connectivity.
    pub fn from_parts(vertices: Vec<[T; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if triangles.iter().flatten().any(|&v| v >= n) {
            return Err(Error::Geometry("triangle refers to a missing vertex".into()));
        }
        let mut triangles = triangles;
        for t in &mut triangles {
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == T::zero() {
                return Err(Error::Geometry("degenerate triangle".into()));
            }
            if a < T::zero() {
                t.swap(1, 2);
            }
        }
        let mut count = std::collections::BTreeMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_insert((0usize, a, b, ti));
                e.0 += 1;
            }
        }
        let mut on_boundary = vec![false; n];
        let mut boundary = Vec::new();
        let two_pi = T::from_int(2) * T::PI();
        for &(c, a, b, ti) in count.values() {
            if c == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
                let th = |v: usize| vertices[v][1].atan2(vertices[v][0]);
                let t0 = th(a);
                let mut t1 = th(b);
                if t1 < t0 {
                    t1 += two_pi;
                }
                boundary.push(BoundaryEdge {
                    nodes: [a, b],
                    theta: [t0, t1],
                    triangle: ti,
                });
            }
        }
        let mut h = T::zero();
        for t in &triangles {
            for k in 0..3 {
                let p = vertices[t[k]];
                let q = vertices[t[(k + 1) % 3]];
                h = h.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        let buckets = Arc::new(Buckets::new(&vertices, &triangles, h));
        Ok(Self {
            vertices,
            triangles,
            boundary,
            on_boundary,
            h,
            buckets,
        })
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge<T>] {
        &self.boundary
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_count(&self) -> usize {
        edge_triangles(&self.triangles)
            .iter()
            .map(|e| e.0)
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }

    pub fn audit(&self) -> MeshAudit {
        let mut min_area = f64::INFINITY;
        let mut min_angle = f64::INFINITY;
        for (ti, t) in self.triangles.iter().enumerate() {
            min_area = min_area.min(self.triangle_area(ti).to_f64());
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let q = self.vertices[t[(k + 1) % 3]];
                let r = self.vertices[t[(k + 2) % 3]];
                let u = [q[0].to_f64() - p[0].to_f64(), q[1].to_f64() - p[1].to_f64()];
                let v = [r[0].to_f64() - p[0].to_f64(), r[1].to_f64() - p[1].to_f64()];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        let edges = self.edge_count();
        MeshAudit {
            vertices: self.vertices.len(),
            edges,
            triangles: self.triangles.len(),
            euler: self.vertices.len() as i64 - edges as i64 + self.triangles.len() as i64,
            min_signed_area: min_area,
            min_angle_deg: min_angle,
            area: self.area().to_f64(),
        }
    }

    /// Largest distance, measured along rays, between boundary-edge midpoints and the curve.
    pub fn boundary_deviation(&self, domain: &StarDomain<T>) -> T {
        let mut worst = T::zero();
        for e in &self.boundary {
            let p = self.vertices[e.nodes[0]];
            let q = self.vertices[e.nodes[1]];
            let m = [T::lit(0.5) * (p[0] + q[0]), T::lit(0.5) * (p[1] + q[1])];
            let dev = (domain.rho(m[1].atan2(m[0])) - m[0].hypot(m[1])).abs();
            worst = worst.max(dev);
            for v in [p, q] {
                worst = worst.max((domain.rho(v[1].atan2(v[0])) - v[0].hypot(v[1])).abs());
            }
        }
        worst
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    pub fn barycentric(&self, t: usize, x: [T; 2]) -> [T; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let area = signed_area(a, b, c);
        let l0 = signed_area(x, b, c) / area;
        let l1 = signed_area(a, x, c) / area;
        [l0, l1, T::one() - l0 - l1]
    }

    /// Triangle containing `x`, if any.
    pub fn locate(&self, x: [T; 2]) -> Option<(usize, [T; 3])> {
        let (cx, cy) = self.buckets.cell_of(x);
        let tol = -T::lit(1e-12);
        for &t in &self.buckets.items[cy * self.buckets.nx + cx] {
            let l = self.barycentric(t, x);
            if l.iter().all(|&v| v >= tol) {
                return Some((t, l));
            }
        }
        None
    }

    /// Like [`Mesh::locate`], but falls back to the nearby triangle that is least
    /// violated and clamps the coordinates onto it.
    pub fn locate_clamped(&self, x: [T; 2]) -> (usize, [T; 3]) {
        if let Some(hit) = self.locate(x) {
            return hit;
        }
        let (cx, cy) = self.buckets.cell_of(x);
        let mut best: Option<(T, usize, [T; 3])> = None;
        for radius in 1..=self.buckets.nx.max(self.buckets.ny) {
            let x0 = cx.saturating_sub(radius);
            let y0 = cy.saturating_sub(radius);
            let x1 = (cx + radius).min(self.buckets.nx - 1);
            let y1 = (cy + radius).min(self.buckets.ny - 1);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    for &t in &self.buckets.items[by * self.buckets.nx + bx] {
                        let l = self.barycentric(t, x);
                        let worst = l.iter().fold(T::zero(), |m, &v| m.min(v));
                        if best.as_ref().is_none_or(|b| worst > b.0) {
                            best = Some((worst, t, l));
                        }
                    }
                }
            }
            if best.is_some() {
                break;
            }
        }
        let (_, t, l) = best.unwrap_or((T::zero(), 0, [T::one(), T::zero(), T::zero()]));
        let c = l.map(|v| v.max(T::zero()));
        let s = c[0] + c[1] + c[2];
        (t, c.map(|v| v / s))
    }

    /// Plain-text export: `V E T`, then `x y` per vertex, then `i j k` per triangle.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.vertices.len(), self.edge_count(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().map(|l| l.map_err(|e| Error::Config(e.to_string())));
        let header = lines.next().ok_or_else(|| Error::Config("empty mesh file".into()))??;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Config(format!("bad mesh header `{header}`"))))
            .collect::<Result<_>>()?;
        if counts.len() != 3 {
            return Err(Error::Config(format!("mesh header must be `V E T`, got `{header}`")));
        }
        let parse_t = |s: &str| {
            s.parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Config(format!("bad coordinate `{s}`")))
        };
        let mut vertices = Vec::with_capacity(counts[0]);
        for _ in 0..counts[0] {
            let line = lines.next().ok_or_else(|| Error::Config("missing vertex line".into()))??;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::Config(format!("vertex line must be `x y`, got `{line}`")));
            }
            vertices.push([parse_t(f[0])?, parse_t(f[1])?]);
        }
        let mut triangles = Vec::with_capacity(counts[2]);
        for _ in 0..counts[2] {
            let line = lines.next().ok_or_else(|| Error::Config("missing triangle line".into()))??;
            let f: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad triangle line `{line}`"))))
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(Error::Config(format!("triangle line must be `i j k`, got `{line}`")));
            }
            triangles.push([f[0], f[1], f[2]]);
        }
        let mesh = Self::from_parts(vertices, triangles)?;
        if mesh.edge_count() != counts[1] {
            return Err(Error::Config(format!(
                "mesh header declares {} edges, connectivity has {}",
                counts[1],
                mesh.edge_count()
            )));
        }
        Ok(mesh)
    }
}

/// Sorted `((min, max), triangle)` pairs for every triangle edge.
fn edge_triangles(triangles: &[[usize; 3]]) -> Vec<((usize, usize), usize)> {
    let mut v: Vec<((usize, usize), usize)> = triangles
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            (0..3).map(move |k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                ((a.min(b), a.max(b)), ti)
            })
        })
        .collect();
    v.sort();
    v
}

/// Boundary condition for the finite-element solver.
#[derive(Clone)]
pub enum FemBoundary<T> {
    Dirichlet,
    Robin(T),
    /// Robin coefficient depending on the boundary angle.
    VariableRobin(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: std::fmt::Debug> std::fmt::Debug for FemBoundary<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Dirichlet => write!(f, "Dirichlet"),
            Self::Robin(b) => write!(f, "Robin({b:?})"),
            Self::VariableRobin(_) => write!(f, "VariableRobin(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FemField<'m, T> {
    mesh: &'m Mesh<T>,
    values: Vec<T>,
    bc: FemBoundary<T>,
    stiffness_energy: T,
    boundary_energy: T,
    heat: T,
    residual: T,
}

/// Scalar summaries of a finite-element solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FemSummary<T> {
    pub energy: T,
    pub total_heat: T,
    pub heat_content: T,
    pub average: T,
    pub area: T,
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Assembles and solves `-Δu = f` with the given boundary condition.
pub fn assemble_solve<'m, T: Real, S: PlanarSource<T> + ?Sized>(
    mesh: &'m Mesh<T>,
    bc: FemBoundary<T>,
    source: &S,
) -> Result<FemField<'m, T>> {
    let n = mesh.vertices.len();
    let dirichlet = matches!(bc, FemBoundary::Dirichlet);
    if let FemBoundary::Robin(beta) = bc {
        if !(beta > T::zero()) {
            return Err(Error::Config(format!("Robin coefficient must be positive, got {beta}")));
        }
    }
    // Unknown numbering: all nodes, or interior nodes only for Dirichlet data.
    let mut dof = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        if !(dirichlet && mesh.on_boundary[v]) {
            dof[v] = count;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Config("no unknowns left after boundary conditions".into()));
    }
    let mut first: Vec<usize> = (0..count).collect();
    for t in &mesh.triangles {
        for &a in t {
            for &b in t {
                let (da, db) = (dof[a], dof[b]);
                if da != usize::MAX && db != usize::MAX && db < da {
                    first[da] = first[da].min(db);
                }
            }
        }
    }
    let mut stiff = Envelope::zeros(first);
    let mut edge_mass: Vec<([usize; 2], [[T; 2]; 2])> = Vec::new();
    let mut load = vec![T::zero(); count];
    let half = T::lit(0.5);
    let six = T::from_int(6);
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let p = t.map(|v| mesh.vertices[v]);
        let area = mesh.triangle_area(ti);
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        let four_a = T::from_int(4) * area;
        let mid = |i: usize, j: usize| [half * (p[i][0] + p[j][0]), half * (p[i][1] + p[j][1])];
        let f01 = source.at(mid(0, 1));
        let f12 = source.at(mid(1, 2));
        let f20 = source.at(mid(2, 0));
        let fl = [f01 + f20, f01 + f12, f12 + f20];
        for i in 0..3 {
            let di = dof[t[i]];
            if di == usize::MAX {
                continue;
            }
            load[di] += area / six * fl[i];
            for j in 0..3 {
                let dj = dof[t[j]];
                if dj == usize::MAX || dj > di {
                    continue;
                }
                stiff.add(di, dj, (b[i] * b[j] + c[i] * c[j]) / four_a);
            }
        }
    }
    if !dirichlet {
        for e in &mesh.boundary {
            let p = mesh.vertices[e.nodes[0]];
            let q = mesh.vertices[e.nodes[1]];
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            // Two-point Gauss rule for ∫ β φ_i φ_j along the edge.
            let mut m = [[T::zero(); 2]; 2];
            for &g in &GAUSS2 {
                let s = T::lit(g);
                let beta = match &bc {
                    FemBoundary::Robin(b) => *b,
                    FemBoundary::VariableRobin(f) => f(e.theta[0] + s * (e.theta[1] - e.theta[0])),
                    FemBoundary::Dirichlet => unreachable!(),
                };
                if !(beta > T::zero()) || !beta.is_finite() {
                    return Err(Error::Config(format!("Robin coefficient must be positive and finite, got {beta}")));
                }
                let phi = [T::one() - s, s];
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] += half * len * beta * phi[i] * phi[j];
                    }
                }
            }
            edge_mass.push(([dof[e.nodes[0]], dof[e.nodes[1]]], m));
        }
    }
    let mut system = stiff.clone();
    for (d, m) in &edge_mass {
        for i in 0..2 {
            for j in 0..2 {
                if d[j] <= d[i] {
                    system.add(d[i], d[j], m[i][j]);
                }
            }
        }
    }
    let chol = system.clone().cholesky()?;
    let mut x = chol.solve(&load);
    // One step of iterative refinement.
    let ax = system.mul(&x);
    let r: Vec<T> = load.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let dx = chol.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += *d;
    }
    let ax = system.mul(&x);
    let rnorm = load.iter().zip(&ax).fold(T::zero(), |m, (b, a)| m.max((*b - *a).abs()));
    let bnorm = load.iter().fold(T::zero(), |m, b| m.max(b.abs()));
    let residual = if bnorm > T::zero() { rnorm / bnorm } else { rnorm };

    let kx = stiff.mul(&x);
    let stiffness_energy = x.iter().zip(&kx).map(|(a, b)| *a * *b).sum();
    let boundary_energy = edge_mass
        .iter()
        .map(|(d, m)| {
            let u = [x[d[0]], x[d[1]]];
            u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1])
        })
        .sum();
    let heat = x.iter().zip(&load).map(|(a, b)| *a * *b).sum();
    let values = (0..n)
        .map(|v| if dof[v] == usize::MAX { T::zero() } else { x[dof[v]] })
        .collect();
    Ok(FemField {
        mesh,
        values,
        bc,
        stiffness_energy,
        boundary_energy,
        heat,
        residual,
    })
}

/// Thin-insulation problem `h ∂u/∂ν + u = 0`, i.e. Robin coefficient `1/h(θ)`.
pub fn solve_insulation<'m, T: Real, S: PlanarSource<T> + ?Sized>(
    mesh: &'m Mesh<T>,
    thickness: Arc<dyn Fn(T) -> T + Send + Sync>,
    h_min: T,
    source: &S,
) -> Result<FemField<'m, T>> {
    for e in &mesh.boundary {
        for &g in &GAUSS2 {
            let theta = e.theta[0] + T::lit(g) * (e.theta[1] - e.theta[0]);
            let h = thickness(theta);
            if !(h >= h_min) || !(h > T::zero()) {
                return Err(Error::Config(format!(
                    "insulation thickness {h} at θ = {theta} is below the minimum {h_min}"
                )));
            }
        }
    }
    let beta = move |theta: T| T::one() / thickness(theta);
    assemble_solve(mesh, FemBoundary::VariableRobin(Arc::new(beta)), source)
}

/// Extremes of the stationarity function along the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityResidual<T> {
    pub max: T,
    pub min: T,
    pub spread: T,
    pub mean: T,
}

impl<'m, T: Real> FemField<'m, T> {
    pub fn mesh(&self) -> &'m Mesh<T> {
        self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn boundary_condition(&self) -> &FemBoundary<T> {
        &self.bc
    }

    /// Relative residual of the linear solve.
    pub fn solve_residual(&self) -> T {
        self.residual
    }

    /// `½∫|∇u|² + ½∮βu² − ∫fu` with the assembled quadratures.
    pub fn energy(&self) -> T {
        T::lit(0.5) * (self.stiffness_energy + self.boundary_energy) - self.heat
    }

    /// `∫fu` by the load quadrature.
    pub fn total_heat(&self) -> T {
        self.heat
    }

    pub fn dirichlet_integral(&self) -> T {
        self.stiffness_energy
    }

    /// `∫u`, exact for the P1 field.
    pub fn heat_content(&self) -> T {
        let third = T::one() / T::from_int(3);
        self.mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(ti, t)| self.mesh.triangle_area(ti) * third * (self.values[t[0]] + self.values[t[1]] + self.values[t[2]]))
            .sum()
    }

    pub fn average_temperature(&self) -> T {
        self.heat_content() / self.mesh.area()
    }

    pub fn summary(&self) -> FemSummary<T> {
        FemSummary {
            energy: self.energy(),
            total_heat: self.total_heat(),
            heat_content: self.heat_content(),
            average: self.average_temperature(),
            area: self.mesh.area(),
        }
    }

    pub fn gradient(&self, t: usize) -> [T; 2] {
        let tri = self.mesh.triangles[t];
        let p = tri.map(|v| self.mesh.vertices[v]);
        let u = tri.map(|v| self.values[v]);
        let two_a = T::from_int(2) * self.mesh.triangle_area(t);
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        [
            (b[0] * u[0] + b[1] * u[1] + b[2] * u[2]) / two_a,
            (c[0] * u[0] + c[1] * u[1] + c[2] * u[2]) / two_a,
        ]
    }

    /// Interpolated value; points outside the mesh use the nearest triangle.
    pub fn sample(&self, x: [T; 2]) -> T {
        let (t, l) = self.mesh.locate_clamped(x);
        let tri = self.mesh.triangles[t];
        l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// `-β²u² + ½|∇u|² + (β/2)u²H − fu` at boundary-edge midpoints.
    pub fn stationarity_residual<S: PlanarSource<T> + ?Sized>(
        &self,
        domain: &StarDomain<T>,
        source: &S,
    ) -> Result<StationarityResidual<T>> {
        let beta = match self.bc {
            FemBoundary::Robin(b) => b,
            _ => {
                return Err(Error::InvalidProblem(
                    "stationarity residual needs a constant Robin coefficient".into(),
                ))
            }
        };
        let half = T::lit(0.5);
        let mut max = T::neg_infinity();
        let mut min = T::infinity();
        let mut sum = T::zero();
        for e in &self.mesh.boundary {
            let [a, b] = e.nodes;
            let pa = self.mesh.vertices[a];
            let pb = self.mesh.vertices[b];
            let m = [half * (pa[0] + pb[0]), half * (pa[1] + pb[1])];
            let u = half * (self.values[a] + self.values[b]);
            let g = self.gradient(e.triangle);
            let theta = half * (e.theta[0] + e.theta[1]);
            let curv = domain.curvature(theta);
            let val = -beta * beta * u * u + half * (g[0] * g[0] + g[1] * g[1]) + half * beta * u * u * curv
                - source.at(m) * u;
            max = max.max(val);
            min = min.min(val);
            sum += val;
        }
        let count = T::from_usize(self.mesh.boundary.len().max(1));
        Ok(StationarityResidual {
            max,
            min,
            spread: max - min,
            mean: sum / count,
        })
    }

    /// `x y u` per vertex.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (v, u) in self.mesh.vertices.iter().zip(&self.values) {
            writeln!(w, "{} {} {}", v[0], v[1], u)?;
        }
        Ok(())
    }
}
