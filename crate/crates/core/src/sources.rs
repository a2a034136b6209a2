//! Radially symmetric heat sources `f(|x|)`.
//!
//! Every source knows its value, its radial derivative and its mean over
//! centered balls. Constant and polynomial sources are closed form; Gaussian
//! and tabulated sources fall back to adaptive quadrature for ball means.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scalar::{Real, Scalar};

/// Number of samples used to audit positivity and monotonicity at construction.
const AUDIT_SAMPLES: usize = 257;

/// Polynomial in `r²`: `f(r) = Σ_k c_k r^{2k}`.
///
/// Kept separate from [`RadialSource`] so that its ball means can be computed
/// in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPolynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> RadialPolynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn value(&self, r: T) -> T {
        let r2 = r * r;
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * r2 + c)
    }

    pub fn radial_derivative(&self, r: T) -> T {
        // d/dr Σ c_k r^{2k} = Σ 2k c_k r^{2k-1}
        let r2 = r * r;
        let mut acc = T::zero();
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * r2 + T::from_usize(2 * k) * c;
        }
        acc * r
    }

    /// `f̄(R) = n R^{-n} ∫_0^R f(s) s^{n-1} ds = Σ_k c_k n R^{2k} / (n + 2k)`.
    pub fn ball_mean(&self, n: usize, radius: T) -> T {
        let r2 = radius * radius;
        let mut pow = T::one();
        let mut acc = T::zero();
        for (k, &c) in self.coeffs.iter().enumerate() {
            acc = acc + c * T::from_usize(n) * pow / T::from_usize(n + 2 * k);
            pow = pow * r2;
        }
        acc
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic<T> {
    knots: Vec<T>,
    values: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    pub fn new(knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::InvalidSource(
                "tabulated source needs at least two (radius, value) pairs of equal length".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSource("tabulated radii must be strictly increasing".into()));
        }
        let m = knots.len();
        let secants: Vec<T> = (0..m - 1)
            .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
            .collect();
        let mut slopes = vec![T::zero(); m];
        slopes[0] = secants[0];
        slopes[m - 1] = secants[m - 2];
        for i in 1..m - 1 {
            if secants[i - 1] * secants[i] <= T::zero() {
                slopes[i] = T::zero();
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                let w1 = T::from_int(2) * h1 + h0;
                let w2 = h1 + T::from_int(2) * h0;
                slopes[i] = (w1 + w2) / (w1 / secants[i - 1] + w2 / secants[i]);
            }
        }
        Ok(Self {
            knots,
            values,
            slopes,
        })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn range(&self) -> (T, T) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn segment(&self, r: T) -> usize {
        let m = self.knots.len();
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&r).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(m - 2),
            Err(i) => i.saturating_sub(1).min(m - 2),
        }
    }

    fn hermite(&self, r: T) -> (T, T) {
        let i = self.segment(r);
        let h = self.knots[i + 1] - self.knots[i];
        let t = (r - self.knots[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::from_int(2);
        let three = T::from_int(3);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        let value = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let six = T::from_int(6);
        let four = T::from_int(4);
        let dh00 = six * t2 - six * t;
        let dh10 = three * t2 - four * t + T::one();
        let dh01 = -six * t2 + six * t;
        let dh11 = three * t2 - two * t;
        let deriv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        (value, deriv)
    }
}

/// Shape of a radial source profile.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind<T> {
    Constant(T),
    /// `f_δ(x) = δ^{-n} exp(-π|x|²/δ²)`, unit mass over `ℝⁿ`.
    Gaussian { delta: T },
    Polynomial(RadialPolynomial<T>),
    Tabulated(MonotoneCubic<T>),
}

/// Radially symmetric, positive heat source in `n` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSource<T> {
    kind: SourceKind<T>,
    dim: usize,
    floor: T,
    working_radius: T,
    decreasing: bool,
}

/// Mean of a source over the centered ball of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallAverage<T> {
    pub radius: T,
    pub fbar: T,
}

impl<T: Real> RadialSource<T> {
    /// Builds and audits a source on `[0, working_radius]`.
    pub fn new(kind: SourceKind<T>, dim: usize, working_radius: T) -> Result<Self> {
        Self::with_floor(kind, dim, working_radius, T::zero())
    }

    /// Like [`RadialSource::new`], requiring `f > floor` on the audit grid.
    pub fn with_floor(kind: SourceKind<T>, dim: usize, working_radius: T, floor: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSource(format!("dimension must be at least 2, got {dim}")));
        }
        if !(floor >= T::zero()) {
            return Err(Error::InvalidSource("positivity floor must be nonnegative".into()));
        }
        if !(working_radius > T::zero()) {
            return Err(Error::InvalidSource("working radius must be positive".into()));
        }
        match &kind {
            SourceKind::Constant(c) if !(*c > floor) => {
                return Err(Error::InvalidSource(format!("constant source {c} is not above the floor")))
            }
            SourceKind::Gaussian { delta } if !(*delta > T::zero()) => {
                return Err(Error::InvalidSource("gaussian width must be positive".into()))
            }
            SourceKind::Polynomial(p) if p.coeffs().is_empty() => {
                return Err(Error::InvalidSource("polynomial source needs coefficients".into()))
            }
            SourceKind::Tabulated(t) => {
                let (lo, hi) = t.range();
                if lo > T::zero() || hi < working_radius {
                    return Err(Error::InvalidSource(format!(
                        "table covers [{lo}, {hi}] but the working range is [0, {working_radius}]"
                    )));
                }
            }
            _ => {}
        }
        let mut src = Self {
            kind,
            dim,
            floor,
            working_radius,
            decreasing: true,
        };
        let mut decreasing = true;
        for i in 0..AUDIT_SAMPLES {
            let r = working_radius * T::from_usize(i) / T::from_usize(AUDIT_SAMPLES - 1);
            let v = src.raw_value(r);
            // Gaussians are positive in exact arithmetic; a flushed tail is not a sign change.
            let positive = match src.kind {
                SourceKind::Gaussian { .. } => v >= T::zero(),
                _ => v > floor,
            };
            if !positive || !v.is_finite() {
                return Err(Error::InvalidSource(format!(
                    "source value {v} at r = {r} is not above the floor {floor}"
                )));
            }
            if src.raw_derivative(r) > T::zero() {
                decreasing = false;
            }
        }
        src.decreasing = decreasing;
        Ok(src)
    }

    pub fn constant(c: T, dim: usize) -> Result<Self> {
        Self::new(SourceKind::Constant(c), dim, T::from_int(16))
    }

    pub fn gaussian(delta: T, dim: usize) -> Result<Self> {
        Self::new(SourceKind::Gaussian { delta }, dim, T::from_int(16))
    }

    /// Polynomial in `r²` audited on `[0, working_radius]`.
    pub fn polynomial(coeffs: Vec<T>, dim: usize, working_radius: T) -> Result<Self> {
        Self::new(
            SourceKind::Polynomial(RadialPolynomial::new(coeffs)),
            dim,
            working_radius,
        )
    }

    pub fn tabulated(radii: Vec<T>, values: Vec<T>, dim: usize) -> Result<Self> {
        let table = MonotoneCubic::new(radii, values)?;
        let hi = table.range().1;
        Self::new(SourceKind::Tabulated(table), dim, hi)
    }

    pub fn kind(&self) -> &SourceKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn working_radius(&self) -> T {
        self.working_radius
    }

    /// `f_r ≤ 0` held on the whole audit grid.
    pub fn is_radially_decreasing(&self) -> bool {
        self.decreasing
    }

    fn raw_value(&self, r: T) -> T {
        match &self.kind {
            SourceKind::Constant(c) => *c,
            SourceKind::Gaussian { delta } => {
                let v = delta.powi(-(self.dim as i32)) * (-T::PI() * r * r / (*delta * *delta)).exp();
                flush(v)
            }
            SourceKind::Polynomial(p) => p.value(r),
            SourceKind::Tabulated(t) => t.hermite(r).0,
        }
    }

    fn raw_derivative(&self, r: T) -> T {
        match &self.kind {
            SourceKind::Constant(_) => T::zero(),
            SourceKind::Gaussian { delta } => {
                let d2 = *delta * *delta;
                flush(-T::from_int(2) * T::PI() * r / d2 * self.raw_value(r))
            }
            SourceKind::Polynomial(p) => p.radial_derivative(r),
            SourceKind::Tabulated(t) => t.hermite(r).1,
        }
    }

    fn check_radius(&self, r: T) -> Result<()> {
        let bad = !(r >= T::zero())
            || matches!(&self.kind, SourceKind::Tabulated(t) if r > t.range().1);
        if bad {
            let max = match &self.kind {
                SourceKind::Tabulated(t) => t.range().1.to_f64(),
                _ => f64::INFINITY,
            };
            return Err(Error::OutOfRange {
                radius: r.to_f64(),
                min: 0.0,
                max,
            });
        }
        Ok(())
    }

    /// `f(r)`; Gaussian values below the smallest normal number are flushed to 0.
    pub fn value(&self, r: T) -> Result<T> {
        self.check_radius(r)?;
        Ok(self.raw_value(r))
    }

    /// Radial derivative `f_r(r)`.
    pub fn radial_derivative(&self, r: T) -> Result<T> {
        self.check_radius(r)?;
        Ok(self.raw_derivative(r))
    }

    /// `f(|x + shift|)` for planar sources.
    pub fn value_at(&self, x: [T; 2], shift: [T; 2]) -> Result<T> {
        if self.dim != 2 {
            return Err(Error::InvalidSource(format!(
                "off-center evaluation needs a planar source, got dimension {}",
                self.dim
            )));
        }
        self.value((x[0] + shift[0]).hypot(x[1] + shift[1]))
    }

    /// Planar evaluation without range checks, for solver inner loops.
    /// Radii beyond a tabulated range are clamped to the last knot.
    pub fn planar_value(&self, x: [T; 2]) -> T {
        let mut r = x[0].hypot(x[1]);
        if let SourceKind::Tabulated(t) = &self.kind {
            r = r.min(t.range().1);
        }
        self.raw_value(r)
    }

    /// `f̄(R) = |B_R|^{-1} ∫_{B_R} f`.
    pub fn ball_mean(&self, radius: T) -> Result<BallAverage<T>> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidProblem(format!("ball radius must be positive, got {radius}")));
        }
        self.check_radius(radius)?;
        let n = self.dim;
        let fbar = match &self.kind {
            SourceKind::Constant(c) => *c,
            SourceKind::Polynomial(p) => p.ball_mean(n, radius),
            SourceKind::Gaussian { .. } => {
                let moment = self.radial_moment(T::zero(), radius)?;
                T::from_usize(n) * moment / radius.powi(n as i32)
            }
            SourceKind::Tabulated(t) => {
                // Split at the knots so every panel integrates a single cubic.
                let mut moment = T::zero();
                let mut lo = T::zero();
                for &k in t.knots().iter().skip(1) {
                    let hi = k.min(radius);
                    if hi > lo {
                        moment += self.radial_moment(lo, hi)?;
                    }
                    lo = hi;
                    if k >= radius {
                        break;
                    }
                }
                T::from_usize(n) * moment / radius.powi(n as i32)
            }
        };
        Ok(BallAverage { radius, fbar })
    }

    /// `∫_a^b f(s) s^{n-1} ds` by adaptive quadrature.
    pub fn radial_moment(&self, a: T, b: T) -> Result<T> {
        let n = self.dim as i32;
        let scale = self.raw_value(a).abs().max(self.raw_value(b).abs()).max(self.floor)
            * b.powi(n - 1)
            * (b - a);
        let scale = if scale > T::zero() { scale } else { T::one() };
        let tol = Tolerance {
            abs: T::lit(1e-12).max(T::epsilon() * T::lit(50.0)) * scale,
            ..Tolerance::default()
        };
        let res = integrate(|s: T| self.raw_value(s) * s.powi(n - 1), a, b, tol)?;
        Ok(res.value)
    }
}

/// A heat source that can be sampled anywhere in the plane.
pub trait PlanarSource<T>: Sync {
    fn at(&self, x: [T; 2]) -> T;
}

impl<T, F: Fn([T; 2]) -> T + Sync> PlanarSource<T> for F {
    fn at(&self, x: [T; 2]) -> T {
        self(x)
    }
}

impl<T: Real> PlanarSource<T> for RadialSource<T> {
    fn at(&self, x: [T; 2]) -> T {
        self.planar_value(x)
    }
}

/// `x ↦ f(|x + shift|)`: a radial source seen from a translated frame.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<'a, T> {
    pub source: &'a RadialSource<T>,
    pub shift: [T; 2],
}

impl<'a, T: Real> Shifted<'a, T> {
    pub fn new(source: &'a RadialSource<T>, shift: [T; 2]) -> Self {
        Self { source, shift }
    }
}

impl<T: Real> PlanarSource<T> for Shifted<'_, T> {
    fn at(&self, x: [T; 2]) -> T {
        self.source.planar_value([x[0] + self.shift[0], x[1] + self.shift[1]])
    }
}

fn flush<T: Real>(v: T) -> T {
    if v.abs() < T::min_positive_value() {
        T::zero()
    } else {
        v
    }
}
