//! One-dimensional quadrature: adaptive Gauss–Kronrod and fixed Gauss–Legendre rules.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Real;

// 15-point Kronrod extension of the 7-point Gauss rule, nodes on [0, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self {
            abs: T::lit(1e-12),
            rel: T::lit(1e-12),
            max_intervals: 2000,
        }
    }
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * T::lit(WGK[7]);
    let mut res_g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        res_k += T::lit(WGK[j]) * pair;
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            res_g += T::lit(WG[j / 2]) * pair;
        }
    }
    let value = res_k * half_len;
    let err = ((res_k - res_g) * half_len).abs();
    (value, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest local error estimate until the
/// summed estimate drops below `max(abs, rel·|I|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: Tolerance<T>) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
        });
    }
    let (v0, e0) = kronrod(&f, a, b);
    let mut pieces: Vec<(T, T, T, T)> = vec![(a, b, v0, e0)];
    let floor = T::epsilon() * T::lit(50.0);
    loop {
        let total: T = pieces.iter().map(|p| p.2).sum();
        let err: T = pieces.iter().map(|p| p.3).sum();
        let target = tol.abs.max(tol.rel * total.abs()).max(floor * total.abs());
        if err <= target {
            return Ok(Integral {
                value: total,
                error: err,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                a: a.to_f64(),
                b: b.to_f64(),
                error: err.to_f64(),
                intervals: pieces.len(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval can no longer be split in this precision.
            return Ok(Integral {
                value: total,
                error: err,
                intervals: pieces.len() + 1,
            });
        }
        let (vl, el) = kronrod(&f, lo, mid);
        let (vr, er) = kronrod(&f, mid, hi);
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Newton iteration on P_n, carried out in f64 and rounded at the end.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let r = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn resolves_narrow_peaks() {
        let r = integrate(
            |x: f64| (-(x - 0.3) * (x - 0.3) / 1e-4).exp(),
            0.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = (std::f64::consts::PI * 1e-4).sqrt();
        assert!((r.value - exact).abs() < 1e-12, "{}", r.value - exact);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-14,
            max_intervals: 4,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree() {
        let (x, w) = gauss_legendre::<f64>(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m18: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(18)).sum();
        assert!((m18 - 2.0 / 19.0).abs() < 1e-14);
        let (x3, w3) = gauss_legendre::<f64>(3);
        assert!((x3[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
    }
}
