//! Volume-preserving perturbations of a ball and energy derivatives along them.
//!
//! Translations are solved spectrally on the fixed disk with a shifted source;
//! star modes `ρ_t = s(t)R(1 + t a cos kθ)` are solved with finite elements on a
//! mesh family of fixed connectivity.

use std::io::Write;

use serde::Serialize;

use crate::ball_analysis::{mode_second_variation, BallProblem, BoundaryCondition, SourceTrace};
use crate::disk_spectral::{solve_disk, SpectralConfig};
use crate::error::{Error, Result};
use crate::fem2d::{assemble_solve, FemBoundary, Mesh, StarDomain};
use crate::scalar::Real;
use crate::sources::{RadialSource, Shifted};

/// `c₀ + Σ_k (a_k cos kθ + b_k sin kθ)`, `k = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigPolynomial<T> {
    pub constant: T,
    pub cos: Vec<T>,
    pub sin: Vec<T>,
}

impl<T: Real> TrigPolynomial<T> {
    pub fn eval(&self, theta: T) -> T {
        let mut v = self.constant;
        for (i, &a) in self.cos.iter().enumerate() {
            v += a * (T::from_usize(i + 1) * theta).cos();
        }
        for (i, &b) in self.sin.iter().enumerate() {
            v += b * (T::from_usize(i + 1) * theta).sin();
        }
        v
    }

    /// `∮ ζ dσ` on the circle of radius `R`, read off the coefficients.
    pub fn circle_mean_integral(&self, radius: T) -> T {
        T::from_int(2) * T::PI() * radius * self.constant
    }

    /// `∮ ζ² dσ` on the circle of radius `R` by Parseval.
    pub fn circle_l2_sq(&self, radius: T) -> T {
        let pi = T::PI();
        let s: T = self.cos.iter().chain(&self.sin).map(|&c| c * c).sum();
        radius * (T::from_int(2) * pi * self.constant * self.constant + pi * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation<T> {
    Translation { direction: [T; 2] },
    StarMode { k: u32, amplitude: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec<T> {
    pub radius: T,
    pub kind: Perturbation<T>,
}

impl<T: Real> PerturbationSpec<T> {
    pub fn translation(radius: T, direction: [T; 2]) -> Result<Self> {
        let norm = direction[0].hypot(direction[1]);
        if !(norm > T::zero()) {
            return Err(Error::Geometry("translation direction must be nonzero".into()));
        }
        Ok(Self {
            radius,
            kind: Perturbation::Translation {
                direction: [direction[0] / norm, direction[1] / norm],
            },
        })
    }

    pub fn star_mode(radius: T, k: u32, amplitude: T) -> Result<Self> {
        if k == 0 {
            return Err(Error::Geometry("mode k = 0 changes the volume".into()));
        }
        Ok(Self {
            radius,
            kind: Perturbation::StarMode { k, amplitude },
        })
    }

    /// Spherical-harmonic degree of the normal velocity.
    pub fn degree(&self) -> u32 {
        match self.kind {
            Perturbation::Translation { .. } => 1,
            Perturbation::StarMode { k, .. } => k,
        }
    }

    /// Normal velocity `ζ = η·ν` on the unperturbed circle.
    pub fn normal_velocity(&self) -> TrigPolynomial<T> {
        match self.kind {
            Perturbation::Translation { direction } => TrigPolynomial {
                constant: T::zero(),
                cos: vec![direction[0]],
                sin: vec![direction[1]],
            },
            Perturbation::StarMode { k, amplitude } => {
                let mut cos = vec![T::zero(); k as usize];
                cos[k as usize - 1] = self.radius * amplitude;
                TrigPolynomial {
                    constant: T::zero(),
                    cos,
                    sin: vec![],
                }
            }
        }
    }

    /// Area scale `s(t)` of a star mode (1 for translations).
    pub fn scale(&self, t: T) -> T {
        match self.kind {
            Perturbation::Translation { .. } => T::one(),
            Perturbation::StarMode { amplitude, .. } => {
                let ta = t * amplitude;
                T::one() / (T::one() + T::lit(0.5) * ta * ta).sqrt()
            }
        }
    }

    /// The domain `F_t(B_R)`.
    pub fn perturbed_domain(&self, t: T) -> Result<StarDomain<T>> {
        match self.kind {
            Perturbation::Translation { direction } => {
                StarDomain::shifted_disk(self.radius, [t * direction[0], t * direction[1]])
            }
            Perturbation::StarMode { k, amplitude } => {
                let mut cos = vec![T::zero(); k as usize];
                cos[k as usize - 1] = t * amplitude;
                let d = StarDomain::fourier(self.radius, cos, vec![])?;
                Ok(d.with_scale(self.scale(t)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSettings<T> {
    /// Stencil half-width `t`; Richardson uses `t` and `t/2`.
    pub step: T,
    pub spectral: SpectralConfig,
    /// Mesh size for star modes.
    pub mesh_h: T,
    /// Also solve on `h/2` and extrapolate in `h`.
    pub refine_mesh: bool,
}

impl<T: Real> FlowSettings<T> {
    pub fn for_radius(radius: T) -> Self {
        Self {
            step: T::lit(0.02) * radius,
            spectral: SpectralConfig::default(),
            mesh_h: T::lit(0.04) * radius,
            refine_mesh: true,
        }
    }
}

/// Energies along a perturbation and their finite-difference derivatives at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSample<T> {
    pub t: Vec<T>,
    pub j: Vec<T>,
    pub stencil: T,
    /// Richardson-extrapolated `J'(0)`.
    pub first: T,
    /// Richardson-extrapolated `J''(0)`.
    pub second: T,
    /// Plain second differences at `t` and `t/2`.
    pub second_coarse: T,
    pub second_fine: T,
    pub extrapolation_order: u32,
    pub error_estimate: T,
    /// Per-mesh extrapolated values when a mesh refinement was used.
    pub mesh_levels: Vec<(T, T)>,
}

impl<T: Real + Serialize> FlowSample<T> {
    /// `t,J` rows followed by a `#`-prefixed JSON footer with the derivatives.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,J")?;
        for (t, j) in self.t.iter().zip(&self.j) {
            writeln!(w, "{t},{j}")?;
        }
        let footer = serde_json::json!({
            "stencil": self.stencil,
            "first": self.first,
            "second": self.second,
            "second_coarse": self.second_coarse,
            "second_fine": self.second_fine,
            "extrapolation_order": self.extrapolation_order,
            "error_estimate": self.error_estimate,
        });
        writeln!(w, "# {footer}")
    }
}

struct Stencil<T> {
    t: Vec<T>,
    j: Vec<T>,
    first: T,
    second: T,
    coarse: T,
    fine: T,
}

fn stencil<T: Real, F: FnMut(T) -> Result<T>>(step: T, mut energy: F) -> Result<Stencil<T>> {
    let half = step / T::from_int(2);
    let ts = [-step, -half, T::zero(), half, step];
    let mut js = Vec::with_capacity(5);
    for &t in &ts {
        js.push(energy(t)?);
    }
    let coarse = (js[4] + js[0] - T::from_int(2) * js[2]) / (step * step);
    let fine = (js[3] + js[1] - T::from_int(2) * js[2]) / (half * half);
    let d1c = (js[4] - js[0]) / (T::from_int(2) * step);
    let d1f = (js[3] - js[1]) / (T::from_int(2) * half);
    let three = T::from_int(3);
    Ok(Stencil {
        t: ts.to_vec(),
        j: js,
        first: (T::from_int(4) * d1f - d1c) / three,
        second: (T::from_int(4) * fine - coarse) / three,
        coarse,
        fine,
    })
}

fn fem_boundary<T: Real>(p: &BallProblem<T>) -> FemBoundary<T> {
    match p.bc {
        BoundaryCondition::Robin(b) => FemBoundary::Robin(b),
        BoundaryCondition::Dirichlet => FemBoundary::Dirichlet,
    }
}

/// `J(F_t(B_R))` for one `t`.
pub fn energy_at<T: Real>(
    p: &BallProblem<T>,
    src: &RadialSource<T>,
    spec: &PerturbationSpec<T>,
    t: T,
    settings: &FlowSettings<T>,
    rings: usize,
) -> Result<T> {
    match spec.kind {
        Perturbation::Translation { direction } => {
            let shifted = Shifted::new(src, [t * direction[0], t * direction[1]]);
            Ok(solve_disk(p.radius, p.bc, &shifted, settings.spectral)?.energy())
        }
        Perturbation::StarMode { .. } => {
            let domain = spec.perturbed_domain(t)?;
            let mesh = Mesh::star_with_rings(&domain, rings, settings.mesh_h)?;
            Ok(assemble_solve(&mesh, fem_boundary(p), src)?.energy())
        }
    }
}

fn check_inputs<T: Real>(p: &BallProblem<T>, src: &RadialSource<T>, spec: &PerturbationSpec<T>) -> Result<()> {
    if p.n != 2 || src.dim() != 2 {
        return Err(Error::InvalidProblem("solver-backed flows are planar (n = 2)".into()));
    }
    if (p.radius - spec.radius).abs() > T::epsilon() * p.radius * T::from_int(4) {
        return Err(Error::InvalidProblem("perturbation and ball radii differ".into()));
    }
    Ok(())
}

fn rings_for<T: Real>(radius: T, h: T) -> usize {
    (radius / h).to_f64().ceil().max(2.0) as usize
}

/// Samples `J` on the symmetric stencil `{0, ±t/2, ±t}` and extrapolates.
pub fn energy_along_flow<T: Real>(
    p: &BallProblem<T>,
    src: &RadialSource<T>,
    spec: &PerturbationSpec<T>,
    settings: &FlowSettings<T>,
) -> Result<FlowSample<T>> {
    check_inputs(p, src, spec)?;
    if !(settings.step > T::zero()) {
        return Err(Error::Config("stencil width must be positive".into()));
    }
    let is_star = matches!(spec.kind, Perturbation::StarMode { .. });
    let three = T::from_int(3);
    let base = {
        let rings = rings_for(p.radius, settings.mesh_h);
        stencil(settings.step, |t| energy_at(p, src, spec, t, settings, rings))?
    };
    let mut first = base.first;
    let mut second = base.second;
    let mut error = (base.fine - base.coarse).abs() / three;
    let mut order = 1;
    let mut levels = Vec::new();
    if is_star && settings.refine_mesh {
        let fine_settings = FlowSettings {
            mesh_h: settings.mesh_h / T::from_int(2),
            ..*settings
        };
        let rings = rings_for(p.radius, fine_settings.mesh_h);
        let refined = stencil(settings.step, |t| energy_at(p, src, spec, t, &fine_settings, rings))?;
        levels.push((settings.mesh_h, base.second));
        levels.push((fine_settings.mesh_h, refined.second));
        let four = T::from_int(4);
        second = (four * refined.second - base.second) / three;
        first = (four * refined.first - base.first) / three;
        error = error.max((refined.second - base.second).abs() / three);
        order = 2;
    }
    Ok(FlowSample {
        t: base.t,
        j: base.j,
        stencil: settings.step,
        first,
        second,
        second_coarse: base.coarse,
        second_fine: base.fine,
        extrapolation_order: order,
        error_estimate: error,
        mesh_levels: levels,
    })
}

/// Central-difference `J'(0)`, which vanishes for a ball and a radial source.
pub fn first_variation_check<T: Real>(
    p: &BallProblem<T>,
    src: &RadialSource<T>,
    spec: &PerturbationSpec<T>,
    settings: &FlowSettings<T>,
) -> Result<T> {
    check_inputs(p, src, spec)?;
    let rings = rings_for(p.radius, settings.mesh_h);
    let t = settings.step;
    let jp = energy_at(p, src, spec, t, settings, rings)?;
    let jm = energy_at(p, src, spec, -t, settings, rings)?;
    Ok((jp - jm) / (T::from_int(2) * t))
}

/// `Q_l ∮ζ²`, the closed-form `J''(0)` along `spec`.
pub fn analytic_second_variation<T: Real>(
    p: &BallProblem<T>,
    src: &RadialSource<T>,
    spec: &PerturbationSpec<T>,
) -> Result<T> {
    let tr = SourceTrace::of(src, p.radius)?;
    let mode = mode_second_variation(p, &tr, spec.degree())?;
    Ok(mode.q_l * spec.normal_velocity().circle_l2_sq(p.radius))
}

/// Side-by-side numeric and analytic second variations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondVariationCheck<T> {
    pub numeric: T,
    pub analytic: T,
    pub relative_error: T,
    pub error_estimate: T,
    pub signs_agree: bool,
    pub sample: FlowSample<T>,
}

pub fn second_variation_check<T: Real>(
    p: &BallProblem<T>,
    src: &RadialSource<T>,
    spec: &PerturbationSpec<T>,
    settings: &FlowSettings<T>,
) -> Result<SecondVariationCheck<T>> {
    let sample = energy_along_flow(p, src, spec, settings)?;
    let analytic = analytic_second_variation(p, src, spec)?;
    let numeric = sample.second;
    let relative_error = if analytic != T::zero() {
        ((numeric - analytic) / analytic).abs()
    } else {
        numeric.abs()
    };
    Ok(SecondVariationCheck {
        numeric,
        analytic,
        relative_error,
        error_estimate: sample.error_estimate,
        signs_agree: (numeric >= T::zero()) == (analytic >= T::zero()),
        sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn velocities_have_zero_mean() {
        let tr = PerturbationSpec::translation(1.0, [3.0, 4.0]).unwrap();
        let z = tr.normal_velocity();
        assert_eq!(z.constant, 0.0);
        assert_eq!(z.circle_mean_integral(1.0), 0.0);
        assert!((z.circle_l2_sq(1.0) - PI).abs() < 1e-15);
        let st = PerturbationSpec::star_mode(2.0, 3, 0.5).unwrap();
        let z = st.normal_velocity();
        assert_eq!(z.constant, 0.0);
        assert!((z.circle_l2_sq(2.0) - PI * 8.0 * 0.25).abs() < 1e-14);
        assert!((z.eval(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn star_mode_scale_and_area() {
        let st = PerturbationSpec::star_mode(1.0, 2, 1.0).unwrap();
        assert!((st.scale(0.1) - 1.005f64.powf(-0.5)).abs() < 1e-15);
        assert!((st.scale(0.1) - 0.997509).abs() < 1e-6);
        for t in [-0.3, -0.1, 0.0, 0.05, 0.2] {
            assert!((st.perturbed_domain(t).unwrap().area() - PI).abs() <= 1e-12);
        }
        let d0 = st.perturbed_domain(0.0).unwrap();
        assert_eq!(d0.rho(1.3), 1.0);
        let tr = PerturbationSpec::translation(1.0, [1.0, 0.0]).unwrap();
        assert!((tr.perturbed_domain(0.1).unwrap().area() - PI).abs() <= 1e-12);
    }

    #[test]
    fn rejects_volume_changing_mode() {
        assert!(PerturbationSpec::star_mode(1.0, 0, 1.0).is_err());
        assert!(PerturbationSpec::translation(1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn translation_of_constant_source_is_flat() {
        let p = BallProblem::<f64>::robin(2, 1.0, 1.0).unwrap();
        let src = RadialSource::constant(1.0, 2).unwrap();
        let spec = PerturbationSpec::translation(1.0, [1.0, 0.0]).unwrap();
        let settings = FlowSettings {
            step: 0.05,
            spectral: SpectralConfig::new(8, 24).unwrap(),
            ..FlowSettings::for_radius(1.0)
        };
        let s = energy_along_flow(&p, &src, &spec, &settings).unwrap();
        assert!(s.second.abs() <= 1e-6);
        assert!(first_variation_check(&p, &src, &spec, &settings).unwrap().abs() <= 1e-8);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,J\n"));
        assert!(text.lines().last().unwrap().starts_with("# {"));
    }

    #[test]
    fn translation_matches_mode_one() {
        let p = BallProblem::robin(2, 1.0, 2.0).unwrap();
        let src = RadialSource::gaussian(0.3, 2).unwrap();
        let spec = PerturbationSpec::translation(1.0, [1.0, 0.0]).unwrap();
        let settings = FlowSettings {
            spectral: SpectralConfig::new(32, 48).unwrap(),
            ..FlowSettings::for_radius(1.0)
        };
        let c = second_variation_check(&p, &src, &spec, &settings).unwrap();
        assert!(c.relative_error < 1e-3, "{c:?}");
        assert!(c.signs_agree);
    }
}
