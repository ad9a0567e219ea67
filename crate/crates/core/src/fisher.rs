//! Fisher information of ideal (infinite-resolution) direct imaging.
//!
//! The weak source is taken to lie on the x axis at distance `d = scene.d()`;
//! the y marginal integrates out. The density keeps its factor `eta`, so
//! both informations are proportional to `eta` and the Cramér-Rao bounds are
//! expressed through the detected-photon budget `eta * n`.

use std::f64::consts::PI;

use crate::bounds::Budget;
use crate::error::Result;
use crate::model::SceneParams;
use crate::quadrature::{integrate, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    /// `F_d` in units of `w0^-2`, or the dimensionless `F_epsilon`.
    pub value: f64,
    pub error_estimate: f64,
}

fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

fn norm() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

/// Marginal photon density at `u = x / w0`, per unit `u`.
fn density_a(u: f64, eta: f64, eps: f64, d_a: f64) -> f64 {
    eta * norm() * ((1.0 - eps) * gauss(u) + eps * gauss(u - d_a))
}

/// Marginal detection density `p(x)` along the separation axis, per unit
/// length (`x` in the same unit as `w0`).
pub fn di_marginal_intensity(x: f64, scene: &SceneParams) -> f64 {
    density_a(x / scene.w0(), scene.eta(), scene.epsilon(), scene.d_a()) / scene.w0()
}

/// `dp/dd` at `u = x / w0` in units of `w0`.
pub fn density_d_derivative_a(u: f64, scene: &SceneParams) -> f64 {
    let d_a = scene.d_a();
    scene.eta() * scene.epsilon() * norm() * (u - d_a) * gauss(u - d_a)
}

/// `dp/d epsilon` at `u = x / w0`.
pub fn density_eps_derivative_a(u: f64, scene: &SceneParams) -> f64 {
    scene.eta() * norm() * (gauss(u - scene.d_a()) - gauss(u))
}

/// Dimensionless marginal density at `u = x / w0`.
pub fn density_a_of(u: f64, scene: &SceneParams) -> f64 {
    density_a(u, scene.eta(), scene.epsilon(), scene.d_a())
}

fn fisher_integral(
    scene: &SceneParams,
    quad: &QuadratureConfig,
    derivative: impl Fn(f64) -> f64,
) -> Result<FisherResult> {
    quad.validate()?;
    let d_a = scene.d_a();
    let lo = -quad.half_width - d_a;
    let hi = quad.half_width + d_a;
    let r = integrate(
        |u| {
            let dp = derivative(u);
            dp * dp / density_a_of(u, scene)
        },
        lo,
        hi,
        quad,
    )?;
    Ok(FisherResult {
        value: r.value,
        error_estimate: r.abs_error,
    })
}

/// Fisher information for the separation, in units of `w0^-2`.
pub fn fisher_d(scene: &SceneParams, quad: &QuadratureConfig) -> Result<FisherResult> {
    let w2 = scene.w0() * scene.w0();
    let r = fisher_integral(scene, quad, |u| density_d_derivative_a(u, scene))?;
    Ok(FisherResult {
        value: r.value / w2,
        error_estimate: r.error_estimate / w2,
    })
}

/// Fisher information for the relative intensity.
pub fn fisher_eps(scene: &SceneParams, quad: &QuadratureConfig) -> Result<FisherResult> {
    fisher_integral(scene, quad, |u| density_eps_derivative_a(u, scene))
}

/// A Cramér-Rao bound; `unidentifiable` is set when the information vanishes
/// and the bound is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrBound {
    pub value: f64,
    pub unidentifiable: bool,
}

impl CrBound {
    fn from_information(n: f64, info: f64) -> Self {
        if info > 0.0 {
            Self {
                value: 1.0 / (n * info).sqrt(),
                unidentifiable: false,
            }
        } else {
            Self {
                value: f64::INFINITY,
                unidentifiable: true,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiBounds {
    /// Bound on the separation, in the length unit of `w0`.
    pub delta_d: CrBound,
    pub delta_eps: CrBound,
}

/// Cramér-Rao bounds `1/sqrt(n F)` of ideal direct imaging over `n`
/// temporal modes.
pub fn di_bounds(scene: &SceneParams, budget: Budget, quad: &QuadratureConfig) -> Result<DiBounds> {
    let f_d = fisher_d(scene, quad)?;
    let f_e = fisher_eps(scene, quad)?;
    Ok(DiBounds {
        delta_d: CrBound::from_information(budget.n(), f_d.value),
        delta_eps: CrBound::from_information(budget.n(), f_e.value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(eps: f64, d_a: f64) -> SceneParams {
        SceneParams::dimensionless(1.0, eps, d_a, 0.0).unwrap()
    }

    fn fd(eps: f64, d_a: f64) -> f64 {
        fisher_d(&scene(eps, d_a), &QuadratureConfig::default())
            .unwrap()
            .value
    }

    fn fe(eps: f64, d_a: f64) -> f64 {
        fisher_eps(&scene(eps, d_a), &QuadratureConfig::default())
            .unwrap()
            .value
    }

    #[test]
    fn marginal_density_shapes() {
        let s = SceneParams::new(0.4, 0.0, 120.0, 0.0, 300.0).unwrap();
        let x = 75.0;
        let single = 0.4 / (2.0 * PI * 300.0f64.powi(2)).sqrt()
            * (-(x * x) / (2.0 * 300.0f64.powi(2))).exp();
        assert!((di_marginal_intensity(x, &s) - single).abs() < 1e-18);

        let s = SceneParams::dimensionless(0.7, 0.5, 0.0, 0.0).unwrap();
        let single = 0.7 * norm() * gauss(1.3);
        assert!((di_marginal_intensity(1.3, &s) - single).abs() < 1e-16);
    }

    #[test]
    fn marginal_density_normalized() {
        for (eta, eps, d_a) in [(1.0, 0.1, 0.5), (0.02, 0.5, 3.0), (0.3, 0.01, 7.0)] {
            let s = SceneParams::new(eta, eps, d_a * 250.0, 0.0, 250.0).unwrap();
            let r = integrate(
                |x| di_marginal_intensity(x, &s),
                -10.0 * 250.0,
                (10.0 + d_a) * 250.0,
                &QuadratureConfig::default(),
            )
            .unwrap();
            assert!((r.value - eta).abs() < 1e-10 * eta);
        }
    }

    #[test]
    fn well_separated_limit() {
        // Approach to F_d = eps / w0^2 is slow for small eps because the weak
        // Gaussian still sits on the bright tail. Values from an independent
        // adaptive-quadrature evaluation (scipy.integrate.quad, rel 1e-11):
        // d_a = 5 gives 0.8695025 eps at eps = 0.1; d_a = 8 gives 0.9979693 eps.
        assert!((fd(0.1, 5.0) / 0.1 - 0.869_502_526).abs() < 1e-6);
        assert!((fd(0.1, 8.0) / 0.1 - 0.997_969_257).abs() < 1e-6);
        assert!((fd(0.1, 8.0) - 0.1).abs() < 0.02 * 0.1);
    }

    #[test]
    fn small_separation_limit() {
        assert!((fd(0.1, 1e-3) - 0.01).abs() < 0.02 * 0.01);
        // eta factor carried through
        let s = SceneParams::dimensionless(0.25, 0.1, 1e-3, 0.0).unwrap();
        let v = fisher_d(&s, &QuadratureConfig::default()).unwrap().value;
        assert!((v - 0.25 * 0.01).abs() < 0.02 * 0.25 * 0.01);
    }

    #[test]
    fn physical_units_scale_as_inverse_square() {
        let a = fd(0.2, 0.7);
        let s = SceneParams::new(1.0, 0.2, 210.0, 0.0, 300.0).unwrap();
        let b = fisher_d(&s, &QuadratureConfig::default()).unwrap().value;
        assert!((b * 300.0 * 300.0 - a).abs() < 1e-10 * a);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for (eps, d_a) in [(0.1, 0.3), (0.01, 1.5), (0.4, 0.05), (0.25, 4.0)] {
            let s = scene(eps, d_a);
            let sp = scene(eps, d_a + h);
            let sm = scene(eps, d_a - h);
            let ep = scene(eps + h, d_a);
            let em = scene(eps - h, d_a);
            for i in -40..=40 {
                let u = d_a / 2.0 + 0.1 * i as f64;
                let fd_d = (density_a_of(u, &sp) - density_a_of(u, &sm)) / (2.0 * h);
                let fd_e = (density_a_of(u, &ep) - density_a_of(u, &em)) / (2.0 * h);
                let an_d = density_d_derivative_a(u, &s);
                let an_e = density_eps_derivative_a(u, &s);
                // floor: rounding of the central difference, ~ eps_mach * p / h
                assert!(
                    (fd_d - an_d).abs() <= 1e-6 * an_d.abs() + 1e-9,
                    "{u} {fd_d} {an_d}"
                );
                assert!(
                    (fd_e - an_e).abs() <= 1e-6 * an_e.abs() + 1e-9,
                    "{u} {fd_e} {an_e}"
                );
            }
        }
    }

    #[test]
    fn eps_information_examples() {
        assert_eq!(fe(0.2, 0.0), 0.0);
        assert!((fe(0.1, 0.1) - 0.01).abs() < 0.02 * 0.01);
        // spread over eps in [0.01, 0.5] at d_a = 0.5
        let hi = fe(0.01, 0.5);
        let lo = fe(0.5, 0.5);
        let spread = (hi - lo) / hi;
        assert!(hi > lo && spread < 0.2, "spread {spread}");
    }

    #[test]
    fn reflection_invariance() {
        for (eps, d_a) in [(0.1, 0.4), (0.3, 2.0)] {
            let p = fd(eps, d_a);
            let m = fisher_d(
                &SceneParams::dimensionless(1.0, eps, -d_a, 0.0).unwrap(),
                &QuadratureConfig::default(),
            )
            .unwrap()
            .value;
            assert!((p - m).abs() < 1e-12 * p);
        }
    }

    #[test]
    fn bounds_scaling_and_unidentifiable() {
        let q = QuadratureConfig::default();
        let s = scene(0.01, 0.0);
        let b = di_bounds(&s, Budget::new(1000.0).unwrap(), &q).unwrap();
        assert!(b.delta_eps.unidentifiable && b.delta_eps.value.is_infinite());
        assert!(!b.delta_d.unidentifiable);

        let s = SceneParams::dimensionless(0.01, 0.01, 1e-3, 0.0).unwrap();
        let b = di_bounds(&s, Budget::from_photons(0.01, 4e4).unwrap(), &q).unwrap();
        assert!((b.delta_d.value - 0.5).abs() < 0.01 * 0.5);

        let b2 = di_bounds(&s, Budget::from_photons(0.01, 8e4).unwrap(), &q).unwrap();
        assert!((b.delta_d.value / b2.delta_d.value - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.delta_eps.value / b2.delta_eps.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn information_continuous_and_positive() {
        let mut last = fd(0.1, 1e-4);
        for i in 1..=160 {
            let v = fd(0.1, i as f64 * 0.05);
            assert!(v > 0.0);
            assert!((v - last).abs() < 0.01, "jump at {}", i as f64 * 0.05);
            last = v;
        }
    }
}
