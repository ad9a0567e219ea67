//! Closed-form statistical errors of SPADE estimation and their comparison
//! with the direct-imaging Cramér-Rao bounds.
//!
//! Errors are one-standard-deviation values obtained by propagating the
//! binomial error of `f1 = n1 / (n0 + n1)` through the sub-Rayleigh
//! relation `p1 / eta = (sigma^2 + 4 w0^2 chi + epsilon d^2) / (4 w0^2)`.

use rayon::prelude::*;

use crate::error::{check, Error, Result};
use crate::fisher::di_bounds;
use crate::model::{effective_noise, NoiseModel, SceneParams};
use crate::quadrature::QuadratureConfig;
use crate::table::CurveTable;

/// Number of temporal modes `n`; the detected-photon budget is `eta * n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    n: f64,
}

impl Budget {
    pub fn new(n: f64) -> Result<Self> {
        check(n.is_finite() && n >= 1.0, "n", n, "must be >= 1")?;
        Ok(Self { n })
    }

    /// Budget holding `photons` detections on average at efficiency `eta`.
    pub fn from_photons(eta: f64, photons: f64) -> Result<Self> {
        check(eta > 0.0 && eta <= 1.0, "eta", eta, "must lie in (0, 1]")?;
        Self::new(photons / eta)
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn photons(&self, eta: f64) -> f64 {
        eta * self.n
    }
}

/// Refuses to compare errors computed for different detected-photon budgets.
pub fn ensure_same_budget(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::MixedBudgets(a, b))
    }
}

/// `(sigma^2 + 4 w0^2 chi) / w0^2`
fn noise_a(scene: &SceneParams, noise: &NoiseModel) -> f64 {
    effective_noise(noise, scene.w0()) / (scene.w0() * scene.w0())
}

/// Statistical error on the separation, in the length unit of `w0`.
pub fn spade_error_d(scene: &SceneParams, noise: &NoiseModel, budget: Budget) -> Result<f64> {
    let (eps, d_a) = (scene.epsilon(), scene.d_a());
    if d_a == 0.0 {
        return Err(Error::Unidentifiable("separation error undefined at d = 0"));
    }
    if eps == 0.0 {
        return Err(Error::Unidentifiable(
            "separation error undefined at epsilon = 0",
        ));
    }
    let photons = budget.photons(scene.eta());
    let ratio = noise_a(scene, noise) / (eps * d_a * d_a);
    Ok(scene.w0() * ((ratio + 1.0) / (photons * eps)).sqrt())
}

/// Statistical error on the relative intensity.
pub fn spade_error_eps(scene: &SceneParams, noise: &NoiseModel, budget: Budget) -> Result<f64> {
    let (eps, d_a) = (scene.epsilon(), scene.d_a());
    if d_a == 0.0 {
        return Err(Error::Unidentifiable("intensity error undefined at d = 0"));
    }
    let photons = budget.photons(scene.eta());
    // ((s / (eps d^2) + 1) * eps) written without the 1/eps so eps = 0 is finite.
    let inner = noise_a(scene, noise) / (d_a * d_a) + eps;
    Ok(2.0 / d_a * (inner / photons).sqrt())
}

/// Ratio of the direct-imaging bound to the SPADE error on the separation.
pub fn snr_gain(
    scene: &SceneParams,
    noise: &NoiseModel,
    budget: Budget,
    quad: &QuadratureConfig,
) -> Result<f64> {
    compare_d(scene, noise, budget, budget, quad).map(|(spade, di)| di / spade)
}

/// `(SPADE error, DI bound)` on the separation. Both budgets must hold the
/// same number of detected photons.
pub fn compare_d(
    scene: &SceneParams,
    noise: &NoiseModel,
    spade_budget: Budget,
    di_budget: Budget,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    ensure_same_budget(
        spade_budget.photons(scene.eta()),
        di_budget.photons(scene.eta()),
    )?;
    let spade = spade_error_d(scene, noise, spade_budget)?;
    let di = di_bounds(scene, di_budget, quad)?;
    Ok((spade, di.delta_d.value))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Separation grid in units of `w0`; errors on `d` are reported.
    Separation(Vec<f64>),
    /// Relative-intensity grid; errors on `epsilon` are reported.
    Intensity(Vec<f64>),
}

pub fn series_label(noise: &NoiseModel, w0: f64) -> String {
    if noise.sigma() > 0.0 {
        format!("spade chi={} sigma_a={}", noise.chi(), noise.sigma() / w0)
    } else {
        format!("spade chi={}", noise.chi())
    }
}

pub const DI_SERIES: &str = "di";

/// Rescaled errors `sqrt(eta n) / w0 * Delta d` (separation axis) or
/// `sqrt(eta n) * Delta epsilon` (intensity axis) for direct imaging and for
/// SPADE under each noise model. Unidentifiable points are reported as `inf`.
pub fn sweep_bounds(
    axis: &SweepAxis,
    template: &SceneParams,
    noises: &[NoiseModel],
    budget: Budget,
    quad: &QuadratureConfig,
) -> Result<CurveTable> {
    let photons = budget.photons(template.eta());
    let rescale = photons.sqrt();
    let w0 = template.w0();
    let (xs, x_label, y_label) = match axis {
        SweepAxis::Separation(v) => (v, "d_a", "rescaled_delta_d"),
        SweepAxis::Intensity(v) => (v, "epsilon", "rescaled_delta_eps"),
    };
    let scene_at = |x: f64| match axis {
        SweepAxis::Separation(_) => template.with_separation_a(x),
        SweepAxis::Intensity(_) => template.with_epsilon(x),
    };

    let di: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let s = scene_at(x)?;
            let b = di_bounds(&s, budget, quad)?;
            Ok(match axis {
                SweepAxis::Separation(_) => rescale * b.delta_d.value / w0,
                SweepAxis::Intensity(_) => rescale * b.delta_eps.value,
            })
        })
        .collect::<Result<_>>()?;

    let mut table = CurveTable::new(x_label, y_label);
    table.push_series(DI_SERIES, xs.iter().copied().zip(di));
    for noise in noises {
        let ys = xs
            .iter()
            .map(|&x| {
                let s = scene_at(x)?;
                let v = match axis {
                    SweepAxis::Separation(_) => spade_error_d(&s, noise, budget).map(|e| e / w0),
                    SweepAxis::Intensity(_) => spade_error_eps(&s, noise, budget),
                };
                match v {
                    Ok(e) => Ok(rescale * e),
                    Err(Error::Unidentifiable(_)) => Ok(f64::INFINITY),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        table.push_series(&series_label(noise, w0), xs.iter().copied().zip(ys));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::subrayleigh_probs;
    use proptest::prelude::*;

    fn scene(eta: f64, eps: f64, d_a: f64) -> SceneParams {
        SceneParams::dimensionless(eta, eps, d_a, 0.0).unwrap()
    }

    #[test]
    fn noiseless_separation_error_is_flat() {
        let b = Budget::from_photons(0.01, 4e4).unwrap();
        for d_a in [0.05, 0.3, 1.0] {
            let e = spade_error_d(&scene(0.01, 0.01, d_a), &NoiseModel::NOISELESS, b).unwrap();
            assert!((e - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn crosstalk_separation_example() {
        let b = Budget::from_photons(1.0, 4e4).unwrap();
        let n = NoiseModel::new(0.0, 0.01).unwrap();
        let e = spade_error_d(&scene(1.0, 0.01, 1.0), &n, b).unwrap();
        assert!((e - (5.0f64 / 400.0).sqrt()).abs() < 1e-15);
        assert!((e - 0.1118).abs() < 1e-4);
    }

    #[test]
    fn separation_error_monotone() {
        let n = NoiseModel::new(0.05, 0.002).unwrap();
        let b = Budget::new(1e5).unwrap();
        let mut last = f64::INFINITY;
        for i in 1..100 {
            let e = spade_error_d(&scene(0.5, 0.1, i as f64 * 0.02), &n, b).unwrap();
            assert!(e <= last);
            last = e;
        }
        let s = scene(0.5, 0.1, 0.4);
        assert!(
            spade_error_d(&s, &n, Budget::new(2e5).unwrap()).unwrap()
                < spade_error_d(&s, &n, b).unwrap()
        );
    }

    #[test]
    fn unidentifiable_cases() {
        let b = Budget::new(100.0).unwrap();
        let n = NoiseModel::NOISELESS;
        assert!(matches!(
            spade_error_d(&scene(1.0, 0.1, 0.0), &n, b),
            Err(Error::Unidentifiable(_))
        ));
        assert!(matches!(
            spade_error_d(&scene(1.0, 0.0, 0.3), &n, b),
            Err(Error::Unidentifiable(_))
        ));
        assert!(matches!(
            spade_error_eps(&scene(1.0, 0.1, 0.0), &n, b),
            Err(Error::Unidentifiable(_))
        ));
    }

    #[test]
    fn intensity_error_examples() {
        let b = Budget::from_photons(1.0, 4e4).unwrap();
        let e = spade_error_eps(&scene(1.0, 0.01, 0.5), &NoiseModel::NOISELESS, b).unwrap();
        assert!((e - 2e-3).abs() < 1e-15);

        // noiseless: Delta eps ~ sqrt(eps)
        let a = spade_error_eps(&scene(1.0, 1e-4, 0.5), &NoiseModel::NOISELESS, b).unwrap();
        let c = spade_error_eps(&scene(1.0, 1e-6, 0.5), &NoiseModel::NOISELESS, b).unwrap();
        assert!((a / c - 10.0).abs() < 1e-9);
        assert_eq!(
            spade_error_eps(&scene(1.0, 0.0, 0.5), &NoiseModel::NOISELESS, b).unwrap(),
            0.0
        );

        // with crosstalk the error levels off at (2 / d_a) sqrt(4 chi / d_a^2 / (eta n))
        let n = NoiseModel::new(0.0, 0.005).unwrap();
        let floor = 2.0 / 0.5 * (4.0 * 0.005 / 0.25 / 4e4f64).sqrt();
        let z = spade_error_eps(&scene(1.0, 0.0, 0.5), &n, b).unwrap();
        assert!((z - floor).abs() < 1e-15);
        let mut last = z;
        for eps in [1e-4, 1e-3, 1e-2, 0.1] {
            let e = spade_error_eps(&scene(1.0, eps, 0.5), &n, b).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn gain_tends_to_inverse_sqrt_eps() {
        let q = QuadratureConfig::default();
        for (eps, expect) in [(0.01, 10.0), (0.25, 2.0)] {
            let s = scene(0.01, eps, 0.05);
            let g = snr_gain(
                &s,
                &NoiseModel::NOISELESS,
                Budget::from_photons(0.01, 4e4).unwrap(),
                &q,
            )
            .unwrap();
            assert!((g - expect).abs() < 0.05 * expect, "{eps}: {g}");
        }
        let n = NoiseModel::new(0.0, 0.01).unwrap();
        let s = scene(0.01, 0.01, 0.1);
        let g = snr_gain(&s, &n, Budget::from_photons(0.01, 4e4).unwrap(), &q).unwrap();
        assert!(g < 1.0, "{g}");
    }

    #[test]
    fn mixed_budgets_refused() {
        let q = QuadratureConfig::default();
        let s = scene(0.01, 0.1, 0.5);
        let r = compare_d(
            &s,
            &NoiseModel::NOISELESS,
            Budget::from_photons(0.01, 4e4).unwrap(),
            Budget::from_photons(0.01, 8e4).unwrap(),
            &q,
        );
        assert!(matches!(r, Err(Error::MixedBudgets(..))));
    }

    #[test]
    fn figure_layouts_order_series() {
        let q = QuadratureConfig::default();
        let b = Budget::from_photons(1.0, 1e4).unwrap();
        let noises: Vec<_> = [0.0, 0.001, 0.01]
            .iter()
            .map(|&c| NoiseModel::new(0.0, c).unwrap())
            .collect();
        let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.05).collect();
        let t = sweep_bounds(
            &SweepAxis::Separation(grid.clone()),
            &scene(1.0, 0.01, 0.0),
            &noises,
            b,
            &q,
        )
        .unwrap();
        let labels = t.labels();
        assert_eq!(
            labels,
            vec!["di", "spade chi=0", "spade chi=0.001", "spade chi=0.01"]
        );
        for (_, y) in t.series("spade chi=0") {
            assert!((y - 10.0).abs() < 1e-12);
        }
        for i in 0..grid.len() {
            let ys: Vec<f64> = labels[1..].iter().map(|l| t.series(l)[i].1).collect();
            assert!(ys[0] < ys[1] && ys[1] < ys[2]);
        }

        let noises: Vec<_> = [0.0, 0.001, 0.005]
            .iter()
            .map(|&c| NoiseModel::new(0.0, c).unwrap())
            .collect();
        let eps: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
        let t = sweep_bounds(
            &SweepAxis::Intensity(eps.clone()),
            &scene(1.0, 0.1, 0.5),
            &noises,
            b,
            &q,
        )
        .unwrap();
        let labels = t.labels();
        for i in 0..eps.len() {
            let ys: Vec<f64> = labels[1..].iter().map(|l| t.series(l)[i].1).collect();
            assert!(ys[0] < ys[1] && ys[1] < ys[2]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn noiseless_limits_are_exact(eta in 0.001f64..=1.0, eps in 0.001f64..=0.5,
                                      d_a in 0.01f64..3.0, photons in 10.0f64..1e6) {
            let s = scene(eta, eps, d_a);
            let b = Budget::from_photons(eta, photons).unwrap();
            let d = spade_error_d(&s, &NoiseModel::NOISELESS, b).unwrap();
            let e = spade_error_eps(&s, &NoiseModel::NOISELESS, b).unwrap();
            prop_assert!((d - (1.0 / (photons * eps)).sqrt()).abs() <= 1e-12 * d);
            prop_assert!((e - 2.0 / d_a * (eps / photons).sqrt()).abs() <= 1e-12 * e);
        }

        #[test]
        fn crosstalk_is_a_noise_substitution(eps in 0.001f64..=0.5, d_a in 0.01f64..3.0,
                                             sigma in 0.0f64..0.5, chi in 0.0f64..0.05,
                                             w0 in 1.0f64..500.0) {
            let s = SceneParams::new(0.3, eps, d_a * w0, 0.0, w0).unwrap();
            let b = Budget::new(1e6).unwrap();
            let with_chi = NoiseModel::new(sigma * w0, chi).unwrap();
            let folded = NoiseModel::new(effective_noise(&with_chi, w0).sqrt(), 0.0).unwrap();
            let a = spade_error_d(&s, &with_chi, b).unwrap();
            let c = spade_error_d(&s, &folded, b).unwrap();
            prop_assert!((a - c).abs() <= 1e-10 * a);
            let a = spade_error_eps(&s, &with_chi, b).unwrap();
            let c = spade_error_eps(&s, &folded, b).unwrap();
            prop_assert!((a - c).abs() <= 1e-10 * a);
        }

        #[test]
        fn closed_forms_follow_error_propagation(eta in 0.001f64..=1.0, eps in 0.001f64..=0.5,
                                                 d_a in 0.02f64..1.0, sigma in 0.0f64..0.3,
                                                 chi in 0.0f64..0.02, photons in 100.0f64..1e6) {
            // (d(p1/eta)/dx)^-1 * Delta f1 with Delta f1 = sqrt((p1/eta) / (eta n)),
            // p1 taken from the sub-Rayleigh model with sigma^2 -> sigma^2 + 4 w0^2 chi;
            // d(p1/eta)/d d_a = eps d_a / 2 and d(p1/eta)/d eps = d_a^2 / 4.
            let noise = NoiseModel::new(sigma, chi).unwrap();
            let folded = NoiseModel::new(effective_noise(&noise, 1.0).sqrt(), 0.0).unwrap();
            let b = Budget::from_photons(eta, photons).unwrap();
            let s = scene(eta, eps, d_a);
            let df1 = (subrayleigh_probs(&s, &folded).p1 / eta / photons).sqrt();

            let expect = df1 / (eps * d_a / 2.0);
            let got = spade_error_d(&s, &noise, b).unwrap();
            prop_assert!((got - expect).abs() <= 1e-10 * got, "{} vs {}", got, expect);

            let expect = df1 / (d_a * d_a / 4.0);
            let got = spade_error_eps(&s, &noise, b).unwrap();
            prop_assert!((got - expect).abs() <= 1e-10 * got, "{} vs {}", got, expect);
        }
    }
}
