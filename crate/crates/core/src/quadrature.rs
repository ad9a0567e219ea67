//! Globally adaptive 7/15-point Gauss-Kronrod integration.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    GaussKronrod15,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Integration window half-width beyond the sources, in units of `w0`.
    pub half_width: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    pub scheme: Scheme,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_intervals: 2000,
            scheme: Scheme::GaussKronrod15,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        check(
            self.half_width >= 8.0,
            "half_width",
            self.half_width,
            "must be >= 8",
        )?;
        check(
            self.rel_tol > 0.0,
            "rel_tol",
            self.rel_tol,
            "must be positive",
        )?;
        check(self.abs_tol >= 0.0, "abs_tol", self.abs_tol, "must be >= 0")?;
        check(
            self.max_intervals >= 1,
            "max_intervals",
            self.max_intervals as f64,
            "must be >= 1",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, bisecting the interval with the largest
/// error estimate until the total error meets `max(abs_tol, rel_tol * |I|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    check(
        a.is_finite() && b.is_finite() && a < b,
        "bounds",
        b - a,
        "need finite a < b",
    )?;
    let mut heap = BinaryHeap::new();
    let (value, error) = gk15(&f, a, b);
    heap.push(Interval { a, b, value, error });
    let mut evaluations = 15;

    loop {
        let total: f64 = heap.iter().map(|i| i.value).sum();
        let err: f64 = heap.iter().map(|i| i.error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations,
            });
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::NumericalFailure {
                achieved: err,
                requested: target,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_are_normalized() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_panel_is_exact_for_polynomials() {
        // Kronrod part exact up to degree 22, embedded Gauss part up to 13.
        for deg in 0..=22 {
            let (k, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!((k - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
        let (_, e) = gk15(&|x: f64| x.powi(13), -1.0, 1.0);
        assert!(e < 1e-15);
    }

    #[test]
    fn gaussian_integral() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| (-x * x / 2.0).exp(), -10.0, 10.0, &cfg).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value - exact).abs() < 1e-12 * exact);
        assert!(r.abs_error <= 1e-8 * exact);
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadratureConfig {
            max_intervals: 3,
            rel_tol: 1e-14,
            ..Default::default()
        };
        let err = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &cfg).unwrap_err();
        match err {
            Error::NumericalFailure {
                achieved,
                requested,
            } => {
                assert!(achieved > requested);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = QuadratureConfig::default();
        assert!(c.validate().is_ok());
        c.half_width = 6.0;
        assert!(c.validate().is_err());
        c.half_width = 8.0;
        c.rel_tol = 0.0;
        assert!(c.validate().is_err());
    }
}
