//! Calibration curves: regression of HG01+HG10 counts against the control
//! parameter, inversion of the fitted curve, and propagation of the count
//! uncertainty to the control.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::montecarlo::CountRecord;

/// Counts recorded at one control setting (`d_a` or `epsilon`), one entry
/// per repeated measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub control: f64,
    pub counts: Vec<u64>,
}

impl SweepPoint {
    pub fn from_record(control: f64, record: &CountRecord) -> Self {
        Self {
            control,
            counts: record.n1_per_measure(),
        }
    }

    /// Total `n1` summed over measures.
    pub fn total(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64
    }

    /// Sample standard deviation of the per-measure counts times
    /// `sqrt(N_m)`; zero with a single measure.
    pub fn delta_n1(&self) -> f64 {
        let m = self.counts.len();
        if m < 2 {
            return 0.0;
        }
        let mean = self.total() / m as f64;
        let ss: f64 = self.counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
        (ss / (m - 1) as f64).sqrt() * (m as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    points: Vec<SweepPoint>,
}

impl SweepData {
    /// Controls must be strictly monotone and every point must hold at
    /// least one measure.
    pub fn new(points: Vec<SweepPoint>) -> Result<Self> {
        if points
            .iter()
            .any(|p| p.counts.is_empty() || !p.control.is_finite())
        {
            return Err(Error::FitImpossible(
                "sweep point without measures or with non-finite control",
            ));
        }
        let inc = points.windows(2).all(|w| w[0].control < w[1].control);
        let dec = points.windows(2).all(|w| w[0].control > w[1].control);
        if !(inc || dec) {
            return Err(Error::FitImpossible(
                "sweep controls must be strictly ordered",
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[SweepPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// `n1 = a1 + b1 d_a^2`
    QuadraticInDa,
    /// `n1 = a1 + b1 epsilon`
    LinearInEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// `1 / delta_n1^2` when every point has `delta_n1 > 0`, else unweighted.
    #[default]
    Auto,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub kind: CurveKind,
    /// `a1`
    pub intercept: f64,
    /// `b1`
    pub slope: f64,
    /// Covariance of `(intercept, slope)`.
    pub covariance: [[f64; 2]; 2],
    /// `n1 - n1_fit` per sweep point, in sweep order.
    pub residuals: Vec<f64>,
    pub reduced_chi_square: f64,
    pub weighted: bool,
}

impl CalibrationCurve {
    fn regressor(&self, control: f64) -> f64 {
        match self.kind {
            CurveKind::QuadraticInDa => control * control,
            CurveKind::LinearInEps => control,
        }
    }

    /// Fitted counts `n1^F(control)`.
    pub fn evaluate(&self, control: f64) -> f64 {
        self.intercept + self.slope * self.regressor(control)
    }

    pub fn intercept_std(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn slope_std(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

fn fit(
    sweep: &SweepData,
    kind: CurveKind,
    weighting: Weighting,
    min_distinct: usize,
) -> Result<CalibrationCurve> {
    let pts = sweep.points();
    let xs: Vec<f64> = pts
        .iter()
        .map(|p| match kind {
            CurveKind::QuadraticInDa => p.control * p.control,
            CurveKind::LinearInEps => p.control,
        })
        .collect();
    let ys: Vec<f64> = pts.iter().map(SweepPoint::total).collect();

    let mut distinct: Vec<f64> = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < min_distinct {
        return Err(Error::FitImpossible("too few distinct control values"));
    }

    let deltas: Vec<f64> = pts.iter().map(SweepPoint::delta_n1).collect();
    let weighted = weighting == Weighting::Auto && deltas.iter().all(|&d| d > 0.0);
    let ws: Vec<f64> = if weighted {
        deltas.iter().map(|d| 1.0 / (d * d)).collect()
    } else {
        vec![1.0; pts.len()]
    };

    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((w, x), y) in ws.iter().zip(&xs).zip(&ys) {
        sxx += w * (x - xm) * (x - xm);
        sxy += w * (x - xm) * (y - ym);
    }
    if !(sxx > 0.0) {
        return Err(Error::FitImpossible("design matrix is rank deficient"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;

    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let dof = pts.len() as f64 - 2.0;
    let chi2: f64 = ws.iter().zip(&residuals).map(|(w, r)| w * r * r).sum();
    let reduced = if dof > 0.0 { chi2 / dof } else { f64::NAN };

    // Known weights give absolute covariances; unit weights are scaled by
    // the residual variance.
    let scale = if weighted { 1.0 } else { reduced };
    let covariance = [
        [scale * (1.0 / sw + xm * xm / sxx), -scale * xm / sxx],
        [-scale * xm / sxx, scale / sxx],
    ];

    Ok(CalibrationCurve {
        kind,
        intercept,
        slope,
        covariance,
        residuals,
        reduced_chi_square: reduced,
        weighted,
    })
}

/// Least-squares fit of `n1 = a1 + b1 d_a^2`.
pub fn fit_quadratic(sweep: &SweepData, weighting: Weighting) -> Result<CalibrationCurve> {
    fit(sweep, CurveKind::QuadraticInDa, weighting, 3)
}

/// Least-squares fit of `n1 = a1 + b1 epsilon`.
pub fn fit_linear(sweep: &SweepData, weighting: Weighting) -> Result<CalibrationCurve> {
    fit(sweep, CurveKind::LinearInEps, weighting, 2)
}

/// Which root of the even quadratic curve to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    #[default]
    Positive,
    Negative,
}

/// Control value whose fitted counts equal `n1`.
pub fn invert_curve(curve: &CalibrationCurve, n1: f64, branch: Branch) -> Result<f64> {
    if !(curve.slope > 0.0) {
        return Err(Error::InvalidCurve("slope must be positive"));
    }
    match curve.kind {
        CurveKind::QuadraticInDa => {
            if n1 < curve.intercept {
                return Err(Error::BelowCalibrationFloor {
                    observed: n1,
                    floor: curve.intercept,
                });
            }
            let d = ((n1 - curve.intercept) / curve.slope).sqrt();
            Ok(match branch {
                Branch::Positive => d,
                Branch::Negative => -d,
            })
        }
        CurveKind::LinearInEps => Ok((n1 - curve.intercept) / curve.slope),
    }
}

/// `|d n1^F / d control|^-1 * delta_n1`.
pub fn propagate_uncertainty(curve: &CalibrationCurve, control: f64, delta_n1: f64) -> Result<f64> {
    if !(curve.slope > 0.0) {
        return Err(Error::InvalidCurve("slope must be positive"));
    }
    match curve.kind {
        CurveKind::QuadraticInDa => {
            if control == 0.0 {
                return Err(Error::DivergentSensitivity { control });
            }
            Ok(delta_n1 / (2.0 * curve.slope * control.abs()))
        }
        CurveKind::LinearInEps => Ok(delta_n1 / curve.slope),
    }
}

/// Wald-Wolfowitz runs test on residual signs (zeros dropped), normal
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunsTest {
    pub runs: usize,
    pub positive: usize,
    pub negative: usize,
    pub expected_runs: f64,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

pub fn runs_test(residuals: &[f64]) -> RunsTest {
    let signs: Vec<bool> = residuals
        .iter()
        .filter(|r| **r != 0.0)
        .map(|r| *r > 0.0)
        .collect();
    let positive = signs.iter().filter(|s| **s).count();
    let negative = signs.len() - positive;
    let runs = if signs.is_empty() {
        0
    } else {
        1 + signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    let (n1, n2) = (positive as f64, negative as f64);
    let n = n1 + n2;
    let expected_runs = if n > 0.0 {
        2.0 * n1 * n2 / n + 1.0
    } else {
        0.0
    };
    let var = if n > 1.0 {
        2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    } else {
        0.0
    };
    let (z, p_value) = if var > 0.0 {
        let z = (runs as f64 - expected_runs) / var.sqrt();
        let std = Normal::standard();
        (z, 2.0 * std.cdf(-z.abs()))
    } else {
        (0.0, 1.0)
    };
    RunsTest {
        runs,
        positive,
        negative,
        expected_runs,
        z,
        p_value,
    }
}
