//! Curve sets for the three theory figures.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bounds::{sweep_bounds, Budget, SweepAxis};
use crate::error::{Error, Result};
use crate::fisher::fisher_d;
use crate::model::{NoiseModel, SceneParams};
use crate::quadrature::QuadratureConfig;
use crate::table::{linspace, CurveTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Rescaled separation Fisher information `F_d w0^2 / (eps eta)` vs `d_a`.
    Fig1,
    /// Rescaled separation errors vs `d_a`, DI against SPADE with crosstalk.
    Fig2,
    /// Rescaled intensity errors vs `epsilon` at fixed separation.
    Fig3,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            _ => Err(Error::UnknownName(s.to_owned())),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureConfig {
    pub figure: Figure,
    /// `d_a` values (fig1, fig2) or `epsilon` values (fig3).
    pub grid: Vec<f64>,
    /// One curve per value (fig1).
    pub epsilons: Vec<f64>,
    /// Fixed relative intensity (fig2).
    pub epsilon: f64,
    /// Fixed separation (fig3).
    pub d_a: f64,
    /// One SPADE curve per value (fig2, fig3).
    pub chis: Vec<f64>,
    /// Misalignment in units of `w0` (fig2, fig3).
    pub sigma_a: f64,
    pub quad: QuadratureConfig,
}

impl FigureConfig {
    pub fn defaults(figure: Figure) -> Self {
        let base = Self {
            figure,
            grid: Vec::new(),
            epsilons: Vec::new(),
            epsilon: 0.01,
            d_a: 0.5,
            chis: Vec::new(),
            sigma_a: 0.0,
            quad: QuadratureConfig::default(),
        };
        match figure {
            Figure::Fig1 => Self {
                grid: linspace(0.0, 8.0, 161),
                epsilons: vec![0.01, 0.1, 0.5],
                ..base
            },
            Figure::Fig2 => Self {
                grid: linspace(0.02, 2.0, 100),
                chis: vec![0.0, 0.001, 0.01],
                ..base
            },
            Figure::Fig3 => Self {
                grid: linspace(0.005, 0.5, 100),
                chis: vec![0.0, 0.001, 0.005],
                ..base
            },
        }
    }
}

pub fn fig1_label(eps: f64) -> String {
    format!("eps={eps}")
}

/// Builds the curves of the configured figure. Rescaled quantities do not
/// depend on `eta`, `n` or `w0`, so the scene is dimensionless with `eta = 1`.
pub fn render(cfg: &FigureConfig) -> Result<CurveTable> {
    match cfg.figure {
        Figure::Fig1 => {
            let mut table = CurveTable::new("d_a", "rescaled_fisher_d");
            for &eps in &cfg.epsilons {
                let ys = cfg
                    .grid
                    .par_iter()
                    .map(|&d_a| {
                        let s = SceneParams::dimensionless(1.0, eps, d_a, 0.0)?;
                        Ok(fisher_d(&s, &cfg.quad)?.value / eps)
                    })
                    .collect::<Result<Vec<_>>>()?;
                table.push_series(&fig1_label(eps), cfg.grid.iter().copied().zip(ys));
            }
            Ok(table)
        }
        Figure::Fig2 | Figure::Fig3 => {
            let noises = cfg
                .chis
                .iter()
                .map(|&chi| NoiseModel::new(cfg.sigma_a, chi))
                .collect::<Result<Vec<_>>>()?;
            let (axis, template) = if cfg.figure == Figure::Fig2 {
                (
                    SweepAxis::Separation(cfg.grid.clone()),
                    SceneParams::dimensionless(1.0, cfg.epsilon, 0.0, 0.0)?,
                )
            } else {
                (
                    SweepAxis::Intensity(cfg.grid.clone()),
                    SceneParams::dimensionless(1.0, 0.0, cfg.d_a, 0.0)?,
                )
            };
            sweep_bounds(&axis, &template, &noises, Budget::new(1e4)?, &cfg.quad)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::DI_SERIES;

    fn nonincreasing(ys: &[(f64, f64)]) -> bool {
        ys.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12))
    }

    #[test]
    fn names_round_trip() {
        for f in [Figure::Fig1, Figure::Fig2, Figure::Fig3] {
            assert_eq!(f.to_string().parse::<Figure>().unwrap(), f);
        }
        assert!("fig4".parse::<Figure>().is_err());
    }

    #[test]
    fn fig1_limits() {
        let t = render(&FigureConfig::defaults(Figure::Fig1)).unwrap();
        assert_eq!(t.labels(), vec!["eps=0.01", "eps=0.1", "eps=0.5"]);
        for eps in [0.01, 0.1, 0.5] {
            let s = t.series(&fig1_label(eps));
            assert_eq!(s.len(), 161);
            // F_d -> eta eps^2 at d = 0 and -> eta eps far apart
            assert!((s[0].1 - eps).abs() < 1e-6 * eps);
            assert!((s.last().unwrap().1 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn fig2_structure() {
        let t = render(&FigureConfig::defaults(Figure::Fig2)).unwrap();
        assert_eq!(
            t.labels(),
            vec![
                DI_SERIES,
                "spade chi=0",
                "spade chi=0.001",
                "spade chi=0.01"
            ]
        );
        for l in t.labels() {
            assert!(nonincreasing(&t.series(l)), "{l}");
        }
        let di = t.series(DI_SERIES);
        let worst = t.series("spade chi=0.01");
        assert!(worst[0].1 > di[0].1);
        assert!(worst.last().unwrap().1 < di.last().unwrap().1);
        // noiseless SPADE sits at eps^-1/2
        assert!(t
            .series("spade chi=0")
            .iter()
            .all(|p| (p.1 - 10.0).abs() < 1e-12));
    }

    #[test]
    fn fig3_structure() {
        let t = render(&FigureConfig::defaults(Figure::Fig3)).unwrap();
        assert_eq!(t.x_label, "epsilon");
        assert_eq!(t.labels().len(), 4);
        let clean = t.series("spade chi=0");
        // sqrt(eta n) Delta eps = (2 / d_a) sqrt(eps) without noise
        for (eps, y) in clean {
            assert!((y - 4.0 * eps.sqrt()).abs() < 1e-12);
        }
    }
}
