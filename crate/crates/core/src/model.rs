//! Closed-form forward model for two incoherent Gaussian point sources
//! measured in the three lowest Hermite-Gaussian modes.
//!
//! The brighter source sits at the origin with weight `1 - epsilon`, the
//! weaker one at `(d_x, d_y)` with weight `epsilon`. The demultiplexer axis
//! is offset from the origin by a [`Misalignment`]. Lengths are accepted in
//! any unit consistent with `w0` and stored internally in units of `w0`.

use serde::{Deserialize, Serialize};

use crate::error::{check, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    eta: f64,
    epsilon: f64,
    dx_a: f64,
    dy_a: f64,
    w0: f64,
}

impl SceneParams {
    /// Builds a scene from physical lengths (`d_x`, `d_y` in the same unit as `w0`).
    pub fn new(eta: f64, epsilon: f64, d_x: f64, d_y: f64, w0: f64) -> Result<Self> {
        check(w0.is_finite() && w0 > 0.0, "w0", w0, "must be positive")?;
        Self::dimensionless(eta, epsilon, d_x / w0, d_y / w0).map(|s| s.with_w0(w0))
    }

    /// Builds a scene with displacement given in units of `w0` (and `w0 = 1`).
    pub fn dimensionless(eta: f64, epsilon: f64, dx_a: f64, dy_a: f64) -> Result<Self> {
        check(eta > 0.0 && eta <= 1.0, "eta", eta, "must lie in (0, 1]")?;
        check(
            (0.0..=0.5).contains(&epsilon),
            "epsilon",
            epsilon,
            "must lie in [0, 1/2]; use SceneParams::relabeled for brighter secondaries",
        )?;
        check(dx_a.is_finite(), "d_x", dx_a, "must be finite")?;
        check(dy_a.is_finite(), "d_y", dy_a, "must be finite")?;
        Ok(Self {
            eta,
            epsilon,
            dx_a,
            dy_a,
            w0: 1.0,
        })
    }

    /// Accepts a relative intensity anywhere in `[0, 1]`. When the source at
    /// `(d_x, d_y)` is the brighter one, the two sources are swapped so the
    /// origin again holds the brighter source; the returned flag reports the swap.
    pub fn relabeled(
        eta: f64,
        intensity_ratio: f64,
        d_x: f64,
        d_y: f64,
        w0: f64,
    ) -> Result<(Self, bool)> {
        check(
            (0.0..=1.0).contains(&intensity_ratio),
            "epsilon",
            intensity_ratio,
            "must lie in [0, 1]",
        )?;
        if intensity_ratio > 0.5 {
            Ok((Self::new(eta, 1.0 - intensity_ratio, -d_x, -d_y, w0)?, true))
        } else {
            Ok((Self::new(eta, intensity_ratio, d_x, d_y, w0)?, false))
        }
    }

    fn with_w0(mut self, w0: f64) -> Self {
        self.w0 = w0;
        self
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::dimensionless(self.eta, epsilon, self.dx_a, self.dy_a).map(|s| s.with_w0(self.w0))
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::dimensionless(eta, self.epsilon, self.dx_a, self.dy_a).map(|s| s.with_w0(self.w0))
    }

    /// Same scene with the weak source moved to `(d_a, 0)` in units of `w0`.
    pub fn with_separation_a(self, d_a: f64) -> Result<Self> {
        Self::dimensionless(self.eta, self.epsilon, d_a, 0.0).map(|s| s.with_w0(self.w0))
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn w0(&self) -> f64 {
        self.w0
    }
    pub fn d_x(&self) -> f64 {
        self.dx_a * self.w0
    }
    pub fn d_y(&self) -> f64 {
        self.dy_a * self.w0
    }
    pub fn dx_a(&self) -> f64 {
        self.dx_a
    }
    pub fn dy_a(&self) -> f64 {
        self.dy_a
    }
    /// Separation `sqrt(d_x^2 + d_y^2)` in physical units.
    pub fn d(&self) -> f64 {
        self.d_a() * self.w0
    }
    /// Dimensionless separation `d / w0`.
    pub fn d_a(&self) -> f64 {
        self.dx_a.hypot(self.dy_a)
    }
}

/// Residual offset of the demultiplexer axis from the brighter source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Misalignment {
    pub delta_x: f64,
    pub delta_y: f64,
}

impl Misalignment {
    pub const ALIGNED: Self = Self {
        delta_x: 0.0,
        delta_y: 0.0,
    };

    pub fn new(delta_x: f64, delta_y: f64) -> Result<Self> {
        check(delta_x.is_finite(), "delta_x", delta_x, "must be finite")?;
        check(delta_y.is_finite(), "delta_y", delta_y, "must be finite")?;
        Ok(Self { delta_x, delta_y })
    }
}

/// Demultiplexer imperfections: RMS misalignment `sigma` (with
/// `<delta_x^2> = <delta_y^2> = sigma^2 / 2`) and crosstalk fraction `chi`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
    chi: f64,
}

impl NoiseModel {
    pub const NOISELESS: Self = Self {
        sigma: 0.0,
        chi: 0.0,
    };

    pub fn new(sigma: f64, chi: f64) -> Result<Self> {
        check(
            sigma.is_finite() && sigma >= 0.0,
            "sigma",
            sigma,
            "must be >= 0",
        )?;
        check((0.0..1.0).contains(&chi), "chi", chi, "must lie in [0, 1)")?;
        Ok(Self { sigma, chi })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn chi(&self) -> f64 {
        self.chi
    }
}

/// Per-slot detection probabilities in HG00, HG01, HG10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProbabilities {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    /// `p01 + p10`
    pub p1: f64,
    /// Everything else: vacuum and higher-order modes.
    pub p_none: f64,
}

impl ModeProbabilities {
    pub fn from_modes(p00: f64, p01: f64, p10: f64) -> Self {
        let p1 = p01 + p10;
        Self {
            p00,
            p01,
            p10,
            p1,
            p_none: 1.0 - p00 - p1,
        }
    }

    pub fn channels(&self) -> ChannelProbs {
        ChannelProbs {
            p0: self.p00,
            p1: self.p1,
        }
    }

    /// Crosstalk mixing applied mode by mode. Light leaking out of HG00 is
    /// split evenly between HG01 and HG10.
    pub fn with_crosstalk(&self, chi: f64) -> Self {
        let mixed = apply_crosstalk(self.channels(), chi);
        Self::from_modes(
            mixed.p0,
            (1.0 - chi) * self.p01 + 0.5 * chi * self.p00,
            (1.0 - chi) * self.p10 + 0.5 * chi * self.p00,
        )
    }
}

/// Probabilities of a detection in HG00 (`p0`) and in HG01 or HG10 (`p1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProbs {
    pub p0: f64,
    pub p1: f64,
}

/// Exact Gaussian overlaps of the two-source state with HG00, HG01, HG10.
pub fn exact_mode_probs(scene: &SceneParams, mis: &Misalignment) -> Result<ModeProbabilities> {
    let mis = Misalignment::new(mis.delta_x, mis.delta_y)?;
    let (eta, eps) = (scene.eta, scene.epsilon);
    let bx = mis.delta_x / scene.w0;
    let by = mis.delta_y / scene.w0;
    let ux = scene.dx_a - bx;
    let uy = scene.dy_a - by;

    let bright = eta * (1.0 - eps) * (-(bx * bx + by * by) / 4.0).exp();
    let weak = eta * eps * (-(ux * ux + uy * uy) / 4.0).exp();

    Ok(ModeProbabilities::from_modes(
        bright + weak,
        bright * bx * bx / 4.0 + weak * ux * ux / 4.0,
        bright * by * by / 4.0 + weak * uy * uy / 4.0,
    ))
}

/// Leading-order probabilities averaged over a zero-mean misalignment of
/// variance `sigma^2 / 2` per axis. Crosstalk is not included here.
pub fn subrayleigh_probs(scene: &SceneParams, noise: &NoiseModel) -> ChannelProbs {
    let eta = scene.eta;
    let s2 = (noise.sigma / scene.w0).powi(2);
    let d2 = scene.d_a().powi(2);
    let p1 = eta * s2 / 4.0 + eta * scene.epsilon * d2 / 4.0;
    ChannelProbs { p0: eta - p1, p1 }
}

/// Mixes a fraction `chi` of each channel into the other.
pub fn apply_crosstalk(probs: ChannelProbs, chi: f64) -> ChannelProbs {
    ChannelProbs {
        p0: (1.0 - chi) * probs.p0 + chi * probs.p1,
        p1: (1.0 - chi) * probs.p1 + chi * probs.p0,
    }
}

/// `sigma^2 + 4 w0^2 chi`, in squared length units of `w0`.
pub fn effective_noise(noise: &NoiseModel, w0: f64) -> f64 {
    noise.sigma * noise.sigma + 4.0 * w0 * w0 * noise.chi
}

/// Demultiplexer offset maximizing the HG00 signal to quadratic order.
pub fn aligned_offset(scene: &SceneParams) -> Misalignment {
    Misalignment {
        delta_x: scene.epsilon * scene.d_x(),
        delta_y: scene.epsilon * scene.d_y(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentCheck {
    pub analytic: Misalignment,
    pub numeric: Misalignment,
    /// Distance between the two optima, in units of `w0`.
    pub discrepancy_a: f64,
}

/// Locates the maximum of the exact HG00 probability by cyclic golden-section
/// search and compares it with [`aligned_offset`].
pub fn verify_aligned_offset(scene: &SceneParams) -> Result<AlignmentCheck> {
    let analytic = aligned_offset(scene);
    let p00 = |bx: f64, by: f64| -> f64 {
        let mis = Misalignment {
            delta_x: bx * scene.w0,
            delta_y: by * scene.w0,
        };
        exact_mode_probs(scene, &mis)
            .map(|p| p.p00)
            .unwrap_or(f64::NAN)
    };

    let span = scene.d_a() + 1.0;
    let (mut bx, mut by) = (0.0, 0.0);
    for _ in 0..200 {
        let (px, py) = (bx, by);
        bx = golden_max(|t| p00(t, by), -span, span);
        by = golden_max(|t| p00(bx, t), -span, span);
        if (bx - px).abs() < 1e-14 && (by - py).abs() < 1e-14 {
            break;
        }
    }
    let numeric = Misalignment::new(bx * scene.w0, by * scene.w0)?;
    let discrepancy_a = (bx - analytic.delta_x / scene.w0).hypot(by - analytic.delta_y / scene.w0);
    Ok(AlignmentCheck {
        analytic,
        numeric,
        discrepancy_a,
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
        if b <= a {
            break;
        }
    }
    0.5 * (lo + hi)
}
