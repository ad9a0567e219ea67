//! Seeded photon-counting simulation through the demultiplexer.
//!
//! Every measure draws from its own ChaCha8 stream: the master seed fixes the
//! key and the measure index selects the stream, so results do not depend on
//! how measures are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::model::{exact_mode_probs, Misalignment, ModeProbabilities, NoiseModel, SceneParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JitterMode {
    /// Constant offset for the whole record; `sigma` is ignored.
    Fixed(Misalignment),
    /// One offset per measure.
    PerMeasure,
    /// One offset per temporal slot.
    PerSlot,
}

/// Which probabilities drive the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardModel {
    /// Exact Gaussian overlaps followed by crosstalk mixing.
    Exact,
    /// Leading order in `d / w0`, with crosstalk entering as the extra noise
    /// `4 w0^2 chi`: `p1 = eta [chi + ((1-eps)|delta|^2 + eps |d - delta|^2) / 4w0^2]`.
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub n_slots: u64,
    pub n_measures: usize,
    pub jitter: JitterMode,
    pub master_seed: u64,
    /// Spurious-click probability per empty slot and detector.
    pub dark_rate: f64,
    pub model: ForwardModel,
    /// Keep HG01 and HG10 counts apart.
    pub split_channels: bool,
}

impl AcquisitionConfig {
    pub fn new(n_slots: u64, n_measures: usize, master_seed: u64) -> Result<Self> {
        let cfg = Self {
            n_slots,
            n_measures,
            jitter: JitterMode::PerMeasure,
            master_seed,
            dark_rate: 0.0,
            model: ForwardModel::Exact,
            split_channels: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.n_slots >= 1,
            "n_slots",
            self.n_slots as f64,
            "must be >= 1",
        )?;
        check(
            self.n_measures >= 1,
            "n_measures",
            self.n_measures as f64,
            "must be >= 1",
        )?;
        check(
            (0.0..=1e-3).contains(&self.dark_rate),
            "dark_rate",
            self.dark_rate,
            "must lie in [0, 1e-3]",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureCounts {
    pub index: usize,
    pub n0: u64,
    pub n1: u64,
    /// `(n01, n10)` when channels are kept apart.
    pub split: Option<(u64, u64)>,
    pub substream: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub master_seed: u64,
    pub n_slots: u64,
    pub measures: Vec<MeasureCounts>,
    pub n0: u64,
    pub n1: u64,
}

impl CountRecord {
    pub fn from_measures(master_seed: u64, n_slots: u64, measures: Vec<MeasureCounts>) -> Self {
        let n0 = measures.iter().map(|m| m.n0).sum();
        let n1 = measures.iter().map(|m| m.n1).sum();
        Self {
            master_seed,
            n_slots,
            measures,
            n0,
            n1,
        }
    }

    pub fn n1_per_measure(&self) -> Vec<u64> {
        self.measures.iter().map(|m| m.n1).collect()
    }
}

/// Per-slot probabilities for a given demultiplexer offset, crosstalk included.
pub fn slot_probabilities(
    scene: &SceneParams,
    noise: &NoiseModel,
    mis: &Misalignment,
    model: ForwardModel,
) -> Result<ModeProbabilities> {
    match model {
        ForwardModel::Exact => Ok(exact_mode_probs(scene, mis)?.with_crosstalk(noise.chi())),
        ForwardModel::Effective => {
            let eta = scene.eta();
            let eps = scene.epsilon();
            let bx = mis.delta_x / scene.w0();
            let by = mis.delta_y / scene.w0();
            let ux = scene.dx_a() - bx;
            let uy = scene.dy_a() - by;
            let chi = noise.chi();
            let p01 = eta * ((1.0 - eps) * bx * bx + eps * ux * ux) / 4.0 + 0.5 * eta * chi;
            let p10 = eta * ((1.0 - eps) * by * by + eps * uy * uy) / 4.0 + 0.5 * eta * chi;
            check(
                p01 + p10 <= eta,
                "d",
                scene.d_a(),
                "leading-order model gives p1 > eta; use the exact model",
            )?;
            Ok(ModeProbabilities::from_modes(eta - p01 - p10, p01, p10))
        }
    }
}

/// Independent master seed for the `index`-th point of a sweep
/// (splitmix64 finalizer over the master seed and index).
pub fn derive_seed(master_seed: u64, index: usize) -> u64 {
    let mut z = master_seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream generator for one measure.
pub fn measure_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

fn draw_offset(rng: &mut ChaCha8Rng, axis: Option<&Normal<f64>>) -> Misalignment {
    match axis {
        Some(n) => Misalignment {
            delta_x: n.sample(rng),
            delta_y: n.sample(rng),
        },
        None => Misalignment::ALIGNED,
    }
}

fn sample_measure(
    scene: &SceneParams,
    noise: &NoiseModel,
    acq: &AcquisitionConfig,
    index: usize,
) -> Result<MeasureCounts> {
    let mut rng = measure_rng(acq.master_seed, index);
    let axis = if noise.sigma() > 0.0 {
        Some(Normal::new(0.0, noise.sigma() / 2f64.sqrt()).expect("finite sigma"))
    } else {
        None
    };
    let dark_any = 1.0 - (1.0 - acq.dark_rate).powi(2);

    let (n0, n01, n10) = match acq.jitter {
        JitterMode::PerSlot => {
            let (mut n0, mut n01, mut n10) = (0u64, 0u64, 0u64);
            for _ in 0..acq.n_slots {
                let mis = draw_offset(&mut rng, axis.as_ref());
                let p = slot_probabilities(scene, noise, &mis, acq.model)?;
                let u: f64 = rng.random();
                if u < p.p00 {
                    n0 += 1;
                } else if u < p.p00 + p.p01 {
                    n01 += 1;
                } else if u < p.p00 + p.p1 {
                    n10 += 1;
                } else if dark_any > 0.0 && rng.random::<f64>() < dark_any {
                    if rng.random::<bool>() {
                        n01 += 1;
                    } else {
                        n10 += 1;
                    }
                }
            }
            (n0, n01, n10)
        }
        jitter => {
            let mis = match jitter {
                JitterMode::Fixed(m) => m,
                _ => draw_offset(&mut rng, axis.as_ref()),
            };
            let p = slot_probabilities(scene, noise, &mis, acq.model)?;
            let n = acq.n_slots;
            let n0 = binomial(&mut rng, n, p.p00);
            let rest = n - n0;
            let n1 = binomial(&mut rng, rest, p.p1 / (1.0 - p.p00));
            let n01 = if p.p1 > 0.0 {
                binomial(&mut rng, n1, p.p01 / p.p1)
            } else {
                0
            };
            let dark = binomial(&mut rng, rest - n1, dark_any);
            let dark01 = binomial(&mut rng, dark, 0.5);
            (n0, n01 + dark01, n1 - n01 + dark - dark01)
        }
    };

    Ok(MeasureCounts {
        index,
        n0,
        n1: n01 + n10,
        split: acq.split_channels.then_some((n01, n10)),
        substream: index as u64,
    })
}

/// Simulates `n_measures` repeated acquisitions of `n_slots` temporal modes.
pub fn sample_counts(
    scene: &SceneParams,
    noise: &NoiseModel,
    acq: &AcquisitionConfig,
) -> Result<CountRecord> {
    acq.validate()?;
    let measures = (0..acq.n_measures)
        .into_par_iter()
        .map(|i| sample_measure(scene, noise, acq, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountRecord::from_measures(
        acq.master_seed,
        acq.n_slots,
        measures,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Estimate {
    pub f1: f64,
    /// Plug-in binomial standard error.
    pub delta_f1: f64,
    /// Set when `f1` is 0 or 1 and the plug-in error collapses to zero.
    pub degenerate: bool,
}

pub fn estimate_f1_counts(n0: u64, n1: u64) -> Result<F1Estimate> {
    let total = n0 + n1;
    if total == 0 {
        return Err(Error::EstimationImpossible);
    }
    let f1 = n1 as f64 / total as f64;
    Ok(F1Estimate {
        f1,
        delta_f1: (f1 * (1.0 - f1) / total as f64).sqrt(),
        degenerate: n1 == 0 || n0 == 0,
    })
}

pub fn estimate_f1(record: &CountRecord) -> Result<F1Estimate> {
    estimate_f1_counts(record.n0, record.n1)
}

/// `f1` expected from misalignment and crosstalk alone:
/// `sigma^2 / 4w0^2 + chi`.
pub fn noise_floor(noise: &NoiseModel, w0: f64) -> f64 {
    let s = noise.sigma() / w0;
    s * s / 4.0 + noise.chi()
}

/// Separation from `f1` with `epsilon` known, in the length unit of `w0`.
pub fn invert_for_d(f1: f64, scene: &SceneParams, noise: &NoiseModel) -> Result<f64> {
    if scene.epsilon() <= 0.0 {
        return Err(Error::Unidentifiable("separation needs epsilon > 0"));
    }
    let radicand = (f1 - noise_floor(noise, scene.w0())) / scene.epsilon();
    if radicand < 0.0 {
        return Err(Error::BelowNoiseFloor { radicand });
    }
    Ok(2.0 * scene.w0() * radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsEstimate {
    /// Estimate clamped to `[0, 1/2]`.
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// Relative intensity from `f1` with the separation known.
pub fn invert_for_eps(f1: f64, scene: &SceneParams, noise: &NoiseModel) -> Result<EpsEstimate> {
    let d_a = scene.d_a();
    if d_a == 0.0 {
        return Err(Error::Unidentifiable("intensity needs d > 0"));
    }
    let excess = f1 - noise_floor(noise, scene.w0());
    if excess < 0.0 {
        return Err(Error::BelowNoiseFloor { radicand: excess });
    }
    let raw = 4.0 * excess / (d_a * d_a);
    let value = raw.clamp(0.0, 0.5);
    Ok(EpsEstimate {
        value,
        raw,
        clamped: value != raw,
    })
}
