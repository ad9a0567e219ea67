use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use spade_core::bounds::{sweep_bounds, Budget, SweepAxis};
use spade_core::calibration::{
    fit_linear, fit_quadratic, invert_curve, propagate_uncertainty, runs_test, Branch,
    CalibrationCurve, SweepData, SweepPoint, Weighting,
};
use spade_core::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use spade_core::figures::{render, Figure, FigureConfig};
use spade_core::fisher::{fisher_d, fisher_eps};
use spade_core::model::{
    apply_crosstalk, exact_mode_probs, subrayleigh_probs, Misalignment, NoiseModel, SceneParams,
};
use spade_core::montecarlo::{
    estimate_f1, invert_for_d, invert_for_eps, sample_counts, AcquisitionConfig, ForwardModel,
    JitterMode,
};
use spade_core::quadrature::QuadratureConfig;
use spade_core::Error as CoreError;

use crate::config::{ConfigError, RawConfig, Resolver};
use crate::output::{self, Artifact};

pub const DEFAULT_SEED: u64 = 20180101;

// Grid defaults in config syntax; they reproduce the library defaults.
const FIG1_GRID: &str = "0:8:161";
const FIG1_EPSILONS: &str = "0.01,0.1,0.5";
const FIG2_GRID: &str = "0.02:2:100";
const FIG2_CHIS: &str = "0,0.001,0.01";
const FIG3_GRID: &str = "0.005:0.5:100";
const FIG3_CHIS: &str = "0,0.001,0.005";
const D_SWEEP_UM: &str = "-200:200:21";
const EPS_SWEEP_CONTROLS: &str = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(CoreError),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                CoreError::ParameterDomain { .. }
                | CoreError::MixedBudgets(..)
                | CoreError::UnknownName(_) => 2,
                CoreError::BelowNoiseFloor { .. }
                | CoreError::Unidentifiable(_)
                | CoreError::BelowCalibrationFloor { .. }
                | CoreError::DivergentSensitivity { .. } => 4,
                CoreError::NumericalFailure { .. }
                | CoreError::EstimationImpossible
                | CoreError::FitImpossible(_)
                | CoreError::InvalidCurve(_) => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(ConfigError(msg.into())))
}

pub struct Context {
    pub raw: RawConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn resolver(&self, keys: &[&[&str]]) -> Result<Resolver, CliError> {
        let allowed: Vec<&str> = keys.iter().flat_map(|k| k.iter().copied()).collect();
        Ok(Resolver::new(self.raw.clone(), &allowed)?)
    }

    fn finish(&self, artifacts: Vec<Artifact>) -> Result<(), CliError> {
        for p in output::write_all(&self.out_dir, &artifacts)? {
            eprintln!("wrote {}", p.display());
        }
        Ok(())
    }
}

const SEED_KEYS: &[&str] = &["seed"];
const SCENE_KEYS: &[&str] = &[
    "eta", "epsilon", "w0_um", "d_um", "dx_um", "dy_um", "d_a", "dx_a", "dy_a",
];
const NOISE_KEYS: &[&str] = &["sigma_um", "sigma_a", "chi"];
const OFFSET_KEYS: &[&str] = &["delta_x_um", "delta_y_um", "delta_x_a", "delta_y_a"];
const QUAD_KEYS: &[&str] = &["quad_half_width", "quad_rel_tol", "quad_max_intervals"];

/// Length in units of `w0`, from whichever of the micrometre or
/// dimensionless keys is present.
fn length_a(
    r: &mut Resolver,
    um_keys: &[&str],
    a_keys: &[&str],
    w0_um: f64,
    default: f64,
) -> Result<f64, CliError> {
    let all: Vec<&str> = um_keys.iter().chain(a_keys).copied().collect();
    r.exclusive(&all)?;
    for k in um_keys {
        if let Some(v) = r.opt_f64(k)? {
            return Ok(v / w0_um);
        }
    }
    for k in a_keys {
        if let Some(v) = r.opt_f64(k)? {
            return Ok(v);
        }
    }
    Ok(default)
}

fn w0_um(r: &mut Resolver) -> Result<f64, CliError> {
    let w0 = r.f64("w0_um", 300.0)?;
    if w0 <= 0.0 {
        return config_err("`w0_um` must be positive");
    }
    Ok(w0)
}

fn seed(r: &mut Resolver) -> Result<u64, CliError> {
    Ok(r.u64("seed", DEFAULT_SEED)?)
}

fn scene(
    r: &mut Resolver,
    eta_default: f64,
    eps_default: f64,
    d_default: f64,
) -> Result<(SceneParams, f64), CliError> {
    let w0 = w0_um(r)?;
    let eta = r.f64("eta", eta_default)?;
    let eps = r.f64("epsilon", eps_default)?;
    let dx = length_a(r, &["d_um", "dx_um"], &["d_a", "dx_a"], w0, d_default)?;
    let dy = length_a(r, &["dy_um"], &["dy_a"], w0, 0.0)?;
    Ok((SceneParams::dimensionless(eta, eps, dx, dy)?, w0))
}

fn noise(r: &mut Resolver, w0: f64, chi_default: f64) -> Result<NoiseModel, CliError> {
    let sigma = length_a(r, &["sigma_um"], &["sigma_a"], w0, 0.0)?;
    let chi = r.f64("chi", chi_default)?;
    Ok(NoiseModel::new(sigma, chi)?)
}

fn offset(r: &mut Resolver, w0: f64) -> Result<Misalignment, CliError> {
    let dx = length_a(r, &["delta_x_um"], &["delta_x_a"], w0, 0.0)?;
    let dy = length_a(r, &["delta_y_um"], &["delta_y_a"], w0, 0.0)?;
    Ok(Misalignment::new(dx, dy)?)
}

fn quadrature(r: &mut Resolver) -> Result<QuadratureConfig, CliError> {
    let d = QuadratureConfig::default();
    let cfg = QuadratureConfig {
        half_width: r.f64("quad_half_width", d.half_width)?,
        rel_tol: r.f64("quad_rel_tol", d.rel_tol)?,
        max_intervals: r.u64("quad_max_intervals", d.max_intervals as u64)? as usize,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn f(x: f64) -> String {
    x.to_string()
}

pub fn probs(ctx: Context) -> Result<(), CliError> {
    let mut r = ctx.resolver(&[SEED_KEYS, SCENE_KEYS, NOISE_KEYS, OFFSET_KEYS])?;
    seed(&mut r)?;
    let (s, w0) = scene(&mut r, 1.0, 0.1, 0.0)?;
    let n = noise(&mut r, w0, 0.0)?;
    let mis = offset(&mut r, w0)?;

    let exact = exact_mode_probs(&s, &mis)?;
    let mixed = exact.with_crosstalk(n.chi());
    // sub-Rayleigh form takes misalignment through sigma only
    let sub = subrayleigh_probs(&s, &NoiseModel::new(n.sigma(), 0.0)?);
    let sub_mixed = apply_crosstalk(sub, n.chi());
    let none = 1.0 - s.eta();
    let rows = vec![
        vec![
            "exact".into(),
            f(exact.p00),
            f(exact.p01),
            f(exact.p10),
            f(exact.p1),
            f(exact.p_none),
        ],
        vec![
            "exact_crosstalk".into(),
            f(mixed.p00),
            f(mixed.p01),
            f(mixed.p10),
            f(mixed.p1),
            f(mixed.p_none),
        ],
        vec![
            "subrayleigh".into(),
            f(sub.p0),
            String::new(),
            String::new(),
            f(sub.p1),
            f(none),
        ],
        vec![
            "subrayleigh_crosstalk".into(),
            f(sub_mixed.p0),
            String::new(),
            String::new(),
            f(sub_mixed.p1),
            f(none),
        ],
    ];
    let header = ["model", "p00", "p01", "p10", "p1", "p_none"];
    let bytes = output::csv("probs", &r.metadata(), &header, rows.clone())?;
    println!("{}", header.join(","));
    for row in &rows {
        println!("{}", row.join(","));
    }
    ctx.finish(vec![Artifact {
        name: "probs.csv".into(),
        bytes,
    }])
}

pub fn fisher_scan(ctx: Context) -> Result<(), CliError> {
    let mut r = ctx.resolver(&[SEED_KEYS, QUAD_KEYS, &["eta", "epsilons", "grid"]])?;
    seed(&mut r)?;
    let eta = r.f64("eta", 1.0)?;
    let epsilons = r.grid("epsilons", FIG1_EPSILONS)?;
    let grid = r.grid("grid", FIG1_GRID)?;
    let quad = quadrature(&mut r)?;
    let mut rows = Vec::new();
    for &eps in &epsilons {
        for &d_a in &grid {
            let s = SceneParams::dimensionless(eta, eps, d_a, 0.0)?;
            let fd = fisher_d(&s, &quad)?;
            let fe = fisher_eps(&s, &quad)?;
            rows.push(vec![
                f(eps),
                f(d_a),
                f(fd.value),
                f(fd.error_estimate),
                f(fe.value),
                f(fe.error_estimate),
            ]);
        }
    }
    let bytes = output::csv(
        "fisher-scan",
        &r.metadata(),
        &[
            "epsilon",
            "d_a",
            "fisher_d",
            "fisher_d_error",
            "fisher_eps",
            "fisher_eps_error",
        ],
        rows,
    )?;
    ctx.finish(vec![Artifact {
        name: "fisher_scan.csv".into(),
        bytes,
    }])
}

pub fn bounds_scan(ctx: Context) -> Result<(), CliError> {
    let mut r = ctx.resolver(&[
        SEED_KEYS,
        QUAD_KEYS,
        &[
            "axis", "grid", "eta", "epsilon", "d_a", "chis", "sigma_a", "photons",
        ],
    ])?;
    seed(&mut r)?;
    let axis = r.choice("axis", &["separation", "intensity"], "separation")?;
    let eta = r.f64("eta", 1.0)?;
    let photons = r.f64("photons", 1e4)?;
    let chis = r.grid("chis", FIG2_CHIS)?;
    let sigma_a = r.f64("sigma_a", 0.0)?;
    let (axis, template) = if axis == "separation" {
        let grid = r.grid("grid", FIG2_GRID)?;
        let eps = r.f64("epsilon", 0.01)?;
        (
            SweepAxis::Separation(grid),
            SceneParams::dimensionless(eta, eps, 0.0, 0.0)?,
        )
    } else {
        let grid = r.grid("grid", FIG3_GRID)?;
        let d_a = r.f64("d_a", 0.5)?;
        (
            SweepAxis::Intensity(grid),
            SceneParams::dimensionless(eta, 0.0, d_a, 0.0)?,
        )
    };
    let quad = quadrature(&mut r)?;
    let noises = chis
        .iter()
        .map(|&c| NoiseModel::new(sigma_a, c))
        .collect::<Result<Vec<_>, _>>()?;
    let table = sweep_bounds(
        &axis,
        &template,
        &noises,
        Budget::from_photons(eta, photons)?,
        &quad,
    )?;
    let bytes = output::curve_csv("bounds-scan", &r.metadata(), &table)?;
    ctx.finish(vec![Artifact {
        name: "bounds_scan.csv".into(),
        bytes,
    }])
}

fn jitter(r: &mut Resolver, w0: f64) -> Result<JitterMode, CliError> {
    let mode = r.choice(
        "jitter",
        &["per-measure", "per-slot", "fixed"],
        "per-measure",
    )?;
    let mis = offset(r, w0)?;
    Ok(match mode.as_str() {
        "per-slot" => JitterMode::PerSlot,
        "fixed" => JitterMode::Fixed(mis),
        _ => {
            if mis != Misalignment::ALIGNED {
                return config_err("offset keys only apply with `jitter = fixed`");
            }
            JitterMode::PerMeasure
        }
    })
}

fn forward_model(r: &mut Resolver, default: &str) -> Result<ForwardModel, CliError> {
    Ok(
        match r
            .choice("model", &["exact", "effective"], default)?
            .as_str()
        {
            "effective" => ForwardModel::Effective,
            _ => ForwardModel::Exact,
        },
    )
}

pub fn simulate(ctx: Context) -> Result<(), CliError> {
    let mut r = ctx.resolver(&[
        SEED_KEYS,
        SCENE_KEYS,
        NOISE_KEYS,
        OFFSET_KEYS,
        &[
            "n_slots",
            "n_measures",
            "jitter",
            "model",
            "dark_rate",
            "split_channels",
            "estimate",
        ],
    ])?;
    let master_seed = seed(&mut r)?;
    let (s, w0) = scene(&mut r, 0.01, 0.1, 100.0 / 300.0)?;
    let n = noise(&mut r, w0, 0.0035)?;
    let mut acq = AcquisitionConfig::new(
        r.u64("n_slots", 40_000)?,
        r.u64("n_measures", 100)? as usize,
        master_seed,
    )?;
    acq.jitter = jitter(&mut r, w0)?;
    acq.model = forward_model(&mut r, "exact")?;
    acq.dark_rate = r.f64("dark_rate", 0.0)?;
    acq.split_channels = r.bool("split_channels", false)?;
    acq.validate()?;
    let estimate = r.choice("estimate", &["none", "d", "eps"], "none")?;

    let record = sample_counts(&s, &n, &acq)?;
    let f1 = estimate_f1(&record)?;
    let summary = match estimate.as_str() {
        "d" => Some(format!("d_hat_um = {}", invert_for_d(f1.f1, &s, &n)? * w0)),
        "eps" => {
            let e = invert_for_eps(f1.f1, &s, &n)?;
            Some(format!(
                "eps_hat = {} (raw {}, clamped {})",
                e.value, e.raw, e.clamped
            ))
        }
        _ => None,
    };

    let mut header = vec!["index", "n0", "n1", "substream"];
    if acq.split_channels {
        header.extend(["n01", "n10"]);
    }
    let rows = record.measures.iter().map(|m| {
        let mut row = vec![
            m.index.to_string(),
            m.n0.to_string(),
            m.n1.to_string(),
            m.substream.to_string(),
        ];
        if let Some((a, b)) = m.split {
            row.push(a.to_string());
            row.push(b.to_string());
        }
        row
    });
    let bytes = output::csv("simulate", &r.metadata(), &header, rows)?;
    println!(
        "n0 = {}\nn1 = {}\nf1 = {}\ndelta_f1 = {}",
        record.n0, record.n1, f1.f1, f1.delta_f1
    );
    if let Some(s) = summary {
        println!("{s}");
    }
    ctx.finish(vec![Artifact {
        name: "simulate.csv".into(),
        bytes,
    }])
}

fn read_sweep(path: &Path) -> Result<SweepData, CliError> {
    let bad = |m: String| CliError::Config(ConfigError(format!("{}: {m}", path.display())));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["control", "measure_index", "n0", "n1"] {
        return Err(bad("expected header control,measure_index,n0,n1".into()));
    }
    let mut points: Vec<SweepPoint> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = i + 1;
        let control: f64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("data row {row}: bad control `{}`", &rec[0])))?;
        let n1: u64 = rec[3]
            .parse()
            .map_err(|_| bad(format!("data row {row}: bad n1 `{}`", &rec[3])))?;
        match points.last_mut() {
            Some(p) if p.control == control => p.counts.push(n1),
            _ => points.push(SweepPoint {
                control,
                counts: vec![n1],
            }),
        }
    }
    Ok(SweepData::new(points)?)
}

fn sweep_rows(sweep: &SweepData) -> Vec<Vec<String>> {
    sweep
        .points()
        .iter()
        .flat_map(|p| {
            p.counts
                .iter()
                .enumerate()
                .map(move |(i, c)| vec![f(p.control), i.to_string(), String::new(), c.to_string()])
        })
        .collect()
}

fn weighting(r: &mut Resolver) -> Result<Weighting, CliError> {
    Ok(
        match r
            .choice("weighting", &["auto", "unweighted"], "auto")?
            .as_str()
        {
            "unweighted" => Weighting::Unweighted,
            _ => Weighting::Auto,
        },
    )
}

fn curve_json(curve: &CalibrationCurve) -> serde_json::Value {
    let runs = runs_test(&curve.residuals);
    serde_json::json!({
        "curve": curve,
        "intercept_std": curve.intercept_std(),
        "slope_std": curve.slope_std(),
        "runs_test": runs,
    })
}

fn readout_rows(curve: &CalibrationCurve, sweep: &SweepData) -> Result<Vec<Vec<String>>, CliError> {
    sweep
        .points()
        .iter()
        .zip(&curve.residuals)
        .map(|(p, res)| {
            let branch = if p.control < 0.0 {
                Branch::Negative
            } else {
                Branch::Positive
            };
            let estimate = match invert_curve(curve, p.total(), branch) {
                Ok(v) => v,
                Err(CoreError::BelowCalibrationFloor { .. }) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            let err = match propagate_uncertainty(curve, p.control, p.delta_n1()) {
                Ok(v) => v,
                Err(CoreError::DivergentSensitivity { .. }) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            Ok(vec![
                f(p.control),
                f(p.total()),
                f(p.delta_n1()),
                f(curve.evaluate(p.control)),
                f(*res),
                f(estimate),
                f(err),
            ])
        })
        .collect()
}

const READOUT_HEADER: [&str; 7] = [
    "control",
    "n1",
    "delta_n1",
    "fitted",
    "residual",
    "estimate",
    "control_error",
];

pub fn calibrate(ctx: Context) -> Result<(), CliError> {
    let mut r = ctx.resolver(&[SEED_KEYS, &["input", "kind", "weighting"]])?;
    seed(&mut r)?;
    let Some(input) = r.string("input") else {
        return config_err("`input` (sweep-data CSV) is required");
    };
    let kind = r.choice("kind", &["quadratic", "linear"], "quadratic")?;
    let w = weighting(&mut r)?;
    let sweep = read_sweep(Path::new(&input))?;
    let curve = if kind == "linear" {
        fit_linear(&sweep, w)?
    } else {
        fit_quadratic(&sweep, w)?
    };
    let meta = r.metadata();
    let rows = readout_rows(&curve, &sweep)?;
    println!(
        "a1 = {} +- {}\nb1 = {} +- {}\nreduced_chi_square = {}",
        curve.intercept,
        curve.intercept_std(),
        curve.slope,
        curve.slope_std(),
        curve.reduced_chi_square
    );
    ctx.finish(vec![
        Artifact {
            name: "calibrate_curve.json".into(),
            bytes: output::json("calibrate", &meta, curve_json(&curve))?,
        },
        Artifact {
            name: "calibrate_readout.csv".into(),
            bytes: output::csv("calibrate", &meta, &READOUT_HEADER, rows)?,
        },
    ])
}

pub fn figure(ctx: Context, name: &str) -> Result<(), CliError> {
    let fig: Figure = name.parse()?;
    let mut r = ctx.resolver(&[
        SEED_KEYS,
        QUAD_KEYS,
        &["grid", "epsilons", "epsilon", "d_a", "chis", "sigma_a"],
    ])?;
    seed(&mut r)?;
    let d = FigureConfig::defaults(fig);
    let (grid_text, chis_text) = match fig {
        Figure::Fig1 => (FIG1_GRID, ""),
        Figure::Fig2 => (FIG2_GRID, FIG2_CHIS),
        Figure::Fig3 => (FIG3_GRID, FIG3_CHIS),
    };
    let mut cfg = FigureConfig {
        grid: r.grid("grid", grid_text)?,
        ..d.clone()
    };
    match fig {
        Figure::Fig1 => {
            cfg.epsilons = r.grid("epsilons", FIG1_EPSILONS)?;
            for k in ["epsilon", "d_a", "chis", "sigma_a"] {
                if r.has(k) {
                    return config_err(format!("`{k}` does not apply to fig1"));
                }
            }
        }
        Figure::Fig2 | Figure::Fig3 => {
            if r.has("epsilons") {
                return config_err(format!("`epsilons` does not apply to {fig}"));
            }
            if fig == Figure::Fig2 {
                cfg.epsilon = r.f64("epsilon", d.epsilon)?;
                if r.has("d_a") {
                    return config_err("`d_a` does not apply to fig2");
                }
            } else {
                cfg.d_a = r.f64("d_a", d.d_a)?;
                if r.has("epsilon") {
                    return config_err("`epsilon` does not apply to fig3");
                }
            }
            cfg.chis = r.grid("chis", chis_text)?;
            cfg.sigma_a = r.f64("sigma_a", d.sigma_a)?;
        }
    }
    cfg.quad = quadrature(&mut r)?;
    let table = render(&cfg)?;
    let bytes = output::curve_csv(&format!("figure {fig}"), &r.metadata(), &table)?;
    ctx.finish(vec![Artifact {
        name: format!("{fig}.csv"),
        bytes,
    }])
}

pub fn experiment(ctx: Context, kind: &str) -> Result<(), CliError> {
    let kind: ExperimentKind = kind.parse()?;
    let mut r = ctx.resolver(&[
        SEED_KEYS,
        QUAD_KEYS,
        NOISE_KEYS,
        OFFSET_KEYS,
        &[
            "w0_um",
            "eta",
            "epsilon",
            "d_um",
            "d_a",
            "controls",
            "d_um_grid",
            "photons",
            "n_measures",
            "jitter",
            "model",
            "dark_rate",
            "weighting",
            "di_photons_low",
            "di_photons_high",
        ],
    ])?;
    let d = ExperimentConfig::defaults(kind);
    let mut cfg = d.clone();
    cfg.master_seed = seed(&mut r)?;
    cfg.w0 = w0_um(&mut r)?;
    cfg.eta = r.f64("eta", d.eta)?;
    match kind {
        ExperimentKind::DSweep => {
            cfg.epsilon = r.f64("epsilon", d.epsilon)?;
            for k in ["d_um", "d_a"] {
                if r.has(k) {
                    return config_err(format!(
                        "`{k}` does not apply to d-sweep (use controls or d_um_grid)"
                    ));
                }
            }
            r.exclusive(&["controls", "d_um_grid"])?;
            cfg.controls = if r.has("controls") {
                r.grid("controls", "")?
            } else {
                let um = r.grid("d_um_grid", D_SWEEP_UM)?;
                um.iter().map(|x| x / cfg.w0).collect()
            };
        }
        ExperimentKind::EpsSweep => {
            if r.has("epsilon") || r.has("d_um_grid") {
                return config_err("`epsilon` and `d_um_grid` do not apply to eps-sweep");
            }
            cfg.d_a = length_a(&mut r, &["d_um"], &["d_a"], cfg.w0, d.d_a)?;
            cfg.controls = r.grid("controls", EPS_SWEEP_CONTROLS)?;
        }
    }
    cfg.photons = r.f64("photons", d.photons)?;
    cfg.n_measures = r.u64("n_measures", d.n_measures as u64)? as usize;
    cfg.noise = noise(&mut r, cfg.w0, d.noise.chi())?;
    cfg.jitter = jitter(&mut r, cfg.w0)?;
    cfg.model = forward_model(&mut r, "exact")?;
    cfg.dark_rate = r.f64("dark_rate", d.dark_rate)?;
    cfg.weighting = weighting(&mut r)?;
    cfg.di_photons = (
        r.f64("di_photons_low", d.di_photons.0)?,
        r.f64("di_photons_high", d.di_photons.1)?,
    );
    cfg.quad = quadrature(&mut r)?;
    r.record("n_slots", cfg.n_slots());

    let res = run_experiment(&cfg)?;
    let meta = r.metadata();
    let cmd = format!("experiment {kind}");

    let sweep_rows: Vec<Vec<String>> = {
        let mut rows = sweep_rows(&res.sweep);
        // fill n0 from the records, in the same point/measure order
        let n0s = res
            .records
            .iter()
            .flat_map(|rec| rec.measures.iter().map(|m| m.n0));
        for (row, n0) in rows.iter_mut().zip(n0s) {
            row[2] = n0.to_string();
        }
        rows
    };
    let comparison = res.comparison.iter().map(|c| {
        vec![
            f(c.control),
            f(c.empirical_error),
            f(c.spade_bound),
            f(c.di_bound_low),
            f(c.di_bound_high),
        ]
    });
    let residuals = res.readout.iter().map(|o| {
        vec![
            f(o.control),
            f(o.n1),
            f(o.delta_n1),
            f(o.fitted),
            f(o.residual),
            f(o.estimate),
        ]
    });

    println!(
        "a1 = {} +- {}\nb1 = {} +- {}\nreduced_chi_square = {}\nruns_test_p = {}",
        res.curve.intercept,
        res.curve.intercept_std(),
        res.curve.slope,
        res.curve.slope_std(),
        res.curve.reduced_chi_square,
        res.runs.p_value
    );
    let prefix = kind.to_string().replace('-', "_");
    ctx.finish(vec![
        Artifact {
            name: format!("{prefix}_sweep.csv"),
            bytes: output::csv(
                &cmd,
                &meta,
                &["control", "measure_index", "n0", "n1"],
                sweep_rows,
            )?,
        },
        Artifact {
            name: format!("{prefix}_curve.json"),
            bytes: output::json(&cmd, &meta, curve_json(&res.curve))?,
        },
        Artifact {
            name: format!("{prefix}_residuals.csv"),
            bytes: output::csv(
                &cmd,
                &meta,
                &[
                    "control", "n1", "delta_n1", "fitted", "residual", "estimate",
                ],
                residuals,
            )?,
        },
        Artifact {
            name: format!("{prefix}_comparison.csv"),
            bytes: output::csv(
                &cmd,
                &meta,
                &[
                    "control",
                    "empirical_error",
                    "spade_bound",
                    "di_bound_low_budget",
                    "di_bound_high_budget",
                ],
                comparison,
            )?,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_grid;

    #[test]
    fn grid_defaults_match_library() {
        for (fig, grid, chis) in [
            (Figure::Fig1, FIG1_GRID, ""),
            (Figure::Fig2, FIG2_GRID, FIG2_CHIS),
            (Figure::Fig3, FIG3_GRID, FIG3_CHIS),
        ] {
            let d = FigureConfig::defaults(fig);
            assert_eq!(parse_grid(grid).unwrap(), d.grid);
            if !chis.is_empty() {
                assert_eq!(parse_grid(chis).unwrap(), d.chis);
            }
        }
        assert_eq!(
            parse_grid(FIG1_EPSILONS).unwrap(),
            FigureConfig::defaults(Figure::Fig1).epsilons
        );
        let d = ExperimentConfig::defaults(ExperimentKind::DSweep);
        let um: Vec<f64> = parse_grid(D_SWEEP_UM)
            .unwrap()
            .iter()
            .map(|x| x / 300.0)
            .collect();
        assert_eq!(um, d.controls);
        let e = ExperimentConfig::defaults(ExperimentKind::EpsSweep);
        assert_eq!(parse_grid(EPS_SWEEP_CONTROLS).unwrap(), e.controls);
    }
}
