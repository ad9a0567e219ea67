use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} out of domain: {reason}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    NumericalFailure { achieved: f64, requested: f64 },

    #[error("parameter is unidentifiable: {0}")]
    Unidentifiable(&'static str),

    /// The observed signal does not rise above the noise floor set by
    /// misalignment and crosstalk.
    #[error("signal below noise floor (radicand {radicand:e})")]
    BelowNoiseFloor { radicand: f64 },

    #[error("no photons detected, estimate impossible")]
    EstimationImpossible,

    #[error("fit impossible: {0}")]
    FitImpossible(&'static str),

    #[error("invalid calibration curve: {0}")]
    InvalidCurve(&'static str),

    #[error("observed counts {observed} below calibration floor {floor}")]
    BelowCalibrationFloor { observed: f64, floor: f64 },

    #[error("calibration curve is stationary at control = {control}, uncertainty undefined")]
    DivergentSensitivity { control: f64 },

    #[error("photon budgets differ: {0} vs {1}")]
    MixedBudgets(f64, f64),

    #[error("unknown name `{0}`")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterDomain {
            name,
            value,
            reason,
        })
    }
}
