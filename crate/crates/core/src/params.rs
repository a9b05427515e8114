//! Physical and normalized parameter sets.
//!
//! Physical rates are angular ([rad/s]). Normalized quantities are measured in
//! units of `2Ω`: frequencies `w = ω/2Ω`, time `τ = 2Ωt`.
//!
//! The TOML config ([`ParamsFile`]) takes ordinary frequencies in Hz and
//! multiplies them by `2π` on ingestion. Loss rates may be given either in Hz
//! or as quality factors (`κ = ω/Q_pump`, `Γ = Ω/Q_probe`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Default truncation order (three 3×3 blocks).
pub const DEFAULT_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Pump mode angular frequency [rad/s].
    pub omega: f64,
    /// Probe mode angular frequency [rad/s].
    pub big_omega: f64,
    /// Cross-Kerr rate [rad/s].
    pub g: f64,
    /// Parametric amplification rate [rad/s].
    pub f: f64,
    /// Pump loss rate [rad/s].
    pub kappa: f64,
    /// Probe loss rate [rad/s].
    pub gamma_loss: f64,
    /// Coupling efficiency, in `[0, 1]`.
    pub eta: f64,
    /// Input optical power [W].
    pub p_op: f64,
}

impl SystemParams {
    /// The worked example: 2 GHz pump, 1 GHz probe, Q = 100 on both modes,
    /// g = 2π·100 kHz, f = 2π·50 MHz, η = 0.4, 1 fW.
    pub fn example() -> Self {
        let omega = 2.0 * PI * 2e9;
        let big_omega = 2.0 * PI * 1e9;
        Self {
            omega,
            big_omega,
            g: 2.0 * PI * 100e3,
            f: 2.0 * PI * 50e6,
            kappa: omega / 100.0,
            gamma_loss: big_omega / 100.0,
            eta: 0.4,
            p_op: 1e-15,
        }
    }

    pub fn with_power(mut self, p_op: f64) -> Self {
        self.p_op = p_op;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega", self.omega),
            ("Omega", self.big_omega),
            ("g", self.g),
            ("f", self.f),
            ("kappa", self.kappa),
            ("Gamma", self.gamma_loss),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.p_op.is_finite() && self.p_op >= 0.0) {
            return Err(Error::InvalidParameter(format!("P_op must be >= 0, got {}", self.p_op)));
        }
        Ok(())
    }

    /// Normalized photon input rate `ξ = (1/2Ω)·sqrt(κηP/(ħω))`.
    pub fn xi(&self) -> f64 {
        (self.kappa * self.eta * self.p_op / (HBAR * self.omega)).sqrt() / (2.0 * self.big_omega)
    }

    /// Input power producing a given `ξ`; inverse of [`SystemParams::xi`].
    pub fn power_for_xi(&self, xi: f64) -> f64 {
        let r = 2.0 * self.big_omega * xi;
        r * r * HBAR * self.omega / (self.kappa * self.eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// `γ_l` for `l = 1..=L`, stored zero-based.
    pub gamma: Vec<f64>,
    pub xi: f64,
}

impl NormalizedParams {
    /// Builds a normalized set directly, with `γ_l = γ_1 + (l−1)λ`.
    pub fn new(alpha: f64, beta: f64, lambda: f64, gamma1: f64, xi: f64, order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidParameter("truncation order must be >= 1".into()));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta), ("lambda", lambda), ("gamma", gamma1), ("xi", xi)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if lambda < 0.0 || gamma1 < 0.0 || xi < 0.0 {
            return Err(Error::InvalidParameter("lambda, gamma and xi must be >= 0".into()));
        }
        let gamma = (0..order).map(|l| gamma1 + l as f64 * lambda).collect();
        Ok(Self { alpha, beta, lambda, gamma, xi })
    }

    pub fn example() -> Self {
        normalize(&SystemParams::example(), DEFAULT_ORDER).expect("example parameters are valid")
    }

    pub fn order(&self) -> usize {
        self.gamma.len()
    }

    /// Probe decay `γ = γ_1`.
    pub fn gamma1(&self) -> f64 {
        self.gamma[0]
    }

    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.lambda, self.gamma1(), self.xi, order)
    }

    pub fn with_xi(&self, xi: f64) -> Self {
        Self { xi, ..self.clone() }
    }

    pub fn with_gamma1(&self, gamma1: f64) -> Self {
        Self::new(self.alpha, self.beta, self.lambda, gamma1, self.xi, self.order()).expect("only gamma changed")
    }
}

pub fn normalize(p: &SystemParams, order: usize) -> Result<NormalizedParams> {
    p.validate()?;
    let two_omega = 2.0 * p.big_omega;
    NormalizedParams::new(
        p.f / p.big_omega,
        p.g / p.big_omega,
        p.kappa / two_omega,
        p.gamma_loss / two_omega,
        p.xi(),
        order,
    )
}

/// Parameter file. Frequencies and rates are ordinary frequencies in Hz.
///
/// ```toml
/// pump_freq_hz = 2e9
/// probe_freq_hz = 1e9
/// kerr_hz = 1e5
/// parametric_hz = 5e7
/// q_pump = 100
/// q_probe = 100
/// eta = 0.4
/// power_w = 1e-15
/// order = 3
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub pump_freq_hz: f64,
    pub probe_freq_hz: f64,
    pub kerr_hz: f64,
    pub parametric_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_loss_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_loss_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_pump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_probe: Option<f64>,
    pub eta: f64,
    pub power_w: f64,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

impl ParamsFile {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidParameter(e.message().to_string()))
    }

    pub fn example() -> Self {
        Self {
            pump_freq_hz: 2e9,
            probe_freq_hz: 1e9,
            kerr_hz: 1e5,
            parametric_hz: 5e7,
            pump_loss_hz: None,
            probe_loss_hz: None,
            q_pump: Some(100.0),
            q_probe: Some(100.0),
            eta: 0.4,
            power_w: 1e-15,
            order: DEFAULT_ORDER,
        }
    }

    pub fn system(&self) -> Result<SystemParams> {
        let tau = 2.0 * PI;
        let omega = tau * self.pump_freq_hz;
        let big_omega = tau * self.probe_freq_hz;
        let kappa = loss_rate("pump", self.pump_loss_hz, self.q_pump, omega)?;
        let gamma_loss = loss_rate("probe", self.probe_loss_hz, self.q_probe, big_omega)?;
        let p = SystemParams {
            omega,
            big_omega,
            g: tau * self.kerr_hz,
            f: tau * self.parametric_hz,
            kappa,
            gamma_loss,
            eta: self.eta,
            p_op: self.power_w,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn normalized(&self) -> Result<NormalizedParams> {
        normalize(&self.system()?, self.order)
    }
}

fn loss_rate(mode: &str, hz: Option<f64>, q: Option<f64>, freq: f64) -> Result<f64> {
    match (hz, q) {
        (Some(h), None) => Ok(2.0 * PI * h),
        (None, Some(q)) if q > 0.0 => Ok(freq / q),
        (None, Some(q)) => Err(Error::InvalidParameter(format!("{mode} Q must be positive, got {q}"))),
        (Some(_), Some(_)) => Err(Error::InvalidParameter(format!("give either {mode}_loss_hz or q_{mode}, not both"))),
        (None, None) => Err(Error::InvalidParameter(format!("missing {mode}_loss_hz or q_{mode}"))),
    }
}
