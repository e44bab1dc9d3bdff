//! System parameters and the effective two-cavity Hamiltonian.
//!
//! All rates are dimensionless, in units of the mechanical frequency ωm.
//! The mechanics enter only through the Kerr strength `mu = g_om^2`.
//!
//! The Hamiltonian built here is
//!
//! ```text
//! H1 = Σ_j [ -Δ n_j + μ n_j² + iλ e^{iθ} a_j†² - iλ e^{-iθ} a_j² ]
//!      + E e^{iφ} a_1† + E e^{-iφ} a_1 + J (a_1† a_2 + a_2† a_1)
//! ```
//!
//! The Kerr sign is the one carried by the complex detunings
//! `Λ = Δ + iκ/2 - μ` and `Γ = Δ + iκ/2 - 2μ` of the closed-form amplitudes,
//! so that the optimal pairs and the blockade locations `Δ± = μ ± J` come out
//! on the detuning axis where they are tabulated. The opposite Kerr sign is
//! the same physics mirrored in Δ (`Δ -> -Δ`).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fock::{two_mode_ops, ComplexOperator, FockBasis};

/// ωm = 2π × 75 MHz expressed in the "Hz" used by parameter files.
pub const DEFAULT_OMEGA_M_HZ: f64 = 2.0 * PI * 75.0e6;

/// `g/ωm` above which optomechanical coupling is no longer treated as weak.
pub const WEAK_G_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cavity {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Cavity {
    pub fn number(self) -> u8 {
        match self {
            Cavity::One => 1,
            Cavity::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Cavity::One),
            2 => Some(Cavity::Two),
            _ => None,
        }
    }
}

/// Parameters of two identical cavities, all in units of ωm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta: f64,
    pub lambda_gain: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(rename = "hop_J")]
    pub hop_j: f64,
    pub kappa: f64,
    #[serde(rename = "drive_E")]
    pub drive_e: f64,
    pub g_om: f64,
}

const PARAM_KEYS: [&str; 8] = [
    "delta",
    "lambda_gain",
    "theta",
    "phi",
    "hop_J",
    "kappa",
    "drive_E",
    "g_om",
];

impl SystemParams {
    /// Kerr strength g²/ωm.
    pub fn mu(&self) -> f64 {
        self.g_om * self.g_om
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.delta,
            self.lambda_gain,
            self.theta,
            self.phi,
            self.hop_j,
            self.kappa,
            self.drive_e,
            self.g_om,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.drive_e < 0.0 {
            return Err(Error::InvalidParams(format!("drive_E must be >= 0, got {}", self.drive_e)));
        }
        if self.g_om < 0.0 {
            return Err(Error::InvalidParams(format!("g_om must be >= 0, got {}", self.g_om)));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.hop_j < self.kappa && self.g_om <= WEAK_G_LIMIT {
            Regime::Weak
        } else {
            Regime::Strong
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        SystemParams { delta, ..self }
    }

    pub fn with_lambda(self, lambda_gain: f64) -> Self {
        SystemParams { lambda_gain, ..self }
    }

    pub fn with_hop(self, hop_j: f64) -> Self {
        SystemParams { hop_j, ..self }
    }

    pub fn with_g(self, g_om: f64) -> Self {
        SystemParams { g_om, ..self }
    }

    pub fn with_drive(self, drive_e: f64) -> Self {
        SystemParams { drive_e, ..self }
    }

    /// JSON object with every field plus the derived `mu`.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("plain struct");
        v.as_object_mut()
            .expect("object")
            .insert("mu".into(), Value::from(self.mu()));
        v
    }

    /// Parses a flat parameter object.
    ///
    /// Each key may instead be given with an `_hz` suffix, in which case it is
    /// divided by `omega_m_hz` (default 2π·75e6). `theta` and `phi` are angles
    /// and default to zero; every other key is required.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidParams("parameter file must be a JSON object".into()))?;
        Self::from_json_object(obj)
    }

    pub fn from_json_object(obj: &Map<String, Value>) -> Result<Self> {
        for key in obj.keys() {
            let base = key.strip_suffix("_hz").unwrap_or(key);
            if !DERIVED_KEYS.contains(&key.as_str()) && key != "omega_m_hz" && !PARAM_KEYS.contains(&base) {
                return Err(Error::InvalidParams(format!("unknown key {key:?}")));
            }
        }
        let omega_m_hz = match obj.get("omega_m_hz") {
            Some(v) => number(v, "omega_m_hz")?,
            None => DEFAULT_OMEGA_M_HZ,
        };
        if omega_m_hz <= 0.0 {
            return Err(Error::InvalidParams("omega_m_hz must be positive".into()));
        }
        let field = |key: &str, default: Option<f64>| -> Result<f64> {
            let hz_key = format!("{key}_hz");
            match (obj.get(key), obj.get(&hz_key)) {
                (Some(_), Some(_)) => Err(Error::InvalidParams(format!(
                    "both {key:?} and {hz_key:?} given"
                ))),
                (Some(v), None) => number(v, key),
                (None, Some(v)) => Ok(number(v, &hz_key)? / omega_m_hz),
                (None, None) => {
                    default.ok_or_else(|| Error::InvalidParams(format!("missing key {key:?}")))
                }
            }
        };
        let p = SystemParams {
            delta: field("delta", None)?,
            lambda_gain: field("lambda_gain", None)?,
            theta: field("theta", Some(0.0))?,
            phi: field("phi", Some(0.0))?,
            hop_j: field("hop_J", None)?,
            kappa: field("kappa", None)?,
            drive_e: field("drive_E", None)?,
            g_om: field("g_om", None)?,
        };
        p.validate()?;
        if let Some(v) = obj.get("mu") {
            let mu = number(v, "mu")?;
            if (mu - p.mu()).abs() > 1e-12 * p.mu().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidParams(format!(
                    "mu {mu} disagrees with g_om² = {}",
                    p.mu()
                )));
            }
        }
        if let Some(v) = obj.get("regime") {
            let stated: Regime = serde_json::from_value(v.clone())
                .map_err(|_| Error::InvalidParams(format!("regime {v} is not weak or strong")))?;
            if stated != p.regime() {
                return Err(Error::InvalidParams(format!(
                    "regime {v} disagrees with the parameters"
                )));
            }
        }
        Ok(p)
    }
}

/// Keys emitted alongside the parameters; accepted on input only if consistent.
const DERIVED_KEYS: [&str; 2] = ["mu", "regime"];

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::InvalidParams(format!("{key:?} must be a number")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Weak,
    Strong,
}

impl Preset {
    pub fn params(self) -> SystemParams {
        match self {
            Preset::Weak => weak_params(),
            Preset::Strong => strong_params(),
        }
    }
}

const KAPPA: f64 = 0.002;

/// J = 0.95κ, g = 0.042ωm, E = 0.02κ, κ = 0.15 MHz / 75 MHz.
pub fn weak_params() -> SystemParams {
    SystemParams {
        delta: 0.0,
        lambda_gain: 0.0,
        theta: 0.0,
        phi: 0.0,
        hop_j: 0.95 * KAPPA,
        kappa: KAPPA,
        drive_e: 0.02 * KAPPA,
        g_om: 0.042,
    }
}

/// J = 8κ, g = 0.2ωm, E = 0.02κ.
pub fn strong_params() -> SystemParams {
    SystemParams {
        hop_j: 8.0 * KAPPA,
        g_om: 0.2,
        ..weak_params()
    }
}

/// Parameter-independent operator pieces of H1 and H2 on one basis.
///
/// Both Hamiltonians are linear combinations of these terms, so callers that
/// evaluate many parameter points can build them once.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    /// `n1 + n2`
    number: ComplexOperator,
    /// `n1² + n2²`
    kerr: ComplexOperator,
    /// `a1†² + a2†²`
    pair_up: ComplexOperator,
    /// `a1² + a2²`
    pair_down: ComplexOperator,
    lowering: [ComplexOperator; 2],
    raising: [ComplexOperator; 2],
    /// `a1†a2 + a2†a1`
    hop: ComplexOperator,
}

impl HamiltonianTerms {
    pub fn new(basis: &FockBasis) -> Self {
        let (a1, a2) = two_mode_ops(basis);
        let (ad1, ad2) = (a1.adjoint(), a2.adjoint());
        let n1 = &ad1 * &a1;
        let n2 = &ad2 * &a2;
        HamiltonianTerms {
            number: &n1 + &n2,
            kerr: &(&n1 * &n1) + &(&n2 * &n2),
            pair_up: &(&ad1 * &ad1) + &(&ad2 * &ad2),
            pair_down: &(&a1 * &a1) + &(&a2 * &a2),
            hop: &(&ad1 * &a2) + &(&ad2 * &a1),
            lowering: [a1, a2],
            raising: [ad1, ad2],
        }
    }

    pub fn dim(&self) -> usize {
        self.number.dim()
    }

    /// `(coefficient, operator)` pairs summing to H1 with the drive on `driven`.
    fn hermitian_parts(&self, p: &SystemParams, driven: Cavity) -> [(C64, &ComplexOperator); 7] {
        let i = C64::i();
        let k = match driven {
            Cavity::One => 0,
            Cavity::Two => 1,
        };
        [
            (C64::from(-p.delta), &self.number),
            (C64::from(p.mu()), &self.kerr),
            (i * p.lambda_gain * C64::from_polar(1.0, p.theta), &self.pair_up),
            (-i * p.lambda_gain * C64::from_polar(1.0, -p.theta), &self.pair_down),
            (C64::from_polar(p.drive_e, p.phi), &self.raising[k]),
            (C64::from_polar(p.drive_e, -p.phi), &self.lowering[k]),
            (C64::from(p.hop_j), &self.hop),
        ]
    }

    pub fn hermitian(&self, p: &SystemParams, driven: Cavity) -> ComplexOperator {
        let mut h = ComplexOperator::zeros(self.dim());
        for (c, op) in self.hermitian_parts(p, driven) {
            h = &h + &op.scale(c);
        }
        h
    }

    pub fn non_hermitian(&self, p: &SystemParams) -> ComplexOperator {
        &self.hermitian(p, Cavity::One) - &self.number.scale(C64::new(0.0, p.kappa / 2.0))
    }

    /// `<row|H2|col>` without assembling the full matrix.
    pub fn non_hermitian_element(&self, p: &SystemParams, row: usize, col: usize) -> C64 {
        let h: C64 = self
            .hermitian_parts(p, Cavity::One)
            .iter()
            .map(|(c, op)| c * op.get(row, col))
            .sum();
        h - C64::new(0.0, p.kappa / 2.0) * self.number.get(row, col)
    }
}

/// Hermitian effective Hamiltonian H1 on `basis`.
pub fn effective_hamiltonian(p: &SystemParams, basis: &FockBasis) -> ComplexOperator {
    effective_hamiltonian_driving(p, basis, Cavity::One)
}

/// H1 with the coherent drive applied to `driven` instead of cavity 1.
pub fn effective_hamiltonian_driving(
    p: &SystemParams,
    basis: &FockBasis,
    driven: Cavity,
) -> ComplexOperator {
    HamiltonianTerms::new(basis).hermitian(p, driven)
}

/// H2 = H1 - i(κ/2)(n1 + n2).
pub fn non_hermitian_hamiltonian(p: &SystemParams, basis: &FockBasis) -> ComplexOperator {
    HamiltonianTerms::new(basis).non_hermitian(p)
}

/// Conventional-blockade detunings `(μ + J, μ - J)`.
pub fn cpb_detunings(p: &SystemParams) -> (f64, f64) {
    let mu = p.mu();
    (mu + p.hop_j, mu - p.hop_j)
}

/// Eigenvalues of H1 restricted to the single-excitation block with E = λ = 0,
/// returned as `(-Δ + μ + J, -Δ + μ - J)`. They vanish at `Δ = μ ± J`.
pub fn single_excitation_energies(p: &SystemParams) -> (f64, f64) {
    let base = -p.delta + p.mu();
    (base + p.hop_j, base - p.hop_j)
}
