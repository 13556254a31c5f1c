//! Ring-resonator cavity-QED figures of merit.
//!
//! Rates are in s⁻¹. `κ₀` is angular. The free spectral range is entered in
//! Hz and scaled by [`FSR_RATE_FACTOR`] wherever it enters the cooperativity
//! and the vacuum Rabi frequency; the superstrong threshold always compares
//! against the angular `2π·ν_FSR`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Multiplier applied to `ν_FSR` (Hz) in `C` and `g₁`. `1` reproduces
/// `C ≈ 41` for `β(1+F_P) = 20.6`, `ν_FSR = 500 GHz`, `λ₀ = 750 nm`,
/// `Q₀ = 10⁴`; set to `2π` for a fully angular convention.
pub const FSR_RATE_FACTOR: f64 = 1.0;

pub fn ghz_to_hz<T: Real>(ghz: T) -> T {
    ghz * T::lit(1e9)
}

pub fn hz_to_ghz<T: Real>(hz: T) -> T {
    hz / T::lit(1e9)
}

/// Ordinary frequency (Hz) to angular rate (s⁻¹).
pub fn hz_to_angular<T: Real>(hz: T) -> T {
    hz * T::lit(2.0) * T::PI()
}

pub fn angular_to_hz<T: Real>(rate: T) -> T {
    rate / (T::lit(2.0) * T::PI())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec<T> {
    pub fsr_hz: T,
    pub lambda0_nm: T,
    pub q0: T,
}

impl<T: Real> ResonatorSpec<T> {
    pub fn new(fsr_hz: T, lambda0_nm: T, q0: T) -> Result<Self> {
        let r = ResonatorSpec { fsr_hz, lambda0_nm, q0 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("fsr_hz", self.fsr_hz), ("lambda0_nm", self.lambda0_nm), ("q0", self.q0)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams<T> {
    pub beta: T,
    pub f_p: T,
    /// Free-space decay rate, s⁻¹.
    pub gamma_l: Option<T>,
    pub n_emitters: u64,
}

impl<T: Real> EmitterParams<T> {
    pub fn new(beta: T, f_p: T) -> Result<Self> {
        let e = EmitterParams {
            beta,
            f_p,
            gamma_l: None,
            n_emitters: 1,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_gamma_l(mut self, gamma_l: T) -> Result<Self> {
        self.gamma_l = Some(gamma_l);
        self.validate()?;
        Ok(self)
    }

    pub fn with_emitters(mut self, n: u64) -> Result<Self> {
        self.n_emitters = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::Domain(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.f_p >= T::zero() && self.f_p.is_finite()) {
            return Err(Error::Domain(format!("F_P must be non-negative, got {}", self.f_p)));
        }
        if let Some(g) = self.gamma_l {
            if !(g > T::zero() && g.is_finite()) {
                return Err(Error::Domain(format!("gamma_l must be positive, got {g}")));
            }
        }
        if self.n_emitters < 1 {
            return Err(Error::Domain("emitter count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Weak,
    Strong,
    Superstrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFigures<T> {
    pub kappa0: T,
    pub cooperativity: T,
    pub g1: Option<T>,
    pub g_n: Option<T>,
    pub regime: Option<Regime>,
}

/// Intrinsic resonator loss rate `κ₀ = 2πc/(λ₀Q₀)`.
pub fn kappa0<T: Real>(res: &ResonatorSpec<T>) -> Result<T> {
    res.validate()?;
    let lambda_m = res.lambda0_nm * T::lit(1e-9);
    Ok(T::lit(2.0) * T::PI() * T::lit(SPEED_OF_LIGHT) / (lambda_m * res.q0))
}

fn fsr_rate<T: Real>(res: &ResonatorSpec<T>) -> T {
    res.fsr_hz * T::lit(FSR_RATE_FACTOR)
}

/// `C = β·ν_FSR·(1+F_P)/κ₀`.
pub fn cooperativity<T: Real>(res: &ResonatorSpec<T>, em: &EmitterParams<T>) -> Result<T> {
    em.validate()?;
    Ok(em.beta * fsr_rate(res) * (T::one() + em.f_p) / kappa0(res)?)
}

/// `g₁ = √(2·γ_l·β·ν_FSR·(1+F_P))`.
pub fn vacuum_rabi<T: Real>(res: &ResonatorSpec<T>, em: &EmitterParams<T>) -> Result<T> {
    em.validate()?;
    res.validate()?;
    let gamma_l = em
        .gamma_l
        .ok_or_else(|| Error::MissingInput("gamma_l is required for the vacuum Rabi frequency".into()))?;
    Ok((T::lit(2.0) * gamma_l * em.beta * fsr_rate(res) * (T::one() + em.f_p)).sqrt())
}

/// `g_N = √N·g₁`.
pub fn collective_rabi<T: Real>(g1: T, n_emitters: u64) -> T {
    g1 * T::lit(n_emitters as f64).sqrt()
}

/// `C = g₁²/(2κ₀γ_l)`.
pub fn cooperativity_from_g1<T: Real>(g1: T, kappa0: T, gamma_l: T) -> T {
    g1 * g1 / (T::lit(2.0) * kappa0 * gamma_l)
}

/// Superstrong if `g_N > 2π·ν_FSR`, strong if `g_N > max(κ₀, γ_total)`,
/// weak otherwise.
pub fn classify_regime<T: Real>(fig: &CavityFigures<T>, res: &ResonatorSpec<T>, gamma_total: T) -> Result<Regime> {
    let g_n = fig
        .g_n
        .ok_or_else(|| Error::MissingInput("collective Rabi frequency g_N".into()))?;
    if !(gamma_total >= T::zero()) {
        return Err(Error::Domain(format!("gamma_total must be non-negative, got {gamma_total}")));
    }
    Ok(if g_n > hz_to_angular(res.fsr_hz) {
        Regime::Superstrong
    } else if g_n > fig.kappa0.max(gamma_total) {
        Regime::Strong
    } else {
        Regime::Weak
    })
}

/// Every figure that the inputs allow. The regime uses the emitter's total
/// decay rate `F_P·γ_l` and is present only when `γ_l` is given.
pub fn figures<T: Real>(res: &ResonatorSpec<T>, em: &EmitterParams<T>) -> Result<CavityFigures<T>> {
    let mut fig = CavityFigures {
        kappa0: kappa0(res)?,
        cooperativity: cooperativity(res, em)?,
        g1: None,
        g_n: None,
        regime: None,
    };
    if let Some(gamma_l) = em.gamma_l {
        let g1 = vacuum_rabi(res, em)?;
        fig.g1 = Some(g1);
        fig.g_n = Some(collective_rabi(g1, em.n_emitters));
        fig.regime = Some(classify_regime(&fig, res, em.f_p * gamma_l)?);
    }
    Ok(fig)
}
