//! Equation of state.
//!
//! Only the ideal gas law is shipped. The solver talks to the EOS through
//! the specific enthalpy `H(p, rho)` and its two partial derivatives, so a
//! general causal EOS could be dropped in behind the same surface.

use crate::error::{Error, Result};

/// Kind of equation of state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EosKind {
    Ideal,
}

/// Equation-of-state parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosSpec {
    pub kind: EosKind,
    gamma: f64,
}

impl EosSpec {
    /// Ideal EOS with adiabatic index `gamma`; requires `1 < gamma <= 2`.
    pub fn ideal(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma <= 2.0) {
            return Err(Error::Domain(format!(
                "adiabatic index must satisfy 1 < gamma <= 2, got {gamma}"
            )));
        }
        Ok(Self {
            kind: EosKind::Ideal,
            gamma,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `Gamma / (Gamma - 1)`.
    #[inline]
    pub fn gamma_ratio(&self) -> f64 {
        self.gamma / (self.gamma - 1.0)
    }

    /// Specific enthalpy without argument checks. Hot path.
    #[inline]
    pub fn enthalpy_unchecked(&self, p: f64, rho: f64) -> f64 {
        1.0 + self.gamma_ratio() * p / rho
    }

    /// Specific enthalpy `H(p, rho)`.
    pub fn enthalpy(&self, p: f64, rho: f64) -> Result<f64> {
        check_positive(p, rho)?;
        Ok(self.enthalpy_unchecked(p, rho))
    }

    /// `(dH/dp, dH/drho)`, analytic.
    pub fn enthalpy_partials(&self, p: f64, rho: f64) -> Result<(f64, f64)> {
        check_positive(p, rho)?;
        let g = self.gamma_ratio();
        Ok((g / rho, -g * p / (rho * rho)))
    }

    /// Specific internal energy `e = p / ((Gamma - 1) rho)`.
    pub fn internal_energy(&self, p: f64, rho: f64) -> f64 {
        p / ((self.gamma - 1.0) * rho)
    }

    /// Signed margins of the causal-EOS conditions.
    ///
    /// Returns `[H - sqrt(1 + p^2/rho^2) - p/rho,
    ///           dH/drho - H (1/rho - dH/dp),
    ///           -dH/drho]`.
    /// The first must be nonnegative, the other two strictly positive.
    pub fn condition_margins(&self, p: f64, rho: f64) -> Result<[f64; 3]> {
        let h = self.enthalpy(p, rho)?;
        let (dh_dp, dh_drho) = self.enthalpy_partials(p, rho)?;
        let r = p / rho;
        let kinetic = h - (1.0 + r * r).sqrt() - r;
        let lower = dh_drho - h * (1.0 / rho - dh_dp);
        Ok([kinetic, lower, -dh_drho])
    }
}

fn check_positive(p: f64, rho: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) || !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!(
            "EOS requires p > 0 and rho > 0, got p = {p}, rho = {rho}"
        )));
    }
    Ok(())
}
