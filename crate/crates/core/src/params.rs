//! Physical parameters of the driven two-atom cavity system.
//!
//! All rates and frequencies are expressed in units of the cavity decay
//! rate, so `kappa` is normally 1.

use crate::error::{Error, Result};

/// Rates and detunings of two three-level atoms in a driven cavity.
///
/// The laser (Rabi frequency `omega`) and the cavity mode (couplings `g1`,
/// `g2`) both drive the 1–2 transition with detuning `delta`. The excited
/// level decays to 0 with `gamma0` and to 1 with `gamma1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega: f64,
    pub g1: f64,
    pub g2: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub kappa: f64,
    /// Detector efficiency in `[0, 1]`.
    pub eta: f64,
    /// Cavity Fock-space truncation (largest photon number kept).
    pub n_max: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            omega: 1.0,
            g1: 1.0,
            g2: 1.0,
            delta: 50.0,
            gamma0: 0.1,
            gamma1: 0.1,
            kappa: 1.0,
            eta: 1.0,
            n_max: 3,
        }
    }
}

impl SystemParams {
    /// Equal couplings `g` for both atoms, `kappa = 1`, unit detector
    /// efficiency and the default Fock cutoff.
    pub fn symmetric(omega: f64, g: f64, delta: f64, gamma0: f64, gamma1: f64) -> Self {
        SystemParams {
            omega,
            g1: g,
            g2: g,
            delta,
            gamma0,
            gamma1,
            ..Default::default()
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Total decay rate of the excited level.
    pub fn gamma(&self) -> f64 {
        self.gamma0 + self.gamma1
    }

    /// Single-atom cooperativity `g^2 / (kappa * Gamma)`, using the mean of
    /// `g1^2` and `g2^2`. Infinite when `Gamma = 0`.
    pub fn cooperativity(&self) -> f64 {
        let g_sq = 0.5 * (self.g1 * self.g1 + self.g2 * self.g2);
        g_sq / (self.kappa * self.gamma())
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("omega", self.omega),
            ("g1", self.g1),
            ("g2", self.g2),
            ("delta", self.delta),
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("kappa", self.kappa),
        ];
        for (field, value) in nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if self.n_max < 1 {
            return Err(Error::invalid("n_max", "must be at least 1"));
        }
        Ok(())
    }

    /// True when the detuning dominates every other rate by a factor of ten.
    pub fn in_dispersive_regime(&self) -> bool {
        let largest = [self.omega, self.g1, self.g2, self.kappa, self.gamma()]
            .into_iter()
            .fold(0.0_f64, f64::max);
        self.delta >= 10.0 * largest
    }

    /// Logs a warning when the adiabatic-elimination regime is not met.
    pub fn warn_if_outside_regime(&self) {
        if !self.in_dispersive_regime() {
            log::warn!(
                "delta = {} is not >= 10x the other rates; the effective model may be inaccurate",
                self.delta
            );
        }
    }
}
