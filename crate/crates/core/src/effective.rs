//! Adiabatically eliminated model on the atomic ground states.
//!
//! The effective register is `spectators ⊗ atom1 ⊗ atom2` with two levels
//! per atom. The no-jump Hamiltonian is diagonal in this basis.

use nalgebra::DMatrix;

use crate::analytics::MarkovRates;
use crate::basis::{GroundBasis, OperatorLabel, OperatorMatrix, C64, ZERO};
use crate::error::{Error, Result};
use crate::model::EmitterResolution;
use crate::params::SystemParams;

/// Rates of the effective ground-state dynamics, in units of `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    pub delta_eff: f64,
    pub gamma_eff: f64,
    /// Mean effective cavity rate of the two atoms.
    pub kappa_eff: f64,
    pub gamma_eff_0: f64,
    pub gamma_eff_1: f64,
    pub kappa_eff_1: f64,
    pub kappa_eff_2: f64,
    pub markov: MarkovRates,
    pub coop: f64,
}

/// Effective rates `Δ_eff = Ω²/4Δ`, `Γ_eff = Ω²Γ/4Δ²`, `κ_eff;i = Ω²g_i²/(Δ²κ)`.
pub fn effective_rates(params: &SystemParams) -> Result<EffectiveRates> {
    params.validate()?;
    if params.delta == 0.0 {
        return Err(Error::SingularDetuning);
    }
    let SystemParams {
        omega, delta, kappa, ..
    } = *params;
    let o2 = omega * omega;
    let d2 = delta * delta;
    let gamma = params.gamma();
    let gamma_eff = o2 * gamma / (4.0 * d2);
    let (gamma_eff_0, gamma_eff_1) = if gamma > 0.0 {
        (gamma_eff * params.gamma0 / gamma, gamma_eff * params.gamma1 / gamma)
    } else {
        (0.0, 0.0)
    };
    let kappa_eff_1 = o2 * params.g1 * params.g1 / (d2 * kappa);
    let kappa_eff_2 = o2 * params.g2 * params.g2 / (d2 * kappa);
    Ok(EffectiveRates::assemble(
        o2 / (4.0 * delta),
        gamma_eff_0,
        gamma_eff_1,
        kappa_eff_1,
        kappa_eff_2,
        params.eta,
        params.cooperativity(),
    ))
}

impl EffectiveRates {
    fn assemble(
        delta_eff: f64,
        gamma_eff_0: f64,
        gamma_eff_1: f64,
        kappa_eff_1: f64,
        kappa_eff_2: f64,
        eta: f64,
        coop: f64,
    ) -> Self {
        let kappa_eff = 0.5 * (kappa_eff_1 + kappa_eff_2);
        let collective = (kappa_eff_1.sqrt() + kappa_eff_2.sqrt()).powi(2);
        EffectiveRates {
            delta_eff,
            gamma_eff: gamma_eff_0 + gamma_eff_1,
            kappa_eff,
            gamma_eff_0,
            gamma_eff_1,
            kappa_eff_1,
            kappa_eff_2,
            markov: MarkovRates {
                gamma_ll: gamma_eff_1,
                gamma_ld: gamma_eff_0,
                gamma_hl: 2.0 * gamma_eff_1,
                gamma_hh: 2.0 * gamma_eff_0,
                kappa_l: kappa_eff,
                kappa_h: collective,
                eta,
            },
            coop,
        }
    }

    /// Rates fixed by the cooperativity alone: `Γ_eff = 1`, `κ_eff = 4C`,
    /// `Δ_eff = 0`, with a fraction `gamma0_fraction` of the atomic decay
    /// going to level 0. Time is then measured in units of `1/Γ_eff`.
    pub fn from_cooperativity(coop: f64, gamma0_fraction: f64, eta: f64) -> Result<Self> {
        if !(coop.is_finite() && coop > 0.0) {
            return Err(Error::invalid("coop", format!("must be finite and > 0, got {coop}")));
        }
        if !(0.0..=1.0).contains(&gamma0_fraction) {
            return Err(Error::invalid("gamma0_fraction", "must lie in [0, 1]"));
        }
        check_eta(eta)?;
        let k = 4.0 * coop;
        Ok(Self::assemble(0.0, gamma0_fraction, 1.0 - gamma0_fraction, k, k, eta, coop))
    }

    /// Purely cavity-driven rates (no atomic decay) with mean `kappa_bar`
    /// and couplings `κ_eff;1,2 = (1 ± ε) κ̄`.
    pub fn lossless(kappa_bar: f64, epsilon: f64, eta: f64) -> Result<Self> {
        if !(kappa_bar.is_finite() && kappa_bar > 0.0) {
            return Err(Error::invalid("kappa_bar", "must be finite and > 0"));
        }
        check_eta(eta)?;
        Self::assemble(0.0, 0.0, 0.0, kappa_bar, kappa_bar, eta, f64::INFINITY).with_asymmetry(epsilon)
    }

    /// Replaces the per-atom cavity rates by `(1 ± ε) κ_eff`, keeping the mean.
    pub fn with_asymmetry(self, epsilon: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [-1, 1], got {epsilon}")));
        }
        let k = self.kappa_eff;
        Ok(Self::assemble(
            self.delta_eff,
            self.gamma_eff_0,
            self.gamma_eff_1,
            (1.0 + epsilon) * k,
            (1.0 - epsilon) * k,
            self.markov.eta,
            self.coop,
        ))
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        self.markov.eta = eta;
        Ok(self)
    }

    pub fn eta(&self) -> f64 {
        self.markov.eta
    }

    /// Cavity emission rate of each ground-state pair `|jk⟩`, indexed `2j + k`.
    pub fn cavity_rates(&self) -> [f64; 4] {
        [0.0, self.kappa_eff_2, self.kappa_eff_1, self.markov.kappa_h]
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Diagonal effective Hamiltonian on the ground register.
pub fn build_effective_hamiltonian(rates: &EffectiveRates, spectators: usize) -> Result<OperatorMatrix> {
    let basis = GroundBasis::new(spectators)?;
    let r = rates;
    let pair = [
        ZERO,
        -C64::new(r.delta_eff, 0.5 * (r.gamma_eff + r.kappa_eff_2)),
        -C64::new(r.delta_eff, 0.5 * (r.gamma_eff + r.kappa_eff_1)),
        -C64::new(2.0 * r.delta_eff, r.gamma_eff + 0.5 * r.markov.kappa_h),
    ];
    let dim = basis.dim();
    let m = DMatrix::from_fn(dim, dim, |row, col| if row == col { pair[row % 4] } else { ZERO });
    Ok(OperatorMatrix::new(OperatorLabel::Hamiltonian, m))
}

/// Effective reset operators: atomic 0-channels, atomic 1-channels, then
/// the cavity channel.
pub fn build_effective_resets(
    rates: &EffectiveRates,
    spectators: usize,
    resolution: EmitterResolution,
) -> Result<Vec<OperatorMatrix>> {
    let basis = GroundBasis::new(spectators)?;
    let s0 = rates.gamma_eff_0.sqrt();
    let s1 = rates.gamma_eff_1.sqrt();
    let (k1, k2) = (rates.kappa_eff_1.sqrt(), rates.kappa_eff_2.sqrt());

    // Pair-space matrices, row-major over |00⟩, |01⟩, |10⟩, |11⟩.
    let mut pair_ops: Vec<(OperatorLabel, [[f64; 4]; 4])> = Vec::new();
    match resolution {
        EmitterResolution::PerAtom => {
            let mut lower1 = [[0.0; 4]; 4];
            lower1[0][2] = s0;
            lower1[1][3] = s0;
            let mut lower2 = [[0.0; 4]; 4];
            lower2[0][1] = s0;
            lower2[2][3] = s0;
            pair_ops.push((OperatorLabel::ResetAtomic0 { atom: Some(0) }, lower1));
            pair_ops.push((OperatorLabel::ResetAtomic0 { atom: Some(1) }, lower2));
            pair_ops.push((OperatorLabel::ResetAtomic1 { atom: Some(0) }, diag([0.0, 0.0, s1, s1])));
            pair_ops.push((OperatorLabel::ResetAtomic1 { atom: Some(1) }, diag([0.0, s1, 0.0, s1])));
        }
        EmitterResolution::Collective => {
            let mut lower = [[0.0; 4]; 4];
            lower[0][1] = s0;
            lower[0][2] = s0;
            lower[1][3] = s0;
            lower[2][3] = s0;
            pair_ops.push((OperatorLabel::ResetAtomic0 { atom: None }, lower));
            pair_ops.push((OperatorLabel::ResetAtomic1 { atom: None }, diag([0.0, s1, s1, 2.0 * s1])));
        }
    }
    pair_ops.push((OperatorLabel::ResetCavity, diag([0.0, k2, k1, k1 + k2])));

    let dim = basis.dim();
    Ok(pair_ops
        .into_iter()
        .map(|(label, m)| {
            let full = DMatrix::from_fn(dim, dim, |row, col| {
                if row / 4 == col / 4 {
                    C64::new(m[row % 4][col % 4], 0.0)
                } else {
                    ZERO
                }
            });
            OperatorMatrix::new(label, full)
        })
        .collect())
}

fn diag(d: [f64; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        m[i][i] = d[i];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{StateVector, Subspace};
    use approx::assert_relative_eq;

    fn fig3() -> SystemParams {
        SystemParams::symmetric(1.0, 1.0, 50.0, 0.05, 0.05)
    }

    #[test]
    fn rates_from_parameters() {
        let r = effective_rates(&fig3()).unwrap();
        assert_relative_eq!(r.delta_eff, 5e-3, max_relative = 1e-14);
        assert_relative_eq!(r.gamma_eff, 1e-5, max_relative = 1e-14);
        assert_relative_eq!(r.kappa_eff, 4e-4, max_relative = 1e-14);
        assert_relative_eq!(r.coop, 10.0, max_relative = 1e-14);
        assert_relative_eq!(r.gamma_eff_0 + r.gamma_eff_1, r.gamma_eff, max_relative = 1e-14);
        assert_eq!(r.kappa_eff_1, r.kappa_eff_2);
        assert_eq!(r.kappa_eff_1, r.kappa_eff);

        let m = r.markov;
        assert_relative_eq!(m.gamma_ll, 5e-6, max_relative = 1e-12);
        assert_relative_eq!(m.gamma_ld, 5e-6, max_relative = 1e-12);
        assert_relative_eq!(m.gamma_hl, 1e-5, max_relative = 1e-12);
        assert_relative_eq!(m.gamma_hh, 1e-5, max_relative = 1e-12);
        assert_relative_eq!(m.kappa_l, 4e-4, max_relative = 1e-12);
        assert_relative_eq!(m.kappa_h, 1.6e-3, max_relative = 1e-12);
        // κ_H = 16 C γ_HH for equal branching.
        assert_relative_eq!(m.kappa_h, 16.0 * r.coop * m.gamma_hh, max_relative = 1e-12);
    }

    #[test]
    fn zero_detuning_is_singular() {
        let p = SystemParams { delta: 0.0, ..fig3() };
        assert_eq!(effective_rates(&p), Err(Error::SingularDetuning));
    }

    #[test]
    fn unequal_couplings() {
        let p = SystemParams { g1: 1.2, g2: 0.8, ..fig3() };
        let r = effective_rates(&p).unwrap();
        assert_relative_eq!(r.kappa_eff_1, 1.44 * 4e-4, max_relative = 1e-12);
        assert_relative_eq!(r.kappa_eff_2, 0.64 * 4e-4, max_relative = 1e-12);
        assert_relative_eq!(r.kappa_eff, 0.5 * (1.44 + 0.64) * 4e-4, max_relative = 1e-12);
    }

    #[test]
    fn from_cooperativity_matches_physical_rates() {
        let phys = effective_rates(&fig3()).unwrap();
        let scaled = EffectiveRates::from_cooperativity(10.0, 0.5, 1.0).unwrap();
        let ratio = phys.gamma_eff;
        assert_relative_eq!(scaled.kappa_eff * ratio, phys.kappa_eff, max_relative = 1e-12);
        assert_relative_eq!(scaled.markov.kappa_h * ratio, phys.markov.kappa_h, max_relative = 1e-12);
        assert_relative_eq!(scaled.markov.gamma_hl * ratio, phys.markov.gamma_hl, max_relative = 1e-12);
    }

    #[test]
    fn hamiltonian_damping() {
        let r = effective_rates(&fig3()).unwrap();
        let h = build_effective_hamiltonian(&r, 0).unwrap();
        assert!(h.is_diagonal());
        assert_eq!(h.matrix[(0, 0)], ZERO);
        assert_relative_eq!(-2.0 * h.matrix[(3, 3)].im, 2.0 * r.gamma_eff + 4.0 * r.kappa_eff, max_relative = 1e-12);
        assert_relative_eq!(-2.0 * h.matrix[(1, 1)].im, r.gamma_eff + r.kappa_eff, max_relative = 1e-12);

        let r = r.with_asymmetry(1.0).unwrap();
        let h = build_effective_hamiltonian(&r, 0).unwrap();
        assert_relative_eq!(-2.0 * h.matrix[(1, 1)].im, r.gamma_eff, max_relative = 1e-12);
    }

    #[test]
    fn cavity_reset_rates() {
        let r = effective_rates(&fig3()).unwrap();
        for res in [EmitterResolution::PerAtom, EmitterResolution::Collective] {
            let ops = build_effective_resets(&r, 0, res).unwrap();
            let cav = ops.iter().find(|o| o.label == OperatorLabel::ResetCavity).unwrap();
            assert_relative_eq!(cav.rate(&StateVector::basis(4, 3)), 4.0 * r.kappa_eff, max_relative = 1e-12);
            assert_relative_eq!(cav.rate(&StateVector::basis(4, 1)), r.kappa_eff, max_relative = 1e-12);
            for op in &ops {
                assert_eq!(op.rate(&StateVector::basis(4, 0)), 0.0);
            }
        }
    }

    fn sector(i: usize) -> Subspace {
        Subspace::of_levels((i % 4) / 2, i % 2).unwrap()
    }

    #[test]
    fn resets_respect_subspace_structure() {
        let r = effective_rates(&fig3()).unwrap();
        for res in [EmitterResolution::PerAtom, EmitterResolution::Collective] {
            for op in build_effective_resets(&r, 1, res).unwrap() {
                for col in 0..8 {
                    for row in 0..8 {
                        if op.matrix[(row, col)] == ZERO {
                            continue;
                        }
                        let (from, to) = (sector(col), sector(row));
                        match op.label {
                            OperatorLabel::ResetAtomic0 { .. } => assert!(matches!(
                                (from, to),
                                (Subspace::H, Subspace::L) | (Subspace::L, Subspace::D)
                            )),
                            _ => assert_eq!(from, to),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn per_atom_norm_flux() {
        let p = SystemParams { g1: 1.3, g2: 0.7, gamma0: 0.02, gamma1: 0.09, ..fig3() };
        let r = effective_rates(&p).unwrap();
        let h = build_effective_hamiltonian(&r, 1).unwrap();
        let ops = build_effective_resets(&r, 1, EmitterResolution::PerAtom).unwrap();
        let mut sum = DMatrix::from_element(8, 8, ZERO);
        for op in &ops {
            sum += op.matrix.adjoint() * &op.matrix;
        }
        let anti = (&h.matrix - h.matrix.adjoint()) * C64::new(0.0, 1.0);
        assert!((sum - anti).norm() < 1e-18);
    }
}
