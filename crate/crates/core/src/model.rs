//! Full atom-cavity model: conditional Hamiltonian and reset operators.
//!
//! Units: `ħ = 1`, rates in units of the cavity decay rate. The Hamiltonian
//! is written in the interaction picture where the laser and the cavity are
//! both detuned by `delta` from the 1–2 transition.

use nalgebra::DMatrix;

use crate::basis::{BasisIndex, FullBasis, OperatorLabel, OperatorMatrix, C64, ZERO};
use crate::error::Result;
use crate::params::SystemParams;

/// How spontaneous emissions from the two atoms are resolved.
///
/// `PerAtom` gives each atom its own reset operator `√Γ_j |j⟩_i⟨2|`. Its
/// jump operators satisfy `Σ R†R = i (H - H†)`, so the unraveling
/// preserves the trace. `Collective` uses the coherent sum over both atoms
/// for each transition; it leaves the no-jump damping unchanged and is kept
/// for comparison with that reset convention.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EmitterResolution {
    #[default]
    PerAtom,
    Collective,
}

/// Builds the conditional (non-Hermitian) Hamiltonian on the full register.
pub fn build_conditional_hamiltonian(params: &SystemParams, spectators: usize) -> Result<OperatorMatrix> {
    params.validate()?;
    let basis = FullBasis::new(spectators, params.n_max)?;
    Ok(conditional_hamiltonian(params, &basis))
}

pub(crate) fn conditional_hamiltonian(params: &SystemParams, basis: &FullBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let mut h = DMatrix::from_element(dim, dim, ZERO);
    let half_omega = C64::new(0.5 * params.omega, 0.0);
    let excited = C64::new(params.delta, -0.5 * params.gamma());
    let couplings = [params.g1, params.g2];

    for col in 0..dim {
        let idx = basis.index(col);
        let levels = [idx.j, idx.k];

        // Damping and detuning.
        let mut diag = C64::new(0.0, -0.5 * params.kappa * idx.n as f64);
        for &l in &levels {
            if l == 2 {
                diag += excited;
            }
        }
        h[(col, col)] = diag;

        for atom in 0..2 {
            let with_level = |level: usize, n: usize| {
                let mut out = idx;
                if atom == 0 {
                    out.j = level;
                } else {
                    out.k = level;
                }
                out.n = n;
                basis.flat(out)
            };
            let g = couplings[atom];
            match levels[atom] {
                1 => {
                    // Laser 1 → 2 and absorption |2⟩⟨1| b.
                    h[(with_level(2, idx.n), col)] += half_omega;
                    if idx.n > 0 {
                        h[(with_level(2, idx.n - 1), col)] += C64::new(g * (idx.n as f64).sqrt(), 0.0);
                    }
                }
                2 => {
                    // Laser 2 → 1 and emission |1⟩⟨2| b†.
                    h[(with_level(1, idx.n), col)] += half_omega;
                    if idx.n < basis.n_max {
                        h[(with_level(1, idx.n + 1), col)] += C64::new(g * ((idx.n + 1) as f64).sqrt(), 0.0);
                    }
                }
                _ => {}
            }
        }
    }
    OperatorMatrix::new(OperatorLabel::Hamiltonian, h)
}

/// Builds the reset operators: atomic channels first (2–0, then 2–1), the
/// cavity channel `√κ b` last.
pub fn build_reset_operators(
    params: &SystemParams,
    spectators: usize,
    resolution: EmitterResolution,
) -> Result<Vec<OperatorMatrix>> {
    params.validate()?;
    let basis = FullBasis::new(spectators, params.n_max)?;
    Ok(reset_operators(params, &basis, resolution))
}

pub(crate) fn reset_operators(
    params: &SystemParams,
    basis: &FullBasis,
    resolution: EmitterResolution,
) -> Vec<OperatorMatrix> {
    let mut ops = Vec::new();
    for (lower, rate) in [(0usize, params.gamma0), (1usize, params.gamma1)] {
        let atom_sets: Vec<(Option<usize>, Vec<usize>)> = match resolution {
            EmitterResolution::PerAtom => vec![(Some(0), vec![0]), (Some(1), vec![1])],
            EmitterResolution::Collective => vec![(None, vec![0, 1])],
        };
        for (atom, atoms) in atom_sets {
            let m = atomic_lowering(basis, lower, &atoms) * C64::new(rate.sqrt(), 0.0);
            let label = if lower == 0 {
                OperatorLabel::ResetAtomic0 { atom }
            } else {
                OperatorLabel::ResetAtomic1 { atom }
            };
            ops.push(OperatorMatrix::new(label, m));
        }
    }
    ops.push(OperatorMatrix::new(
        OperatorLabel::ResetCavity,
        annihilation(basis) * C64::new(params.kappa.sqrt(), 0.0),
    ));
    ops
}

/// `Σ_{i ∈ atoms} |lower⟩_i⟨2|`
fn atomic_lowering(basis: &FullBasis, lower: usize, atoms: &[usize]) -> DMatrix<C64> {
    let dim = basis.dim();
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for col in 0..dim {
        let idx = basis.index(col);
        for &atom in atoms {
            let level = if atom == 0 { idx.j } else { idx.k };
            if level == 2 {
                let mut out: BasisIndex = idx;
                if atom == 0 {
                    out.j = lower;
                } else {
                    out.k = lower;
                }
                m[(basis.flat(out), col)] += C64::new(1.0, 0.0);
            }
        }
    }
    m
}

/// Cavity annihilation operator `b` on the truncated Fock space.
fn annihilation(basis: &FullBasis) -> DMatrix<C64> {
    let dim = basis.dim();
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for col in 0..dim {
        let idx = basis.index(col);
        if idx.n > 0 {
            let out = BasisIndex { n: idx.n - 1, ..idx };
            m[(basis.flat(out), col)] = C64::new((idx.n as f64).sqrt(), 0.0);
        }
    }
    m
}
