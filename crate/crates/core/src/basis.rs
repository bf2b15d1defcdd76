//! Basis bookkeeping, state vectors and operator matrices.
//!
//! Two registers are supported. The full register is
//! `spectators ⊗ atom1 ⊗ atom2 ⊗ cavity` with three atomic levels and a
//! truncated Fock space; the effective register keeps only the atomic ground
//! states `spectators ⊗ atom1 ⊗ atom2` with two levels each. Spectator
//! qubits are stored most-significant first.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Largest dense dimension the model constructors will allocate.
pub const DEFAULT_MAX_DIM: usize = 2048;

/// One basis state of the full register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    /// Spectator qubit values as a bit pattern, first spectator most significant.
    pub spectators: usize,
    /// Level of atom 1 (0, 1 or 2).
    pub j: usize,
    /// Level of atom 2 (0, 1 or 2).
    pub k: usize,
    /// Cavity photon number.
    pub n: usize,
}

/// Layout of the full register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullBasis {
    pub spectators: usize,
    pub n_max: usize,
}

impl FullBasis {
    pub fn new(spectators: usize, n_max: usize) -> Result<Self> {
        Self::with_cap(spectators, n_max, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(spectators: usize, n_max: usize, cap: usize) -> Result<Self> {
        let dim = if spectators >= 32 {
            None
        } else {
            (1usize << spectators)
                .checked_mul(9)
                .and_then(|d| d.checked_mul(n_max.checked_add(1)?))
        };
        match dim {
            Some(dim) if dim <= cap => Ok(FullBasis { spectators, n_max }),
            Some(dim) => Err(Error::Capacity { dim, cap }),
            None => Err(Error::Capacity { dim: usize::MAX, cap }),
        }
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        (1 << self.spectators) * 9 * self.fock_dim()
    }

    pub fn flat(&self, idx: BasisIndex) -> usize {
        debug_assert!(idx.j < 3 && idx.k < 3 && idx.n <= self.n_max);
        ((idx.spectators * 9 + 3 * idx.j + idx.k) * self.fock_dim()) + idx.n
    }

    pub fn index(&self, flat: usize) -> BasisIndex {
        let n = flat % self.fock_dim();
        let rest = flat / self.fock_dim();
        BasisIndex {
            spectators: rest / 9,
            j: (rest % 9) / 3,
            k: rest % 3,
            n,
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = BasisIndex> + '_ {
        (0..self.dim()).map(move |f| self.index(f))
    }
}

/// Layout of the effective (atomic ground-state) register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundBasis {
    pub spectators: usize,
}

impl GroundBasis {
    pub fn new(spectators: usize) -> Result<Self> {
        let dim = 4usize.checked_shl(spectators as u32).filter(|_| spectators < 32);
        match dim {
            Some(d) if d <= DEFAULT_MAX_DIM => Ok(GroundBasis { spectators }),
            Some(d) => Err(Error::Capacity { dim: d, cap: DEFAULT_MAX_DIM }),
            None => Err(Error::Capacity { dim: usize::MAX, cap: DEFAULT_MAX_DIM }),
        }
    }

    pub fn dim(&self) -> usize {
        4 << self.spectators
    }

    /// Flat index of `|spectators; j k⟩` with `j, k ∈ {0, 1}`.
    pub fn flat(&self, spectators: usize, j: usize, k: usize) -> usize {
        spectators * 4 + 2 * j + k
    }

    /// `(spectators, j, k)` of a flat index.
    pub fn split(&self, flat: usize) -> (usize, usize, usize) {
        (flat / 4, (flat % 4) / 2, flat % 2)
    }
}

/// The three parity sectors of the in-cavity atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    /// `|00⟩`
    D,
    /// `span{|01⟩, |10⟩}`
    L,
    /// `|11⟩`
    H,
}

impl Subspace {
    pub const ALL: [Subspace; 3] = [Subspace::D, Subspace::L, Subspace::H];

    /// Sector of a ground-state pair, `None` if either atom is excited.
    pub fn of_levels(j: usize, k: usize) -> Option<Subspace> {
        match (j, k) {
            (0, 0) => Some(Subspace::D),
            (0, 1) | (1, 0) => Some(Subspace::L),
            (1, 1) => Some(Subspace::H),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Subspace::D => "D",
            Subspace::L => "L",
            Subspace::H => "H",
        }
    }
}

/// Which register a model acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Register {
    Full(FullBasis),
    Effective(GroundBasis),
}

impl Register {
    pub fn dim(&self) -> usize {
        match self {
            Register::Full(b) => b.dim(),
            Register::Effective(b) => b.dim(),
        }
    }

    pub fn spectators(&self) -> usize {
        match self {
            Register::Full(b) => b.spectators,
            Register::Effective(b) => b.spectators,
        }
    }

    /// Dimension of the matching ground register.
    pub fn ground_dim(&self) -> usize {
        4 << self.spectators()
    }

    /// For each flat index: `(ground flat index, photon number)` when both
    /// in-cavity atoms are in a ground level, `None` otherwise.
    fn ground_projection(&self, flat: usize) -> Option<(usize, usize)> {
        match self {
            Register::Full(b) => {
                let idx = b.index(flat);
                (idx.j < 2 && idx.k < 2).then(|| (idx.spectators * 4 + 2 * idx.j + idx.k, idx.n))
            }
            Register::Effective(_) => Some((flat, 0)),
        }
    }

    pub(crate) fn levels(&self, flat: usize) -> (usize, usize) {
        match self {
            Register::Full(b) => {
                let idx = b.index(flat);
                (idx.j, idx.k)
            }
            Register::Effective(b) => {
                let (_, j, k) = b.split(flat);
                (j, k)
            }
        }
    }

    /// Probabilities of the D, L and H sectors (summed over spectators and
    /// photon numbers) for the normalized version of `state`.
    pub fn subspace_populations(&self, state: &StateVector) -> [f64; 3] {
        let mut pops = [0.0; 3];
        for (flat, a) in state.amps().iter().enumerate() {
            let (j, k) = self.levels(flat);
            if let Some(s) = Subspace::of_levels(j, k) {
                pops[s as usize] += a.norm_sqr();
            }
        }
        let total = state.norm_sqr();
        if total > 0.0 {
            pops.iter_mut().for_each(|p| *p /= total);
        }
        pops
    }

    /// Population with at least one in-cavity atom in the excited level.
    pub fn excited_population(&self, state: &StateVector) -> f64 {
        let total = state.norm_sqr();
        let excited: f64 = state
            .amps()
            .iter()
            .enumerate()
            .filter(|(flat, _)| {
                let (j, k) = self.levels(*flat);
                j == 2 || k == 2
            })
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if total > 0.0 {
            excited / total
        } else {
            0.0
        }
    }

    /// Population in the highest retained Fock state (zero for the
    /// effective register).
    pub fn top_fock_population(&self, state: &StateVector) -> f64 {
        match self {
            Register::Full(b) => {
                let total = state.norm_sqr();
                let top: f64 = state
                    .amps()
                    .iter()
                    .enumerate()
                    .filter(|(f, _)| b.index(*f).n == b.n_max)
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                if total > 0.0 {
                    top / total
                } else {
                    0.0
                }
            }
            Register::Effective(_) => 0.0,
        }
    }

    /// Places a ground-register state into this register (cavity in vacuum).
    pub fn embed_ground(&self, ground: &StateVector) -> Result<StateVector> {
        if ground.dim() != self.ground_dim() {
            return Err(Error::invalid(
                "state",
                format!("expected ground dimension {}, got {}", self.ground_dim(), ground.dim()),
            ));
        }
        match self {
            Register::Effective(_) => Ok(ground.clone()),
            Register::Full(b) => {
                let mut amps = DVector::from_element(b.dim(), ZERO);
                for (g, a) in ground.amps().iter().enumerate() {
                    let (s, j, k) = (g / 4, (g % 4) / 2, g % 2);
                    amps[b.flat(BasisIndex { spectators: s, j, k, n: 0 })] = *a;
                }
                Ok(StateVector::new(amps))
            }
        }
    }

    /// Fidelity `⟨target|ρ_atoms|target⟩` of the atomic register with the
    /// cavity traced out. `target` lives on the ground register and both
    /// states are normalized first.
    pub fn fidelity(&self, state: &StateVector, target: &StateVector) -> f64 {
        let fock = match self {
            Register::Full(b) => b.fock_dim(),
            Register::Effective(_) => 1,
        };
        let mut overlaps = vec![ZERO; fock];
        for (flat, a) in state.amps().iter().enumerate() {
            if let Some((g, n)) = self.ground_projection(flat) {
                overlaps[n] += target.amps()[g].conj() * a;
            }
        }
        let norm = state.norm_sqr() * target.norm_sqr();
        if norm == 0.0 {
            return 0.0;
        }
        (overlaps.iter().map(|o| o.norm_sqr()).sum::<f64>() / norm).clamp(0.0, 1.0)
    }

    /// Ideal π-pulse: swaps levels 0 and 1 of both in-cavity atoms, leaves
    /// the excited level, the cavity and the spectators untouched.
    pub fn pi_pulse(&self, state: &StateVector) -> StateVector {
        let swap = |l: usize| match l {
            0 => 1,
            1 => 0,
            other => other,
        };
        let excited = self.excited_population(state);
        if excited > 1e-6 {
            static WARNED: AtomicBool = AtomicBool::new(false);
            if !WARNED.swap(true, Ordering::Relaxed) {
                log::warn!("π-pulse applied with excited population {excited:e}; excited level left unchanged");
            } else {
                log::debug!("π-pulse applied with excited population {excited:e}");
            }
        }
        let mut out = DVector::from_element(state.dim(), ZERO);
        for (flat, a) in state.amps().iter().enumerate() {
            let target = match self {
                Register::Full(b) => {
                    let mut idx = b.index(flat);
                    idx.j = swap(idx.j);
                    idx.k = swap(idx.k);
                    b.flat(idx)
                }
                Register::Effective(b) => {
                    let (s, j, k) = b.split(flat);
                    b.flat(s, swap(j), swap(k))
                }
            };
            out[target] = *a;
        }
        StateVector::new(out)
    }
}

/// Complex amplitudes over a flat basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Self {
        StateVector(amps)
    }

    pub fn from_vec(amps: Vec<C64>) -> Self {
        StateVector(DVector::from_vec(amps))
    }

    pub fn from_real(amps: &[f64]) -> Self {
        StateVector(DVector::from_iterator(amps.len(), amps.iter().map(|&x| C64::new(x, 0.0))))
    }

    /// Computational basis vector.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn amps_mut(&mut self) -> &mut DVector<C64> {
        &mut self.0
    }

    pub fn into_inner(self) -> DVector<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        Ok(StateVector(&self.0 / C64::new(n.sqrt(), 0.0)))
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Squared overlap of the normalized states.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        let denom = self.norm_sqr() * other.norm_sqr();
        if denom == 0.0 {
            return 0.0;
        }
        (self.inner(other).norm_sqr() / denom).clamp(0.0, 1.0)
    }
}

/// What an operator matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorLabel {
    Hamiltonian,
    /// Emission on the 2–0 transition; `atom` is set for single-atom channels.
    ResetAtomic0 { atom: Option<usize> },
    /// Emission on the 2–1 transition.
    ResetAtomic1 { atom: Option<usize> },
    ResetCavity,
}

/// Dense complex operator with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub label: OperatorLabel,
    pub matrix: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(label: OperatorLabel, matrix: DMatrix<C64>) -> Self {
        OperatorMatrix { label, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        StateVector(&self.matrix * state.amps())
    }

    /// Emission probability density `‖R ψ‖²`.
    pub fn rate(&self, state: &StateVector) -> f64 {
        (&self.matrix * state.amps()).norm_squared()
    }

    pub fn is_diagonal(&self) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == ZERO))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn full_index_round_trips(spectators in 0usize..3, n_max in 1usize..5, seed in 0usize..10_000) {
            let b = FullBasis::new(spectators, n_max).unwrap();
            let flat = seed % b.dim();
            let idx = b.index(flat);
            prop_assert_eq!(b.flat(idx), flat);
            prop_assert_eq!(flat, ((idx.spectators * 9 + 3 * idx.j + idx.k) * (n_max + 1)) + idx.n);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(FullBasis::new(20, 3), Err(Error::Capacity { .. })));
        assert!(matches!(FullBasis::with_cap(0, 3, 10), Err(Error::Capacity { dim: 36, cap: 10 })));
        assert!(GroundBasis::new(40).is_err());
    }

    #[test]
    fn subspace_projectors_sum_to_one() {
        let reg = Register::Effective(GroundBasis::new(1).unwrap());
        let psi = StateVector::from_real(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let pops = reg.subspace_populations(&psi);
        assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let norm = psi.norm_sqr();
        assert!((pops[0] - (0.01 + 0.25) / norm).abs() < 1e-14);
        assert!((pops[2] - (0.16 + 0.64) / norm).abs() < 1e-14);
    }

    #[test]
    fn pi_pulse_swaps_ground_levels() {
        let reg = Register::Effective(GroundBasis::new(0).unwrap());
        let psi = StateVector::basis(4, 1); // |01⟩
        assert_eq!(reg.pi_pulse(&psi), StateVector::basis(4, 2));
        let psi = StateVector::basis(4, 0); // |00⟩
        assert_eq!(reg.pi_pulse(&psi), StateVector::basis(4, 3));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[0.0, s, s, 0.0]);
        assert_eq!(reg.pi_pulse(&bell), bell);
    }

    #[test]
    fn pi_pulse_leaves_spectators_and_excited_alone() {
        let b = FullBasis::new(1, 2).unwrap();
        let reg = Register::Full(b);
        let from = b.flat(BasisIndex { spectators: 1, j: 2, k: 0, n: 1 });
        let to = b.flat(BasisIndex { spectators: 1, j: 2, k: 1, n: 1 });
        let out = reg.pi_pulse(&StateVector::basis(b.dim(), from));
        assert_eq!(out, StateVector::basis(b.dim(), to));
    }

    #[test]
    fn fidelity_traces_out_cavity() {
        let b = FullBasis::new(0, 2).unwrap();
        let reg = Register::Full(b);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[0.0, s, s, 0.0]);
        let mut amps = DVector::from_element(b.dim(), ZERO);
        // |01;0⟩ + |10;1⟩: no coherence between the two branches once the cavity is traced out.
        amps[b.flat(BasisIndex { spectators: 0, j: 0, k: 1, n: 0 })] = C64::new(s, 0.0);
        amps[b.flat(BasisIndex { spectators: 0, j: 1, k: 0, n: 1 })] = C64::new(s, 0.0);
        let f = reg.fidelity(&StateVector::new(amps), &bell);
        assert!((f - 0.5).abs() < 1e-14);
        let embedded = reg.embed_ground(&bell).unwrap();
        assert!((reg.fidelity(&embedded, &bell) - 1.0).abs() < 1e-14);
    }
}
