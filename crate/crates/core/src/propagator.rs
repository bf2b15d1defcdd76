//! No-jump propagation `ψ(t) = exp(-iHt) ψ(0)` for non-Hermitian `H`.
//!
//! `H` is split into the connected components of its sparsity pattern.
//! Each block is diagonalized once through a complex Schur decomposition;
//! when that fails the reconstruction check, the whole propagator falls back
//! to fixed-step fourth-order Runge–Kutta.

use nalgebra::{DMatrix, DVector};

use crate::basis::{OperatorMatrix, StateVector, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Largest number of Runge–Kutta steps allowed for a single evolution.
const MAX_RK4_STEPS: f64 = 1e8;
/// Relative reconstruction error above which a block decomposition is rejected.
const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    eigenvalues: DVector<C64>,
    vectors: DMatrix<C64>,
    inverse: DMatrix<C64>,
}

#[derive(Debug, Clone)]
enum Kind {
    Spectral(Vec<Block>),
    Rk4 { h: DMatrix<C64>, dt: f64 },
}

/// Precomputed exponential of a conditional Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    kind: Kind,
    /// Smallest nonzero decay rate `-2 Im λ` over all modes, if any.
    slowest_decay: Option<f64>,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Self {
        match spectral_blocks(&h.matrix) {
            Some(blocks) => {
                let slowest_decay = blocks
                    .iter()
                    .flat_map(|b| b.eigenvalues.iter())
                    .map(|l| -2.0 * l.im)
                    .filter(|&g| g > decay_floor(&h.matrix))
                    .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))));
                Propagator {
                    dim: h.dim(),
                    kind: Kind::Spectral(blocks),
                    slowest_decay,
                }
            }
            None => {
                log::warn!("eigendecomposition of the conditional Hamiltonian failed; using Runge-Kutta integration");
                Self::runge_kutta(h)
            }
        }
    }

    /// Forces fixed-step integration with `dt = 0.02 / ‖H‖`.
    pub fn runge_kutta(h: &OperatorMatrix) -> Self {
        let norm = row_sum_norm(&h.matrix).max(f64::MIN_POSITIVE);
        Propagator {
            dim: h.dim(),
            kind: Kind::Rk4 {
                h: h.matrix.clone(),
                dt: 0.02 / norm,
            },
            slowest_decay: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.kind, Kind::Spectral(_))
    }

    /// Evolves `state` for time `t` without normalizing.
    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(Error::invalid("t", format!("evolution time must be >= 0, got {t}")));
        }
        let mut seg = Segment::new(self, state);
        seg.state_at(t)
    }
}

fn row_sum_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn decay_floor(m: &DMatrix<C64>) -> f64 {
    1e-13 * row_sum_norm(m).max(f64::MIN_POSITIVE)
}

/// Connected components of the undirected graph of nonzero couplings.
fn components(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..n {
        for c in 0..n {
            if r != c && m[(r, c)] != ZERO {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

fn spectral_blocks(h: &DMatrix<C64>) -> Option<Vec<Block>> {
    components(h)
        .into_iter()
        .map(|indices| {
            let k = indices.len();
            let sub = DMatrix::from_fn(k, k, |r, c| h[(indices[r], indices[c])]);
            if k == 1 {
                return Some(Block {
                    indices,
                    eigenvalues: DVector::from_element(1, sub[(0, 0)]),
                    vectors: DMatrix::from_element(1, 1, ONE),
                    inverse: DMatrix::from_element(1, 1, ONE),
                });
            }
            let (eigenvalues, vectors, inverse) = diagonalize(&sub)?;
            Some(Block {
                indices,
                eigenvalues,
                vectors,
                inverse,
            })
        })
        .collect()
}

/// `A = V diag(λ) V⁻¹` from the Schur form, or `None` if ill-conditioned.
fn diagonalize(a: &DMatrix<C64>) -> Option<(DVector<C64>, DMatrix<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    let (q, t) = a.clone().try_schur(1e-15, 10_000)?.unpack();
    let scale = row_sum_norm(a).max(f64::MIN_POSITIVE);
    let smin = 1e-14 * scale;
    let mut x = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in (j + 1)..=k {
                acc += t[(j, l)] * x[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < smin {
                denom = C64::new(smin, 0.0);
            }
            x[(j, k)] = -acc / denom;
        }
    }
    let mut v = q * x;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
    }
    let inv = v.clone().try_inverse()?;
    let lambda = t.diagonal();
    let recon = &v * DMatrix::from_diagonal(&lambda) * &inv;
    let err = (recon - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    let ident = (&inv * &v - DMatrix::identity(n, n)).norm();
    if !(err <= RECONSTRUCTION_TOL && ident <= RECONSTRUCTION_TOL) {
        log::debug!("block diagonalization rejected: reconstruction {err:e}, identity {ident:e}");
        return None;
    }
    Some((lambda, v, inv))
}

/// Evolution from a fixed initial state, queried at arbitrary times.
pub(crate) struct Segment<'a> {
    prop: &'a Propagator,
    /// Spectral: modal coefficients per block. Runge–Kutta: the initial state.
    coeffs: Vec<DVector<C64>>,
    initial: StateVector,
    /// Number of norm evaluations or integrator steps performed.
    pub steps: u64,
}

impl<'a> Segment<'a> {
    pub(crate) fn new(prop: &'a Propagator, initial: &StateVector) -> Self {
        let coeffs = match &prop.kind {
            Kind::Spectral(blocks) => blocks
                .iter()
                .map(|b| {
                    let local = DVector::from_fn(b.indices.len(), |i, _| initial.amps()[b.indices[i]]);
                    &b.inverse * local
                })
                .collect(),
            Kind::Rk4 { .. } => Vec::new(),
        };
        Segment {
            prop,
            coeffs,
            initial: initial.clone(),
            steps: 0,
        }
    }

    pub(crate) fn state_at(&mut self, t: f64) -> Result<StateVector> {
        self.steps += 1;
        match &self.prop.kind {
            Kind::Spectral(blocks) => {
                let mut out = DVector::from_element(self.prop.dim, ZERO);
                for (b, c) in blocks.iter().zip(&self.coeffs) {
                    let phased = DVector::from_fn(c.len(), |i, _| c[i] * phase(b.eigenvalues[i], t));
                    let local = &b.vectors * phased;
                    for (i, &idx) in b.indices.iter().enumerate() {
                        out[idx] = local[i];
                    }
                }
                Ok(StateVector::new(out))
            }
            Kind::Rk4 { h, dt } => {
                let n = (t / dt).ceil();
                if n > MAX_RK4_STEPS {
                    return Err(Error::StepSizeUnderflow { steps: n, duration: t });
                }
                let n = n as u64;
                self.steps += n;
                let mut psi = self.initial.amps().clone();
                if n > 0 {
                    let h_step = t / n as f64;
                    for _ in 0..n {
                        psi = rk4_step(h, &psi, h_step);
                    }
                }
                Ok(StateVector::new(psi))
            }
        }
    }

    pub(crate) fn norm_at(&mut self, t: f64) -> Result<f64> {
        match &self.prop.kind {
            Kind::Spectral(blocks) => {
                self.steps += 1;
                let mut total = 0.0;
                for (b, c) in blocks.iter().zip(&self.coeffs) {
                    let phased = DVector::from_fn(c.len(), |i, _| c[i] * phase(b.eigenvalues[i], t));
                    total += (&b.vectors * phased).norm_squared();
                }
                Ok(total)
            }
            Kind::Rk4 { .. } => Ok(self.state_at(t)?.norm_sqr()),
        }
    }

    /// First time in `(0, limit]` at which the squared norm falls to `target`,
    /// or `None` if it stays above it. `limit = ∞` is allowed for spectral
    /// propagation.
    pub(crate) fn time_of_norm(&mut self, target: f64, limit: f64) -> Result<Option<f64>> {
        match &self.prop.kind {
            Kind::Spectral(_) => self.spectral_time_of_norm(target, limit),
            Kind::Rk4 { .. } => self.rk4_time_of_norm(target, limit),
        }
    }

    fn spectral_time_of_norm(&mut self, target: f64, limit: f64) -> Result<Option<f64>> {
        let hi = if limit.is_finite() {
            if self.norm_at(limit)? > target {
                return Ok(None);
            }
            limit
        } else {
            let Some(slowest) = self.prop.slowest_decay else {
                return Ok(None);
            };
            // Beyond ~60 slowest lifetimes every decaying mode is gone.
            let horizon = 60.0 / slowest;
            if self.norm_at(horizon)? > target {
                return Ok(None);
            }
            let mut hi = horizon;
            let mut probe = horizon;
            while probe > 1e-300 {
                probe *= 0.5;
                if self.norm_at(probe)? > target {
                    break;
                }
                hi = probe;
            }
            hi
        };
        Ok(Some(self.bisect(0.0, hi, target)?))
    }

    fn rk4_time_of_norm(&mut self, target: f64, limit: f64) -> Result<Option<f64>> {
        let Kind::Rk4 { h, dt } = &self.prop.kind else {
            unreachable!()
        };
        if !limit.is_finite() {
            return Err(Error::Numerical(
                "an unbounded evolution window needs spectral propagation".into(),
            ));
        }
        let n = (limit / dt).ceil();
        if n > MAX_RK4_STEPS {
            return Err(Error::StepSizeUnderflow { steps: n, duration: limit });
        }
        let n = (n as u64).max(1);
        let step = limit / n as f64;
        let mut psi = self.initial.amps().clone();
        for k in 0..n {
            let next = rk4_step(h, &psi, step);
            self.steps += 1;
            if next.norm_squared() <= target {
                let t0 = k as f64 * step;
                let mut lo = 0.0;
                let mut hi = step;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let value = rk4_step(h, &psi, mid).norm_squared();
                    self.steps += 1;
                    if (value - target).abs() <= 1e-10 * target || hi - lo <= 1e-15 * (t0 + hi) {
                        return Ok(Some(t0 + mid));
                    }
                    if value > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(Some(t0 + 0.5 * (lo + hi)));
            }
            psi = next;
        }
        Ok(None)
    }

    fn bisect(&mut self, mut lo: f64, mut hi: f64, target: f64) -> Result<f64> {
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let value = self.norm_at(mid)?;
            if (value - target).abs() <= 1e-10 * target {
                return Ok(mid);
            }
            if value > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

fn phase(lambda: C64, t: f64) -> C64 {
    (C64::new(0.0, -t) * lambda).exp()
}

fn rk4_step(h: &DMatrix<C64>, psi: &DVector<C64>, dt: f64) -> DVector<C64> {
    let mi = C64::new(0.0, -1.0);
    let f = |v: &DVector<C64>| (h * v) * mi;
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let k1 = f(psi);
    let k2 = f(&(psi + &k1 * half));
    let k3 = f(&(psi + &k2 * half));
    let k4 = f(&(psi + &k3 * full));
    psi + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

/// `exp(-iHt)·state` (unnormalized).
pub fn evolve_no_jump(state: &StateVector, h: &OperatorMatrix, t: f64) -> Result<StateVector> {
    Propagator::new(h).evolve(state, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisIndex, FullBasis, OperatorLabel};
    use crate::model::build_conditional_hamiltonian;
    use crate::params::SystemParams;

    fn fig3() -> SystemParams {
        SystemParams::symmetric(1.0, 1.0, 50.0, 0.1, 0.1)
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_conditional_hamiltonian(&fig3(), 0).unwrap();
        let psi = StateVector::from_vec((0..h.dim()).map(|i| C64::new(i as f64, 1.0)).collect());
        let out = evolve_no_jump(&psi, &h, 0.0).unwrap();
        assert!((out.amps() - psi.amps()).norm() < 1e-10 * psi.amps().norm());
    }

    #[test]
    fn full_model_blocks_diagonalize() {
        let h = build_conditional_hamiltonian(&fig3(), 0).unwrap();
        let p = Propagator::new(&h);
        assert!(p.is_spectral());
        let Kind::Spectral(blocks) = &p.kind else { unreachable!() };
        let mut sizes: Vec<usize> = blocks.iter().map(|b| b.indices.len()).collect();
        sizes.sort();
        assert_eq!(*sizes.last().unwrap(), 16);
    }

    #[test]
    fn dark_state_is_stationary() {
        let p = fig3();
        let h = build_conditional_hamiltonian(&p, 0).unwrap();
        let b = FullBasis::new(0, p.n_max).unwrap();
        let psi = StateVector::basis(b.dim(), b.flat(BasisIndex { spectators: 0, j: 0, k: 0, n: 0 }));
        for t in [1.0, 1e3, 1e5] {
            let out = evolve_no_jump(&psi, &h, t).unwrap();
            assert!((out.amps() - psi.amps()).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_matches_runge_kutta() {
        let p = fig3();
        let h = build_conditional_hamiltonian(&p, 0).unwrap();
        let b = FullBasis::new(0, p.n_max).unwrap();
        let mut psi = StateVector::basis(b.dim(), b.flat(BasisIndex { spectators: 0, j: 1, k: 1, n: 0 }));
        psi.amps_mut()[b.flat(BasisIndex { spectators: 0, j: 0, k: 1, n: 0 })] = C64::new(0.0, 1.0);
        let psi = psi.normalized().unwrap();
        let spectral = Propagator::new(&h);
        let rk = Propagator::runge_kutta(&h);
        for t in [0.3, 5.0, 40.0] {
            let a = spectral.evolve(&psi, t).unwrap();
            let c = rk.evolve(&psi, t).unwrap();
            assert!((a.amps() - c.amps()).norm() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn norm_is_non_increasing() {
        let h = build_conditional_hamiltonian(&fig3(), 0).unwrap();
        let psi = StateVector::from_vec((0..h.dim()).map(|i| C64::new((i % 7) as f64, (i % 3) as f64)).collect())
            .normalized()
            .unwrap();
        let p = Propagator::new(&h);
        let mut last = 1.0 + 1e-12;
        for k in 0..50 {
            let n = p.evolve(&psi, k as f64 * 3.0).unwrap().norm_sqr();
            assert!(n <= last + 1e-12);
            last = n;
        }
    }

    #[test]
    fn negative_time_rejected() {
        let h = OperatorMatrix::new(OperatorLabel::Hamiltonian, DMatrix::from_element(1, 1, ZERO));
        assert!(Propagator::new(&h).evolve(&StateVector::basis(1, 0), -1.0).is_err());
    }

    #[test]
    fn rk4_step_cap() {
        let h = build_conditional_hamiltonian(&fig3(), 0).unwrap();
        let rk = Propagator::runge_kutta(&h);
        let psi = StateVector::basis(h.dim(), 0);
        assert!(matches!(rk.evolve(&psi, 1e9), Err(Error::StepSizeUnderflow { .. })));
    }

    #[test]
    fn time_of_norm_on_diagonal() {
        let h = OperatorMatrix::new(
            OperatorLabel::Hamiltonian,
            DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, -0.5), ZERO])),
        );
        let p = Propagator::new(&h);
        let psi = StateVector::from_real(&[0.8f64.sqrt(), 0.2f64.sqrt()]);
        let mut seg = Segment::new(&p, &psi);
        // norm² = 0.2 + 0.8 e^{-t}
        let t = seg.time_of_norm(0.6, f64::INFINITY).unwrap().unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-9);
        assert_eq!(seg.time_of_norm(0.1, f64::INFINITY).unwrap(), None);
        assert_eq!(seg.time_of_norm(0.6, 0.5).unwrap(), None);
    }
}
