//! Exact state-vector algebra for cluster-chain fusion by parity
//! projection, and a size-bookkeeping Monte Carlo for cluster growth.
//!
//! Qubits are numbered from 0; qubit 0 is the most significant bit of the
//! basis index. A linear cluster of length `n` has amplitudes
//! `2^{-n/2} (-1)^{Σ_{i≥1} x_i + Σ_i x_{i-1} x_i}`, i.e. every qubit but the
//! first carries a phase `σ_z` of its predecessor with
//! `σ_z = |1⟩⟨1| - |0⟩⟨0|`. For two qubits this gives
//! `½(|00⟩ - |01⟩ + |10⟩ + |11⟩)`; for three,
//! `2^{-3/2}(|000⟩ - |001⟩ - |010⟩ - |011⟩ + |100⟩ - |101⟩ + |110⟩ + |111⟩)`.
//! Tree clusters generalize this: every node but the root carries
//! `x_i + x_i x_parent(i)`.

use rand::Rng;
use rayon::prelude::*;

use crate::basis::Subspace;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Largest register handled by the state-vector routines.
pub const MAX_QUBITS: usize = 16;

const SPLIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    n: usize,
    amps: Vec<f64>,
    /// `(chain id, position)` of each qubit.
    layout: Vec<(usize, usize)>,
}

fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Capacity {
            dim: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
            cap: 1 << MAX_QUBITS,
        });
    }
    Ok(())
}

impl ClusterState {
    /// Wraps real amplitudes over `2^n` basis states; they must be normalized.
    pub fn from_amps(n: usize, amps: Vec<f64>) -> Result<Self> {
        check_capacity(n)?;
        if amps.len() != 1 << n {
            return Err(Error::invalid("amps", format!("expected {} amplitudes, got {}", 1 << n, amps.len())));
        }
        let norm: f64 = amps.iter().map(|a| a * a).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(ClusterState {
            n,
            amps,
            layout: (0..n).map(|i| (0, i)).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn layout(&self) -> &[(usize, usize)] {
        &self.layout
    }

    fn shift(&self, q: usize) -> usize {
        self.n - 1 - q
    }

    /// Value of qubit `q` in basis state `idx`.
    pub fn bit(&self, idx: usize, q: usize) -> usize {
        (idx >> self.shift(q)) & 1
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::invalid("qubit", format!("qubit {q} out of range for {} qubits", self.n)));
        }
        Ok(())
    }

    /// `self ⊗ other`, with `other`'s qubits appended after `self`'s.
    pub fn tensor(&self, other: &ClusterState) -> Result<ClusterState> {
        let n = self.n + other.n;
        check_capacity(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let offset = self.layout.iter().map(|l| l.0 + 1).max().unwrap_or(0);
        let layout = self
            .layout
            .iter()
            .copied()
            .chain(other.layout.iter().map(|&(c, p)| (c + offset, p)))
            .collect();
        Ok(ClusterState { n, amps, layout })
    }

    /// Squared overlap `|⟨self|other⟩|²`; zero for different sizes.
    pub fn overlap(&self, other: &ClusterState) -> f64 {
        if self.n != other.n {
            return 0.0;
        }
        let dot: f64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a * b).sum();
        dot * dot
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// Applies `σ_z` (up to a global sign) to qubit `q`.
    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let s = self.shift(q);
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if (idx >> s) & 1 == 1 {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Applies the Hadamard gate to qubit `q`.
    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let mask = 1 << self.shift(q);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let (a0, a1) = (self.amps[idx], self.amps[idx | mask]);
                self.amps[idx] = r * (a0 + a1);
                self.amps[idx | mask] = r * (a0 - a1);
            }
        }
        Ok(())
    }

    /// Probability of finding qubit `q` in `|1⟩`.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let s = self.shift(q);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx >> s) & 1 == 1)
            .map(|(_, a)| a * a)
            .sum::<f64>()
            / self.norm_sqr())
    }

    /// Projects qubit `q` onto `|value⟩`, removes it from the register and
    /// renormalizes. Returns the outcome probability.
    pub fn measure(&self, q: usize, value: usize) -> Result<(ClusterState, f64)> {
        self.check_qubit(q)?;
        let s = self.shift(q);
        let mut amps = Vec::with_capacity(1 << (self.n - 1));
        for idx in 0..self.amps.len() {
            if (idx >> s) & 1 == value {
                amps.push(self.amps[idx]);
            }
        }
        let p: f64 = amps.iter().map(|a| a * a).sum::<f64>() / self.norm_sqr();
        if !(p > 1e-15) {
            return Err(Error::ImpossibleOutcome);
        }
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let mut layout = self.layout.clone();
        layout.remove(q);
        Ok((ClusterState { n: self.n - 1, amps, layout }, p))
    }

    /// Factors a product state into its first `len` qubits and the rest.
    pub fn split(&self, len: usize) -> Result<(ClusterState, ClusterState)> {
        if len > self.n {
            return Err(Error::invalid("len", "split point beyond the register"));
        }
        let right_n = self.n - len;
        let right_dim = 1usize << right_n;
        let (peak, &peak_amp) = self
            .amps
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .ok_or_else(|| Error::Numerical("empty state".into()))?;
        let (pl, pr) = (peak / right_dim, peak % right_dim);
        let mut left: Vec<f64> = (0..1 << len).map(|i| self.amps[i * right_dim + pr]).collect();
        let mut right: Vec<f64> = (0..right_dim).map(|j| self.amps[pl * right_dim + j]).collect();
        let nl = left.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nr = right.iter().map(|a| a * a).sum::<f64>().sqrt();
        left.iter_mut().for_each(|a| *a /= nl);
        right.iter_mut().for_each(|a| *a /= nr);
        // Fix the relative sign so that left ⊗ right reproduces the peak.
        if (left[pl] * right[pr]).signum() != peak_amp.signum() {
            right.iter_mut().for_each(|a| *a = -*a);
        }
        let scale = self.norm_sqr().sqrt();
        let residual: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| (a / scale - left[idx / right_dim] * right[idx % right_dim]).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > SPLIT_TOL {
            return Err(Error::Numerical(format!("state does not factor at qubit {len} (residual {residual:e})")));
        }
        let l = ClusterState {
            n: len,
            amps: left,
            layout: self.layout[..len].to_vec(),
        };
        let r = ClusterState {
            n: right_n,
            amps: right,
            layout: self.layout[len..].to_vec(),
        };
        Ok((l, r))
    }
}

/// Canonical linear cluster of `n` qubits.
pub fn linear_cluster(n: usize) -> Result<ClusterState> {
    if n == 0 {
        return Err(Error::invalid("n", "a cluster needs at least one qubit"));
    }
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    tree_cluster(n, &edges, 0)
}

/// Cluster on a graph: amplitude sign `Σ_{i≠root} x_i + Σ_{(i,j)∈edges} x_i x_j`.
/// For a tree this is the chain convention with parents pointing to the root.
pub fn tree_cluster(n: usize, edges: &[(usize, usize)], root: usize) -> Result<ClusterState> {
    check_capacity(n)?;
    if n == 0 || root >= n || edges.iter().any(|&(i, j)| i >= n || j >= n || i == j) {
        return Err(Error::invalid("edges", "invalid graph"));
    }
    let amp = (1u64 << n) as f64;
    let amp = 1.0 / amp.sqrt();
    let amps = (0..1usize << n)
        .map(|idx| {
            let bit = |q: usize| (idx >> (n - 1 - q)) & 1;
            let mut parity = (0..n).filter(|&q| q != root).map(bit).sum::<usize>();
            parity += edges.iter().map(|&(i, j)| bit(i) * bit(j)).sum::<usize>();
            if parity % 2 == 0 {
                amp
            } else {
                -amp
            }
        })
        .collect();
    Ok(ClusterState {
        n,
        amps,
        layout: (0..n).map(|i| (0, i)).collect(),
    })
}

fn pair_sector(state: &ClusterState, idx: usize, q1: usize, q2: usize) -> Subspace {
    match (state.bit(idx, q1), state.bit(idx, q2)) {
        (0, 0) => Subspace::D,
        (1, 1) => Subspace::H,
        _ => Subspace::L,
    }
}

/// Outcome probabilities `[p_D, p_L, p_H]` of a parity check on `(q1, q2)`.
pub fn parity_probabilities(state: &ClusterState, q1: usize, q2: usize) -> Result<[f64; 3]> {
    state.check_qubit(q1)?;
    state.check_qubit(q2)?;
    if q1 == q2 {
        return Err(Error::invalid("qubit", "parity check needs two distinct qubits"));
    }
    let mut p = [0.0; 3];
    for (idx, a) in state.amps.iter().enumerate() {
        p[pair_sector(state, idx, q1, q2) as usize] += a * a;
    }
    let total = state.norm_sqr();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Applies the parity projector for `outcome` on `(q1, q2)`; returns the
/// renormalized state and the outcome probability.
pub fn parity_project(state: &ClusterState, q1: usize, q2: usize, outcome: Subspace) -> Result<(ClusterState, f64)> {
    let p = parity_probabilities(state, q1, q2)?[outcome as usize];
    if !(p > 1e-15) {
        return Err(Error::ImpossibleOutcome);
    }
    let norm = (p * state.norm_sqr()).sqrt();
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(idx, a)| if pair_sector(state, idx, q1, q2) == outcome { a / norm } else { 0.0 })
        .collect();
    Ok((
        ClusterState {
            n: state.n,
            amps,
            layout: state.layout.clone(),
        },
        p,
    ))
}

/// Result of a fusion attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub outcome: Subspace,
    /// Probability of the parity outcome.
    pub probability: f64,
    /// Read-out of the removed link qubit, if one was measured.
    pub measurement: Option<usize>,
    /// Qubits (indices in the joint register before removal) that received `σ_z`.
    pub corrections: Vec<usize>,
    /// Joint state after corrections and removal of measured qubits.
    pub state: ClusterState,
    /// On success the fused cluster; on failure the surviving chains in
    /// register order (empty chains omitted).
    pub pieces: Vec<ClusterState>,
    /// Values of the two qubits decoupled by a failed check.
    pub decoupled: Option<usize>,
}

/// Chooses an outcome index given probabilities.
pub type Chooser<'a> = dyn FnMut(&[f64]) -> Result<usize> + 'a;

fn sample_chooser<R: Rng + ?Sized>(rng: &mut R) -> impl FnMut(&[f64]) -> Result<usize> + '_ {
    move |p: &[f64]| {
        let mut u = rng.random::<f64>() * p.iter().sum::<f64>();
        for (i, &w) in p.iter().enumerate() {
            if u < w {
                return Ok(i);
            }
            u -= w;
        }
        p.iter().rposition(|&w| w > 0.0).ok_or(Error::ImpossibleOutcome)
    }
}

fn forced_chooser(parity: Subspace, measurement: usize) -> impl FnMut(&[f64]) -> Result<usize> {
    let mut calls = 0;
    move |p: &[f64]| {
        calls += 1;
        let pick = if calls == 1 { parity as usize } else { measurement };
        if p.get(pick).copied().unwrap_or(0.0) > 1e-15 {
            Ok(pick)
        } else {
            Err(Error::ImpossibleOutcome)
        }
    }
}

fn outcome_of(index: usize) -> Subspace {
    Subspace::ALL[index]
}

/// Removes `qubits` (known to hold `value`) from `state`, highest index first.
fn drop_known(state: &ClusterState, qubits: &[usize], value: usize) -> Result<ClusterState> {
    let mut sorted = qubits.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut s = state.clone();
    for q in sorted {
        s = s.measure(q, value)?.0;
    }
    Ok(s)
}

fn split_pieces(state: &ClusterState, lengths: &[usize]) -> Result<Vec<ClusterState>> {
    let mut pieces = Vec::new();
    let mut rest = state.clone();
    for (i, &len) in lengths.iter().enumerate() {
        if i + 1 == lengths.len() {
            if len > 0 {
                pieces.push(rest.clone());
            }
            break;
        }
        if len == 0 {
            continue;
        }
        let (head, tail) = rest.split(len)?;
        pieces.push(head);
        rest = tail;
    }
    Ok(pieces)
}

/// Fuses the last qubit of chain `a` with the first qubit of chain `b`.
///
/// On an odd-parity outcome the link qubit from `a` is Hadamard-rotated,
/// measured and removed; `σ_z` goes to its left neighbour and, after a `1`
/// read-out, to its right neighbour, leaving a linear cluster of
/// `|a| + |b| - 1` qubits. With `keep_redundant` the double-encoded link is
/// kept instead. On an even outcome both link qubits decouple and the
/// remaining chains are returned separately.
pub fn fuse_linear<R: Rng + ?Sized>(a: &ClusterState, b: &ClusterState, keep_redundant: bool, rng: &mut R) -> Result<FusionResult> {
    fuse_linear_with(a, b, keep_redundant, &mut sample_chooser(rng))
}

/// [`fuse_linear`] with prescribed parity outcome and read-out.
pub fn fuse_linear_forced(
    a: &ClusterState,
    b: &ClusterState,
    parity: Subspace,
    measurement: usize,
) -> Result<FusionResult> {
    fuse_linear_with(a, b, false, &mut forced_chooser(parity, measurement))
}

fn fuse_linear_with(a: &ClusterState, b: &ClusterState, keep_redundant: bool, choose: &mut Chooser<'_>) -> Result<FusionResult> {
    let joint = a.tensor(b)?;
    let n = joint.n;
    let m = a.n;
    let (qa, qb) = (m - 1, m);
    let probs = parity_probabilities(&joint, qa, qb)?;
    let outcome = outcome_of(choose(&probs)?);
    let (mut state, probability) = parity_project(&joint, qa, qb, outcome)?;

    if outcome == Subspace::L {
        if keep_redundant {
            return Ok(FusionResult {
                outcome,
                probability,
                measurement: None,
                corrections: Vec::new(),
                pieces: vec![state.clone()],
                state,
                decoupled: None,
            });
        }
        state.apply_h(qa)?;
        let p1 = state.prob_one(qa)?;
        let r = choose(&[1.0 - p1, p1])?;
        let mut corrections = Vec::new();
        if qa >= 1 {
            corrections.push(qa - 1);
        }
        if r == 1 {
            corrections.push(qb);
        }
        for &q in &corrections {
            state.apply_z(q)?;
        }
        let (fused, _) = state.measure(qa, r)?;
        return Ok(FusionResult {
            outcome,
            probability,
            measurement: Some(r),
            corrections,
            pieces: vec![fused.clone()],
            state: fused,
            decoupled: None,
        });
    }

    let c = if outcome == Subspace::H { 1 } else { 0 };
    let mut corrections = Vec::new();
    if c == 1 && qa >= 1 {
        corrections.push(qa - 1);
    }
    if c == 0 && qb + 1 < n {
        corrections.push(qb + 1);
    }
    for &q in &corrections {
        state.apply_z(q)?;
    }
    let rest = drop_known(&state, &[qa, qb], c)?;
    let pieces = split_pieces(&rest, &[m - 1, n - m - 1])?;
    Ok(FusionResult {
        outcome,
        probability,
        measurement: None,
        corrections,
        state: rest,
        pieces,
        decoupled: Some(c),
    })
}

/// Which link qubit a successful two-dimensional fusion removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkRemoval {
    KeepBoth,
    RemoveK,
    #[default]
    RemoveL,
}

/// Expected cluster after a successful two-dimensional fusion of chains of
/// lengths `n` (qubits `0..n`) and `m` (qubits `n..n+m`) at positions `k`, `l`.
///
/// The surviving link qubit becomes a hub: the removed qubit's chain splits
/// into two branches hanging off it. The root is the first qubit of the
/// chain that keeps its link qubit.
pub fn fused_2d_cluster(n: usize, m: usize, k: usize, l: usize, removal: LinkRemoval) -> Result<ClusterState> {
    if k >= n || l >= m {
        return Err(Error::invalid("k", "link positions must lie inside their chains"));
    }
    let (keep_len, drop_len, hub, cut, drop_first) = match removal {
        LinkRemoval::RemoveL => (n, m, k, l, false),
        LinkRemoval::RemoveK => (m, n, l, k, true),
        LinkRemoval::KeepBoth => {
            return Err(Error::invalid("removal", "no single-cluster target without removal"));
        }
    };
    // Node numbering in the joint register after removal.
    let (keep_base, drop_base) = if drop_first { (n - 1, 0) } else { (0, n) };
    let keep = |i: usize| keep_base + i;
    let dropped = |j: usize| drop_base + if j < cut { j } else { j - 1 };
    let mut edges: Vec<(usize, usize)> = (1..keep_len).map(|i| (keep(i - 1), keep(i))).collect();
    for j in 1..cut {
        edges.push((dropped(j - 1), dropped(j)));
    }
    if cut >= 1 {
        edges.push((dropped(cut - 1), keep(hub)));
    }
    if cut + 1 < drop_len {
        edges.push((dropped(cut + 1), keep(hub)));
    }
    for j in (cut + 2)..drop_len {
        edges.push((dropped(j - 1), dropped(j)));
    }
    tree_cluster(n + m - 1, &edges, keep(0))
}

/// Fuses chain `a` at qubit `k` with chain `b` at qubit `l` into a
/// branched cluster.
///
/// On success with removal, the removed link qubit is Hadamard-rotated and
/// measured. Corrections (`σ_z`): on the kept link qubit when the read-out
/// parity `r + [removed position > 0]` is even; on the neighbour after the
/// removed qubit; and on both the first qubit and the neighbour before the
/// removed qubit when those differ. On failure both chains split at the
/// link qubits, which decouple.
pub fn fuse_2d<R: Rng + ?Sized>(
    a: &ClusterState,
    b: &ClusterState,
    k: usize,
    l: usize,
    removal: LinkRemoval,
    rng: &mut R,
) -> Result<FusionResult> {
    fuse_2d_with(a, b, k, l, removal, &mut sample_chooser(rng))
}

/// [`fuse_2d`] with prescribed parity outcome and read-out.
pub fn fuse_2d_forced(
    a: &ClusterState,
    b: &ClusterState,
    k: usize,
    l: usize,
    removal: LinkRemoval,
    parity: Subspace,
    measurement: usize,
) -> Result<FusionResult> {
    fuse_2d_with(a, b, k, l, removal, &mut forced_chooser(parity, measurement))
}

fn fuse_2d_with(
    a: &ClusterState,
    b: &ClusterState,
    k: usize,
    l: usize,
    removal: LinkRemoval,
    choose: &mut Chooser<'_>,
) -> Result<FusionResult> {
    let (n, m) = (a.n, b.n);
    if k >= n || l >= m {
        return Err(Error::invalid("k", "link positions must lie inside their chains"));
    }
    let joint = a.tensor(b)?;
    let qa = |i: usize| i;
    let qb = |j: usize| n + j;
    let probs = parity_probabilities(&joint, qa(k), qb(l))?;
    let outcome = outcome_of(choose(&probs)?);
    let (mut state, probability) = parity_project(&joint, qa(k), qb(l), outcome)?;

    if outcome == Subspace::L {
        let (removed, kept, pos, len, chain): (usize, usize, usize, usize, &dyn Fn(usize) -> usize) = match removal {
            LinkRemoval::KeepBoth => {
                return Ok(FusionResult {
                    outcome,
                    probability,
                    measurement: None,
                    corrections: Vec::new(),
                    pieces: vec![state.clone()],
                    state,
                    decoupled: None,
                });
            }
            LinkRemoval::RemoveL => (qb(l), qa(k), l, m, &qb),
            LinkRemoval::RemoveK => (qa(k), qb(l), k, n, &qa),
        };
        state.apply_h(removed)?;
        let p1 = state.prob_one(removed)?;
        let r = choose(&[1.0 - p1, p1])?;
        let mut corrections = Vec::new();
        if (r + usize::from(pos >= 1)) % 2 == 1 {
            corrections.push(kept);
        }
        if pos + 1 < len {
            corrections.push(chain(pos + 1));
        }
        if pos >= 2 {
            corrections.push(chain(0));
            corrections.push(chain(pos - 1));
        }
        for &q in &corrections {
            state.apply_z(q)?;
        }
        let (fused, _) = state.measure(removed, r)?;
        return Ok(FusionResult {
            outcome,
            probability,
            measurement: Some(r),
            corrections,
            pieces: vec![fused.clone()],
            state: fused,
            decoupled: None,
        });
    }

    let c = if outcome == Subspace::H { 1 } else { 0 };
    let mut corrections = Vec::new();
    for (pos, len, chain) in [(k, n, &qa as &dyn Fn(usize) -> usize), (l, m, &qb)] {
        if c == 1 && pos >= 1 {
            corrections.push(chain(pos - 1));
        }
        if c == 0 && pos + 1 < len {
            corrections.push(chain(pos + 1));
        }
    }
    for &q in &corrections {
        state.apply_z(q)?;
    }
    let rest = drop_known(&state, &[qa(k), qb(l)], c)?;
    let pieces = split_pieces(&rest, &[k, n - k - 1, l, m - l - 1])?;
    Ok(FusionResult {
        outcome,
        probability,
        measurement: None,
        corrections,
        state: rest,
        pieces,
        decoupled: Some(c),
    })
}

/// Growth settings: chains of `resource_size` qubits are fused one at a
/// time onto a growing chain until it reaches `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthStrategy {
    pub resource_size: usize,
    pub target: usize,
    /// Give up after this many resource chains.
    pub max_attempts: usize,
    /// Keep the redundant link qubit on success (size `s + r` instead of `s + r - 1`).
    pub keep_redundant: bool,
}

impl Default for GrowthStrategy {
    fn default() -> Self {
        GrowthStrategy {
            resource_size: 2,
            target: 10,
            max_attempts: 100_000,
            keep_redundant: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthStats {
    /// Resource chains drawn, including the initial one.
    pub attempts: usize,
    /// Fusion operations performed.
    pub fusions: usize,
    pub qubits_consumed: usize,
    /// Sizes of all chains left at the end; the grown chain comes first.
    pub final_sizes: Vec<usize>,
    /// Redundant link qubits kept inside the grown chain.
    pub redundant: usize,
    pub base_seed: u64,
    pub stream: u64,
}

impl GrowthStats {
    pub fn largest(&self) -> usize {
        self.final_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Size-level simulation of sequential chain growth with fusion success
/// probability `p_suc`.
///
/// A success turns sizes `s`, `r` into one chain of `s + r - 1`; a failure
/// leaves `s - 1` and sets aside a chain of `r - 1`. An exhausted chain is
/// replaced by a fresh resource chain.
pub fn growth_monte_carlo(p_suc: f64, strategy: &GrowthStrategy, rng: &mut StreamRng) -> Result<GrowthStats> {
    if !(0.0..=1.0).contains(&p_suc) {
        return Err(Error::invalid("p_suc", format!("must lie in [0, 1], got {p_suc}")));
    }
    let r = strategy.resource_size;
    if r < 1 {
        return Err(Error::invalid("resource_size", "must be at least 1"));
    }
    let mut stats = GrowthStats {
        attempts: 1,
        fusions: 0,
        qubits_consumed: r,
        final_sizes: Vec::new(),
        redundant: 0,
        base_seed: rng.base_seed(),
        stream: rng.stream(),
    };
    let mut size = r;
    let mut largest = size;
    while size < strategy.target {
        if stats.attempts >= strategy.max_attempts {
            return Err(Error::GrowthNotConverged {
                target: strategy.target,
                attempts: stats.attempts,
                largest,
            });
        }
        stats.attempts += 1;
        stats.qubits_consumed += r;
        if size == 0 {
            size = r;
            largest = largest.max(size);
            continue;
        }
        stats.fusions += 1;
        if rng.random::<f64>() < p_suc {
            if strategy.keep_redundant {
                size += r;
                stats.redundant += 1;
            } else {
                size += r - 1;
            }
        } else {
            size -= 1;
            if r > 1 {
                stats.final_sizes.push(r - 1);
            }
        }
        largest = largest.max(size);
    }
    stats.final_sizes.insert(0, size);
    Ok(stats)
}

/// Runs `runs` growth simulations, run `i` on stream `i`.
pub fn growth_ensemble(p_suc: f64, strategy: &GrowthStrategy, runs: usize, base_seed: u64) -> Result<Vec<GrowthStats>> {
    (0..runs)
        .into_par_iter()
        .map(|i| growth_monte_carlo(p_suc, strategy, &mut StreamRng::new(base_seed, i as u64)))
        .collect()
}
