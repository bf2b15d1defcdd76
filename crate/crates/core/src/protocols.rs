//! The simple counting protocol and the double-herald parity check.

use rayon::prelude::*;

use crate::basis::{GroundBasis, Register, StateVector};
use crate::effective::EffectiveRates;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::trajectory::{run_trajectory_with, DetectorModel, JumpModel, RunOptions};

/// Target state of a parity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// `(|01⟩ + |10⟩)/√2` of the in-cavity pair.
    Bell,
    /// `(|0101⟩ + |1010⟩)/√2` of qubits 1–4 with qubits 2, 3 in the cavity.
    Ghz4,
}

impl Target {
    /// Number of spectator qubits in the register.
    pub fn spectators(&self) -> usize {
        match self {
            Target::Bell => 0,
            Target::Ghz4 => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::Bell => "bell",
            Target::Ghz4 => "ghz4",
        }
    }

    /// Target state on the ground register.
    pub fn state(&self) -> StateVector {
        parity_targets(*self)
    }

    /// Standard input state: `|+⟩|+⟩` for the Bell target, two Bell pairs
    /// on (1, 2) and (3, 4) for the GHZ target.
    pub fn initial_state(&self) -> StateVector {
        match self {
            Target::Bell => StateVector::from_real(&[0.5; 4]),
            Target::Ghz4 => {
                let mut amps = [0.0; 16];
                for a in [[0, 1], [1, 0]] {
                    for b in [[0, 1], [1, 0]] {
                        amps[ghz_index([a[0], a[1], b[0], b[1]])] = 0.5;
                    }
                }
                StateVector::from_real(&amps)
            }
        }
    }
}

/// Ground-register index of the four-qubit value `q = (q1, q2, q3, q4)`.
///
/// Qubits 2 and 3 are the in-cavity atoms; qubits 1 and 4 are the two
/// spectators, qubit 1 more significant.
pub fn ghz_index(q: [usize; 4]) -> usize {
    let spectators = 2 * q[0] + q[3];
    GroundBasis { spectators: 2 }.flat(spectators, q[1], q[2])
}

pub fn parity_targets(kind: Target) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        Target::Bell => StateVector::from_real(&[0.0, s, s, 0.0]),
        Target::Ghz4 => {
            let mut amps = [0.0; 16];
            amps[ghz_index([0, 1, 0, 1])] = s;
            amps[ghz_index([1, 0, 1, 0])] = s;
            StateVector::from_real(&amps)
        }
    }
}

/// Squared overlap of two states on the same space.
pub fn fidelity(state: &StateVector, target: &StateVector) -> f64 {
    state.overlap(target)
}

/// Ideal π-pulse on the in-cavity atoms.
pub fn pi_pulse(register: &Register, state: &StateVector) -> StateVector {
    register.pi_pulse(state)
}

/// Maximum-likelihood assignment of a click count to a sector.
///
/// The three hypotheses are Poisson counts with means `0⁺`, `mean_l` and
/// `4 mean_l`. Zero clicks means D; otherwise L wins while
/// `n ≤ 3 mean_l / ln 4`, with ties going to L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classifier {
    /// Expected detected clicks in the L sector over the window.
    pub mean_l: f64,
}

impl Classifier {
    pub fn for_window(rates: &EffectiveRates, eta: f64, t_window: f64) -> Self {
        Classifier {
            mean_l: eta * rates.kappa_eff * t_window,
        }
    }

    /// Largest click count still assigned to L.
    pub fn l_threshold(&self) -> f64 {
        3.0 * self.mean_l / 4f64.ln()
    }

    pub fn classify(&self, clicks: usize) -> OutcomeLabel {
        if clicks == 0 {
            OutcomeLabel::D
        } else if clicks as f64 <= self.l_threshold() {
            OutcomeLabel::L
        } else {
            OutcomeLabel::H
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Simple,
    DoubleHerald,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub variant: Variant,
    /// Counting window of the simple protocol.
    pub t_window: f64,
    /// Cap on each herald round; `None` waits indefinitely.
    pub t_max: Option<f64>,
    pub classify: Classifier,
    pub target: Target,
}

/// Default round cap `3 / (η κ_eff)`.
pub fn default_t_max(rates: &EffectiveRates, eta: f64) -> f64 {
    3.0 / (eta * rates.kappa_eff)
}

impl ProtocolConfig {
    pub fn simple(t_window: f64, rates: &EffectiveRates, eta: f64, target: Target) -> Self {
        ProtocolConfig {
            variant: Variant::Simple,
            t_window,
            t_max: None,
            classify: Classifier::for_window(rates, eta, t_window),
            target,
        }
    }

    pub fn double_herald(t_max: Option<f64>, target: Target) -> Self {
        ProtocolConfig {
            variant: Variant::DoubleHerald,
            t_window: 1.0,
            t_max,
            classify: Classifier { mean_l: 0.0 },
            target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_window > 0.0 && self.t_window.is_finite()) {
            return Err(Error::invalid("t_window", "must be finite and > 0"));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::invalid("t_max", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeLabel {
    D,
    L,
    H,
    Success,
    Failure,
}

impl OutcomeLabel {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeLabel::D => "D",
            OutcomeLabel::L => "L",
            OutcomeLabel::H => "H",
            OutcomeLabel::Success => "success",
            OutcomeLabel::Failure => "failure",
        }
    }

    /// Whether the run heralds the target state.
    pub fn heralds_target(&self) -> bool {
        matches!(self, OutcomeLabel::L | OutcomeLabel::Success)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub label: OutcomeLabel,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    /// Detected clicks (simple protocol) or completed herald rounds.
    pub clicks: usize,
    pub final_state: StateVector,
    /// Fidelity of the atoms (cavity traced out) with the target.
    pub fidelity: f64,
}

fn check_target(model: &JumpModel, cfg: &ProtocolConfig) -> Result<()> {
    cfg.validate()?;
    if model.register.spectators() != cfg.target.spectators() {
        return Err(Error::invalid(
            "target",
            format!(
                "target `{}` needs {} spectator qubits, model has {}",
                cfg.target.name(),
                cfg.target.spectators(),
                model.register.spectators()
            ),
        ));
    }
    Ok(())
}

/// Drives for `t_window`, counts detected clicks and classifies the count.
pub fn run_simple_protocol(
    model: &JumpModel,
    initial: &StateVector,
    cfg: &ProtocolConfig,
    detector: DetectorModel,
    rng: &mut StreamRng,
) -> Result<ProtocolOutcome> {
    check_target(model, cfg)?;
    let rec = run_trajectory_with(model, initial, &RunOptions::until(cfg.t_window), detector, rng)?;
    let clicks = rec.detected_clicks();
    let label = cfg.classify.classify(clicks);
    let fidelity = model.register.fidelity(&rec.final_state, &cfg.target.state());
    Ok(ProtocolOutcome {
        label,
        t1: rec.first_detection(),
        t2: None,
        clicks,
        final_state: rec.final_state,
        fidelity,
    })
}

/// Two herald rounds, each followed by a π-pulse; success needs a detected
/// click in each round. Round one ends in the failed-run state when no click
/// arrives; otherwise the returned state is taken after the second pulse.
pub fn run_double_herald(
    model: &JumpModel,
    initial: &StateVector,
    cfg: &ProtocolConfig,
    detector: DetectorModel,
    rng: &mut StreamRng,
) -> Result<ProtocolOutcome> {
    check_target(model, cfg)?;
    let opts = RunOptions {
        t_end: cfg.t_max,
        stop_after_detections: Some(1),
        sample_times: Vec::new(),
    };
    let target = cfg.target.state();
    let fail = |rounds, t1, state: StateVector| {
        let fidelity = model.register.fidelity(&state, &target);
        ProtocolOutcome {
            label: OutcomeLabel::Failure,
            t1,
            t2: None,
            clicks: rounds,
            final_state: state,
            fidelity,
        }
    };
    let first = run_trajectory_with(model, initial, &opts, detector, rng)?;
    let Some(t1) = first.first_detection() else {
        return Ok(fail(0, None, first.final_state));
    };
    let flipped = model.register.pi_pulse(&first.final_state);
    let second = run_trajectory_with(model, &flipped, &opts, detector, rng)?;
    // The second round is followed by its own swap, undoing the first one.
    let restored = model.register.pi_pulse(&second.final_state);
    let Some(t2) = second.first_detection() else {
        return Ok(fail(1, Some(t1), restored));
    };
    let fidelity = model.register.fidelity(&restored, &target);
    Ok(ProtocolOutcome {
        label: OutcomeLabel::Success,
        t1: Some(t1),
        t2: Some(t2),
        clicks: 2,
        final_state: restored,
        fidelity,
    })
}

/// Runs the configured protocol once.
pub fn run_protocol(
    model: &JumpModel,
    initial: &StateVector,
    cfg: &ProtocolConfig,
    detector: DetectorModel,
    rng: &mut StreamRng,
) -> Result<ProtocolOutcome> {
    match cfg.variant {
        Variant::Simple => run_simple_protocol(model, initial, cfg, detector, rng),
        Variant::DoubleHerald => run_double_herald(model, initial, cfg, detector, rng),
    }
}

/// Runs `runs` protocol instances in parallel, run `i` on stream `i`.
pub fn run_protocol_ensemble(
    model: &JumpModel,
    initial: &StateVector,
    cfg: &ProtocolConfig,
    detector: DetectorModel,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<ProtocolOutcome>> {
    (0..runs)
        .into_par_iter()
        .map(|i| run_protocol(model, initial, cfg, detector, &mut StreamRng::new(base_seed, i as u64)))
        .collect()
}

/// Heralding rate and mean fidelity of the heralded runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSummary {
    pub runs: usize,
    pub heralded: usize,
    /// Mean fidelity over heralded runs (NaN if none).
    pub mean_fidelity: f64,
    /// Standard error of the mean fidelity.
    pub fidelity_err: f64,
}

impl ProtocolSummary {
    pub fn from_outcomes(outcomes: &[ProtocolOutcome]) -> Self {
        let fids: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.label.heralds_target())
            .map(|o| o.fidelity)
            .collect();
        let n = fids.len() as f64;
        let mean = fids.iter().sum::<f64>() / n;
        let var = if fids.len() > 1 {
            fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        ProtocolSummary {
            runs: outcomes.len(),
            heralded: fids.len(),
            mean_fidelity: mean,
            fidelity_err: (var / n).sqrt(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.heralded as f64 / self.runs as f64
    }

    pub fn rate_err(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

/// Per click count: number of runs and their mean fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickBin {
    pub clicks: usize,
    pub count: usize,
    pub mean_fidelity: f64,
}

pub fn click_histogram(outcomes: &[ProtocolOutcome]) -> Vec<ClickBin> {
    let max = outcomes.iter().map(|o| o.clicks).max().unwrap_or(0);
    let mut bins: Vec<ClickBin> = (0..=max)
        .map(|clicks| ClickBin {
            clicks,
            count: 0,
            mean_fidelity: 0.0,
        })
        .collect();
    for o in outcomes {
        bins[o.clicks].count += 1;
        bins[o.clicks].mean_fidelity += o.fidelity;
    }
    for b in &mut bins {
        if b.count > 0 {
            b.mean_fidelity /= b.count as f64;
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Subspace;
    use crate::effective::effective_rates;
    use crate::model::EmitterResolution;
    use crate::params::SystemParams;

    fn lossless_model(spectators: usize) -> (JumpModel, EffectiveRates) {
        let rates = effective_rates(&SystemParams::symmetric(1.0, 1.0, 50.0, 0.0, 0.0)).unwrap();
        (JumpModel::effective(&rates, spectators, EmitterResolution::PerAtom).unwrap(), rates)
    }

    #[test]
    fn targets() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(parity_targets(Target::Bell), StateVector::from_real(&[0.0, s, s, 0.0]));
        let ghz = parity_targets(Target::Ghz4);
        let nonzero: Vec<usize> = (0..16).filter(|&i| ghz.amps()[i].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![ghz_index([0, 1, 0, 1]), ghz_index([1, 0, 1, 0])]);
        for t in [Target::Bell, Target::Ghz4] {
            assert!(t.state().is_normalized(1e-15));
            assert!(t.initial_state().is_normalized(1e-15));
        }
    }

    #[test]
    fn fidelity_examples() {
        let bell = parity_targets(Target::Bell);
        assert!((fidelity(&bell, &bell) - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&StateVector::basis(4, 0), &bell), 0.0);
    }

    #[test]
    fn classifier() {
        let c = Classifier { mean_l: 5.0 };
        assert_eq!(c.classify(0), OutcomeLabel::D);
        assert_eq!(c.classify(5), OutcomeLabel::L);
        assert_eq!(c.classify(10), OutcomeLabel::L);
        assert_eq!(c.classify(11), OutcomeLabel::H);
        assert_eq!(c.classify(20), OutcomeLabel::H);
    }

    #[test]
    fn dark_input_fails() {
        let (model, _) = lossless_model(0);
        let cfg = ProtocolConfig::double_herald(None, Target::Bell);
        let out = run_double_herald(&model, &StateVector::basis(4, 0), &cfg, DetectorModel::perfect(), &mut StreamRng::new(1, 0))
            .unwrap();
        assert_eq!(out.label, OutcomeLabel::Failure);
        assert_eq!(out.t1, None);
    }

    #[test]
    fn doubly_bright_input_fails_after_one_click() {
        let (model, _) = lossless_model(0);
        let cfg = ProtocolConfig::double_herald(None, Target::Bell);
        for i in 0..20 {
            let out =
                run_double_herald(&model, &StateVector::basis(4, 3), &cfg, DetectorModel::perfect(), &mut StreamRng::new(2, i))
                    .unwrap();
            assert_eq!(out.label, OutcomeLabel::Failure);
            assert!(out.t1.is_some());
            // |11⟩ → click → |00⟩ after the first pulse → dark → |11⟩ again.
            assert!(out.final_state.overlap(&StateVector::basis(4, 3)) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn success_lands_in_odd_sector() {
        let (model, _) = lossless_model(0);
        let cfg = ProtocolConfig::double_herald(None, Target::Bell);
        let outs = run_protocol_ensemble(&model, &Target::Bell.initial_state(), &cfg, DetectorModel::perfect(), 400, 5).unwrap();
        for o in outs.iter().filter(|o| o.label == OutcomeLabel::Success) {
            let pops = model.register.subspace_populations(&o.final_state);
            assert!((pops[Subspace::L as usize] - 1.0).abs() < 1e-9);
            assert!((o.fidelity - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ghz_from_two_bell_pairs() {
        let (model, _) = lossless_model(2);
        let cfg = ProtocolConfig::double_herald(None, Target::Ghz4);
        let outs = run_protocol_ensemble(&model, &Target::Ghz4.initial_state(), &cfg, DetectorModel::perfect(), 200, 6).unwrap();
        let summary = ProtocolSummary::from_outcomes(&outs);
        assert!(summary.heralded > 0);
        assert!((summary.mean_fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_target_rejected() {
        let (model, _) = lossless_model(0);
        let cfg = ProtocolConfig::double_herald(None, Target::Ghz4);
        assert!(run_double_herald(&model, &Target::Bell.initial_state(), &cfg, DetectorModel::perfect(), &mut StreamRng::new(0, 0))
            .is_err());
    }

    #[test]
    fn simple_protocol_on_dark_state() {
        let (model, rates) = lossless_model(0);
        let cfg = ProtocolConfig::simple(5.0 / rates.kappa_eff, &rates, 1.0, Target::Bell);
        let out = run_simple_protocol(&model, &StateVector::basis(4, 0), &cfg, DetectorModel::perfect(), &mut StreamRng::new(0, 0))
            .unwrap();
        assert_eq!(out.label, OutcomeLabel::D);
        assert_eq!(out.clicks, 0);
    }

    #[test]
    fn histogram_counts() {
        let mk = |clicks, fidelity| ProtocolOutcome {
            label: OutcomeLabel::L,
            t1: None,
            t2: None,
            clicks,
            final_state: StateVector::basis(4, 0),
            fidelity,
        };
        let bins = click_histogram(&[mk(0, 0.0), mk(2, 1.0), mk(2, 0.5)]);
        assert_eq!(bins.len(), 3);
        assert_eq!(bins[2].count, 2);
        assert!((bins[2].mean_fidelity - 0.75).abs() < 1e-15);
    }
}
