//! Quantum-jump unraveling of the full or effective model.

use rand::Rng;

use crate::basis::{FullBasis, GroundBasis, OperatorLabel, OperatorMatrix, Register, StateVector};
use crate::effective::{build_effective_hamiltonian, build_effective_resets, EffectiveRates};
use crate::error::{Error, Result};
use crate::model::{conditional_hamiltonian, reset_operators, EmitterResolution};
use crate::params::SystemParams;
use crate::propagator::{Propagator, Segment};
use crate::rng::{open_unit, StreamRng};

/// Emission channel of a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Atomic0,
    Atomic1,
    Cavity,
}

impl Channel {
    pub fn from_label(label: OperatorLabel) -> Option<Channel> {
        match label {
            OperatorLabel::ResetAtomic0 { .. } => Some(Channel::Atomic0),
            OperatorLabel::ResetAtomic1 { .. } => Some(Channel::Atomic1),
            OperatorLabel::ResetCavity => Some(Channel::Cavity),
            OperatorLabel::Hamiltonian => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Atomic0 => "atomic-0",
            Channel::Atomic1 => "atomic-1",
            Channel::Cavity => "cavity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub channel: Channel,
    /// Emitting atom for resolved atomic channels.
    pub atom: Option<usize>,
    pub detected: bool,
}

/// Each cavity photon is detected independently with probability `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub eta: f64,
}

impl DetectorModel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid("eta", format!("must lie in [0, 1], got {eta}")));
        }
        Ok(DetectorModel { eta })
    }

    pub fn perfect() -> Self {
        DetectorModel { eta: 1.0 }
    }
}

/// Sector populations of the normalized state at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// `[p_D, p_L, p_H]`
    pub populations: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub events: Vec<Event>,
    /// Normalized state at the end time (or just after the stopping click).
    pub final_state: StateVector,
    /// Time at which the record ends.
    pub end_time: f64,
    pub base_seed: u64,
    pub stream: u64,
    /// Propagator evaluations and integrator steps.
    pub wall_steps: u64,
    pub samples: Vec<Sample>,
}

impl TrajectoryRecord {
    pub fn detected_clicks(&self) -> usize {
        self.events.iter().filter(|e| e.detected).count()
    }

    pub fn first_detection(&self) -> Option<f64> {
        self.events.iter().find(|e| e.detected).map(|e| e.time)
    }
}

/// Conditional Hamiltonian, reset operators and the precomputed propagator.
#[derive(Debug, Clone)]
pub struct JumpModel {
    pub register: Register,
    pub hamiltonian: OperatorMatrix,
    pub resets: Vec<OperatorMatrix>,
    propagator: Propagator,
}

impl JumpModel {
    pub fn new(register: Register, hamiltonian: OperatorMatrix, resets: Vec<OperatorMatrix>) -> Result<Self> {
        let dim = register.dim();
        if hamiltonian.dim() != dim || resets.iter().any(|r| r.dim() != dim) {
            return Err(Error::invalid("model", "operator dimensions do not match the register"));
        }
        let propagator = Propagator::new(&hamiltonian);
        Ok(JumpModel {
            register,
            hamiltonian,
            resets,
            propagator,
        })
    }

    /// Full atom-cavity model with `spectators` idle qubits.
    pub fn full(params: &SystemParams, spectators: usize, resolution: EmitterResolution) -> Result<Self> {
        params.validate()?;
        params.warn_if_outside_regime();
        let basis = FullBasis::new(spectators, params.n_max)?;
        Self::new(
            Register::Full(basis),
            conditional_hamiltonian(params, &basis),
            reset_operators(params, &basis, resolution),
        )
    }

    /// Effective ground-state model with `spectators` idle qubits.
    pub fn effective(rates: &EffectiveRates, spectators: usize, resolution: EmitterResolution) -> Result<Self> {
        let basis = GroundBasis::new(spectators)?;
        Self::new(
            Register::Effective(basis),
            build_effective_hamiltonian(rates, spectators)?,
            build_effective_resets(rates, spectators, resolution)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// Replaces the propagator by fixed-step Runge–Kutta integration.
    pub fn with_runge_kutta(mut self) -> Self {
        self.propagator = Propagator::runge_kutta(&self.hamiltonian);
        self
    }

    pub fn cavity_reset(&self) -> Option<&OperatorMatrix> {
        self.resets.iter().find(|r| r.label == OperatorLabel::ResetCavity)
    }
}

/// Run controls beyond the end time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// End of the evolution window; `None` runs until the state goes dark
    /// or the stopping condition is met.
    pub t_end: Option<f64>,
    /// Stop right after this many detected clicks.
    pub stop_after_detections: Option<usize>,
    /// Sorted times at which to record sector populations.
    pub sample_times: Vec<f64>,
}

impl RunOptions {
    pub fn until(t_end: f64) -> Self {
        RunOptions {
            t_end: Some(t_end),
            ..Default::default()
        }
    }
}

/// Runs one trajectory on `[0, t_end]`.
pub fn run_trajectory(
    model: &JumpModel,
    initial: &StateVector,
    t_end: f64,
    detector: DetectorModel,
    rng: &mut StreamRng,
) -> Result<TrajectoryRecord> {
    run_trajectory_with(model, initial, &RunOptions::until(t_end), detector, rng)
}

/// Runs one trajectory with explicit options.
///
/// Each no-jump segment draws `r ∈ (0, 1]` and finds the time at which the
/// squared norm of the unnormalized state reaches `r` by bisection. The
/// channel is chosen with probability proportional to `‖R_x ψ‖²`, and a
/// cavity emission is marked detected with probability `eta`.
pub fn run_trajectory_with(
    model: &JumpModel,
    initial: &StateVector,
    opts: &RunOptions,
    detector: DetectorModel,
    rng: &mut StreamRng,
) -> Result<TrajectoryRecord> {
    if initial.dim() != model.dim() {
        return Err(Error::invalid("initial", "state dimension does not match the model"));
    }
    if !initial.is_normalized(1e-9) {
        return Err(Error::NotNormalized(initial.norm_sqr()));
    }
    let t_end = opts.t_end.unwrap_or(f64::INFINITY);
    if !(t_end >= 0.0) {
        return Err(Error::invalid("t_end", "must be >= 0"));
    }
    let mut record = TrajectoryRecord {
        events: Vec::new(),
        final_state: initial.clone(),
        end_time: 0.0,
        base_seed: rng.base_seed(),
        stream: rng.stream(),
        wall_steps: 0,
        samples: Vec::new(),
    };
    let mut samples = opts.sample_times.iter().copied().filter(|&s| s <= t_end).peekable();
    let mut state = initial.clone();
    let mut now = 0.0;
    let mut detections = 0usize;

    loop {
        let r = open_unit(rng);
        let mut seg = Segment::new(&model.propagator, &state);
        let jump = seg.time_of_norm(r, t_end - now)?;
        let seg_end = jump.map_or(t_end, |dt| now + dt);
        while let Some(&ts) = samples.peek() {
            if ts > seg_end {
                break;
            }
            let s = seg.state_at((ts - now).max(0.0))?;
            record.samples.push(Sample {
                time: ts,
                populations: model.register.subspace_populations(&s),
            });
            samples.next();
        }
        let Some(dt) = jump else {
            let final_state = if t_end.is_finite() {
                seg.state_at(t_end - now)?
            } else {
                asymptotic_state(&mut seg)?
            };
            record.wall_steps += seg.steps;
            record.final_state = final_state.normalized()?;
            record.end_time = t_end;
            return Ok(record);
        };
        let pre = seg.state_at(dt)?.normalized()?;
        record.wall_steps += seg.steps;
        now += dt;

        let rates: Vec<f64> = model.resets.iter().map(|op| op.rate(&pre)).collect();
        let total: f64 = rates.iter().sum();
        if !(total > 0.0) {
            log::debug!("zero total jump rate at t = {now}; advancing to the end of the window");
            let mut seg = Segment::new(&model.propagator, &pre);
            let final_state = if t_end.is_finite() {
                seg.state_at(t_end - now)?
            } else {
                pre.clone()
            };
            record.wall_steps += seg.steps;
            record.final_state = final_state.normalized()?;
            record.end_time = t_end;
            return Ok(record);
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = rates.len() - 1;
        for (i, w) in rates.iter().enumerate() {
            if pick < *w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        while rates[chosen] == 0.0 {
            chosen -= 1;
        }
        let op = &model.resets[chosen];
        let channel = Channel::from_label(op.label).unwrap_or(Channel::Cavity);
        let atom = match op.label {
            OperatorLabel::ResetAtomic0 { atom } | OperatorLabel::ResetAtomic1 { atom } => atom,
            _ => None,
        };
        let detected = channel == Channel::Cavity && rng.random::<f64>() < detector.eta;
        record.events.push(Event {
            time: now,
            channel,
            atom,
            detected,
        });
        state = op.apply(&pre).normalized()?;
        if detected {
            detections += 1;
            if opts.stop_after_detections.is_some_and(|n| detections >= n) {
                record.final_state = state;
                record.end_time = now;
                return Ok(record);
            }
        }
    }
}

/// State after all decaying modes have died out.
fn asymptotic_state(seg: &mut Segment<'_>) -> Result<StateVector> {
    let mut t = 1.0;
    let mut last = seg.state_at(0.0)?;
    // Double until the state stops changing; decaying modes vanish first.
    for _ in 0..200 {
        let next = seg.state_at(t)?;
        if (next.amps() - last.amps()).norm() <= 1e-13 * next.amps().norm().max(1e-300) && t > 1.0 {
            return Ok(next);
        }
        last = next;
        t *= 2.0;
    }
    Ok(last)
}

/// Runs `runs` trajectories in parallel; trajectory `i` uses stream `i`.
pub fn run_ensemble(
    model: &JumpModel,
    initial: &StateVector,
    opts: &RunOptions,
    detector: DetectorModel,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    use rayon::prelude::*;
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::new(base_seed, i as u64);
            run_trajectory_with(model, initial, opts, detector, &mut rng)
        })
        .collect()
}
