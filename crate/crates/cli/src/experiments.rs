//! Experiment drivers. Each returns the tables it produces; nothing here
//! touches the file system.

use clusterherald::analytics::{
    f_av_eta, markov_ensemble, p_suc_eta, robust_f_av, robust_f_av_quadrature, SectorWeights,
};
use clusterherald::basis::{Register, StateVector, Subspace};
use clusterherald::cluster::{
    fuse_2d, fuse_linear, fused_2d_cluster, growth_ensemble, linear_cluster, FusionResult, GrowthStrategy, LinkRemoval,
};
use clusterherald::effective::EffectiveRates;
use clusterherald::master::{evolve_master_series, max_rate, mean_intensity, DensityMatrix};
use clusterherald::model::EmitterResolution;
use clusterherald::protocols::{
    click_histogram, default_t_max, run_protocol_ensemble, OutcomeLabel, ProtocolConfig, ProtocolOutcome, ProtocolSummary,
    Target,
};
use clusterherald::rng::StreamRng;
use clusterherald::trajectory::{run_ensemble, DetectorModel, JumpModel, RunOptions};
use rayon::prelude::*;

use crate::config::{Engine, ExperimentConfig, InitialName, ModelKind, Removal};
use crate::output::{count, opt_real, real, Table};
use crate::CliError;

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    use crate::config::Experiment::*;
    cfg.validate()?;
    let experiment = cfg
        .experiment
        .ok_or_else(|| CliError::config("experiment", "no experiment selected"))?;
    log::info!("running {experiment} with {} runs, base seed {}", cfg.runs, cfg.base_seed);
    match experiment {
        Trajectory => trajectory(cfg),
        ParitySimple => parity_simple(cfg),
        ParityHerald => parity_herald(cfg),
        Master => master(cfg),
        AnalyticsTable => Ok(vec![analytics_table(cfg)]),
        Robustness => robustness(cfg).map(|t| vec![t]),
        ClusterFuse => cluster_fuse(cfg).map(|t| vec![t]),
        ClusterGrow => cluster_grow(cfg),
        Sweep => sweep(cfg).map(|t| vec![t]),
    }
}

/// Seed of the `index`-th ensemble in a multi-point experiment.
fn point_seed(base: u64, index: usize) -> u64 {
    // SplitMix64 finalizer over the pair.
    let mut z = base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn target(cfg: &ExperimentConfig) -> Target {
    cfg.protocol.target.into()
}

fn resolution(cfg: &ExperimentConfig) -> EmitterResolution {
    cfg.params.resolution.into()
}

fn jump_model(cfg: &ExperimentConfig, rates: &EffectiveRates) -> Result<JumpModel, CliError> {
    let spectators = target(cfg).spectators();
    Ok(match cfg.model {
        ModelKind::Effective => JumpModel::effective(rates, spectators, resolution(cfg))?,
        ModelKind::Full => {
            let params = cfg.system_params();
            params.warn_if_outside_regime();
            JumpModel::full(&params, spectators, resolution(cfg))?
        }
    })
}

fn ground_initial(cfg: &ExperimentConfig) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match cfg.trajectory.initial {
        None => target(cfg).initial_state(),
        Some(InitialName::Plus) => StateVector::from_real(&[0.5; 4]),
        Some(InitialName::Bell) => StateVector::from_real(&[0.0, s, s, 0.0]),
        Some(InitialName::Zero) => StateVector::basis(4, 0),
        Some(InitialName::ZeroOne) => StateVector::basis(4, 1),
        Some(InitialName::OneZero) => StateVector::basis(4, 2),
        Some(InitialName::One) => StateVector::basis(4, 3),
    }
}

fn initial_state(cfg: &ExperimentConfig, register: &Register) -> Result<StateVector, CliError> {
    Ok(register.embed_ground(&ground_initial(cfg))?)
}

fn sample_times(cfg: &ExperimentConfig, rates: &EffectiveRates) -> (f64, Vec<f64>) {
    let t_end = cfg.trajectory.t_end.unwrap_or(20.0 / rates.kappa_eff);
    let n = cfg.trajectory.samples;
    (t_end, (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect())
}

fn trajectory(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let rates = cfg.rates()?;
    let model = jump_model(cfg, &rates)?;
    let initial = initial_state(cfg, &model.register)?;
    let (t_end, times) = sample_times(cfg, &rates);
    let opts = RunOptions {
        t_end: Some(t_end),
        stop_after_detections: None,
        sample_times: times.clone(),
    };
    let detector = DetectorModel::new(cfg.params.eta)?;
    let runs = run_ensemble(&model, &initial, &opts, detector, cfg.runs, cfg.base_seed)?;

    let mut series = Table::new("series", &["time", "p_D", "p_L", "p_H"]);
    for (i, &t) in times.iter().enumerate() {
        let mut mean = [0.0; 3];
        for r in &runs {
            for (m, p) in mean.iter_mut().zip(r.samples[i].populations) {
                *m += p / runs.len() as f64;
            }
        }
        series.push(vec![real(t), real(mean[0]), real(mean[1]), real(mean[2])]);
    }
    let mut events = Table::new("events", &["time", "channel", "detected"]);
    for e in &runs[0].events {
        events.push(vec![real(e.time), e.channel.name().to_string(), e.detected.to_string()]);
    }
    let mut counts = Table::new("counts", &["run", "cavity", "atomic", "detected", "top_fock"]);
    for (i, r) in runs.iter().enumerate() {
        let cavity = r.events.iter().filter(|e| e.channel.name() == "cavity").count();
        counts.push(vec![
            count(i),
            count(cavity),
            count(r.events.len() - cavity),
            count(r.detected_clicks()),
            real(model.register.top_fock_population(&r.final_state)),
        ]);
    }
    Ok(vec![series, events, counts])
}

fn protocol_table(outcomes: &[ProtocolOutcome]) -> Table {
    let mut t = Table::new("protocol", &["run", "label", "t1", "t2", "clicks", "fidelity"]);
    for (i, o) in outcomes.iter().enumerate() {
        t.push(vec![
            count(i),
            o.label.name().to_string(),
            opt_real(o.t1),
            opt_real(o.t2),
            count(o.clicks),
            real(o.fidelity),
        ]);
    }
    t
}

fn summary_table(outcomes: &[ProtocolOutcome], labels: &[OutcomeLabel]) -> Table {
    let mut t = Table::new("summary", &["label", "count", "fraction", "mean_fidelity", "fidelity_err"]);
    for &label in labels {
        let subset: Vec<ProtocolOutcome> = outcomes.iter().filter(|o| o.label == label).cloned().collect();
        let n = subset.len() as f64;
        let mean = subset.iter().map(|o| o.fidelity).sum::<f64>() / n;
        let var = if subset.len() > 1 {
            subset.iter().map(|o| (o.fidelity - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        t.push(vec![
            label.name().to_string(),
            count(subset.len()),
            real(n / outcomes.len() as f64),
            real(mean),
            real((var / n).sqrt()),
        ]);
    }
    t
}

fn parity_simple(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let rates = cfg.rates()?;
    let model = jump_model(cfg, &rates)?;
    let initial = initial_state(cfg, &model.register)?;
    let t_window = cfg.protocol.t_window.unwrap_or(5.0 / rates.kappa_eff);
    let pcfg = ProtocolConfig::simple(t_window, &rates, cfg.params.eta, target(cfg));
    let detector = DetectorModel::new(cfg.params.eta)?;
    let outcomes = run_protocol_ensemble(&model, &initial, &pcfg, detector, cfg.runs, cfg.base_seed)?;
    let mut clicks = Table::new("clicks", &["clicks", "count", "probability", "mean_fidelity", "label"]);
    for b in click_histogram(&outcomes) {
        clicks.push(vec![
            count(b.clicks),
            count(b.count),
            real(b.count as f64 / outcomes.len() as f64),
            if b.count > 0 { real(b.mean_fidelity) } else { String::new() },
            pcfg.classify.classify(b.clicks).name().to_string(),
        ]);
    }
    let summary = summary_table(&outcomes, &[OutcomeLabel::D, OutcomeLabel::L, OutcomeLabel::H]);
    Ok(vec![protocol_table(&outcomes), clicks, summary])
}

fn herald_t_max(cfg: &ExperimentConfig, rates: &EffectiveRates, eta: f64) -> Option<f64> {
    match cfg.protocol.t_max {
        Some(span) => span.as_option(),
        None => Some(default_t_max(rates, eta)),
    }
}

fn parity_herald(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let rates = cfg.rates()?;
    let model = jump_model(cfg, &rates)?;
    let initial = initial_state(cfg, &model.register)?;
    let pcfg = ProtocolConfig::double_herald(herald_t_max(cfg, &rates, cfg.params.eta), target(cfg));
    let detector = DetectorModel::new(cfg.params.eta)?;
    let outcomes = run_protocol_ensemble(&model, &initial, &pcfg, detector, cfg.runs, cfg.base_seed)?;
    let summary = summary_table(&outcomes, &[OutcomeLabel::Success, OutcomeLabel::Failure]);
    Ok(vec![protocol_table(&outcomes), summary])
}

fn master(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let rates = cfg.rates()?;
    let model = jump_model(cfg, &rates)?;
    let initial = initial_state(cfg, &model.register)?;
    let (_, times) = sample_times(cfg, &rates);
    let dt = cfg.trajectory.dt.unwrap_or(0.05 / max_rate(&model));
    let rhos = evolve_master_series(&DensityMatrix::pure(&initial)?, &model, &times, dt)?;
    let reset = model
        .cavity_reset()
        .ok_or_else(|| CliError::config("model", "model has no cavity channel"))?;
    let mut t = Table::new("master", &["time", "p_D", "p_L", "p_H", "intensity"]);
    for (time, rho) in times.iter().zip(&rhos) {
        let p = rho.populations(&model.register);
        t.push(vec![real(*time), real(p[0]), real(p[1]), real(p[2]), real(mean_intensity(rho, reset))]);
    }
    Ok(vec![t])
}

fn analytics_table(cfg: &ExperimentConfig) -> Table {
    let mut t = Table::new("analytics", &["C", "eta", "f_av", "p_suc"]);
    for &c in &cfg.grid.coop.0 {
        for &eta in &cfg.grid.eta.0 {
            t.push(vec![real(c), real(eta), real(f_av_eta(c, eta)), real(p_suc_eta(c, eta))]);
        }
    }
    t
}

fn robustness(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new("robustness", &["epsilon", "f_av_closed", "f_av_quadrature", "f_av_mc", "mc_err"]);
    for (i, &eps) in cfg.grid.epsilon.0.iter().enumerate() {
        let quad = robust_f_av_quadrature(eps, 1e-9)?;
        let rates = EffectiveRates::lossless(1.0, eps, 1.0)?;
        let model = JumpModel::effective(&rates, 0, resolution(cfg))?;
        let pcfg = ProtocolConfig::double_herald(None, Target::Bell);
        let outcomes = run_protocol_ensemble(
            &model,
            &Target::Bell.initial_state(),
            &pcfg,
            DetectorModel::perfect(),
            cfg.runs,
            point_seed(cfg.base_seed, i),
        )?;
        let s = ProtocolSummary::from_outcomes(&outcomes);
        t.push(vec![real(eps), real(robust_f_av(eps)), real(quad.value), real(s.mean_fidelity), real(s.fidelity_err)]);
    }
    Ok(t)
}

fn join_sizes(r: &FusionResult) -> String {
    r.pieces.iter().map(|p| p.n_qubits().to_string()).collect::<Vec<_>>().join(";")
}

fn cluster_fuse(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let c = &cfg.cluster;
    let a = linear_cluster(c.chain_a)?;
    let b = linear_cluster(c.chain_b)?;
    let removal = match c.removal {
        Removal::K => LinkRemoval::RemoveK,
        Removal::L => LinkRemoval::RemoveL,
        Removal::None => LinkRemoval::KeepBoth,
    };
    let expected = match (c.k, c.l) {
        (Some(k), Some(l)) if removal != LinkRemoval::KeepBoth => Some(fused_2d_cluster(c.chain_a, c.chain_b, k, l, removal)?),
        (None, None) if !c.keep_redundant => Some(linear_cluster(c.chain_a + c.chain_b - 1)?),
        _ => None,
    };
    let results: Vec<FusionResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::new(cfg.base_seed, i as u64);
            match (c.k, c.l) {
                (Some(k), Some(l)) => fuse_2d(&a, &b, k, l, removal, &mut rng),
                _ => fuse_linear(&a, &b, c.keep_redundant, &mut rng),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("fusion", &["run", "outcome", "probability", "measurement", "sizes", "overlap"]);
    for (i, r) in results.iter().enumerate() {
        let overlap = if r.outcome == Subspace::L {
            expected.as_ref().map(|e| r.state.overlap(e))
        } else {
            let mut prod = 1.0;
            for p in &r.pieces {
                prod *= p.overlap(&linear_cluster(p.n_qubits())?);
            }
            Some(prod)
        };
        t.push(vec![
            count(i),
            r.outcome.label().to_string(),
            real(r.probability),
            r.measurement.map(count).unwrap_or_default(),
            join_sizes(r),
            opt_real(overlap),
        ]);
    }
    Ok(t)
}

fn cluster_grow(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let c = &cfg.cluster;
    let strategy = GrowthStrategy {
        resource_size: c.resource_size,
        target: c.target,
        max_attempts: c.max_attempts,
        keep_redundant: c.keep_redundant,
    };
    let p = cfg.fusion_p_suc();
    let stats = growth_ensemble(p, &strategy, cfg.runs, cfg.base_seed)?;
    let mut runs = Table::new(
        "growth",
        &["run", "attempts", "fusions", "qubits_consumed", "largest", "redundant", "final_sizes"],
    );
    for (i, s) in stats.iter().enumerate() {
        let sizes: Vec<String> = s.final_sizes.iter().map(|x| x.to_string()).collect();
        runs.push(vec![
            count(i),
            count(s.attempts),
            count(s.fusions),
            count(s.qubits_consumed),
            count(s.largest()),
            count(s.redundant),
            sizes.join(";"),
        ]);
    }
    let q: Vec<f64> = stats.iter().map(|s| s.qubits_consumed as f64).collect();
    let n = q.len() as f64;
    let mean = q.iter().sum::<f64>() / n;
    let var = if q.len() > 1 {
        q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        f64::NAN
    };
    let attempts = stats.iter().map(|s| s.attempts as f64).sum::<f64>() / n;
    let mut summary = Table::new("growth_summary", &["p_suc", "target", "runs", "mean_attempts", "mean_qubits", "qubits_err"]);
    summary.push(vec![real(p), count(c.target), count(stats.len()), real(attempts), real(mean), real((var / n).sqrt())]);
    Ok(vec![runs, summary])
}

fn sweep(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(
        "sweep",
        &["C", "eta", "runs", "p_suc_closed", "p_suc_mc", "p_suc_err", "f_av_closed", "f_av_mc", "f_av_err"],
    );
    let mut index = 0;
    for &c in &cfg.grid.coop.0 {
        for &eta in &cfg.grid.eta.0 {
            let rates = EffectiveRates::from_cooperativity(c, cfg.params.gamma0_fraction, eta)?;
            let t_max = herald_t_max(cfg, &rates, eta);
            let seed = point_seed(cfg.base_seed, index);
            index += 1;
            let (p, p_err, f, f_err) = match cfg.sweep.engine {
                Engine::Markov => {
                    let s = markov_ensemble(&rates.markov, &SectorWeights::UNIFORM, t_max, cfg.runs, seed)?;
                    (s.p_suc(), s.p_suc_err(), s.f_av(), s.f_av_err())
                }
                Engine::Trajectory => {
                    let model = JumpModel::effective(&rates, 0, resolution(cfg))?;
                    let pcfg = ProtocolConfig::double_herald(t_max, Target::Bell);
                    let outcomes = run_protocol_ensemble(
                        &model,
                        &Target::Bell.initial_state(),
                        &pcfg,
                        DetectorModel::new(eta)?,
                        cfg.runs,
                        seed,
                    )?;
                    let s = ProtocolSummary::from_outcomes(&outcomes);
                    (s.rate(), s.rate_err(), s.mean_fidelity, s.fidelity_err)
                }
            };
            t.push(vec![
                real(c),
                real(eta),
                count(cfg.runs),
                real(p_suc_eta(c, eta)),
                real(p),
                real(p_err),
                real(f_av_eta(c, eta)),
                real(f),
                real(f_err),
            ]);
        }
    }
    Ok(t)
}

