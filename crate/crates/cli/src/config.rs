//! TOML experiment configuration.
//!
//! Top-level keys: `experiment`, `runs`, `base_seed`, `output_path`,
//! `model`, `threads`. Sections: `[params]`, `[protocol]`, `[trajectory]`,
//! `[grid]`, `[cluster]`, `[sweep]`. Unknown keys are rejected. Grids take
//! either an array or a comma-separated string (`"1,5,10"`); durations take
//! a number or `"inf"`.

use std::fmt;
use std::path::PathBuf;

use clusterherald::analytics::p_suc_eta;
use clusterherald::effective::{effective_rates, EffectiveRates};
use clusterherald::model::EmitterResolution;
use clusterherald::params::SystemParams;
use clusterherald::protocols::Target;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Trajectory,
    ParitySimple,
    ParityHerald,
    Master,
    AnalyticsTable,
    Robustness,
    ClusterFuse,
    ClusterGrow,
    Sweep,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Trajectory => "trajectory",
            Experiment::ParitySimple => "parity-simple",
            Experiment::ParityHerald => "parity-herald",
            Experiment::Master => "master",
            Experiment::AnalyticsTable => "analytics-table",
            Experiment::Robustness => "robustness",
            Experiment::ClusterFuse => "cluster-fuse",
            Experiment::ClusterGrow => "cluster-grow",
            Experiment::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Effective,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    #[default]
    PerAtom,
    Collective,
}

impl From<Resolution> for EmitterResolution {
    fn from(r: Resolution) -> Self {
        match r {
            Resolution::PerAtom => EmitterResolution::PerAtom,
            Resolution::Collective => EmitterResolution::Collective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetName {
    #[default]
    Bell,
    Ghz4,
}

impl From<TargetName> for Target {
    fn from(t: TargetName) -> Self {
        match t {
            TargetName::Bell => Target::Bell,
            TargetName::Ghz4 => Target::Ghz4,
        }
    }
}

/// Initial state of the in-cavity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialName {
    /// Both atoms in `(|0⟩ + |1⟩)/√2`.
    #[serde(rename = "plus")]
    Plus,
    #[serde(rename = "bell")]
    Bell,
    #[serde(rename = "00")]
    Zero,
    #[serde(rename = "01")]
    ZeroOne,
    #[serde(rename = "10")]
    OneZero,
    #[serde(rename = "11")]
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Removal {
    K,
    #[default]
    L,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Markov,
    Trajectory,
}

/// A list of values, written as an array or as `"1,5,10"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            One(f64),
            Text(String),
        }
        match Raw::deserialize(d).map_err(|_| de::Error::custom("expected a number, an array of numbers or a string like \"1,5,10\""))? {
            Raw::List(v) => Ok(Grid(v)),
            Raw::One(x) => Ok(Grid(vec![x])),
            Raw::Text(s) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| de::Error::custom(format!("invalid grid entry `{}`", t.trim()))))
                .collect::<Result<Vec<_>, _>>()
                .map(Grid),
        }
    }
}

/// A duration in units of `1/κ`, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Finite(f64),
    Infinite,
}

impl Span {
    pub fn as_option(self) -> Option<f64> {
        match self {
            Span::Finite(t) => Some(t),
            Span::Infinite => None,
        }
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Span::Finite(t) => s.serialize_f64(*t),
            Span::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d).map_err(|_| de::Error::custom("expected a number or \"inf\""))? {
            Raw::Number(t) if t.is_infinite() && t > 0.0 => Ok(Span::Infinite),
            Raw::Number(t) => Ok(Span::Finite(t)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity") => Ok(Span::Infinite),
            Raw::Text(s) => Err(de::Error::custom(format!("expected a number or \"inf\", got \"{s}\""))),
        }
    }
}

/// System parameters in units of `κ`. Setting `coop` switches the effective
/// model to rates fixed by the cooperativity alone (`Γ_eff = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub omega: f64,
    pub g1: f64,
    pub g2: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub kappa: f64,
    pub eta: f64,
    pub n_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coop: Option<f64>,
    /// Fraction of atomic decay into level 0 when `coop` is set.
    pub gamma0_fraction: f64,
    pub resolution: Resolution,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = SystemParams::default();
        ParamsSection {
            omega: p.omega,
            g1: p.g1,
            g2: p.g2,
            delta: p.delta,
            gamma0: p.gamma0,
            gamma1: p.gamma1,
            kappa: p.kappa,
            eta: p.eta,
            n_max: p.n_max,
            coop: None,
            gamma0_fraction: 0.5,
            resolution: Resolution::PerAtom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Counting window of the simple protocol; default `5/κ_eff`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_window: Option<f64>,
    /// Cap on each herald round; default `3/(η κ_eff)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<Span>,
    pub target: TargetName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    /// Evolution time; default `20/κ_eff`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Number of equally spaced sample times on `[0, t_end]`.
    pub samples: usize,
    /// Default: the protocol target's standard input state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialName>,
    /// Master-equation step; default `0.05` over the largest rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            t_end: None,
            samples: 101,
            initial: None,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub coop: Grid,
    pub eta: Grid,
    pub epsilon: Grid,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            coop: Grid(vec![1.0, 5.0, 10.0, 20.0, 40.0]),
            eta: Grid(vec![1.0]),
            epsilon: Grid((0..=10).map(|i| i as f64 / 10.0).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub chain_a: usize,
    pub chain_b: usize,
    /// Link positions (from 0) for a branched fusion; both or neither.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub removal: Removal,
    pub keep_redundant: bool,
    /// Fusion success probability; default from the closed form at the
    /// configured cooperativity and efficiency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_suc: Option<f64>,
    pub target: usize,
    pub resource_size: usize,
    pub max_attempts: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            chain_a: 2,
            chain_b: 2,
            k: None,
            l: None,
            removal: Removal::L,
            keep_redundant: false,
            p_suc: None,
            target: 10,
            resource_size: 2,
            max_attempts: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub engine: Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub runs: usize,
    pub base_seed: u64,
    pub output_path: PathBuf,
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub params: ParamsSection,
    pub protocol: ProtocolSection,
    pub trajectory: TrajectorySection,
    pub grid: GridSection,
    pub cluster: ClusterSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            runs: 1,
            base_seed: 0,
            output_path: PathBuf::from("out"),
            model: ModelKind::Effective,
            threads: None,
            params: ParamsSection::default(),
            protocol: ProtocolSection::default(),
            trajectory: TrajectorySection::default(),
            grid: GridSection::default(),
            cluster: ClusterSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<document>", e.message().to_string()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        CliError::config(key, e.into_inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn check(ok: bool, key: &str, reason: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, reason))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(self.runs >= 1, "runs", "must be at least 1")?;
        check(self.threads.is_none_or(|t| t >= 1), "threads", "must be at least 1")?;
        let p = &self.params;
        check(positive(p.kappa), "params.kappa", "must be finite and > 0")?;
        check(positive(p.delta), "params.delta", "must be finite and > 0")?;
        for (key, v) in [
            ("params.omega", p.omega),
            ("params.g1", p.g1),
            ("params.g2", p.g2),
            ("params.gamma0", p.gamma0),
            ("params.gamma1", p.gamma1),
        ] {
            check(v.is_finite() && v >= 0.0, key, "must be finite and >= 0")?;
        }
        check((0.0..=1.0).contains(&p.eta) && p.eta > 0.0, "params.eta", format!("must lie in (0, 1], got {}", p.eta))?;
        check(p.n_max >= 1, "params.n_max", "must be at least 1")?;
        check((0.0..=1.0).contains(&p.gamma0_fraction), "params.gamma0_fraction", "must lie in [0, 1]")?;
        if let Some(c) = p.coop {
            check(positive(c), "params.coop", "must be finite and > 0")?;
            check(self.model == ModelKind::Effective, "params.coop", "only valid with model = \"effective\"")?;
        }
        if let Some(t) = self.protocol.t_window {
            check(positive(t), "protocol.t_window", "must be finite and > 0")?;
        }
        if let Some(Span::Finite(t)) = self.protocol.t_max {
            check(t > 0.0, "protocol.t_max", "must be > 0")?;
        }
        let tr = &self.trajectory;
        if let Some(t) = tr.t_end {
            check(positive(t), "trajectory.t_end", "must be finite and > 0")?;
        }
        check(tr.samples >= 2, "trajectory.samples", "must be at least 2")?;
        if let Some(dt) = tr.dt {
            check(positive(dt), "trajectory.dt", "must be finite and > 0")?;
        }
        check(
            tr.initial.is_none() || self.protocol.target == TargetName::Bell,
            "trajectory.initial",
            "an explicit initial state needs target = \"bell\"",
        )?;
        let g = &self.grid;
        check(!g.coop.0.is_empty() && g.coop.0.iter().all(|&c| positive(c)), "grid.coop", "needs values > 0")?;
        check(!g.eta.0.is_empty() && g.eta.0.iter().all(|&e| e > 0.0 && e <= 1.0), "grid.eta", "needs values in (0, 1]")?;
        check(
            !g.epsilon.0.is_empty() && g.epsilon.0.iter().all(|e| (-1.0..=1.0).contains(e)),
            "grid.epsilon",
            "needs values in [-1, 1]",
        )?;
        let c = &self.cluster;
        check(c.chain_a >= 1, "cluster.chain_a", "must be at least 1")?;
        check(c.chain_b >= 1, "cluster.chain_b", "must be at least 1")?;
        check(c.chain_a + c.chain_b <= clusterherald::cluster::MAX_QUBITS, "cluster.chain_b", "chains exceed 16 qubits together")?;
        check(c.k.is_some() == c.l.is_some(), "cluster.k", "set both `k` and `l` or neither")?;
        if let (Some(k), Some(l)) = (c.k, c.l) {
            check(k < c.chain_a, "cluster.k", "must lie inside chain_a")?;
            check(l < c.chain_b, "cluster.l", "must lie inside chain_b")?;
        }
        if let Some(ps) = c.p_suc {
            check((0.0..=1.0).contains(&ps), "cluster.p_suc", "must lie in [0, 1]")?;
        }
        check(c.target >= 1, "cluster.target", "must be at least 1")?;
        check(c.resource_size >= 1, "cluster.resource_size", "must be at least 1")?;
        check(c.max_attempts >= 1, "cluster.max_attempts", "must be at least 1")?;
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        let p = &self.params;
        SystemParams {
            omega: p.omega,
            g1: p.g1,
            g2: p.g2,
            delta: p.delta,
            gamma0: p.gamma0,
            gamma1: p.gamma1,
            kappa: p.kappa,
            eta: p.eta,
            n_max: p.n_max,
        }
    }

    pub fn rates(&self) -> Result<EffectiveRates, CliError> {
        let p = &self.params;
        Ok(match p.coop {
            Some(c) => EffectiveRates::from_cooperativity(c, p.gamma0_fraction, p.eta)?,
            None => effective_rates(&self.system_params())?,
        })
    }

    pub fn cooperativity(&self) -> f64 {
        self.params.coop.unwrap_or_else(|| self.system_params().cooperativity())
    }

    /// Configured fusion success probability, or the closed form at the
    /// configured cooperativity and efficiency.
    pub fn fusion_p_suc(&self) -> f64 {
        self.cluster.p_suc.unwrap_or_else(|| p_suc_eta(self.cooperativity(), self.params.eta))
    }
}
