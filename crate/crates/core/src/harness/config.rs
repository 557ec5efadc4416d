//! Experiment configuration. Every experiment kind has built-in defaults; a TOML file
//! overrides any subset of keys and unknown keys are rejected.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdcError};
use crate::problems::{make_oscillator, make_penning, PenningParams, SecondOrderIvp};
use crate::quadrature::NodeFamily;
use crate::sdc::InitialGuess;
use crate::stability::ScanGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Nodes,
    StabilityMap,
    ConvergenceMap,
    StabilityLimits,
    LocalOrder,
    GlobalOrder,
    WorkPrecision,
    Hamiltonian,
    Integrate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Nodes,
        ExperimentKind::StabilityMap,
        ExperimentKind::ConvergenceMap,
        ExperimentKind::StabilityLimits,
        ExperimentKind::LocalOrder,
        ExperimentKind::GlobalOrder,
        ExperimentKind::WorkPrecision,
        ExperimentKind::Hamiltonian,
        ExperimentKind::Integrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Nodes => "nodes",
            ExperimentKind::StabilityMap => "stability-map",
            ExperimentKind::ConvergenceMap => "convergence-map",
            ExperimentKind::StabilityLimits => "stability-limits",
            ExperimentKind::LocalOrder => "local-order",
            ExperimentKind::GlobalOrder => "global-order",
            ExperimentKind::WorkPrecision => "work-precision",
            ExperimentKind::Hamiltonian => "hamiltonian",
            ExperimentKind::Integrate => "integrate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = SdcError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SdcError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Oscillator,
    Penning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Oscillator spring constant.
    pub kappa: f64,
    /// Oscillator friction.
    pub mu: f64,
    /// Oscillator initial position and velocity.
    pub x0: f64,
    pub v0: f64,
    pub penning: PenningParams,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Penning,
            kappa: 1.0,
            mu: 0.0,
            x0: 1.0,
            v0: 0.0,
            penning: PenningParams::default(),
        }
    }
}

impl ProblemSpec {
    pub fn oscillator(kappa: f64, mu: f64) -> Self {
        Self {
            kind: ProblemKind::Oscillator,
            kappa,
            mu,
            ..Default::default()
        }
    }

    /// A fresh problem instance with its own evaluation counter.
    pub fn build(&self) -> Result<SecondOrderIvp> {
        match self.kind {
            ProblemKind::Oscillator => make_oscillator(self.kappa, self.mu),
            ProblemKind::Penning => make_penning(&self.penning),
        }
    }

    pub fn initial_value(&self) -> (Vec<f64>, Vec<f64>) {
        match self.kind {
            ProblemKind::Oscillator => (vec![self.x0], vec![self.v0]),
            ProblemKind::Penning => (self.penning.x0.to_vec(), self.penning.v0.to_vec()),
        }
    }

    /// Natural time scale: the cyclotron period for the trap, `2 pi / sqrt(kappa)` otherwise.
    pub fn period(&self) -> f64 {
        match self.kind {
            ProblemKind::Penning => 2.0 * PI / self.penning.omega_b.abs(),
            ProblemKind::Oscillator if self.kappa > 0.0 => 2.0 * PI / self.kappa.sqrt(),
            ProblemKind::Oscillator => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub family: NodeFamily,
    /// Node counts M to run.
    pub nodes: Vec<usize>,
}

impl Default for RuleSpec {
    fn default() -> Self {
        Self {
            family: NodeFamily::GaussLegendre,
            nodes: vec![3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    Copy,
    Verlet,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweeperSpec {
    /// Iteration counts K to run.
    pub iterations: Vec<usize>,
    pub initial_guess: GuessKind,
    /// Stop early once the collocation residual is below this; 0 disables.
    pub residual_tol: f64,
}

impl Default for SweeperSpec {
    fn default() -> Self {
        Self {
            iterations: vec![3],
            initial_guess: GuessKind::Copy,
            residual_tol: 0.0,
        }
    }
}

impl SweeperSpec {
    pub fn guess(&self, seed: u64) -> InitialGuess {
        match self.initial_guess {
            GuessKind::Copy => InitialGuess::CopyInitial,
            GuessKind::Verlet => InitialGuess::VerletSweep,
            GuessKind::Random => InitialGuess::Random(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Explicit step sizes; when empty the geometric ladder below is used.
    pub dt: Vec<f64>,
    /// Largest ladder step as a multiple of the problem's period.
    pub dt_max_periods: f64,
    /// Ratio between consecutive ladder steps.
    pub refine: f64,
    pub count: usize,
    /// Order fits use at most this many of the smallest unsaturated steps; 0 uses all.
    pub fit_points: usize,
    pub t0: f64,
    pub t_end: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            dt: Vec::new(),
            dt_max_periods: 0.1,
            refine: 2.0,
            count: 6,
            fit_points: 0,
            t0: 0.0,
            t_end: 2.0,
        }
    }
}

impl TimeSpec {
    pub fn ladder(&self, period: f64) -> Vec<f64> {
        if !self.dt.is_empty() {
            return self.dt.clone();
        }
        (0..self.count)
            .map(|i| self.dt_max_periods * period / self.refine.powi(i as i32))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMethod {
    Sdc,
    Picard,
    Rkn4,
    Collocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub method: ScanMethod,
    pub max: f64,
    pub cells: usize,
    /// Upper end of the `dt mu` axis when it differs from `max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        let g = ScanGrid::default();
        Self {
            method: ScanMethod::Sdc,
            max: g.kappa.max,
            cells: g.kappa.cells,
            mu_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub steps: usize,
    /// Record every n-th step in the output series.
    pub sample_every: usize,
    pub include_rkn4: bool,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        Self {
            steps: 100_000,
            sample_every: 100,
            include_rkn4: true,
        }
    }
}

/// A method in a work-precision comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Sdc(usize),
    Picard(usize),
    Rkn4,
    VelocityVerlet,
}

impl MethodSpec {
    pub fn label(self) -> String {
        match self {
            MethodSpec::Sdc(k) => format!("sdc:{k}"),
            MethodSpec::Picard(k) => format!("picard:{k}"),
            MethodSpec::Rkn4 => "rkn4".into(),
            MethodSpec::VelocityVerlet => "verlet".into(),
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            MethodSpec::Sdc(k) | MethodSpec::Picard(k) => k,
            _ => 0,
        }
    }
}

impl FromStr for MethodSpec {
    type Err = SdcError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SdcError::Config(format!("unknown method '{s}' (use sdc:K, picard:K, rkn4, verlet)"));
        match s.split_once(':') {
            Some(("sdc", k)) => Ok(MethodSpec::Sdc(k.parse().map_err(|_| bad())?)),
            Some(("picard", k)) => Ok(MethodSpec::Picard(k.parse().map_err(|_| bad())?)),
            None if s == "rkn4" => Ok(MethodSpec::Rkn4),
            None if s == "verlet" => Ok(MethodSpec::VelocityVerlet),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkSpec {
    pub methods: Vec<String>,
}

impl Default for WorkSpec {
    fn default() -> Self {
        let mut methods: Vec<String> = (1..=6).flat_map(|k| [format!("sdc:{k}"), format!("picard:{k}")]).collect();
        methods.push("rkn4".into());
        methods.push("verlet".into());
        Self { methods }
    }
}

impl WorkSpec {
    pub fn parsed(&self) -> Result<Vec<MethodSpec>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,
    /// Allowed deviation between measured and predicted order.
    pub order_tolerance: f64,
    pub problem: ProblemSpec,
    pub rule: RuleSpec,
    pub sweeper: SweeperSpec,
    pub time: TimeSpec,
    pub scan: ScanSpec,
    pub hamiltonian: HamiltonianSpec,
    pub work: WorkSpec,
}

impl ExperimentConfig {
    /// Built-in defaults for an experiment kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            seed: 1,
            out: PathBuf::from("out"),
            order_tolerance: 0.3,
            problem: ProblemSpec::default(),
            rule: RuleSpec::default(),
            sweeper: SweeperSpec::default(),
            time: TimeSpec::default(),
            scan: ScanSpec::default(),
            hamiltonian: HamiltonianSpec::default(),
            work: WorkSpec::default(),
        };
        match kind {
            ExperimentKind::Nodes => c.rule.nodes = (1..=6).collect(),
            ExperimentKind::StabilityMap => c.sweeper.iterations = vec![50],
            ExperimentKind::ConvergenceMap => {}
            ExperimentKind::StabilityLimits => {
                c.rule.nodes = (2..=6).collect();
                c.sweeper.iterations = (1..=4).collect();
            }
            ExperimentKind::LocalOrder => {
                c.rule.nodes = vec![5];
                c.sweeper.iterations = vec![1, 2, 3];
                c.sweeper.initial_guess = GuessKind::Random;
                c.time.dt_max_periods = 0.012;
                c.time.refine = 1.15;
                c.time.count = 26;
                c.time.fit_points = 6;
            }
            ExperimentKind::GlobalOrder => {
                c.rule.nodes = vec![2, 3, 4];
                c.sweeper.iterations = vec![1, 2, 3, 10];
                c.sweeper.initial_guess = GuessKind::Random;
                c.time.dt_max_periods = 0.4;
                c.time.refine = SQRT_2;
                c.time.count = 20;
                c.time.fit_points = 6;
                c.time.t_end = 2.0;
            }
            ExperimentKind::WorkPrecision => {
                c.rule.nodes = vec![5];
                c.sweeper.initial_guess = GuessKind::Random;
                c.time.dt_max_periods = 0.25;
                c.time.count = 8;
                c.time.t_end = 2.0;
            }
            ExperimentKind::Hamiltonian => {
                c.problem = ProblemSpec::oscillator(1.0, 0.0);
                c.rule.nodes = vec![3, 5];
                c.sweeper.iterations = vec![2, 3, 4];
                c.time.dt = vec![2.0 * PI / 10.0];
            }
            ExperimentKind::Integrate => {
                c.time.dt = vec![0.01];
            }
        }
        c
    }

    /// Defaults for `kind` overlaid with the keys present in `text`.
    pub fn from_toml_str(kind: ExperimentKind, text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| SdcError::Config(e.to_string()))?;
        if let Some(v) = user.get("experiment") {
            if v.as_str() != Some(kind.name()) {
                return Err(SdcError::Config(format!(
                    "config is for experiment {v} but '{kind}' was requested"
                )));
            }
        }
        let base = toml::Table::try_from(Self::defaults(kind)).map_err(|e| SdcError::Config(e.to_string()))?;
        let merged = merge(base, user);
        merged.try_into().map_err(|e: toml::de::Error| SdcError::Config(e.to_string()))
    }

    pub fn from_file(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(kind, &text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SdcError::Config(e.to_string()))
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
