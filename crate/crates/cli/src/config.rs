//! Preset schema, version 1.
//!
//! A preset is a JSON object `{"schema": 1, "name", "seed", "tasks": [...]}`.
//! Each task carries a `kind` tag; systems inside tasks use the zoo config
//! format. The preset seed drives every stochastic task and replaces any
//! `seed` written inside a system entry.

use std::path::Path;

use ergomoment::{NormKind, Observable, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub schema: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Spectral(SpectralTask),
    ThetaAgreement(ThetaAgreementTask),
    OracleS4(OracleS4Task),
    OracleConsistency(ConsistencyTask),
    McS4(McS4Task),
    Bound(BoundTask),
    HatSweep(HatSweepTask),
    Ledger(LedgerTask),
    Clt(CltTask),
    Tightness(TightnessTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Spectral(_) => "spectral",
            Task::ThetaAgreement(_) => "theta_agreement",
            Task::OracleS4(_) => "oracle_s4",
            Task::OracleConsistency(_) => "oracle_consistency",
            Task::McS4(_) => "mc_s4",
            Task::Bound(_) => "bound",
            Task::HatSweep(_) => "hat_sweep",
            Task::Ledger(_) => "ledger",
            Task::Clt(_) => "clt",
            Task::Tightness(_) => "tightness",
        }
    }

    fn systems_mut(&mut self) -> Vec<&mut SystemConfig> {
        match self {
            Task::Spectral(t) => vec![&mut t.system],
            Task::ThetaAgreement(t) => t.systems.iter_mut().collect(),
            Task::OracleS4(t) => vec![&mut t.system],
            Task::OracleConsistency(t) => t.cases.iter_mut().map(|c| &mut c.system).collect(),
            Task::McS4(t) => vec![&mut t.system],
            Task::Bound(t) => vec![&mut t.system],
            Task::HatSweep(t) => vec![&mut t.system],
            Task::Ledger(t) => vec![&mut t.system],
            Task::Clt(t) => vec![&mut t.system],
            Task::Tightness(t) => vec![&mut t.system],
        }
    }
}

fn default_horizon() -> usize {
    64
}
fn default_p() -> f64 {
    2.0
}
fn default_cutoff() -> usize {
    20
}
fn default_theta_tol() -> f64 {
    1e-10
}
fn default_rel_tol() -> f64 {
    1e-9
}
fn default_enum_tol() -> f64 {
    1e-12
}
fn default_max_n() -> usize {
    8
}
fn default_z() -> f64 {
    3.0
}
fn default_c() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralTask {
    pub system: SystemConfig,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// When present the probe set is the closure of the centered observable
    /// up to `cutoff`; otherwise state indicators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<Observable>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_theta: Option<f64>,
    #[serde(default = "default_theta_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaAgreementTask {
    pub systems: Vec<SystemConfig>,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleS4Task {
    pub system: SystemConfig,
    pub observable: Observable,
    pub n: Vec<usize>,
    /// Coefficients `c₀, c₁, …` of a polynomial in `n` the values must match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_polynomial: Option<Vec<f64>>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyCase {
    pub system: SystemConfig,
    pub observable: Observable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyTask {
    pub cases: Vec<ConsistencyCase>,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default = "default_enum_tol")]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McS4Task {
    pub system: SystemConfig,
    pub observable: Observable,
    pub n: usize,
    pub reps: usize,
    /// Reference value the estimate must cover within `z` standard errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<f64>,
    #[serde(default = "default_z")]
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundModeKind {
    #[default]
    Exact,
    Mc,
}

/// Running-max check: the largest `empirical_K` over `n ≥ tail_from` is
/// within `rel_tol` of the largest over `n ≥ from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stabilization {
    pub from: usize,
    pub tail_from: usize,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundTask {
    pub system: SystemConfig,
    pub observable: Observable,
    pub n: Vec<usize>,
    #[serde(default)]
    pub mode: BoundModeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilization: Option<Stabilization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HatSweepTask {
    pub system: SystemConfig,
    pub s: f64,
    pub t: f64,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub reps: usize,
    /// Upper limit on `max K / min K` across the sweep.
    pub max_k_span: f64,
    /// Lower limit on `max ‖φ_ε‖ / min ‖φ_ε‖` across the sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_norm_span: Option<f64>,
    /// Lower limit on the largest `‖φ_ε‖` in the sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_peak_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerTask {
    pub system: SystemConfig,
    pub observable: Observable,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Certificate horizon; defaults to the cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltThresholds {
    pub mean: f64,
    pub variance: f64,
    pub kurtosis: f64,
    pub ks: f64,
}

impl Default for CltThresholds {
    fn default() -> Self {
        CltThresholds {
            mean: 0.05,
            variance: 0.05,
            kurtosis: 0.15,
            ks: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltTask {
    pub system: SystemConfig,
    pub observable: Observable,
    pub n: usize,
    pub reps: usize,
    /// Asymptotic variance; computed by Green–Kubo on finite chains when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub thresholds: CltThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TightnessReference {
    /// Independent draws: the count is `Binomial(n, δ)`.
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessTask {
    pub system: SystemConfig,
    pub intervals: Vec<[f64; 2]>,
    pub n: usize,
    pub reps: usize,
    #[serde(default = "default_c")]
    pub reference_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<TightnessReference>,
}

/// Command-line replacements applied to every task that has the field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub cutoff: Option<usize>,
    pub horizon: Option<usize>,
}

impl Preset {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::from_json("preset", e))?;
        match value.get("schema").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::input(
                    "E_SCHEMA_VERSION",
                    format!("preset schema {v} is not supported; this build reads schema {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(CliError::input("E_SCHEMA", "preset: missing integer field `schema`")),
        }
        let mut preset: Preset = serde_json::from_value(value).map_err(|e| CliError::from_json("preset", e))?;
        preset.normalize()?;
        Ok(preset)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Single-task preset, as built by the direct subcommands.
    pub fn single(name: &str, seed: u64, task: Task) -> CliResult<Self> {
        let mut preset = Preset {
            schema: SCHEMA_VERSION,
            name: name.into(),
            seed,
            description: None,
            tasks: vec![task],
        };
        preset.normalize()?;
        Ok(preset)
    }

    /// Propagates the preset seed into every system entry and checks the
    /// task list is non-empty.
    fn normalize(&mut self) -> CliResult<()> {
        if self.tasks.is_empty() {
            return Err(CliError::input("E_SCHEMA", "preset: `tasks` is empty"));
        }
        let seed = self.seed;
        for task in &mut self.tasks {
            for system in task.systems_mut() {
                system.seed = seed;
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        for task in &mut self.tasks {
            match task {
                Task::Spectral(t) => {
                    set(&mut t.horizon, o.horizon);
                    set(&mut t.cutoff, o.cutoff);
                }
                Task::ThetaAgreement(t) => set(&mut t.horizon, o.horizon),
                Task::OracleS4(t) => {
                    if let Some(n) = o.n {
                        t.n = vec![n];
                    }
                }
                Task::OracleConsistency(t) => set(&mut t.max_n, o.n),
                Task::McS4(t) => {
                    set(&mut t.n, o.n);
                    set(&mut t.reps, o.reps);
                }
                Task::Bound(t) => {
                    if let Some(n) = o.n {
                        t.n = vec![n];
                    }
                    if o.reps.is_some() {
                        t.reps = o.reps;
                    }
                }
                Task::HatSweep(t) => {
                    if let Some(n) = o.n {
                        t.n = vec![n];
                    }
                    set(&mut t.reps, o.reps);
                }
                Task::Ledger(t) => {
                    set(&mut t.cutoff, o.cutoff);
                    if o.horizon.is_some() {
                        t.horizon = o.horizon;
                    }
                }
                Task::Clt(t) => {
                    set(&mut t.n, o.n);
                    set(&mut t.reps, o.reps);
                }
                Task::Tightness(t) => {
                    set(&mut t.n, o.n);
                    set(&mut t.reps, o.reps);
                }
            }
        }
        self.normalize()
    }
}

fn set<T: Copy>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}
