//! Run configuration: strict JSON schema and construction of library objects.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use thermolind::bath::{make_gaussian_kms_bath, make_ohmic_bath, BathSpec};
use thermolind::errorbudget::optimal_t;
use thermolind::models::{near_degenerate_ladder, qubit, random_model, tfim_chain};
use thermolind::opcore::{embed_site, sigma_x, sigma_y, sigma_z, Operator, SystemModel};
use thermolind::{Error, Result};

/// A complex matrix as rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Qubit {
        #[serde(default = "one")]
        gap: f64,
    },
    TfimChain {
        n_sites: usize,
        #[serde(default = "one")]
        j: f64,
        #[serde(default = "default_field")]
        h: f64,
        /// Sites carrying a `coupling` operator; default: every site.
        #[serde(default)]
        coupling_sites: Option<Vec<usize>>,
        #[serde(default = "default_pauli")]
        coupling: String,
    },
    Random {
        dim: usize,
        #[serde(default = "one_usize")]
        n_couplings: usize,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Ladder {
        splitting: f64,
    },
    Dense {
        hamiltonian: MatrixSpec,
        couplings: Vec<MatrixSpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    GaussianKms {
        #[serde(default = "one")]
        tau_c: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Ohmic {
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

/// A positive number or the string `"optimal"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservationTimeSpec {
    Value(f64),
    Optimal,
}

impl<'de> Deserialize<'de> for ObservationTimeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = ObservationTimeSpec;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a positive number or \"optimal\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(ObservationTimeSpec::Value(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(ObservationTimeSpec::Value(v as f64))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(ObservationTimeSpec::Value(v as f64))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v {
                    "optimal" => Ok(ObservationTimeSpec::Optimal),
                    other => Err(E::invalid_value(serde::de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Overrides of the tolerance profile, field by field.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub kms: Option<f64>,
    pub gibbs: Option<f64>,
    pub cp: Option<f64>,
    pub gns: Option<f64>,
    pub trace: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    Davies,
    Cg,
    ExactDb,
    Redfield,
}

impl GeneratorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Davies => "davies",
            Self::Cg => "cg",
            Self::ExactDb => "exact_db",
            Self::Redfield => "redfield",
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Certify,
    Evolve,
    Benchmark,
    Bounds,
    Quasilocality,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Evolve => "evolve",
            Self::Benchmark => "benchmark",
            Self::Bounds => "bounds",
            Self::Quasilocality => "quasilocality",
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Excited,
    Ground,
    Plus,
    MaximallyMixed,
    Random,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_initial")]
    pub initial: InitialState,
    /// Step cap for the time-dependent (Redfield) integrator.
    #[serde(default)]
    pub max_step: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { t_max: default_t_max(), n_steps: default_steps(), initial: default_initial(), max_step: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_n_bath")]
    pub n_bath: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub couplings: Option<Vec<f64>>,
    /// Rescaled horizon; default `10 α²` (real time 10), inside the recurrence
    /// time of small spin stars.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_bench_steps")]
    pub n_steps: usize,
    #[serde(default = "default_plus")]
    pub initial: InitialState,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_bath: default_n_bath(),
            spread: default_spread(),
            couplings: None,
            t_max: None,
            n_steps: default_bench_steps(),
            initial: default_plus(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_bound_times")]
    pub times: Vec<f64>,
    /// `ω − ω̃` for the per-pair bounds; default is the smallest Bohr-frequency gap.
    #[serde(default)]
    pub omega_minus: Option<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { times: default_bound_times(), omega_minus: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasilocalityConfig {
    #[serde(default = "default_chain")]
    pub n_sites: usize,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "default_field")]
    pub h: f64,
    #[serde(default = "default_site")]
    pub site: usize,
    #[serde(default = "one")]
    pub omega_star: f64,
    /// Defaults to the run's observation time.
    #[serde(default)]
    pub observation_time: Option<f64>,
}

impl Default for QuasilocalityConfig {
    fn default() -> Self {
        Self { n_sites: default_chain(), j: 1.0, h: default_field(), site: default_site(), omega_star: 1.0, observation_time: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    /// Each value or `"optimal"`; default `["optimal"]`.
    #[serde(default = "default_sweep_times")]
    pub observation_times: Vec<ObservationTimeSpec>,
    /// Seeds to sweep; default is the run seed only.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Run the benchmark in every cell.
    #[serde(default)]
    pub benchmark: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub bath: BathConfig,
    pub alpha: f64,
    pub beta: f64,
    pub observation_time: ObservationTimeSpec,
    #[serde(alias = "generators")]
    pub generator: Vec<GeneratorChoice>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub quasilocality: QuasilocalityConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_field() -> f64 {
    0.7
}
fn default_pauli() -> String {
    "sigma_x".into()
}
fn default_cutoff() -> f64 {
    2.0
}
fn default_t_max() -> f64 {
    10.0
}
fn default_steps() -> usize {
    100
}
fn default_bench_steps() -> usize {
    40
}
fn default_initial() -> InitialState {
    InitialState::Excited
}
fn default_plus() -> InitialState {
    InitialState::Plus
}
fn default_n_bath() -> usize {
    8
}
fn default_spread() -> f64 {
    4.0
}
fn default_bound_times() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0]
}
fn default_chain() -> usize {
    6
}
fn default_site() -> usize {
    2
}
fn default_out() -> PathBuf {
    PathBuf::from("thermolind-out")
}
fn default_sweep_times() -> Vec<ObservationTimeSpec> {
    vec![ObservationTimeSpec::Optimal]
}

/// Parses and validates; any error is an input error.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn matrix(spec: &MatrixSpec, what: &str) -> Result<Operator> {
    let d = spec.len();
    if d == 0 || spec.iter().any(|row| row.len() != d) {
        return Err(Error::Input(format!("{what} must be a non-empty square matrix")));
    }
    Ok(Operator::from_fn(d, d, |i, j| Complex64::new(spec[i][j][0], spec[i][j][1])))
}

fn pauli(name: &str) -> Result<Operator> {
    match name {
        "sigma_x" => Ok(sigma_x()),
        "sigma_y" => Ok(sigma_y()),
        "sigma_z" => Ok(sigma_z()),
        other => Err(Error::Input(format!("unknown coupling operator {other:?} (expected sigma_x, sigma_y or sigma_z)"))),
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Input("alpha and beta must be non-negative".into()));
        }
        if let ObservationTimeSpec::Value(t) = self.observation_time {
            if !(t > 0.0) {
                return Err(Error::Input(format!("observation_time must be positive or \"optimal\", got {t}")));
            }
        }
        if self.generator.is_empty() {
            return Err(Error::Input("generator: at least one kind is required".into()));
        }
        if self.evolve.n_steps == 0 || self.benchmark.n_steps == 0 {
            return Err(Error::Input("n_steps must be positive".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.alphas.is_empty() || sweep.alphas.iter().any(|a| !(*a >= 0.0)) {
                return Err(Error::Input("sweep.alphas must be a non-empty list of non-negative numbers".into()));
            }
            if sweep.observation_times.iter().any(|t| matches!(t, ObservationTimeSpec::Value(v) if !(*v > 0.0))) {
                return Err(Error::Input("sweep.observation_times must be positive or \"optimal\"".into()));
            }
        }
        if let SystemSpec::Dense { hamiltonian, couplings } = &self.system {
            let d = matrix(hamiltonian, "system.hamiltonian")?.nrows();
            for (k, a) in couplings.iter().enumerate() {
                if matrix(a, "system.couplings")?.nrows() != d {
                    return Err(Error::Input(format!("system.couplings[{k}] does not match the hamiltonian dimension {d}")));
                }
            }
        }
        Ok(())
    }

    pub fn system_model(&self, alpha: f64) -> Result<SystemModel> {
        match &self.system {
            SystemSpec::Qubit { gap } => qubit(*gap, self.beta, alpha),
            SystemSpec::TfimChain { n_sites, j, h, coupling_sites, coupling } => {
                let chain = tfim_chain(*n_sites, *j, *h)?;
                let op = pauli(coupling)?;
                let sites: Vec<usize> = coupling_sites.clone().unwrap_or_else(|| (0..*n_sites).collect());
                if let Some(bad) = sites.iter().find(|&&s| s >= *n_sites) {
                    return Err(Error::Input(format!("coupling site {bad} outside a chain of {n_sites} sites")));
                }
                let couplings = sites.iter().map(|&s| embed_site(&op, s, *n_sites)).collect();
                SystemModel::new(chain.hamiltonian(), couplings, self.beta, alpha)
            }
            SystemSpec::Random { dim, n_couplings, seed } => random_model(*dim, *n_couplings, self.beta, alpha, seed.unwrap_or(self.seed)),
            SystemSpec::Ladder { splitting } => near_degenerate_ladder(*splitting, self.beta, alpha),
            SystemSpec::Dense { hamiltonian, couplings } => {
                let h = matrix(hamiltonian, "system.hamiltonian")?;
                let a = couplings.iter().map(|m| matrix(m, "system.couplings")).collect::<Result<Vec<_>>>()?;
                SystemModel::new(h, a, self.beta, alpha)
            }
        }
    }

    /// Bath with one independent channel per system coupling.
    pub fn bath_spec(&self, n_channels: usize) -> Result<BathSpec> {
        let scalar = match &self.bath {
            BathConfig::GaussianKms { tau_c, scale } => make_gaussian_kms_bath(self.beta, *tau_c, *scale)?,
            BathConfig::Ohmic { cutoff, scale } => make_ohmic_bath(self.beta, *cutoff, *scale)?,
        };
        if n_channels == 1 {
            Ok(scalar)
        } else {
            scalar.independent_channels(n_channels)
        }
    }

    pub fn resolve_observation_time(&self, spec: ObservationTimeSpec, alpha: f64, bath: &BathSpec) -> Result<f64> {
        match spec {
            ObservationTimeSpec::Value(t) => Ok(t),
            ObservationTimeSpec::Optimal => optimal_t(alpha, &bath.timescales()?),
        }
    }
}
