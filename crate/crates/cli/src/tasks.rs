//! Task runners. Each writes its CSVs into the output directory and appends
//! `key = value` lines to the run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermolind::bath::{BathSpec, BathTimescales};
use thermolind::benchmark::{error_curve_against, exact_reduced, make_spin_star, quasi_locality_probe, SpinStarSpec};
use thermolind::dbcheck::check_kms;
use thermolind::dynamics::{propagate, propagate_timedep, sci, Method, TimeDepOptions, Trajectory};
use thermolind::errorbudget::{bound, k_constant, BoundInput, BoundKind};
use thermolind::generators::{build_cg, build_davies, build_db, build_redfield, LindbladGenerator, ObservationTime, RedfieldGenerator};
use thermolind::models::{maximally_mixed, random_state, tfim_chain};
use thermolind::opcore::{bohr_decompose, sigma_x, BohrDecomposition, MapKind, Operator, SystemModel};

use crate::config::{GeneratorChoice, InitialState, RunConfig, Task, ToleranceOverrides};

pub const WORKERS_ENV: &str = "THERMOLIND_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Lib(thermolind::Error),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Lib(e) => write!(f, "{e}"),
            Self::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<thermolind::Error> for CliError {
    fn from(e: thermolind::Error) -> Self {
        Self::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Sweep CSV rows of one cell with their pass flags.
type CellRows = Vec<(String, bool)>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub kms: f64,
    pub gibbs: f64,
    pub cp: f64,
    pub gns: f64,
    pub trace: f64,
}

impl Tolerances {
    pub fn default_profile() -> Self {
        Self { kms: 1e-9, gibbs: 1e-8, cp: 1e-8, gns: 1e-9, trace: 1e-10 }
    }

    pub fn strict() -> Self {
        Self { kms: 1e-11, gibbs: 1e-10, cp: 1e-10, gns: 1e-11, trace: 1e-12 }
    }

    pub fn with_overrides(self, o: &ToleranceOverrides) -> Self {
        Self {
            kms: o.kms.unwrap_or(self.kms),
            gibbs: o.gibbs.unwrap_or(self.gibbs),
            cp: o.cp.unwrap_or(self.cp),
            gns: o.gns.unwrap_or(self.gns),
            trace: o.trace.unwrap_or(self.trace),
        }
    }
}

/// Model, Bohr decomposition, bath and observation time shared by the tasks of a run.
pub struct Prepared {
    pub model: SystemModel,
    pub bohr: BohrDecomposition,
    pub bath: BathSpec,
    pub timescales: BathTimescales,
    pub observation_time: f64,
}

impl Prepared {
    pub fn new(cfg: &RunConfig, alpha: f64) -> CliResult<Self> {
        let model = cfg.system_model(alpha)?;
        let bohr = bohr_decompose(&model, None)?;
        let bath = cfg.bath_spec(model.couplings.len())?;
        let timescales = bath.timescales()?;
        let observation_time = cfg.resolve_observation_time(cfg.observation_time, alpha, &bath)?;
        Ok(Self { model, bohr, bath, timescales, observation_time })
    }

    fn t_obs(&self) -> CliResult<ObservationTime> {
        Ok(ObservationTime::new(self.observation_time)?)
    }

    pub fn lindblad(&self, choice: GeneratorChoice) -> CliResult<Option<LindbladGenerator>> {
        let (m, b, bath) = (&self.model, &self.bohr, &self.bath);
        Ok(match choice {
            GeneratorChoice::Davies => Some(build_davies(m, b, bath)?),
            GeneratorChoice::Cg => Some(build_cg(m, b, bath, self.t_obs()?)?),
            GeneratorChoice::ExactDb => Some(build_db(m, b, bath, self.t_obs()?)?),
            GeneratorChoice::Redfield => None,
        })
    }

    pub fn redfield(&self) -> CliResult<RedfieldGenerator> {
        Ok(build_redfield(&self.model, &self.bohr, &self.bath, self.t_obs()?)?)
    }

    fn initial_state(&self, which: InitialState, seed: u64) -> Operator {
        let d = self.model.dim();
        let eigen_projector = |k: usize| {
            let v = self.bohr.eigenvectors.column(k);
            v * v.adjoint()
        };
        match which {
            InitialState::Ground => eigen_projector(0),
            InitialState::Excited => eigen_projector(d - 1),
            InitialState::Plus => Operator::from_element(d, d, Complex64::new(1.0 / d as f64, 0.0)),
            InitialState::MaximallyMixed => maximally_mixed(d),
            InitialState::Random => random_state(d, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

/// Which checks must pass for each generator kind.
struct Required {
    cp: bool,
    kms: bool,
    gibbs: bool,
    gns: bool,
}

fn required(choice: GeneratorChoice) -> Required {
    match choice {
        GeneratorChoice::Davies => Required { cp: true, kms: true, gibbs: true, gns: true },
        GeneratorChoice::ExactDb => Required { cp: true, kms: true, gibbs: true, gns: false },
        GeneratorChoice::Cg => Required { cp: true, kms: false, gibbs: false, gns: false },
        GeneratorChoice::Redfield => Required { cp: false, kms: false, gibbs: false, gns: false },
    }
}

pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub tol: Tolerances,
    pub profile: String,
    summary: Vec<(String, String)>,
    pub certification_failed: bool,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn linspace(t_max: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|i| t_max * i as f64 / n_steps as f64).collect()
}

fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Writes a trajectory CSV; `reference` adds a trace-distance column.
pub fn emit_trajectory(traj: &Trajectory, reference: Option<&Operator>, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    io(path, traj.write_csv(reference, &mut w).and_then(|_| w.flush()))
}

impl Run {
    pub fn new(cfg: RunConfig, out: PathBuf, tol: Tolerances, profile: &str) -> CliResult<Self> {
        io(&out, std::fs::create_dir_all(&out))?;
        let tol = tol.with_overrides(&cfg.tolerances);
        let mut run = Self { cfg, out, tol, profile: profile.to_string(), summary: Vec::new(), certification_failed: false };
        run.put("tolerance_profile", profile);
        for (k, v) in [("kms", tol.kms), ("gibbs", tol.gibbs), ("cp", tol.cp), ("gns", tol.gns), ("trace", tol.trace)] {
            run.put(format!("tolerance.{k}"), sci(v));
        }
        Ok(run)
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn run_tasks(&mut self, tasks: &[Task]) -> CliResult<()> {
        let p = Prepared::new(&self.cfg, self.cfg.alpha)?;
        self.put("alpha", sci(self.cfg.alpha));
        self.put("beta", sci(self.cfg.beta));
        self.put("observation_time", sci(p.observation_time));
        self.put("seed", self.cfg.seed);
        self.put("gamma0", sci(p.timescales.gamma0));
        self.put("tau0", sci(p.timescales.tau0));
        for task in tasks {
            match task {
                Task::Certify => self.certify(&p)?,
                Task::Evolve => self.evolve(&p)?,
                Task::Benchmark => self.benchmark(&p)?,
                Task::Bounds => self.bounds(&p)?,
                Task::Quasilocality => self.quasilocality(&p)?,
            }
            self.put(format!("{}.done", task.name()), true);
        }
        Ok(())
    }

    fn certify(&mut self, p: &Prepared) -> CliResult<()> {
        let path = self.path("certify.csv");
        let mut w = create(&path)?;
        io(&path, writeln!(w, "generator,check,value,tolerance,required,pass"))?;
        let gibbs = p.model.gibbs_state();
        let tol = self.tol;
        let mut all_pass = true;
        for &choice in &self.cfg.generator.clone() {
            let name = choice.name();
            let (superop, lindblad) = match p.lindblad(choice)? {
                Some(g) => (g.superop.clone(), Some(g)),
                None => (p.redfield()?.core, None),
            };
            let report = check_kms(&superop, &gibbs, MapKind::Generator, Some(&p.bohr), p.model.beta)?;
            let req = required(choice);
            let rows = [
                ("cp_min_eig", report.cp_min_eig, -tol.cp, req.cp, report.cp_min_eig >= -tol.cp),
                ("trace_residual", report.trace_residual, tol.trace, true, report.trace_residual <= tol.trace),
                ("kms_residual", report.kms_residual, tol.kms, req.kms, report.kms_residual <= tol.kms),
                ("gibbs_residual", report.gibbs_residual, tol.gibbs, req.gibbs, report.gibbs_residual <= tol.gibbs),
                ("gns_residual", report.gns_residual, tol.gns, req.gns, report.gns_residual <= tol.gns),
            ];
            let mut gen_pass = true;
            for (check, value, threshold, is_required, pass) in rows {
                io(&path, writeln!(w, "{name},{check},{},{},{is_required},{pass}", sci(value), sci(threshold)))?;
                self.put(format!("certify.{name}.{check}"), sci(value));
                gen_pass &= pass || !is_required;
            }
            self.put(format!("certify.{name}.commuting_hamiltonian_norm"), sci(report.commuting_hamiltonian_norm));
            self.put(format!("certify.{name}.passed"), gen_pass);
            all_pass &= gen_pass;

            let pairs = self.path(&format!("certify_pairs_{name}.csv"));
            let mut pw = create(&pairs)?;
            io(&pairs, report.write_pair_csv(&mut pw).and_then(|_| pw.flush()))?;
            if let Some(g) = lindblad {
                let dump = self.path(&format!("generator_{name}.txt"));
                let mut dw = create(&dump)?;
                io(&dump, g.write_text(&mut dw).and_then(|_| dw.flush()))?;
            }
        }
        io(&path, w.flush())?;
        self.put("certify.passed", all_pass);
        self.certification_failed |= !all_pass;
        Ok(())
    }

    fn evolve(&mut self, p: &Prepared) -> CliResult<()> {
        let ec = self.cfg.evolve.clone();
        let times = linspace(ec.t_max, ec.n_steps);
        let rho0 = p.initial_state(ec.initial, self.cfg.seed);
        let gibbs = p.model.gibbs_state();
        for &choice in &self.cfg.generator.clone() {
            let name = choice.name();
            let traj = match p.lindblad(choice)? {
                Some(g) => propagate(&g.superop, &rho0, &times, Method::Auto)?,
                None => {
                    // resolve the fastest Bohr rotation, which runs at ω/α² in rescaled time
                    let w_max = p.bohr.bohr_frequencies.iter().fold(1.0_f64, |m, w| m.max(w.abs()));
                    let a2 = p.model.alpha * p.model.alpha;
                    let max_step = ec.max_step.unwrap_or((0.1 * a2 / w_max).min(0.01));
                    propagate_timedep(&p.redfield()?, &rho0, &times, &TimeDepOptions { max_step })?
                }
            };
            emit_trajectory(&traj, Some(&gibbs), &self.path(&format!("evolve_{name}.csv")))?;
            let last = traj.last().expect("at least one sample");
            self.put(format!("evolve.{name}.final_distance_to_gibbs"), sci(thermolind::opcore::trace_distance(last, &gibbs)));
            self.put(format!("evolve.{name}.min_eigenvalue"), sci(traj.min_eigenvalue()));
            self.put(format!("evolve.{name}.max_trace_error"), sci(traj.max_trace_error()));
        }
        Ok(())
    }

    fn budget(&self, p: &Prepared) -> CliResult<BoundInput> {
        Ok(BoundInput::new(p.model.alpha, p.model.beta, p.timescales).with_k(k_constant(&p.bath)?))
    }

    fn benchmark(&mut self, p: &Prepared) -> CliResult<()> {
        let bc = self.cfg.benchmark.clone();
        let spec = SpinStarSpec { n_bath: bc.n_bath, spread: bc.spread, couplings: bc.couplings.clone(), seed: self.cfg.seed };
        let target = self.cfg.bath_spec(1)?;
        let joint = make_spin_star(&p.model, &spec, &target)?;
        self.put("benchmark.fit_residual", sci(joint.fit.relative_residual));
        self.put("benchmark.fit_warning", joint.fit.warning);
        let times = linspace(bc.t_max.unwrap_or(10.0 * p.model.alpha * p.model.alpha), bc.n_steps);
        let rho0 = p.initial_state(bc.initial, self.cfg.seed);
        let exact = exact_reduced(&joint, &rho0, &times)?;
        emit_trajectory(&exact, Some(&p.model.gibbs_state()), &self.path("benchmark_exact.csv"))?;
        let budget = self.budget(p)?;
        for &choice in &self.cfg.generator.clone() {
            let name = choice.name();
            let Some(g) = p.lindblad(choice)? else {
                self.put(format!("benchmark.{name}"), "skipped");
                continue;
            };
            let curve = error_curve_against(&exact, &g, p.model.alpha, p.observation_time, Some(&budget))?;
            let path = self.path(&format!("benchmark_{name}.csv"));
            let mut w = create(&path)?;
            io(&path, curve.write_csv(&mut w).and_then(|_| w.flush()))?;
            let spath = self.path(&format!("benchmark_{name}_summary.txt"));
            let mut sw = create(&spath)?;
            io(&spath, sw.write_all(curve.summary().as_bytes()).and_then(|_| sw.flush()))?;
            self.put(format!("benchmark.{name}.midpoint_distance"), sci(curve.midpoint_distance()));
            self.put(format!("benchmark.{name}.linear_preferred"), curve.linear_preferred());
        }
        Ok(())
    }

    fn bounds(&mut self, p: &Prepared) -> CliResult<()> {
        let omega_minus = self.cfg.bounds.omega_minus.unwrap_or_else(|| {
            let g = p.bohr.min_gap();
            if g.is_finite() {
                g
            } else {
                0.0
            }
        });
        let base = self.budget(p)?.with_observation_time(p.observation_time).with_omega_minus(omega_minus);
        let path = self.path("bounds.csv");
        let mut w = create(&path)?;
        let header: Vec<&str> = std::iter::once("t").chain(BoundKind::ALL.iter().map(|k| k.name())).collect();
        io(&path, writeln!(w, "{}", header.join(",")))?;
        for &t in &self.cfg.bounds.times {
            let input = base.with_t(t);
            let mut row = vec![sci(t)];
            for kind in BoundKind::ALL {
                row.push(sci(bound(kind, &input)?));
            }
            io(&path, writeln!(w, "{}", row.join(",")))?;
        }
        io(&path, w.flush())?;
        self.put("bounds.omega_minus", sci(omega_minus));
        self.put("bounds.k_constant", sci(base.k_constant.unwrap_or(0.0)));
        Ok(())
    }

    fn quasilocality(&mut self, p: &Prepared) -> CliResult<()> {
        let qc = self.cfg.quasilocality.clone();
        let chain = tfim_chain(qc.n_sites, qc.j, qc.h)?;
        let bath = self.cfg.bath_spec(1)?;
        let t_obs = qc.observation_time.unwrap_or(p.observation_time);
        let errors = quasi_locality_probe(&chain, &sigma_x(), qc.site, &bath, t_obs, qc.omega_star)?;
        let path = self.path("quasilocality.csv");
        let mut w = create(&path)?;
        io(&path, writeln!(w, "r,truncation_error"))?;
        for (r, e) in errors.iter().enumerate() {
            io(&path, writeln!(w, "{r},{}", sci(*e)))?;
        }
        io(&path, w.flush())?;
        self.put("quasilocality.observation_time", sci(t_obs));
        Ok(())
    }

    /// Grid over seeds × alphas × observation times on a worker pool; rows are
    /// written in cell order whatever the scheduling.
    pub fn sweep(&mut self) -> CliResult<()> {
        let sc = self.cfg.sweep.clone().ok_or_else(|| thermolind::Error::Input("sweep: the config has no \"sweep\" block".into()))?;
        let seeds = sc.seeds.clone().unwrap_or_else(|| vec![self.cfg.seed]);
        let mut cells = Vec::new();
        for &seed in &seeds {
            for &alpha in &sc.alphas {
                for &t in &sc.observation_times {
                    cells.push((seed, alpha, t));
                }
            }
        }
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<CliResult<CellRows>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
        let n_workers = workers().min(cells.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..n_workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= cells.len() {
                        break;
                    }
                    let r = self.sweep_cell(i, cells[i], sc.benchmark);
                    results.lock().expect("sweep results")[i] = Some(r);
                });
            }
        });
        let path = self.path("sweep.csv");
        let mut w = create(&path)?;
        io(
            &path,
            writeln!(
                w,
                "cell,seed,alpha,observation_time,generator,cp_min_eig,kms_residual,gibbs_residual,required_pass,benchmark_midpoint_distance"
            ),
        )?;
        let mut all_pass = true;
        for r in results.into_inner().expect("sweep results") {
            for (line, pass) in r.expect("every cell ran")? {
                all_pass &= pass;
                io(&path, writeln!(w, "{line}"))?;
            }
        }
        io(&path, w.flush())?;
        self.put("sweep.cells", cells.len());
        self.put("sweep.workers", n_workers);
        self.put("sweep.passed", all_pass);
        self.certification_failed |= !all_pass;
        Ok(())
    }

    fn sweep_cell(
        &self,
        index: usize,
        (seed, alpha, t): (u64, f64, crate::config::ObservationTimeSpec),
        with_benchmark: bool,
    ) -> CliResult<CellRows> {
        let mut cfg = self.cfg.clone();
        cfg.seed = seed;
        cfg.alpha = alpha;
        cfg.observation_time = t;
        let p = Prepared::new(&cfg, alpha)?;
        let gibbs = p.model.gibbs_state();
        let exact = if with_benchmark {
            let bc = &cfg.benchmark;
            let spec = SpinStarSpec { n_bath: bc.n_bath, spread: bc.spread, couplings: bc.couplings.clone(), seed };
            let joint = make_spin_star(&p.model, &spec, &cfg.bath_spec(1)?)?;
            let rho0 = p.initial_state(bc.initial, seed);
            Some(exact_reduced(&joint, &rho0, &linspace(bc.t_max.unwrap_or(10.0 * alpha * alpha), bc.n_steps))?)
        } else {
            None
        };
        let mut rows = Vec::new();
        for &choice in &cfg.generator {
            let Some(g) = p.lindblad(choice)? else { continue };
            let report = check_kms(&g.superop, &gibbs, MapKind::Generator, None, p.model.beta)?;
            let req = required(choice);
            let pass = (!req.cp || report.cp_min_eig >= -self.tol.cp)
                && (!req.kms || report.kms_residual <= self.tol.kms)
                && (!req.gibbs || report.gibbs_residual <= self.tol.gibbs);
            let mid = match &exact {
                Some(ex) => sci(error_curve_against(ex, &g, alpha, p.observation_time, None)?.midpoint_distance()),
                None => String::new(),
            };
            rows.push((
                format!(
                    "{index},{seed},{},{},{},{},{},{},{pass},{mid}",
                    sci(alpha),
                    sci(p.observation_time),
                    choice.name(),
                    sci(report.cp_min_eig),
                    sci(report.kms_residual),
                    sci(report.gibbs_residual)
                ),
                pass,
            ));
        }
        Ok(rows)
    }

    pub fn write_summary(&mut self) -> CliResult<()> {
        let status = if self.certification_failed { "certification_failed" } else { "ok" };
        self.put("status", status);
        let path = self.path("summary.txt");
        let mut w = create(&path)?;
        for (k, v) in &self.summary {
            io(&path, writeln!(w, "{k} = {v}"))?;
        }
        io(&path, w.flush())
    }
}
