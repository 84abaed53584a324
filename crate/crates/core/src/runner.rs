//! Scenario-file front end: parses JSON problem descriptions, drives the
//! optimizers, validation runs, and parameter sweeps, and writes plot-ready
//! CSV. The `cogra-opt` binary is a thin wrapper around [`run`].

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use crate::fading::FadingGrid;
use crate::mcsim::{simulate_collision, simulate_throughput, McEstimate, SimConfig, StartState};
use crate::optimizer::{optimize_ee, optimize_throughput, optimize_throughput_min_ee, OptResult};
use crate::policy::{avg_rate_with, ChannelConstants, PolicyVariant, PowerConstraints};
use crate::scenario::{FrameSpec, Scenario, SolverConfig};
use crate::sensing::SensingSpec;
use crate::traffic::{collision_ratios, max_frame_for_collision, FrameBound, TrafficModel};

/// Exit code: success.
pub const EXIT_OK: i32 = 0;
/// Exit code: schema or solver error.
pub const EXIT_ERROR: i32 = 1;
/// Exit code: the scenario's constraints admit no solution.
pub const EXIT_INFEASIBLE: i32 = 2;

const DEFAULT_SEED: u64 = 1729;
const DEFAULT_TRIALS: usize = 100_000;
const DEFAULT_GRID_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    OptimizeEe,
    OptimizeRateMinEe,
    Feasibility,
    Validate,
    Sweep,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub out_path: PathBuf,
    pub seed: Option<u64>,
    pub grid_order: Option<usize>,
    pub trials: Option<usize>,
}

// ---------------------------------------------------------------------------
// Scenario file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    traffic: TrafficFile,
    sensing: SensingFile,
    channel: ChannelFile,
    constraints: ConstraintsFile,
    frame: FrameFile,
    #[serde(default)]
    solver: SolverFile,
    #[serde(default)]
    sweep: Option<SweepFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficFile {
    mean_on_ms: f64,
    mean_off_ms: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum SensingFile {
    /// Operating point pinned by target probabilities; the sensing
    /// duration follows from the detector design equation.
    Targets { pd: f64, pf: f64, snr_s: f64, fs_hz: f64 },
    /// Operating point derived from an explicit threshold and duration.
    Roc {
        snr_s: f64,
        fs_hz: f64,
        tau_ms: f64,
        threshold: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    n0: f64,
    sigma_s2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsFile {
    #[serde(default)]
    p_avg_db: Option<f64>,
    #[serde(default)]
    p_pk_db: Option<f64>,
    q_avg_db: f64,
    pc_max: f64,
    #[serde(default)]
    ee_min: Option<f64>,
    p_cr: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    #[serde(default)]
    fixed_ms: Option<f64>,
    #[serde(default)]
    free: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    #[serde(default)]
    step_t: Option<f64>,
    #[serde(default)]
    dinkelbach_eps: Option<f64>,
    #[serde(default)]
    slack_delta: Option<f64>,
    #[serde(default)]
    max_inner: Option<usize>,
    #[serde(default)]
    max_outer: Option<usize>,
    #[serde(default)]
    frame_grid: Option<usize>,
    #[serde(default)]
    frame_tol_ms: Option<f64>,
    #[serde(default)]
    tf_cap_ms: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    parameter: SweepParameter,
    from: f64,
    to: f64,
    points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SweepParameter {
    Pd,
    Pf,
    PAvgDb,
    PPkDb,
    QAvgDb,
    EeMinGain,
    TfMs,
    PcMax,
}

impl SweepParameter {
    fn name(&self) -> &'static str {
        match self {
            SweepParameter::Pd => "pd",
            SweepParameter::Pf => "pf",
            SweepParameter::PAvgDb => "p_avg_db",
            SweepParameter::PPkDb => "p_pk_db",
            SweepParameter::QAvgDb => "q_avg_db",
            SweepParameter::EeMinGain => "ee_min_gain",
            SweepParameter::TfMs => "tf_ms",
            SweepParameter::PcMax => "pc_max",
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parsed file with derived pieces still in file units, ready to be
/// specialized per sweep point.
struct LoadedScenario {
    file: ScenarioFile,
    grid_order: usize,
}

impl LoadedScenario {
    fn sensing_spec(&self, sensing: &SensingFile) -> Result<SensingSpec, String> {
        match *sensing {
            SensingFile::Targets { pd, pf, snr_s, fs_hz } => {
                SensingSpec::from_targets(snr_s, fs_hz, pd, pf)
                    .map_err(|e| format!("constraints at sensing: {e}"))
            }
            SensingFile::Roc {
                snr_s,
                fs_hz,
                tau_ms,
                threshold,
            } => SensingSpec::from_threshold(snr_s, tau_ms, fs_hz, threshold)
                .map_err(|e| format!("constraints at sensing: {e}")),
        }
    }

    fn limits(&self, c: &ConstraintsFile) -> Result<PowerConstraints, String> {
        let err = |e| format!("constraints: {e}");
        match (c.p_avg_db, c.p_pk_db) {
            (Some(p), None) => PowerConstraints::average(
                db_to_linear(p),
                db_to_linear(c.q_avg_db),
                c.pc_max,
                c.ee_min,
                c.p_cr,
            )
            .map_err(err),
            (None, Some(p)) => PowerConstraints::peak(
                db_to_linear(p),
                db_to_linear(c.q_avg_db),
                c.pc_max,
                c.ee_min,
                c.p_cr,
            )
            .map_err(err),
            (Some(_), Some(_)) => {
                Err("constraints: p_avg_db and p_pk_db are mutually exclusive".into())
            }
            (None, None) => Err("constraints: one of p_avg_db or p_pk_db is required".into()),
        }
    }

    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        let s = &self.file.solver;
        if let Some(v) = s.step_t {
            cfg.step_t = v;
        }
        if let Some(v) = s.dinkelbach_eps {
            cfg.dinkelbach_eps = v;
        }
        if let Some(v) = s.slack_delta {
            cfg.slack_delta = v;
        }
        if let Some(v) = s.max_inner {
            cfg.max_inner = v;
        }
        if let Some(v) = s.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = s.frame_grid {
            cfg.frame_grid = v;
        }
        if let Some(v) = s.frame_tol_ms {
            cfg.frame_tol_ms = v;
        }
        if let Some(v) = s.tf_cap_ms {
            cfg.tf_cap_ms = Some(v);
        }
        cfg
    }

    fn frame(&self) -> Result<FrameSpec, String> {
        match (self.file.frame.fixed_ms, self.file.frame.free) {
            (Some(ms), None) | (Some(ms), Some(false)) => Ok(FrameSpec::Fixed(ms)),
            (None, Some(true)) => Ok(FrameSpec::Free),
            _ => Err("frame: provide exactly one of fixed_ms or free=true".into()),
        }
    }

    fn base_scenario(&self) -> Result<Scenario, String> {
        self.scenario_with(&self.file.sensing, &self.file.constraints, self.frame()?)
    }

    fn scenario_with(
        &self,
        sensing: &SensingFile,
        constraints: &ConstraintsFile,
        frame: FrameSpec,
    ) -> Result<Scenario, String> {
        let traffic = TrafficModel::new(self.file.traffic.mean_on_ms, self.file.traffic.mean_off_ms)
            .map_err(|e| format!("traffic: {e}"))?;
        let consts = ChannelConstants::new(self.file.channel.n0, self.file.channel.sigma_s2)
            .map_err(|e| format!("channel: {e}"))?;
        Ok(Scenario {
            traffic,
            sensing: self.sensing_spec(sensing)?,
            consts,
            limits: self.limits(constraints)?,
            frame,
            grid: FadingGrid::build(self.grid_order).map_err(|e| e.to_string())?,
            solver: self.solver(),
        })
    }

    /// Scenario at one sweep point. `base_max_ee` feeds the EE-gain sweep.
    fn at_sweep_point(
        &self,
        param: SweepParameter,
        value: f64,
        base_max_ee: Option<f64>,
    ) -> Result<Scenario, String> {
        let mut sensing = self.file.sensing.clone();
        let mut constraints = self.file.constraints.clone();
        let mut frame = self.frame()?;
        match param {
            SweepParameter::Pd | SweepParameter::Pf => match &mut sensing {
                SensingFile::Targets { pd, pf, .. } => {
                    if param == SweepParameter::Pd {
                        *pd = value;
                    } else {
                        *pf = value;
                    }
                }
                SensingFile::Roc { .. } => {
                    return Err(
                        "sweep: pd/pf sweeps need sensing mode \"targets\"".into(),
                    )
                }
            },
            SweepParameter::PAvgDb => {
                if constraints.p_avg_db.is_none() {
                    return Err("sweep: p_avg_db sweep needs an average-power scenario".into());
                }
                constraints.p_avg_db = Some(value);
            }
            SweepParameter::PPkDb => {
                if constraints.p_pk_db.is_none() {
                    return Err("sweep: p_pk_db sweep needs a peak-power scenario".into());
                }
                constraints.p_pk_db = Some(value);
            }
            SweepParameter::QAvgDb => constraints.q_avg_db = value,
            SweepParameter::PcMax => constraints.pc_max = value,
            SweepParameter::EeMinGain => {
                let max_ee = base_max_ee.expect("gain sweep resolves the base EE first");
                constraints.ee_min = if value > 0.0 {
                    Some(value * max_ee)
                } else {
                    None
                };
            }
            SweepParameter::TfMs => frame = FrameSpec::Fixed(value),
        }
        self.scenario_with(&sensing, &constraints, frame)
    }
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

fn fmt_field(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::from("nan")
    }
}

struct Csv {
    buf: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "{}", header.join(","));
        Csv { buf }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    fn write(&self, path: &PathBuf) -> Result<(), String> {
        fs::write(path, self.buf.as_bytes()).map_err(|e| format!("writing {path:?}: {e}"))
    }
}

fn opt_columns() -> [&'static str; 10] {
    [
        "ee_bits_per_joule",
        "rate_bits_s_hz",
        "tf_opt_ms",
        "pc_avg",
        "lambda",
        "nu",
        "feasible",
        "iterations_outer",
        "iterations_inner",
        "multimodal",
    ]
}

fn opt_fields(sc: &Scenario, res: &OptResult) -> Vec<String> {
    let pc = if res.feasible {
        collision_ratios(
            &sc.traffic,
            &sc.sensing,
            res.tf_opt_ms,
            sc.sensing.tau_ms,
        )
        .map(|r| r.pc_avg)
        .unwrap_or(f64::NAN)
    } else {
        0.0
    };
    let (lambda, nu) = res
        .params
        .as_ref()
        .map(|p| match p.variant {
            PolicyVariant::EeAvgTx => (p.lambda.unwrap_or(0.0), p.nu.unwrap_or(0.0)),
            PolicyVariant::EePeakTx => (0.0, p.mu.unwrap_or(0.0)),
            PolicyVariant::MinEeBudget => (p.eta.unwrap_or(0.0), 0.0),
            PolicyVariant::RateMinEeAvgTx | PolicyVariant::RateMinEePeakTx => {
                (p.vartheta.unwrap_or(0.0), p.varphi.unwrap_or(0.0))
            }
        })
        .unwrap_or((0.0, 0.0));
    vec![
        fmt_field(res.ee),
        fmt_field(res.rate),
        fmt_field(res.tf_opt_ms),
        fmt_field(pc),
        fmt_field(lambda),
        fmt_field(nu),
        (res.feasible as u8).to_string(),
        res.outer_iters.to_string(),
        res.inner_iters.to_string(),
        (res.multimodal as u8).to_string(),
    ]
}

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

/// Executes one command against a scenario file and writes the CSV output.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run(opts: &RunOptions) -> i32 {
    match run_inner(opts) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

fn run_inner(opts: &RunOptions) -> Result<i32, String> {
    let text = fs::read_to_string(&opts.scenario_path)
        .map_err(|e| format!("reading {:?}: {e}", opts.scenario_path))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
        format!(
            "scenario schema violation at line {} column {}: {e}",
            e.line(),
            e.column()
        )
    })?;
    let loaded = LoadedScenario {
        file,
        grid_order: opts.grid_order.unwrap_or(DEFAULT_GRID_ORDER),
    };
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let trials = opts.trials.unwrap_or(DEFAULT_TRIALS);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(
            std::env::var("COGRA_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0),
        )
        .build()
        .map_err(|e| format!("thread pool: {e}"))?;

    pool.install(|| match opts.command {
        Command::OptimizeEe => cmd_optimize(&loaded, opts, false),
        Command::OptimizeRateMinEe => cmd_optimize(&loaded, opts, true),
        Command::Feasibility => cmd_feasibility(&loaded, opts),
        Command::Validate => cmd_validate(&loaded, opts, seed, trials),
        Command::Sweep => cmd_sweep(&loaded, opts),
    })
}

fn cmd_optimize(loaded: &LoadedScenario, opts: &RunOptions, min_ee: bool) -> Result<i32, String> {
    let sc = loaded.base_scenario()?;
    let res = if min_ee {
        if sc.limits.ee_min.is_none() {
            return Err("constraints: optimize-rate-min-ee requires ee_min".into());
        }
        optimize_throughput_min_ee(&sc).map_err(|e| e.to_string())?
    } else {
        optimize_ee(&sc).map_err(|e| e.to_string())?
    };
    let mut csv = Csv::new(&opt_columns());
    csv.row(&opt_fields(&sc, &res));
    csv.write(&opts.out_path)?;
    if res.feasible {
        Ok(EXIT_OK)
    } else {
        let post = sc.posterior().map_err(|e| e.to_string())?;
        eprintln!(
            "infeasible: posterior busy probability {} exceeds collision cap {}",
            post.post_busy, sc.limits.pc_max
        );
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_feasibility(loaded: &LoadedScenario, opts: &RunOptions) -> Result<i32, String> {
    let sc = loaded.base_scenario()?;
    let post = sc.posterior().map_err(|e| e.to_string())?;
    let bound = max_frame_for_collision(
        &sc.traffic,
        &sc.sensing,
        sc.sensing.tau_ms,
        sc.limits.pc_max,
        sc.tf_cap_ms(),
    )
    .map_err(|e| e.to_string())?;
    let (feasible, max_frame) = match bound {
        FrameBound::Infeasible { .. } => (false, 0.0),
        FrameBound::Bounded(t) | FrameBound::CapLimited(t) => (true, t),
    };
    let mut csv = Csv::new(&[
        "post_busy",
        "pc_max",
        "pr_busy",
        "max_frame_ms",
        "feasible",
    ]);
    csv.row(&[
        fmt_field(post.post_busy),
        fmt_field(sc.limits.pc_max),
        fmt_field(sc.traffic.pr_busy()),
        fmt_field(max_frame),
        (feasible as u8).to_string(),
    ]);
    csv.write(&opts.out_path)?;
    if feasible {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "infeasible: posterior busy probability {} exceeds collision cap {}",
            post.post_busy, sc.limits.pc_max
        );
        Ok(EXIT_INFEASIBLE)
    }
}

/// The constant-power reference rule: the largest level that fills the
/// average interference budget, capped at the instantaneous limit.
fn reference_power(sc: &Scenario, frame_ms: f64) -> Result<f64, String> {
    let post = sc.posterior().map_err(|e| e.to_string())?;
    let ratios = collision_ratios(&sc.traffic, &sc.sensing, frame_ms, sc.sensing.tau_ms)
        .map_err(|e| e.to_string())?;
    let duty = (frame_ms - sc.sensing.tau_ms) / frame_ms;
    let cap = sc
        .limits
        .p_pk
        .or(sc.limits.p_avg)
        .unwrap_or(f64::INFINITY);
    Ok(cap.min(sc.limits.q_avg / (duty * post.pr_idle_decision * ratios.pc_avg)))
}

fn cmd_validate(
    loaded: &LoadedScenario,
    opts: &RunOptions,
    seed: u64,
    trials: usize,
) -> Result<i32, String> {
    let base = loaded.base_scenario()?;
    let frames: Vec<f64> = match &loaded.file.sweep {
        Some(sw) if sw.parameter == SweepParameter::TfMs => sweep_values(sw),
        Some(_) => return Err("sweep: validate only sweeps tf_ms".into()),
        None => vec![base.fixed_frame_ms().map_err(|e| e.to_string())?],
    };
    let mut csv = Csv::new(&[
        "tf_ms",
        "power_fixed",
        "rate_analytic",
        "rate_mc",
        "rate_se",
        "pc0_analytic",
        "pc0_mc",
        "pc0_se",
        "pc1_analytic",
        "pc1_mc",
        "pc1_se",
        "pc_avg_analytic",
        "pc_avg_mc",
        "pc_avg_se",
    ]);
    let rows: Vec<Result<Vec<String>, String>> = {
        use rayon::prelude::*;
        frames
            .par_iter()
            .enumerate()
            .map(|(i, &frame)| validate_row(&base, frame, seed.wrapping_add(i as u64), trials))
            .collect()
    };
    for row in rows {
        csv.row(&row?);
    }
    csv.write(&opts.out_path)?;
    Ok(EXIT_OK)
}

fn validate_row(
    base: &Scenario,
    frame: f64,
    seed: u64,
    trials: usize,
) -> Result<Vec<String>, String> {
    let tau = base.sensing.tau_ms;
    let mut sc = base.clone();
    sc.frame = FrameSpec::Fixed(frame);
    let post = sc.posterior().map_err(|e| e.to_string())?;
    let ratios =
        collision_ratios(&sc.traffic, &sc.sensing, frame, tau).map_err(|e| e.to_string())?;
    let p_fix = reference_power(&sc, frame)?;
    let rate_analytic = avg_rate_with(|_, _| p_fix, &sc, frame).map_err(|e| e.to_string())?;

    let idle = SimConfig::new(trials, seed, StartState::Idle).map_err(|e| e.to_string())?;
    let busy = SimConfig::new(trials, seed ^ 0x9e37_79b9, StartState::Busy)
        .map_err(|e| e.to_string())?;
    let stationary = SimConfig::new(trials, seed ^ 0x7f4a_7c15, StartState::Stationary)
        .map_err(|e| e.to_string())?;
    let mc0 = simulate_collision(&sc.traffic, frame, tau, &idle).map_err(|e| e.to_string())?;
    let mc1 = simulate_collision(&sc.traffic, frame, tau, &busy).map_err(|e| e.to_string())?;
    let rate_mc =
        simulate_throughput(&sc, |_, _| p_fix, &stationary).map_err(|e| e.to_string())?;
    // Posterior mix of the two independent conditional estimates.
    let mix = McEstimate {
        mean: post.post_idle * mc0.mean + post.post_busy * mc1.mean,
        std_error: ((post.post_idle * mc0.std_error).powi(2)
            + (post.post_busy * mc1.std_error).powi(2))
        .sqrt(),
    };
    Ok(vec![
        fmt_field(frame),
        fmt_field(p_fix),
        fmt_field(rate_analytic),
        fmt_field(rate_mc.mean),
        fmt_field(rate_mc.std_error),
        fmt_field(ratios.pc0),
        fmt_field(mc0.mean),
        fmt_field(mc0.std_error),
        fmt_field(ratios.pc1),
        fmt_field(mc1.mean),
        fmt_field(mc1.std_error),
        fmt_field(ratios.pc_avg),
        fmt_field(mix.mean),
        fmt_field(mix.std_error),
    ])
}

fn sweep_values(sw: &SweepFile) -> Vec<f64> {
    let n = sw.points.max(2);
    (0..n)
        .map(|i| sw.from + (sw.to - sw.from) * i as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_sweep(loaded: &LoadedScenario, opts: &RunOptions) -> Result<i32, String> {
    let sw = loaded
        .file
        .sweep
        .clone()
        .ok_or_else(|| String::from("sweep: scenario file has no sweep section"))?;
    if sw.points < 2 {
        return Err("sweep: points must be at least 2".into());
    }
    let values = sweep_values(&sw);

    // EE-gain sweeps are relative to the best EE of the base scenario.
    let base_max_ee = if sw.parameter == SweepParameter::EeMinGain {
        let mut base = loaded.base_scenario()?;
        base.limits.ee_min = None;
        let res = optimize_ee(&base).map_err(|e| e.to_string())?;
        if !res.feasible {
            return Err("sweep: base scenario for the gain sweep is infeasible".into());
        }
        Some(res.ee)
    } else {
        None
    };

    let min_ee_mode = sw.parameter == SweepParameter::EeMinGain
        || loaded.file.constraints.ee_min.is_some();

    let rows: Vec<Result<(Vec<String>, bool), String>> = {
        use rayon::prelude::*;
        values
            .par_iter()
            .map(|&value| {
                let sc = loaded.at_sweep_point(sw.parameter, value, base_max_ee)?;
                let res = if min_ee_mode && sc.limits.ee_min.is_some() {
                    optimize_throughput_min_ee(&sc).map_err(|e| e.to_string())?
                } else if min_ee_mode {
                    // Gain 0: the EE floor is vacuous.
                    optimize_throughput(&sc).map_err(|e| e.to_string())?
                } else {
                    optimize_ee(&sc).map_err(|e| e.to_string())?
                };
                let mut fields = vec![fmt_field(value)];
                fields.extend(opt_fields(&sc, &res));
                Ok((fields, res.feasible))
            })
            .collect()
    };

    let mut header = vec![sw.parameter.name()];
    header.extend_from_slice(&opt_columns());
    let mut csv = Csv::new(&header);
    let mut any_feasible = false;
    for row in rows {
        let (fields, feasible) = row?;
        any_feasible |= feasible;
        csv.row(&fields);
    }
    csv.write(&opts.out_path)?;
    if any_feasible {
        Ok(EXIT_OK)
    } else {
        eprintln!("infeasible: no sweep point admits a solution");
        Ok(EXIT_INFEASIBLE)
    }
}
