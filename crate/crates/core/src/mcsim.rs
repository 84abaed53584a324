//! Renewal-process Monte Carlo oracle.
//!
//! Simulates the primary user's alternating ON/OFF trajectory frame by
//! frame and accumulates the overlap with the secondary transmit phase.
//! Estimates from here validate the analytic collision ratios and the
//! average-rate expression; nothing in this module shares code with the
//! analytic paths it checks.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numeric::pairwise_sum;
use crate::scenario::Scenario;
use crate::traffic::TrafficModel;

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("simulation needs at least 1000 trials, got {0}")]
    TooFewTrials(usize),
    #[error("frame {frame_ms} ms leaves no transmit phase after {tau_ms} ms of sensing")]
    NoTransmitPhase { frame_ms: f64, tau_ms: f64 },
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Primary-user state at the start of the transmit phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    Idle,
    Busy,
    /// Draw the initial state from the stationary priors.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    pub start_state: StartState,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64, start_state: StartState) -> Result<Self, McError> {
        if trials < 1000 {
            return Err(McError::TooFewTrials(trials));
        }
        Ok(Self {
            trials,
            seed,
            start_state,
        })
    }
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0);
        McEstimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

/// Trial-indexed substream of the master seed; reproducible regardless of
/// evaluation order.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn exp_ms(rng: &mut ChaCha8Rng, mean_ms: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    -mean_ms * f64::ln_1p(-u)
}

/// Fraction of the transmit window covered by ON time, walking fresh
/// exponential sojourns from the given initial state (memorylessness makes
/// residual sojourns at the frame start fresh draws).
fn on_fraction(rng: &mut ChaCha8Rng, traffic: &TrafficModel, start_busy: bool, t_tx: f64) -> f64 {
    let mut t = 0.0;
    let mut busy = start_busy;
    let mut on = 0.0;
    while t < t_tx {
        let mean = if busy {
            traffic.mean_on_ms()
        } else {
            traffic.mean_off_ms()
        };
        let sojourn = exp_ms(rng, mean);
        if busy {
            on += (t + sojourn).min(t_tx) - t;
        }
        t += sojourn;
        busy = !busy;
    }
    on / t_tx
}

fn draw_start(rng: &mut ChaCha8Rng, traffic: &TrafficModel, start: StartState) -> bool {
    match start {
        StartState::Idle => false,
        StartState::Busy => true,
        StartState::Stationary => rng.gen::<f64>() < traffic.pr_busy(),
    }
}

/// Empirical collision-duration ratio of one transmit phase.
pub fn simulate_collision(
    traffic: &TrafficModel,
    frame_ms: f64,
    tau_ms: f64,
    cfg: &SimConfig,
) -> Result<McEstimate, McError> {
    if !(frame_ms > tau_ms) || tau_ms < 0.0 {
        return Err(McError::NoTransmitPhase { frame_ms, tau_ms });
    }
    if cfg.trials < 1000 {
        return Err(McError::TooFewTrials(cfg.trials));
    }
    let t_tx = frame_ms - tau_ms;
    let mut values = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, trial as u64);
        let start = draw_start(&mut rng, traffic, cfg.start_state);
        values.push(on_fraction(&mut rng, traffic, start, t_tx));
    }
    Ok(McEstimate::from_values(&values))
}

/// Empirical average throughput of a fixed power rule at the scenario's
/// fixed frame. Per trial: draw the fading gains and the initial primary
/// state, walk the trajectory over the transmit phase, and weight the
/// realized clean/corrupted rate mix by the idle-decision probability of
/// the drawn state.
pub fn simulate_throughput<F: Fn(f64, f64) -> f64>(
    scenario: &Scenario,
    fixed_power_rule: F,
    cfg: &SimConfig,
) -> Result<McEstimate, McError> {
    let frame_ms = scenario.fixed_frame_ms()?;
    let tau_ms = scenario.sensing.tau_ms;
    if cfg.trials < 1000 {
        return Err(McError::TooFewTrials(cfg.trials));
    }
    let t_tx = frame_ms - tau_ms;
    let duty = t_tx / frame_ms;
    let n0 = scenario.consts.n0;
    let ns = n0 + scenario.consts.sigma_s2;
    let (w_idle, w_busy) = (1.0 - scenario.sensing.p_f, 1.0 - scenario.sensing.p_d);
    let mut values = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, trial as u64);
        let gain_h = exp_ms(&mut rng, 1.0);
        let gain_g = exp_ms(&mut rng, 1.0);
        let start_busy = draw_start(&mut rng, &scenario.traffic, cfg.start_state);
        let rho = on_fraction(&mut rng, &scenario.traffic, start_busy, t_tx);
        let weight = if start_busy { w_busy } else { w_idle };
        let p = fixed_power_rule(gain_h, gain_g);
        let clean = (1.0 + p * gain_h / n0).log2();
        let corrupted = (1.0 + p * gain_h / ns).log2();
        values.push(duty * weight * (clean * (1.0 - rho) + corrupted * rho));
    }
    Ok(McEstimate::from_values(&values))
}
