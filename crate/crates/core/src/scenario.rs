//! A complete problem instance: traffic, sensing, channel statistics,
//! constraints, frame specification, expectation grid, and solver knobs.

use thiserror::Error;

use crate::fading::FadingGrid;
use crate::policy::{BudgetDiscriminantForm, ChannelConstants, PowerConstraints};
use crate::sensing::{posterior_given_idle, IdlePosterior, SensingSpec};
use crate::traffic::TrafficModel;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("operation needs a fixed frame duration but the frame is free")]
    FrameIsFree,
    #[error("fixed frame {frame_ms} ms does not exceed the sensing duration {tau_ms} ms")]
    FrameTooShort { frame_ms: f64, tau_ms: f64 },
    #[error(transparent)]
    Sensing(#[from] crate::sensing::SensingError),
}

/// Frame duration: pinned to a value or left to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameSpec {
    Fixed(f64),
    Free,
}

/// Iteration and tolerance knobs for the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Subgradient step size.
    pub step_t: f64,
    /// |F(alpha)| tolerance ending the outer loop.
    pub dinkelbach_eps: f64,
    /// Complementary-slackness tolerance of the multiplier loop.
    pub slack_delta: f64,
    /// Inner (multiplier) iteration cap.
    pub max_inner: usize,
    /// Outer (ratio) iteration cap.
    pub max_outer: usize,
    /// Coarse frame-grid points before refinement.
    pub frame_grid: usize,
    /// Golden-section bracket tolerance in ms.
    pub frame_tol_ms: f64,
    /// Frame search cap in ms; defaults to ten ON+OFF cycles.
    pub tf_cap_ms: Option<f64>,
    /// Multiplier engine used inside the optimizer loops.
    pub multiplier_method: MultiplierMethod,
    /// Discriminant form of the minimum-EE budget family.
    pub budget_form: BudgetDiscriminantForm,
}

/// How Lagrange multipliers are driven to complementary slackness.
///
/// The projected subgradient follows the constant-step update rule; the
/// dual bisection exploits the monotone usage maps instead and reaches the
/// same fixed point in far fewer expectation evaluations, which matters
/// when the interference cap is orders of magnitude below the power cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierMethod {
    DualBisection,
    Subgradient,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_t: 0.1,
            dinkelbach_eps: 1e-5,
            slack_delta: 1e-4,
            max_inner: 5000,
            max_outer: 50,
            frame_grid: 200,
            frame_tol_ms: 1e-3,
            tf_cap_ms: None,
            multiplier_method: MultiplierMethod::DualBisection,
            budget_form: BudgetDiscriminantForm::default(),
        }
    }
}

/// Full problem instance consumed by the policy evaluators and solvers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub traffic: TrafficModel,
    pub sensing: SensingSpec,
    pub consts: ChannelConstants,
    pub limits: PowerConstraints,
    pub frame: FrameSpec,
    pub grid: FadingGrid,
    pub solver: SolverConfig,
}

impl Scenario {
    /// The pinned frame duration, validated against the sensing window.
    pub fn fixed_frame_ms(&self) -> Result<f64, ScenarioError> {
        match self.frame {
            FrameSpec::Fixed(frame_ms) => {
                if frame_ms > self.sensing.tau_ms {
                    Ok(frame_ms)
                } else {
                    Err(ScenarioError::FrameTooShort {
                        frame_ms,
                        tau_ms: self.sensing.tau_ms,
                    })
                }
            }
            FrameSpec::Free => Err(ScenarioError::FrameIsFree),
        }
    }

    /// Posterior of primary activity behind an idle decision.
    pub fn posterior(&self) -> Result<IdlePosterior, ScenarioError> {
        Ok(posterior_given_idle(
            &self.traffic,
            self.sensing.p_d,
            self.sensing.p_f,
        )?)
    }

    /// Frame search cap: configured value or ten ON+OFF cycles.
    pub fn tf_cap_ms(&self) -> f64 {
        self.solver
            .tf_cap_ms
            .unwrap_or_else(|| self.traffic.default_frame_cap_ms())
    }
}
