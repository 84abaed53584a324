//! Closed-form transmit-power policies and the evaluators built on them.
//!
//! Every policy variant allocates, per fading state (|h|^2, |g|^2), the
//! positive root of the stationarity quadratic
//!
//! ```text
//! P = [ (A + sqrt(Delta)) / 2 ]+
//! A     = log2(e)/d - (2 N0 + sigma_s^2)/|h|^2
//! Delta = A^2 - 4/|h|^2 ( N0 (N0+sigma_s^2)/|h|^2
//!                         - log2(e) (N0 + (1 - pc_eff) sigma_s^2)/d )
//! ```
//!
//! where the marginal-cost denominator `d` and the effective collision
//! weight `pc_eff` select the variant. Peak-limited variants clamp the
//! root at the peak power. A negative discriminant means no positive
//! stationary point exists and the power is zero.

use thiserror::Error;

use crate::numeric::LOG2_E;
use crate::scenario::Scenario;
use crate::traffic::collision_ratios;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy variant {variant:?} is missing required parameter {missing}")]
    InvalidVariantParams {
        variant: PolicyVariant,
        missing: &'static str,
    },
    #[error("parameter {name} = {value} is outside its range")]
    BadParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Fading(#[from] crate::fading::FadingError),
    #[error(transparent)]
    Traffic(#[from] crate::traffic::TrafficError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Channel-side constants of the rate model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConstants {
    /// Additive Gaussian noise variance (linear).
    pub n0: f64,
    /// Variance of the primary user's received faded signal (linear).
    pub sigma_s2: f64,
}

impl ChannelConstants {
    pub fn new(n0: f64, sigma_s2: f64) -> Result<Self, PolicyError> {
        if !(n0 > 0.0) {
            return Err(PolicyError::BadParameter {
                name: "n0",
                value: n0,
            });
        }
        if !(sigma_s2 >= 0.0) {
            return Err(PolicyError::BadParameter {
                name: "sigma_s2",
                value: sigma_s2,
            });
        }
        Ok(Self { n0, sigma_s2 })
    }
}

/// Power, interference, collision, and efficiency limits of one problem.
/// Exactly one of the transmit-power limits is present per variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConstraints {
    pub p_avg: Option<f64>,
    pub p_pk: Option<f64>,
    pub q_avg: f64,
    pub pc_max: f64,
    pub ee_min: Option<f64>,
    pub p_cr: f64,
}

impl PowerConstraints {
    pub fn average(
        p_avg: f64,
        q_avg: f64,
        pc_max: f64,
        ee_min: Option<f64>,
        p_cr: f64,
    ) -> Result<Self, PolicyError> {
        Self::build(Some(p_avg), None, q_avg, pc_max, ee_min, p_cr)
    }

    pub fn peak(
        p_pk: f64,
        q_avg: f64,
        pc_max: f64,
        ee_min: Option<f64>,
        p_cr: f64,
    ) -> Result<Self, PolicyError> {
        Self::build(None, Some(p_pk), q_avg, pc_max, ee_min, p_cr)
    }

    fn build(
        p_avg: Option<f64>,
        p_pk: Option<f64>,
        q_avg: f64,
        pc_max: f64,
        ee_min: Option<f64>,
        p_cr: f64,
    ) -> Result<Self, PolicyError> {
        for (name, v) in [("p_avg", p_avg), ("p_pk", p_pk), ("ee_min", ee_min)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(PolicyError::BadParameter { name, value: v });
                }
            }
        }
        if !(q_avg > 0.0) {
            return Err(PolicyError::BadParameter {
                name: "q_avg",
                value: q_avg,
            });
        }
        if !(pc_max > 0.0 && pc_max < 1.0) {
            return Err(PolicyError::BadParameter {
                name: "pc_max",
                value: pc_max,
            });
        }
        if !(p_cr > 0.0) {
            return Err(PolicyError::BadParameter {
                name: "p_cr",
                value: p_cr,
            });
        }
        Ok(Self {
            p_avg,
            p_pk,
            q_avg,
            pc_max,
            ee_min,
            p_cr,
        })
    }

    /// True if the transmit-power side is a peak (instantaneous) limit.
    pub fn is_peak(&self) -> bool {
        self.p_pk.is_some()
    }
}

/// Which closed-form policy is in effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyVariant {
    /// EE maximization under average transmit and interference limits.
    EeAvgTx,
    /// EE maximization under peak transmit and interference limits.
    EePeakTx,
    /// The power family whose average meets a required minimum EE.
    MinEeBudget,
    /// Throughput maximization under a power budget and interference limit.
    RateMinEeAvgTx,
    /// Peak-limited version of the throughput policy.
    RateMinEePeakTx,
}

/// Interference weight used inside the discriminant of the budget family.
///
/// `IdleScaled` multiplies the collision ratio by the idle-decision
/// probability, matching the budget family's printed discriminant;
/// `CollisionOnly` uses the bare collision ratio like every other
/// variant. The two differ by well under a percent on typical scenarios;
/// the switch exists for sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetDiscriminantForm {
    #[default]
    IdleScaled,
    CollisionOnly,
}

/// Multiplier set selecting one concrete power policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub variant: PolicyVariant,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub mu: Option<f64>,
    pub vartheta: Option<f64>,
    pub varphi: Option<f64>,
    pub eta: Option<f64>,
    pub ee_min: Option<f64>,
    /// Mixed collision-duration ratio in effect at the operating frame.
    pub pc: f64,
    /// Probability of the idle sensing decision at the operating frame.
    pub pr_idle_decision: f64,
    pub budget_form: BudgetDiscriminantForm,
}

impl PolicyParams {
    fn base(variant: PolicyVariant, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            variant,
            alpha: None,
            lambda: None,
            nu: None,
            mu: None,
            vartheta: None,
            varphi: None,
            eta: None,
            ee_min: None,
            pc,
            pr_idle_decision,
            budget_form: BudgetDiscriminantForm::default(),
        }
    }

    pub fn ee_avg_tx(alpha: f64, lambda: f64, nu: f64, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            alpha: Some(alpha),
            lambda: Some(lambda),
            nu: Some(nu),
            ..Self::base(PolicyVariant::EeAvgTx, pc, pr_idle_decision)
        }
    }

    pub fn ee_peak_tx(alpha: f64, mu: f64, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            alpha: Some(alpha),
            mu: Some(mu),
            ..Self::base(PolicyVariant::EePeakTx, pc, pr_idle_decision)
        }
    }

    pub fn min_ee_budget(eta: f64, ee_min: f64, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            eta: Some(eta),
            ee_min: Some(ee_min),
            ..Self::base(PolicyVariant::MinEeBudget, pc, pr_idle_decision)
        }
    }

    pub fn rate_min_ee_avg_tx(vartheta: f64, varphi: f64, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            vartheta: Some(vartheta),
            varphi: Some(varphi),
            ..Self::base(PolicyVariant::RateMinEeAvgTx, pc, pr_idle_decision)
        }
    }

    pub fn rate_min_ee_peak_tx(vartheta: f64, varphi: f64, pc: f64, pr_idle_decision: f64) -> Self {
        Self {
            vartheta: Some(vartheta),
            varphi: Some(varphi),
            ..Self::base(PolicyVariant::RateMinEePeakTx, pc, pr_idle_decision)
        }
    }

    fn require(&self, field: Option<f64>, missing: &'static str) -> Result<f64, PolicyError> {
        let v = field.ok_or(PolicyError::InvalidVariantParams {
            variant: self.variant,
            missing,
        })?;
        if v.is_nan() || v < 0.0 {
            return Err(PolicyError::BadParameter {
                name: missing,
                value: v,
            });
        }
        Ok(v)
    }
}

/// A validated, frame-resolved power policy ready for node evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PowerPolicy {
    /// Gain-independent part of the marginal-cost denominator.
    d_base: f64,
    /// Coefficient of |g|^2 in the denominator (multiplier times pc).
    d_gain: f64,
    /// Collision weight inside the discriminant.
    pc_eff: f64,
    /// Peak clamp, infinite when absent.
    clamp: f64,
    n0: f64,
    sigma_s2: f64,
}

impl PowerPolicy {
    pub fn new(
        params: &PolicyParams,
        consts: &ChannelConstants,
        limits: &PowerConstraints,
    ) -> Result<Self, PolicyError> {
        if !(params.pc >= 0.0 && params.pc <= 1.0) {
            return Err(PolicyError::BadParameter {
                name: "pc",
                value: params.pc,
            });
        }
        if !(params.pr_idle_decision > 0.0 && params.pr_idle_decision <= 1.0) {
            return Err(PolicyError::BadParameter {
                name: "pr_idle_decision",
                value: params.pr_idle_decision,
            });
        }
        let peak = || {
            limits.p_pk.ok_or(PolicyError::InvalidVariantParams {
                variant: params.variant,
                missing: "p_pk",
            })
        };
        let (d_base, d_gain, pc_eff, clamp) = match params.variant {
            PolicyVariant::EeAvgTx => {
                let alpha = params.require(params.alpha, "alpha")?;
                let lambda = params.require(params.lambda, "lambda")?;
                let nu = params.require(params.nu, "nu")?;
                (alpha + lambda, nu * params.pc, params.pc, f64::INFINITY)
            }
            PolicyVariant::EePeakTx => {
                let alpha = params.require(params.alpha, "alpha")?;
                let mu = params.require(params.mu, "mu")?;
                (alpha, mu * params.pc, params.pc, peak()?)
            }
            PolicyVariant::MinEeBudget => {
                let eta = params.require(params.eta, "eta")?;
                let ee_min = params.require(params.ee_min, "ee_min")?;
                let pc_eff = match params.budget_form {
                    BudgetDiscriminantForm::IdleScaled => params.pr_idle_decision * params.pc,
                    BudgetDiscriminantForm::CollisionOnly => params.pc,
                };
                let clamp = limits.p_pk.unwrap_or(f64::INFINITY);
                (eta * ee_min / (1.0 + eta), 0.0, pc_eff, clamp)
            }
            PolicyVariant::RateMinEeAvgTx => {
                let vartheta = params.require(params.vartheta, "vartheta")?;
                let varphi = params.require(params.varphi, "varphi")?;
                (vartheta, varphi * params.pc, params.pc, f64::INFINITY)
            }
            PolicyVariant::RateMinEePeakTx => {
                let vartheta = params.require(params.vartheta, "vartheta")?;
                let varphi = params.require(params.varphi, "varphi")?;
                (vartheta, varphi * params.pc, params.pc, peak()?)
            }
        };
        Ok(Self {
            d_base,
            d_gain,
            pc_eff,
            clamp,
            n0: consts.n0,
            sigma_s2: consts.sigma_s2,
        })
    }

    /// Marginal-cost denominator at an interference gain.
    pub fn denominator(&self, gain_g: f64) -> f64 {
        self.d_base + self.d_gain * gain_g
    }

    /// Transmit power at one fading state. Infinite only when the
    /// denominator vanishes on an unclamped variant (unbounded
    /// subproblem); solvers treat that as a signal to raise multipliers.
    pub fn power(&self, gain_h: f64, gain_g: f64) -> f64 {
        if gain_h <= 0.0 {
            return 0.0;
        }
        let d = self.denominator(gain_g);
        if d < 0.0 || d.is_nan() {
            return 0.0;
        }
        let n0 = self.n0;
        let s2 = self.sigma_s2;
        let a = LOG2_E / d - (2.0 * n0 + s2) / gain_h;
        let inner = n0 * (n0 + s2) / gain_h - LOG2_E * (n0 + (1.0 - self.pc_eff) * s2) / d;
        let delta = a * a - 4.0 / gain_h * inner;
        if delta < 0.0 {
            return 0.0;
        }
        (0.5 * (a + delta.sqrt())).max(0.0).min(self.clamp)
    }

    pub fn peak_clamp(&self) -> f64 {
        self.clamp
    }

    fn stationarity_residual(&self, gain_h: f64, gain_g: f64, power: f64) -> f64 {
        let marginal = LOG2_E
            * ((1.0 - self.pc_eff) * gain_h / (self.n0 + power * gain_h)
                + self.pc_eff * gain_h / (self.n0 + self.sigma_s2 + power * gain_h));
        marginal - self.denominator(gain_g)
    }
}

/// Optimal transmit power of the selected variant at one fading state.
pub fn optimal_power(
    params: &PolicyParams,
    gains: (f64, f64),
    consts: &ChannelConstants,
    limits: &PowerConstraints,
) -> Result<f64, PolicyError> {
    Ok(PowerPolicy::new(params, consts, limits)?.power(gains.0, gains.1))
}

/// Stationarity residual of the allocated power: the marginal rate gain
/// minus the marginal cost. Vanishes at interior optima, is nonpositive
/// where zero power is optimal, and nonnegative at a binding peak clamp.
pub fn kkt_residual(
    params: &PolicyParams,
    gains: (f64, f64),
    power: f64,
    consts: &ChannelConstants,
) -> Result<f64, PolicyError> {
    // The clamp never enters the stationarity expression itself.
    let unlimited = PowerConstraints {
        p_avg: None,
        p_pk: Some(f64::MAX),
        q_avg: 1.0,
        pc_max: 0.5,
        ee_min: None,
        p_cr: 1.0,
    };
    let policy = PowerPolicy::new(params, consts, &unlimited)?;
    Ok(policy.stationarity_residual(gains.0, gains.1, power))
}

/// Average spectral efficiency (bits/s/Hz) of an arbitrary power rule at
/// a given frame: transmit-phase fraction times the expectation of the
/// collision-weighted mix of clean and interference-corrupted log rates.
pub fn avg_rate_with<F: Fn(f64, f64) -> f64>(
    rule: F,
    scenario: &Scenario,
    frame_ms: f64,
) -> Result<f64, PolicyError> {
    let tau = scenario.sensing.tau_ms;
    let ratios = collision_ratios(&scenario.traffic, &scenario.sensing, frame_ms, tau)?;
    let (pr_idle, pr_busy) = scenario.traffic.priors();
    let w0 = pr_idle * (1.0 - scenario.sensing.p_f);
    let w1 = pr_busy * (1.0 - scenario.sensing.p_d);
    let clean = w0 * (1.0 - ratios.pc0) + w1 * (1.0 - ratios.pc1);
    let corrupted = w0 * ratios.pc0 + w1 * ratios.pc1;
    let n0 = scenario.consts.n0;
    let ns = n0 + scenario.consts.sigma_s2;
    let mean = scenario.grid.expect(|h, g| {
        let p = rule(h, g);
        clean * (1.0 + p * h / n0).log2() + corrupted * (1.0 + p * h / ns).log2()
    })?;
    Ok((frame_ms - tau) / frame_ms * mean)
}

/// Average transmit power and average interference of a power rule.
pub fn resource_usage_with<F: Fn(f64, f64) -> f64>(
    rule: F,
    scenario: &Scenario,
    frame_ms: f64,
    pc: f64,
    pr_idle_decision: f64,
) -> Result<(f64, f64), PolicyError> {
    let tau = scenario.sensing.tau_ms;
    let eff = (frame_ms - tau) / frame_ms * pr_idle_decision;
    let avg_tx = eff * scenario.grid.expect(|h, g| rule(h, g))?;
    let avg_if = eff * pc * scenario.grid.expect(|h, g| rule(h, g) * g)?;
    Ok((avg_tx, avg_if))
}

/// Average spectral efficiency of the policy selected by `params` at the
/// scenario's fixed frame.
pub fn avg_rate(params: &PolicyParams, scenario: &Scenario) -> Result<f64, PolicyError> {
    let frame = scenario.fixed_frame_ms()?;
    avg_rate_at(params, scenario, frame)
}

pub fn avg_rate_at(
    params: &PolicyParams,
    scenario: &Scenario,
    frame_ms: f64,
) -> Result<f64, PolicyError> {
    let policy = PowerPolicy::new(params, &scenario.consts, &scenario.limits)?;
    avg_rate_with(|h, g| policy.power(h, g), scenario, frame_ms)
}

/// Average transmit power and interference produced by the policy at the
/// scenario's fixed frame, using the collision ratio carried in `params`.
pub fn resource_usage(
    params: &PolicyParams,
    scenario: &Scenario,
) -> Result<(f64, f64), PolicyError> {
    let frame = scenario.fixed_frame_ms()?;
    resource_usage_at(params, scenario, frame)
}

pub fn resource_usage_at(
    params: &PolicyParams,
    scenario: &Scenario,
    frame_ms: f64,
) -> Result<(f64, f64), PolicyError> {
    let policy = PowerPolicy::new(params, &scenario.consts, &scenario.limits)?;
    resource_usage_with(
        |h, g| policy.power(h, g),
        scenario,
        frame_ms,
        params.pc,
        params.pr_idle_decision,
    )
}

/// Energy efficiency in bits per joule: rate over transmit-plus-circuit
/// power.
pub fn energy_efficiency(params: &PolicyParams, scenario: &Scenario) -> Result<f64, PolicyError> {
    let frame = scenario.fixed_frame_ms()?;
    energy_efficiency_at(params, scenario, frame)
}

pub fn energy_efficiency_at(
    params: &PolicyParams,
    scenario: &Scenario,
    frame_ms: f64,
) -> Result<f64, PolicyError> {
    let rate = avg_rate_at(params, scenario, frame_ms)?;
    let (avg_tx, _) = resource_usage_at(params, scenario, frame_ms)?;
    Ok(rate / (avg_tx + scenario.limits.p_cr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::FadingGrid;
    use crate::scenario::{FrameSpec, SolverConfig};
    use crate::sensing::SensingSpec;
    use crate::traffic::TrafficModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consts() -> ChannelConstants {
        ChannelConstants::new(0.01, 0.1).unwrap()
    }

    fn avg_limits() -> PowerConstraints {
        PowerConstraints::average(10.0, 0.01, 0.2, None, 1.0).unwrap()
    }

    fn peak_limits(p_pk: f64) -> PowerConstraints {
        PowerConstraints::peak(p_pk, 0.01, 0.2, None, 1.0).unwrap()
    }

    fn scenario() -> Scenario {
        Scenario {
            traffic: TrafficModel::new(352.0, 650.0).unwrap(),
            sensing: SensingSpec::new(0.9, 0.1, 7.211485773517232, 1e5, 0.1).unwrap(),
            consts: consts(),
            limits: avg_limits(),
            frame: FrameSpec::Fixed(125.0),
            grid: FadingGrid::build(32).unwrap(),
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn water_filling_degenerate_case() {
        let consts = ChannelConstants::new(0.01, 0.0).unwrap();
        let params = PolicyParams::ee_avg_tx(LOG2_E, 0.0, 0.0, 0.1128, 0.619);
        let p = optimal_power(&params, (1.0, 0.5), &consts, &avg_limits()).unwrap();
        assert!((p - 0.99).abs() < 1e-14, "p={p}");
    }

    #[test]
    fn water_filling_matches_closed_form_across_draws() {
        let consts = ChannelConstants::new(0.01, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let d: f64 = rng.gen_range(0.05..5.0);
            let h: f64 = rng.gen_range(0.01..10.0);
            let params = PolicyParams::ee_avg_tx(d, 0.0, 0.0, 0.3, 0.6);
            let p = optimal_power(&params, (h, 1.0), &consts, &avg_limits()).unwrap();
            let want = (LOG2_E / d - 0.01 / h).max(0.0);
            assert!((p - want).abs() < 1e-10, "p={p} want={want}");
        }
    }

    #[test]
    fn peak_variant_clamps_and_saturates_as_cost_vanishes() {
        let limits = peak_limits(10.0);
        let params = PolicyParams::ee_peak_tx(1e-14, 0.0, 0.1128, 0.619);
        let p = optimal_power(&params, (1.0, 1.0), &consts(), &limits).unwrap();
        assert_eq!(p, 10.0);
    }

    #[test]
    fn missing_multiplier_is_reported() {
        let mut params = PolicyParams::ee_avg_tx(1.0, 0.1, 0.2, 0.1, 0.6);
        params.nu = None;
        let err = optimal_power(&params, (1.0, 1.0), &consts(), &avg_limits()).unwrap_err();
        assert!(matches!(
            err,
            PolicyError::InvalidVariantParams { missing: "nu", .. }
        ));
        let params = PolicyParams::ee_peak_tx(1.0, 0.1, 0.1, 0.6);
        let err = optimal_power(&params, (1.0, 1.0), &consts(), &avg_limits()).unwrap_err();
        assert!(matches!(
            err,
            PolicyError::InvalidVariantParams { missing: "p_pk", .. }
        ));
    }

    fn random_params(rng: &mut ChaCha8Rng, variant: PolicyVariant) -> PolicyParams {
        let pc: f64 = rng.gen_range(0.0..0.9);
        let prd: f64 = rng.gen_range(0.1..1.0);
        match variant {
            PolicyVariant::EeAvgTx => PolicyParams::ee_avg_tx(
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..20.0),
                pc,
                prd,
            ),
            PolicyVariant::EePeakTx => {
                PolicyParams::ee_peak_tx(rng.gen_range(0.01..3.0), rng.gen_range(0.0..20.0), pc, prd)
            }
            PolicyVariant::MinEeBudget => PolicyParams::min_ee_budget(
                rng.gen_range(0.01..20.0),
                rng.gen_range(0.1..4.0),
                pc,
                prd,
            ),
            PolicyVariant::RateMinEeAvgTx => PolicyParams::rate_min_ee_avg_tx(
                rng.gen_range(0.01..3.0),
                rng.gen_range(0.0..20.0),
                pc,
                prd,
            ),
            PolicyVariant::RateMinEePeakTx => PolicyParams::rate_min_ee_peak_tx(
                rng.gen_range(0.01..3.0),
                rng.gen_range(0.0..20.0),
                pc,
                prd,
            ),
        }
    }

    #[test]
    fn kkt_residual_vanishes_at_interior_optima() {
        let consts = consts();
        let limits = peak_limits(5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let variants = [
            PolicyVariant::EeAvgTx,
            PolicyVariant::EePeakTx,
            PolicyVariant::MinEeBudget,
            PolicyVariant::RateMinEeAvgTx,
            PolicyVariant::RateMinEePeakTx,
        ];
        let mut interior = 0;
        for variant in variants {
            for _ in 0..400 {
                let params = random_params(&mut rng, variant);
                let gains = (rng.gen_range(0.01..8.0), rng.gen_range(0.01..8.0));
                let p = optimal_power(&params, gains, &consts, &limits).unwrap();
                let res = kkt_residual(&params, gains, p, &consts).unwrap();
                if p == 0.0 {
                    assert!(res <= 1e-9, "zero power must not want growth, res={res}");
                } else if p >= 5.0 {
                    assert!(res >= -1e-9, "clamped power must press the cap, res={res}");
                } else {
                    interior += 1;
                    assert!(res.abs() < 1e-9, "interior residual {res} for {params:?}");
                }
            }
        }
        assert!(interior > 300, "draw ranges should produce interior optima");
    }

    #[test]
    fn budget_discriminant_forms_differ_but_agree_when_scaling_is_trivial() {
        let consts = consts();
        let limits = avg_limits();
        let mut printed = PolicyParams::min_ee_budget(0.5, 1.0, 0.3, 0.62);
        let mut collision = printed;
        collision.budget_form = BudgetDiscriminantForm::CollisionOnly;
        let a = optimal_power(&printed, (1.0, 1.0), &consts, &limits).unwrap();
        let b = optimal_power(&collision, (1.0, 1.0), &consts, &limits).unwrap();
        assert!(a > b, "idle scaling shrinks the effective collision weight");
        // With a certain idle decision the two forms coincide.
        printed.pr_idle_decision = 1.0;
        collision.pr_idle_decision = 1.0;
        let a = optimal_power(&printed, (1.0, 1.0), &consts, &limits).unwrap();
        let b = optimal_power(&collision, (1.0, 1.0), &consts, &limits).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_policy_gives_zero_rate_and_usage() {
        let sc = scenario();
        // An enormous marginal cost drives every node to zero power.
        let params = PolicyParams::ee_avg_tx(1e12, 0.0, 0.0, 0.1128, 0.619);
        assert_eq!(avg_rate(&params, &sc).unwrap(), 0.0);
        let (tx, interf) = resource_usage(&params, &sc).unwrap();
        assert_eq!((tx, interf), (0.0, 0.0));
        assert_eq!(energy_efficiency(&params, &sc).unwrap(), 0.0);
    }

    #[test]
    fn constant_rule_usage_is_exact() {
        let sc = scenario();
        let frame = 125.0;
        let (tx, interf) =
            resource_usage_with(|_, _| 2.5, &sc, frame, 0.1128, 0.619).unwrap();
        let eff = (frame - sc.sensing.tau_ms) / frame * 0.619;
        assert!((tx - eff * 2.5).abs() < 1e-12);
        // E{g} = 1 for the interference expectation.
        assert!((interf - eff * 0.1128 * 2.5).abs() < 1e-9);
    }

    #[test]
    fn interference_bounded_by_max_node_gain() {
        let sc = scenario();
        let params = PolicyParams::ee_avg_tx(0.5, 0.0, 1.0, 0.1128, 0.619);
        let (tx, interf) = resource_usage(&params, &sc).unwrap();
        let max_g = sc
            .grid
            .nodes()
            .iter()
            .map(|n| n.gain_g)
            .fold(0.0, f64::max);
        assert!(interf <= tx * 0.1128 * max_g);
    }

    #[test]
    fn no_interference_variance_collapses_the_rate_mix() {
        let mut sc = scenario();
        sc.consts = ChannelConstants::new(0.01, 0.0).unwrap();
        let params = PolicyParams::ee_avg_tx(0.7, 0.1, 0.4, 0.1128, 0.619);
        let rate = avg_rate(&params, &sc).unwrap();
        // With sigma_s2 = 0 the corrupted and clean log terms coincide, so
        // the rate reduces to the single-log expectation with the total
        // idle-decision weight.
        let policy = PowerPolicy::new(&params, &sc.consts, &sc.limits).unwrap();
        let (pr_idle, pr_busy) = sc.traffic.priors();
        let w = pr_idle * 0.9 + pr_busy * 0.1;
        let frame = 125.0;
        let direct = sc
            .grid
            .expect(|h, g| w * (1.0 + policy.power(h, g) * h / 0.01).log2())
            .unwrap()
            * (frame - sc.sensing.tau_ms)
            / frame;
        assert!((rate - direct).abs() < 1e-12);
    }

    #[test]
    fn vanishing_transmit_phase_reduces_to_slotted_weights() {
        // As the transmit phase shrinks, pc0 -> 0 and pc1 -> 1: the clean
        // log carries the correct-detection weight and the corrupted log
        // the missed-detection weight.
        let mut sc = scenario();
        let frame = sc.sensing.tau_ms + 1e-7;
        sc.frame = FrameSpec::Fixed(frame);
        let params = PolicyParams::ee_avg_tx(0.7, 0.0, 0.0, 0.057, 0.619);
        let rate = avg_rate(&params, &sc).unwrap();
        let policy = PowerPolicy::new(&params, &sc.consts, &sc.limits).unwrap();
        let (pr_idle, pr_busy) = sc.traffic.priors();
        let (w0, w1) = (pr_idle * 0.9, pr_busy * 0.1);
        let direct = sc
            .grid
            .expect(|h, g| {
                let p = policy.power(h, g);
                w0 * (1.0 + p * h / 0.01).log2() + w1 * (1.0 + p * h / 0.11).log2()
            })
            .unwrap()
            * (frame - sc.sensing.tau_ms)
            / frame;
        assert!(
            ((rate - direct) / direct).abs() < 1e-6,
            "rate={rate} direct={direct}"
        );
    }

    #[test]
    fn constraints_enforce_exactly_one_power_limit() {
        assert!(PowerConstraints::average(1.0, 1.0, 0.2, None, 1.0).is_ok());
        assert!(PowerConstraints::average(-1.0, 1.0, 0.2, None, 1.0).is_err());
        assert!(PowerConstraints::peak(1.0, 1.0, 1.5, None, 1.0).is_err());
        assert!(PowerConstraints::peak(1.0, 1.0, 0.2, Some(0.0), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_damping_in_cost_terms(
            h in 0.01f64..10.0,
            g in 0.0f64..10.0,
            alpha in 0.01f64..2.0,
            lambda in 0.0f64..2.0,
            nu in 0.0f64..10.0,
            pc in 0.0f64..0.9,
            bump in 0.01f64..0.5,
        ) {
            let consts = ChannelConstants::new(0.01, 0.1).unwrap();
            let limits = PowerConstraints::average(10.0, 0.01, 0.2, None, 1.0).unwrap();
            let base = PolicyParams::ee_avg_tx(alpha, lambda, nu, pc, 0.62);
            let p0 = optimal_power(&base, (h, g), &consts, &limits).unwrap();
            for tweaked in [
                PolicyParams::ee_avg_tx(alpha + bump, lambda, nu, pc, 0.62),
                PolicyParams::ee_avg_tx(alpha, lambda + bump, nu, pc, 0.62),
                PolicyParams::ee_avg_tx(alpha, lambda, nu + bump, pc, 0.62),
                PolicyParams::ee_avg_tx(alpha, lambda, nu, (pc + bump).min(1.0), 0.62),
            ] {
                let p1 = optimal_power(&tweaked, (h, g), &consts, &limits).unwrap();
                prop_assert!(p1 <= p0 + 1e-12);
            }
            if nu > 0.0 && pc > 0.0 {
                let richer = optimal_power(&base, (h, g + bump), &consts, &limits).unwrap();
                prop_assert!(richer <= p0 + 1e-12);
            }
        }

        #[test]
        fn peak_clamp_is_never_exceeded(
            h in 0.01f64..20.0,
            g in 0.0f64..20.0,
            alpha in 0.0f64..2.0,
            mu in 0.0f64..5.0,
            p_pk in 0.1f64..20.0,
        ) {
            let consts = ChannelConstants::new(0.01, 0.1).unwrap();
            let limits = PowerConstraints::peak(p_pk, 0.01, 0.2, None, 1.0).unwrap();
            let params = PolicyParams::ee_peak_tx(alpha, mu, 0.2, 0.62);
            let p = optimal_power(&params, (h, g), &consts, &limits).unwrap();
            prop_assert!(p <= p_pk);
            prop_assert!(p >= 0.0);
        }
    }
}
