//! Energy-detector operating characteristics and the posteriors of
//! primary-user activity behind an idle sensing decision.

use thiserror::Error;

use crate::numeric::{q, q_inv};
use crate::traffic::TrafficModel;

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("probability out of range: {name} = {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("sensing window {tau_ms} ms at {fs_hz} Hz holds fewer than one sample")]
    TooFewSamples { tau_ms: f64, fs_hz: f64 },
    #[error("invalid detector parameter: {name} = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("targets need detection above false alarm, got pd={target_pd}, pf={target_pf}")]
    TargetsNotOrdered { target_pd: f64, target_pf: f64 },
    #[error("idle decision has zero probability (p_f = 1 and p_d = 1)")]
    ZeroIdleProbability,
}

/// Sensing performance and detector parameters of the secondary link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingSpec {
    /// Probability of detecting the primary user when it is active.
    pub p_d: f64,
    /// Probability of a false alarm when the channel is vacant.
    pub p_f: f64,
    /// Sensing duration in milliseconds.
    pub tau_ms: f64,
    /// Detector sampling frequency in Hz.
    pub fs_hz: f64,
    /// Received primary SNR seen by the detector (linear).
    pub snr_s: f64,
}

impl SensingSpec {
    pub fn new(
        p_d: f64,
        p_f: f64,
        tau_ms: f64,
        fs_hz: f64,
        snr_s: f64,
    ) -> Result<Self, SensingError> {
        check_probability("p_d", p_d)?;
        check_probability("p_f", p_f)?;
        if !(tau_ms >= 0.0) {
            return Err(SensingError::BadParameter {
                name: "tau_ms",
                value: tau_ms,
            });
        }
        if !(fs_hz > 0.0) {
            return Err(SensingError::BadParameter {
                name: "fs_hz",
                value: fs_hz,
            });
        }
        if !(snr_s > 0.0) {
            return Err(SensingError::BadParameter {
                name: "snr_s",
                value: snr_s,
            });
        }
        Ok(Self {
            p_d,
            p_f,
            tau_ms,
            fs_hz,
            snr_s,
        })
    }

    /// Designs the sensing duration from target probabilities, keeping the
    /// targets as the operating point.
    pub fn from_targets(
        snr_s: f64,
        fs_hz: f64,
        target_pd: f64,
        target_pf: f64,
    ) -> Result<Self, SensingError> {
        let tau_ms = sensing_duration_for_targets(snr_s, fs_hz, target_pd, target_pf)?;
        Self::new(target_pd, target_pf, tau_ms, fs_hz, snr_s)
    }

    /// Derives the operating point from an explicit normalized decision
    /// threshold and sensing duration.
    pub fn from_threshold(
        snr_s: f64,
        tau_ms: f64,
        fs_hz: f64,
        threshold: f64,
    ) -> Result<Self, SensingError> {
        let (p_d, p_f) = detector_roc(snr_s, tau_ms, fs_hz, threshold)?;
        Self::new(p_d, p_f, tau_ms, fs_hz, snr_s)
    }

    /// Number of detector samples in the sensing window.
    pub fn samples(&self) -> f64 {
        self.tau_ms / 1e3 * self.fs_hz
    }
}

/// Detection and false-alarm probabilities of the energy detector at a
/// normalized decision level (threshold over noise variance).
pub fn detector_roc(
    snr_s: f64,
    tau_ms: f64,
    fs_hz: f64,
    threshold: f64,
) -> Result<(f64, f64), SensingError> {
    if !(snr_s > 0.0) {
        return Err(SensingError::BadParameter {
            name: "snr_s",
            value: snr_s,
        });
    }
    let samples = tau_ms / 1e3 * fs_hz;
    if !(samples >= 1.0) {
        return Err(SensingError::TooFewSamples { tau_ms, fs_hz });
    }
    let p_d = q((threshold - snr_s - 1.0) * (samples / (2.0 * snr_s + 1.0)).sqrt());
    let p_f = q((threshold - 1.0) * samples.sqrt());
    Ok((p_d, p_f))
}

/// Sensing duration (ms) at which the detector threshold can meet both
/// target probabilities simultaneously. Requires 0 < pf < pd < 1.
pub fn sensing_duration_for_targets(
    snr_s: f64,
    fs_hz: f64,
    target_pd: f64,
    target_pf: f64,
) -> Result<f64, SensingError> {
    if !(snr_s > 0.0) {
        return Err(SensingError::BadParameter {
            name: "snr_s",
            value: snr_s,
        });
    }
    if !(fs_hz > 0.0) {
        return Err(SensingError::BadParameter {
            name: "fs_hz",
            value: fs_hz,
        });
    }
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(SensingError::BadProbability {
            name: "target_pf",
            value: target_pf,
        });
    }
    if !(target_pd > 0.0 && target_pd < 1.0) {
        return Err(SensingError::BadProbability {
            name: "target_pd",
            value: target_pd,
        });
    }
    if target_pd <= target_pf {
        return Err(SensingError::TargetsNotOrdered {
            target_pd,
            target_pf,
        });
    }
    let num = q_inv(target_pf) - (2.0 * snr_s + 1.0).sqrt() * q_inv(target_pd);
    let tau_s = (num / snr_s).powi(2) / fs_hz;
    Ok(tau_s * 1e3)
}

/// Normalized threshold that places the false-alarm rate at `target_pf`
/// for the given sensing window.
pub fn threshold_for_false_alarm(tau_ms: f64, fs_hz: f64, target_pf: f64) -> f64 {
    1.0 + q_inv(target_pf) / (tau_ms / 1e3 * fs_hz).sqrt()
}

/// Probabilities of primary activity conditioned on the idle decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdlePosterior {
    /// Total probability of declaring the channel idle.
    pub pr_idle_decision: f64,
    /// Pr{channel vacant | declared idle}.
    pub post_idle: f64,
    /// Pr{channel occupied | declared idle}.
    pub post_busy: f64,
}

/// Posterior state probabilities given that sensing declared the channel
/// idle. Fails only when the idle decision is impossible.
pub fn posterior_given_idle(
    traffic: &TrafficModel,
    p_d: f64,
    p_f: f64,
) -> Result<IdlePosterior, SensingError> {
    check_probability("p_d", p_d)?;
    check_probability("p_f", p_f)?;
    let (pr_idle, pr_busy) = traffic.priors();
    let pr_idle_decision = pr_idle * (1.0 - p_f) + pr_busy * (1.0 - p_d);
    if pr_idle_decision <= 0.0 {
        return Err(SensingError::ZeroIdleProbability);
    }
    let post_idle = pr_idle * (1.0 - p_f) / pr_idle_decision;
    Ok(IdlePosterior {
        pr_idle_decision,
        post_idle,
        post_busy: 1.0 - post_idle,
    })
}

fn check_probability(name: &'static str, value: f64) -> Result<(), SensingError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SensingError::BadProbability { name, value })
    }
}
