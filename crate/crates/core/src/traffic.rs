//! Analytic model of the unslotted ON/OFF primary-user process.
//!
//! The licensed transmitter alternates between exponentially distributed
//! ON (busy) and OFF (idle) sojourns. From the two mean durations this
//! module derives the stationary priors, the collision-duration ratios of
//! a secondary frame that transmits after an idle sensing decision, their
//! derivative in the frame length, and the largest frame duration that
//! still honors a collision-ratio cap.

use thiserror::Error;

use crate::numeric::bisect_root;
use crate::sensing::{posterior_given_idle, SensingSpec};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("mean sojourn durations must be positive, got on={mean_on_ms} ms, off={mean_off_ms} ms")]
    NonPositiveMean { mean_on_ms: f64, mean_off_ms: f64 },
    #[error("frame duration {frame_ms} ms leaves no transmit phase after {tau_ms} ms of sensing")]
    NoTransmitPhase { frame_ms: f64, tau_ms: f64 },
    #[error("collision cap must lie strictly inside (0,1), got {0}")]
    BadCollisionCap(f64),
    #[error("frame cap {tf_cap_ms} ms does not exceed the sensing duration {tau_ms} ms")]
    BadFrameCap { tf_cap_ms: f64, tau_ms: f64 },
    #[error(transparent)]
    Sensing(#[from] crate::sensing::SensingError),
}

/// Exponential ON/OFF activity model of the primary user.
///
/// Stores the unambiguous mean sojourn durations; priors and the
/// characteristic collision time are always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    mean_on_ms: f64,
    mean_off_ms: f64,
}

impl TrafficModel {
    pub fn new(mean_on_ms: f64, mean_off_ms: f64) -> Result<Self, TrafficError> {
        if !(mean_on_ms > 0.0) || !(mean_off_ms > 0.0) {
            return Err(TrafficError::NonPositiveMean {
                mean_on_ms,
                mean_off_ms,
            });
        }
        Ok(Self {
            mean_on_ms,
            mean_off_ms,
        })
    }

    pub fn mean_on_ms(&self) -> f64 {
        self.mean_on_ms
    }

    pub fn mean_off_ms(&self) -> f64 {
        self.mean_off_ms
    }

    /// Stationary probability that the channel is vacant.
    pub fn pr_idle(&self) -> f64 {
        self.mean_off_ms / (self.mean_on_ms + self.mean_off_ms)
    }

    /// Stationary probability that the channel is occupied.
    pub fn pr_busy(&self) -> f64 {
        1.0 - self.pr_idle()
    }

    /// Prior probabilities (vacant, occupied).
    pub fn priors(&self) -> (f64, f64) {
        (self.pr_idle(), self.pr_busy())
    }

    /// Characteristic collision time: the harmonic mix
    /// mean_on * mean_off / (mean_on + mean_off). It is the time constant
    /// of both conditional collision-ratio exponents and is symmetric in
    /// the two means.
    pub fn characteristic_time_ms(&self) -> f64 {
        self.mean_on_ms * self.mean_off_ms / (self.mean_on_ms + self.mean_off_ms)
    }

    /// Default cap for frame-duration searches: ten full ON+OFF cycles.
    pub fn default_frame_cap_ms(&self) -> f64 {
        10.0 * (self.mean_on_ms + self.mean_off_ms)
    }
}

/// Expected collision-duration ratios of one transmit phase, conditioned
/// on the true initial state of the primary user and mixed over the
/// posterior given an idle sensing decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRatios {
    /// Ratio given the channel started idle (collision builds up later).
    pub pc0: f64,
    /// Ratio given the channel started busy (missed detection).
    pub pc1: f64,
    /// Posterior-weighted mix of `pc0` and `pc1`.
    pub pc_avg: f64,
}

/// (1 - exp(-x)) / x with a second-order Taylor branch for vanishing
/// transmit phases, guarding against catastrophic cancellation.
fn one_minus_exp_over(x: f64, t_tx_ms: f64) -> f64 {
    if t_tx_ms < 1e-6 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -f64::exp_m1(-x) / x
    }
}

/// Collision-duration ratios for a frame of `frame_ms` with `tau_ms` spent
/// sensing. Requires `frame_ms > tau_ms >= 0`.
pub fn collision_ratios(
    traffic: &TrafficModel,
    sensing: &SensingSpec,
    frame_ms: f64,
    tau_ms: f64,
) -> Result<CollisionRatios, TrafficError> {
    let t_tx = transmit_phase(frame_ms, tau_ms)?;
    let (pr_idle, pr_busy) = traffic.priors();
    let t_char = traffic.characteristic_time_ms();
    let em = one_minus_exp_over(t_tx / t_char, t_tx);
    let pc0 = pr_busy * (1.0 - em);
    let pc1 = pr_busy + pr_idle * em;
    let post = posterior_given_idle(traffic, sensing.p_d, sensing.p_f)?;
    let pc_avg = post.post_idle * pc0 + post.post_busy * pc1;
    Ok(CollisionRatios { pc0, pc1, pc_avg })
}

/// First derivative of the mixed collision ratio with respect to the frame
/// duration. Positive iff `p_f < p_d`, negative iff `p_f > p_d`, zero at
/// equality.
pub fn collision_ratio_derivative(
    traffic: &TrafficModel,
    sensing: &SensingSpec,
    frame_ms: f64,
    tau_ms: f64,
) -> Result<f64, TrafficError> {
    let t_tx = transmit_phase(frame_ms, tau_ms)?;
    let (pr_idle, pr_busy) = traffic.priors();
    let t_char = traffic.characteristic_time_ms();
    let post = posterior_given_idle(traffic, sensing.p_d, sensing.p_f)?;
    // Both conditional terms share the prefactor T_char and the bracketed
    // kernel; only the posterior weights differ.
    let prefactor = t_char * (post.post_idle * pr_busy - post.post_busy * pr_idle);
    let x = t_tx / t_char;
    let kernel = if t_tx < 1e-6 {
        // Series limit of the bracket as the transmit phase vanishes.
        (0.5 - x / 3.0) / (t_char * t_char)
    } else {
        let e = (-x).exp();
        (1.0 - e) / (t_tx * t_tx) - e / (t_char * t_tx)
    };
    Ok(prefactor * kernel)
}

/// Outcome of inverting the collision constraint for the frame duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameBound {
    /// The constraint binds at this frame duration.
    Bounded(f64),
    /// The constraint holds everywhere up to the cap; the cap is returned.
    CapLimited(f64),
    /// No frame duration can satisfy the cap.
    Infeasible { post_busy: f64, pc_max: f64 },
}

impl FrameBound {
    /// Usable frame limit, if any.
    pub fn limit_ms(&self) -> Option<f64> {
        match *self {
            FrameBound::Bounded(t) | FrameBound::CapLimited(t) => Some(t),
            FrameBound::Infeasible { .. } => None,
        }
    }
}

/// Largest frame duration in (tau, tf_cap] whose mixed collision ratio
/// stays within `pc_max`.
///
/// For reliable sensing (`p_f < p_d`) the ratio increases from the
/// posterior-busy floor toward the busy prior, so the constraint is
/// either infeasible (cap below the floor), slack up to the cap (cap at
/// or above the prior), or binds at a unique duration found by bisection.
/// For `p_f >= p_d` the ratio is nonincreasing and the cap either holds
/// from the start or never.
pub fn max_frame_for_collision(
    traffic: &TrafficModel,
    sensing: &SensingSpec,
    tau_ms: f64,
    pc_max: f64,
    tf_cap_ms: f64,
) -> Result<FrameBound, TrafficError> {
    if !(pc_max > 0.0 && pc_max < 1.0) {
        return Err(TrafficError::BadCollisionCap(pc_max));
    }
    if !(tf_cap_ms > tau_ms) {
        return Err(TrafficError::BadFrameCap { tf_cap_ms, tau_ms });
    }
    let post = posterior_given_idle(traffic, sensing.p_d, sensing.p_f)?;
    let pr_busy = traffic.pr_busy();
    if sensing.p_f < sensing.p_d {
        if post.post_busy > pc_max {
            return Ok(FrameBound::Infeasible {
                post_busy: post.post_busy,
                pc_max,
            });
        }
        if pr_busy <= pc_max {
            return Ok(FrameBound::CapLimited(tf_cap_ms));
        }
        let pc_at = |frame: f64| {
            collision_ratios(traffic, sensing, frame, tau_ms)
                .expect("frame > tau inside the bracket")
                .pc_avg
        };
        if pc_at(tf_cap_ms) <= pc_max {
            return Ok(FrameBound::CapLimited(tf_cap_ms));
        }
        // Strictly increasing between the floor and the prior; bisect well
        // below the stated 1e-3 ms tolerance.
        let lo = tau_ms + 1e-9 * (tf_cap_ms - tau_ms).max(1.0);
        let root = bisect_root(|t| pc_at(t) - pc_max, lo, tf_cap_ms, 1e-6, 1e-12, 200);
        Ok(FrameBound::Bounded(root))
    } else {
        // Nonincreasing ratio: the supremum over frames is the value at
        // the start of the range.
        if post.post_busy <= pc_max {
            Ok(FrameBound::CapLimited(tf_cap_ms))
        } else {
            Ok(FrameBound::Infeasible {
                post_busy: post.post_busy,
                pc_max,
            })
        }
    }
}

fn transmit_phase(frame_ms: f64, tau_ms: f64) -> Result<f64, TrafficError> {
    if !(frame_ms > tau_ms) || tau_ms < 0.0 {
        return Err(TrafficError::NoTransmitPhase { frame_ms, tau_ms });
    }
    Ok(frame_ms - tau_ms)
}
