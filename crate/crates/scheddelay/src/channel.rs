//! Per-slot Rayleigh fading, SIR evaluation, and the conditional success
//! probability of a link given the geometry and the current activity
//! pattern.
//!
//! Power cancels out of every SIR because all SAPs transmit at the same
//! level, so `p_st` is carried for configuration fidelity only.

use crate::geometry::{torus_distance, NetworkRealization};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("path-loss exponent must exceed 2, got {0}")]
    BadAlpha(f64),
    #[error("SIR threshold must be positive, got {0}")]
    BadTheta(f64),
    #[error("distance must be positive, got {0}")]
    BadDistance(f64),
}

/// Propagation and detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path-loss exponent, strictly greater than 2.
    pub alpha: f64,
    /// SIR detection threshold, linear scale.
    pub theta: f64,
    /// Transmit power in linear mW; SIR-invariant, kept for config fidelity.
    pub p_st: f64,
    /// Cached 2/alpha.
    pub delta: f64,
}

impl ChannelParams {
    pub fn new(alpha: f64, theta: f64, p_st: f64) -> Result<Self, ChannelError> {
        if !(alpha > 2.0) {
            return Err(ChannelError::BadAlpha(alpha));
        }
        if !(theta > 0.0) {
            return Err(ChannelError::BadTheta(theta));
        }
        Ok(Self { alpha, theta, p_st, delta: 2.0 / alpha })
    }

    /// Threshold given in dB; 0 dB maps to exactly 1.0.
    pub fn from_db(alpha: f64, theta_db: f64, p_st_dbm: f64) -> Result<Self, ChannelError> {
        Ok(Self::new(alpha, db_to_linear(theta_db), db_to_linear(p_st_dbm))?)
    }
}

/// `10^(x/10)` with the exact fixed point at 0 dB.
pub fn db_to_linear(db: f64) -> f64 {
    if db == 0.0 {
        1.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Which SAPs transmit in the current slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMask {
    active: Vec<bool>,
}

impl ActivityMask {
    pub fn all_idle(n: usize) -> Self {
        Self { active: vec![false; n] }
    }

    pub fn all_active(n: usize) -> Self {
        Self { active: vec![true; n] }
    }

    pub fn from_flags(active: Vec<bool>) -> Self {
        Self { active }
    }

    pub fn set(&mut self, sap: usize, on: bool) {
        self.active[sap] = on;
    }

    pub fn is_active(&self, sap: usize) -> bool {
        self.active[sap]
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn count_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Free-space style power-law gain `d^(-alpha)`.
pub fn path_loss(d: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::BadDistance(d));
    }
    Ok(d.powf(-alpha))
}

/// Draw fresh unit-mean exponential fades for the serving and all active
/// interfering links and report whether the slot's SIR clears `theta`.
///
/// Fades are independent across slots and links; call once per slot.
pub fn draw_slot_success<R: Rng + ?Sized>(
    net: &NetworkRealization,
    ue: (usize, usize),
    mask: &ActivityMask,
    params: &ChannelParams,
    rng: &mut R,
) -> bool {
    let (serving, idx) = ue;
    debug_assert!(mask.is_active(serving), "serving SAP must transmit");
    let d0 = net.link_distance[serving][idx];
    let pos = net.ue_positions[serving][idx];
    let h0: f64 = Exp1.sample(rng);
    let signal = h0 * d0.powf(-params.alpha);
    let mut interference = 0.0;
    for (x, sap) in net.sap_positions.iter().enumerate() {
        if x == serving || !mask.is_active(x) {
            continue;
        }
        let hx: f64 = Exp1.sample(rng);
        let dx = torus_distance(pos, *sap, &net.window);
        interference += hx * dx.powf(-params.alpha);
    }
    if interference == 0.0 {
        // no active interferer: SIR is infinite for any positive fade
        return true;
    }
    signal / interference > params.theta
}

/// Success probability of the link given geometry and activity, averaged
/// over Rayleigh fades only: the product over active interferers `x` of
/// `1 / (1 + theta (d0/dx)^alpha)`.
pub fn conditional_success_prob(
    net: &NetworkRealization,
    ue: (usize, usize),
    mask: &ActivityMask,
    params: &ChannelParams,
) -> f64 {
    let (serving, idx) = ue;
    let d0 = net.link_distance[serving][idx];
    let pos = net.ue_positions[serving][idx];
    let mut p = 1.0;
    for (x, sap) in net.sap_positions.iter().enumerate() {
        if x == serving || !mask.is_active(x) {
            continue;
        }
        let dx = torus_distance(pos, *sap, &net.window);
        p /= 1.0 + params.theta * (d0 / dx).powf(params.alpha);
    }
    p
}
