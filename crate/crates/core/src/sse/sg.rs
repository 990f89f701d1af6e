use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{c, norm_sqr, sqrt, CVec};
use crate::model::{per_bs_power, Beamformers, Cluster};
use crate::wmmse::{Crosstalk, EffectiveChannels};

/// How SG keeps the per-BS budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum PowerControl {
    /// Rescale any BS that exceeds its budget after each step.
    Projection,
    /// Penalize power through dual variables updated by subgradient ascent.
    Dual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgState {
    pub alpha: f64,
    pub beta_dual: f64,
    pub omega: f64,
    pub normalize: bool,
    pub power_control: PowerControl,
    pub nu: Vec<f64>,
    /// Accumulated directions, indexed `b * S + s`.
    pub momentum: Vec<CVec>,
}

impl SgState {
    pub fn new(
        alpha: f64,
        beta_dual: f64,
        omega: f64,
        normalize: bool,
        power_control: PowerControl,
        num_bs: usize,
        num_streams: usize,
        nt: usize,
    ) -> Self {
        SgState {
            alpha,
            beta_dual,
            omega,
            normalize,
            power_control,
            nu: vec![0.0; num_bs],
            momentum: vec![CVec::zeros(nt); num_bs * num_streams],
        }
    }

    pub fn reset(&mut self) {
        self.nu.fill(0.0);
        for m in &mut self.momentum {
            m.fill(crate::linalg::ZERO);
        }
    }
}

/// `G_{b,s} = 2 sum_r w_r g_{b,r} t_{r,s} - 2 w_s g_{b,s}`, the gradient of
/// the weighted MSE sum with respect to the real and imaginary parts of
/// `m_{b,s}` packed as a complex vector.
pub fn sg_gradient(eff: &EffectiveChannels, w: &[f64], xt: &Crosstalk, b: usize, s: usize) -> CVec {
    let mut grad = eff.g(b, s) * c(-2.0 * w[s]);
    for (r, &wr) in w.iter().enumerate() {
        if wr != 0.0 {
            grad += eff.g(b, r) * (xt.t(r, s) * (2.0 * wr));
        }
    }
    grad
}

/// Scales every BS above its budget back onto it.
pub fn feasible_projection(beams: &mut Beamformers, cluster: &Cluster, power: &[f64]) {
    for b in 0..cluster.num_bs() {
        let p = per_bs_power(beams, cluster, b);
        if p > power[b] {
            beams.scale_bs(b, sqrt(power[b] / p));
        }
    }
}

/// Momentum, (optionally normalized) descent step and power control.
/// `gradients` is indexed `b * S + s`; entries of BSs outside the
/// transmitting cluster are ignored. Returns the largest stacked gradient
/// norm.
pub fn sg_step(
    state: &mut SgState,
    gradients: &[CVec],
    beams: &mut Beamformers,
    cluster: &Cluster,
    power: &[f64],
) -> f64 {
    let ns = cluster.num_streams();
    let mut max_norm: f64 = 0.0;
    for s in 0..ns {
        let stacked: f64 = cluster.stream_cluster(s).iter().map(|&b| norm_sqr(&gradients[b * ns + s])).sum();
        max_norm = max_norm.max(sqrt(stacked));
        let step = if state.normalize {
            if stacked > 0.0 {
                state.alpha / stacked
            } else {
                0.0
            }
        } else {
            state.alpha
        };
        for &b in cluster.stream_cluster(s) {
            let i = b * ns + s;
            let mom = &gradients[i] + &state.momentum[i] * c(state.omega);
            let m = beams.get(b, s);
            let next = m - (&mom + m * c(state.nu[b])) * c(step);
            state.momentum[i] = mom;
            beams.set(b, s, next);
        }
    }
    match state.power_control {
        PowerControl::Projection => feasible_projection(beams, cluster, power),
        PowerControl::Dual => {
            for b in 0..cluster.num_bs() {
                let p = per_bs_power(beams, cluster, b);
                state.nu[b] = (state.nu[b] + state.beta_dual * (p - power[b])).max(0.0);
            }
        }
    }
    max_norm
}
