use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{c, inner, CVec, C64};
use crate::model::{Beamformers, Problem, Receivers};
use crate::wmmse::{bisect_power_dual, local_rhs, BisectionSpec, Crosstalk, DualSolution, EffectiveChannels};

/// Contribution of the cooperating BSs (all of the transmitting cluster of
/// stream `s` except `b`) to what receiving stream `r` sees of `s`.
pub fn br_fixed_terms(problem: &Problem, receivers: &Receivers, beams: &Beamformers, b: usize, r: usize, s: usize) -> C64 {
    let cl = &problem.cluster;
    let k = cl.owner(r);
    cl.stream_cluster(s)
        .iter()
        .filter(|&&g| g != b)
        .map(|&g| inner(receivers.get(r), &(problem.channels.get(g, k) * beams.get(g, s))))
        .sum()
}

/// Same value formed from the combined term by removing the own part.
pub fn br_fixed_terms_from_combined(xt: &Crosstalk, b: usize, r: usize, s: usize) -> C64 {
    xt.t(r, s) - xt.e(b, r, s)
}

/// Best response of BS `b` to frozen cooperating terms. Returns the beams of
/// `streams` in order.
pub fn br_local_solve(
    eff: &EffectiveChannels,
    w: &[f64],
    fixed: impl Fn(usize, usize) -> C64,
    streams: &[usize],
    b: usize,
    budget: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    let a = eff.covariance(b, w);
    let rhs: Vec<CVec> = streams.iter().map(|&s| local_rhs(eff, w, b, s, |r| fixed(r, s))).collect();
    bisect_power_dual(&a, &rhs, &[], budget, spec)
}

/// `m + alpha (m* - m)` entrywise.
pub fn br_regulated_update(previous: &Beamformers, solved: &Beamformers, alpha: f64) -> Beamformers {
    let mut out = previous.clone();
    for b in 0..previous.num_bs() {
        for s in 0..previous.num_streams() {
            let m = previous.get(b, s);
            out.set(b, s, m + (solved.get(b, s) - m) * c(alpha));
        }
    }
    out
}
