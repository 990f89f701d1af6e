//! Overloaded admission: periodic reinitialization, stream dropping,
//! per-frame iteration counts and delayed beamformer indexing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, Result};
use crate::linalg::norm_sqr;
use crate::model::{matched_filter_init, Beamformers, Cluster, Problem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissionPolicy {
    /// `None` never resets after the initial frame.
    pub reset_interval: Option<usize>,
    pub drop_threshold: f64,
    pub bit_after_reset: usize,
    pub bit_normal: usize,
    pub delayed_indexing: bool,
}

impl Default for AdmissionPolicy {
    fn default() -> Self {
        AdmissionPolicy {
            reset_interval: None,
            drop_threshold: 1e-3,
            bit_after_reset: 10,
            bit_normal: 3,
            delayed_indexing: false,
        }
    }
}

impl AdmissionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.reset_interval == Some(0) {
            return config("reset interval must be at least one frame");
        }
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return config("drop threshold must lie in (0, 1)");
        }
        if self.bit_after_reset == 0 || self.bit_normal == 0 {
            return config("iteration counts per frame must be at least one");
        }
        Ok(())
    }

    /// Frame 0 and every multiple of the reset interval.
    pub fn is_reset_frame(&self, frame: usize) -> bool {
        frame == 0 || self.reset_interval.is_some_and(|r| frame.is_multiple_of(r))
    }
}

/// Iterations to run in `frame`.
pub fn bit_for_frame(frame: usize, policy: &AdmissionPolicy) -> usize {
    if policy.is_reset_frame(frame) {
        policy.bit_after_reset
    } else {
        policy.bit_normal
    }
}

/// Power below which a stream counts as dropped:
/// `threshold * sum_{b in B_k} P_b / (|C_b| max L)`.
pub fn drop_level(cluster: &Cluster, power: &[f64], threshold: f64, s: usize) -> f64 {
    let max_l = cluster.max_streams().max(1) as f64;
    let k = cluster.owner(s);
    threshold * cluster.serving(k).iter().map(|&b| power[b] / (cluster.served(b).len().max(1) as f64 * max_l)).sum::<f64>()
}

/// Streams still carrying power. A stream is kept iff its total power over
/// the serving cluster reaches [`drop_level`].
pub fn detect_dropped(beams: &Beamformers, cluster: &Cluster, power: &[f64], threshold: f64) -> Vec<bool> {
    (0..cluster.num_streams())
        .map(|s| {
            let p: f64 = cluster.serving(cluster.owner(s)).iter().map(|&b| norm_sqr(beams.get(b, s))).sum();
            p >= drop_level(cluster, power, threshold, s)
        })
        .collect()
}

/// Training and data-transmission beamformers. `stored` keeps the last
/// pre-reset training set and the stream flags that went with it.
#[derive(Debug, Clone)]
pub struct BeamformerPair {
    pub training: Beamformers,
    pub training_active: Vec<bool>,
    pub stored: Option<(Beamformers, Vec<bool>)>,
}

impl BeamformerPair {
    pub fn new(problem: &Problem) -> Self {
        BeamformerPair {
            training: matched_filter_init(problem),
            training_active: vec![true; problem.num_streams()],
            stored: None,
        }
    }
}

/// At reset frames, stores the current training set and restarts training
/// from matched-filter beams with every stream active. Returns whether a
/// reset happened.
pub fn maybe_reset(pair: &mut BeamformerPair, frame: usize, policy: &AdmissionPolicy, problem: &Problem) -> bool {
    if !policy.is_reset_frame(frame) {
        return false;
    }
    let fresh = BeamformerPair::new(problem);
    if frame > 0 {
        let old = core::mem::replace(&mut pair.training, fresh.training);
        let flags = core::mem::replace(&mut pair.training_active, fresh.training_active);
        pair.stored = Some((old, flags));
    } else {
        pair.training = fresh.training;
        pair.training_active = fresh.training_active;
    }
    true
}

/// Beams (and stream flags) used for data in `frame`: the stored pre-reset
/// set during a reset frame when delayed indexing is on, the training set
/// otherwise.
pub fn select_active<'a>(pair: &'a BeamformerPair, frame: usize, policy: &AdmissionPolicy) -> (&'a Beamformers, &'a [bool]) {
    if policy.delayed_indexing && frame > 0 && policy.is_reset_frame(frame) {
        if let Some((b, f)) = &pair.stored {
            return (b, f);
        }
    }
    (&pair.training, &pair.training_active)
}
