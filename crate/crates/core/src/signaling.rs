//! TDD frame schedule, differential feedback quantizer, exchange rounds and
//! signaling accounting.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, Result};
use crate::linalg::C64;
use crate::model::Cluster;

/// Bi-directional training layout of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSchedule {
    pub gamma: f64,
    pub bit: usize,
    /// `2 BIT / gamma`; `None` when no overhead is modelled.
    pub frame_len_symbols: Option<f64>,
    pub data_fraction: f64,
}

impl FrameSchedule {
    pub fn effective_rate(&self, sum_rate: f64) -> f64 {
        self.data_fraction * sum_rate
    }
}

pub fn build_schedule(gamma: f64, bit: usize) -> Result<FrameSchedule> {
    if !(0.0..1.0).contains(&gamma) {
        return config("signaling overhead gamma must lie in [0, 1)");
    }
    if bit == 0 {
        return config("at least one bi-directional iteration per frame is required");
    }
    let frame_len_symbols = if gamma > 0.0 { Some(2.0 * bit as f64 / gamma) } else { None };
    Ok(FrameSchedule { gamma, bit, frame_len_symbols, data_fraction: 1.0 - gamma })
}

/// Per-link state of the differential I/Q quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerState {
    /// Bits per branch; `None` is an ideal (pass-through) link.
    pub q_bits: Option<u32>,
    pub last_reconstruction: C64,
    pub smoothing_beta: f64,
    pub range: f64,
    pub saturation_events: u64,
}

const MIN_RANGE: f64 = 1e-12;

impl QuantizerState {
    pub fn new(q_bits: Option<u32>, smoothing_beta: f64, range: f64) -> Result<Self> {
        if q_bits == Some(0) {
            return config("quantizer needs at least one bit per branch");
        }
        if !(smoothing_beta > 0.0 && smoothing_beta <= 1.0) {
            return config("smoothing beta must lie in (0, 1]");
        }
        if !(range > 0.0) {
            return config("quantizer range must be positive");
        }
        Ok(QuantizerState { q_bits, last_reconstruction: C64::new(0.0, 0.0), smoothing_beta, range, saturation_events: 0 })
    }

    pub fn ideal() -> Self {
        QuantizerState::new(None, 1.0, 1.0).expect("valid")
    }

    pub fn is_pass_through(&self) -> bool {
        self.q_bits.is_none() && self.smoothing_beta == 1.0
    }
}

/// Transmitted level indices and the receiver-side reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedSymbol {
    /// Level index per branch, `None` on an ideal link.
    pub levels: Option<(i64, i64)>,
    pub reconstruction: C64,
    pub saturated: bool,
}

fn mid_rise(x: f64, bits: u32, range: f64) -> (i64, f64, bool) {
    let half = 1i64 << (bits - 1);
    let delta = 2.0 * range / (1u64 << bits) as f64;
    let saturated = x.abs() > range;
    let j = libm::floor(x / delta) as i64;
    let j = j.clamp(-half, half - 1);
    (j, (j as f64 + 0.5) * delta, saturated)
}

/// Encodes the difference to the last reconstruction, updates the state and
/// returns what the receiver reconstructs. The range doubles after a
/// saturation and halves when both branches fall inside a quarter of it
/// (on every unsaturated step for one-bit links).
pub fn quantize_differential(state: &mut QuantizerState, value: C64) -> QuantizedSymbol {
    if state.is_pass_through() {
        state.last_reconstruction = value;
        return QuantizedSymbol { levels: None, reconstruction: value, saturated: false };
    }
    let last = state.last_reconstruction;
    let d = value - last;
    let (levels, step, saturated) = match state.q_bits {
        None => (None, d, false),
        Some(bits) => {
            let (ji, qi, si) = mid_rise(d.re, bits, state.range);
            let (jq, qq, sq) = mid_rise(d.im, bits, state.range);
            let r = state.range;
            if si || sq {
                state.range = 2.0 * r;
                state.saturation_events += 1;
            } else if bits == 1 || (d.re.abs() < 0.25 * r && d.im.abs() < 0.25 * r) {
                state.range = (0.5 * r).max(MIN_RANGE);
            }
            (Some((ji, jq)), C64::new(qi, qq), si || sq)
        }
    };
    let reconstruction = last + step * state.smoothing_beta;
    state.last_reconstruction = reconstruction;
    QuantizedSymbol { levels, reconstruction, saturated }
}

/// Signaling strategy for the per-iteration exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    BackhaulOffload,
    FeedbackChannel,
    GlobalCsi,
}

/// Complex scalars exchanged per active stream and iteration.
pub fn account_exchange(scheme: Scheme, cluster: &Cluster, nt: usize, nr: usize) -> u64 {
    match scheme {
        Scheme::BackhaulOffload | Scheme::FeedbackChannel => cluster.num_streams() as u64,
        Scheme::GlobalCsi => (cluster.num_users() * nr * nt) as u64,
    }
}

/// Running count of exchanged complex scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulLedger {
    pub scheme: Scheme,
    pub per_round: Vec<u64>,
    pub frame_totals: Vec<u64>,
    pub total: u64,
}

impl BackhaulLedger {
    pub fn new(scheme: Scheme) -> Self {
        BackhaulLedger { scheme, per_round: Vec::new(), frame_totals: vec![0], total: 0 }
    }

    pub fn record(&mut self, scalars: u64) {
        self.per_round.push(scalars);
        self.total += scalars;
        *self.frame_totals.last_mut().expect("open frame") += scalars;
    }

    pub fn close_frame(&mut self) {
        self.frame_totals.push(0);
    }
}

/// Directed delivery lists: `links[sender]` holds the receivers of that sender.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub links: Vec<Vec<usize>>,
    pub num_nodes: usize,
}

impl Topology {
    /// Every node sends to every other node.
    pub fn full(num_nodes: usize) -> Self {
        let links = (0..num_nodes).map(|a| (0..num_nodes).filter(|&b| b != a).collect()).collect();
        Topology { links, num_nodes }
    }
}

/// What each receiver holds after a round: `(sender, reconstruction)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub inbox: Vec<Vec<(usize, C64)>>,
    pub saturations: u64,
}

/// One synchronous exchange: every sender's message passes its link
/// quantizer once, and all of its receivers observe the same
/// reconstruction. The ledger grows by one scalar per sent message.
pub fn exchange_round(
    messages: &[C64],
    quantizers: &mut [QuantizerState],
    topology: &Topology,
    ledger: &mut BackhaulLedger,
) -> Snapshot {
    let mut inbox = vec![Vec::new(); topology.num_nodes];
    let mut saturations = 0;
    for (sender, (&value, q)) in messages.iter().zip(quantizers.iter_mut()).enumerate() {
        let sym = quantize_differential(q, value);
        saturations += sym.saturated as u64;
        for &r in &topology.links[sender] {
            inbox[r].push((sender, sym.reconstruction));
        }
    }
    ledger.record(messages.len() as u64);
    Snapshot { inbox, saturations }
}

/// Quantized broadcast of a block of scalars, one link per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLinks {
    pub quantizers: Vec<QuantizerState>,
    pub saturation_events: u64,
}

impl FeedbackLinks {
    pub fn new(count: usize, template: &QuantizerState) -> Self {
        FeedbackLinks { quantizers: vec![template.clone(); count], saturation_events: 0 }
    }

    pub fn ideal(count: usize) -> Self {
        Self::new(count, &QuantizerState::ideal())
    }

    /// Replaces every value by its reconstruction.
    pub fn deliver(&mut self, values: &mut [C64]) {
        for (v, q) in values.iter_mut().zip(self.quantizers.iter_mut()) {
            let sym = quantize_differential(q, *v);
            self.saturation_events += sym.saturated as u64;
            *v = sym.reconstruction;
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.quantizers.iter().all(QuantizerState::is_pass_through)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let s = build_schedule(0.02, 3).unwrap();
        assert!((s.frame_len_symbols.unwrap() - 300.0).abs() < 1e-9);
        assert!((s.data_fraction - 0.98).abs() < 1e-15);
        assert!((build_schedule(0.02, 10).unwrap().frame_len_symbols.unwrap() - 1000.0).abs() < 1e-9);
        assert_eq!(build_schedule(0.0, 4).unwrap().data_fraction, 1.0);
        assert!(build_schedule(1.0, 3).is_err());
    }

    #[test]
    fn ideal_link_is_exact() {
        let mut q = QuantizerState::ideal();
        for v in [C64::new(0.1, -3.7), C64::new(1e-17, 2.0), C64::new(-5.5, 0.125)] {
            assert_eq!(quantize_differential(&mut q, v).reconstruction, v);
        }
    }

    #[test]
    fn one_bit_hand_value() {
        let mut q = QuantizerState::new(Some(1), 1.0, 1.0).unwrap();
        let s = quantize_differential(&mut q, C64::new(0.3, 0.4));
        assert_eq!(s.reconstruction, C64::new(0.5, 0.5));
        assert_eq!(s.levels, Some((0, 0)));
    }

    #[test]
    fn constant_input_converges() {
        for bits in [1, 4, 8] {
            let mut q = QuantizerState::new(Some(bits), 1.0, 1.0).unwrap();
            let v = C64::new(0.3, -0.7);
            let mut err = 0.0;
            for _ in 0..20 {
                err = (quantize_differential(&mut q, v).reconstruction - v).norm();
            }
            assert!(err < 1e-3, "bits {bits}: {err}");
        }
    }

    #[test]
    fn saturation_is_counted_and_range_grows() {
        let mut q = QuantizerState::new(Some(4), 1.0, 1.0).unwrap();
        let s = quantize_differential(&mut q, C64::new(5.0, 0.0));
        assert!(s.saturated);
        assert_eq!(q.saturation_events, 1);
        assert_eq!(q.range, 2.0);
    }

    #[test]
    fn smoothing_moves_part_way() {
        let mut q = QuantizerState::new(None, 0.5, 1.0).unwrap();
        let s = quantize_differential(&mut q, C64::new(1.0, 0.0));
        assert_eq!(s.reconstruction, C64::new(0.5, 0.0));
    }

    #[test]
    fn table_counts() {
        let cl = Cluster::full_cooperation(7, 49, 2);
        assert_eq!(account_exchange(Scheme::BackhaulOffload, &cl, 8, 2), 98);
        assert_eq!(account_exchange(Scheme::FeedbackChannel, &cl, 8, 2), 98);
        assert_eq!(account_exchange(Scheme::GlobalCsi, &cl, 8, 2), 784);
        assert_eq!(account_exchange(Scheme::BackhaulOffload, &Cluster::full_cooperation(1, 1, 1), 1, 1), 1);
    }

    #[test]
    fn ring_delivery() {
        let topo = Topology::full(3);
        let mut qs = vec![QuantizerState::ideal(); 3];
        let mut ledger = BackhaulLedger::new(Scheme::BackhaulOffload);
        let msgs = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let mut snap = exchange_round(&msgs, &mut qs, &topo, &mut ledger);
        for (r, inbox) in snap.inbox.iter_mut().enumerate() {
            inbox.sort_by_key(|x| x.0);
            let senders: Vec<usize> = inbox.iter().map(|x| x.0).collect();
            let expected: Vec<usize> = (0..3).filter(|&s| s != r).collect();
            assert_eq!(senders, expected);
            for &(s, v) in inbox.iter() {
                assert_eq!(v, msgs[s]);
            }
        }
        for _ in 0..4 {
            exchange_round(&msgs, &mut qs, &topo, &mut ledger);
        }
        assert_eq!(ledger.total, 15);
        assert_eq!(ledger.per_round.len(), 5);
    }
}
