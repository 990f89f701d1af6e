use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{c, sqrt, CVec, C64, ZERO};
use crate::model::Cluster;
use crate::wmmse::{bisect_power_dual, BisectionSpec, Crosstalk, DualSolution, EffectiveChannels};

/// `s = rho / (1 + rho) (received + lambda)`.
pub fn admm_s_update(received_sum: C64, lambda_bar: C64, rho: f64) -> C64 {
    (received_sum + lambda_bar) * (rho / (1.0 + rho))
}

/// `lambda + received - s`.
pub fn admm_dual_update(lambda_bar: C64, received_sum: C64, s_bar: C64) -> C64 {
    lambda_bar + received_sum - s_bar
}

/// Penalized closed form of BS `b`:
/// `(rho N_s A + nu I) m_s = w_s g_{b,s} + rho N_s sum_r sqrt(w_r) g_{b,r} q_{b,r,s}`
/// where `N_s` is the size of the transmitting cluster of `s`.
#[allow(clippy::too_many_arguments)]
pub fn admm_local_solve(
    eff: &EffectiveChannels,
    w: &[f64],
    q: impl Fn(usize, usize) -> C64,
    cluster: &Cluster,
    streams: &[usize],
    b: usize,
    budget: f64,
    rho: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    let a = eff.covariance(b, w);
    let mut scales = Vec::with_capacity(streams.len());
    let mut rhs = Vec::with_capacity(streams.len());
    for &s in streams {
        let scale = rho * cluster.stream_cluster(s).len() as f64;
        let mut p: CVec = eff.g(b, s) * c(w[s]);
        for (r, &wr) in w.iter().enumerate() {
            if wr != 0.0 {
                p += eff.g(b, r) * (q(r, s) * (scale * sqrt(wr)));
            }
        }
        scales.push(scale);
        rhs.push(p);
    }
    bisect_power_dual(&a, &rhs, &scales, budget, spec)
}

/// Per-BS split of one consensus entry: `s_b`, `a_b = lambda_b + x_b` and the
/// per-BS duals `lambda_b` before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixSplit {
    pub per_bs_s: Vec<C64>,
    pub a_terms: Vec<C64>,
    pub lambda_terms: Vec<C64>,
}

/// Rebuilds the per-BS auxiliary variables that the sharing form
/// eliminates, from the local contributions `x_b`, the new consensus value
/// and the previous aggregate dual.
pub fn appendix_a_split(x: &[C64], s_bar: C64, lambda_bar_old: C64) -> AppendixSplit {
    let n = x.len() as f64;
    let lambda_terms = vec![lambda_bar_old / n; x.len()];
    let a_terms: Vec<C64> = x.iter().zip(&lambda_terms).map(|(x, l)| x + l).collect();
    let total: C64 = a_terms.iter().sum();
    let per_bs_s = a_terms.iter().map(|a| a + (s_bar - total) / n).collect();
    AppendixSplit { per_bs_s, a_terms, lambda_terms }
}

/// True iff the per-BS values sum to `s_bar` and both the old and the
/// reconstructed new per-BS duals `a_b - s_b` agree across BSs, to 1e-12.
pub fn appendix_a_check(per_bs_s: &[C64], s_bar: C64, a_terms: &[C64], lambda_terms: &[C64]) -> bool {
    let scale = 1.0
        + s_bar.norm()
        + per_bs_s.iter().chain(a_terms).chain(lambda_terms).map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let sum: C64 = per_bs_s.iter().sum();
    if (sum - s_bar).norm() > tol {
        return false;
    }
    let same = |v: &[C64]| v.iter().all(|z| (z - v[0]).norm() <= tol);
    let duals: Vec<C64> = a_terms.iter().zip(per_bs_s).map(|(a, s)| a - s).collect();
    duals.is_empty() || (same(&duals) && same(lambda_terms))
}

/// Consensus variables, scaled duals and the snapshot of the last exchange,
/// one entry per (receiving stream, transmitted stream).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub rho: f64,
    /// Dual step; 1 is the standard scaled-form update.
    pub beta_dual: f64,
    pub s_bar: Vec<C64>,
    pub lambda_bar: Vec<C64>,
    /// `sqrt(w_r) t_{r,s}` as delivered by the last exchange.
    pub received: Vec<C64>,
    started: bool,
    num_streams: usize,
}

/// What the consensus update reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusReport {
    /// `max |received - s_bar|` after the update.
    pub residual: f64,
    pub appendix_ok: bool,
}

impl AdmmState {
    pub fn new(rho: f64, num_streams: usize) -> Self {
        let n = num_streams * num_streams;
        AdmmState {
            rho,
            beta_dual: 1.0,
            s_bar: vec![ZERO; n],
            lambda_bar: vec![ZERO; n],
            received: vec![ZERO; n],
            started: false,
            num_streams,
        }
    }

    pub fn reset(&mut self) {
        self.s_bar.fill(ZERO);
        self.lambda_bar.fill(ZERO);
        self.started = false;
    }

    fn idx(&self, r: usize, s: usize) -> usize {
        r * self.num_streams + s
    }

    /// Absorbs a new exchange. From the second call on this performs the
    /// consensus and dual updates and verifies the per-BS elimination.
    pub fn absorb(&mut self, xt: &Crosstalk, w: &[f64], cluster: &Cluster) -> Option<ConsensusReport> {
        let ns = self.num_streams;
        for r in 0..ns {
            let sw = sqrt(w[r]);
            for s in 0..ns {
                let i = self.idx(r, s);
                self.received[i] = xt.t(r, s) * sw;
            }
        }
        if !self.started {
            self.started = true;
            return None;
        }
        let mut residual: f64 = 0.0;
        let mut appendix_ok = true;
        let mut x = Vec::new();
        for r in 0..ns {
            let sw = sqrt(w[r]);
            for s in 0..ns {
                let i = self.idx(r, s);
                let old = self.lambda_bar[i];
                let sb = admm_s_update(self.received[i], old, self.rho);
                self.s_bar[i] = sb;
                self.lambda_bar[i] = old + (self.received[i] - sb) * self.beta_dual;
                residual = residual.max((self.received[i] - sb).norm());
                x.clear();
                x.extend(cluster.stream_cluster(s).iter().map(|&b| xt.e(b, r, s) * sw));
                let split = appendix_a_split(&x, sb, old);
                appendix_ok &= appendix_a_check(&split.per_bs_s, sb, &split.a_terms, &split.lambda_terms);
            }
        }
        Some(ConsensusReport { residual, appendix_ok })
    }

    /// Local target `q_{b,r,s} = x_b - (received - s_bar + lambda_bar) / N_s`.
    pub fn target(&self, xt: &Crosstalk, w: &[f64], cluster: &Cluster, b: usize, r: usize, s: usize) -> C64 {
        let i = self.idx(r, s);
        let n = cluster.stream_cluster(s).len() as f64;
        xt.e(b, r, s) * sqrt(w[r]) - (self.received[i] - self.s_bar[i] + self.lambda_bar[i]) / n
    }
}
