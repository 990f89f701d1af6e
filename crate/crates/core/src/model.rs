//! Signal model shared by every solver: joint-processing clusters, channel
//! and beamformer containers, and the SINR / MSE / rate / MMSE-receiver
//! formulas.
//!
//! Streams are numbered globally: stream `s` belongs to user
//! `cluster.owner(s)` and is its layer `cluster.layer(s)`. A transmit
//! beamformer exists for every `(b, s)` pair but is only meaningful (and
//! kept at zero otherwise) when `b` is in the serving set of the owner.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, domain, Result};
use crate::linalg::{add_outer, c, inner, log2, norm_sqr, solve_hermitian, CMat, CVec, C64, ONE};

/// Joint-processing cluster map: serving sets per user, served sets per BS
/// and stream counts per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    num_bs: usize,
    serving: Vec<Vec<usize>>,
    served: Vec<Vec<usize>>,
    streams: Vec<usize>,
    offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl Cluster {
    pub fn new(num_bs: usize, mut serving: Vec<Vec<usize>>, streams: Vec<usize>) -> Result<Self> {
        if num_bs == 0 {
            return config("cluster needs at least one BS");
        }
        if serving.len() != streams.len() {
            return config("serving sets and stream counts differ in length");
        }
        let mut served = vec![Vec::new(); num_bs];
        for (k, set) in serving.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return config("every user needs a non-empty serving set");
            }
            for &b in set.iter() {
                if b >= num_bs {
                    return config("serving set references an unknown BS");
                }
                served[b].push(k);
            }
        }
        let mut offsets = Vec::with_capacity(streams.len() + 1);
        let mut owner = Vec::new();
        offsets.push(0);
        for (k, &l) in streams.iter().enumerate() {
            owner.extend(core::iter::repeat_n(k, l));
            offsets.push(owner.len());
        }
        Ok(Cluster { num_bs, serving, served, streams, offsets, owner })
    }

    /// Every BS serves every user coherently.
    pub fn full_cooperation(num_bs: usize, num_users: usize, streams_per_user: usize) -> Self {
        let serving = vec![(0..num_bs).collect(); num_users];
        Self::new(num_bs, serving, vec![streams_per_user; num_users]).expect("valid full cooperation")
    }

    /// Each user is served by its home BS only.
    pub fn per_cell(num_bs: usize, home: &[usize], streams_per_user: usize) -> Result<Self> {
        let serving = home.iter().map(|&b| vec![b]).collect();
        Self::new(num_bs, serving, vec![streams_per_user; home.len()])
    }

    /// Checks `L_k <= min(|B_k| N_T, N_R)`.
    pub fn check_dims(&self, nt: usize, nr: usize) -> Result<()> {
        for (k, &l) in self.streams.iter().enumerate() {
            if l > (self.serving[k].len() * nt).min(nr) {
                return config("stream count exceeds min(|B_k| N_T, N_R)");
            }
        }
        Ok(())
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_users(&self) -> usize {
        self.streams.len()
    }

    pub fn num_streams(&self) -> usize {
        self.owner.len()
    }

    pub fn streams_of(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn stream(&self, k: usize, l: usize) -> usize {
        debug_assert!(l < self.streams[k]);
        self.offsets[k] + l
    }

    pub fn owner(&self, s: usize) -> usize {
        self.owner[s]
    }

    pub fn layer(&self, s: usize) -> usize {
        s - self.offsets[self.owner[s]]
    }

    pub fn stream_counts(&self) -> &[usize] {
        &self.streams
    }

    pub fn max_streams(&self) -> usize {
        self.streams.iter().cloned().max().unwrap_or(0)
    }

    pub fn serving(&self, k: usize) -> &[usize] {
        &self.serving[k]
    }

    pub fn served(&self, b: usize) -> &[usize] {
        &self.served[b]
    }

    pub fn serves(&self, b: usize, k: usize) -> bool {
        self.serving[k].binary_search(&b).is_ok()
    }

    /// Transmitting cluster of stream `s`.
    pub fn stream_cluster(&self, s: usize) -> &[usize] {
        &self.serving[self.owner[s]]
    }

    /// Streams transmitted by BS `b`.
    pub fn streams_served_by(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.served[b].iter().flat_map(move |&k| self.streams_of(k))
    }
}

/// Channel matrices `H_{b,k}` (N_R x N_T) for every BS-user pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    num_bs: usize,
    num_users: usize,
    nt: usize,
    nr: usize,
    h: Vec<CMat>,
}

impl Channels {
    pub fn new(num_bs: usize, num_users: usize, nt: usize, nr: usize, h: Vec<CMat>) -> Result<Self> {
        if h.len() != num_bs * num_users {
            return config("channel tensor has the wrong number of blocks");
        }
        if h.iter().any(|m| m.nrows() != nr || m.ncols() != nt) {
            return config("channel block has the wrong shape");
        }
        Ok(Channels { num_bs, num_users, nt, nr, h })
    }

    pub fn zeros(num_bs: usize, num_users: usize, nt: usize, nr: usize) -> Self {
        Channels { num_bs, num_users, nt, nr, h: vec![CMat::zeros(nr, nt); num_bs * num_users] }
    }

    pub fn get(&self, b: usize, k: usize) -> &CMat {
        &self.h[b * self.num_users + k]
    }

    pub fn get_mut(&mut self, b: usize, k: usize) -> &mut CMat {
        &mut self.h[b * self.num_users + k]
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Transmit beamformers `m_{b,s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    num_bs: usize,
    num_streams: usize,
    nt: usize,
    m: Vec<CVec>,
}

impl Beamformers {
    pub fn zeros(num_bs: usize, num_streams: usize, nt: usize) -> Self {
        Beamformers { num_bs, num_streams, nt, m: vec![CVec::zeros(nt); num_bs * num_streams] }
    }

    pub fn get(&self, b: usize, s: usize) -> &CVec {
        &self.m[b * self.num_streams + s]
    }

    pub fn get_mut(&mut self, b: usize, s: usize) -> &mut CVec {
        &mut self.m[b * self.num_streams + s]
    }

    pub fn set(&mut self, b: usize, s: usize, v: CVec) {
        debug_assert_eq!(v.len(), self.nt);
        self.m[b * self.num_streams + s] = v;
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams
    }

    /// Zeroes every beamformer of stream `s`.
    pub fn clear_stream(&mut self, s: usize) {
        for b in 0..self.num_bs {
            self.m[b * self.num_streams + s].fill(crate::linalg::ZERO);
        }
    }

    /// Power of stream `s` summed over all BSs.
    pub fn stream_power(&self, s: usize) -> f64 {
        (0..self.num_bs).map(|b| norm_sqr(self.get(b, s))).sum()
    }

    pub fn scale_bs(&mut self, b: usize, factor: f64) {
        for s in 0..self.num_streams {
            self.m[b * self.num_streams + s] *= c(factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Beamformers) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().flat_map(|v| v.iter().map(|z| z.norm())).fold(0.0, f64::max)
    }
}

/// Receive beamformers `u_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Receivers {
    pub u: Vec<CVec>,
}

impl Receivers {
    pub fn zeros(num_streams: usize, nr: usize) -> Self {
        Receivers { u: vec![CVec::zeros(nr); num_streams] }
    }

    pub fn get(&self, s: usize) -> &CVec {
        &self.u[s]
    }
}

/// Per-stream MSEs, weights and activity flags plus per-user priorities and
/// noise powers.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub epsilon: Vec<f64>,
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub active: Vec<bool>,
}

impl StreamState {
    pub fn new(cluster: &Cluster, mu: Vec<f64>, sigma2: Vec<f64>) -> Self {
        let n = cluster.num_streams();
        StreamState { epsilon: vec![1.0; n], w: vec![0.0; n], mu, sigma2, active: vec![true; n] }
    }
}

/// A complete static problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub channels: Channels,
    pub cluster: Cluster,
    /// Noise power per user.
    pub sigma2: Vec<f64>,
    /// Priority weight per user.
    pub mu: Vec<f64>,
    /// Power budget per BS.
    pub power: Vec<f64>,
}

impl Problem {
    pub fn new(channels: Channels, cluster: Cluster, sigma2: Vec<f64>, mu: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if channels.num_bs() != cluster.num_bs() || channels.num_users() != cluster.num_users() {
            return config("channel tensor does not match the cluster map");
        }
        if sigma2.len() != cluster.num_users() || mu.len() != cluster.num_users() {
            return config("noise and priority vectors need one entry per user");
        }
        if power.len() != cluster.num_bs() {
            return config("power budgets need one entry per BS");
        }
        cluster.check_dims(channels.nt(), channels.nr())?;
        Ok(Problem { channels, cluster, sigma2, mu, power })
    }

    /// Desk instance: full cooperation, unit-variance i.i.d. Rayleigh
    /// channels, unit power budgets and `sigma2 = 1 / snr`.
    pub fn iid_rayleigh<R: Rng + ?Sized>(
        rng: &mut R,
        num_bs: usize,
        num_users: usize,
        nt: usize,
        nr: usize,
        streams_per_user: usize,
        snr_linear: f64,
    ) -> Self {
        let h = (0..num_bs * num_users).map(|_| random_cmat(rng, nr, nt, 1.0)).collect();
        let channels = Channels::new(num_bs, num_users, nt, nr, h).expect("shapes");
        let cluster = Cluster::full_cooperation(num_bs, num_users, streams_per_user);
        Problem::new(channels, cluster, vec![1.0 / snr_linear; num_users], vec![1.0; num_users], vec![1.0; num_bs])
            .expect("consistent desk instance")
    }

    pub fn num_streams(&self) -> usize {
        self.cluster.num_streams()
    }

    pub fn sigma2_of_stream(&self, s: usize) -> f64 {
        self.sigma2[self.cluster.owner(s)]
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let scale = crate::linalg::sqrt(var / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * scale, im * scale)
}

pub fn random_cmat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn(rng, var))
}

pub fn random_cvec<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> CVec {
    CVec::from_fn(len, |_, _| cn(rng, var))
}

/// Coherently combined downlink signals `v_{k,s} = sum_{b in B_i} H_{b,k} m_{b,s}`
/// of every stream `s` at every user `k`.
#[derive(Debug, Clone)]
pub struct ReceivedSignals {
    num_streams: usize,
    v: Vec<CVec>,
}

impl ReceivedSignals {
    pub fn compute(channels: &Channels, beams: &Beamformers, cluster: &Cluster) -> Self {
        let ns = cluster.num_streams();
        let mut v = Vec::with_capacity(cluster.num_users() * ns);
        for k in 0..cluster.num_users() {
            for s in 0..ns {
                v.push(user_signal(channels, beams, cluster, k, s));
            }
        }
        ReceivedSignals { num_streams: ns, v }
    }

    pub fn at(&self, k: usize, s: usize) -> &CVec {
        &self.v[k * self.num_streams + s]
    }

    /// Receive covariance `K_k = sum_s v v^H + sigma2 I`.
    pub fn covariance(&self, k: usize, sigma2: f64) -> CMat {
        let nr = self.v[0].len();
        let mut kk = CMat::identity(nr, nr) * c(sigma2);
        for s in 0..self.num_streams {
            add_outer(&mut kk, self.at(k, s), 1.0);
        }
        kk
    }

    pub fn mse(&self, k: usize, own: usize, u: &CVec, sigma2: f64) -> f64 {
        let mut eps = sigma2 * norm_sqr(u);
        for s in 0..self.num_streams {
            let y = inner(u, self.at(k, s));
            eps += if s == own { (y - ONE).norm_sqr() } else { y.norm_sqr() };
        }
        eps
    }

    pub fn sinr(&self, k: usize, own: usize, u: &CVec, sigma2: f64) -> f64 {
        let signal = inner(u, self.at(k, own)).norm_sqr();
        if signal == 0.0 {
            return 0.0;
        }
        let mut denom = sigma2 * norm_sqr(u);
        for s in 0..self.num_streams {
            if s != own {
                denom += inner(u, self.at(k, s)).norm_sqr();
            }
        }
        signal / denom
    }

    /// MMSE receivers of every stream of user `k`; the flag reports a
    /// regularized solve.
    pub fn mmse(&self, k: usize, cluster: &Cluster, sigma2: f64) -> (Vec<CVec>, bool) {
        let kk = self.covariance(k, sigma2);
        let rhs: Vec<CVec> = cluster.streams_of(k).map(|s| self.at(k, s).clone()).collect();
        solve_hermitian(&kk, &rhs)
    }
}

fn user_signal(channels: &Channels, beams: &Beamformers, cluster: &Cluster, k: usize, s: usize) -> CVec {
    let mut v = CVec::zeros(channels.nr());
    for &b in cluster.stream_cluster(s) {
        v += channels.get(b, k) * beams.get(b, s);
    }
    v
}

fn user_signals(channels: &Channels, beams: &Beamformers, cluster: &Cluster, k: usize) -> Vec<CVec> {
    (0..cluster.num_streams()).map(|s| user_signal(channels, beams, cluster, k, s)).collect()
}

/// MSE of stream `(k, l)` for the given receivers.
pub fn compute_mse(
    channels: &Channels,
    beams: &Beamformers,
    receivers: &Receivers,
    cluster: &Cluster,
    sigma2: &[f64],
    k: usize,
    l: usize,
) -> f64 {
    let own = cluster.stream(k, l);
    let u = receivers.get(own);
    let mut eps = sigma2[k] * norm_sqr(u);
    for (s, v) in user_signals(channels, beams, cluster, k).iter().enumerate() {
        let y = inner(u, v);
        eps += if s == own { (y - ONE).norm_sqr() } else { y.norm_sqr() };
    }
    eps
}

/// SINR of stream `(k, l)`; zero whenever the useful signal is zero.
pub fn compute_sinr(
    channels: &Channels,
    beams: &Beamformers,
    receivers: &Receivers,
    cluster: &Cluster,
    sigma2: &[f64],
    k: usize,
    l: usize,
) -> f64 {
    let own = cluster.stream(k, l);
    let u = receivers.get(own);
    let v = user_signals(channels, beams, cluster, k);
    let signal = inner(u, &v[own]).norm_sqr();
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = v.iter().enumerate().filter(|(s, _)| *s != own).map(|(_, x)| inner(u, x).norm_sqr()).sum();
    signal / (interference + sigma2[k] * norm_sqr(u))
}

/// Result of an MMSE receiver computation.
#[derive(Debug, Clone)]
pub struct MmseReceivers {
    pub receivers: Vec<CVec>,
    /// Set when the receive covariance was singular and a ridge was added.
    pub regularized: bool,
}

/// MMSE receivers `u = K_k^{-1} sum_b H_{b,k} m_{b,k,l}` for every stream of user `k`.
pub fn mmse_receiver(channels: &Channels, beams: &Beamformers, cluster: &Cluster, sigma2: &[f64], k: usize) -> MmseReceivers {
    let v = user_signals(channels, beams, cluster, k);
    let mut kk = CMat::identity(channels.nr(), channels.nr()) * c(sigma2[k]);
    for x in &v {
        add_outer(&mut kk, x, 1.0);
    }
    let rhs: Vec<CVec> = cluster.streams_of(k).map(|s| v[s].clone()).collect();
    let (receivers, regularized) = solve_hermitian(&kk, &rhs);
    MmseReceivers { receivers, regularized }
}

/// MMSE receivers of every stream; the flag is set if any user needed regularization.
pub fn mmse_receivers(channels: &Channels, beams: &Beamformers, cluster: &Cluster, sigma2: &[f64]) -> (Receivers, bool) {
    let signals = ReceivedSignals::compute(channels, beams, cluster);
    mmse_from_signals(&signals, cluster, sigma2)
}

pub(crate) fn mmse_from_signals(signals: &ReceivedSignals, cluster: &Cluster, sigma2: &[f64]) -> (Receivers, bool) {
    let mut u = Vec::with_capacity(cluster.num_streams());
    let mut any = false;
    for k in 0..cluster.num_users() {
        let (rx, reg) = signals.mmse(k, cluster, sigma2[k]);
        any |= reg;
        u.extend(rx);
    }
    (Receivers { u }, any)
}

/// MSE-SINR inversion test: `|1/eps - (1 + gamma)| <= 1e-9 (1 + gamma)`.
pub fn mse_sinr_check(epsilon: f64, gamma: f64) -> bool {
    (1.0 / epsilon - (1.0 + gamma)).abs() <= 1e-9 * (1.0 + gamma)
}

/// WMMSE weight `mu / (ln 2 * eps)`.
pub fn mse_weight(epsilon: f64, mu: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return domain("MSE must be positive to form a weight");
    }
    Ok(mu / (core::f64::consts::LN_2 * epsilon))
}

/// Refreshes every weight from the stored MSEs. Inactive streams get zero weight.
pub fn update_weights(state: &mut StreamState, cluster: &Cluster) -> Result<()> {
    for s in 0..cluster.num_streams() {
        state.w[s] = if state.active[s] { mse_weight(state.epsilon[s], state.mu[cluster.owner(s)])? } else { 0.0 };
    }
    Ok(())
}

/// Per-stream MSEs for the given receivers.
pub fn stream_mses(signals: &ReceivedSignals, receivers: &Receivers, cluster: &Cluster, sigma2: &[f64]) -> Vec<f64> {
    (0..cluster.num_streams())
        .map(|s| {
            let k = cluster.owner(s);
            signals.mse(k, s, receivers.get(s), sigma2[k])
        })
        .collect()
}

/// Per-stream SINRs for the given receivers.
pub fn stream_sinrs(signals: &ReceivedSignals, receivers: &Receivers, cluster: &Cluster, sigma2: &[f64]) -> Vec<f64> {
    (0..cluster.num_streams())
        .map(|s| {
            let k = cluster.owner(s);
            signals.sinr(k, s, receivers.get(s), sigma2[k])
        })
        .collect()
}

/// `sum_k sum_l mu_k log2(1 + Gamma_{k,l})`. MMSE receivers are used when
/// none are supplied.
pub fn weighted_sum_rate(
    channels: &Channels,
    beams: &Beamformers,
    receivers: Option<&Receivers>,
    cluster: &Cluster,
    sigma2: &[f64],
    mu: &[f64],
) -> f64 {
    let signals = ReceivedSignals::compute(channels, beams, cluster);
    let owned;
    let rx = match receivers {
        Some(r) => r,
        None => {
            owned = mmse_from_signals(&signals, cluster, sigma2).0;
            &owned
        }
    };
    stream_sinrs(&signals, rx, cluster, sigma2)
        .iter()
        .enumerate()
        .map(|(s, g)| mu[cluster.owner(s)] * log2(1.0 + g))
        .sum()
}

/// Transmit power of BS `b`.
pub fn per_bs_power(beams: &Beamformers, cluster: &Cluster, b: usize) -> f64 {
    cluster.streams_served_by(b).map(|s| norm_sqr(beams.get(b, s))).sum()
}

pub fn all_bs_powers(beams: &Beamformers, cluster: &Cluster) -> Vec<f64> {
    (0..cluster.num_bs()).map(|b| per_bs_power(beams, cluster, b)).collect()
}

/// Matched-filter start: `m_{b,k,l} = H_{b,k}^H e_l`, scaled so that each BS
/// splits `P_b` equally over the streams it serves. A zero channel falls back
/// to the canonical basis vector.
pub fn matched_filter_init(problem: &Problem) -> Beamformers {
    let ch = &problem.channels;
    let cl = &problem.cluster;
    let mut beams = Beamformers::zeros(cl.num_bs(), cl.num_streams(), ch.nt());
    for b in 0..cl.num_bs() {
        let count = cl.streams_served_by(b).count();
        if count == 0 {
            continue;
        }
        let per_stream = problem.power[b] / count as f64;
        for s in cl.streams_served_by(b).collect::<Vec<_>>() {
            let k = cl.owner(s);
            let l = cl.layer(s);
            let mut v: CVec = ch.get(b, k).row(l % ch.nr()).adjoint();
            let n = norm_sqr(&v);
            if n == 0.0 {
                v = CVec::zeros(ch.nt());
                v[l % ch.nt()] = ONE;
            } else {
                v *= c(crate::linalg::sqrt(1.0 / n));
            }
            beams.set(b, s, v * c(crate::linalg::sqrt(per_stream)));
        }
    }
    beams
}
