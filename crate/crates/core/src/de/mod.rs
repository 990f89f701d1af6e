//! Direct estimation: the BSs and users never see channel matrices. Users
//! estimate their receivers from precoded downlink training, BSs estimate
//! the weighted effective channels from precoded uplink training, and the
//! decentralized updates run on length-`S` composite signals
//! `x_{b,s} = R_b^H m_{b,s}` instead of per-stream scalars.

mod pilots;

pub use pilots::{
    composites, de_mmse_receiver, de_receivers, dl_training, make_pilot_book, ul_training, DeReceiver, PilotBook,
};

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Result};
use crate::linalg::{c, sqrt, CMat, CVec, C64};
use crate::model::{
    all_bs_powers, matched_filter_init, mse_weight, stream_mses, weighted_sum_rate, Beamformers, Cluster, Problem,
    ReceivedSignals, Receivers,
};
use crate::signaling::{BackhaulLedger, FeedbackLinks, QuantizerState, Scheme};
use crate::sse::{
    admm_s_update, appendix_a_check, appendix_a_split, sg_step, ConsensusReport, SgParams, SgState, SseTrace,
    StepDiagnostics,
};
use crate::wmmse::{bisect_power_dual, BisectionSpec, DualSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeAlgorithm {
    Br { alpha: f64 },
    /// `beta_dual` scales the dual step.
    Admm { rho: f64, beta_dual: f64 },
    Sg(SgParams),
}

impl DeAlgorithm {
    /// ADMM with the default dual step `1 / rho`.
    pub fn admm(rho: f64) -> Self {
        DeAlgorithm::Admm { rho, beta_dual: 1.0 / rho }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DeAlgorithm::Br { alpha } if !(alpha > 0.0 && alpha <= 1.0) => config("BR step must lie in (0, 1]"),
            DeAlgorithm::Admm { rho, beta_dual } if !(rho > 0.0) || !(beta_dual > 0.0) => {
                config("ADMM penalty and dual step must be positive")
            }
            DeAlgorithm::Sg(p) if !(p.alpha > 0.0) || !(p.beta_dual >= 0.0) || !(p.omega >= 0.0) => {
                config("SG steps must be positive and momentum non-negative")
            }
            _ => Ok(()),
        }
    }
}

/// `A = R R^H / S`.
fn gram(r: &CMat, length: usize) -> CMat {
    (r * r.adjoint()) / c(length as f64)
}

/// Best response of BS `b` from its training matrix and the fixed parts
/// `cbar_s = z_s - x_{b,s}` of the other BSs:
/// `(R R^H / S + nu I) m_s = R (b_s sqrt(w_s) - cbar_s) / S`.
#[allow(clippy::too_many_arguments)]
pub fn de_br_solve(
    r: &CMat,
    book: &PilotBook,
    w: &[f64],
    cbar: &[CVec],
    streams: &[usize],
    budget: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    let inv = c(1.0 / book.length as f64);
    let rhs: Vec<CVec> =
        streams.iter().zip(cbar).map(|(&s, cb)| r * (&book.ul[s] * c(sqrt(w[s])) - cb) * inv).collect();
    bisect_power_dual(&gram(r, book.length), &rhs, &[], budget, spec)
}

/// `L_{b,s} = (2/S) R_b (z_s - b_s sqrt(w_s))`.
pub fn de_sg_gradient(r: &CMat, z: &CVec, pilot: &CVec, w: f64, length: usize) -> CVec {
    r * (z - pilot * c(sqrt(w))) * c(2.0 / length as f64)
}

/// The same gradient accumulated one training symbol at a time, as a BS
/// would while the uplink pilot is still arriving.
pub fn de_sg_gradient_symbolwise(r: &CMat, z: &CVec, pilot: &CVec, w: f64, length: usize) -> CVec {
    let sw = sqrt(w);
    let mut acc = CVec::zeros(r.nrows());
    for i in 0..length {
        acc += r.column(i) * (z[i] - pilot[i] * sw);
    }
    acc * c(2.0 / length as f64)
}

/// Consensus state of DE-ADMM: one length-`S` vector per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DeAdmmState {
    pub rho: f64,
    pub beta_dual: f64,
    pub s_bar: Vec<CVec>,
    pub lambda_bar: Vec<CVec>,
    pub received: Vec<CVec>,
    started: bool,
}

impl DeAdmmState {
    pub fn new(rho: f64, beta_dual: f64, num_streams: usize, length: usize) -> Self {
        let z = vec![CVec::zeros(length); num_streams];
        DeAdmmState { rho, beta_dual, s_bar: z.clone(), lambda_bar: z.clone(), received: z, started: false }
    }

    pub fn reset(&mut self) {
        for v in self.s_bar.iter_mut().chain(&mut self.lambda_bar) {
            v.fill(crate::linalg::ZERO);
        }
        self.started = false;
    }

    /// Stores the delivered sums `z_s`; from the second call on, updates the
    /// consensus and dual vectors and checks the per-BS elimination on every
    /// entry.
    pub fn absorb(&mut self, z: &[CVec], x: &[CVec], cluster: &Cluster) -> Option<ConsensusReport> {
        self.received.clone_from_slice(z);
        if !self.started {
            self.started = true;
            return None;
        }
        let ns = cluster.num_streams();
        let mut residual: f64 = 0.0;
        let mut appendix_ok = true;
        let mut parts: Vec<C64> = Vec::new();
        for s in 0..ns {
            for i in 0..z[s].len() {
                let old = self.lambda_bar[s][i];
                let sb = admm_s_update(z[s][i], old, self.rho);
                self.s_bar[s][i] = sb;
                self.lambda_bar[s][i] = old + (z[s][i] - sb) * self.beta_dual;
                residual = residual.max((z[s][i] - sb).norm());
                parts.clear();
                parts.extend(cluster.stream_cluster(s).iter().map(|&b| x[b * ns + s][i]));
                let split = appendix_a_split(&parts, sb, old);
                appendix_ok &= appendix_a_check(&split.per_bs_s, sb, &split.a_terms, &split.lambda_terms);
            }
        }
        Some(ConsensusReport { residual, appendix_ok })
    }

    /// `q_{b,s} = x_{b,s} - (z_s - s_bar_s + lambda_bar_s) / N_s`.
    pub fn target(&self, x_bs: &CVec, s: usize, cluster_size: usize) -> CVec {
        x_bs - (&self.received[s] - &self.s_bar[s] + &self.lambda_bar[s]) / c(cluster_size as f64)
    }
}

/// `(rho N_s R R^H / S + nu I) m_s = R (b_s sqrt(w_s) + rho N_s q_s) / S`.
#[allow(clippy::too_many_arguments)]
pub fn de_admm_solve(
    r: &CMat,
    book: &PilotBook,
    w: &[f64],
    q: &[CVec],
    streams: &[usize],
    cluster: &Cluster,
    budget: f64,
    rho: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    let inv = c(1.0 / book.length as f64);
    let mut scales = Vec::with_capacity(streams.len());
    let mut rhs = Vec::with_capacity(streams.len());
    for (&s, q) in streams.iter().zip(q) {
        let scale = rho * cluster.stream_cluster(s).len() as f64;
        rhs.push(r * (&book.ul[s] * c(sqrt(w[s])) + q * c(scale)) * inv);
        scales.push(scale);
    }
    bisect_power_dual(&gram(r, book.length), &rhs, &scales, budget, spec)
}

/// Outcome of the DE/WMMSE objective comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `sum_s ||z_s - b_s sqrt(w_s)||^2`.
    pub de_objective: f64,
    /// `de_objective / S + sum_s w_s sigma^2 ||u_s||^2`.
    pub lhs: f64,
    /// `sum_s w_s eps_s`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the DE least-squares objective with the weighted MSE sum of
/// the same beams. Equal (to 1e-8 relative) for noiseless orthogonal
/// training.
pub fn ls_wmmse_equivalence_check(
    problem: &Problem,
    beams: &Beamformers,
    receivers: &Receivers,
    w: &[f64],
    book: &PilotBook,
    r: &[CMat],
) -> EquivalenceReport {
    let cl = &problem.cluster;
    let x = composites(r, beams, cl, book.length);
    let ns = cl.num_streams();
    let mut de_objective = 0.0;
    for s in 0..ns {
        let mut z = -(&book.ul[s] * c(sqrt(w[s])));
        for &b in cl.stream_cluster(s) {
            z += &x[b * ns + s];
        }
        de_objective += z.norm_squared();
    }
    let signals = ReceivedSignals::compute(&problem.channels, beams, cl);
    let eps = stream_mses(&signals, receivers, cl, &problem.sigma2);
    let mut lhs = de_objective / book.length as f64;
    let mut rhs = 0.0;
    for s in 0..ns {
        lhs += w[s] * problem.sigma2_of_stream(s) * receivers.get(s).norm_squared();
        rhs += w[s] * eps[s];
    }
    EquivalenceReport { de_objective, lhs, rhs, holds: (lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0) }
}

/// Training parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    pub length: usize,
    pub orthogonal: bool,
    /// Per-sample noise variance on both training phases.
    pub noise_power: f64,
    pub seed: u64,
}

/// DE algorithm state, training book, noise source and signaling path.
#[derive(Debug, Clone)]
pub struct DeEngine {
    pub algorithm: DeAlgorithm,
    pub book: PilotBook,
    pub pilot_noise: f64,
    pub bisection: BisectionSpec,
    pub admm: Option<DeAdmmState>,
    pub sg: Option<SgState>,
    pub links: FeedbackLinks,
    pub ledger: BackhaulLedger,
    rng: ChaCha8Rng,
}

impl DeEngine {
    pub fn new(
        algorithm: DeAlgorithm,
        problem: &Problem,
        pilots: &PilotConfig,
        scheme: Scheme,
        quantizer: Option<&QuantizerState>,
    ) -> Result<Self> {
        algorithm.validate()?;
        if !(pilots.noise_power >= 0.0) {
            return config("pilot noise power must be non-negative");
        }
        let cl = &problem.cluster;
        let ns = cl.num_streams();
        let book = make_pilot_book(pilots.length, cl, pilots.orthogonal, pilots.seed)?;
        let admm = match algorithm {
            DeAlgorithm::Admm { rho, beta_dual } => Some(DeAdmmState::new(rho, beta_dual, ns, pilots.length)),
            _ => None,
        };
        let sg = match algorithm {
            DeAlgorithm::Sg(p) => Some(SgState::new(
                p.alpha,
                p.beta_dual,
                p.omega,
                p.normalize,
                p.power_control,
                cl.num_bs(),
                ns,
                problem.channels.nt(),
            )),
            _ => None,
        };
        let count = ns * pilots.length;
        let links = match quantizer {
            Some(q) => FeedbackLinks::new(count, q),
            None => FeedbackLinks::ideal(count),
        };
        Ok(DeEngine {
            algorithm,
            book,
            pilot_noise: pilots.noise_power,
            bisection: BisectionSpec::default(),
            admm,
            sg,
            links,
            ledger: BackhaulLedger::new(scheme),
            rng: ChaCha8Rng::seed_from_u64(pilots.seed.wrapping_add(1)),
        })
    }

    pub fn reset(&mut self) {
        if let Some(a) = &mut self.admm {
            a.reset();
        }
        if let Some(s) = &mut self.sg {
            s.reset();
        }
    }

    /// Downlink training: estimated receivers and MSEs of every stream.
    pub fn downlink(&mut self, problem: &Problem, beams: &Beamformers) -> (Receivers, Vec<f64>) {
        let t = dl_training(problem, beams, &self.book, self.pilot_noise, &mut self.rng);
        de_receivers(&t, &self.book, problem, self.pilot_noise)
    }

    /// Uplink training, exchange of the composite sums and one update.
    pub fn iterate(
        &mut self,
        problem: &Problem,
        beams: &mut Beamformers,
        receivers: &Receivers,
        w: &[f64],
        active: &[bool],
    ) -> Result<StepDiagnostics> {
        let cl = &problem.cluster;
        let ns = cl.num_streams();
        let len = self.book.length;
        let r = ul_training(problem, receivers, w, &self.book, self.pilot_noise, &mut self.rng);
        let x = composites(&r, beams, cl, len);
        let mut z: Vec<CVec> = (0..ns)
            .map(|s| cl.stream_cluster(s).iter().fold(CVec::zeros(len), |acc, &b| acc + &x[b * ns + s]))
            .collect();
        if !self.links.is_ideal() {
            let mut flat: Vec<C64> = z.iter().flat_map(|v| v.iter().copied()).collect();
            self.links.deliver(&mut flat);
            for (s, v) in z.iter_mut().enumerate() {
                v.copy_from_slice(&flat[s * len..(s + 1) * len]);
            }
        }
        self.ledger.record((len * active.iter().filter(|&&a| a).count()) as u64);

        let mut diag = StepDiagnostics::default();
        let power = &problem.power;
        match self.algorithm {
            DeAlgorithm::Br { alpha } => {
                let mut solved = beams.clone();
                for b in 0..cl.num_bs() {
                    let streams: Vec<usize> = cl.streams_served_by(b).filter(|&s| active[s]).collect();
                    let cbar: Vec<CVec> = streams.iter().map(|&s| &z[s] - &x[b * ns + s]).collect();
                    let sol = de_br_solve(&r[b], &self.book, w, &cbar, &streams, power[b], &self.bisection)?;
                    for (&s, m) in streams.iter().zip(sol.beams) {
                        solved.set(b, s, m);
                    }
                }
                *beams = crate::sse::br_regulated_update(beams, &solved, alpha);
            }
            DeAlgorithm::Admm { rho, .. } => {
                let state = self.admm.as_mut().expect("admm state");
                if let Some(rep) = state.absorb(&z, &x, cl) {
                    diag.consensus_residual = Some(rep.residual);
                    diag.appendix_ok = Some(rep.appendix_ok);
                }
                for b in 0..cl.num_bs() {
                    let streams: Vec<usize> = cl.streams_served_by(b).filter(|&s| active[s]).collect();
                    let q: Vec<CVec> =
                        streams.iter().map(|&s| state.target(&x[b * ns + s], s, cl.stream_cluster(s).len())).collect();
                    let sol = de_admm_solve(&r[b], &self.book, w, &q, &streams, cl, power[b], rho, &self.bisection)?;
                    for (&s, m) in streams.iter().zip(sol.beams) {
                        beams.set(b, s, m);
                    }
                }
            }
            DeAlgorithm::Sg(_) => {
                let nt = problem.channels.nt();
                let mut grads = vec![CVec::zeros(nt); cl.num_bs() * ns];
                for s in (0..ns).filter(|&s| active[s]) {
                    for &b in cl.stream_cluster(s) {
                        grads[b * ns + s] = de_sg_gradient(&r[b], &z[s], &self.book.ul[s], w[s], len);
                    }
                }
                let state = self.sg.as_mut().expect("sg state");
                diag.gradient_norm = Some(sg_step(state, &grads, beams, cl, power));
            }
        }
        for s in (0..ns).filter(|&s| !active[s]) {
            beams.clear_stream(s);
        }
        Ok(diag)
    }
}

/// Weights `mu / (ln 2 eps_hat)`, zero for inactive streams.
pub fn de_weights(problem: &Problem, eps: &[f64], active: &[bool]) -> Result<Vec<f64>> {
    let cl = &problem.cluster;
    (0..cl.num_streams())
        .map(|s| if active[s] { mse_weight(eps[s], problem.mu[cl.owner(s)]) } else { Ok(0.0) })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DeOptions {
    pub pilots: PilotConfig,
    pub scheme: Scheme,
    pub quantizer: Option<QuantizerState>,
    pub bisection: BisectionSpec,
    pub init: Option<Beamformers>,
    pub record_beams: bool,
}

impl DeOptions {
    pub fn new(pilots: PilotConfig) -> Self {
        DeOptions {
            pilots,
            scheme: Scheme::BackhaulOffload,
            quantizer: None,
            bisection: BisectionSpec::default(),
            init: None,
            record_beams: false,
        }
    }
}

/// Static-channel DE run; both training phases and the weights are
/// refreshed every iteration. Rates are evaluated with exact MMSE receivers.
pub fn run_de(problem: &Problem, algorithm: DeAlgorithm, iters: usize, options: &DeOptions) -> Result<SseTrace> {
    let cl = &problem.cluster;
    let mut engine = DeEngine::new(algorithm, problem, &options.pilots, options.scheme, options.quantizer.as_ref())?;
    engine.bisection = options.bisection.clone();
    let mut beams = options.init.clone().unwrap_or_else(|| matched_filter_init(problem));
    let active = vec![true; cl.num_streams()];
    let mut trace = SseTrace {
        sum_rate: Vec::with_capacity(iters),
        per_bs_power: Vec::with_capacity(iters),
        consensus_residual: Vec::with_capacity(iters),
        gradient_norm: Vec::with_capacity(iters),
        appendix_ok: true,
        ledger: engine.ledger.clone(),
        saturation_events: 0,
        beams: beams.clone(),
        history: Vec::new(),
    };
    for _ in 0..iters {
        let (rx, eps) = engine.downlink(problem, &beams);
        let w = de_weights(problem, &eps, &active)?;
        let diag = engine.iterate(problem, &mut beams, &rx, &w, &active)?;
        trace.sum_rate.push(weighted_sum_rate(&problem.channels, &beams, None, cl, &problem.sigma2, &problem.mu));
        trace.per_bs_power.push(all_bs_powers(&beams, cl));
        trace.consensus_residual.push(diag.consensus_residual);
        trace.gradient_norm.push(diag.gradient_norm);
        trace.appendix_ok &= diag.appendix_ok.unwrap_or(true);
        if options.record_beams {
            trace.history.push(beams.clone());
        }
    }
    trace.ledger = engine.ledger;
    trace.saturation_events = engine.links.saturation_events;
    trace.beams = beams;
    Ok(trace)
}
