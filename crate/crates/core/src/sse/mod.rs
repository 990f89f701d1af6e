//! Decentralized solvers driven by stream-specific estimates of the
//! effective channels: best response, sharing-form ADMM and stochastic
//! gradient.
//!
//! Every iteration exchanges the combined terms `t_{r,s}` (what receiving
//! stream `r` sees of transmitted stream `s`, summed over the transmitting
//! cluster) through [`FeedbackLinks`]; each BS then works from that snapshot
//! and its own exact contributions only.

mod admm;
mod br;
mod sg;

pub use admm::{
    admm_dual_update, admm_local_solve, admm_s_update, appendix_a_check, appendix_a_split, AdmmState, AppendixSplit,
    ConsensusReport,
};
pub use br::{br_fixed_terms, br_fixed_terms_from_combined, br_local_solve, br_regulated_update};
pub use sg::{feasible_projection, sg_gradient, sg_step, PowerControl, SgState};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, Result};
use crate::linalg::CVec;
use crate::model::{all_bs_powers, matched_filter_init, weighted_sum_rate, Beamformers, Problem, Receivers};
use crate::signaling::{account_exchange, BackhaulLedger, FeedbackLinks, QuantizerState, Scheme};
use crate::wmmse::{refresh_receivers_and_weights, BisectionSpec, Crosstalk, EffectiveChannels};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgParams {
    pub alpha: f64,
    pub beta_dual: f64,
    pub omega: f64,
    pub normalize: bool,
    pub power_control: PowerControl,
}

impl Default for SgParams {
    fn default() -> Self {
        SgParams { alpha: 1e-2, beta_dual: 1e-2, omega: 0.5, normalize: true, power_control: PowerControl::Projection }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SseAlgorithm {
    Br { alpha: f64 },
    Admm { rho: f64 },
    Sg(SgParams),
}

impl SseAlgorithm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SseAlgorithm::Br { alpha } if !(alpha > 0.0 && alpha <= 1.0) => config("BR step must lie in (0, 1]"),
            SseAlgorithm::Admm { rho } if !(rho > 0.0) => config("ADMM penalty must be positive"),
            SseAlgorithm::Sg(p) if !(p.alpha > 0.0) || !(p.beta_dual >= 0.0) || !(p.omega >= 0.0) => {
                config("SG steps must be positive and momentum non-negative")
            }
            _ => Ok(()),
        }
    }
}

/// How the combined terms travel; the math is identical, only the
/// accounting label differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ExchangePolicy {
    BackhaulOffload,
    FeedbackChannel,
}

impl From<ExchangePolicy> for Scheme {
    fn from(p: ExchangePolicy) -> Scheme {
        match p {
            ExchangePolicy::BackhaulOffload => Scheme::BackhaulOffload,
            ExchangePolicy::FeedbackChannel => Scheme::FeedbackChannel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub consensus_residual: Option<f64>,
    pub gradient_norm: Option<f64>,
    pub appendix_ok: Option<bool>,
}

/// Algorithm state carried across iterations.
#[derive(Debug, Clone)]
pub struct SseSolver {
    pub algorithm: SseAlgorithm,
    pub bisection: BisectionSpec,
    pub admm: Option<AdmmState>,
    pub sg: Option<SgState>,
}

impl SseSolver {
    pub fn new(algorithm: SseAlgorithm, problem: &Problem) -> Self {
        let cl = &problem.cluster;
        let admm = match algorithm {
            SseAlgorithm::Admm { rho } => Some(AdmmState::new(rho, cl.num_streams())),
            _ => None,
        };
        let sg = match algorithm {
            SseAlgorithm::Sg(p) => Some(SgState::new(
                p.alpha,
                p.beta_dual,
                p.omega,
                p.normalize,
                p.power_control,
                cl.num_bs(),
                cl.num_streams(),
                problem.channels.nt(),
            )),
            _ => None,
        };
        SseSolver { algorithm, bisection: BisectionSpec::default(), admm, sg }
    }

    /// Forgets consensus, dual and momentum history.
    pub fn reset(&mut self) {
        if let Some(a) = &mut self.admm {
            a.reset();
        }
        if let Some(s) = &mut self.sg {
            s.reset();
        }
    }

    /// One update of all BSs from the delivered snapshot `xt`.
    pub fn step(
        &mut self,
        problem: &Problem,
        eff: &EffectiveChannels,
        w: &[f64],
        xt: &Crosstalk,
        active: &[bool],
        beams: &mut Beamformers,
    ) -> Result<StepDiagnostics> {
        let cl = &problem.cluster;
        let mut diag = StepDiagnostics::default();
        match self.algorithm {
            SseAlgorithm::Br { alpha } => {
                let mut solved = beams.clone();
                for b in 0..cl.num_bs() {
                    let streams: Vec<usize> = cl.streams_served_by(b).filter(|&s| active[s]).collect();
                    let sol = br_local_solve(
                        eff,
                        w,
                        |r, s| br_fixed_terms_from_combined(xt, b, r, s),
                        &streams,
                        b,
                        problem.power[b],
                        &self.bisection,
                    )?;
                    for (&s, m) in streams.iter().zip(sol.beams) {
                        solved.set(b, s, m);
                    }
                }
                *beams = br_regulated_update(beams, &solved, alpha);
            }
            SseAlgorithm::Admm { .. } => {
                let state = self.admm.as_mut().expect("admm state");
                if let Some(rep) = state.absorb(xt, w, cl) {
                    diag.consensus_residual = Some(rep.residual);
                    diag.appendix_ok = Some(rep.appendix_ok);
                }
                let state = &*state;
                for b in 0..cl.num_bs() {
                    let streams: Vec<usize> = cl.streams_served_by(b).filter(|&s| active[s]).collect();
                    let sol = admm_local_solve(
                        eff,
                        w,
                        |r, s| state.target(xt, w, cl, b, r, s),
                        cl,
                        &streams,
                        b,
                        problem.power[b],
                        state.rho,
                        &self.bisection,
                    )?;
                    for (&s, m) in streams.iter().zip(sol.beams) {
                        beams.set(b, s, m);
                    }
                }
            }
            SseAlgorithm::Sg(_) => {
                let ns = cl.num_streams();
                let nt = problem.channels.nt();
                let mut grads = vec![CVec::zeros(nt); cl.num_bs() * ns];
                for s in (0..ns).filter(|&s| active[s]) {
                    for &b in cl.stream_cluster(s) {
                        grads[b * ns + s] = sg_gradient(eff, w, xt, b, s);
                    }
                }
                let state = self.sg.as_mut().expect("sg state");
                diag.gradient_norm = Some(sg_step(state, &grads, beams, cl, &problem.power));
            }
        }
        for s in (0..cl.num_streams()).filter(|&s| !active[s]) {
            beams.clear_stream(s);
        }
        Ok(diag)
    }
}

/// Solver plus the signaling path: quantized delivery of the combined terms
/// and the ledger.
#[derive(Debug, Clone)]
pub struct SseEngine {
    pub solver: SseSolver,
    pub links: FeedbackLinks,
    pub ledger: BackhaulLedger,
    per_stream: u64,
}

impl SseEngine {
    pub fn new(
        algorithm: SseAlgorithm,
        problem: &Problem,
        policy: ExchangePolicy,
        quantizer: Option<&QuantizerState>,
    ) -> Result<Self> {
        algorithm.validate()?;
        let ns = problem.num_streams();
        let links = match quantizer {
            Some(q) => FeedbackLinks::new(ns * ns, q),
            None => FeedbackLinks::ideal(ns * ns),
        };
        let scheme: Scheme = policy.into();
        let per_stream = account_exchange(scheme, &problem.cluster, problem.channels.nt(), problem.channels.nr());
        Ok(SseEngine { solver: SseSolver::new(algorithm, problem), links, ledger: BackhaulLedger::new(scheme), per_stream })
    }

    /// Exchange of the current combined terms followed by one solver step.
    pub fn iterate(
        &mut self,
        problem: &Problem,
        beams: &mut Beamformers,
        receivers: &Receivers,
        w: &[f64],
        active: &[bool],
    ) -> Result<StepDiagnostics> {
        let eff = EffectiveChannels::compute(problem, receivers);
        let mut xt = Crosstalk::compute(&eff, beams, &problem.cluster);
        if !self.links.is_ideal() {
            self.links.deliver(xt.combined_mut());
        }
        self.ledger.record(self.per_stream * active.iter().filter(|&&a| a).count() as u64);
        self.solver.step(problem, &eff, w, &xt, active, beams)
    }
}

#[derive(Debug, Clone)]
pub struct SseOptions {
    pub policy: ExchangePolicy,
    pub quantizer: Option<QuantizerState>,
    pub bisection: BisectionSpec,
    pub init: Option<Beamformers>,
    /// Keep the beams of every iteration.
    pub record_beams: bool,
}

impl Default for SseOptions {
    fn default() -> Self {
        SseOptions {
            policy: ExchangePolicy::BackhaulOffload,
            quantizer: None,
            bisection: BisectionSpec::default(),
            init: None,
            record_beams: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SseTrace {
    pub sum_rate: Vec<f64>,
    pub per_bs_power: Vec<Vec<f64>>,
    pub consensus_residual: Vec<Option<f64>>,
    pub gradient_norm: Vec<Option<f64>>,
    /// The per-BS elimination identity held at every consensus update.
    pub appendix_ok: bool,
    pub ledger: BackhaulLedger,
    pub saturation_events: u64,
    pub beams: Beamformers,
    pub history: Vec<Beamformers>,
}

/// Static-channel run of one decentralized algorithm. Receivers and
/// weights are refreshed every iteration.
pub fn run_sse(problem: &Problem, algorithm: SseAlgorithm, iters: usize, options: &SseOptions) -> Result<SseTrace> {
    let cl = &problem.cluster;
    let mut engine = SseEngine::new(algorithm, problem, options.policy, options.quantizer.as_ref())?;
    engine.solver.bisection = options.bisection.clone();
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
        let (rx, w) = refresh_receivers_and_weights(problem, &beams, None)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat, C64, ONE, ZERO};
    use crate::model::{mmse_receivers, Channels, Cluster};
    use crate::wmmse::{run_centralized, SubproblemSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_problem(h: &[f64], power: f64) -> Problem {
        let b = h.len();
        let ch = Channels::new(b, 1, 1, 1, h.iter().map(|&x| CMat::from_element(1, 1, c(x))).collect()).unwrap();
        Problem::new(ch, Cluster::full_cooperation(b, 1, 1), vec![1.0], vec![1.0], vec![power; b]).unwrap()
    }

    fn set_scalar(beams: &mut Beamformers, b: usize, s: usize, x: f64) {
        beams.set(b, s, CVec::from_element(1, c(x)));
    }

    #[test]
    fn fixed_terms_hand_values() {
        let p = scalar_problem(&[1.0, 2.0], 1.0);
        let rx = Receivers { u: vec![CVec::from_element(1, ONE)] };
        let mut bf = Beamformers::zeros(2, 1, 1);
        set_scalar(&mut bf, 0, 0, 0.3);
        set_scalar(&mut bf, 1, 0, 0.5);
        assert!((br_fixed_terms(&p, &rx, &bf, 0, 0, 0) - ONE).norm() < 1e-15);

        let single = scalar_problem(&[1.0], 1.0);
        let one = Beamformers::zeros(1, 1, 1);
        assert_eq!(br_fixed_terms(&single, &rx, &one, 0, 0, 0), ZERO);

        let eff = EffectiveChannels::compute(&p, &rx);
        let xt = Crosstalk::compute(&eff, &bf, &p.cluster);
        for b in 0..2 {
            let direct = br_fixed_terms(&p, &rx, &bf, b, 0, 0);
            assert!((br_fixed_terms_from_combined(&xt, b, 0, 0) - direct).norm() < 1e-15);
        }
    }

    #[test]
    fn regulated_update_is_affine() {
        let mut a = Beamformers::zeros(1, 1, 2);
        let mut b = Beamformers::zeros(1, 1, 2);
        a.set(0, 0, CVec::from_vec(vec![ONE, ZERO]));
        b.set(0, 0, CVec::from_vec(vec![c(3.0), C64::new(0.0, 2.0)]));
        assert_eq!(br_regulated_update(&a, &b, 1.0), b);
        assert_eq!(br_regulated_update(&a, &b, 0.0), a);
        assert_eq!(br_regulated_update(&a, &b, 0.5).get(0, 0), &CVec::from_vec(vec![c(2.0), C64::new(0.0, 1.0)]));
    }

    #[test]
    fn br_grid_oracle() {
        // two scalar BSs, BS 0 responds to BS 1 fixed at 0.4
        let p = scalar_problem(&[1.0, 0.7], 0.5);
        let rx = Receivers { u: vec![CVec::from_element(1, c(0.8))] };
        let mut bf = Beamformers::zeros(2, 1, 1);
        set_scalar(&mut bf, 1, 0, 0.4);
        let eff = EffectiveChannels::compute(&p, &rx);
        let xt = Crosstalk::compute(&eff, &bf, &p.cluster);
        let w = [1.3];
        let sol = br_local_solve(
            &eff,
            &w,
            |r, s| br_fixed_terms_from_combined(&xt, 0, r, s),
            &[0],
            0,
            0.5,
            &BisectionSpec::default(),
        )
        .unwrap();
        let f = |m: C64| {
            let t = C64::new(0.8, 0.0) * m + 0.8 * 0.7 * 0.4;
            w[0] * ((t - ONE).norm_sqr())
        };
        let mut best = (f64::INFINITY, ZERO);
        let r = 0.5f64.sqrt();
        let n = 600;
        for i in 0..=n {
            for j in 0..=n {
                let m = C64::new(-r + 2.0 * r * i as f64 / n as f64, -r + 2.0 * r * j as f64 / n as f64);
                if m.norm_sqr() <= 0.5 && f(m) < best.0 {
                    best = (f(m), m);
                }
            }
        }
        assert!((sol.beams[0][0] - best.1).norm() < 1e-2);
        assert!(f(sol.beams[0][0]) <= best.0 + 1e-4);
    }

    #[test]
    fn admm_scalar_updates() {
        assert_eq!(admm_s_update(ONE, ZERO, 1.0), c(0.5));
        assert_eq!(admm_s_update(ZERO, ZERO, 7.0), ZERO);
        let big = admm_s_update(C64::new(0.3, -1.0), c(0.2), 1e6);
        assert!((big - C64::new(0.5, -1.0)).norm() < 1e-5);
        assert_eq!(admm_dual_update(c(0.25), c(0.7), c(0.7)), c(0.25));
        assert_eq!(admm_dual_update(ZERO, ONE, admm_s_update(ONE, ZERO, 1.0)), c(0.5));
        assert_eq!(admm_dual_update(ZERO, ZERO, ZERO), ZERO);
    }

    #[test]
    fn admm_local_scalar_interior() {
        let p = scalar_problem(&[1.0], 10.0);
        let rx = Receivers { u: vec![CVec::from_element(1, ONE)] };
        let eff = EffectiveChannels::compute(&p, &rx);
        let sol = admm_local_solve(&eff, &[1.0], |_, _| ZERO, &p.cluster, &[0], 0, 10.0, 1.0, &BisectionSpec::default())
            .unwrap();
        assert!((sol.beams[0][0] - ONE).norm() < 1e-14);
        assert_eq!(sol.nu, 0.0);
    }

    #[test]
    fn consensus_split_identity() {
        let x = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.05, -0.4)];
        let split = appendix_a_split(&x, C64::new(0.7, 0.2), C64::new(-0.1, 0.3));
        assert!(appendix_a_check(&split.per_bs_s, C64::new(0.7, 0.2), &split.a_terms, &split.lambda_terms));
        let mut bad = split.per_bs_s.clone();
        bad[1] += c(1e-3);
        assert!(!appendix_a_check(&bad, C64::new(0.7, 0.2), &split.a_terms, &split.lambda_terms));
        let single = appendix_a_split(&x[..1], c(0.4), c(0.1));
        assert_eq!(single.per_bs_s[0], c(0.4));
    }

    #[test]
    fn sg_gradient_hand_values() {
        let p = scalar_problem(&[1.0], 1.0);
        let rx = Receivers { u: vec![CVec::from_element(1, ONE)] };
        let eff = EffectiveChannels::compute(&p, &rx);
        let mut bf = Beamformers::zeros(1, 1, 1);
        set_scalar(&mut bf, 0, 0, 1.0);
        let xt = Crosstalk::compute(&eff, &bf, &p.cluster);
        assert!(sg_gradient(&eff, &[1.0], &xt, 0, 0)[0].norm() < 1e-15);
        let xt0 = Crosstalk::compute(&eff, &Beamformers::zeros(1, 1, 1), &p.cluster);
        assert_eq!(sg_gradient(&eff, &[1.0], &xt0, 0, 0)[0], c(-2.0));
        assert_eq!(sg_gradient(&eff, &[0.0], &xt, 0, 0)[0], ZERO);
    }

    #[test]
    fn sg_step_reductions() {
        let cl = Cluster::full_cooperation(1, 1, 1);
        let mut st = SgState::new(0.1, 0.1, 0.0, false, PowerControl::Dual, 1, 1, 1);
        let mut bf = Beamformers::zeros(1, 1, 1);
        set_scalar(&mut bf, 0, 0, 0.2);
        sg_step(&mut st, &[CVec::from_element(1, c(-2.0))], &mut bf, &cl, &[1.0]);
        assert!((bf.get(0, 0)[0] - c(0.4)).norm() < 1e-15);
        assert_eq!(st.nu[0], 0.0);

        let mut st = SgState::new(0.1, 0.1, 0.5, true, PowerControl::Dual, 1, 1, 1);
        let before = bf.clone();
        sg_step(&mut st, &[CVec::zeros(1)], &mut bf, &cl, &[1.0]);
        assert_eq!(bf, before);
    }

    #[test]
    fn projection_cases() {
        let cl = Cluster::full_cooperation(1, 1, 1);
        let mut bf = Beamformers::zeros(1, 1, 2);
        bf.set(0, 0, CVec::from_vec(vec![c(2.0), ZERO]));
        feasible_projection(&mut bf, &cl, &[1.0]);
        assert!((bf.get(0, 0)[0] - ONE).norm() < 1e-15);
        let kept = bf.clone();
        feasible_projection(&mut bf, &cl, &[1.0]);
        assert_eq!(bf, kept);
        let mut z = Beamformers::zeros(1, 1, 2);
        feasible_projection(&mut z, &cl, &[1.0]);
        assert_eq!(z, Beamformers::zeros(1, 1, 2));
    }

    #[test]
    fn sg_single_user_reaches_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Problem::iid_rayleigh(&mut rng, 1, 1, 2, 1, 1, 10.0);
        let alg = SseAlgorithm::Sg(SgParams { alpha: 0.05, normalize: false, ..Default::default() });
        let tr = run_sse(&p, alg, 400, &SseOptions::default()).unwrap();
        let gain: f64 = p.channels.get(0, 0).iter().map(|z| z.norm_sqr()).sum();
        let cap = crate::linalg::log2(1.0 + gain / p.sigma2[0]);
        assert!((tr.sum_rate.last().unwrap() - cap).abs() < 1e-3 * cap);
    }

    #[test]
    fn decentralized_close_to_centralized() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = Problem::iid_rayleigh(&mut rng, 2, 4, 2, 2, 1, 10.0);
        let central = run_centralized(&p, 100, None, &SubproblemSpec::warm_start()).unwrap();
        let target = *central.report.objective_trace.last().unwrap();
        for alg in [SseAlgorithm::Br { alpha: 0.5 }, SseAlgorithm::Admm { rho: 3.0 }] {
            let tr = run_sse(&p, alg, 200, &SseOptions::default()).unwrap();
            let last = *tr.sum_rate.last().unwrap();
            assert!(last >= 0.9 * target, "{alg:?}: {last} vs {target}");
            assert!(tr.appendix_ok);
            for pw in &tr.per_bs_power {
                assert!(pw.iter().zip(&p.power).all(|(a, b)| *a <= b + 1e-6));
            }
        }
        let _ = mmse_receivers(&p.channels, &central.beams, &p.cluster, &p.sigma2);
    }
}
