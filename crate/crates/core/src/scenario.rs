//! Frame-level orchestration: layout and fading, admission, the selected
//! solver and one metrics row per (frame, inner iteration).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::admission::{bit_for_frame, detect_dropped, maybe_reset, select_active, AdmissionPolicy, BeamformerPair};
use crate::de::{de_weights, DeAlgorithm, DeEngine, PilotConfig};
use crate::error::{config, Error, Result};
use crate::fading::{derive_doppler, FadingProcess};
use crate::geometry::{build_wraparound_layout, db_to_linear, noise_power};
use crate::model::{all_bs_powers, weighted_sum_rate, Beamformers, Cluster, Problem};
use crate::signaling::{account_exchange, build_schedule, BackhaulLedger, FrameSchedule, QuantizerState, Scheme};
use crate::sse::{feasible_projection, ExchangePolicy, PowerControl, SgParams, SseAlgorithm, SseEngine, StepDiagnostics};
use crate::wmmse::{refresh_receivers_and_weights, solve_transmit_subproblem, SubproblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Algorithm {
    Centralized,
    Br,
    Admm,
    Sg,
    DeBr,
    DeAdmm,
    DeSg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Centralized,
        Algorithm::Br,
        Algorithm::Admm,
        Algorithm::Sg,
        Algorithm::DeBr,
        Algorithm::DeAdmm,
        Algorithm::DeSg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Centralized => "centralized",
            Algorithm::Br => "br",
            Algorithm::Admm => "admm",
            Algorithm::Sg => "sg",
            Algorithm::DeBr => "de_br",
            Algorithm::DeAdmm => "de_admm",
            Algorithm::DeSg => "de_sg",
        }
    }

    pub fn is_de(self) -> bool {
        matches!(self, Algorithm::DeBr | Algorithm::DeAdmm | Algorithm::DeSg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ClusterMode {
    FullCooperation,
    PerCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum LayoutKind {
    /// Hexagonal wrap-around cells (1 or 7) with distance-based gains.
    WrapAround,
    /// Unit-gain i.i.d. Rayleigh links for any number of cells.
    Iid,
}

/// Flat scenario description. Optional fields fall back to
/// algorithm-dependent defaults.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub cells: usize,
    pub users_per_cell: usize,
    pub nt: usize,
    pub nr: usize,
    pub streams_per_user: usize,
    pub cluster_mode: ClusterMode,
    pub layout: LayoutKind,
    pub inter_site_distance: f64,
    pub pathloss_exponent: f64,
    pub snr_db: f64,
    /// Per-BS power budget.
    pub power: f64,
    pub algorithm: Algorithm,
    /// BR step (default 0.5) or SG step (default 0.1).
    pub alpha: Option<f64>,
    pub rho: f64,
    /// ADMM dual step (default 1 for SSE, 1/rho for DE) or SG dual step
    /// (default 0.01).
    pub beta_dual: Option<f64>,
    pub omega: f64,
    pub normalize_step: bool,
    pub power_control: PowerControl,
    pub exchange: ExchangePolicy,
    /// Bits per branch; absent means unquantized.
    pub q_bits: Option<u32>,
    pub smoothing_beta: f64,
    pub quantizer_range: f64,
    pub gamma: f64,
    /// Same as `iters_per_frame`; both may be given only if equal.
    pub bit: Option<usize>,
    pub iters_per_frame: Option<usize>,
    pub bit_after_reset: Option<usize>,
    /// Defaults to the total stream count.
    pub pilot_length: Option<usize>,
    pub pilot_orthogonal: bool,
    pub pilot_noise_power: f64,
    pub frames: usize,
    /// Absent means no reset after the first frame.
    pub reset_interval: Option<usize>,
    pub drop_threshold: f64,
    pub delayed_indexing: bool,
    pub velocity_kmh: f64,
    pub signaling_rate_ms: f64,
    pub carrier_ghz: f64,
    /// Overrides the Doppler derived from velocity, carrier and signaling rate.
    pub normalized_doppler: Option<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            cells: 7,
            users_per_cell: 7,
            nt: 4,
            nr: 2,
            streams_per_user: 1,
            cluster_mode: ClusterMode::FullCooperation,
            layout: LayoutKind::WrapAround,
            inter_site_distance: 600.0,
            pathloss_exponent: 3.0,
            snr_db: 20.0,
            power: 1.0,
            algorithm: Algorithm::Br,
            alpha: None,
            rho: 3.0,
            beta_dual: None,
            omega: 0.5,
            normalize_step: true,
            power_control: PowerControl::Projection,
            exchange: ExchangePolicy::BackhaulOffload,
            q_bits: None,
            smoothing_beta: 1.0,
            quantizer_range: 1.0,
            gamma: 0.0,
            bit: None,
            iters_per_frame: None,
            bit_after_reset: None,
            pilot_length: None,
            pilot_orthogonal: true,
            pilot_noise_power: 0.0,
            frames: 20,
            reset_interval: None,
            drop_threshold: 1e-3,
            delayed_indexing: false,
            velocity_kmh: 2.7,
            signaling_rate_ms: 2.0,
            carrier_ghz: 2.0,
            normalized_doppler: None,
            seed: 1,
        }
    }
}

const DEFAULT_BIT: usize = 3;
const DEFAULT_BIT_AFTER_RESET: usize = 10;

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn num_streams(&self) -> usize {
        self.num_users() * self.streams_per_user
    }

    pub fn bit_normal(&self) -> Result<usize> {
        match (self.bit, self.iters_per_frame) {
            (Some(a), Some(b)) if a != b => config("bit and iters_per_frame disagree"),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Ok(DEFAULT_BIT),
        }
    }

    pub fn policy(&self) -> Result<AdmissionPolicy> {
        let p = AdmissionPolicy {
            reset_interval: self.reset_interval,
            drop_threshold: self.drop_threshold,
            bit_after_reset: self.bit_after_reset.unwrap_or(DEFAULT_BIT_AFTER_RESET),
            bit_normal: self.bit_normal()?,
            delayed_indexing: self.delayed_indexing,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self) -> Result<FrameSchedule> {
        build_schedule(self.gamma, self.bit_normal()?)
    }

    pub fn doppler(&self) -> f64 {
        self.normalized_doppler
            .unwrap_or_else(|| derive_doppler(self.velocity_kmh, self.carrier_ghz, self.signaling_rate_ms))
    }

    pub fn pilot_length(&self) -> usize {
        self.pilot_length.unwrap_or_else(|| self.num_streams())
    }

    fn sg_params(&self) -> SgParams {
        SgParams {
            alpha: self.alpha.unwrap_or(0.1),
            beta_dual: self.beta_dual.unwrap_or(1e-2),
            omega: self.omega,
            normalize: self.normalize_step,
            power_control: self.power_control,
        }
    }

    /// Checks every field and the combinations between them.
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("cells", self.cells),
            ("users_per_cell", self.users_per_cell),
            ("nt", self.nt),
            ("nr", self.nr),
            ("streams_per_user", self.streams_per_user),
            ("frames", self.frames),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.layout == LayoutKind::WrapAround && self.cells != 1 && self.cells != 7 {
            return config("the wrap-around layout supports cells = 1 or 7; use layout = \"iid\" otherwise");
        }
        if !self.snr_db.is_finite() {
            return config("snr_db must be finite");
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return config("power must be positive");
        }
        if !(self.inter_site_distance > 0.0) || !(self.pathloss_exponent >= 0.0) {
            return config("inter_site_distance must be positive and pathloss_exponent non-negative");
        }
        if self.streams_per_user > self.nr.min(self.nt * self.cells) {
            return config("streams_per_user exceeds the antenna counts");
        }
        if !(self.velocity_kmh >= 0.0) || !(self.signaling_rate_ms >= 0.0) || !(self.carrier_ghz >= 0.0) {
            return config("velocity, signaling rate and carrier must be non-negative");
        }
        if let Some(fd) = self.normalized_doppler {
            if !(fd >= 0.0) || !fd.is_finite() {
                return config("normalized_doppler must be finite and non-negative");
            }
        }
        QuantizerState::new(self.q_bits, self.smoothing_beta, self.quantizer_range)?;
        self.schedule()?;
        self.policy()?;
        match self.algorithm {
            Algorithm::Centralized => {}
            Algorithm::Br | Algorithm::DeBr => SseAlgorithm::Br { alpha: self.alpha.unwrap_or(0.5) }.validate()?,
            Algorithm::Admm | Algorithm::DeAdmm => {
                DeAlgorithm::Admm { rho: self.rho, beta_dual: self.beta_dual.unwrap_or(1.0 / self.rho) }.validate()?
            }
            Algorithm::Sg | Algorithm::DeSg => SseAlgorithm::Sg(self.sg_params()).validate()?,
        }
        if self.algorithm.is_de() {
            let s = self.pilot_length();
            if s == 0 {
                return config("pilot_length must be at least 1");
            }
            if self.pilot_orthogonal && s < self.num_streams() {
                return Err(Error::Config(format!(
                    "orthogonal pilots need pilot_length >= total streams ({}), got {s}",
                    self.num_streams()
                )));
            }
            if !(self.pilot_noise_power >= 0.0) {
                return config("pilot_noise_power must be non-negative");
            }
        }
        Ok(())
    }
}

/// One line of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub frame: usize,
    pub inner_iteration: usize,
    pub algorithm: &'static str,
    pub seed: u64,
    pub sum_rate: f64,
    pub effective_rate: f64,
    pub per_bs_power: Vec<f64>,
    pub consensus_residual: Option<f64>,
    pub gradient_norm: Option<f64>,
    pub active_streams: usize,
    pub backhaul_scalars: u64,
    pub quantizer_saturation_events: u64,
}

impl MetricsRow {
    pub const COLUMNS: [&'static str; 12] = [
        "frame",
        "inner_iteration",
        "algorithm",
        "seed",
        "sum_rate",
        "effective_rate",
        "per_bs_power",
        "consensus_residual",
        "gradient_norm",
        "active_streams",
        "backhaul_scalars",
        "quantizer_saturation_events",
    ];
}

#[derive(Debug, Clone)]
pub struct FrameError {
    pub frame: usize,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct ScenarioSummary {
    pub algorithm: &'static str,
    pub seed: u64,
    pub frames_completed: usize,
    /// Rate at the last row of the last completed frame.
    pub final_sum_rate: f64,
    /// Mean over frames of the end-of-frame effective rate.
    pub mean_effective_rate: f64,
    pub backhaul_total: u64,
    pub error: Option<FrameError>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: ScenarioSummary,
}

/// Static parts of a scenario: cluster map, noise, budgets and the fading
/// process.
#[derive(Debug, Clone)]
pub struct Environment {
    pub cluster: Cluster,
    pub sigma2: Vec<f64>,
    pub mu: Vec<f64>,
    pub power: Vec<f64>,
    pub fading: FadingProcess,
}

impl Environment {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.num_users();
        let (home, gains): (Vec<usize>, Vec<f64>) = match cfg.layout {
            LayoutKind::WrapAround => {
                let layout = build_wraparound_layout(cfg.cells, cfg.inter_site_distance, cfg.users_per_cell)?;
                let gains = layout.relative_gains(cfg.pathloss_exponent)?;
                (layout.home, gains)
            }
            LayoutKind::Iid => ((0..k).map(|u| u / cfg.users_per_cell).collect(), vec![1.0; cfg.cells * k]),
        };
        let cluster = match cfg.cluster_mode {
            ClusterMode::FullCooperation => Cluster::full_cooperation(cfg.cells, k, cfg.streams_per_user),
            ClusterMode::PerCell => Cluster::per_cell(cfg.cells, &home, cfg.streams_per_user)?,
        };
        cluster.check_dims(cfg.nt, cfg.nr)?;
        // gains are relative to the cell edge, so the edge gain is one
        let sigma2 = vec![noise_power(db_to_linear(cfg.snr_db), cfg.power, 1.0)?; k];
        let fading = FadingProcess::new(cfg.seed, cfg.doppler(), cfg.cells, k, cfg.nt, cfg.nr, &gains)?;
        Ok(Environment { cluster, sigma2, mu: vec![1.0; k], power: vec![cfg.power; cfg.cells], fading })
    }

    pub fn problem_at(&self, frame: usize) -> Result<Problem> {
        Problem::new(
            self.fading.channel_at(frame as u64),
            self.cluster.clone(),
            self.sigma2.clone(),
            self.mu.clone(),
            self.power.clone(),
        )
    }
}

enum Engine {
    Centralized { spec: SubproblemSpec, ledger: BackhaulLedger, per_stream: u64 },
    Sse(SseEngine),
    De(DeEngine),
}

impl Engine {
    fn build(cfg: &ScenarioConfig, problem: &Problem) -> Result<Self> {
        let quantizer = match cfg.q_bits {
            Some(_) => Some(QuantizerState::new(cfg.q_bits, cfg.smoothing_beta, cfg.quantizer_range)?),
            None if cfg.smoothing_beta < 1.0 => Some(QuantizerState::new(None, cfg.smoothing_beta, 1.0)?),
            None => None,
        };
        let alpha_br = cfg.alpha.unwrap_or(0.5);
        let sse = |alg: SseAlgorithm| -> Result<Engine> {
            let mut e = SseEngine::new(alg, problem, cfg.exchange, quantizer.as_ref())?;
            if let (Some(a), Some(beta)) = (&mut e.solver.admm, cfg.beta_dual) {
                a.beta_dual = beta;
            }
            Ok(Engine::Sse(e))
        };
        let de = |alg: DeAlgorithm| -> Result<Engine> {
            let pilots = PilotConfig {
                length: cfg.pilot_length(),
                orthogonal: cfg.pilot_orthogonal,
                noise_power: cfg.pilot_noise_power,
                seed: cfg.seed,
            };
            Ok(Engine::De(DeEngine::new(alg, problem, &pilots, cfg.exchange.into(), quantizer.as_ref())?))
        };
        match cfg.algorithm {
            Algorithm::Centralized => {
                let per_stream =
                    account_exchange(Scheme::GlobalCsi, &problem.cluster, problem.channels.nt(), problem.channels.nr());
                Ok(Engine::Centralized {
                    spec: SubproblemSpec::warm_start(),
                    ledger: BackhaulLedger::new(Scheme::GlobalCsi),
                    per_stream,
                })
            }
            Algorithm::Br => sse(SseAlgorithm::Br { alpha: alpha_br }),
            Algorithm::Admm => sse(SseAlgorithm::Admm { rho: cfg.rho }),
            Algorithm::Sg => sse(SseAlgorithm::Sg(cfg.sg_params())),
            Algorithm::DeBr => de(DeAlgorithm::Br { alpha: alpha_br }),
            Algorithm::DeAdmm => de(DeAlgorithm::Admm { rho: cfg.rho, beta_dual: cfg.beta_dual.unwrap_or(1.0 / cfg.rho) }),
            Algorithm::DeSg => de(DeAlgorithm::Sg(cfg.sg_params())),
        }
    }

    fn reset(&mut self) {
        match self {
            Engine::Centralized { .. } => {}
            Engine::Sse(e) => e.solver.reset(),
            Engine::De(e) => e.reset(),
        }
    }

    /// Weights held for the whole frame.
    fn frame_weights(&mut self, problem: &Problem, beams: &Beamformers, active: &[bool]) -> Result<Vec<f64>> {
        match self {
            Engine::Centralized { .. } => Ok(Vec::new()),
            Engine::Sse(_) => Ok(refresh_receivers_and_weights(problem, beams, Some(active))?.1),
            Engine::De(e) => {
                let (_, eps) = e.downlink(problem, beams);
                de_weights(problem, &eps, active)
            }
        }
    }

    fn ledger(&self) -> &BackhaulLedger {
        match self {
            Engine::Centralized { ledger, .. } => ledger,
            Engine::Sse(e) => &e.ledger,
            Engine::De(e) => &e.ledger,
        }
    }

    fn saturation_events(&self) -> u64 {
        match self {
            Engine::Centralized { .. } => 0,
            Engine::Sse(e) => e.links.saturation_events,
            Engine::De(e) => e.links.saturation_events,
        }
    }

    fn close_frame(&mut self) {
        match self {
            Engine::Centralized { ledger, .. } => ledger.close_frame(),
            Engine::Sse(e) => e.ledger.close_frame(),
            Engine::De(e) => e.ledger.close_frame(),
        }
    }

    /// One bi-directional iteration.
    fn iterate(
        &mut self,
        problem: &Problem,
        beams: &mut Beamformers,
        w: &[f64],
        active: &[bool],
    ) -> Result<StepDiagnostics> {
        match self {
            Engine::Centralized { spec, ledger, per_stream } => {
                let (rx, w) = refresh_receivers_and_weights(problem, beams, Some(active))?;
                *beams = solve_transmit_subproblem(problem, &rx, &w, beams, spec)?.beams;
                ledger.record(*per_stream * active.iter().filter(|&&a| a).count() as u64);
                Ok(StepDiagnostics::default())
            }
            Engine::Sse(e) => {
                let (rx, _) = refresh_receivers_and_weights(problem, beams, Some(active))?;
                e.iterate(problem, beams, &rx, w, active)
            }
            Engine::De(e) => {
                let (rx, _) = e.downlink(problem, beams);
                e.iterate(problem, beams, &rx, w, active)
            }
        }
    }
}

/// Runs every frame of the scenario. A solver failure ends the run; the
/// rows produced so far are kept and the error is reported in the summary
/// with its frame index.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let env = Environment::build(cfg)?;
    let policy = cfg.policy()?;
    let schedule = cfg.schedule()?;
    let name = cfg.algorithm.name();
    let mut rows = Vec::new();
    let mut summary = ScenarioSummary {
        algorithm: name,
        seed: cfg.seed,
        frames_completed: 0,
        final_sum_rate: 0.0,
        mean_effective_rate: 0.0,
        backhaul_total: 0,
        error: None,
    };
    let first = env.problem_at(0)?;
    let mut engine = Engine::build(cfg, &first)?;
    let mut pair = BeamformerPair::new(&first);
    let mut effective_sum = 0.0;

    for frame in 0..cfg.frames {
        let result = run_frame(cfg, &env, &policy, &schedule, &mut engine, &mut pair, frame, &mut rows);
        match result {
            Ok(rate) => {
                summary.frames_completed += 1;
                summary.final_sum_rate = rate;
                effective_sum += schedule.effective_rate(rate);
            }
            Err(error) => {
                summary.error = Some(FrameError { frame, error });
                break;
            }
        }
        engine.close_frame();
    }
    if summary.frames_completed > 0 {
        summary.mean_effective_rate = effective_sum / summary.frames_completed as f64;
    }
    summary.backhaul_total = engine.ledger().total;
    Ok(ScenarioOutput { rows, summary })
}

#[allow(clippy::too_many_arguments)]
fn run_frame(
    cfg: &ScenarioConfig,
    env: &Environment,
    policy: &AdmissionPolicy,
    schedule: &FrameSchedule,
    engine: &mut Engine,
    pair: &mut BeamformerPair,
    frame: usize,
    rows: &mut Vec<MetricsRow>,
) -> Result<f64> {
    let problem = env.problem_at(frame)?;
    let cl = &problem.cluster;
    let reset = maybe_reset(pair, frame, policy, &problem);
    let w = if reset {
        engine.reset();
        (0..cl.num_streams()).map(|s| problem.mu[cl.owner(s)] / core::f64::consts::LN_2).collect()
    } else {
        engine.frame_weights(&problem, &pair.training, &pair.training_active)?
    };
    let mut rate = 0.0;
    for it in 0..bit_for_frame(frame, policy) {
        let before = engine.ledger().total;
        let diag = engine.iterate(&problem, &mut pair.training, &w, &pair.training_active)?;
        if it + 1 == bit_for_frame(frame, policy) {
            let flags = detect_dropped(&pair.training, cl, &problem.power, policy.drop_threshold);
            for (s, keep) in flags.into_iter().enumerate() {
                if !keep && pair.training_active[s] {
                    pair.training_active[s] = false;
                    pair.training.clear_stream(s);
                }
            }
        }
        let (data, flags) = select_active(pair, frame, policy);
        let mut data = data.clone();
        feasible_projection(&mut data, cl, &problem.power);
        rate = weighted_sum_rate(&problem.channels, &data, None, cl, &problem.sigma2, &problem.mu);
        rows.push(MetricsRow {
            frame,
            inner_iteration: it,
            algorithm: cfg.algorithm.name(),
            seed: cfg.seed,
            sum_rate: rate,
            effective_rate: schedule.effective_rate(rate),
            per_bs_power: all_bs_powers(&data, cl),
            consensus_residual: diag.consensus_residual,
            gradient_norm: diag.gradient_norm,
            active_streams: flags.iter().filter(|&&a| a).count(),
            backhaul_scalars: engine.ledger().total - before,
            quantizer_saturation_events: engine.saturation_events(),
        });
    }
    Ok(rate)
}

/// Human-readable list of the algorithm names.
pub fn algorithm_names() -> String {
    Algorithm::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", ")
}
