//! Centralized WMMSE: the power-dual bisection shared by every per-BS
//! closed form, the Gauss-Seidel solver for the joint transmit subproblem
//! and the alternating outer loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{add_outer, c, inner, norm_sqr, CMat, CVec, HermitianEigen, C64, ZERO};
use crate::model::{
    all_bs_powers, matched_filter_init, mmse_from_signals, stream_mses, weighted_sum_rate, Beamformers, Cluster,
    Problem, ReceivedSignals, Receivers,
};

/// Bracket and stopping rule of the power-dual search.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionSpec {
    pub dual_lower: f64,
    /// Initial upper bracket; `None` starts from `trace(base) / N_T * 1e3`.
    pub dual_upper: Option<f64>,
    /// Relative power tolerance.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for BisectionSpec {
    fn default() -> Self {
        BisectionSpec { dual_lower: 0.0, dual_upper: None, tolerance: 1e-12, max_iters: 500 }
    }
}

/// Output of [`bisect_power_dual`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub nu: f64,
    pub beams: Vec<CVec>,
    pub power: f64,
    pub iterations: usize,
}

struct Spectral<'a> {
    eig: &'a HermitianEigen,
    coords: Vec<CVec>,
    energy: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

impl<'a> Spectral<'a> {
    fn new(eig: &'a HermitianEigen, rhs: &[CVec], scales: &[f64]) -> Self {
        let coords: Vec<CVec> = rhs.iter().map(|p| eig.project(p)).collect();
        let energy = coords.iter().map(|x| x.iter().map(|z| z.norm_sqr()).collect()).collect();
        Spectral { eig, coords, energy, scales: scales.to_vec() }
    }

    fn null_level(&self) -> f64 {
        let top = self.scales.iter().cloned().fold(0.0, f64::max) * self.eig.max_value();
        1e-12 * top
    }

    /// Power at `nu`; infinite when `nu = 0` and some rhs energy sits in the
    /// null space.
    fn power(&self, nu: f64) -> f64 {
        let null = self.null_level();
        let mut total = 0.0;
        for (energy, &scale) in self.energy.iter().zip(&self.scales) {
            let rhs_total: f64 = energy.iter().sum();
            for (e, &l) in energy.iter().zip(&self.eig.values) {
                let d = scale * l + nu;
                if nu == 0.0 && scale * l <= null {
                    if *e > 1e-20 * rhs_total {
                        return f64::INFINITY;
                    }
                    continue;
                }
                total += e / (d * d);
            }
        }
        total
    }

    fn beams(&self, nu: f64) -> Vec<CVec> {
        let null = self.null_level();
        self.coords
            .iter()
            .zip(&self.scales)
            .map(|(x, &scale)| {
                let y = CVec::from_iterator(
                    x.len(),
                    x.iter().zip(&self.eig.values).map(|(z, &l)| {
                        let d = scale * l + nu;
                        if nu == 0.0 && scale * l <= null {
                            ZERO
                        } else {
                            z / d
                        }
                    }),
                );
                &self.eig.vectors * y
            })
            .collect()
    }
}

/// Minimizes `sum_s c_s m_s^H A m_s - 2 Re(p_s^H m_s)` subject to
/// `sum_s ||m_s||^2 <= budget`, where `scales` holds the `c_s` (empty means
/// all one). Returns `m_s = (c_s A + nu I)^{-1} p_s` with the dual `nu`
/// found by bisection; the returned beams are always feasible.
pub fn bisect_power_dual(
    base: &CMat,
    rhs: &[CVec],
    scales: &[f64],
    budget: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    bisect_power_dual_eigen(&HermitianEigen::new(base), rhs, scales, budget, spec)
}

/// [`bisect_power_dual`] with the eigendecomposition of `A` supplied, so
/// repeated solves against one matrix decompose it once.
pub fn bisect_power_dual_eigen(
    eig: &HermitianEigen,
    rhs: &[CVec],
    scales: &[f64],
    budget: f64,
    spec: &BisectionSpec,
) -> Result<DualSolution> {
    let n = eig.values.len();
    let zero = |iterations| DualSolution { nu: 0.0, beams: vec![CVec::zeros(n); rhs.len()], power: 0.0, iterations };
    if rhs.iter().all(|p| norm_sqr(p) == 0.0) || budget <= 0.0 {
        return Ok(zero(0));
    }
    let ones;
    let scales = if scales.is_empty() {
        ones = vec![1.0; rhs.len()];
        &ones[..]
    } else {
        scales
    };
    let sp = Spectral::new(eig, rhs, scales);

    let mut lo = spec.dual_lower.max(0.0);
    let p_lo = sp.power(lo);
    if p_lo <= budget {
        return Ok(DualSolution { nu: lo, beams: sp.beams(lo), power: p_lo, iterations: 0 });
    }

    let trace: f64 = eig.values.iter().sum();
    let mut hi = spec.dual_upper.unwrap_or(trace / n as f64 * 1e3).max(lo);
    if !(hi > 0.0) {
        hi = 1.0;
    }
    let mut iterations = 0;
    let mut p_hi = sp.power(hi);
    while p_hi > budget {
        lo = hi;
        hi *= 2.0;
        p_hi = sp.power(hi);
        iterations += 1;
        if iterations >= spec.max_iters {
            return Err(Error::Convergence { iterations, power: p_hi, budget, best_nu: hi, best_beams: sp.beams(hi) });
        }
    }
    while budget - p_hi > spec.tolerance * budget && hi - lo > 4.0 * f64::EPSILON * hi {
        if iterations >= spec.max_iters {
            return Err(Error::Convergence { iterations, power: p_hi, budget, best_nu: hi, best_beams: sp.beams(hi) });
        }
        let mid = 0.5 * (lo + hi);
        let p_mid = sp.power(mid);
        if p_mid > budget {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
        iterations += 1;
    }
    Ok(DualSolution { nu: hi, beams: sp.beams(hi), power: p_hi, iterations })
}

/// Receiver-side effective channels `g_{b,r} = H_{b,k(r)}^H u_r`.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    num_streams: usize,
    g: Vec<CVec>,
}

impl EffectiveChannels {
    pub fn compute(problem: &Problem, receivers: &Receivers) -> Self {
        let cl = &problem.cluster;
        let ns = cl.num_streams();
        let mut g = Vec::with_capacity(cl.num_bs() * ns);
        for b in 0..cl.num_bs() {
            for r in 0..ns {
                g.push(problem.channels.get(b, cl.owner(r)).ad_mul(receivers.get(r)));
            }
        }
        EffectiveChannels { num_streams: ns, g }
    }

    pub fn g(&self, b: usize, r: usize) -> &CVec {
        &self.g[b * self.num_streams + r]
    }

    /// `A_b = sum_r w_r g_{b,r} g_{b,r}^H`.
    pub fn covariance(&self, b: usize, w: &[f64]) -> CMat {
        let n = self.g(b, 0).len();
        let mut a = CMat::zeros(n, n);
        for (r, &wr) in w.iter().enumerate() {
            if wr != 0.0 {
                add_outer(&mut a, self.g(b, r), wr);
            }
        }
        a
    }
}

/// Per-BS contributions `e_{b,r,s} = g_{b,r}^H m_{b,s}` and their coherent
/// sums `t_{r,s}` over the transmitting cluster of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Crosstalk {
    num_streams: usize,
    e: Vec<C64>,
    t: Vec<C64>,
}

impl Crosstalk {
    pub fn compute(eff: &EffectiveChannels, beams: &Beamformers, cluster: &Cluster) -> Self {
        let ns = cluster.num_streams();
        let mut x = Crosstalk { num_streams: ns, e: vec![ZERO; cluster.num_bs() * ns * ns], t: vec![ZERO; ns * ns] };
        for b in 0..cluster.num_bs() {
            x.refresh_bs(eff, beams, cluster, b);
        }
        x
    }

    /// Recomputes the contributions of BS `b` and patches the sums.
    pub fn refresh_bs(&mut self, eff: &EffectiveChannels, beams: &Beamformers, cluster: &Cluster, b: usize) {
        let ns = self.num_streams;
        for s in cluster.streams_served_by(b) {
            for r in 0..ns {
                let new = inner(eff.g(b, r), beams.get(b, s));
                let idx = (b * ns + r) * ns + s;
                self.t[r * ns + s] += new - self.e[idx];
                self.e[idx] = new;
            }
        }
    }

    pub fn e(&self, b: usize, r: usize, s: usize) -> C64 {
        self.e[(b * self.num_streams + r) * self.num_streams + s]
    }

    pub fn t(&self, r: usize, s: usize) -> C64 {
        self.t[r * self.num_streams + s]
    }

    pub fn t_mut(&mut self, r: usize, s: usize) -> &mut C64 {
        &mut self.t[r * self.num_streams + s]
    }

    /// All combined terms, row-major in `(r, s)`.
    pub fn combined_mut(&mut self) -> &mut [C64] {
        &mut self.t
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams
    }

    /// Weighted MSE sum `sum_r w_r eps_r` for the receivers behind `eff`.
    pub fn weighted_mse(&self, w: &[f64], noise: &[f64]) -> f64 {
        let ns = self.num_streams;
        (0..ns)
            .map(|r| {
                if w[r] == 0.0 {
                    return 0.0;
                }
                let mut eps = 1.0 + noise[r];
                for s in 0..ns {
                    eps += self.t(r, s).norm_sqr();
                }
                eps -= 2.0 * self.t(r, r).re;
                w[r] * eps
            })
            .sum()
    }
}

/// `sigma_k^2 ||u_r||^2` per stream, the receiver-noise part of each MSE.
pub fn receiver_noise(problem: &Problem, receivers: &Receivers) -> Vec<f64> {
    (0..problem.num_streams()).map(|r| problem.sigma2_of_stream(r) * norm_sqr(receivers.get(r))).collect()
}

/// Local rhs `p_{b,s} = w_s g_{b,s} - sum_r w_r g_{b,r} c_r` for the fixed
/// cooperating terms `c_r`.
pub fn local_rhs(eff: &EffectiveChannels, w: &[f64], b: usize, s: usize, fixed: impl Fn(usize) -> C64) -> CVec {
    let mut p = eff.g(b, s) * c(w[s]);
    for (r, &wr) in w.iter().enumerate() {
        if wr != 0.0 {
            let cr = fixed(r);
            if cr != ZERO {
                p -= eff.g(b, r) * (cr * wr);
            }
        }
    }
    p
}

/// Settings of the Gauss-Seidel transmit-subproblem solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub max_sweeps: usize,
    /// Largest beam entry change, relative to the largest entry, that ends
    /// the sweeps.
    pub tolerance: f64,
    pub bisection: BisectionSpec,
}

impl Default for SubproblemSpec {
    fn default() -> Self {
        SubproblemSpec { max_sweeps: 5000, tolerance: 1e-9, bisection: BisectionSpec::default() }
    }
}

impl SubproblemSpec {
    /// Looser stop for solves inside the alternating loop, which restarts
    /// each subproblem from the previous beams.
    pub fn warm_start() -> Self {
        SubproblemSpec { max_sweeps: 500, tolerance: 1e-6, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub beams: Beamformers,
    pub nu: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Weighted MSE sum at the returned beams.
    pub objective: f64,
}

/// Solves the weighted-MSE transmit subproblem for fixed receivers and
/// weights by sweeping the per-BS closed forms, starting from `start`.
pub fn solve_transmit_subproblem(
    problem: &Problem,
    receivers: &Receivers,
    weights: &[f64],
    start: &Beamformers,
    spec: &SubproblemSpec,
) -> Result<SubproblemSolution> {
    let cl = &problem.cluster;
    let eff = EffectiveChannels::compute(problem, receivers);
    let noise = receiver_noise(problem, receivers);
    let mut beams = start.clone();
    let mut xt = Crosstalk::compute(&eff, &beams, cl);
    let spectra: Vec<HermitianEigen> =
        (0..cl.num_bs()).map(|b| HermitianEigen::new(&eff.covariance(b, weights))).collect();
    let mut nu = vec![0.0; cl.num_bs()];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < spec.max_sweeps {
        sweeps += 1;
        let previous = beams.clone();
        for b in 0..cl.num_bs() {
            let streams: Vec<usize> = cl.streams_served_by(b).collect();
            let rhs: Vec<CVec> =
                streams.iter().map(|&s| local_rhs(&eff, weights, b, s, |r| xt.t(r, s) - xt.e(b, r, s))).collect();
            let sol = bisect_power_dual_eigen(&spectra[b], &rhs, &[], problem.power[b], &spec.bisection)?;
            for (&s, m) in streams.iter().zip(sol.beams) {
                beams.set(b, s, m);
            }
            nu[b] = sol.nu;
            xt.refresh_bs(&eff, &beams, cl, b);
        }
        let scale = beams.max_abs().max(f64::MIN_POSITIVE);
        if beams.max_abs_diff(&previous) <= spec.tolerance * scale {
            converged = true;
            break;
        }
    }
    let objective = xt.weighted_mse(weights, &noise);
    Ok(SubproblemSolution { beams, nu, sweeps, converged, objective })
}

/// Per-run record of the centralized algorithm.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    /// Weighted sum rate of the initial beams.
    pub initial_rate: f64,
    /// Weighted sum rate after each full iteration.
    pub objective_trace: Vec<f64>,
    pub inner_sweeps: Vec<usize>,
    /// Final power duals per BS.
    pub dual_values: Vec<f64>,
    /// Every subproblem met its tolerance within the sweep cap.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CentralizedOutput {
    pub beams: Beamformers,
    pub receivers: Receivers,
    pub report: SolveReport,
}

/// Updates MMSE receivers, MSEs and weights for the given beams. Returns
/// the receivers and the weights `mu / (ln 2 eps)` (zero for inactive streams).
pub fn refresh_receivers_and_weights(
    problem: &Problem,
    beams: &Beamformers,
    active: Option<&[bool]>,
) -> Result<(Receivers, Vec<f64>)> {
    let cl = &problem.cluster;
    let signals = ReceivedSignals::compute(&problem.channels, beams, cl);
    let (rx, _) = mmse_from_signals(&signals, cl, &problem.sigma2);
    let eps = stream_mses(&signals, &rx, cl, &problem.sigma2);
    let mut w = vec![0.0; cl.num_streams()];
    for s in 0..cl.num_streams() {
        if active.is_none_or(|a| a[s]) {
            w[s] = crate::model::mse_weight(eps[s], problem.mu[cl.owner(s)])?;
        }
    }
    Ok((rx, w))
}

/// Alternating centralized WMMSE for `iters` full iterations from
/// matched-filter beams (or `init` when given).
pub fn run_centralized(
    problem: &Problem,
    iters: usize,
    init: Option<&Beamformers>,
    spec: &SubproblemSpec,
) -> Result<CentralizedOutput> {
    let cl = &problem.cluster;
    let mut beams = init.cloned().unwrap_or_else(|| matched_filter_init(problem));
    let rate = |b: &Beamformers| weighted_sum_rate(&problem.channels, b, None, cl, &problem.sigma2, &problem.mu);
    let mut report = SolveReport { initial_rate: rate(&beams), converged: true, ..Default::default() };
    report.dual_values = vec![0.0; cl.num_bs()];
    for _ in 0..iters {
        let (rx, w) = refresh_receivers_and_weights(problem, &beams, None)?;
        let sol = solve_transmit_subproblem(problem, &rx, &w, &beams, spec)?;
        beams = sol.beams;
        report.objective_trace.push(rate(&beams));
        report.inner_sweeps.push(sol.sweeps);
        report.dual_values = sol.nu;
        report.converged &= sol.converged;
    }
    let signals = ReceivedSignals::compute(&problem.channels, &beams, cl);
    let (receivers, _) = mmse_from_signals(&signals, cl, &problem.sigma2);
    Ok(CentralizedOutput { beams, receivers, report })
}

/// Largest per-BS power of the beams relative to its budget.
pub fn max_power_excess(beams: &Beamformers, problem: &Problem) -> f64 {
    all_bs_powers(beams, &problem.cluster)
        .iter()
        .zip(&problem.power)
        .map(|(p, budget)| p - budget)
        .fold(f64::NEG_INFINITY, f64::max)
}
