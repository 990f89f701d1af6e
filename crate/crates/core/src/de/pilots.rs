use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Result};
use crate::linalg::{c, inner, solve_hermitian, sqrt, CMat, CVec, C64};
use crate::model::{cn, Beamformers, Cluster, Problem, Receivers};

/// Uplink (`b`) and downlink (`g`) training sequences, one per stream, each
/// with squared norm `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub ul: Vec<CVec>,
    pub dl: Vec<CVec>,
    pub length: usize,
    pub orthogonal: bool,
}

fn dft_rows(s: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<CVec> {
    let mut rows: Vec<usize> = (0..s).collect();
    rows.shuffle(rng);
    rows.truncate(count);
    rows.iter()
        .map(|&j| {
            CVec::from_fn(s, |n, _| {
                let ph = -2.0 * PI * ((j * n) % s) as f64 / s as f64;
                C64::new(libm::cos(ph), libm::sin(ph))
            })
        })
        .collect()
}

fn qpsk_rows(s: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<CVec> {
    let a = core::f64::consts::FRAC_1_SQRT_2;
    let mut rows: Vec<CVec> = Vec::with_capacity(count);
    while rows.len() < count {
        let v = CVec::from_fn(s, |_, _| C64::new(if rng.random() { a } else { -a }, if rng.random() { a } else { -a }));
        // reject sequences collinear with an earlier one unless nothing else exists
        let collinear = s > 1 && rows.iter().any(|r| inner(r, &v).norm() >= s as f64 - 1e-9);
        if !collinear {
            rows.push(v);
        }
    }
    rows
}

/// Builds a book for every stream of the cluster. Orthogonal books use
/// distinct rows of the length-`S` DFT; otherwise unit-modulus QPSK chips.
pub fn make_pilot_book(length: usize, cluster: &Cluster, orthogonal: bool, seed: u64) -> Result<PilotBook> {
    let ns = cluster.num_streams();
    if length == 0 {
        return config("pilot length must be at least one");
    }
    if orthogonal && length < ns {
        return config("orthogonal pilots need a length of at least the total stream count");
    }
    let mut ul_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dl_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (ul, dl) = if orthogonal {
        (dft_rows(length, ns, &mut ul_rng), dft_rows(length, ns, &mut dl_rng))
    } else {
        (qpsk_rows(length, ns, &mut ul_rng), qpsk_rows(length, ns, &mut dl_rng))
    };
    Ok(PilotBook { ul, dl, length, orthogonal })
}

fn noise_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    if var > 0.0 {
        CMat::from_fn(rows, cols, |_, _| cn(rng, var))
    } else {
        CMat::zeros(rows, cols)
    }
}

/// `R_b = sum_r H_{b,k(r)}^H u_r sqrt(w_r) b_r^H + N_b` for every BS.
pub fn ul_training<R: Rng + ?Sized>(
    problem: &Problem,
    receivers: &Receivers,
    w: &[f64],
    book: &PilotBook,
    noise_power: f64,
    rng: &mut R,
) -> Vec<CMat> {
    let cl = &problem.cluster;
    let nt = problem.channels.nt();
    (0..cl.num_bs())
        .map(|b| {
            let mut r = noise_matrix(rng, nt, book.length, noise_power);
            for s in 0..cl.num_streams() {
                if w[s] == 0.0 {
                    continue;
                }
                let g = problem.channels.get(b, cl.owner(s)).ad_mul(receivers.get(s)) * c(sqrt(w[s]));
                r += g * book.ul[s].adjoint();
            }
            r
        })
        .collect()
}

/// `T_k = sum_s v_{k,s} g_s^T + N_k` for every user.
pub fn dl_training<R: Rng + ?Sized>(
    problem: &Problem,
    beams: &Beamformers,
    book: &PilotBook,
    noise_power: f64,
    rng: &mut R,
) -> Vec<CMat> {
    let cl = &problem.cluster;
    let nr = problem.channels.nr();
    (0..cl.num_users())
        .map(|k| {
            let mut t = noise_matrix(rng, nr, book.length, noise_power);
            for s in 0..cl.num_streams() {
                let mut v = CVec::zeros(nr);
                for &b in cl.stream_cluster(s) {
                    v += problem.channels.get(b, k) * beams.get(b, s);
                }
                t += v * book.dl[s].transpose();
            }
            t
        })
        .collect()
}

/// Receivers of user `k` estimated from its training matrix, and the MSE
/// estimates.
#[derive(Debug, Clone)]
pub struct DeReceiver {
    pub u: Vec<CVec>,
    pub epsilon: Vec<f64>,
    pub regularized: bool,
}

/// `u = (T T^H + S floor I)^{-1} T conj(g)`, with `floor = max(sigma2 -
/// pilot_noise, 0)` so the Gram matrix matches the expected receive
/// covariance. The MSE estimate is `||u^H T - g^T||^2 / S + floor ||u||^2`.
pub fn de_mmse_receiver(
    t: &CMat,
    book: &PilotBook,
    cluster: &Cluster,
    k: usize,
    sigma2: f64,
    pilot_noise: f64,
) -> DeReceiver {
    let s_len = book.length as f64;
    let floor = (sigma2 - pilot_noise).max(0.0);
    let mut gram = t * t.adjoint();
    for i in 0..gram.nrows() {
        gram[(i, i)] += c(s_len * floor);
    }
    let rhs: Vec<CVec> = cluster.streams_of(k).map(|s| t * book.dl[s].conjugate()).collect();
    let (u, regularized) = solve_hermitian(&gram, &rhs);
    let epsilon = cluster
        .streams_of(k)
        .zip(&u)
        .map(|(s, u)| {
            let resid = t.ad_mul(u).conjugate() - &book.dl[s];
            let eps = resid.norm_squared() / s_len + floor * u.norm_squared();
            eps.max(1e-12)
        })
        .collect();
    DeReceiver { u, epsilon, regularized }
}

/// DE receivers and MSE estimates of every stream.
pub fn de_receivers(t: &[CMat], book: &PilotBook, problem: &Problem, pilot_noise: f64) -> (Receivers, Vec<f64>) {
    let cl = &problem.cluster;
    let mut u = Vec::with_capacity(cl.num_streams());
    let mut eps = Vec::with_capacity(cl.num_streams());
    for k in 0..cl.num_users() {
        let r = de_mmse_receiver(&t[k], book, cl, k, problem.sigma2[k], pilot_noise);
        u.extend(r.u);
        eps.extend(r.epsilon);
    }
    (Receivers { u }, eps)
}

/// Composite per-stream signals `x_{b,s} = R_b^H m_{b,s}` for every BS of
/// the transmitting cluster, indexed `b * S + s` (zero elsewhere).
pub fn composites(r: &[CMat], beams: &Beamformers, cluster: &Cluster, length: usize) -> Vec<CVec> {
    let ns = cluster.num_streams();
    let mut x = vec![CVec::zeros(length); cluster.num_bs() * ns];
    for s in 0..ns {
        for &b in cluster.stream_cluster(s) {
            x[b * ns + s] = r[b].ad_mul(beams.get(b, s));
        }
    }
    x
}
