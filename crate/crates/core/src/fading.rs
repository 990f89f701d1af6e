//! Block-fading Rayleigh channels with a Jakes Doppler spectrum, realized
//! as a sum of sinusoids per channel entry.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Result};
use crate::linalg::{CMat, C64};
use crate::model::Channels;

pub const OSCILLATORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Oscillator {
    /// `2 pi cos(theta)`: phase advance per frame divided by the normalized Doppler.
    rate: f64,
    phase: f64,
}

/// Per-entry oscillator banks for every `(b, k)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingProcess {
    pub normalized_doppler: f64,
    pub time_index: u64,
    num_bs: usize,
    num_users: usize,
    nt: usize,
    nr: usize,
    amplitude: Vec<f64>,
    oscillators: Vec<Oscillator>,
}

impl FadingProcess {
    /// `gains` holds the path gain of every pair, indexed `b * K + k`.
    pub fn new(
        seed: u64,
        normalized_doppler: f64,
        num_bs: usize,
        num_users: usize,
        nt: usize,
        nr: usize,
        gains: &[f64],
    ) -> Result<Self> {
        if !(normalized_doppler >= 0.0) || !normalized_doppler.is_finite() {
            return config("normalized Doppler must be finite and non-negative");
        }
        if gains.len() != num_bs * num_users || gains.iter().any(|g| !(*g >= 0.0)) {
            return config("one non-negative gain per BS-UE pair is required");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = num_bs * num_users * nt * nr;
        let mut oscillators = Vec::with_capacity(entries * OSCILLATORS);
        for _ in 0..entries {
            for m in 0..OSCILLATORS {
                let theta = PI * (m as f64 + rng.random::<f64>()) / OSCILLATORS as f64;
                oscillators.push(Oscillator { rate: 2.0 * PI * libm::cos(theta), phase: 2.0 * PI * rng.random::<f64>() });
            }
        }
        let amplitude = gains.iter().map(|g| libm::sqrt(g / OSCILLATORS as f64)).collect();
        Ok(FadingProcess { normalized_doppler, time_index: 0, num_bs, num_users, nt, nr, amplitude, oscillators })
    }

    /// Channel at frame `n`.
    pub fn channel_at(&self, n: u64) -> Channels {
        let x = self.normalized_doppler * n as f64;
        let per_matrix = self.nt * self.nr;
        let mut h = Vec::with_capacity(self.num_bs * self.num_users);
        for pair in 0..self.num_bs * self.num_users {
            let amp = self.amplitude[pair];
            let m = CMat::from_fn(self.nr, self.nt, |i, j| {
                let e = pair * per_matrix + i * self.nt + j;
                let bank = &self.oscillators[e * OSCILLATORS..(e + 1) * OSCILLATORS];
                let sum: C64 = bank.iter().map(|o| C64::from_polar(1.0, o.rate * x + o.phase)).sum();
                sum * amp
            });
            h.push(m);
        }
        Channels::new(self.num_bs, self.num_users, self.nt, self.nr, h).expect("consistent dimensions")
    }

    /// Channel of the current frame, then advances one frame.
    pub fn next_frame(&mut self) -> Channels {
        let h = self.channel_at(self.time_index);
        self.time_index += 1;
        h
    }
}

/// The next `frames` channels of the process.
pub fn evolve_channel(process: &mut FadingProcess, frames: usize) -> Vec<Channels> {
    (0..frames).map(|_| process.next_frame()).collect()
}

/// `v f_c / c` for a velocity in km/h and carrier in GHz, times the
/// signaling interval in ms.
pub fn derive_doppler(velocity_kmh: f64, carrier_ghz: f64, signaling_rate_ms: f64) -> f64 {
    const LIGHT: f64 = 299_792_458.0;
    let fd = velocity_kmh / 3.6 * carrier_ghz * 1e9 / LIGHT;
    fd * signaling_rate_ms * 1e-3
}
