//! Hexagonal wrap-around layout, distance-based path gains and the
//! cell-edge noise rule.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{config, domain, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub bs_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub inter_site_distance: f64,
    /// Mirror copies of every BS (the BS itself first).
    pub wrap_images: Vec<Vec<Point>>,
    /// Home cell of every UE.
    pub home: Vec<usize>,
}

fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// The six translations that tile the plane with copies of the 7-cell
/// cluster, plus the identity.
fn cluster_shifts(d: f64) -> Vec<Point> {
    let base = [2.5 * d, libm::sqrt(3.0) / 2.0 * d];
    let mut shifts = Vec::with_capacity(7);
    shifts.push([0.0, 0.0]);
    for j in 0..6 {
        let (s, c) = libm::sincos(j as f64 * PI / 3.0);
        shifts.push([c * base[0] - s * base[1], s * base[0] + c * base[1]]);
    }
    shifts
}

/// Shortest distance between two points on the 7-cell torus with site
/// spacing `d`.
pub fn wrap_distance(a: Point, b: Point, d: f64) -> f64 {
    cluster_shifts(d).iter().map(|t| dist(a, [b[0] + t[0], b[1] + t[1]])).fold(f64::INFINITY, f64::min)
}

/// One BS (`B = 1`) or the 7-cell hexagonal cluster with wrap-around
/// (`B = 7`). Each cell has `users_per_cell` UEs at radius `d / 2`, evenly
/// spaced in angle starting at 0.
pub fn build_wraparound_layout(num_bs: usize, inter_site_distance: f64, users_per_cell: usize) -> Result<Layout> {
    if num_bs != 1 && num_bs != 7 {
        return config("the wrap-around layout supports 1 or 7 cells");
    }
    if users_per_cell == 0 {
        return config("at least one user per cell is required");
    }
    let d = inter_site_distance;
    if !(d > 0.0) || !d.is_finite() {
        return config("inter-site distance must be positive");
    }
    let mut bs_positions = Vec::with_capacity(num_bs);
    bs_positions.push([0.0, 0.0]);
    for j in 1..num_bs {
        let (s, c) = libm::sincos((j - 1) as f64 * PI / 3.0);
        bs_positions.push([d * c, d * s]);
    }
    let radius = d / 2.0;
    let mut ue_positions = Vec::with_capacity(num_bs * users_per_cell);
    let mut home = Vec::with_capacity(num_bs * users_per_cell);
    for (b, p) in bs_positions.iter().enumerate() {
        for i in 0..users_per_cell {
            let (s, c) = libm::sincos(2.0 * PI * i as f64 / users_per_cell as f64);
            ue_positions.push([p[0] + radius * c, p[1] + radius * s]);
            home.push(b);
        }
    }
    let shifts = if num_bs == 7 { cluster_shifts(d) } else { alloc::vec![[0.0, 0.0]] };
    let wrap_images =
        bs_positions.iter().map(|p| shifts.iter().map(|t| [p[0] + t[0], p[1] + t[1]]).collect()).collect();
    Ok(Layout { bs_positions, ue_positions, inter_site_distance: d, wrap_images, home })
}

impl Layout {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.ue_positions.len()
    }

    /// Distance from BS `b` to UE `k`, minimized over the BS mirror images.
    pub fn distance(&self, b: usize, k: usize) -> f64 {
        let ue = self.ue_positions[k];
        self.wrap_images[b].iter().map(|&p| dist(p, ue)).fold(f64::INFINITY, f64::min)
    }

    pub fn edge_radius(&self) -> f64 {
        self.inter_site_distance / 2.0
    }

    /// Path gains relative to the cell-edge gain, indexed `b * K + k`.
    pub fn relative_gains(&self, exponent: f64) -> Result<Vec<f64>> {
        let edge = path_gain(self.edge_radius(), exponent)?;
        let k = self.num_users();
        let mut out = Vec::with_capacity(self.num_bs() * k);
        for b in 0..self.num_bs() {
            for u in 0..k {
                out.push(path_gain(self.distance(b, u), exponent)? / edge);
            }
        }
        Ok(out)
    }
}

/// `distance^(-exponent)`.
pub fn path_gain(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return domain("path gain needs a positive distance");
    }
    Ok(libm::pow(distance, -exponent))
}

/// `edge_gain * P_b / snr`.
pub fn noise_power(snr_linear: f64, power: f64, edge_gain: f64) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return domain("SNR must be positive");
    }
    Ok(edge_gain * power / snr_linear)
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts() {
        let l = build_wraparound_layout(7, 600.0, 7).unwrap();
        assert_eq!((l.num_bs(), l.num_users()), (7, 49));
        let one = build_wraparound_layout(1, 600.0, 1).unwrap();
        assert_eq!(one.num_users(), 1);
        assert!((one.distance(0, 0) - 300.0).abs() < 1e-9);
        assert!(build_wraparound_layout(3, 600.0, 1).is_err());
    }

    #[test]
    fn home_distance_is_edge_radius() {
        let l = build_wraparound_layout(7, 600.0, 7).unwrap();
        for k in 0..49 {
            assert!((l.distance(l.home[k], k) - 300.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_makes_all_cells_alike() {
        // every BS sees the same multiset of distances on the torus
        let l = build_wraparound_layout(7, 600.0, 7).unwrap();
        let sorted = |b: usize| {
            let mut v: Vec<f64> = (0..49).map(|k| l.distance(b, k)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let first = sorted(0);
        for b in 1..7 {
            for (x, y) in sorted(b).iter().zip(&first) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gain_and_noise_values() {
        assert_eq!(path_gain(1.0, 3.0).unwrap(), 1.0);
        let r = path_gain(100.0, 3.0).unwrap() / path_gain(200.0, 3.0).unwrap();
        assert!((r - 8.0).abs() < 1e-12);
        assert!((path_gain(300.0, 3.0).unwrap() - 1.0 / 27e6).abs() < 1e-20);
        assert!(path_gain(0.0, 3.0).is_err());
        assert_eq!(noise_power(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((noise_power(100.0, 1.0, 1.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((noise_power(10.0, 2.0, 0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(noise_power(0.0, 1.0, 1.0).is_err());
    }
}
