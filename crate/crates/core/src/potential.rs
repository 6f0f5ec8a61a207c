//! The potential `V(t, x) = −4 r_k(t) sin(|l_k|² t) cos(l_k · x)` lit on the
//! active drive `k = k(t)`.
//!
//! Fourier data: `v_{±l_k}(t) = r_k(t)` and every other `v_n` vanishes, so
//! `V̂_{±l_k}(t) = −2 r_k(t) sin(|l_k|² t)`. Sobolev norms use the weight
//! `max(1, |n|)^{2s}` on coefficients against the normalised torus measure,
//! which gives `‖V‖_{H^s} = 2√2 |l_k|^s |r_k sin(|l_k|² t)|`.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::jet::JET_LEN;
use crate::lattice::{FrequencyFamily, LatticeVec};
use crate::phase::integer_phase;
use crate::schedule::Schedule;

#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub family: FrequencyFamily,
    pub schedule: Schedule,
}

/// The lit mode at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveMode {
    pub drive: usize,
    pub l: LatticeVec,
    /// `|l|²`.
    pub energy: i128,
    pub r: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl PotentialSpec {
    pub fn new(family: FrequencyFamily, schedule: Schedule) -> Result<Self> {
        if let Some(k) = schedule.max_drive() {
            if k > family.k_max() {
                return Err(Error::InvalidArgument(format!(
                    "schedule lights r_{k} but the family stops at l_{}",
                    family.k_max()
                )));
            }
        }
        Ok(PotentialSpec { family, schedule })
    }

    pub fn active_mode(&self, t: f64) -> Option<ActiveMode> {
        let a = self.schedule.active_drive(t)?;
        let l = self.family.l[a.drive];
        let energy = l.norm_sq().ok()?;
        Some(ActiveMode { drive: a.drive, l, energy, r: a.value })
    }

    /// `v_n(t)`.
    pub fn v_coeff(&self, n: LatticeVec, t: f64) -> f64 {
        match self.active_mode(t) {
            Some(m) if n == m.l || Some(n) == m.l.checked_neg() => m.r,
            _ => 0.0,
        }
    }

    /// `∂_t^m [r_k(t) sin(|l_k|² t)]` by Leibniz, with the drive's Taylor jet.
    fn derivative_of_product(&self, t: f64, m: usize) -> Option<(ActiveMode, f64)> {
        assert!(m < JET_LEN, "time derivative order {m} exceeds {}", JET_LEN - 1);
        let mode = self.active_mode(t)?;
        let (_, jet) = self.schedule.drive_jet(t)?;
        let e = mode.energy as f64;
        let theta = integer_phase(mode.energy, t);
        let mut acc = 0.0;
        let mut epow = 1.0;
        for q in 0..=m {
            acc += binomial(m, q) * jet.derivative(m - q) * epow * (theta + q as f64 * FRAC_PI_2).sin();
            epow *= e;
        }
        Some((mode, acc))
    }

    /// `‖∂_t^m V(t, ·)‖_{H^s}`, exact from the two lit modes.
    pub fn v_sobolev_norm(&self, t: f64, s: f64, m: usize) -> f64 {
        match self.derivative_of_product(t, m) {
            Some((mode, d)) => 2.0 * SQRT_2 * mode.l.norm().max(1.0).powf(s) * d.abs(),
            None => 0.0,
        }
    }

    /// `V(t, ·)` on the `grid × grid` torus mesh (row-major in `x_1`), with
    /// the imaginary residue of the two-sided sum.
    pub fn v_realspace_with_residue(&self, t: f64, grid: usize) -> Result<(Vec<f64>, f64)> {
        let mut out = vec![0.0; grid * grid];
        let Some(mode) = self.active_mode(t) else {
            return Ok((out, 0.0));
        };
        let norm = mode.l.norm();
        let required = (4.0 * norm).ceil() as usize;
        if grid < required {
            return Err(Error::UnderResolved { grid, norm, required });
        }
        let coeff = -2.0 * mode.r * integer_phase(mode.energy, t).sin();
        let g = grid as i128;
        let modes = [mode.l, mode.l.neg()?];
        let mut residue: f64 = 0.0;
        for i in 0..grid {
            for j in 0..grid {
                let (mut re, mut im) = (0.0, 0.0);
                for n in &modes {
                    // n·x = 2π (n·(i, j) mod grid) / grid, exact in integers
                    let k = (n.x * i as i128 + n.y * j as i128).rem_euclid(g);
                    let (sn, cs) = (TAU * k as f64 / grid as f64).sin_cos();
                    re += coeff * cs;
                    im += coeff * sn;
                }
                out[i * grid + j] = re;
                residue = residue.max(im.abs());
            }
        }
        Ok((out, residue))
    }

    /// `V(t, ·)` on the mesh, erroring if the imaginary residue exceeds 1e−12.
    pub fn v_realspace(&self, t: f64, grid: usize) -> Result<Vec<f64>> {
        let (v, residue) = self.v_realspace_with_residue(t, grid)?;
        if residue > 1e-12 {
            return Err(Error::NotReal { residue });
        }
        Ok(v)
    }

    /// CSV with columns `t, k, V_s{s}_m{m}...`; `k` is empty when nothing is lit.
    pub fn sobolev_csv(&self, times: &[f64], orders: &[(f64, usize)]) -> String {
        let mut out = String::from("t,k");
        for (s, m) in orders {
            let _ = write!(out, ",V_s{s}_m{m}");
        }
        out.push('\n');
        for &t in times {
            let k = self.schedule.active_drive(t).map(|a| a.drive.to_string()).unwrap_or_default();
            let _ = write!(out, "{t:.12e},{k}");
            for &(s, m) in orders {
                let _ = write!(out, ",{:.12e}", self.v_sobolev_norm(t, s, m));
            }
            out.push('\n');
        }
        out
    }
}

/// `ln sup_plateau ‖∂_t^m V‖_{H^s}` for a drive with `|l| = l_norm`,
/// `ln β = log_beta` and move integral `integral`, bump mass `alpha`.
///
/// On a plateau `r` is the constant `(integral/α)·β`, so the supremum is
/// `2√2 r |l|^s |l|^{2m}`.
pub fn plateau_log_norm(l_norm: f64, log_beta: f64, integral: f64, alpha: f64, s: f64, m: usize) -> f64 {
    (2.0 * SQRT_2 * integral / alpha).ln() + log_beta + (s + 2.0 * m as f64) * l_norm.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::construct_family;
    use crate::schedule::{build_schedule, BetaMode};

    fn spec(cycles: usize) -> PotentialSpec {
        let f = construct_family(LatticeVec::new(1, 0), 10).unwrap();
        let s = build_schedule(&f, cycles, BetaMode::default()).unwrap();
        PotentialSpec::new(f, s).unwrap()
    }

    #[test]
    fn coefficients() {
        let p = spec(2);
        let g = p.schedule.groups()[0];
        let t = 0.5 * (g.plateau_start() + g.plateau_end());
        let l0 = p.family.l[0];
        assert_eq!(p.v_coeff(l0, t), g.amplitude);
        assert_eq!(p.v_coeff(l0.neg().unwrap(), t), g.amplitude);
        assert!((g.amplitude - 7.0 * std::f64::consts::PI / (4.0 * SQRT_2 * 0.5) * 0.05).abs() < 1e-15);
        assert_eq!(p.v_coeff(LatticeVec::new(3, 3), t), 0.0);
        assert_eq!(p.v_coeff(p.family.l[1], t), 0.0);
    }

    #[test]
    fn norm_vanishes_when_idle() {
        let p = spec(1);
        assert_eq!(p.v_sobolev_norm(p.schedule.horizon() + 1.0, 1.0, 2), 0.0);
        let v = p.v_realspace(p.schedule.horizon() + 1.0, 8).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn l2_norm_matches_grid_quadrature() {
        let p = spec(2);
        for &t in &[0.37, 5.2, 30.9, 44.4] {
            let grid = 256;
            let v = p.v_realspace(t, grid).unwrap();
            let mean_sq = v.iter().map(|x| x * x).sum::<f64>() / (grid * grid) as f64;
            let norm = p.v_sobolev_norm(t, 0.0, 0);
            assert!((mean_sq.sqrt() - norm).abs() < 1e-12, "t = {t}");
            let mean = v.iter().sum::<f64>() / (grid * grid) as f64;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn realspace_is_single_cosine() {
        let p = spec(1);
        let t = 3.3;
        let mode = p.active_mode(t).unwrap();
        let grid = 16;
        let v = p.v_realspace(t, grid).unwrap();
        let amp = -4.0 * mode.r * (mode.energy as f64 * t).sin();
        for i in 0..grid {
            for j in 0..grid {
                let x = (TAU * i as f64 / grid as f64, TAU * j as f64 / grid as f64);
                let want = amp * (mode.l.x as f64 * x.0 + mode.l.y as f64 * x.1).cos();
                assert!((v[i * grid + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn under_resolved_grid() {
        let p = spec(2);
        let g = p.schedule.groups()[1];
        let t = g.plateau_start() + 0.5;
        assert!(matches!(p.v_realspace(t, 16), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn time_derivative_matches_finite_difference() {
        let p = spec(1);
        let h = 1e-6;
        for &t in &[0.4, 0.77, 20.3, 43.0 - 0.6] {
            let m = p.active_mode(t).unwrap();
            let f = |t: f64| p.schedule.drive_value(m.drive, t) * integer_phase(m.energy, t).sin();
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            let (_, d1) = p.derivative_of_product(t, 1).unwrap();
            assert!((fd - d1).abs() < 1e-6 * (1.0 + d1.abs()), "t = {t}: {fd} vs {d1}");
        }
    }

    #[test]
    fn plateau_supremum_formula() {
        let p = spec(1);
        let g = p.schedule.groups()[0];
        let l = p.family.l[0].norm();
        let (s, m) = (1.5, 2);
        // sample densely over one carrier period inside the plateau
        let period = TAU / 4.0;
        let sup = (0..2000)
            .map(|i| p.v_sobolev_norm(g.plateau_start() + 1.0 + period * i as f64 / 2000.0, s, m))
            .fold(0.0, f64::max);
        let want = plateau_log_norm(l, 0.05f64.ln(), g.kind.required_integral(), 0.5, s, m).exp();
        assert!((sup - want).abs() < 1e-5 * want, "{sup} vs {want}");
    }
}
