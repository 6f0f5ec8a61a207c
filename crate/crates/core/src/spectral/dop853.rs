//! Dormand–Prince 8(5,3) with adaptive steps on complex vectors.
//!
//! Same contract as [`Dp5`](super::dp5::Dp5): steps stop exactly at the
//! interval end and run backward when `t1 < t0`. The propagated solution is
//! eighth order, so at tight tolerances the global error stays close to the
//! per-step tolerance over long horizons.

use num_complex::Complex64;

use super::dop853_tableau::{A, B, C, E3, E5, STAGES};
use super::dp5::{Stats, Tolerance};
use crate::error::{Error, Result};

pub struct Dop853 {
    /// Stages plus the FSAL slot at index `STAGES`.
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
    pub last_step: Option<f64>,
}

impl Dop853 {
    pub fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Dop853 {
            k: vec![z.clone(); STAGES + 1],
            tmp: z.clone(),
            y_new: z,
            last_step: None,
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, mut f: F, t0: f64, t1: f64, y: &mut [Complex64], tol: Tolerance, context: &str) -> Result<Stats>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if self.tmp.len() != n {
            *self = Dop853::new(n);
        }
        let mut stats = Stats::default();
        if t0 == t1 || n == 0 {
            return Ok(stats);
        }
        let dir = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let mut t = t0;
        f(t, y, &mut self.k[0]);
        stats.evaluations += 1;
        let mut h = match self.last_step {
            Some(h) if h > 0.0 => h.min(span),
            _ => initial_step(&self.k[0], y, span, tol),
        };

        loop {
            let remaining = (t1 - t).abs();
            if remaining <= 0.0 {
                break;
            }
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            let hs = dir * h;
            let min_step = 1e-14 * t.abs().max(1.0);
            if h < min_step && !last {
                return Err(Error::StepUnderflow { t, context: context.to_string() });
            }

            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, &a) in A[s][..s].iter().enumerate() {
                        if a != 0.0 {
                            acc += a * self.k[j][i];
                        }
                    }
                    self.tmp[i] = y[i] + hs * acc;
                }
                let ts = if s == STAGES - 1 && last { t1 } else { t + C[s] * hs };
                f(ts, &self.tmp, &mut self.k[s]);
            }
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &b) in B.iter().enumerate() {
                    if b != 0.0 {
                        acc += b * self.k[j][i];
                    }
                }
                self.y_new[i] = y[i] + hs * acc;
            }
            let t_new = if last { t1 } else { t + hs };
            let (head, tail) = self.k.split_at_mut(STAGES);
            f(t_new, &self.y_new, &mut tail[0]);
            stats.evaluations += STAGES;

            let (mut e5, mut e3): (f64, f64) = (0.0, 0.0);
            for i in 0..n {
                let (mut a5, mut a3) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for j in 0..=STAGES {
                    let kj = if j < STAGES { head[j][i] } else { tail[0][i] };
                    a5 += E5[j] * kj;
                    a3 += E3[j] * kj;
                }
                let sc = tol.atol + tol.rtol * y[i].norm().max(self.y_new[i].norm());
                e5 = e5.max(a5.norm() / sc);
                e3 = e3.max(a3.norm() / sc);
            }
            // the bare fifth-order difference; the blended 5/3 estimate can
            // collapse when the fifth-order part cancels
            let err = h * e5.max(0.1 * e3);

            if err <= 1.0 {
                stats.accepted += 1;
                t = t_new;
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, STAGES);
                let grow = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 10.0) };
                if !last {
                    self.last_step = Some(h * grow);
                }
                h *= grow;
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-1.0 / 6.0)).clamp(0.1, 0.9);
                if h < min_step {
                    return Err(Error::StepUnderflow { t, context: context.to_string() });
                }
            }
        }
        Ok(stats)
    }
}

fn initial_step(f0: &[Complex64], y0: &[Complex64], span: f64, tol: Tolerance) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (y, f) in y0.iter().zip(f0) {
        let sc = tol.atol + tol.rtol * y.norm();
        d0 = d0.max(y.norm() / sc);
        d1 = d1.max(f.norm() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(span * 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_row_sums_equal_nodes() {
        for s in 0..STAGES {
            let sum: f64 = A[s].iter().sum();
            assert!((sum - C[s]).abs() < 1e-14, "row {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn order_conditions_up_to_eight() {
        // Σ b_i c_i^{q−1} = 1/q
        for q in 1..=8 {
            let s: f64 = B.iter().zip(C.iter()).map(|(b, c)| b * c.powi(q - 1)).sum();
            assert!((s - 1.0 / q as f64).abs() < 1e-13, "q = {q}");
        }
    }

    #[test]
    fn harmonic_oscillator_forward_and_back() {
        let w = 3.0;
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let f = |_t: f64, y: &[Complex64], d: &mut [Complex64]| d[0] = Complex64::new(0.0, w) * y[0];
        Dop853::new(1).integrate(f, 0.0, 10.0, &mut y, Tolerance::uniform(1e-12), "test").unwrap();
        assert!((y[0] - Complex64::from_polar(1.0, 30.0)).norm() < 1e-11);
        Dop853::new(1).integrate(f, 10.0, 0.0, &mut y, Tolerance::uniform(1e-12), "test").unwrap();
        assert!((y[0] - 1.0).norm() < 1e-11);
    }

    #[test]
    fn time_dependent_rhs() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        Dop853::new(1)
            .integrate(|t, y, d| d[0] = 2.0 * t * y[0], 0.0, 1.5, &mut y, Tolerance::uniform(1e-13), "test")
            .unwrap();
        assert!((y[0].re / 2.25f64.exp() - 1.0).abs() < 1e-11);
    }
}
