//! Dormand–Prince 5(4) with adaptive steps on complex vectors.
//!
//! Steps never cross the interval end; callers split integrations at every
//! point where the right-hand side loses smoothness. Integration runs
//! backward when `t1 < t0`.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Tolerance { atol: tol, rtol: tol }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

/// Reusable stage buffers.
pub struct Dp5 {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
    /// Step carried between calls on adjacent intervals.
    pub last_step: Option<f64>,
}

impl Dp5 {
    pub fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Dp5 {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            last_step: None,
        }
    }

    fn resize(&mut self, n: usize) {
        if self.tmp.len() != n {
            *self = Dp5::new(n);
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, mut f: F, t0: f64, t1: f64, y: &mut [Complex64], tol: Tolerance, context: &str) -> Result<Stats>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        self.resize(n);
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

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let tmp = &mut self.tmp;
            for i in 0..n {
                tmp[i] = y[i] + hs * A21 * k1[i];
            }
            f(t + C2 * hs, tmp, k2);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * hs, tmp, k3);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * hs, tmp, k4);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * hs, tmp, k5);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if last { t1 } else { t + hs };
            f(t_new, tmp, k6);
            let y_new = &mut self.y_new;
            for i in 0..n {
                y_new[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t_new, y_new, k7);
            stats.evaluations += 6;

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / sc);
            }

            if err <= 1.0 {
                stats.accepted += 1;
                t = t_new;
                y.copy_from_slice(y_new);
                std::mem::swap(k1, k7);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.last_step = Some(h * grow);
                }
                h *= grow;
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
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
