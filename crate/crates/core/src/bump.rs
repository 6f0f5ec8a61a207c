//! The smooth step `φ` used to switch drives on and off.
//!
//! `φ(t) = g(t) / (g(t) + g(1 − t))` with `g(t) = e^{−1/t}` for `t > 0` and
//! `0` otherwise, so `φ(t) + φ(1 − t) = 1` and `∫₀¹ φ = 1/2`.

use crate::jet::Jet;
use crate::quad;

const PANELS: usize = 64;

#[derive(Clone, Debug)]
pub struct BumpProfile {
    /// `Φ` at the panel boundaries `j / PANELS`.
    cumulative: Vec<f64>,
}

impl Default for BumpProfile {
    fn default() -> Self {
        default_bump()
    }
}

fn g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn g_jet(t: f64) -> Jet {
    if t > 0.0 {
        (-Jet::variable(t).recip()).exp()
    } else {
        Jet::zero()
    }
}

pub fn default_bump() -> BumpProfile {
    let mut cumulative = Vec::with_capacity(PANELS + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for j in 0..PANELS {
        let a = j as f64 / PANELS as f64;
        let b = (j + 1) as f64 / PANELS as f64;
        acc += quad::integrate(a, b, phi);
        cumulative.push(acc);
    }
    BumpProfile { cumulative }
}

/// `φ(t)`.
pub fn phi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = (g(t), g(1.0 - t));
        a / (a + b)
    }
}

impl BumpProfile {
    /// `α = Φ(1)`.
    pub const ALPHA: f64 = 0.5;

    pub fn alpha(&self) -> f64 {
        Self::ALPHA
    }

    pub fn phi(&self, t: f64) -> f64 {
        phi(t)
    }

    /// Taylor jet of `φ` at `t`.
    pub fn phi_jet(&self, t: f64) -> Jet {
        if t <= 0.0 {
            Jet::zero()
        } else if t >= 1.0 {
            Jet::constant(1.0)
        } else {
            let a = g_jet(t);
            // g(1 − t) expanded in t: reflect the jet of g about 1 − t.
            let mut b = g_jet(1.0 - t);
            for (j, c) in b.c.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *c = -*c;
                }
            }
            a / (a + b)
        }
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        self.phi_jet(t).derivative(1)
    }

    /// `Φ(t) = ∫₀ᵗ φ`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return self.cumulative[PANELS] + (t - 1.0);
        }
        let x = t * PANELS as f64;
        let j = (x.floor() as usize).min(PANELS - 1);
        let a = j as f64 / PANELS as f64;
        self.cumulative[j] + quad::integrate(a, t, phi)
    }

    /// `Φ(1)` from the quadrature table.
    pub fn alpha_quadrature(&self) -> f64 {
        self.cumulative[PANELS]
    }

    /// `sup |φ'|`, attained at `t = 1/2`.
    pub fn max_phi_prime(&self) -> f64 {
        self.phi_prime(0.5)
    }
}
