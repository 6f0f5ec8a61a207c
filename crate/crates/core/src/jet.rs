//! Truncated Taylor series in one variable.
//!
//! `c[j]` is the coefficient of `h^j` in the expansion about the base point,
//! so the j-th derivative is `c[j] · j!`.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const JET_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; JET_LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = v;
        Jet { c }
    }

    /// The identity function expanded about `t0`.
    pub fn variable(t0: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = t0;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn zero() -> Self {
        Jet { c: [0.0; JET_LEN] }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `d^j/dt^j` at the base point.
    pub fn derivative(&self, j: usize) -> f64 {
        self.c[j] * factorial(j)
    }

    pub fn derivatives(&self) -> [f64; JET_LEN] {
        let mut d = self.c;
        for (j, x) in d.iter_mut().enumerate() {
            *x *= factorial(j);
        }
        d
    }

    pub fn scale(mut self, s: f64) -> Self {
        for x in &mut self.c {
            *x *= s;
        }
        self
    }

    pub fn exp(self) -> Self {
        let mut f = [0.0; JET_LEN];
        f[0] = self.c[0].exp();
        for k in 1..JET_LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * f[k - j];
            }
            f[k] = acc / k as f64;
        }
        Jet { c: f }
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }
}

pub fn factorial(j: usize) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * i as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(o.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(o.c) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = [0.0; JET_LEN];
        for i in 0..JET_LEN {
            for j in 0..JET_LEN - i {
                r[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c: r }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; JET_LEN];
        for k in 0..JET_LEN {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * q[k - j];
            }
            q[k] = acc / o.c[0];
        }
        Jet { c: q }
    }
}
