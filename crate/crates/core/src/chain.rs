//! The reduced chain dynamics on `(p_k, s_k)`.
//!
//! Lighting only `r_k` couples the triple `(p_{k+1}, p_k, s_k)` through
//! `∂_t x = r_k(t) A x`, so a segment with total drive integral `T` acts as
//! `exp(T A)` on that triple.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// The chain coupling matrix in the ordering `(p_{k+1}, p_k, s_k)`.
pub fn coupling_matrix() -> Matrix3<f64> {
    Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

/// Closed form of `exp(T A)`.
pub fn exp_ta(t: f64) -> Matrix3<f64> {
    let (s, c) = (t * SQRT_2).sin_cos();
    let sr = s * FRAC_1_SQRT_2;
    let cp = 0.5 * (c + 1.0);
    let cm = 0.5 * (c - 1.0);
    Matrix3::new(cp, sr, cm, -sr, c, -sr, cm, sr, cp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Move1,
    Move2,
    Move3,
}

impl MoveKind {
    /// Total drive integral that realises the move.
    pub fn required_integral(self) -> f64 {
        match self {
            MoveKind::Move1 => 7.0 * PI / (4.0 * SQRT_2),
            MoveKind::Move2 => PI / (2.0 * SQRT_2),
            MoveKind::Move3 => PI / SQRT_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Move1 => "move1",
            MoveKind::Move2 => "move2",
            MoveKind::Move3 => "move3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveSpec {
    pub kind: MoveKind,
    pub required_integral: f64,
    pub drive_index: usize,
}

impl MoveSpec {
    pub fn new(kind: MoveKind, drive_index: usize) -> Self {
        MoveSpec { kind, required_integral: kind.required_integral(), drive_index }
    }
}

/// `exp(∫r · A)` applied to `(p_{k+1}, p_k, s_k)`.
pub fn apply_move(state: [f64; 3], mv: &MoveSpec) -> [f64; 3] {
    let v = exp_ta(mv.required_integral) * Vector3::from(state);
    [v[0], v[1], v[2]]
}

/// `p_0..p_{K+1}` and `s_0..s_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl ChainState {
    pub fn zeros(k_max: usize) -> Self {
        ChainState { p: vec![0.0; k_max + 2], s: vec![0.0; k_max + 1] }
    }

    /// `(p_1, p_0, s_0) = (1/2, −1/√2, 1/2)`, everything else zero.
    pub fn initial(k_max: usize) -> Self {
        let mut st = Self::zeros(k_max);
        st.p[1] = 0.5;
        st.p[0] = -FRAC_1_SQRT_2;
        st.s[0] = 0.5;
        st
    }

    pub fn k_max(&self) -> usize {
        self.s.len().saturating_sub(1)
    }

    pub fn mass(&self) -> f64 {
        self.p.iter().chain(&self.s).map(|x| x * x).sum()
    }

    pub fn triple(&self, k: usize) -> [f64; 3] {
        [self.p[k + 1], self.p[k], self.s[k]]
    }

    pub fn set_triple(&mut self, k: usize, v: [f64; 3]) {
        self.p[k + 1] = v[0];
        self.p[k] = v[1];
        self.s[k] = v[2];
    }

    fn check_shape(&self) -> Result<()> {
        if self.p.len() != self.s.len() + 1 || self.s.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "chain state needs len(p) = len(s) + 1, got {} and {}",
                self.p.len(),
                self.s.len()
            )));
        }
        Ok(())
    }
}

/// `∂p_k = p_{k−1} r_{k−1} − p_{k+1} r_k − s_k r_k`, `∂s_k = p_k r_k`.
///
/// `r` is indexed like `s`; `p_{K+1}` receives only `p_K r_K`.
pub fn chain_rhs(state: &ChainState, r: &[f64]) -> Result<ChainState> {
    state.check_shape()?;
    if r.len() != state.s.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} drive values, got {}",
            state.s.len(),
            r.len()
        )));
    }
    let kk = state.k_max();
    let mut d = ChainState::zeros(kk);
    for k in 0..=kk + 1 {
        let mut v = 0.0;
        if k >= 1 {
            v += state.p[k - 1] * r[k - 1];
        }
        if k <= kk {
            v -= (state.p[k + 1] + state.s[k]) * r[k];
        }
        d.p[k] = v;
    }
    for k in 0..=kk {
        d.s[k] = state.p[k] * r[k];
    }
    Ok(d)
}

/// Composes `exp(∫r_k · A)` over every move group that starts before `t`.
pub fn propagate_exact(schedule: &Schedule, initial: &ChainState, t: f64) -> Result<ChainState> {
    initial.check_shape()?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("propagation time must be ≥ 0, got {t}")));
    }
    let mut st = initial.clone();
    for group in schedule.groups() {
        if group.t_start >= t {
            break;
        }
        let k = group.drive;
        if k + 1 >= st.p.len() {
            return Err(Error::InvalidArgument(format!(
                "schedule lights r_{k} but the chain state stops at p_{}",
                st.p.len() - 1
            )));
        }
        let integral = schedule.group_integral(group, t.min(group.t_end));
        let v = exp_ta(integral) * Vector3::from(st.triple(k));
        st.set_triple(k, [v[0], v[1], v[2]]);
    }
    Ok(st)
}
