//! Numerical integration of the full Fourier system (FS), its resonant part
//! (RFS) and the perturbation equation on finite truncation sets.
//!
//! FS: `a_n' = Σ_m a_m v_{n−m}(t) (e^{−iω⁺_{m,n} t} − e^{−iω⁻_{m,n} t})`.
//! RFS keeps the terms with `m ∈ Γ⁺_res(n)` (sign `+`) and `m ∈ Γ⁻_res(n)`
//! (sign `−`) and drops the phases. The perturbation `c = b − a` between an
//! FS solution `b` and the resonant solution `a` obeys
//! `c' = FS(c) + FS(a) − RFS(a)`.

pub mod dop853;
mod dop853_tableau;
pub mod dp5;
pub mod fs;
pub mod truncation;

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::chain::{propagate_exact, ChainState};
use crate::error::{Error, Result};
use crate::lattice::{omega_minus, omega_plus, LatticeVec};
use crate::phase::integer_phase;
use crate::potential::PotentialSpec;
use dop853::Dop853;
use dp5::{Stats, Tolerance};
pub use fs::{FsCounters, FsOptions, FsPropagator};
pub use truncation::{DriveCoupling, TruncationSet, TruncationSummary};

type C = Complex64;

/// Coefficients on a truncation set at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub coeffs: Vec<C>,
}

impl SpectralState {
    pub fn zeros(trunc: &TruncationSet, t: f64) -> Self {
        SpectralState { t, coeffs: vec![C::new(0.0, 0.0); trunc.len()] }
    }

    /// Places `p_k` on `m_k` and `s_k` on `m_k − l_k`.
    pub fn from_chain(trunc: &TruncationSet, chain: &ChainState, t: f64) -> Result<Self> {
        if chain.p.len() != trunc.p_nodes.len() || chain.s.len() != trunc.s_nodes.len() {
            return Err(Error::InvalidArgument("chain state and truncation set disagree on K".into()));
        }
        let mut st = Self::zeros(trunc, t);
        for (k, &i) in trunc.p_nodes.iter().enumerate() {
            st.coeffs[i] += C::new(chain.p[k], 0.0);
        }
        for (k, &i) in trunc.s_nodes.iter().enumerate() {
            st.coeffs[i] += C::new(chain.s[k], 0.0);
        }
        Ok(st)
    }

    pub fn get(&self, trunc: &TruncationSet, n: LatticeVec) -> C {
        trunc.index_of(n).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).sum()
    }

    pub fn l1_distance(&self, o: &SpectralState) -> f64 {
        self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| (a - b).norm()).sum()
    }

    pub fn sub(&self, o: &SpectralState) -> SpectralState {
        SpectralState { t: self.t, coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a - b).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    Fs,
    Rfs,
    Pert,
}

/// A right-hand side evaluation with the rate at which FS sends mass out of the set.
#[derive(Clone, Debug)]
pub struct Derivative {
    pub values: Vec<C>,
    /// `‖dropped derivative‖_{l²}`.
    pub leak_rate: f64,
}

/// Family, schedule, truncation set and per-drive couplings.
pub struct SpectralModel<'a> {
    pub spec: &'a PotentialSpec,
    pub trunc: &'a TruncationSet,
    couplings: HashMap<usize, DriveCoupling>,
}

impl<'a> SpectralModel<'a> {
    pub fn new(spec: &'a PotentialSpec, trunc: &'a TruncationSet) -> Result<Self> {
        if let Some(k) = spec.schedule.max_drive() {
            if !trunc.drives.contains(&k) {
                return Err(Error::InvalidArgument(format!("truncation set was not grown along drive {k}")));
            }
        }
        let mut couplings = HashMap::new();
        for &k in &trunc.drives {
            couplings.insert(k, trunc.coupling(&spec.family, k)?);
        }
        Ok(SpectralModel { spec, trunc, couplings })
    }

    pub fn coupling(&self, drive: usize) -> Option<&DriveCoupling> {
        self.couplings.get(&drive)
    }

    fn fs_term(&self, m: LatticeVec, n: LatticeVec, t: f64) -> Result<C> {
        let (wp, wm) = (omega_plus(m, n)?, omega_minus(m, n)?);
        let (sp, cp) = integer_phase(wp, t).sin_cos();
        let (sm, cm) = integer_phase(wm, t).sin_cos();
        Ok(C::new(cp - cm, -sp + sm))
    }

    /// FS derivative at `state.t`.
    pub fn fs_rhs(&self, state: &SpectralState) -> Result<Derivative> {
        let t = state.t;
        let mut values = vec![C::new(0.0, 0.0); self.trunc.len()];
        let Some(active) = self.spec.active_mode(t) else {
            return Ok(Derivative { values, leak_rate: 0.0 });
        };
        let coupling = self
            .coupling(active.drive)
            .ok_or_else(|| Error::InvalidArgument(format!("drive {} not in truncation set", active.drive)))?;
        let nodes = &self.trunc.nodes;
        for &(i, j) in &coupling.edges {
            // j = i + l
            values[j] += state.coeffs[i] * active.r * self.fs_term(nodes[i], nodes[j], t)?;
            values[i] += state.coeffs[j] * active.r * self.fs_term(nodes[j], nodes[i], t)?;
        }
        let mut dropped: HashMap<LatticeVec, C> = HashMap::new();
        for &(i, _) in &coupling.boundary {
            let n = nodes[i];
            for q in [n.add(coupling.l)?, n.sub(coupling.l)?] {
                if self.trunc.index_of(q).is_none() {
                    *dropped.entry(q).or_default() += state.coeffs[i] * active.r * self.fs_term(n, q, t)?;
                }
            }
        }
        let leak_rate = dropped.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(Derivative { values, leak_rate })
    }

    /// RFS derivative at `state.t`.
    pub fn rfs_rhs(&self, state: &SpectralState) -> Result<Vec<C>> {
        let mut values = vec![C::new(0.0, 0.0); self.trunc.len()];
        self.rfs_into(state.t, &state.coeffs, &mut values)?;
        Ok(values)
    }

    fn rfs_into(&self, t: f64, a: &[C], out: &mut [C]) -> Result<()> {
        out.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        let Some(active) = self.spec.schedule.active_drive(t) else {
            return Ok(());
        };
        let coupling = self
            .coupling(active.drive)
            .ok_or_else(|| Error::InvalidArgument(format!("drive {} not in truncation set", active.drive)))?;
        for &(target, source, sign) in &coupling.resonant {
            out[target] += a[source] * (sign * active.value);
        }
        Ok(())
    }

    /// Perturbation derivative `FS(c) + FS(a) − RFS(a)` with `a` the resonant solution at `c.t`.
    pub fn pert_rhs(&self, c: &SpectralState, resonant: &SpectralState) -> Result<Vec<C>> {
        let lin = self.fs_rhs(c)?.values;
        let a = SpectralState { t: c.t, coeffs: resonant.coeffs.clone() };
        let fa = self.fs_rhs(&a)?.values;
        let ra = self.rfs_rhs(&a)?;
        Ok(lin.iter().zip(fa.iter().zip(&ra)).map(|(l, (f, r))| l + f - r).collect())
    }

    /// The resonant solution of the chain at `t`, placed on the set.
    pub fn resonant_state(&self, t: f64) -> Result<SpectralState> {
        let init = ChainState::initial(self.spec.family.k_max());
        let chain = propagate_exact(&self.spec.schedule, &init, t)?;
        SpectralState::from_chain(self.trunc, &chain, t)
    }

    /// Integrates `kind` from `initial.t` through every time in `samples`
    /// (ordered in the direction of integration).
    pub fn integrate(&self, kind: RhsKind, initial: &SpectralState, samples: &[f64], tol: f64) -> Result<Trajectory> {
        let mut traj = Trajectory { kind, times: vec![], states: vec![], stats: Stats::default(), fs: None };
        let t0 = initial.t;
        let forward = samples.last().is_none_or(|&t| t >= t0);
        for w in std::iter::once(&t0).chain(samples).collect::<Vec<_>>().windows(2) {
            let ok = if forward { w[1] >= w[0] } else { w[1] <= w[0] };
            if !ok {
                return Err(Error::InvalidArgument("sample times must be monotone in the direction of integration".into()));
            }
        }
        match kind {
            RhsKind::Rfs => {
                let mut y = initial.coeffs.clone();
                let mut t = t0;
                let mut dp = Dop853::new(y.len());
                for &ts in samples {
                    traj.stats += self.rfs_segmentwise(&mut dp, &mut y, t, ts, tol)?;
                    t = ts;
                    traj.times.push(t);
                    traj.states.push(SpectralState { t, coeffs: y.clone() });
                }
            }
            RhsKind::Fs | RhsKind::Pert => {
                let mut prop = FsPropagator::new(self.spec, self.trunc, FsOptions::new(tol))?;
                let mut y = initial.coeffs.clone();
                if kind == RhsKind::Pert {
                    let a0 = self.resonant_state(t0)?;
                    for (v, a) in y.iter_mut().zip(&a0.coeffs) {
                        *v += a;
                    }
                }
                let mut t = t0;
                for &ts in samples {
                    prop.propagate(&mut y, t, ts)?;
                    t = ts;
                    let mut coeffs = y.clone();
                    if kind == RhsKind::Pert {
                        let a = self.resonant_state(t)?;
                        for (v, a) in coeffs.iter_mut().zip(&a.coeffs) {
                            *v -= a;
                        }
                    }
                    traj.times.push(t);
                    traj.states.push(SpectralState { t, coeffs });
                }
                traj.stats = prop.counters.steps;
                traj.fs = Some(prop.counters);
            }
        }
        Ok(traj)
    }

    fn rfs_segmentwise(&self, dp: &mut Dop853, y: &mut [C], t_a: f64, t_b: f64, tol: f64) -> Result<Stats> {
        let mut stats = Stats::default();
        if t_a == t_b {
            return Ok(stats);
        }
        let sched = &self.spec.schedule;
        let (lo, hi) = (t_a.min(t_b), t_a.max(t_b));
        let mut cuts: Vec<f64> = sched.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
        cuts.insert(0, lo);
        cuts.push(hi);
        if t_b < t_a {
            cuts.reverse();
        }
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let Some(seg) = sched.segment_index(mid).filter(|_| mid < sched.horizon()) else { continue };
            let drive = sched.segments[seg].drive_index;
            let coupling = self
                .coupling(drive)
                .ok_or_else(|| Error::InvalidArgument(format!("drive {drive} not in truncation set")))?;
            let f = |t: f64, a: &[C], out: &mut [C]| {
                out.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
                let r = sched.segment_value(seg, t);
                for &(target, source, sign) in &coupling.resonant {
                    out[target] += a[source] * (sign * r);
                }
            };
            let ctx = format!("RFS drive {drive} on [{}, {}]", w[0], w[1]);
            dp.last_step = None;
            stats += dp.integrate(f, w[0], w[1], y, Tolerance::uniform(tol), &ctx)?;
        }
        Ok(stats)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: RhsKind,
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub stats: Stats,
    pub fs: Option<FsCounters>,
}

impl Trajectory {
    /// Long-format CSV `t,node_x,node_y,re,im`, one row per nonzero coefficient.
    pub fn to_csv(&self, trunc: &TruncationSet) -> String {
        let mut out = String::from("t,node_x,node_y,re,im\n");
        for st in &self.states {
            for (i, z) in st.coeffs.iter().enumerate() {
                if z.re != 0.0 || z.im != 0.0 {
                    let n = trunc.nodes[i];
                    let _ = writeln!(out, "{:.12e},{},{},{:.16e},{:.16e}", st.t, n.x, n.y, z.re, z.im);
                }
            }
        }
        out
    }
}

/// `‖b − a‖_{l¹}` along a forward FS run started from the resonant data.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub times: Vec<f64>,
    pub deviation: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub max_deviation: f64,
    pub leakage_estimate: f64,
}

pub fn forward_deviation(model: &SpectralModel, samples: &[f64], tol: f64) -> Result<DeviationReport> {
    let a0 = model.resonant_state(0.0)?;
    let traj = model.integrate(RhsKind::Fs, &a0, samples, tol)?;
    let m0 = a0.mass();
    let mut deviation = Vec::new();
    let mut mass_drift = Vec::new();
    for st in &traj.states {
        let a = model.resonant_state(st.t)?;
        deviation.push(st.l1_distance(&a));
        mass_drift.push((st.mass() - m0).abs());
    }
    let max_deviation = deviation.iter().cloned().fold(0.0, f64::max);
    Ok(DeviationReport {
        times: traj.times,
        deviation,
        mass_drift,
        max_deviation,
        leakage_estimate: traj.fs.map(|c| c.leakage_estimate).unwrap_or(0.0),
    })
}

/// `c^N(t) = b(t) − a(t)` with `b` solving FS backward from `b(T_N) = a(T_N)`,
/// at each probe time (any order, all in `[0, T_N]`).
pub fn backward_perturbation(model: &SpectralModel, cycles: usize, probes: &[f64], tol: f64) -> Result<Vec<SpectralState>> {
    let sched = &model.spec.schedule;
    if cycles > sched.cycles() {
        return Err(Error::InvalidArgument(format!("T_{cycles} is beyond the schedule ({} cycles)", sched.cycles())));
    }
    let t_n = sched.cycle_times[cycles];
    if probes.iter().any(|&t| !(0.0..=t_n).contains(&t)) {
        return Err(Error::InvalidArgument(format!("probe times must lie in [0, T_{cycles}]")));
    }
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&i, &j| probes[j].total_cmp(&probes[i]));
    let sorted: Vec<f64> = order.iter().map(|&i| probes[i]).collect();
    let zero = SpectralState::zeros(model.trunc, t_n);
    let traj = model.integrate(RhsKind::Pert, &zero, &sorted, tol)?;
    let mut out = vec![zero; probes.len()];
    for (slot, st) in order.into_iter().zip(traj.states) {
        out[slot] = st;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyTable {
    pub cycles: Vec<usize>,
    pub t_probe: f64,
    /// `‖c^N(t_probe)‖_{l¹}` per entry of `cycles`.
    pub norms: Vec<f64>,
    /// `‖c^M − c^N‖_{l¹}` for every pair.
    pub distances: Vec<Vec<f64>>,
}

impl CauchyTable {
    /// Distances between consecutive entries of `cycles`.
    pub fn successive(&self) -> Vec<f64> {
        (1..self.cycles.len()).map(|i| self.distances[i - 1][i]).collect()
    }
}

pub fn cauchy_check(model: &SpectralModel, cycles: &[usize], t_probe: f64, tol: f64) -> Result<CauchyTable> {
    let mut states = Vec::new();
    for &n in cycles {
        states.push(backward_perturbation(model, n, &[t_probe], tol)?.remove(0));
    }
    let norms = states.iter().map(|s| s.l1_norm()).collect();
    let distances = states.iter().map(|a| states.iter().map(|b| a.l1_distance(b)).collect()).collect();
    Ok(CauchyTable { cycles: cycles.to_vec(), t_probe, norms, distances })
}

/// Run metadata written next to trajectory files.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub tolerance: f64,
    pub truncation: TruncationSummary,
    pub beta_mode: String,
    pub cycles: usize,
    pub cycle_times: Vec<f64>,
    pub determinism: &'static str,
}

pub const DETERMINISM_STATEMENT: &str =
    "no random numbers are drawn; identical configuration produces identical output";

#[cfg(test)]
mod tests;
