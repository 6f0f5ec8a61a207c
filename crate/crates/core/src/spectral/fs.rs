//! Propagation of the full Fourier system on a truncation set.
//!
//! While drive `k` is lit the system splits into independent runs
//! `n, n + l_k, n + 2l_k, …` (the blocks of [`DriveCoupling`]); isolated nodes
//! do not move. Each block is advanced in a frame anchored at the start of the
//! piece, `ã = e^{−iE t_a} a`, where
//!
//! `ã_j' = −2i r(t) sin(θ_a + E_l τ) Σ_{i ~ j} e^{i(E_j − E_i)τ} ã_i`, `τ = t − t_a`.
//!
//! Short pieces are integrated directly. Pieces spanning many carrier periods
//! `P = 2π/E_l` use the period map `M` of the block: plateaus take `M^n`, and
//! ramps multiply one map per period, each linearised in the drive slope and
//! interpolated in the drive level.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::dop853::Dop853;
use super::dp5::{Stats, Tolerance};
use super::truncation::{DriveCoupling, TruncationSet};
use crate::error::{Error, Result};
use crate::phase::{integer_phase, period_phasor, phasor};
use crate::potential::PotentialSpec;
use crate::quad;
use crate::schedule::Phase;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

#[derive(Clone, Copy, Debug)]
pub struct FsOptions {
    /// Per-step tolerance of direct integration.
    pub tol: f64,
    /// Plateau pieces at least this many carrier periods long use the period map.
    pub plateau_min_periods: f64,
    /// Ramp pieces at least this many carrier periods long use per-period maps.
    pub ramp_min_periods: f64,
    /// Interpolation nodes in the drive level for ramp period maps.
    pub level_nodes: usize,
}

impl FsOptions {
    pub fn new(tol: f64) -> Self {
        FsOptions { tol, plateau_min_periods: 64.0, ramp_min_periods: 2048.0, level_nodes: 10 }
    }
}

#[derive(Clone, Debug)]
struct Block {
    nodes: Vec<usize>,
    energy: Vec<i128>,
    /// `E_{j+1} − E_j` along the run.
    step_energy: Vec<i128>,
}

enum CachedMaps {
    /// `M` for a constant level.
    Plateau(DMatrix<C>),
    /// `X0(r_i)`, `X1(r_i)` at the interpolation nodes on `[0, amplitude]`.
    Ramp { amplitude: f64, x0: Vec<DMatrix<C>>, x1: Vec<DMatrix<C>> },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FsCounters {
    pub direct_pieces: usize,
    pub floquet_pieces: usize,
    pub period_maps: usize,
    pub steps: Stats,
    /// `∫ 2|r| ‖a on boundary nodes‖ dt`, estimated from piece endpoints.
    pub leakage_estimate: f64,
}

pub struct FsPropagator<'a> {
    spec: &'a PotentialSpec,
    trunc: &'a TruncationSet,
    opts: FsOptions,
    couplings: HashMap<usize, (DriveCoupling, Vec<Block>)>,
    cache: HashMap<(usize, usize, u64, bool), CachedMaps>,
    dp: Dop853,
    pub counters: FsCounters,
}

fn sin_carrier(theta0: f64, e_l: i128, tau: f64) -> f64 {
    (theta0 + integer_phase(e_l, tau)).sin()
}

fn unit_phase(e: i128, tau: f64) -> C {
    let (s, c) = integer_phase(e, tau).sin_cos();
    C::new(c, s)
}

/// `K x` for the block kernel at local time `tau`.
fn apply_kernel(step_energy: &[i128], e_l: i128, theta0: f64, r: f64, tau: f64, x: &[C], out: &mut [C], q: &mut Vec<C>) {
    let b = x.len();
    let c = C::new(0.0, -2.0 * r * sin_carrier(theta0, e_l, tau));
    q.clear();
    q.extend(step_energy.iter().map(|&de| unit_phase(de, tau)));
    for j in 0..b {
        let mut acc = ZERO;
        if j + 1 < b {
            acc += q[j].conj() * x[j + 1];
        }
        if j >= 1 {
            acc += q[j - 1] * x[j - 1];
        }
        out[j] = c * acc;
    }
}

/// `diag(φ) A diag(φ)*`.
fn conj_diag(phi: &[C], a: &DMatrix<C>) -> DMatrix<C> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| phi[i] * a[(i, j)] * phi[j].conj())
}

fn mat_pow(m: &DMatrix<C>, mut n: u64) -> DMatrix<C> {
    let b = m.nrows();
    let mut acc = DMatrix::<C>::identity(b, b);
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            acc = &base * &acc;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    acc
}

impl<'a> FsPropagator<'a> {
    pub fn new(spec: &'a PotentialSpec, trunc: &'a TruncationSet, opts: FsOptions) -> Result<Self> {
        let mut couplings = HashMap::new();
        for &k in &trunc.drives {
            let c = trunc.coupling(&spec.family, k)?;
            let blocks = c
                .blocks
                .iter()
                .map(|nodes| {
                    let energy: Vec<i128> = nodes.iter().map(|&i| trunc.energy[i]).collect();
                    let step_energy = energy.windows(2).map(|w| w[1] - w[0]).collect();
                    Block { nodes: nodes.clone(), energy, step_energy }
                })
                .collect();
            couplings.insert(k, (c, blocks));
        }
        Ok(FsPropagator { spec, trunc, opts, couplings, cache: HashMap::new(), dp: Dop853::new(4), counters: FsCounters::default() })
    }

    /// Advances `a` (indexed like the truncation set) from `t_a` to `t_b`.
    pub fn propagate(&mut self, a: &mut [C], t_a: f64, t_b: f64) -> Result<()> {
        if a.len() != self.trunc.len() {
            return Err(Error::InvalidArgument("state does not match the truncation set".into()));
        }
        if t_a == t_b {
            return Ok(());
        }
        let sched = &self.spec.schedule;
        let (lo, hi) = (t_a.min(t_b), t_a.max(t_b));
        let mut cuts: Vec<f64> = sched.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
        cuts.insert(0, lo);
        cuts.push(hi);
        let forward = t_b > t_a;
        let pieces: Vec<(f64, f64)> = if forward {
            cuts.windows(2).map(|w| (w[0], w[1])).collect()
        } else {
            cuts.windows(2).rev().map(|w| (w[1], w[0])).collect()
        };
        for (s0, s1) in pieces {
            let mid = 0.5 * (s0 + s1);
            let Some(seg) = sched.segment_index(mid) else { continue };
            if mid >= sched.horizon() {
                continue;
            }
            self.propagate_piece(a, seg, s0, s1)?;
        }
        Ok(())
    }

    fn propagate_piece(&mut self, a: &mut [C], seg: usize, t_a: f64, t_b: f64) -> Result<()> {
        let sched = &self.spec.schedule;
        let drive = sched.segments[seg].drive_index;
        let phase = sched.segments[seg].phase;
        let Some((coupling, blocks)) = self.couplings.get(&drive) else {
            return Err(Error::InvalidArgument(format!("drive {drive} is lit but not in the truncation set")));
        };
        let e_l = coupling.energy_l;
        let blocks = blocks.clone();
        let boundary = coupling.boundary.clone();

        let boundary_mass = |a: &[C]| -> f64 {
            boundary.iter().map(|&(i, c)| c as f64 * a[i].norm_sqr()).sum::<f64>().sqrt()
        };
        let leak_before = boundary_mass(a);

        let periods = (t_b - t_a).abs() * e_l as f64 / TAU;
        let threshold = match phase {
            Phase::Plateau => self.opts.plateau_min_periods,
            _ => self.opts.ramp_min_periods,
        };
        let use_floquet = periods >= threshold;

        for (bi, blk) in blocks.iter().enumerate() {
            let mut x: Vec<C> = blk.nodes.iter().map(|&i| a[i]).collect();
            if x.iter().all(|z| *z == ZERO) {
                continue;
            }
            if use_floquet {
                self.counters.floquet_pieces += 1;
                let forward = t_b > t_a;
                let (origin, len) = if forward { (t_a, t_b - t_a) } else { (t_b, t_a - t_b) };
                let theta = integer_phase(e_l, origin).rem_euclid(TAU);
                let w = self.floquet_map(drive, bi, blk, seg, origin, len, theta, e_l)?;
                let z: Vec<C> = blk.energy.iter().map(|&e| {
                    let (c, s) = phasor(e, origin);
                    C::new(c, s)
                }).collect();
                let xt = nalgebra::DVector::from_iterator(x.len(), x.iter().zip(&z).map(|(v, z)| v * z));
                let yt = if forward {
                    &w * xt
                } else {
                    w.lu().solve(&xt).ok_or(Error::Singular { drive })?
                };
                for (j, v) in yt.iter().enumerate() {
                    x[j] = v * z[j].conj();
                }
            } else {
                self.counters.direct_pieces += 1;
                let z: Vec<C> = blk.energy.iter().map(|&e| {
                    let (c, s) = phasor(e, t_a);
                    C::new(c, s)
                }).collect();
                for (v, z) in x.iter_mut().zip(&z) {
                    *v *= z;
                }
                let theta = integer_phase(e_l, t_a);
                let step_energy = blk.step_energy.clone();
                let sched = &self.spec.schedule;
                let mut q = Vec::new();
                let f = |tau: f64, y: &[C], d: &mut [C]| {
                    let r = sched.segment_value(seg, t_a + tau);
                    apply_kernel(&step_energy, e_l, theta, r, tau, y, d, &mut q);
                };
                self.dp.last_step = None;
                let ctx = format!("drive {drive} {phase:?} piece [{t_a}, {t_b}]");
                let st = self.dp.integrate(f, 0.0, t_b - t_a, &mut x, Tolerance::uniform(self.opts.tol), &ctx)?;
                self.counters.steps += st;
                for (v, z) in x.iter_mut().zip(&z) {
                    *v *= z.conj();
                }
            }
            for (j, &i) in blk.nodes.iter().enumerate() {
                a[i] = x[j];
            }
        }

        let leak_after = boundary_mass(a);
        let r_int = quad::integrate(t_a.min(t_b), t_a.max(t_b), |t| sched.segment_value(seg, t).abs());
        self.counters.leakage_estimate += 2.0 * r_int * leak_before.max(leak_after);
        Ok(())
    }

    /// `I + X` over `[0, len]` with level `r(τ)` and carrier phase `theta0` at `τ = 0`.
    fn direct_matrix<R: Fn(f64) -> f64>(&mut self, blk: &Block, e_l: i128, theta0: f64, len: f64, r: R, tol: Tolerance) -> Result<DMatrix<C>> {
        let b = blk.nodes.len();
        let mut x = vec![ZERO; b * b];
        if len > 0.0 {
            let mut q = Vec::new();
            let mut col = vec![ZERO; b];
            let mut out = vec![ZERO; b];
            let step_energy = &blk.step_energy;
            let f = |tau: f64, y: &[C], d: &mut [C]| {
                let rv = r(tau);
                for c in 0..b {
                    col.copy_from_slice(&y[c * b..(c + 1) * b]);
                    col[c] += ONE;
                    apply_kernel(step_energy, e_l, theta0, rv, tau, &col, &mut out, &mut q);
                    d[c * b..(c + 1) * b].copy_from_slice(&out);
                }
            };
            let mut dp = Dop853::new(b * b);
            let st = dp.integrate(f, 0.0, len, &mut x, tol, "period map")?;
            self.counters.steps += st;
        }
        let mut m = DMatrix::from_column_slice(b, b, &x);
        for i in 0..b {
            m[(i, i)] += ONE;
        }
        Ok(m)
    }

    fn map_tolerance() -> Tolerance {
        Tolerance { atol: 1e-18, rtol: 1e-12 }
    }

    /// `X(r, σ)` over one aligned period with level `r + σ(τ − P/2)`.
    fn period_x(&mut self, blk: &Block, e_l: i128, r: f64, slope: f64) -> Result<DMatrix<C>> {
        let p = TAU / e_l as f64;
        self.counters.period_maps += 1;
        let mut m = self.direct_matrix(blk, e_l, 0.0, p, |tau| r + slope * (tau - 0.5 * p), Self::map_tolerance())?;
        for i in 0..m.nrows() {
            m[(i, i)] -= ONE;
        }
        Ok(m)
    }

    fn period_phases(blk: &Block, e_l: i128) -> Vec<C> {
        blk.energy
            .iter()
            .map(|&e| {
                let (c, s) = period_phasor(e, e_l);
                C::new(c, s)
            })
            .collect()
    }

    /// `M = e^{−iDP}(I + X)`.
    fn m_from_x(phases: &[C], x: &DMatrix<C>) -> DMatrix<C> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| phases[i] * (x[(i, j)] + if i == j { ONE } else { ZERO }))
    }

    fn level_nodes(&self, amplitude: f64) -> Vec<f64> {
        let n = self.opts.level_nodes;
        (0..n)
            .map(|i| {
                let x = (PI * (2 * i + 1) as f64 / (2 * n) as f64).cos();
                0.5 * amplitude * (1.0 + x)
            })
            .collect()
    }

    /// Barycentric weights of the level interpolant at `r`.
    fn level_weights(&self, amplitude: f64, r: f64) -> Vec<f64> {
        let n = self.opts.level_nodes;
        let nodes = self.level_nodes(amplitude);
        let mut w: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (PI * (2 * i + 1) as f64 / (2 * n) as f64).sin()
            })
            .collect();
        if let Some(hit) = nodes.iter().position(|&x| x == r) {
            return (0..n).map(|i| if i == hit { 1.0 } else { 0.0 }).collect();
        }
        let mut total = 0.0;
        for (wi, &xi) in w.iter_mut().zip(&nodes) {
            *wi /= r - xi;
            total += *wi;
        }
        for wi in &mut w {
            *wi /= total;
        }
        w
    }

    #[allow(clippy::too_many_arguments)]
    fn floquet_map(&mut self, drive: usize, bi: usize, blk: &Block, seg: usize, origin: f64, len: f64, theta: f64, e_l: i128) -> Result<DMatrix<C>> {
        let sched = &self.spec.schedule;
        let segment = sched.segments[seg];
        let p = TAU / e_l as f64;
        let head = if theta == 0.0 { 0.0 } else { (TAU - theta) / e_l as f64 };
        let n = ((len - head) / p).floor().max(0.0) as u64;
        let tail = (len - head - n as f64 * p).max(0.0);
        let t_mid = origin + head;
        let tol = Tolerance::uniform(self.opts.tol);

        let w_head = self.direct_matrix(blk, e_l, theta, head, |tau| sched.segment_value(seg, origin + tau), tol)?;
        let phases = Self::period_phases(blk, e_l);
        let amp_bits = segment.amplitude.to_bits();

        let prod = match segment.phase {
            Phase::Plateau => {
                let key = (drive, bi, amp_bits, false);
                if !self.cache.contains_key(&key) {
                    let x = self.period_x(blk, e_l, segment.amplitude, 0.0)?;
                    self.cache.insert(key, CachedMaps::Plateau(Self::m_from_x(&phases, &x)));
                }
                match &self.cache[&key] {
                    CachedMaps::Plateau(m) => mat_pow(m, n),
                    CachedMaps::Ramp { .. } => unreachable!("plateau key holds a plateau map"),
                }
            }
            _ => {
                let key = (drive, bi, amp_bits, true);
                if !self.cache.contains_key(&key) {
                    let amplitude = segment.amplitude;
                    let h = amplitude.max(1e-300);
                    let mut x0 = Vec::new();
                    let mut x1 = Vec::new();
                    for r in self.level_nodes(amplitude) {
                        x0.push(self.period_x(blk, e_l, r, 0.0)?);
                        let xp = self.period_x(blk, e_l, r, h)?;
                        let xm = self.period_x(blk, e_l, r, -h)?;
                        x1.push((xp - xm) / C::new(2.0 * h, 0.0));
                    }
                    self.cache.insert(key, CachedMaps::Ramp { amplitude, x0, x1 });
                }
                let CachedMaps::Ramp { amplitude, x0, x1 } = &self.cache[&key] else {
                    unreachable!("ramp key holds ramp maps")
                };
                let b = blk.nodes.len();
                let mut acc = DMatrix::<C>::identity(b, b);
                let mut x = DMatrix::<C>::zeros(b, b);
                for j in 0..n {
                    let tm = t_mid + (j as f64 + 0.5) * p;
                    let (r, slope) = sched.segment_drive(seg, tm);
                    let w = self.level_weights(*amplitude, r);
                    x.fill(ZERO);
                    for (i, wi) in w.iter().enumerate() {
                        x += (&x0[i] + &x1[i] * C::new(slope, 0.0)) * C::new(*wi, 0.0);
                    }
                    let m = Self::m_from_x(&phases, &x);
                    acc = m * acc;
                }
                acc
            }
        };

        // e^{iE_j nP} exactly, e^{iE_j head} from the carrier angle.
        let phi_n: Vec<C> = blk
            .energy
            .iter()
            .map(|&e| {
                let k = ((n as i128 % e_l) * e.rem_euclid(e_l)).rem_euclid(e_l);
                let ang = TAU * (k as f64 / e_l as f64);
                C::new(ang.cos(), ang.sin())
            })
            .collect();
        let phi_head: Vec<C> = blk
            .energy
            .iter()
            .map(|&e| {
                if head == 0.0 {
                    return ONE;
                }
                let q = e.div_euclid(e_l);
                let rho = e.rem_euclid(e_l);
                let ang = -(q as f64) * theta + (rho as f64 / e_l as f64) * (TAU - theta);
                C::new(ang.cos(), ang.sin())
            })
            .collect();
        let w_mid = DMatrix::from_fn(prod.nrows(), prod.ncols(), |i, j| phi_n[i] * prod[(i, j)]);
        let w_tail = self.direct_matrix(blk, e_l, 0.0, tail, |tau| sched.segment_value(seg, t_mid + n as f64 * p + tau), tol)?;
        let phi_total: Vec<C> = phi_head.iter().zip(&phi_n).map(|(a, b)| a * b).collect();
        Ok(conj_diag(&phi_total, &w_tail) * conj_diag(&phi_head, &w_mid) * w_head)
    }
}
