//! Piecewise drives `r_k(t)`.
//!
//! Cycle `n` lights `r_n` (first move), then `r_{n+1}` (second move), then
//! `r_n` again (third move). Each move is a group of three contiguous phases:
//! a unit ramp up, a plateau and a unit ramp down, all at one amplitude.
//! The amplitude is `(I/α)·β_k` for the move's required integral `I`, and the
//! plateau is whatever makes the group integral exactly `I`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bump::{default_bump, BumpProfile};
use crate::chain::{MoveKind, MoveSpec};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::lattice::FrequencyFamily;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BetaMode {
    /// `β_k = |l_k|^{−|l_k|}`.
    Paper,
    /// `β_k = base · ratio^k`.
    Scaled { base: f64, ratio: f64 },
}

impl Default for BetaMode {
    fn default() -> Self {
        BetaMode::Scaled { base: 0.05, ratio: 0.5 }
    }
}

impl fmt::Display for BetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaMode::Paper => write!(f, "paper"),
            BetaMode::Scaled { base, ratio } => write!(f, "scaled(base={base}, ratio={ratio})"),
        }
    }
}

/// `ln β_k = −|l_k| ln |l_k|`.
pub fn log_beta_paper(l_norm: f64) -> f64 {
    -l_norm * l_norm.ln()
}

/// `|l_k|^{−|l_k|}`, erroring once the value leaves the normal binary64 range.
pub fn beta_paper(index: usize, l_norm: f64) -> Result<f64> {
    if !(l_norm > 1.0) {
        return Err(Error::InvalidArgument(format!("|l_{index}| = {l_norm} must exceed 1")));
    }
    let lb = log_beta_paper(l_norm);
    if lb < 1e-300f64.ln() {
        return Err(Error::BetaUnderflow { index, log_beta: lb });
    }
    Ok(l_norm.powf(-l_norm))
}

impl BetaMode {
    pub fn beta(&self, f: &FrequencyFamily, k: usize) -> Result<f64> {
        match *self {
            BetaMode::Paper => beta_paper(k, f.l[k].norm()),
            BetaMode::Scaled { base, ratio } => {
                if !(base > 0.0 && ratio > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "scaled beta needs positive base and ratio, got {base}, {ratio}"
                    )));
                }
                Ok(base * ratio.powi(k as i32))
            }
        }
    }

    /// The same mode with every `β_k` multiplied by `factor`.
    ///
    /// Only defined for scaled mode.
    pub fn scaled_by(&self, factor: f64) -> Result<BetaMode> {
        match *self {
            BetaMode::Scaled { base, ratio } => Ok(BetaMode::Scaled { base: base * factor, ratio }),
            BetaMode::Paper => Err(Error::InvalidArgument("paper-mode beta cannot be rescaled".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    RampUp,
    Plateau,
    RampDown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub drive_index: usize,
    pub amplitude: f64,
    pub phase: Phase,
    #[serde(rename = "move")]
    pub mv: MoveSpec,
    pub cycle: usize,
}

/// Three contiguous segments realising one move.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveGroup {
    pub kind: MoveKind,
    pub drive: usize,
    pub cycle: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude: f64,
    pub plateau: f64,
}

impl MoveGroup {
    pub fn plateau_start(&self) -> f64 {
        self.t_start + 1.0
    }

    pub fn plateau_end(&self) -> f64 {
        self.t_end - 1.0
    }

    pub fn phase_boundaries(&self) -> [f64; 4] {
        [self.t_start, self.plateau_start(), self.plateau_end(), self.t_end]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveDrive {
    pub drive: usize,
    pub value: f64,
    pub derivative: f64,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub segments: Vec<Segment>,
    groups: Vec<MoveGroup>,
    /// `β_k` for every drive the schedule lights.
    pub beta: Vec<f64>,
    /// Plateau length `t_k` of the first-move group of drive `k`.
    pub t_k: Vec<f64>,
    /// Cycle boundaries `T_0 = 0, …, T_N`.
    pub cycle_times: Vec<f64>,
    pub mode: BetaMode,
    pub bump: BumpProfile,
}

#[derive(Serialize, Deserialize)]
struct ScheduleDocument {
    segments: Vec<Segment>,
    beta: Vec<f64>,
    #[serde(rename = "T")]
    cycle_times: Vec<f64>,
    mode: BetaMode,
}

fn push_group(
    segments: &mut Vec<Segment>,
    groups: &mut Vec<MoveGroup>,
    t0: f64,
    kind: MoveKind,
    drive: usize,
    cycle: usize,
    beta: f64,
    alpha: f64,
) -> Result<f64> {
    let integral = kind.required_integral();
    let amplitude = integral / alpha * beta;
    let plateau = integral / amplitude - 2.0 * alpha;
    if !(plateau >= 0.0) {
        return Err(Error::NegativePlateau { kind: kind.name(), drive, beta, plateau });
    }
    let mv = MoveSpec::new(kind, drive);
    let times = [t0, t0 + 1.0, t0 + 1.0 + plateau, t0 + 2.0 + plateau];
    for (i, phase) in [Phase::RampUp, Phase::Plateau, Phase::RampDown].into_iter().enumerate() {
        segments.push(Segment {
            t_start: times[i],
            t_end: times[i + 1],
            drive_index: drive,
            amplitude,
            phase,
            mv,
            cycle,
        });
    }
    groups.push(MoveGroup { kind, drive, cycle, t_start: t0, t_end: times[3], amplitude, plateau });
    Ok(times[3])
}

/// `N` cycles over the family's drives; requires `N ≤ K − 1`.
pub fn build_schedule(f: &FrequencyFamily, cycles: usize, mode: BetaMode) -> Result<Schedule> {
    let kk = f.k_max();
    if cycles > 0 && cycles + 1 > kk {
        return Err(Error::InvalidArgument(format!(
            "{cycles} cycles need a family with K ≥ {}, got K = {kk}",
            cycles + 1
        )));
    }
    let bump = default_bump();
    let alpha = bump.alpha();
    let n_drives = if cycles == 0 { 0 } else { cycles + 1 };
    let beta: Vec<f64> = (0..n_drives).map(|k| mode.beta(f, k)).collect::<Result<_>>()?;
    let t_k: Vec<f64> = beta.iter().map(|b| alpha * (1.0 / b - 2.0)).collect();

    let mut segments = Vec::with_capacity(9 * cycles);
    let mut groups = Vec::with_capacity(3 * cycles);
    let mut cycle_times = vec![0.0];
    let mut t = 0.0;
    for n in 0..cycles {
        for (kind, drive) in [(MoveKind::Move1, n), (MoveKind::Move2, n + 1), (MoveKind::Move3, n)] {
            t = push_group(&mut segments, &mut groups, t, kind, drive, n, beta[drive], alpha)?;
        }
        cycle_times.push(t);
    }
    Ok(Schedule { segments, groups, beta, t_k, cycle_times, mode, bump })
}

impl Schedule {
    pub fn cycles(&self) -> usize {
        self.cycle_times.len() - 1
    }

    pub fn groups(&self) -> &[MoveGroup] {
        &self.groups
    }

    /// End of the last segment.
    pub fn horizon(&self) -> f64 {
        *self.cycle_times.last().expect("cycle_times starts with T_0")
    }

    /// Highest drive index lit, if any.
    pub fn max_drive(&self) -> Option<usize> {
        self.groups.iter().map(|g| g.drive).max()
    }

    /// Index of the segment containing `t`, preferring the later one at a shared endpoint.
    pub fn segment_index(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() || t < 0.0 || t > self.horizon() {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t_end <= t);
        Some(i.min(self.segments.len() - 1))
    }

    pub fn group_index(&self, t: f64) -> Option<usize> {
        self.segment_index(t).map(|i| i / 3)
    }

    fn local(&self, seg: &Segment, t: f64) -> (f64, f64) {
        // (argument of φ, sign of d/dt of the argument)
        match seg.phase {
            Phase::RampUp => (t - seg.t_start, 1.0),
            Phase::Plateau => (1.0, 0.0),
            Phase::RampDown => (seg.t_end - t, -1.0),
        }
    }

    pub fn active_drive(&self, t: f64) -> Option<ActiveDrive> {
        let i = self.segment_index(t)?;
        let (value, derivative) = self.segment_drive(i, t);
        Some(ActiveDrive { drive: self.segments[i].drive_index, value, derivative })
    }

    /// `(r, r')` of segment `i`'s formula at `t`, without locating the segment.
    pub fn segment_drive(&self, i: usize, t: f64) -> (f64, f64) {
        let seg = &self.segments[i];
        let (x, dir) = self.local(seg, t);
        match seg.phase {
            Phase::Plateau => (seg.amplitude, 0.0),
            _ => (seg.amplitude * self.bump.phi(x), dir * seg.amplitude * self.bump.phi_prime(x)),
        }
    }

    /// `r` of segment `i`'s formula at `t`.
    pub fn segment_value(&self, i: usize, t: f64) -> f64 {
        let seg = &self.segments[i];
        let (x, _) = self.local(seg, t);
        match seg.phase {
            Phase::Plateau => seg.amplitude,
            _ => seg.amplitude * self.bump.phi(x),
        }
    }

    /// `r_k(t)` for the given drive; zero whenever another drive is lit.
    pub fn drive_value(&self, k: usize, t: f64) -> f64 {
        match self.active_drive(t) {
            Some(a) if a.drive == k => a.value,
            _ => 0.0,
        }
    }

    /// Taylor jet of the active drive at `t`, or `None` outside every segment.
    pub fn drive_jet(&self, t: f64) -> Option<(usize, Jet)> {
        let seg = &self.segments[self.segment_index(t)?];
        let (x, _) = self.local(seg, t);
        let jet = match seg.phase {
            Phase::Plateau => Jet::constant(seg.amplitude),
            Phase::RampUp => self.bump.phi_jet(x).scale(seg.amplitude),
            Phase::RampDown => {
                let mut j = self.bump.phi_jet(x);
                for (i, c) in j.c.iter_mut().enumerate() {
                    if i % 2 == 1 {
                        *c = -*c;
                    }
                }
                j.scale(seg.amplitude)
            }
        };
        Some((seg.drive_index, jet))
    }

    /// `∫_{group start}^{t} r`, with `t` clamped into the group.
    pub fn group_integral(&self, g: &MoveGroup, t: f64) -> f64 {
        let alpha = self.bump.alpha();
        let t = t.clamp(g.t_start, g.t_end);
        let a = g.amplitude;
        if t <= g.plateau_start() {
            a * self.bump.cumulative(t - g.t_start)
        } else if t <= g.plateau_end() {
            a * (alpha + (t - g.plateau_start()))
        } else {
            a * (alpha + g.plateau + alpha - self.bump.cumulative(g.t_end - t))
        }
    }

    /// `∫_0^t r_k`.
    pub fn drive_integral(&self, k: usize, t: f64) -> f64 {
        self.groups
            .iter()
            .filter(|g| g.drive == k && g.t_start < t)
            .map(|g| self.group_integral(g, t))
            .sum()
    }

    /// Every phase boundary in increasing order, starting at 0.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for s in &self.segments {
            out.push(s.t_end);
        }
        out
    }

    /// `k(t)`: the smallest `k` with `t ≤ T_{k+1}`, capped at the last cycle.
    pub fn cycle_index(&self, t: f64) -> usize {
        let n = self.cycles();
        (0..n).find(|&k| t <= self.cycle_times[k + 1]).unwrap_or(n.saturating_sub(1))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ScheduleDocument {
            segments: self.segments.clone(),
            beta: self.beta.clone(),
            cycle_times: self.cycle_times.clone(),
            mode: self.mode,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds from a document, checking contiguity and group integrals.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScheduleDocument = serde_json::from_str(text)?;
        if doc.segments.len() % 3 != 0 {
            return Err(Error::InvalidArgument("segment count must be a multiple of 3".into()));
        }
        let bump = default_bump();
        let alpha = bump.alpha();
        let mut groups = Vec::new();
        let mut t_k = vec![f64::NAN; doc.beta.len()];
        let mut prev_end = 0.0;
        for chunk in doc.segments.chunks(3) {
            let (up, pl, down) = (&chunk[0], &chunk[1], &chunk[2]);
            let contiguous = up.t_start == prev_end && up.t_end == pl.t_start && pl.t_end == down.t_start;
            let shaped = up.phase == Phase::RampUp && pl.phase == Phase::Plateau && down.phase == Phase::RampDown;
            if !contiguous || !shaped {
                return Err(Error::InvalidArgument(format!("malformed move group at t = {}", up.t_start)));
            }
            let plateau = pl.t_end - pl.t_start;
            let g = MoveGroup {
                kind: up.mv.kind,
                drive: up.drive_index,
                cycle: up.cycle,
                t_start: up.t_start,
                t_end: down.t_end,
                amplitude: up.amplitude,
                plateau,
            };
            if g.kind == MoveKind::Move1 && g.drive < t_k.len() {
                t_k[g.drive] = plateau;
            }
            let total = g.amplitude * (2.0 * alpha + plateau);
            if (total - g.kind.required_integral()).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "move group at t = {} integrates to {total}, expected {}",
                    g.t_start,
                    g.kind.required_integral()
                )));
            }
            prev_end = g.t_end;
            groups.push(g);
        }
        // The last drive is only lit by a second move.
        if let Some(&b) = doc.beta.last() {
            if let Some(last) = t_k.last_mut() {
                if last.is_nan() {
                    *last = alpha * (1.0 / b - 2.0);
                }
            }
        }
        Ok(Schedule {
            segments: doc.segments,
            groups,
            beta: doc.beta,
            t_k,
            cycle_times: doc.cycle_times,
            mode: doc.mode,
            bump,
        })
    }
}
