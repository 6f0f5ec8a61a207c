//! Sobolev norms, log-space growth and decay bounds, and the α/β estimates
//! that drive the Gronwall argument for the perturbation.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::bump::BumpProfile;
use crate::chain::{apply_move, propagate_exact, ChainState, MoveKind, MoveSpec};
use crate::error::{Error, Result};
use crate::lattice::{omega_minus, omega_plus, FrequencyFamily, LatticeVec};
use crate::potential::{plateau_log_norm, PotentialSpec};
use crate::quad::integrate;
use crate::schedule::log_beta_paper;
use crate::spectral::truncation::TruncationSet;
use crate::spectral::SpectralState;

/// Relative slack applied to every log-space comparison.
pub const LOG_SLACK: f64 = 1e-9;

/// `(Σ max(1,|n|)^{2s} |a_n|²)^{1/2}` over explicit `(node, coefficient)` pairs.
pub fn hs_norm_pairs<I: IntoIterator<Item = (LatticeVec, C)>>(pairs: I, s: f64) -> f64 {
    pairs
        .into_iter()
        .map(|(n, a)| n.norm().max(1.0).powf(2.0 * s) * a.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn hs_norm(state: &SpectralState, trunc: &TruncationSet, s: f64) -> f64 {
    hs_norm_pairs(trunc.nodes.iter().copied().zip(state.coeffs.iter().copied()), s)
}

/// Same norm for a chain state placed on `m_k` and `m_k − l_k`.
pub fn chain_hs_norm(family: &FrequencyFamily, chain: &ChainState, s: f64) -> Result<f64> {
    let mut pairs = Vec::with_capacity(chain.p.len() + chain.s.len());
    for (k, &p) in chain.p.iter().enumerate() {
        pairs.push((family.m_at(k)?, C::new(p, 0.0)));
    }
    for (k, &v) in chain.s.iter().enumerate() {
        pairs.push((family.s_at(k)?, C::new(v, 0.0)));
    }
    Ok(hs_norm_pairs(pairs, s))
}

/// The chain state at `T_n`, built by applying whole moves. Independent of β.
pub fn cascade_state_at(k_max: usize, n: usize) -> Result<ChainState> {
    if n > k_max {
        return Err(Error::InvalidArgument(format!("T_{n} needs r_{n}, but the family stops at K = {k_max}")));
    }
    let mut st = ChainState::initial(k_max);
    for c in 0..n {
        for (kind, drive) in [(MoveKind::Move1, c), (MoveKind::Move2, c + 1), (MoveKind::Move3, c)] {
            let v = apply_move(st.triple(drive), &MoveSpec::new(kind, drive));
            st.set_triple(drive, v);
        }
    }
    Ok(st)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Paper-mode schedule evaluated in log space.
#[derive(Clone, Debug, Serialize)]
pub struct PaperTimeline {
    pub log_beta: Vec<f64>,
    /// `ln t_k`, plateau lengths.
    pub log_plateau: Vec<f64>,
    /// `ln T_n` for `n = 0..=cycles`; `T_0 = 0` maps to `−∞`.
    pub log_cycle_times: Vec<f64>,
}

impl PaperTimeline {
    /// Cycles may reach `K`: the timeline only needs `β_0..β_K`.
    pub fn new(family: &FrequencyFamily, cycles: usize, bump: &BumpProfile) -> Result<Self> {
        if cycles > family.k_max() {
            return Err(Error::InvalidArgument(format!(
                "{cycles} cycles need r_{cycles}, but the family stops at K = {}",
                family.k_max()
            )));
        }
        let alpha = bump.alpha();
        let mut log_beta = Vec::new();
        let mut log_plateau = Vec::new();
        for k in 0..=cycles {
            let lb = log_beta_paper(family.l[k].norm());
            let beta = lb.exp();
            // t_k = α(1/β − 2)
            if 2.0 * beta >= 1.0 {
                return Err(Error::NegativePlateau { kind: "every", drive: k, beta, plateau: alpha * (1.0 / beta - 2.0) });
            }
            log_beta.push(lb);
            log_plateau.push(alpha.ln() - lb + (1.0 - 2.0 * beta).ln());
        }
        let mut log_cycle_times = vec![f64::NEG_INFINITY];
        for n in 0..cycles {
            let prev = log_cycle_times[n];
            log_cycle_times.push(log_sum_exp(&[prev, 6f64.ln(), 2f64.ln() + log_plateau[n], log_plateau[n + 1]]));
        }
        Ok(PaperTimeline { log_beta, log_plateau, log_cycle_times })
    }

    pub fn cycles(&self) -> usize {
        self.log_cycle_times.len() - 1
    }

    /// `(kind, drive, ln t_end)` for the three plateaus of cycle `n`.
    pub fn plateau_ends(&self, n: usize) -> [(MoveKind, usize, f64); 3] {
        let (tn, a, b) = (self.log_cycle_times[n], self.log_plateau[n], self.log_plateau[n + 1]);
        let ln2 = 2f64.ln();
        [
            (MoveKind::Move1, n, log_sum_exp(&[tn, 0.0, a])),
            (MoveKind::Move2, n + 1, log_sum_exp(&[tn, 3f64.ln(), a, b])),
            (MoveKind::Move3, n, log_sum_exp(&[tn, 5f64.ln(), ln2 + a, b])),
        ]
    }
}

/// Constants of the growth chain, fitted over the generated range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthConstants {
    /// `C` in `T_n ≤ exp(Cⁿ n! log(Cⁿ n!))`.
    pub c_time: f64,
    /// `c` in `‖u‖_{H^s} ≥ c ((n−1)!)^s`.
    pub c_norm: f64,
    /// `c_{δ,s}` in the final `(log t)^{s(1−δ)}` form.
    pub c_final: f64,
    pub s: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthBound {
    pub log_t: f64,
    pub n_t: usize,
    /// `ln(c ((n(t)−1)!)^s)`, `−∞` when `n(t) = 0`.
    pub log_intermediate: f64,
    /// `ln(c_{δ,s} (log t)^{s(1−δ)})`, `−∞` when `n(t) = 0`.
    pub log_final: f64,
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln(Cⁿ n! log(Cⁿ n!))`, or `−∞` when the product is not positive.
fn log_time_envelope(c: f64, n: usize) -> f64 {
    let l = n as f64 * c.ln() + ln_factorial(n);
    if l <= 0.0 {
        f64::NEG_INFINITY
    } else {
        l + l.ln()
    }
}

/// Largest `n` with `Cⁿ n! log(Cⁿ n!) ≤ log t`, capped at `cap`.
pub fn cycles_reached(log_t: f64, c_time: f64, cap: usize) -> usize {
    if !(log_t > 0.0) {
        return 0;
    }
    let ll = log_t.ln();
    let mut n = 0;
    while n < cap && log_time_envelope(c_time, n + 1) <= ll {
        n += 1;
    }
    n
}

/// The growth lower bound at `ln t`, evaluated in log space.
pub fn growth_lower_bound_log(log_t: f64, k: &GrowthConstants) -> Result<GrowthBound> {
    if !(k.delta > 0.0 && k.delta < 1.0) || k.s < 0.0 {
        return Err(Error::InvalidArgument(format!("need 0 < δ < 1 and s ≥ 0, got δ = {}, s = {}", k.delta, k.s)));
    }
    let n_t = if log_t > 1.0 { cycles_reached(log_t, k.c_time, 10_000) } else { 0 };
    if n_t == 0 {
        return Ok(GrowthBound { log_t, n_t, log_intermediate: f64::NEG_INFINITY, log_final: f64::NEG_INFINITY });
    }
    let log_intermediate = k.c_norm.ln() + k.s * ln_factorial(n_t - 1);
    let log_final = k.c_final.ln() + k.s * (1.0 - k.delta) * log_t.ln();
    Ok(GrowthBound { log_t, n_t, log_intermediate, log_final })
}

pub fn growth_lower_bound(t: f64, k: &GrowthConstants) -> Result<GrowthBound> {
    growth_lower_bound_log(t.ln(), k)
}

/// Fits the growth constants on `n = 1..=timeline.cycles()`.
///
/// `C` is the smallest value with `ln T_n ≤ ln(Cⁿ n! log(Cⁿ n!))` for every
/// sampled `n`. `c = ε·c_m^s` with `ε = 1/√2` and `c_m = min |m_n|/(n−1)!`.
/// `c_{δ,s}` is the least-squares intercept of `ln(intermediate) − s(1−δ) ln ln T_n`.
pub fn fit_growth_constants(family: &FrequencyFamily, timeline: &PaperTimeline, s: f64, delta: f64) -> Result<GrowthConstants> {
    let n_max = timeline.cycles();
    if n_max == 0 {
        return Err(Error::InvalidArgument("fitting needs at least one cycle".into()));
    }
    let need = |c: f64| (1..=n_max).all(|n| log_time_envelope(c, n) >= timeline.log_cycle_times[n].ln());
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while !need(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument("no time constant below 1e6 dominates the timeline".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if need(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c_time = hi;
    let c_m = (1..=n_max)
        .map(|n| family.m_at(n).map(|m| m.norm().ln() - ln_factorial(n - 1)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .exp();
    let c_norm = std::f64::consts::FRAC_1_SQRT_2 * c_m.powf(s);
    let mut k = GrowthConstants { c_time, c_norm, c_final: 1.0, s, delta };
    let mut resid = Vec::new();
    for n in 1..=n_max {
        let b = growth_lower_bound_log(timeline.log_cycle_times[n], &k)?;
        if b.n_t > 0 {
            resid.push(b.log_intermediate - s * (1.0 - delta) * b.log_t.ln());
        }
    }
    if !resid.is_empty() {
        k.c_final = (resid.iter().sum::<f64>() / resid.len() as f64).exp();
    }
    Ok(k)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub log_t: f64,
    pub m_norm: f64,
    pub log_hs_norm: f64,
    pub bound: GrowthBound,
    pub passed: bool,
}

/// Compares `ln ‖a(T_n)‖_{H^s}` with both forms of the growth bound, `n = 1..=cycles`.
pub fn growth_check(family: &FrequencyFamily, timeline: &PaperTimeline, k: &GrowthConstants) -> Result<Vec<GrowthRow>> {
    let mut rows = Vec::new();
    for n in 1..=timeline.cycles() {
        let st = cascade_state_at(family.k_max(), n)?;
        let log_hs = chain_hs_norm(family, &st, k.s)?.ln();
        let bound = growth_lower_bound_log(timeline.log_cycle_times[n], k)?;
        let slack = LOG_SLACK * log_hs.abs().max(1.0);
        let passed = log_hs + slack >= bound.log_intermediate && log_hs + slack >= bound.log_final;
        rows.push(GrowthRow { n, log_t: bound.log_t, m_norm: family.m_at(n)?.norm(), log_hs_norm: log_hs, bound, passed });
    }
    Ok(rows)
}

/// `ln C − (ln t)^{1−δ} ln ln t`; `+∞` (no constraint) for `t ≤ e^e`.
pub fn decay_upper_bound_log(log_t: f64, delta: f64, log_c: f64) -> f64 {
    if !(log_t > std::f64::consts::E) {
        return f64::INFINITY;
    }
    log_c - log_t.powf(1.0 - delta) * log_t.ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub cycle: usize,
    pub drive: usize,
    #[serde(rename = "move")]
    pub kind: MoveKind,
    pub log_norm: f64,
    pub log_t_end: f64,
    pub log_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayCheck {
    pub s: f64,
    pub m: usize,
    pub delta: f64,
    pub first_cycle: usize,
    /// `ln C_{δ,m,s}`, calibrated on the plateaus of `first_cycle`.
    pub log_c: f64,
    pub rows: Vec<DecayRow>,
    /// Maximum plateau value per cycle from `first_cycle` on.
    pub cycle_max: Vec<f64>,
    pub decreasing: bool,
    pub below: bool,
}

impl DecayCheck {
    pub fn passed(&self) -> bool {
        self.decreasing && self.below
    }
}

/// Plateau values of `ln ‖∂_t^m V‖_{H^s}` in paper mode against the decay
/// bound. The constant is calibrated on cycle `first_cycle` and every later
/// plateau must sit at or below the curve at its plateau end.
pub fn decay_check(family: &FrequencyFamily, timeline: &PaperTimeline, bump: &BumpProfile, s: f64, m: usize, delta: f64, first_cycle: usize) -> Result<DecayCheck> {
    if first_cycle >= timeline.cycles() {
        return Err(Error::InvalidArgument(format!(
            "decay check from cycle {first_cycle} needs more than {} cycles",
            timeline.cycles()
        )));
    }
    let alpha = bump.alpha();
    let mut rows = Vec::new();
    for n in first_cycle..timeline.cycles() {
        for (kind, drive, log_t_end) in timeline.plateau_ends(n) {
            let log_norm = plateau_log_norm(family.l[drive].norm(), timeline.log_beta[drive], kind.required_integral(), alpha, s, m);
            rows.push(DecayRow { cycle: n, drive, kind, log_norm, log_t_end, log_bound: 0.0 });
        }
    }
    let shape = |lt: f64| decay_upper_bound_log(lt, delta, 0.0);
    let log_c = rows
        .iter()
        .filter(|r| r.cycle == first_cycle)
        .map(|r| r.log_norm - shape(r.log_t_end))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut below = true;
    for r in &mut rows {
        r.log_bound = decay_upper_bound_log(r.log_t_end, delta, log_c);
        below &= r.log_norm <= r.log_bound + LOG_SLACK * r.log_bound.abs().max(1.0);
    }
    let cycle_max: Vec<f64> = (first_cycle..timeline.cycles())
        .map(|n| rows.iter().filter(|r| r.cycle == n).map(|r| r.log_norm).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let decreasing = cycle_max.windows(2).all(|w| w[1] < w[0]);
    Ok(DecayCheck { s, m, delta, first_cycle, log_c, rows, cycle_max, decreasing, below })
}

/// Time series behind the Gronwall estimate for the perturbation.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaBetaSeries {
    pub times: Vec<f64>,
    /// Sum of `|∫_t^{T_N} a_m r_k e^{-iωs} ds|` over non-resonant pairs.
    pub alpha: Vec<f64>,
    /// `4 |r_{l(t)}(t)|`.
    pub beta: Vec<f64>,
    /// `∫_0^t β`.
    pub beta_integral: Vec<f64>,
    /// Smallest `k` with `t ≤ T_{k+1}`.
    pub k_of_t: Vec<usize>,
    /// Fitted `C` in `α(t) ≤ C β_{k(t)}`.
    pub c_alpha: f64,
    /// Fitted `C` in `∫_0^t β ≤ C (k(t) + 1)`.
    pub c_beta: f64,
    pub alpha_bound_holds: bool,
    pub beta_bound_holds: bool,
}

struct Integrand {
    drive: usize,
    /// Index into the chain state: `p_k` for `Ok(k)`, `s_k` for `Err(k)`.
    node: std::result::Result<usize, usize>,
    omega: f64,
    sign: f64,
}

/// α(t) and β(t) over `samples` (sorted, within the horizon) by
/// Gauss–Legendre quadrature resolving every oscillation.
pub fn alpha_beta_estimates(spec: &PotentialSpec, samples: &[f64]) -> Result<AlphaBetaSeries> {
    let sched = &spec.schedule;
    let fam = &spec.family;
    let horizon = sched.horizon();
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::InvalidArgument(format!("samples must be sorted within [0, {horizon}]")));
    }
    let max_drive = sched.max_drive().unwrap_or(0);
    let mut integrands: Vec<Integrand> = Vec::new();
    for k in 0..=max_drive {
        let l = fam.l[k];
        // the chain only ever populates p_0..p_{N+1} and s_0..s_N
        let nodes = (0..=(max_drive + 1).min(fam.k_max() + 1))
            .map(|j| Ok((Ok(j), fam.m_at(j)?)))
            .chain((0..=max_drive.min(fam.k_max())).map(|j| Ok((Err(j), fam.s_at(j)?))))
            .collect::<Result<Vec<_>>>()?;
        for (node, m) in nodes {
            for n in [m.add(l)?, m.sub(l)?] {
                let wp = omega_plus(m, n)?;
                let wm = omega_minus(m, n)?;
                if wp != 0 {
                    integrands.push(Integrand { drive: k, node, omega: wp as f64, sign: 1.0 });
                }
                if wm != 0 {
                    integrands.push(Integrand { drive: k, node, omega: wm as f64, sign: -1.0 });
                }
            }
        }
    }
    let init = ChainState::initial(fam.k_max());
    let mut cuts = sched.breakpoints();
    cuts.extend_from_slice(samples);
    cuts.push(0.0);
    cuts.push(horizon);
    cuts.retain(|&t| (0.0..=horizon).contains(&t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // integral of each integrand over each interval [cuts[i], cuts[i+1]]
    let mut pieces = vec![vec![C::new(0.0, 0.0); integrands.len()]; cuts.len().saturating_sub(1)];
    let mut beta_pieces = vec![0.0; cuts.len().saturating_sub(1)];
    for (i, w) in cuts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let Some(seg) = sched.segment_index(0.5 * (a + b)).filter(|_| 0.5 * (a + b) < horizon) else { continue };
        let k = sched.segments[seg].drive_index;
        beta_pieces[i] = integrate(a, b, |t| 4.0 * sched.segment_value(seg, t).abs());
        let active: Vec<usize> = (0..integrands.len()).filter(|&j| integrands[j].drive == k).collect();
        let w_max = active.iter().map(|&j| integrands[j].omega.abs()).fold(1.0, f64::max);
        let panels = ((b - a) * w_max / std::f64::consts::PI).ceil().max(1.0) as usize;
        let hp = (b - a) / panels as f64;
        let (x, wt) = crate::quad::gl20();
        for p in 0..panels {
            let (pa, pb) = (a + p as f64 * hp, a + (p + 1) as f64 * hp);
            let (mid, half) = (0.5 * (pa + pb), 0.5 * (pb - pa));
            for (xi, wi) in x.iter().zip(wt) {
                let t = mid + half * xi;
                let st = propagate_exact(sched, &init, t)?;
                let r = sched.segment_value(seg, t);
                for &j in &active {
                    let g = &integrands[j];
                    let amp = match g.node {
                        Ok(q) => st.p[q],
                        Err(q) => st.s[q],
                    };
                    if amp == 0.0 {
                        continue;
                    }
                    let ph = crate::phase::integer_phase(g.omega as i128, t);
                    pieces[i][j] += half * wi * g.sign * amp * r * C::from_polar(1.0, -ph);
                }
            }
        }
    }
    // tails ∫_{cuts[i]}^{T_N} by backward accumulation
    let mut tail = vec![C::new(0.0, 0.0); integrands.len()];
    let mut alpha_at = vec![0.0; cuts.len()];
    for i in (0..cuts.len()).rev() {
        if i < pieces.len() {
            for (acc, p) in tail.iter_mut().zip(&pieces[i]) {
                *acc += p;
            }
        }
        alpha_at[i] = tail.iter().map(|z| z.norm()).sum();
    }
    let mut head = vec![0.0; cuts.len()];
    for i in 1..cuts.len() {
        head[i] = head[i - 1] + beta_pieces[i - 1];
    }
    let at = |t: f64| cuts.binary_search_by(|c| c.total_cmp(&t)).expect("sample times are cut points");
    let mut out = AlphaBetaSeries {
        times: samples.to_vec(),
        alpha: vec![],
        beta: vec![],
        beta_integral: vec![],
        k_of_t: vec![],
        c_alpha: 0.0,
        c_beta: 0.0,
        alpha_bound_holds: true,
        beta_bound_holds: true,
    };
    for &t in samples {
        let i = at(t);
        out.alpha.push(alpha_at[i]);
        out.beta.push(sched.active_drive(t).map_or(0.0, |a| 4.0 * a.value.abs()));
        out.beta_integral.push(head[i]);
        let k = (0..sched.cycles()).find(|&k| t <= sched.cycle_times[k + 1]).unwrap_or(sched.cycles());
        out.k_of_t.push(k);
    }
    for i in 0..samples.len() {
        let bk = sched.beta.get(out.k_of_t[i]).copied().unwrap_or(0.0);
        if bk > 0.0 {
            out.c_alpha = out.c_alpha.max(out.alpha[i] / bk);
        } else if out.alpha[i] > 0.0 {
            out.alpha_bound_holds = false;
        }
        out.c_beta = out.c_beta.max(out.beta_integral[i] / (out.k_of_t[i] + 1) as f64);
    }
    Ok(out)
}

impl AlphaBetaSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,alpha,beta,beta_integral,k\n");
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                self.times[i], self.alpha[i], self.beta[i], self.beta_integral[i], self.k_of_t[i]
            ));
        }
        s
    }
}

/// `‖a(t)‖_{H^s}` and `‖b(t)‖_{H^s}` at the report sample times.
#[derive(Clone, Debug, Serialize)]
pub struct NormSeries {
    pub s: f64,
    pub resonant: Vec<f64>,
    pub full: Vec<f64>,
}

/// `ln ‖∂_t^m V(t)‖_{H^s}` along the simulated schedule (`−∞` off support).
#[derive(Clone, Debug, Serialize)]
pub struct PotentialSeries {
    pub s: f64,
    pub m: usize,
    pub log_norm: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputChecksum {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub inputs: Vec<InputChecksum>,
    pub sample_times: Vec<f64>,
    pub norms: Vec<NormSeries>,
    pub potential: Vec<PotentialSeries>,
    pub cycle_times: Vec<f64>,
    /// `|m_n|` for `n = 0..=cycles + 1`.
    pub m_norms: Vec<f64>,
    pub growth_constants: GrowthConstants,
    pub growth: Vec<GrowthRow>,
    pub decay: Vec<DecayCheck>,
    pub alpha_beta: Option<AlphaBetaSeries>,
    pub criteria: Vec<crate::criteria::CriterionOutcome>,
}

fn fmt_log(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.10e}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl GrowthReport {
    pub fn to_json(&self) -> Result<String> {
        // −∞ is not JSON; serde_json writes null for non-finite floats
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != crate::criteria::Status::Fail)
    }

    /// `t` against `ln ‖·‖_{H^s}` of the resonant and full solutions.
    pub fn norms_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.norms {
            out.push_str(&format!(",log_hs_a_s{0},log_hs_b_s{0}", n.s));
        }
        out.push('\n');
        for (i, t) in self.sample_times.iter().enumerate() {
            out.push_str(&format!("{t:.12e}"));
            for n in &self.norms {
                out.push_str(&format!(",{},{}", fmt_log(n.resonant[i].ln()), fmt_log(n.full[i].ln())));
            }
            out.push('\n');
        }
        out
    }

    /// `t` against `ln ‖∂_t^m V‖_{H^s}`.
    pub fn potential_csv(&self) -> String {
        let mut out = String::from("t");
        for p in &self.potential {
            out.push_str(&format!(",log_v_s{}_m{}", p.s, p.m));
        }
        out.push('\n');
        for (i, t) in self.sample_times.iter().enumerate() {
            out.push_str(&format!("{t:.12e}"));
            for p in &self.potential {
                out.push_str(&format!(",{}", fmt_log(p.log_norm[i])));
            }
            out.push('\n');
        }
        out
    }

    /// Paper-mode growth chain: `ln T_n`, the solution norm and both bounds.
    pub fn growth_csv(&self) -> String {
        let mut out = String::from("n,log_T,m_norm,log_hs,n_of_t,log_bound_intermediate,log_bound_final,pass\n");
        for r in &self.growth {
            out.push_str(&format!(
                "{},{},{:.10e},{},{},{},{},{}\n",
                r.n,
                fmt_log(r.log_t),
                r.m_norm,
                fmt_log(r.log_hs_norm),
                r.bound.n_t,
                fmt_log(r.bound.log_intermediate),
                fmt_log(r.bound.log_final),
                r.passed
            ));
        }
        out
    }

    /// Paper-mode plateau log-norms of `V` against the decay curve.
    pub fn decay_csv(&self) -> String {
        let mut out = String::from("s,m,cycle,drive,move,log_norm,log_t_end,log_bound\n");
        for d in &self.decay {
            for r in &d.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    d.s,
                    d.m,
                    r.cycle,
                    r.drive,
                    r.kind.name(),
                    fmt_log(r.log_norm),
                    fmt_log(r.log_t_end),
                    fmt_log(r.log_bound)
                ));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        o.push_str("growth report\n\ninputs\n");
        for c in &self.inputs {
            o.push_str(&format!("  {}  sha256 {}\n", c.file, c.sha256));
        }
        o.push_str("\ncycle boundaries\n");
        for (n, t) in self.cycle_times.iter().enumerate() {
            o.push_str(&format!("  T_{n} = {t}   |m_{n}| = {:.6e}\n", self.m_norms[n]));
        }
        o.push_str("\nsolution norms at the cycle boundaries (resonant a, full b)\n");
        for (n, t) in self.cycle_times.iter().enumerate() {
            let Some(i) = self.sample_times.iter().position(|x| x == t) else { continue };
            for ns in &self.norms {
                o.push_str(&format!("  T_{n}  H^{}: a {:.6e}  b {:.6e}\n", ns.s, ns.resonant[i], ns.full[i]));
            }
        }
        let k = &self.growth_constants;
        o.push_str(&format!(
            "\npaper-mode growth chain (log space, s = {}, delta = {})\n  fitted C = {:.6}, c = {:.6}, c_delta = {:.6e}\n",
            k.s, k.delta, k.c_time, k.c_norm, k.c_final
        ));
        for r in &self.growth {
            o.push_str(&format!(
                "  n = {:>2}: ln T_n = {:.4e}, ln ||a||_H^s = {:.4}, n(t) = {}, ln bound = {} / {}  {}\n",
                r.n,
                r.log_t,
                r.log_hs_norm,
                r.bound.n_t,
                fmt_log(r.bound.log_intermediate),
                fmt_log(r.bound.log_final),
                if r.passed { "ok" } else { "VIOLATED" }
            ));
        }
        o.push_str("\npaper-mode potential decay\n");
        for d in &self.decay {
            o.push_str(&format!(
                "  s = {}, m = {}: ln C = {:.4}, decreasing {}, below curve {}\n",
                d.s, d.m, d.log_c, d.decreasing, d.below
            ));
        }
        if let Some(ab) = &self.alpha_beta {
            o.push_str(&format!(
                "\nGronwall inputs: fitted C in alpha <= C beta_k(t): {:.4e}; fitted C in int beta <= C (k+1): {:.4}\n",
                ab.c_alpha, ab.c_beta
            ));
        }
        o.push_str("\nacceptance criteria\n");
        for c in &self.criteria {
            o.push_str(&format!("  {c}\n"));
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::default_bump;
    use crate::lattice::construct_family;
    use crate::schedule::{build_schedule, BetaMode};

    fn family() -> FrequencyFamily {
        construct_family(LatticeVec::new(1, 0), 10).unwrap()
    }

    #[test]
    fn single_mode_and_l2() {
        let n = LatticeVec::new(3, 4);
        assert!((hs_norm_pairs([(n, C::new(0.6, 0.8))], 2.0) - 25.0).abs() < 1e-12);
        assert_eq!(hs_norm_pairs([(LatticeVec::ZERO, C::new(1.0, 0.0))], 3.0), 1.0);
        let pairs = [(n, C::new(0.6, 0.0)), (LatticeVec::new(1, 0), C::new(0.0, 0.8))];
        assert!((hs_norm_pairs(pairs, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cascade_state_matches_exact_propagation() {
        let f = family();
        let sched = build_schedule(&f, 4, BetaMode::default()).unwrap();
        for n in 0..=4 {
            let a = cascade_state_at(10, n).unwrap();
            let b = propagate_exact(&sched, &ChainState::initial(10), sched.cycle_times[n]).unwrap();
            for (x, y) in a.p.iter().zip(&b.p).chain(a.s.iter().zip(&b.s)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_at_cycle_boundary_dominates_central_mode() {
        let f = family();
        for n in 0..=10 {
            let st = cascade_state_at(10, n).unwrap();
            assert!((st.mass() - 1.0).abs() < 1e-12);
            for s in [0.5, 1.0, 2.0] {
                let h = chain_hs_norm(&f, &st, s).unwrap();
                assert!(h >= std::f64::consts::FRAC_1_SQRT_2 * f.m_at(n).unwrap().norm().powf(s) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn timeline_agrees_with_direct_sum() {
        // t_0 = α(1/β_0 − 2) with β_0 = 2^{-2}: t_0 = 1
        let tl = PaperTimeline::new(&family(), 3, &default_bump()).unwrap();
        assert!(tl.log_plateau[0].abs() < 1e-14);
        let t: Vec<f64> = tl.log_plateau.iter().map(|x| x.exp()).collect();
        let t1 = 6.0 + 2.0 * t[0] + t[1];
        assert!((tl.log_cycle_times[1] - t1.ln()).abs() < 1e-13);
        let t2 = t1 + 6.0 + 2.0 * t[1] + t[2];
        assert!((tl.log_cycle_times[2] - t2.ln()).abs() < 1e-13);
        assert!(PaperTimeline::new(&family(), 11, &default_bump()).is_err());
    }

    #[test]
    fn growth_bound_shape() {
        let k = GrowthConstants { c_time: 2.0, c_norm: 0.7, c_final: 0.1, s: 1.0, delta: 0.5 };
        let small = growth_lower_bound(2.0, &k).unwrap();
        assert_eq!(small.n_t, 0);
        assert_eq!(small.log_intermediate, f64::NEG_INFINITY);
        let mut last = f64::NEG_INFINITY;
        for e in 1..200 {
            let b = growth_lower_bound_log(e as f64 * 5.0, &k).unwrap();
            assert!(b.log_intermediate >= last);
            last = b.log_intermediate;
        }
        let k0 = GrowthConstants { s: 0.0, ..k };
        let b = growth_lower_bound_log(1e4, &k0).unwrap();
        assert!((b.log_intermediate - 0.7f64.ln()).abs() < 1e-15);
        assert!((b.log_final - 0.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn smaller_delta_dominates_eventually() {
        let k = GrowthConstants { c_time: 2.0, c_norm: 1.0, c_final: 1.0, s: 2.0, delta: 0.5 };
        let k2 = GrowthConstants { delta: 0.3, ..k };
        let a = growth_lower_bound_log(1e6, &k).unwrap();
        let b = growth_lower_bound_log(1e6, &k2).unwrap();
        assert!(b.log_final > a.log_final);
    }

    #[test]
    fn decay_bound_shape() {
        assert_eq!(decay_upper_bound_log(2.0, 0.5, 0.0), f64::INFINITY);
        let mut last = f64::INFINITY;
        for i in 1..100 {
            let lt = 3.0 * 1.5f64.powi(i);
            let v = decay_upper_bound_log(lt, 0.5, 0.0);
            assert!(v < last);
            last = v;
            // bound · t^ε grows for ε = 0.01 once ln t is large
            if lt > 1e7 {
                assert!(v + 0.01 * lt > decay_upper_bound_log(lt / 1.5, 0.5, 0.0) + 0.01 * lt / 1.5);
            }
        }
    }

    #[test]
    fn paper_mode_growth_and_decay() {
        let f = family();
        let bump = default_bump();
        let tl = PaperTimeline::new(&f, 10, &bump).unwrap();
        let k = fit_growth_constants(&f, &tl, 1.0, 0.5).unwrap();
        let rows = growth_check(&f, &tl, &k).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.passed), "{rows:#?}");
        let tl9 = PaperTimeline::new(&f, 9, &bump).unwrap();
        for (s, m) in [(0.0, 0), (1.0, 2), (10.0, 0), (0.0, 5)] {
            let d = decay_check(&f, &tl9, &bump, s, m, 0.5, 2).unwrap();
            assert!(d.passed(), "s = {s}, m = {m}: {d:#?}");
        }
    }

    #[test]
    fn alpha_vanishes_after_last_drive_and_beta_is_four_r() {
        let f = construct_family(LatticeVec::new(1, 0), 4).unwrap();
        let sched = build_schedule(&f, 1, BetaMode::default()).unwrap();
        let spec = PotentialSpec::new(f, sched).unwrap();
        let h = spec.schedule.horizon();
        let samples = [0.0, 5.0, 20.0, 40.0, h];
        let ab = alpha_beta_estimates(&spec, &samples).unwrap();
        assert_eq!(ab.alpha[4], 0.0);
        assert!(ab.alpha[0] > 0.0);
        for (i, &t) in samples.iter().enumerate() {
            let r = spec.schedule.active_drive(t).map_or(0.0, |a| a.value);
            assert_eq!(ab.beta[i], 4.0 * r.abs());
        }
        assert!(ab.beta_integral.windows(2).all(|w| w[1] >= w[0]));
        // ∫β over cycle 0 = 4 Σ move integrals
        let total = 4.0 * (MoveKind::Move1.required_integral() + MoveKind::Move2.required_integral() + MoveKind::Move3.required_integral());
        assert!((ab.beta_integral[4] - total).abs() < 1e-10);
    }
}
