//! Acceptance suite: every criterion at its stated setting and tolerance,
//! each paired with an oracle computed here independently of the library
//! path it checks. Prints one line per criterion; exits nonzero if any fail.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_cascade::chain::{apply_move, coupling_matrix, exp_ta, ChainState, MoveKind, MoveSpec};
use torus_cascade::criteria::{self, CriteriaConfig, CriterionOutcome};
use torus_cascade::lattice::{construct_family, verify_properties, FrequencyFamily, LatticeVec};
use torus_cascade::potential::PotentialSpec;
use torus_cascade::quad::gl20;
use torus_cascade::schedule::{build_schedule, BetaMode, Schedule};
use torus_cascade::spectral::{RhsKind, SpectralModel, SpectralState, TruncationSet};

type Oracle = Result<String, String>;

const R: f64 = FRAC_1_SQRT_2;
const SCALED: BetaMode = BetaMode::Scaled { base: 0.05, ratio: 0.5 };

fn check(ok: bool, msg: String) -> Oracle {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn family() -> FrequencyFamily {
    construct_family(LatticeVec::new(1, 0), 10).unwrap()
}

fn schedule(cycles: usize) -> Schedule {
    build_schedule(&family(), cycles, SCALED).unwrap()
}

/// `(p_{n+1}, p_n, s_n) = (1/2, −1/√2, 1/2)`, zero elsewhere.
fn pattern(n: usize) -> ChainState {
    let mut st = ChainState::zeros(10);
    st.set_triple(n, [0.5, -R, 0.5]);
    st
}

fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Generic exponential by scaling and squaring of a 30-term Taylor sum.
fn taylor_exp(m: Matrix3<f64>) -> Matrix3<f64> {
    let squarings = max_abs(&m).log2().ceil().max(0.0) as i32 + 4;
    let x = m / 2f64.powi(squarings);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..30 {
        term = term * x / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

fn move_oracle() -> Oracle {
    let cases = [
        (MoveKind::Move1, [0.5, -R, 0.5], [R, 0.0, R]),
        (MoveKind::Move2, [0.0, 1.0, 0.0], [R, 0.0, R]),
        (MoveKind::Move3, [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]),
    ];
    let mut worst: f64 = 0.0;
    for (kind, input, want) in cases {
        let out = apply_move(input, &MoveSpec::new(kind, 3));
        let generic = taylor_exp(coupling_matrix() * kind.required_integral()) * nalgebra::Vector3::from(input);
        for i in 0..3 {
            worst = worst.max((out[i] - want[i]).abs()).max((generic[i] - want[i]).abs());
        }
    }
    check(worst <= 1e-12, format!("table and Taylor exponential agree to {worst:.1e}"))
}

fn matrix_oracle() -> Oracle {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let (mut diff, mut orth): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let t: f64 = rng.random_range(-10.0..=10.0);
        let m = exp_ta(t);
        diff = diff.max(max_abs(&(m - taylor_exp(coupling_matrix() * t))));
        orth = orth.max(max_abs(&(m.transpose() * m - Matrix3::identity())));
    }
    check(diff <= 1e-10 && orth <= 1e-12, format!("Taylor oracle diff {diff:.1e}, orthogonality {orth:.1e}"))
}

fn family_oracle() -> Oracle {
    let start = Instant::now();
    let f = family();
    let certified = verify_properties(&f).unwrap().all_passed();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    if f.a_choices != (2..=12).collect::<Vec<u64>>() {
        problems.push(format!("multipliers {:?}", f.a_choices));
    }
    if f.m[..4] != [LatticeVec::new(1, 0), LatticeVec::new(1, 2), LatticeVec::new(-5, 5), LatticeVec::new(-25, -15)] {
        problems.push("m_0..m_3 changed".into());
    }
    for n in 0..=10 {
        let (m, l) = (f.m[n], f.l[n]);
        if m.x * l.x + m.y * l.y != 0 {
            problems.push(format!("m_{n} not orthogonal to l_{n}"));
        }
        if f.m_at(n + 1).unwrap() != LatticeVec::new(m.x + l.x, m.y + l.y) {
            problems.push(format!("m_{} ≠ m_{n} + l_{n}", n + 1));
        }
        for j in (0..=10).filter(|&j| j != n) {
            if m.x * f.l[j].x + m.y * f.l[j].y == 0 {
                problems.push(format!("m_{n} orthogonal to l_{j}"));
            }
        }
        // |l_n|² = (n+2)² |m_n|², so the ratio n+2 lies in [n, 3n] for n ≥ 1
        let (mm, ll) = (m.x * m.x + m.y * m.y, l.x * l.x + l.y * l.y);
        let k = n as i128 + 2;
        if n >= 1 && ll != k * k * mm {
            problems.push(format!("|l_{n}|/|m_{n}| ≠ {k}"));
        }
    }
    if !certified {
        problems.push("certification failed".into());
    }
    if elapsed >= Duration::from_secs(1) {
        problems.push(format!("construction and certification took {elapsed:?}"));
    }
    check(problems.is_empty(), if problems.is_empty() { "integer identities and frozen values hold".into() } else { problems.join("; ") })
}

/// Resonance as Pythagoras: `a_n` meets `a_m` through `l = n − m` resonantly
/// exactly when one of `|n|², |m|²` is the sum of the other and `|l|²`.
fn pythagorean(u: LatticeVec, v: LatticeVec, l: LatticeVec) -> bool {
    let sq = |w: LatticeVec| w.x * w.x + w.y * w.y;
    sq(u) == sq(v) + sq(l) || sq(v) == sq(u) + sq(l)
}

fn reduction_oracle() -> Oracle {
    let f = family();
    let mut chain: Vec<LatticeVec> = (0..=11).map(|j| f.m_at(j).unwrap()).collect();
    chain.extend((0..=10).map(|j| LatticeVec::new(f.m[j].x - f.l[j].x, f.m[j].y - f.l[j].y)));
    let expected = |u: LatticeVec, v: LatticeVec, j: usize| {
        let (mj, s) = (f.m[j], chain[12 + j]);
        let next = chain[j + 1];
        (u == mj && (v == next || v == s)) || (v == mj && (u == next || u == s))
    };
    let mut found = 0;
    let mut problems = Vec::new();
    for &u in &chain {
        for (j, &l) in f.l.iter().enumerate() {
            for v in [LatticeVec::new(u.x + l.x, u.y + l.y), LatticeVec::new(u.x - l.x, u.y - l.y)] {
                let res = pythagorean(u, v, l);
                if res && !chain.contains(&v) {
                    problems.push(format!("{u} resonates with {v} outside the chain via l_{j}"));
                } else if res != expected(u, v, j) {
                    problems.push(format!("{u} – {v} via l_{j}: resonant {res}"));
                }
                found += usize::from(res);
            }
        }
    }
    // 11 drives, two undirected edges each, seen from both ends
    if found != 44 {
        problems.push(format!("{found} directed resonant edges, expected 44"));
    }
    check(problems.is_empty(), if problems.is_empty() { format!("{found} directed edges, all chain edges") } else { problems.join("; ") })
}

/// `∫ r_k` over one move group by composite Gauss–Legendre on each phase.
fn group_integral_by_quadrature(s: &Schedule, drive: usize, bounds: [f64; 4]) -> f64 {
    let (x, w) = gl20();
    let mut total = 0.0;
    for ph in bounds.windows(2) {
        let panels = 32;
        let h = (ph[1] - ph[0]) / panels as f64;
        for p in 0..panels {
            let mid = ph[0] + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w) {
                total += 0.5 * h * wi * s.drive_value(drive, mid + 0.5 * h * xi);
            }
        }
    }
    total
}

fn induction_oracle() -> Oracle {
    let s = schedule(4);
    let mut st = ChainState::initial(10);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for g in s.groups() {
        let integral = group_integral_by_quadrature(&s, g.drive, g.phase_boundaries());
        let v = (coupling_matrix() * integral).exp() * nalgebra::Vector3::from(st.triple(g.drive));
        st.set_triple(g.drive, [v[0], v[1], v[2]]);
        if s.cycle_times.iter().position(|&t| t == g.t_end) == Some(n + 1) {
            n += 1;
            let want = pattern(n);
            for (a, b) in st.p.iter().zip(&want.p).chain(st.s.iter().zip(&want.s)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(n == 4 && worst <= 1e-12, format!("quadrature and generic exponential reach the pattern at {n} boundaries, error {worst:.1e}"))
}

fn integrator_oracle() -> Oracle {
    let tol = 1e-10;
    let s = schedule(4);
    let spec = PotentialSpec::new(family(), s).unwrap();
    let trunc = TruncationSet::build(&spec.family, &[0, 1, 2, 3, 4], 0).unwrap();
    let model = SpectralModel::new(&spec, &trunc).unwrap();
    let a0 = SpectralState::from_chain(&trunc, &ChainState::initial(10), 0.0).unwrap();
    let times = spec.schedule.cycle_times[1..].to_vec();
    let traj = model.integrate(RhsKind::Rfs, &a0, &times, tol).unwrap();
    let mut err: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for (n, st) in traj.states.iter().enumerate() {
        let want = SpectralState::from_chain(&trunc, &pattern(n + 1), st.t).unwrap();
        err = err.max(st.l1_distance(&want));
        drift = drift.max((st.mass() - 1.0).abs());
    }
    check(err <= 10.0 * tol && drift <= 1e-9, format!("RFS vs hardcoded pattern {err:.1e}, mass drift {drift:.1e}"))
}

fn growth_oracle() -> Oracle {
    let f = family();
    let sq = |w: LatticeVec| (w.x * w.x + w.y * w.y) as f64;
    let mut min_ratio = f64::INFINITY;
    for n in 0..=4 {
        let s_n = LatticeVec::new(f.m[n].x - f.l[n].x, f.m[n].y - f.l[n].y);
        // H¹ weight max(1, |k|)² is |k|² here since every populated mode is nonzero
        let h1 = (0.25 * sq(f.m_at(n + 1).unwrap()) + 0.5 * sq(f.m[n]) + 0.25 * sq(s_n)).sqrt();
        min_ratio = min_ratio.min(h1 / (R * sq(f.m[n]).sqrt()));
    }
    let frozen = 6f64.sqrt();
    check(min_ratio >= 1.0 && (min_ratio - frozen).abs() <= 1e-12, format!("pattern H¹ ratio min {min_ratio:.6} (frozen √6 at n = 0)"))
}

fn no_oracle() -> Oracle {
    Ok("library measurement only".into())
}

fn main() -> ExitCode {
    let cfg = CriteriaConfig::default();
    let runs: [(u8, fn() -> Oracle); 10] = [
        (1, move_oracle),
        (2, matrix_oracle),
        (3, family_oracle),
        (4, reduction_oracle),
        (5, induction_oracle),
        (6, integrator_oracle),
        (7, growth_oracle),
        (8, no_oracle),
        (9, no_oracle),
        (10, no_oracle),
    ];
    let mut failed = 0;
    for (id, oracle) in runs {
        let start = Instant::now();
        let outcome: CriterionOutcome = criteria::evaluate(id, &cfg);
        let oracle = oracle();
        let ok = outcome.passed() && oracle.is_ok();
        failed += usize::from(!ok);
        let note = match &oracle {
            Ok(m) => format!("oracle ok: {m}"),
            Err(m) => format!("oracle FAILED: {m}"),
        };
        println!(
            "acceptance {id:>2} {}: {} | {note} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            outcome,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
