use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_cascade::lattice::{construct_family, LatticeVec};
use torus_cascade::potential::PotentialSpec;
use torus_cascade::quad::gl20;
use torus_cascade::schedule::{build_schedule, BetaMode};
use torus_cascade::spectral::{backward_perturbation, RhsKind, SpectralModel, TruncationSet};

const TOL: f64 = 1e-10;

fn one_cycle(shell_depth: usize) -> (PotentialSpec, TruncationSet) {
    let f = construct_family(LatticeVec::new(1, 0), 10).unwrap();
    let s = build_schedule(&f, 1, BetaMode::Scaled { base: 0.05, ratio: 0.5 }).unwrap();
    let trunc = TruncationSet::build(&f, &[0, 1], shell_depth).unwrap();
    (PotentialSpec::new(f, s).unwrap(), trunc)
}

#[test]
fn full_system_conserves_mass_over_a_cycle() {
    let (spec, trunc) = one_cycle(2);
    let model = SpectralModel::new(&spec, &trunc).unwrap();
    let a0 = model.resonant_state(0.0).unwrap();
    let t1 = spec.schedule.cycle_times[1];
    let samples: Vec<f64> = (1..=20).map(|i| t1 * i as f64 / 20.0).collect();
    let traj = model.integrate(RhsKind::Fs, &a0, &samples, TOL).unwrap();
    for st in &traj.states {
        let drift = (st.mass() - a0.mass()).abs();
        assert!(drift <= 100.0 * TOL, "mass drift {drift:.3e} at t = {}", st.t);
    }
}

/// `c(t) = −∫_t^{T_N} ċ ds` with `ċ` from the perturbation right-hand side,
/// checked by panel Gauss–Legendre quadrature over states from one backward solve.
#[test]
fn backward_perturbation_satisfies_its_integral_equation() {
    let (spec, trunc) = one_cycle(1);
    let model = SpectralModel::new(&spec, &trunc).unwrap();
    let sched = &spec.schedule;
    let t_n = sched.cycle_times[1];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut probes: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..t_n)).collect();
    probes.sort_by(f64::total_cmp);

    // only nodes reachable from the populated chain nodes ever carry amplitude
    let couplings: Vec<_> = [0, 1].iter().map(|&k| trunc.coupling(&spec.family, k).unwrap()).collect();
    let mut seen = vec![false; trunc.len()];
    let mut stack: Vec<usize> = trunc.p_nodes[..=2].iter().chain(&trunc.s_nodes[..=1]).copied().collect();
    let mut omega_max: f64 = 1.0;
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        for c in &couplings {
            for &(u, v) in &c.edges {
                if u == i || v == i {
                    let w = (trunc.energy[u] - trunc.energy[v]).abs() + c.energy_l;
                    omega_max = omega_max.max(w as f64);
                    stack.push(if u == i { v } else { u });
                }
            }
        }
    }
    // panel edges: probes, schedule breakpoints, then subdivided below half the fastest period
    let max_width = std::f64::consts::PI / omega_max;
    let mut edges: Vec<f64> = probes.iter().copied().chain(sched.breakpoints()).filter(|&t| t <= t_n).collect();
    edges.push(t_n);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut panels = Vec::new();
    for w in edges.windows(2) {
        let n = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / n as f64;
        panels.extend((0..n).map(|i| (w[0] + i as f64 * h, w[0] + (i + 1) as f64 * h)));
    }
    let (x, wt) = gl20();
    let nodes: Vec<f64> = panels
        .iter()
        .flat_map(|&(a, b)| x.iter().map(move |xi| 0.5 * (a + b) + 0.5 * (b - a) * xi))
        .collect();
    let mut times = nodes.clone();
    times.extend(&probes);
    let states = backward_perturbation(&model, 1, &times, TOL).unwrap();
    let (at_nodes, at_probes) = states.split_at(nodes.len());

    // ∫ over each panel, then tails from every probe to T_N
    let dim = trunc.len();
    let mut panel_integrals = Vec::with_capacity(panels.len());
    for (p, &(a, b)) in panels.iter().enumerate() {
        let mut acc = vec![Complex64::new(0.0, 0.0); dim];
        for (j, wj) in wt.iter().enumerate() {
            let c = &at_nodes[p * x.len() + j];
            let res = model.resonant_state(c.t).unwrap();
            let d = model.pert_rhs(c, &res).unwrap();
            for (s, v) in acc.iter_mut().zip(d) {
                *s += v * (0.5 * (b - a) * wj);
            }
        }
        panel_integrals.push(acc);
    }
    let mut worst: f64 = 0.0;
    for (probe, c) in probes.iter().zip(at_probes) {
        let mut residual = c.coeffs.clone();
        for (&(a, _), integral) in panels.iter().zip(&panel_integrals) {
            if a >= *probe {
                for (r, v) in residual.iter_mut().zip(integral) {
                    *r += v;
                }
            }
        }
        let norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    assert!(at_probes.iter().any(|c| c.l1_norm() > 1e-4), "perturbation should be nontrivial");
    assert!(worst <= 10.0 * TOL, "integral-equation residual {worst:.3e}");
}
