use super::*;
use crate::chain::chain_rhs;
use crate::lattice::construct_family;
use crate::schedule::{build_schedule, BetaMode};

fn spec(k: usize, cycles: usize) -> PotentialSpec {
    let f = construct_family(LatticeVec::new(1, 0), k).unwrap();
    let s = build_schedule(&f, cycles, BetaMode::default()).unwrap();
    PotentialSpec::new(f, s).unwrap()
}

fn pseudo_random_state(trunc: &TruncationSet, t: f64, seed: u64) -> SpectralState {
    let mut x = seed;
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let coeffs = (0..trunc.len()).map(|_| C::new(next(), next())).collect();
    SpectralState { t, coeffs }
}

#[test]
fn fs_derivative_conserves_mass() {
    let p = spec(6, 2);
    let tr = TruncationSet::build(&p.family, &[0, 1, 2], 2).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    for (seed, t) in [(1, 0.4), (2, 10.0), (3, 50.5), (4, 60.2)] {
        let st = pseudo_random_state(&tr, t, seed);
        let d = model.fs_rhs(&st).unwrap();
        let rate: f64 = st.coeffs.iter().zip(&d.values).map(|(a, b)| 2.0 * (a.conj() * b).re).sum();
        assert!(rate.abs() < 1e-12, "t = {t}: {rate}");
        let r = model.rfs_rhs(&st).unwrap();
        let rate: f64 = st.coeffs.iter().zip(&r).map(|(a, b)| 2.0 * (a.conj() * b).re).sum();
        assert!(rate.abs() < 1e-12);
    }
}

#[test]
fn fs_single_term() {
    let p = spec(6, 1);
    let tr = TruncationSet::build(&p.family, &[0, 1], 1).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let t = 5.3;
    let m = p.family.m[2];
    let l = p.family.l[0];
    let n = m.add(l).unwrap();
    let mut st = SpectralState::zeros(&tr, t);
    st.coeffs[tr.index_of(m).unwrap()] = C::new(1.0, 0.0);
    let d = model.fs_rhs(&st).unwrap();
    let r = p.schedule.drive_value(0, t);
    let (wp, wm) = (omega_plus(m, n).unwrap() as f64, omega_minus(m, n).unwrap() as f64);
    let want = r * (C::from_polar(1.0, -wp * t) - C::from_polar(1.0, -wm * t));
    assert!((d.values[tr.index_of(n).unwrap()] - want).norm() < 1e-12);
    let zero = model.fs_rhs(&SpectralState { t: p.schedule.horizon() + 1.0, coeffs: st.coeffs.clone() }).unwrap();
    assert!(zero.values.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn rfs_on_chain_nodes_is_chain_rhs() {
    let p = spec(6, 3);
    let tr = TruncationSet::build(&p.family, &[0, 1, 2, 3], 1).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let kk = p.family.k_max();
    let mut chain = ChainState::zeros(kk);
    for (i, v) in chain.p.iter_mut().enumerate() {
        *v = (i as f64 * 0.37).sin();
    }
    for (i, v) in chain.s.iter_mut().enumerate() {
        *v = (i as f64 * 0.91 + 0.2).cos();
    }
    for &t in &[0.5, 5.0, 21.0, 60.0, 130.0] {
        let st = SpectralState::from_chain(&tr, &chain, t).unwrap();
        let d = model.rfs_rhs(&st).unwrap();
        let mut r = vec![0.0; kk + 1];
        if let Some(a) = p.schedule.active_drive(t) {
            r[a.drive] = a.value;
        }
        let want = SpectralState::from_chain(&tr, &chain_rhs(&chain, &r).unwrap(), t).unwrap();
        for (a, b) in d.iter().zip(&want.coeffs) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}

#[test]
fn rfs_stays_on_chain_support() {
    let p = spec(5, 2);
    let tr = TruncationSet::build(&p.family, &[0, 1, 2], 2).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let a0 = model.resonant_state(0.0).unwrap();
    let samples = [p.schedule.cycle_times[1], p.schedule.cycle_times[2]];
    let traj = model.integrate(RhsKind::Rfs, &a0, &samples, 1e-10).unwrap();
    let support: std::collections::HashSet<usize> = tr.p_nodes.iter().chain(&tr.s_nodes).copied().collect();
    for st in &traj.states {
        for (i, z) in st.coeffs.iter().enumerate() {
            if !support.contains(&i) {
                assert_eq!(*z, C::new(0.0, 0.0));
            }
        }
        let exact = model.resonant_state(st.t).unwrap();
        assert!(st.l1_distance(&exact) < 1e-8);
    }
}

/// Direct integration of `fs_rhs` on the whole set.
fn brute_force_fs(model: &SpectralModel, a: &SpectralState, t1: f64, tol: f64) -> Vec<C> {
    let sched = &model.spec.schedule;
    let mut y = a.coeffs.clone();
    let (lo, hi) = (a.t.min(t1), a.t.max(t1));
    let mut cuts: Vec<f64> = sched.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
    cuts.insert(0, lo);
    cuts.push(hi);
    if t1 < a.t {
        cuts.reverse();
    }
    let mut dp = Dop853::new(y.len());
    for w in cuts.windows(2) {
        let f = |t: f64, y: &[C], d: &mut [C]| {
            let st = SpectralState { t, coeffs: y.to_vec() };
            d.copy_from_slice(&model.fs_rhs(&st).unwrap().values);
        };
        dp.integrate(f, w[0], w[1], &mut y, Tolerance::uniform(tol), "brute force").unwrap();
    }
    y
}

#[test]
fn block_propagator_matches_brute_force() {
    let p = spec(5, 1);
    let tr = TruncationSet::build(&p.family, &[0, 1], 1).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let a0 = model.resonant_state(0.0).unwrap();
    let t1 = p.schedule.cycle_times[1];
    let brute = brute_force_fs(&model, &a0, t1, 1e-12);
    let traj = model.integrate(RhsKind::Fs, &a0, &[t1], 1e-12).unwrap();
    let got = &traj.states[0].coeffs;
    let err: f64 = got.iter().zip(&brute).map(|(a, b)| (a - b).norm()).sum();
    assert!(err < 1e-8, "l1 error {err}");
    assert!(traj.fs.unwrap().floquet_pieces > 0, "drive-1 plateau should use the period map");
    // backward returns to the start
    let back = model.integrate(RhsKind::Fs, &traj.states[0], &[0.0], 1e-12).unwrap();
    assert!(back.states[0].l1_distance(&a0) < 1e-8);
}

#[test]
fn period_map_matches_direct_on_drive_two() {
    let p = spec(6, 2);
    let tr = TruncationSet::build(&p.family, &[0, 1, 2], 1).unwrap();
    let g = p.schedule.groups()[4]; // second move of cycle 1 lights drive 2
    assert_eq!(g.drive, 2);
    let model = SpectralModel::new(&p, &tr).unwrap();
    let start = model.resonant_state(g.t_start).unwrap();
    let run = |opts: FsOptions| {
        let mut prop = FsPropagator::new(&p, &tr, opts).unwrap();
        let mut y = start.coeffs.clone();
        prop.propagate(&mut y, g.t_start, g.t_end).unwrap();
        (y, prop.counters)
    };
    let mut direct = FsOptions::new(1e-12);
    direct.plateau_min_periods = f64::INFINITY;
    direct.ramp_min_periods = f64::INFINITY;
    let mut floquet = FsOptions::new(1e-12);
    floquet.plateau_min_periods = 0.0;
    floquet.ramp_min_periods = 0.0;
    let (yd, cd) = run(direct);
    let (yf, cf) = run(floquet);
    assert_eq!(cd.floquet_pieces, 0);
    assert!(cf.floquet_pieces > 0);
    let err: f64 = yd.iter().zip(&yf).map(|(a, b)| (a - b).norm()).sum();
    assert!(err < 1e-8, "period map vs direct: {err}");
}

#[test]
fn pert_with_zero_forcing_stays_zero() {
    let p = spec(5, 1);
    let tr = TruncationSet::build(&p.family, &[0, 1], 1).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let h = p.schedule.horizon();
    let zero = SpectralState::zeros(&tr, h + 5.0);
    let traj = model.integrate(RhsKind::Pert, &zero, &[h + 2.0, h + 1.0], 1e-10).unwrap();
    for st in &traj.states {
        assert!(st.coeffs.iter().all(|z| z.norm() < 1e-15));
    }
    let d = model.pert_rhs(&zero, &model.resonant_state(h + 3.0).unwrap()).unwrap();
    assert!(d.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn pert_forcing_single_term() {
    // non-resonant target fed by an occupied chain node during drive 1
    let p = spec(5, 1);
    let tr = TruncationSet::build(&p.family, &[0, 1], 1).unwrap();
    let model = SpectralModel::new(&p, &tr).unwrap();
    let t = 25.0;
    assert_eq!(p.schedule.active_drive(t).unwrap().drive, 1);
    let a = model.resonant_state(t).unwrap();
    let zero = SpectralState::zeros(&tr, t);
    let d = model.pert_rhs(&zero, &a).unwrap();
    let chain: Vec<usize> = tr.p_nodes.iter().chain(&tr.s_nodes).copied().collect();
    let &src = chain.iter().max_by(|&&i, &&j| a.coeffs[i].norm().total_cmp(&a.coeffs[j].norm())).unwrap();
    let m = tr.nodes[src];
    let l = p.family.l[1];
    let n = [m.add(l).unwrap(), m.sub(l).unwrap()]
        .into_iter()
        .find(|n| tr.index_of(*n).is_some_and(|i| !chain.contains(&i)))
        .unwrap();
    let r = p.schedule.drive_value(1, t);
    let mut want = C::new(0.0, 0.0);
    for s in [n.add(l).unwrap(), n.sub(l).unwrap()] {
        let (wp, wm) = (omega_plus(s, n).unwrap(), omega_minus(s, n).unwrap());
        let (sp, cp) = integer_phase(wp, t).sin_cos();
        let (sm, cm) = integer_phase(wm, t).sin_cos();
        want += a.get(&tr, s) * r * C::new(cp - cm, sm - sp);
    }
    let got = d[tr.index_of(n).unwrap()];
    assert!(got.norm() > 1e-3);
    assert!((got - want).norm() < 1e-14, "{got} vs {want}");
}
