//! The family → schedule → simulate → report stages behind the CLI.
//!
//! Each stage reads its predecessor's artifacts from the output directory,
//! so stages can be rerun independently. Nothing here reads the clock or a
//! random source: identical configuration gives identical bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    alpha_beta_estimates, decay_check, fit_growth_constants, growth_check, hs_norm_pairs, GrowthReport, InputChecksum, NormSeries,
    PaperTimeline, PotentialSeries,
};
use crate::bump::default_bump;
use crate::chain::{propagate_exact, ChainState};
use crate::config::RunConfig;
use crate::criteria::evaluate_all;
use crate::error::{Error, Result};
use crate::lattice::{construct_family, reduced_interactions, verify_properties, FrequencyFamily, LatticeVec};
use crate::potential::PotentialSpec;
use crate::schedule::{build_schedule, Schedule};
use crate::spectral::truncation::TruncationSet;
use crate::spectral::{RhsKind, RunMetadata, SpectralModel, SpectralState, Trajectory, DETERMINISM_STATEMENT};

pub const FAMILY_FILE: &str = "family.json";
pub const CERTIFICATE_FILE: &str = "certification.txt";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const DRIVES_FILE: &str = "drives.csv";
pub const CHAIN_FILE: &str = "chain_exact.csv";
pub const RFS_FILE: &str = "rfs.csv";
pub const FS_FILE: &str = "fs.csv";
pub const PERT_FILE: &str = "pert.csv";
pub const DEVIATION_FILE: &str = "deviation.csv";
pub const METADATA_FILE: &str = "metadata.json";

/// What a stage produced. `verified` is false when a check the stage owns
/// failed (a property, an acceptance criterion) even though files were written.
#[derive(Debug)]
pub struct StageOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub verified: bool,
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, body)?;
    files.push(p);
    Ok(())
}

fn read_required(dir: &Path, name: &str, producer: &str) -> Result<String> {
    let p = dir.join(name);
    std::fs::read_to_string(&p).map_err(|e| {
        Error::Config(format!("cannot read {} ({e}); run `torus-cascade {producer}` with the same --out first", p.display()))
    })
}

pub fn load_family(dir: &Path) -> Result<FrequencyFamily> {
    FrequencyFamily::from_json(&read_required(dir, FAMILY_FILE, "family")?)
}

pub fn load_schedule(dir: &Path) -> Result<Schedule> {
    Schedule::from_json(&read_required(dir, SCHEDULE_FILE, "schedule")?)
}

pub fn cmd_family(cfg: &RunConfig) -> Result<StageOutcome> {
    std::fs::create_dir_all(&cfg.out)?;
    let f = construct_family(cfg.m0(), cfg.k_max)?;
    let report = verify_properties(&f)?;
    let table = reduced_interactions(&f)?;
    let mut files = Vec::new();
    write(&cfg.out, FAMILY_FILE, &f.to_json()?, &mut files)?;
    let mut cert = format!("{report}");
    let d = table.discrepancies();
    let _ = writeln!(cert, "\nreduced interactions: {} nodes, {} discrepancies with the chain pattern", table.nodes.len(), d.len());
    for line in &d {
        let _ = writeln!(cert, "  {line:?}");
    }
    write(&cfg.out, CERTIFICATE_FILE, &cert, &mut files)?;
    let verified = report.all_passed() && d.is_empty();
    let summary = format!(
        "family K = {} from m0 = {}: multipliers {:?}; properties {}; chain reduction {}",
        f.k_max(),
        cfg.m0(),
        f.a_choices,
        if report.all_passed() { "all pass" } else { "FAILED" },
        if d.is_empty() { "exact" } else { "MISMATCHED" }
    );
    Ok(StageOutcome { files, summary, verified })
}

pub fn cmd_schedule(cfg: &RunConfig) -> Result<StageOutcome> {
    let f = load_family(&cfg.out)?;
    let sched = build_schedule(&f, cfg.cycles, cfg.beta())?;
    let mut files = Vec::new();
    write(&cfg.out, SCHEDULE_FILE, &sched.to_json()?, &mut files)?;
    let mut csv = String::from("t,drive,r,phase\n");
    for (i, seg) in sched.segments.iter().enumerate() {
        for j in 0..=10 {
            let t = seg.t_start + (seg.t_end - seg.t_start) * j as f64 / 10.0;
            let _ = writeln!(csv, "{t:.12e},{},{:.16e},{:?}", seg.drive_index, sched.segment_value(i, t), seg.phase);
        }
    }
    write(&cfg.out, DRIVES_FILE, &csv, &mut files)?;
    let summary = format!(
        "schedule: {} cycles, {} segments, beta {}, T = {:?}",
        sched.cycles(),
        sched.segments.len(),
        sched.mode,
        sched.cycle_times
    );
    Ok(StageOutcome { files, summary, verified: true })
}

/// Cycle boundaries plus `per_cycle` uniform samples inside each cycle.
pub fn sample_times(sched: &Schedule, per_cycle: usize) -> Vec<f64> {
    let mut ts = vec![0.0];
    for w in sched.cycle_times.windows(2) {
        for j in 1..=per_cycle {
            ts.push(w[0] + (w[1] - w[0]) * j as f64 / per_cycle as f64);
        }
        ts.push(w[1]);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Serialize)]
struct SimulationMetadata<'a> {
    #[serde(flatten)]
    run: RunMetadata,
    pert_cycles: usize,
    pert_shell_depth: usize,
    fs_threshold: f64,
    max_fs_deviation: f64,
    fs_leakage_estimate: f64,
    samples: &'a [f64],
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<StageOutcome> {
    let f = load_family(&cfg.out)?;
    let sched = load_schedule(&cfg.out)?;
    let cycles = sched.cycles();
    let spec = PotentialSpec::new(f, sched)?;
    let drives: Vec<usize> = (0..=cycles).collect();
    let trunc = TruncationSet::build(&spec.family, &drives, cfg.shell_depth)?;
    let model = SpectralModel::new(&spec, &trunc)?;
    let samples = sample_times(&spec.schedule, cfg.samples_per_cycle);
    let later: Vec<f64> = samples[1..].to_vec();
    let a0 = model.resonant_state(0.0)?;
    let mut files = Vec::new();

    let mut exact = Trajectory { kind: RhsKind::Rfs, times: vec![], states: vec![], stats: Default::default(), fs: None };
    let init = ChainState::initial(spec.family.k_max());
    for &t in &samples {
        exact.times.push(t);
        exact.states.push(SpectralState::from_chain(&trunc, &propagate_exact(&spec.schedule, &init, t)?, t)?);
    }
    write(&cfg.out, CHAIN_FILE, &exact.to_csv(&trunc), &mut files)?;

    let with_start = |mut tr: Trajectory, start: &SpectralState| {
        tr.times.insert(0, start.t);
        tr.states.insert(0, start.clone());
        tr
    };
    let rfs = with_start(model.integrate(RhsKind::Rfs, &a0, &later, cfg.tol)?, &a0);
    write(&cfg.out, RFS_FILE, &rfs.to_csv(&trunc), &mut files)?;
    let fs = with_start(model.integrate(RhsKind::Fs, &a0, &later, cfg.tol)?, &a0);
    write(&cfg.out, FS_FILE, &fs.to_csv(&trunc), &mut files)?;

    let mut dev = String::from("t,deviation_l1,mass_drift\n");
    let mut max_dev: f64 = 0.0;
    for (b, a) in fs.states.iter().zip(&exact.states) {
        let d = b.l1_distance(a);
        max_dev = max_dev.max(d);
        let _ = writeln!(dev, "{:.12e},{:.16e},{:.6e}", b.t, d, (b.mass() - a0.mass()).abs());
    }
    write(&cfg.out, DEVIATION_FILE, &dev, &mut files)?;

    // c^N from c^N(T_N) = 0 on its own (usually smaller) shell
    let pert_trunc = TruncationSet::build(&spec.family, &drives, cfg.pert_shell_depth)?;
    let pert_model = SpectralModel::new(&spec, &pert_trunc)?;
    let t_n = spec.schedule.cycle_times[cycles];
    let zero = SpectralState::zeros(&pert_trunc, t_n);
    let backward: Vec<f64> = samples.iter().rev().copied().filter(|&t| t < t_n).collect();
    let mut pert = with_start(pert_model.integrate(RhsKind::Pert, &zero, &backward, cfg.tol)?, &zero);
    pert.times.reverse();
    pert.states.reverse();
    write(&cfg.out, PERT_FILE, &pert.to_csv(&pert_trunc), &mut files)?;

    let meta = SimulationMetadata {
        run: RunMetadata {
            tolerance: cfg.tol,
            truncation: trunc.summary(),
            beta_mode: spec.schedule.mode.to_string(),
            cycles,
            cycle_times: spec.schedule.cycle_times.clone(),
            determinism: DETERMINISM_STATEMENT,
        },
        pert_cycles: cycles,
        pert_shell_depth: cfg.pert_shell_depth,
        fs_threshold: cfg.fs_threshold,
        max_fs_deviation: max_dev,
        fs_leakage_estimate: fs.fs.map_or(0.0, |c| c.leakage_estimate),
        samples: &samples,
    };
    write(&cfg.out, METADATA_FILE, &serde_json::to_string_pretty(&meta)?, &mut files)?;
    let verified = max_dev <= cfg.fs_threshold;
    let summary = format!(
        "simulated {cycles} cycles on {} nodes (pert: {} nodes), {} samples; max FS deviation {max_dev:.4e} ({} threshold {})",
        trunc.len(),
        pert_trunc.len(),
        samples.len(),
        if verified { "within" } else { "EXCEEDS" },
        cfg.fs_threshold
    );
    Ok(StageOutcome { files, summary, verified })
}

/// Parses long-format trajectory CSV into `(t, [(node, coefficient)])`
/// groups in file order.
pub fn read_trajectory_csv(text: &str) -> Result<Vec<(f64, Vec<(LatticeVec, num_complex::Complex64)>)>> {
    let mut lines = text.lines();
    if lines.next() != Some("t,node_x,node_y,re,im") {
        return Err(Error::Config("trajectory CSV must start with the header t,node_x,node_y,re,im".into()));
    }
    let mut out: Vec<(f64, Vec<_>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = || Error::Config(format!("malformed trajectory row {}: {line}", i + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad());
        }
        let t: f64 = cols[0].parse().map_err(|_| bad())?;
        let n = LatticeVec::new(cols[1].parse().map_err(|_| bad())?, cols[2].parse().map_err(|_| bad())?);
        let z = num_complex::Complex64::new(cols[3].parse().map_err(|_| bad())?, cols[4].parse().map_err(|_| bad())?);
        match out.last_mut() {
            Some((tl, v)) if *tl == t => v.push((n, z)),
            _ => out.push((t, vec![(n, z)])),
        }
    }
    Ok(out)
}

fn checksum(file: &str, body: &str) -> InputChecksum {
    let digest = Sha256::digest(body.as_bytes());
    InputChecksum { file: file.to_string(), sha256: digest.iter().map(|b| format!("{b:02x}")).collect() }
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const NORMS_CSV: &str = "norms.csv";
pub const POTENTIAL_CSV: &str = "potential.csv";
pub const GROWTH_CSV: &str = "paper_growth.csv";
pub const DECAY_CSV: &str = "paper_decay.csv";
pub const ALPHA_BETA_CSV: &str = "alpha_beta.csv";

pub fn build_report(cfg: &RunConfig) -> Result<GrowthReport> {
    let dir = &cfg.out;
    let fam_text = read_required(dir, FAMILY_FILE, "family")?;
    let sched_text = read_required(dir, SCHEDULE_FILE, "schedule")?;
    let a_text = read_required(dir, RFS_FILE, "simulate")?;
    let b_text = read_required(dir, FS_FILE, "simulate")?;
    let family = FrequencyFamily::from_json(&fam_text)?;
    let sched = Schedule::from_json(&sched_text)?;
    let a = read_trajectory_csv(&a_text)?;
    let b = read_trajectory_csv(&b_text)?;
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(Error::Config(format!("{RFS_FILE} and {FS_FILE} sample different times; rerun `torus-cascade simulate`")));
    }
    let inputs = vec![
        checksum(FAMILY_FILE, &fam_text),
        checksum(SCHEDULE_FILE, &sched_text),
        checksum(RFS_FILE, &a_text),
        checksum(FS_FILE, &b_text),
    ];
    let sample_times: Vec<f64> = a.iter().map(|x| x.0).collect();
    let mut orders: BTreeSet<u64> = cfg.sobolev.iter().filter(|p| p.1 == 0).map(|p| p.0.to_bits()).collect();
    orders.insert(0f64.to_bits());
    let mut s_list: Vec<f64> = orders.into_iter().map(f64::from_bits).collect();
    s_list.sort_by(f64::total_cmp);
    let norms = s_list
        .iter()
        .map(|&s| NormSeries {
            s,
            resonant: a.iter().map(|x| hs_norm_pairs(x.1.iter().copied(), s)).collect(),
            full: b.iter().map(|x| hs_norm_pairs(x.1.iter().copied(), s)).collect(),
        })
        .collect();
    let cycles = sched.cycles();
    let cycle_times = sched.cycle_times.clone();
    let m_norms = (0..=cycles + 1).map(|n| family.m_at(n).map(|m| m.norm())).collect::<Result<Vec<_>>>()?;
    let spec = PotentialSpec::new(family.clone(), sched)?;
    let potential = cfg
        .sobolev
        .iter()
        .map(|&(s, m)| PotentialSeries {
            s,
            m,
            log_norm: sample_times.iter().map(|&t| spec.v_sobolev_norm(t, s, m).ln()).collect(),
        })
        .collect();

    let bump = default_bump();
    let tl = PaperTimeline::new(&family, family.k_max(), &bump)?;
    let growth_s = 1.0;
    let delta = 0.5;
    let growth_constants = fit_growth_constants(&family, &tl, growth_s, delta)?;
    let growth = growth_check(&family, &tl, &growth_constants)?;
    let mut decay = Vec::new();
    let decay_cycles = family.k_max().saturating_sub(1);
    if decay_cycles > 3 {
        let tl_decay = PaperTimeline::new(&family, decay_cycles, &bump)?;
        for &(s, m) in &cfg.sobolev {
            decay.push(decay_check(&family, &tl_decay, &bump, s, m, delta, 2)?);
        }
    }
    let alpha_beta = if cycles > 0 { Some(alpha_beta_estimates(&spec, &sample_times)?) } else { None };
    let criteria = evaluate_all(&cfg.criteria());
    Ok(GrowthReport {
        inputs,
        sample_times,
        norms,
        potential,
        cycle_times,
        m_norms,
        growth_constants,
        growth,
        decay,
        alpha_beta,
        criteria,
    })
}

pub fn cmd_report(cfg: &RunConfig) -> Result<StageOutcome> {
    let report = build_report(cfg)?;
    let mut files = Vec::new();
    write(&cfg.out, REPORT_JSON, &report.to_json()?, &mut files)?;
    write(&cfg.out, REPORT_TEXT, &report.to_text(), &mut files)?;
    write(&cfg.out, NORMS_CSV, &report.norms_csv(), &mut files)?;
    write(&cfg.out, POTENTIAL_CSV, &report.potential_csv(), &mut files)?;
    write(&cfg.out, GROWTH_CSV, &report.growth_csv(), &mut files)?;
    write(&cfg.out, DECAY_CSV, &report.decay_csv(), &mut files)?;
    if let Some(ab) = &report.alpha_beta {
        write(&cfg.out, ALPHA_BETA_CSV, &ab.to_csv(), &mut files)?;
    }
    let mut summary = String::new();
    for c in &report.criteria {
        let _ = writeln!(summary, "{c}");
    }
    Ok(StageOutcome { files, summary: summary.trim_end().to_string(), verified: report.all_passed() })
}
