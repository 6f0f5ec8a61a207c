//! Flat TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bump::BumpProfile;
use crate::criteria::CriteriaConfig;
use crate::error::{Error, Result};
use crate::lattice::LatticeVec;
use crate::schedule::BetaMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaKind {
    Paper,
    Scaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub m0: [i64; 2],
    #[serde(rename = "K")]
    pub k_max: usize,
    pub cycles: usize,
    pub beta_mode: BetaKind,
    pub beta_base: f64,
    pub beta_ratio: f64,
    pub shell_depth: usize,
    pub pert_shell_depth: usize,
    pub tol: f64,
    pub samples_per_cycle: usize,
    /// Largest acceptable l¹ distance between the full and resonant solutions.
    pub fs_threshold: f64,
    /// `(s, m)` pairs for `‖∂_t^m V‖_{H^s}` and, with `m = 0`, `‖u‖_{H^s}`.
    pub sobolev: Vec<(f64, usize)>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m0: [1, 0],
            k_max: 10,
            cycles: 2,
            beta_mode: BetaKind::Scaled,
            beta_base: 0.05,
            beta_ratio: 0.5,
            shell_depth: 2,
            pert_shell_depth: 1,
            tol: 1e-10,
            samples_per_cycle: 40,
            fs_threshold: 0.1,
            sobolev: vec![(1.0, 0), (2.0, 0), (0.0, 1)],
            out: PathBuf::from("out"),
        }
    }
}

pub const DEFAULT_CONFIG_TOML: &str = r#"# torus-cascade run configuration (flat TOML; every key optional)

# first frequency of the family
m0 = [1, 0]
# last family index; norms grow factorially and K above 12 overflows 128-bit integers
K = 10
# cascade cycles to schedule and simulate (at most K - 1)
cycles = 2
# "scaled" (beta_k = beta_base * beta_ratio^k) or "paper" (beta_k = |l_k|^-|l_k|)
beta_mode = "scaled"
beta_base = 0.05
beta_ratio = 0.5
# truncation shell around the chain nodes for the full system
shell_depth = 2
# truncation shell for the backward perturbation solves
pert_shell_depth = 1
# per-step integrator tolerance
tol = 1e-10
# uniform output samples per cycle, in addition to the cycle boundaries
samples_per_cycle = 40
# largest acceptable l1 distance between the full and resonant solutions
fs_threshold = 0.1
# (s, m) pairs: H^s norms of time derivatives of order m of V; m = 0 pairs also
# select the H^s norms reported for the solutions
sobolev = [[1.0, 0], [2.0, 0], [0.0, 1]]
# output directory for every artifact
out = "out"
"#;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn m0(&self) -> LatticeVec {
        LatticeVec::new(self.m0[0] as i128, self.m0[1] as i128)
    }

    pub fn beta(&self) -> BetaMode {
        match self.beta_mode {
            BetaKind::Paper => BetaMode::Paper,
            BetaKind::Scaled => BetaMode::Scaled { base: self.beta_base, ratio: self.beta_ratio },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.m0 == [0, 0] {
            return bad("m0 must be nonzero".into());
        }
        if self.k_max == 0 {
            return bad("K must be positive".into());
        }
        if self.cycles + 1 > self.k_max {
            return bad(format!("cycles = {} needs K ≥ cycles + 1, got K = {}", self.cycles, self.k_max));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if !(self.beta_ratio > 0.0 && self.beta_ratio <= 1.0) {
            return bad(format!("beta_ratio must lie in (0, 1], got {}", self.beta_ratio));
        }
        // plateaus α(1/β − 2) stay nonnegative while β·2α ≤ 1
        let two_alpha = 2.0 * BumpProfile::ALPHA;
        if !(self.beta_base > 0.0 && self.beta_base * two_alpha < 1.0) {
            return bad(format!("beta_base must lie in (0, {}), got {}", 1.0 / two_alpha, self.beta_base));
        }
        if !(self.fs_threshold > 0.0) {
            return bad(format!("fs_threshold must be positive, got {}", self.fs_threshold));
        }
        if self.samples_per_cycle == 0 {
            return bad("samples_per_cycle must be positive".into());
        }
        if self.sobolev.iter().any(|&(s, _)| !(s >= 0.0) || !s.is_finite()) {
            return bad("sobolev orders s must be finite and ≥ 0".into());
        }
        Ok(())
    }

    /// Criteria parameters matching this run. Scaled-only criteria fall back
    /// to the default scaled β when the run is in paper mode.
    pub fn criteria(&self) -> CriteriaConfig {
        let mut c = CriteriaConfig { m0: self.m0(), k_max: self.k_max, tol: self.tol, ..CriteriaConfig::default() };
        if self.beta_mode == BetaKind::Scaled {
            c.beta_base = self.beta_base;
            c.beta_ratio = self.beta_ratio;
        }
        let max_cycles = self.k_max.saturating_sub(1);
        let or_default = |n: usize, default: usize| if n > 0 { n } else { default.min(max_cycles) };
        c.chain_cycles = or_default(self.cycles, c.chain_cycles);
        c.fs_cycles = or_default(self.cycles, c.fs_cycles);
        c.fs_shell_depth = self.shell_depth;
        c.fs_threshold = self.fs_threshold;
        // the perturbation study keeps its own N range, shifted down only when K is too small for it
        let last = c.pert_cycles.iter().copied().max().unwrap_or(0).min(max_cycles);
        c.pert_cycles = (1..=last).rev().take(3).collect::<Vec<_>>().into_iter().rev().collect();
        c.pert_shell_depth = self.pert_shell_depth;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_parses_to_default() {
        assert_eq!(RunConfig::from_toml(DEFAULT_CONFIG_TOML).unwrap(), RunConfig::default());
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.cycles = 3;
        c.beta_mode = BetaKind::Paper;
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["K = 0", "cycles = 10", "tol = 0.0", "beta_base = 1.5", "m0 = [0, 0]", "bogus = 1", "sobolev = [[-1.0, 0]]"] {
            assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn criteria_cycles() {
        let mut c = RunConfig::default();
        assert_eq!(c.criteria().pert_cycles, vec![2, 3, 4]);
        assert_eq!(c.criteria().fs_cycles, 2);
        c.k_max = 3;
        c.cycles = 0;
        assert_eq!(c.criteria().pert_cycles, vec![1, 2]);
        assert_eq!(c.criteria().chain_cycles, 2);
    }
}
