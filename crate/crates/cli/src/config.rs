//! Experiment configuration, accepted as TOML or JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use floquet_core::{Decay, LatticeSpec, MismatchKind, Model, NoiseTarget, RowFamily, TimeGrid, MAX_QUBITS};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "sweep-n", alias = "sweep-N")]
    SweepN,
    #[serde(rename = "sweep-m", alias = "sweep-M")]
    SweepM,
    #[serde(rename = "sweep-stacking")]
    SweepStacking,
    #[serde(rename = "sweep-tail")]
    SweepTail,
    #[serde(rename = "adaptive")]
    Adaptive,
    #[serde(rename = "theory")]
    Theory,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Single => "single",
            ExperimentKind::SweepN => "sweep-n",
            ExperimentKind::SweepM => "sweep-m",
            ExperimentKind::SweepStacking => "sweep-stacking",
            ExperimentKind::SweepTail => "sweep-tail",
            ExperimentKind::Adaptive => "adaptive",
            ExperimentKind::Theory => "theory",
        })
    }
}

/// Which panel of the tail study a `sweep-tail` run reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    ResidualLength,
    FitOrder,
    Stacking,
}

/// Lattice written as `chain(6)`, `chain(6, periodic)` or `grid(2,3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeName(pub LatticeSpec);

impl FromStr for LatticeName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (head, rest) = compact
            .split_once('(')
            .with_context(|| format!("lattice {s:?}: expected chain(n) or grid(r,c)"))?;
        let inner = rest
            .strip_suffix(')')
            .with_context(|| format!("lattice {s:?}: missing ')'"))?;
        let mut parts: Vec<&str> = inner.split(',').collect();
        let periodic = parts.last() == Some(&"periodic");
        if periodic {
            parts.pop();
        }
        let nums = parts
            .iter()
            .map(|p| p.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("lattice {s:?}: sizes must be integers"))?;
        let spec = match (head, nums.as_slice()) {
            ("chain", [n]) => LatticeSpec::chain(*n, periodic),
            ("grid", [r, c]) => LatticeSpec::grid(*r, *c, periodic),
            _ => bail!("lattice {s:?}: expected chain(n) or grid(r,c)"),
        };
        Ok(LatticeName(spec))
    }
}

impl fmt::Display for LatticeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = if self.0.periodic { ",periodic" } else { "" };
        match self.0.geometry {
            floquet_core::Geometry::Chain { n } => write!(f, "chain({n}{suffix})"),
            floquet_core::Geometry::Grid { rows, cols } => write!(f, "grid({rows},{cols}{suffix})"),
        }
    }
}

impl Serialize for LatticeName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LatticeName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub lattices: Vec<LatticeName>,
    pub models: Vec<Model>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    /// Residual lengths; length `L` fills orders `M+1 ..= M+L`.
    pub lengths: Vec<usize>,
    pub eps0: Vec<f64>,
    #[serde(default = "flat")]
    pub decay: Decay,
}

fn flat() -> Decay {
    Decay::Flat
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default = "default_period")]
    pub period: f64,
    /// True cutoffs `M`.
    pub cutoffs: Vec<usize>,
    #[serde(default = "default_range")]
    pub coeff_range: [f64; 2],
    #[serde(default)]
    pub tail: Option<TailConfig>,
}

fn default_period() -> f64 {
    0.5
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `A_j = P_j`
    Basis,
    /// The basis plus `count` random weight-≤2 words.
    Random { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub target: NoiseTarget,
}

impl NoiseConfig {
    pub fn resolved_sigma(&self) -> anyhow::Result<f64> {
        match (self.sigma, self.shots) {
            (Some(s), None) => Ok(s),
            (None, Some(shots)) if shots > 0 => Ok(1.0 / (shots as f64).sqrt()),
            _ => bail!("learner.noise: give exactly one of sigma or a positive shots count"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    /// Fit cutoffs; empty means "fit at the true cutoff".
    #[serde(default)]
    pub fit_cutoffs: Vec<usize>,
    /// Stacking parameters `m` of `k ∈ [−M−m, M+m]`.
    #[serde(default = "default_stacking")]
    pub stacking: Vec<i64>,
    #[serde(default = "default_observables")]
    pub observables: ObservableConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    /// Floquet state index; default is the quasienergy closest to zero.
    #[serde(default)]
    pub alpha: Option<usize>,
}

fn default_stacking() -> Vec<i64> {
    vec![1]
}

fn default_observables() -> ObservableConfig {
    ObservableConfig::Basis
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            fit_cutoffs: Vec::new(),
            stacking: default_stacking(),
            observables: default_observables(),
            noise: None,
            alpha: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Samples per period `N`.
    pub samples: Vec<usize>,
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    #[serde(default = "one")]
    pub m_start: usize,
    pub m_max: usize,
    pub threshold: f64,
    #[serde(default = "one")]
    pub stability: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub k: usize,
    pub mu0: f64,
    pub mu1: f64,
    #[serde(default)]
    pub family: RowFamily,
    pub sigma: f64,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default)]
    pub mismatch: MismatchKind,
    pub delta: f64,
    pub trials: usize,
    /// Row counts of the error-vs-S fit.
    #[serde(default)]
    pub rows: Vec<usize>,
    /// Dimensions of the error-vs-K fit.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Row count used for the error-vs-K fit.
    #[serde(default)]
    pub dims_rows: Option<usize>,
    /// Noise levels of the error-vs-σ fit.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Row count for the verification batch; calibrated when absent.
    #[serde(default)]
    pub verify_rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Option<TailMode>,
    /// Master seed; instance `s` uses `seed + s`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_u64")]
    pub seeds: u64,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveConfig>,
    #[serde(default)]
    pub theory: Option<TheoryConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one_u64() -> u64 {
    1
}

impl ExperimentConfig {
    /// Parses TOML or JSON, chosen by extension (`.json`) or by content.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if json {
            serde_json::from_str(&text).with_context(|| format!("parsing {} as JSON", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {} as TOML", path.display()))
        }
    }

    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.to_string())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|s| self.seed.wrapping_add(s)).collect()
    }

    pub fn time_grid(&self, samples: usize) -> TimeGrid {
        let sub = self.grid.as_ref().map_or(1, |g| g.substeps);
        TimeGrid::new(samples).with_substeps(sub)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

fn err(field: &str, message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        field: field.to_string(),
        message,
    }
}

fn warn(field: &str, message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        field: field.to_string(),
        message,
    }
}

/// Static checks run before any compute: missing blocks, empty axes,
/// dimension caps, Nyquist violations and band ranges that alias.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if cfg.seeds == 0 {
        out.push(err("seeds", "at least one seed is required".into()));
    }
    if cfg.experiment == ExperimentKind::Theory {
        validate_theory(cfg, &mut out);
        return out;
    }
    let (Some(system), Some(drive), Some(grid)) = (&cfg.system, &cfg.drive, &cfg.grid) else {
        for (name, present) in [
            ("system", cfg.system.is_some()),
            ("drive", cfg.drive.is_some()),
            ("grid", cfg.grid.is_some()),
        ] {
            if !present {
                out.push(err(
                    name,
                    format!("{} experiments need a [{name}] block", cfg.experiment),
                ));
            }
        }
        return out;
    };

    if system.lattices.is_empty() {
        out.push(err("system.lattices", "grid axis is empty".into()));
    }
    if system.models.is_empty() {
        out.push(err("system.models", "grid axis is empty".into()));
    }
    for lat in &system.lattices {
        let sites = lat.0.num_sites();
        if sites > MAX_QUBITS {
            out.push(err(
                "system.lattices",
                format!("{lat} has {sites} qubits, above the cap of {MAX_QUBITS}"),
            ));
        } else if let Err(e) = lat.0.validate() {
            out.push(err("system.lattices", format!("{lat}: {e}")));
        }
    }
    if drive.cutoffs.is_empty() {
        out.push(err("drive.cutoffs", "grid axis is empty".into()));
    }
    if !(drive.period > 0.0 && drive.period.is_finite()) {
        out.push(err("drive.period", format!("must be positive, got {}", drive.period)));
    }
    let [lo, hi] = drive.coeff_range;
    if !(lo < hi) {
        out.push(err("drive.coeff_range", format!("[{lo}, {hi}] is empty")));
    }
    let max_tail = match &drive.tail {
        Some(t) => {
            if t.lengths.is_empty() {
                out.push(err("drive.tail.lengths", "grid axis is empty".into()));
            }
            if t.eps0.is_empty() {
                out.push(err("drive.tail.eps0", "grid axis is empty".into()));
            }
            if t.eps0.iter().any(|e| !(*e >= 0.0)) {
                out.push(err("drive.tail.eps0", "tail amplitudes must be >= 0".into()));
            }
            t.lengths.iter().copied().max().unwrap_or(0)
        }
        None => 0,
    };
    if grid.samples.is_empty() {
        out.push(err("grid.samples", "grid axis is empty".into()));
    }
    if grid.substeps == 0 {
        out.push(err("grid.substeps", "must be >= 1".into()));
    }
    if cfg.learner.stacking.is_empty() && cfg.experiment != ExperimentKind::Adaptive {
        out.push(err("learner.stacking", "grid axis is empty".into()));
    }
    if let Some(noise) = &cfg.learner.noise {
        match noise.resolved_sigma() {
            Ok(s) if s >= 0.0 && s.is_finite() => {}
            Ok(s) => out.push(err("learner.noise.sigma", format!("must be >= 0, got {s}"))),
            Err(e) => out.push(err("learner.noise", e.to_string())),
        }
    }

    let fit_cutoffs: Vec<usize> = match cfg.experiment {
        ExperimentKind::Adaptive => match &cfg.adaptive {
            Some(a) => {
                if a.m_max < a.m_start {
                    out.push(err(
                        "adaptive.m_max",
                        format!("{} is below m_start {}", a.m_max, a.m_start),
                    ));
                }
                if !(a.threshold > 0.0) {
                    out.push(err("adaptive.threshold", "must be positive".into()));
                }
                if a.stability == 0 {
                    out.push(err("adaptive.stability", "must be >= 1".into()));
                }
                (a.m_start..=a.m_max).collect()
            }
            None => {
                out.push(err("adaptive", "adaptive experiments need an [adaptive] block".into()));
                Vec::new()
            }
        },
        _ if cfg.learner.fit_cutoffs.is_empty() => drive.cutoffs.clone(),
        _ => cfg.learner.fit_cutoffs.clone(),
    };
    let stacking: Vec<i64> = if cfg.experiment == ExperimentKind::Adaptive {
        cfg.learner.stacking.iter().copied().take(1).collect()
    } else {
        cfg.learner.stacking.clone()
    };

    if cfg.experiment == ExperimentKind::SweepTail {
        match cfg.mode {
            None => out.push(err(
                "mode",
                "sweep-tail needs mode = residual-length, fit-order or stacking".into(),
            )),
            Some(TailMode::ResidualLength) | Some(TailMode::Stacking) if drive.tail.is_none() => out.push(err(
                "drive.tail",
                "this sweep-tail mode needs a [drive.tail] block".into(),
            )),
            Some(TailMode::FitOrder) if cfg.learner.fit_cutoffs.is_empty() => out.push(err(
                "learner.fit_cutoffs",
                "fit-order mode needs explicit fit cutoffs".into(),
            )),
            _ => {}
        }
    }

    for &n in &grid.samples {
        for &m_fit in &fit_cutoffs {
            if n < 2 * m_fit + 1 {
                out.push(err(
                    "grid.samples",
                    format!("N = {n} violates the Nyquist condition N >= 2M+1 for M = {m_fit}"),
                ));
            }
            for &m in &stacking {
                if m_fit as i64 + m < 0 {
                    continue;
                }
                let reach = 2 * m_fit as i64 + m;
                if 2 * reach + 1 > n as i64 {
                    out.push(warn(
                        "grid.samples",
                        format!(
                            "N = {n} resolves {n} bands but M = {m_fit}, m = {m} needs |k| <= {reach} ({} bands); bands alias",
                            2 * reach + 1
                        ),
                    ));
                }
            }
        }
        for &m_true in &drive.cutoffs {
            let top = m_true + max_tail;
            if n < 2 * top + 1 {
                out.push(warn(
                    "grid.samples",
                    format!("N = {n} under-samples the highest true order {top}"),
                ));
            }
        }
    }
    out
}

fn validate_theory(cfg: &ExperimentConfig, out: &mut Vec<Diagnostic>) {
    let Some(t) = &cfg.theory else {
        out.push(err("theory", "theory experiments need a [theory] block".into()));
        return;
    };
    if t.k == 0 {
        out.push(err("theory.k", "must be >= 1".into()));
    }
    if !(t.mu0 > 0.0 && t.mu0 <= t.mu1) {
        out.push(err(
            "theory.mu0",
            format!("need 0 < mu0 <= mu1, got {} and {}", t.mu0, t.mu1),
        ));
    }
    if !(t.delta > 0.0 && t.delta < 1.0) {
        out.push(err("theory.delta", format!("must lie in (0, 1), got {}", t.delta)));
    }
    if t.trials < floquet_core::theory_lab::MIN_VERIFY_TRIALS {
        out.push(err(
            "theory.trials",
            format!(
                "{} trials is below the minimum of {}",
                t.trials,
                floquet_core::theory_lab::MIN_VERIFY_TRIALS
            ),
        ));
    }
    if !(t.sigma >= 0.0 && t.eps0 >= 0.0) {
        out.push(err("theory.sigma", "sigma and eps0 must be >= 0".into()));
    }
    if t.rows.len() == 1 {
        out.push(err("theory.rows", "a scaling fit needs at least two values".into()));
    }
    if t.dims.len() == 1 {
        out.push(err("theory.dims", "a scaling fit needs at least two values".into()));
    }
    if t.sigmas.len() == 1 {
        out.push(err("theory.sigmas", "a scaling fit needs at least two values".into()));
    }
    if t.rows.iter().chain(t.dims.iter()).any(|&v| v == 0) || t.sigmas.iter().any(|&s| !(s > 0.0)) {
        out.push(err("theory", "scaling axes must be positive".into()));
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_names_round_trip() {
        for s in ["chain(6)", "chain(4,periodic)", "grid(2,3)", "grid(3,3,periodic)"] {
            let l: LatticeName = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        assert_eq!(
            "chain( 6 )".parse::<LatticeName>().unwrap().0,
            LatticeSpec::chain(6, false)
        );
        assert!("ring(4)".parse::<LatticeName>().is_err());
        assert!("grid(2)".parse::<LatticeName>().is_err());
    }
}
