//! Monte-Carlo checks of the finite-sample least-squares guarantee on
//! synthetic i.i.d. designs.
//!
//! Each trial draws `S` rows with diagonal covariance `Σ`, a noise vector and
//! a bounded mismatch vector, solves the least-squares problem against a
//! fixed `c⋆` and records the quantities the guarantee speaks about.

use std::io::Write;

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, JobSvd, SVDDC, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{bound_error, BoundConstants};
use crate::stats::{linear_fit, LinearFit};

/// Minimum trial count accepted by [`verify_bounds`].
pub const MIN_VERIFY_TRIALS: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    /// `x = Σ^{1/2} g`, `g` standard normal.
    #[default]
    Gaussian,
    /// `x = Σ^{1/2} r`, `r` uniform on `{±1}^K`.
    Rademacher,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    /// Entries uniform in `[−ε₀, ε₀]`.
    #[default]
    Uniform,
    /// `ε₀·sign(A v)` along the weakest right singular vector `v` of `A`.
    Adversarial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesignSpec {
    pub k: usize,
    pub s: usize,
    /// Smallest eigenvalue of `Σ`.
    pub mu0: f64,
    /// Largest eigenvalue of `Σ`; the spectrum is linear in `[μ₀, μ₁]`.
    pub mu1: f64,
    #[serde(default)]
    pub family: RowFamily,
    /// Sub-Gaussian proxy of the whitened rows.
    #[serde(default = "one")]
    pub psi: f64,
    pub sigma_noise: f64,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default)]
    pub mismatch: MismatchKind,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticDesignSpec {
    /// Gaussian rows, `Σ` spectrum in `[μ₀, μ₁]`, no mismatch.
    pub fn gaussian(
        k: usize,
        s: usize,
        mu0: f64,
        mu1: f64,
        sigma_noise: f64,
        delta: f64,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            k,
            s,
            mu0,
            mu1,
            family: RowFamily::Gaussian,
            psi: 1.0,
            sigma_noise,
            eps0: 0.0,
            mismatch: MismatchKind::Uniform,
            delta,
            trials,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.s == 0 {
            return Err(Error::InvalidParameter(format!(
                "need K, S >= 1, got K={} S={}",
                self.k, self.s
            )));
        }
        if !(self.mu0 > 0.0 && self.mu0 <= self.mu1 && self.mu1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < mu0 <= mu1, got mu0={} mu1={}",
                self.mu0, self.mu1
            )));
        }
        if !(self.sigma_noise >= 0.0 && self.eps0 >= 0.0 && self.psi > 0.0) {
            return Err(Error::InvalidParameter(
                "sigma_noise, eps0 must be >= 0 and psi > 0".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Diagonal of `Σ`.
    pub fn spectrum(&self) -> Vec<f64> {
        if self.k == 1 {
            return vec![self.mu0];
        }
        (0..self.k)
            .map(|i| self.mu0 + (self.mu1 - self.mu0) * i as f64 / (self.k - 1) as f64)
            .collect()
    }

    /// The fixed target drawn from stream 0 of the master seed.
    pub fn c_star(&self) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.k)
            .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect()
    }

    /// Random stream of one trial; stream 0 is reserved for `c_star`.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64 + 1);
        rng
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub s: usize,
    pub k: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub eps0: f64,
    pub sigma_min: f64,
    /// `‖ĉ − c⋆‖₂`
    pub error: f64,
    /// Error bound evaluated with the constants of the run.
    pub bound_rhs: f64,
    pub violated: bool,
    /// `√(Sμ₀/2)`
    pub sigma_min_floor: f64,
    pub sigma_min_violated: bool,
    /// `‖AᵀA/S − Σ‖₂`
    pub cov_deviation: f64,
    /// `2(√μ₁/μ₀)ε₀√K`
    pub mismatch_surrogate: f64,
}

impl TrialRecord {
    pub const CSV_HEADER: [&'static str; 15] = [
        "trial",
        "S",
        "K",
        "mu0",
        "mu1",
        "sigma",
        "eps0",
        "sigma_min",
        "error",
        "bound_rhs",
        "violated",
        "sigma_min_floor",
        "sigma_min_violated",
        "cov_deviation",
        "mismatch_surrogate",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.s.to_string(),
            self.k.to_string(),
            self.mu0.to_string(),
            self.mu1.to_string(),
            self.sigma.to_string(),
            self.eps0.to_string(),
            format!("{:e}", self.sigma_min),
            format!("{:e}", self.error),
            format!("{:e}", self.bound_rhs),
            (self.violated as u8).to_string(),
            format!("{:e}", self.sigma_min_floor),
            (self.sigma_min_violated as u8).to_string(),
            format!("{:e}", self.cov_deviation),
            format!("{:e}", self.mismatch_surrogate),
        ]
    }
}

/// Writes trial records as comma-separated rows with a header.
pub fn write_trials_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", TrialRecord::CSV_HEADER.join(","))?;
    for r in records {
        writeln!(out, "{}", r.csv_row().join(","))?;
    }
    Ok(())
}

/// Rows `Σ^{1/2} g` of one trial's design.
pub fn draw_design(spec: &SyntheticDesignSpec, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let scale: Vec<f64> = spec.spectrum().iter().map(|m| m.sqrt()).collect();
    Array2::from_shape_fn((spec.s, spec.k), |(_, j)| {
        let z: f64 = match spec.family {
            RowFamily::Gaussian => StandardNormal.sample(rng),
            RowFamily::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        scale[j] * z
    })
}

fn spectral_deviation(a: &Array2<f64>, spectrum: &[f64]) -> Result<f64> {
    let s = a.nrows() as f64;
    let mut cov = a.t().dot(a) / s;
    for (i, m) in spectrum.iter().enumerate() {
        cov[(i, i)] -= m;
    }
    let eig = cov.eigvalsh(UPLO::Upper)?;
    Ok(eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// One Monte-Carlo trial; `trial` selects the random stream.
pub fn run_trial(spec: &SyntheticDesignSpec, trial: usize, constants: BoundConstants) -> Result<TrialRecord> {
    spec.validate()?;
    let c_star = spec.c_star();
    let mut rng = spec.trial_rng(trial);
    let a = draw_design(spec, &mut rng);
    let noise: Array1<f64> = (0..spec.s)
        .map(|_| spec.sigma_noise * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();

    let (u, sv, vt) = a.svddc(JobSvd::Some)?;
    let (u, vt) = (u.expect("left vectors"), vt.expect("right vectors"));
    let rank = sv.len();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let sigma_min = if spec.s < spec.k {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };

    let mismatch: Array1<f64> = match spec.mismatch {
        MismatchKind::Uniform => (0..spec.s)
            .map(|_| {
                if spec.eps0 > 0.0 {
                    rng.random_range(-spec.eps0..=spec.eps0)
                } else {
                    0.0
                }
            })
            .collect(),
        MismatchKind::Adversarial => {
            let weakest = u.column(rank - 1);
            weakest.mapv(|x| if x >= 0.0 { spec.eps0 } else { -spec.eps0 })
        }
    };

    let b = a.dot(&c_star) + &noise + &mismatch;
    let utb = u.t().dot(&b);
    let mut c_hat = Array1::<f64>::zeros(spec.k);
    for idx in 0..rank {
        if sv[idx] > crate::learner::RANK_TOL * sigma_max {
            c_hat.scaled_add(utb[idx] / sv[idx], &vt.row(idx));
        }
    }
    let error = (&c_hat - &c_star).mapv(|x| x * x).sum().sqrt();

    let (k, s) = (spec.k as f64, spec.s as f64);
    let bound_rhs = bound_error(
        spec.sigma_noise,
        spec.mu0,
        spec.mu1,
        k,
        s,
        spec.delta,
        spec.eps0,
        constants,
    )?;
    let sigma_min_floor = (s * spec.mu0 / 2.0).sqrt();
    let cov_deviation = spectral_deviation(&a, &spec.spectrum())?;
    Ok(TrialRecord {
        trial,
        s: spec.s,
        k: spec.k,
        mu0: spec.mu0,
        mu1: spec.mu1,
        sigma: spec.sigma_noise,
        eps0: spec.eps0,
        sigma_min,
        error,
        bound_rhs,
        violated: error > bound_rhs,
        sigma_min_floor,
        sigma_min_violated: sigma_min < sigma_min_floor,
        cov_deviation,
        mismatch_surrogate: 2.0 * spec.mu1.sqrt() / spec.mu0 * spec.eps0 * k.sqrt(),
    })
}

/// All `spec.trials` trials, in trial order.
pub fn run_trials(spec: &SyntheticDesignSpec, constants: BoundConstants) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t, constants))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub trials: usize,
    pub delta: f64,
    pub constants: BoundConstants,
    /// Frequency of `σ_min(A) < √(Sμ₀/2)`.
    pub sigma_min_violation_rate: f64,
    /// Frequency of `‖ĉ − c⋆‖ > bound_rhs`.
    pub error_violation_rate: f64,
    /// Frequency of `‖AᵀA/S − Σ‖ > μ₀/2`.
    pub covariance_violation_rate: f64,
    /// Frequency of the error exceeding `2(√μ₁/μ₀)ε₀√K`; only meaningful with `σ = 0`.
    pub surrogate_violation_rate: f64,
    pub sigma_min_within_budget: bool,
    pub error_within_budget: bool,
    /// `(1−δ)`-quantile of the error.
    pub error_quantile: f64,
    /// `C` making the bound tight at the `(1−δ)` quantile, `C′` held fixed;
    /// `None` without noise.
    pub fitted_c: Option<f64>,
    pub median_error: f64,
}

/// Empirical `q`-quantile (nearest rank).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

fn rate(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> bool) -> f64 {
    records.iter().filter(|r| f(r)).count() as f64 / records.len() as f64
}

/// Summarises a batch of trials against the guarantee.
pub fn summarize(spec: &SyntheticDesignSpec, records: &[TrialRecord], constants: BoundConstants) -> BoundsSummary {
    let errors: Vec<f64> = records.iter().map(|r| r.error).collect();
    let error_quantile = quantile(&errors, 1.0 - spec.delta);
    let (k, s) = (spec.k as f64, spec.s as f64);
    let stat = (spec.sigma_noise / spec.mu0) * (spec.mu1 * (k + (1.0 / spec.delta).ln()) / s).sqrt();
    let bias = constants.c_prime * spec.mu1.sqrt() / spec.mu0 * spec.eps0;
    let fitted_c = (stat > 0.0).then(|| ((error_quantile - bias) / stat).max(0.0));
    let budget = 2.0 * spec.delta;
    let sigma_min_violation_rate = rate(records, |r| r.sigma_min_violated);
    let error_violation_rate = rate(records, |r| r.violated);
    BoundsSummary {
        trials: records.len(),
        delta: spec.delta,
        constants,
        sigma_min_violation_rate,
        error_violation_rate,
        covariance_violation_rate: rate(records, |r| r.cov_deviation > spec.mu0 / 2.0),
        surrogate_violation_rate: rate(records, |r| r.error > r.mismatch_surrogate),
        sigma_min_within_budget: sigma_min_violation_rate <= budget,
        error_within_budget: error_violation_rate <= budget,
        error_quantile,
        fitted_c,
        median_error: quantile(&errors, 0.5),
    }
}

/// Runs the trials and summarises them. Without supplied constants `C` is
/// fitted at the `(1−δ)` error quantile and `C′ = 1`.
pub fn verify_bounds(
    spec: &SyntheticDesignSpec,
    constants: Option<BoundConstants>,
) -> Result<(BoundsSummary, Vec<TrialRecord>)> {
    spec.validate()?;
    if spec.trials < MIN_VERIFY_TRIALS {
        return Err(Error::InsufficientTrials {
            got: spec.trials,
            required: MIN_VERIFY_TRIALS,
        });
    }
    let supplied = constants.is_some();
    let mut constants = constants.unwrap_or_default();
    let mut records = run_trials(spec, constants)?;
    if !supplied {
        let fitted = summarize(spec, &records, constants).fitted_c;
        if let Some(c) = fitted {
            constants.c = c;
            let (k, s) = (spec.k as f64, spec.s as f64);
            for r in records.iter_mut() {
                r.bound_rhs = bound_error(
                    spec.sigma_noise,
                    spec.mu0,
                    spec.mu1,
                    k,
                    s,
                    spec.delta,
                    spec.eps0,
                    constants,
                )?;
                r.violated = r.error > r.bound_rhs;
            }
        }
    }
    Ok((summarize(spec, &records, constants), records))
}

/// `ψ⁴(μ₁/μ₀)² K (ln 2K + ln 1/δ)`, the sample-size threshold without its
/// absolute constant.
pub fn bernstein_base(psi: f64, mu0: f64, mu1: f64, k: usize, delta: f64) -> f64 {
    let k = k as f64;
    psi.powi(4) * (mu1 / mu0).powi(2) * k * ((2.0 * k).ln() + (1.0 / delta).ln())
}

/// Row count `⌈C · bernstein_base⌉`.
pub fn bernstein_rows(c: f64, psi: f64, mu0: f64, mu1: f64, k: usize, delta: f64) -> usize {
    (c * bernstein_base(psi, mu0, mu1, k, delta)).ceil() as usize
}

/// Event whose failure frequency [`calibrate_bernstein`] drives below `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralEvent {
    /// `σ_min(A) ≥ √(Sμ₀/2)`
    SigmaMin,
    /// `‖AᵀA/S − Σ‖ ≤ μ₀/2`
    Covariance,
}

fn event_failure_rate(spec: &SyntheticDesignSpec, event: SpectralEvent) -> Result<f64> {
    let records = run_trials(spec, BoundConstants::default())?;
    Ok(match event {
        SpectralEvent::SigmaMin => rate(&records, |r| r.sigma_min_violated),
        SpectralEvent::Covariance => rate(&records, |r| r.cov_deviation > spec.mu0 / 2.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub event: SpectralEvent,
    /// Smallest row count found with failure frequency `≤ δ`.
    pub rows: usize,
    pub failure_rate: f64,
    pub base: f64,
    /// `rows / base`
    pub fitted_c: f64,
}

/// Finds the smallest `S` whose failure frequency of `event` is at most `δ`
/// (doubling, then bisection) and converts it into the constant of the
/// sample-size threshold. Noise and mismatch of `spec` are irrelevant here.
pub fn calibrate_bernstein(spec: &SyntheticDesignSpec, event: SpectralEvent) -> Result<Calibration> {
    spec.validate()?;
    let at = |s: usize| -> Result<f64> {
        let probe = SyntheticDesignSpec {
            s,
            sigma_noise: 0.0,
            eps0: 0.0,
            ..spec.clone()
        };
        event_failure_rate(&probe, event)
    };
    let mut hi = spec.k.max(2);
    let mut hi_rate = at(hi)?;
    let mut lo = spec.k.max(1) - 1;
    while hi_rate > spec.delta {
        lo = hi;
        hi *= 2;
        if hi > 1 << 24 {
            return Err(Error::InvalidParameter(
                "calibration did not reach the failure budget".into(),
            ));
        }
        hi_rate = at(hi)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = at(mid)?;
        if r <= spec.delta {
            hi = mid;
            hi_rate = r;
        } else {
            lo = mid;
        }
    }
    let base = bernstein_base(spec.psi, spec.mu0, spec.mu1, spec.k, spec.delta);
    Ok(Calibration {
        event,
        rows: hi,
        failure_rate: hi_rate,
        base,
        fitted_c: hi as f64 / base,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingAxis {
    Rows,
    Dimension,
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub axis: ScalingAxis,
    /// `(value, median error)`
    pub points: Vec<(f64, f64)>,
    /// Fit of `ln(median error)` against `ln(value)`.
    pub fit: LinearFit,
}

/// Median error of `base` as one parameter sweeps `values`; slope of the
/// log-log fit.
pub fn scaling_fit(base: &SyntheticDesignSpec, axis: ScalingAxis, values: &[f64]) -> Result<ScalingFit> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("scaling fit needs at least two values".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let mut spec = base.clone();
        match axis {
            ScalingAxis::Rows => spec.s = v as usize,
            ScalingAxis::Dimension => spec.k = v as usize,
            ScalingAxis::Noise => spec.sigma_noise = v,
        }
        let records = run_trials(&spec, BoundConstants::default())?;
        let errors: Vec<f64> = records.iter().map(|r| r.error).collect();
        points.push((v, quantile(&errors, 0.5)));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    Ok(ScalingFit {
        axis,
        points,
        fit: linear_fit(&logs),
    })
}
