//! Executes an experiment grid: instance generation, simulation, fits and one
//! record per (cell, fit).

use std::time::Instant;

use anyhow::{bail, Context};
use floquet_core::{
    adaptive_truncation, calibrate_bernstein, fit_trajectory, frobenius_error, generate_instance, scaling_fit,
    simulate, verify_bounds, BoundsSummary, Calibration, DriveSpec, Fit, FitOptions, GenerationParams, InstanceRecord,
    Model, NoiseModel, ObservableSet, ScalingAxis, ScalingFit, Simulation, SpectralEvent, SyntheticDesignSpec,
    TailParams, TrialRecord, ERROR_GRID,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    has_errors, validate, ExperimentConfig, ExperimentKind, LatticeName, ObservableConfig, TheoryConfig,
};

/// One CSV row. Every experiment shares this column set; columns that do not
/// apply stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Record {
    pub experiment: String,
    pub instance_id: String,
    pub lattice: String,
    pub n: usize,
    pub model: String,
    pub num_terms: usize,
    #[serde(rename = "M_true")]
    pub m_true: usize,
    pub tail_len: usize,
    pub eps0: f64,
    #[serde(rename = "M_fit")]
    pub m_fit: Option<usize>,
    #[serde(rename = "N")]
    pub samples: usize,
    pub substeps: usize,
    pub m: Option<i64>,
    pub observables: Option<usize>,
    pub sigma: f64,
    pub noise_target: Option<String>,
    pub seed: u64,
    pub alpha: Option<usize>,
    pub eps_alpha: Option<f64>,
    /// Error against the learnable part (tail removed).
    pub frob_mean: Option<f64>,
    pub frob_std: Option<f64>,
    /// Error against the full Hamiltonian including its tail.
    pub frob_full_mean: Option<f64>,
    pub frob_full_std: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub condition: Option<f64>,
    pub residual: Option<f64>,
    pub rank_deficient: Option<bool>,
    pub symmetry_defect: Option<f64>,
    pub closure: Option<f64>,
    pub discrepancy: Option<f64>,
    pub m_stop: Option<usize>,
    pub converged: Option<bool>,
    pub wall_time: f64,
    pub status: String,
}

impl Record {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One simulated instance: everything that changes the trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub lattice: LatticeName,
    pub model: Model,
    pub m_true: usize,
    pub tail_len: usize,
    pub eps0: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Cell {
    pub fn instance_id(&self) -> String {
        format!(
            "{}:{}:M{}:L{}:e{}:s{}",
            self.lattice, self.model, self.m_true, self.tail_len, self.eps0, self.seed
        )
    }
}

/// Cartesian product of the configured axes, in a fixed order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let (Some(system), Some(drive), Some(grid)) = (&cfg.system, &cfg.drive, &cfg.grid) else {
        return Vec::new();
    };
    let tails: Vec<(usize, f64)> = match &drive.tail {
        Some(t) => t
            .lengths
            .iter()
            .flat_map(|&l| t.eps0.iter().map(move |&e| (l, e)))
            .collect(),
        None => vec![(0, 0.0)],
    };
    let mut out = Vec::new();
    for lattice in &system.lattices {
        for &model in &system.models {
            for &m_true in &drive.cutoffs {
                for &(tail_len, eps0) in &tails {
                    for &samples in &grid.samples {
                        for seed in cfg.seed_list() {
                            out.push(Cell {
                                lattice: *lattice,
                                model,
                                m_true,
                                tail_len,
                                eps0,
                                seed,
                                samples,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Regenerates the instance behind a cell.
pub fn instance(cfg: &ExperimentConfig, cell: &Cell) -> floquet_core::Result<InstanceRecord> {
    let drive = cfg.drive.as_ref().expect("validated drive block");
    let mut params = GenerationParams::new(cell.lattice.0, cell.model, cell.m_true);
    params.period = drive.period;
    params.coeff_range = drive.coeff_range;
    if cell.tail_len > 0 {
        let decay = drive.tail.as_ref().map_or(floquet_core::Decay::Flat, |t| t.decay);
        params = params.with_tail(TailParams::contiguous(cell.m_true, cell.tail_len, cell.eps0, decay));
    }
    generate_instance(&params, cell.seed)
}

fn observables(cfg: &ExperimentConfig, spec: &DriveSpec, seed: u64) -> floquet_core::Result<ObservableSet> {
    match cfg.learner.observables {
        ObservableConfig::Basis => Ok(ObservableSet::basis_copy(spec.basis())),
        ObservableConfig::Random { count } => ObservableSet::basis_plus_random(spec.basis(), count, seed),
    }
}

fn noise(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<Option<NoiseModel>> {
    match &cfg.learner.noise {
        None => Ok(None),
        Some(n) => {
            let sigma = n.resolved_sigma()?;
            let mut model = NoiseModel::new(sigma, seed)?.with_target(n.target);
            model.shots = n.shots;
            Ok(Some(model))
        }
    }
}

fn base_record(cfg: &ExperimentConfig, cell: &Cell) -> Record {
    let grid = cfg.time_grid(cell.samples);
    Record {
        experiment: cfg.stem(),
        instance_id: cell.instance_id(),
        lattice: cell.lattice.to_string(),
        n: cell.lattice.0.num_sites(),
        model: cell.model.to_string(),
        m_true: cell.m_true,
        tail_len: cell.tail_len,
        eps0: cell.eps0,
        samples: cell.samples,
        substeps: grid.substeps,
        sigma: cfg
            .learner
            .noise
            .as_ref()
            .and_then(|n| n.resolved_sigma().ok())
            .unwrap_or(0.0),
        noise_target: cfg.learner.noise.as_ref().map(|n| {
            match n.target {
                floquet_core::NoiseTarget::Correlators => "correlators",
                floquet_core::NoiseTarget::Beta => "beta",
            }
            .to_string()
        }),
        seed: cell.seed,
        status: "ok".into(),
        ..Record::default()
    }
}

fn fill_fit(rec: &mut Record, truth: &DriveSpec, fit: &Fit) -> floquet_core::Result<()> {
    let core = truth.truncated(truth.cutoff());
    let (mean, std) = frobenius_error(&core, &fit.learned, ERROR_GRID)?;
    let (full_mean, full_std) = frobenius_error(truth, &fit.learned, ERROR_GRID)?;
    rec.m_fit = Some(fit.result.cutoff);
    rec.frob_mean = Some(mean);
    rec.frob_std = Some(std);
    rec.frob_full_mean = Some(full_mean);
    rec.frob_full_std = Some(full_std);
    rec.sigma_min = Some(fit.result.sigma_min);
    rec.sigma_max = Some(fit.result.sigma_max);
    rec.condition = Some(fit.result.condition);
    rec.residual = Some(fit.result.residual_norm);
    rec.rank_deficient = Some(fit.result.rank_deficient);
    rec.symmetry_defect = Some(fit.result.symmetry_defect);
    Ok(())
}

fn fit_cutoffs(cfg: &ExperimentConfig, cell: &Cell) -> Vec<usize> {
    if cfg.learner.fit_cutoffs.is_empty() {
        vec![cell.m_true]
    } else {
        cfg.learner.fit_cutoffs.clone()
    }
}

/// Simulates one cell and fits every configured `(M_fit, m)` pair; failures
/// become records with a non-`ok` status.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Vec<Record> {
    let base = base_record(cfg, cell);
    let start = Instant::now();
    let failed = |e: &dyn std::fmt::Display, start: Instant| {
        vec![Record {
            wall_time: start.elapsed().as_secs_f64(),
            status: format!("error: {e}"),
            ..base.clone()
        }]
    };
    let inst = match instance(cfg, cell) {
        Ok(i) => i,
        Err(e) => return failed(&e, start),
    };
    let sim = match simulate(&inst.spec, &cfg.time_grid(cell.samples), cfg.learner.alpha) {
        Ok(s) => s,
        Err(e) => return failed(&e, start),
    };
    let sim_time = start.elapsed().as_secs_f64();
    let obs = match observables(cfg, &inst.spec, cell.seed) {
        Ok(o) => o,
        Err(e) => return failed(&e, start),
    };
    let noise = match noise(cfg, cell.seed) {
        Ok(n) => n,
        Err(e) => return failed(&e, start),
    };
    let mut base = base;
    base.num_terms = inst.spec.basis().len();
    base.alpha = sim.trajectory.alpha;
    base.eps_alpha = Some(sim.trajectory.eps_alpha);
    base.closure = Some(sim.trajectory.closure);
    base.observables = Some(obs.len());

    if cfg.experiment == ExperimentKind::Adaptive {
        return run_adaptive(cfg, &inst, &sim, &obs, noise, base, sim_time);
    }

    let mut out = Vec::new();
    for m_fit in fit_cutoffs(cfg, cell) {
        for &m in &cfg.learner.stacking {
            let fit_start = Instant::now();
            let mut rec = Record {
                m_fit: Some(m_fit),
                m: Some(m),
                ..base.clone()
            };
            let opts = FitOptions {
                cutoff: m_fit,
                stacking: m,
                observables: obs.clone(),
                noise,
            };
            let outcome = fit_trajectory(&sim.trajectory, inst.spec.basis(), &opts)
                .and_then(|fit| fill_fit(&mut rec, &inst.spec, &fit));
            if let Err(e) = outcome {
                rec.status = format!("error: {e}");
            }
            rec.wall_time = sim_time + fit_start.elapsed().as_secs_f64();
            out.push(rec);
        }
    }
    out
}

fn run_adaptive(
    cfg: &ExperimentConfig,
    inst: &InstanceRecord,
    sim: &Simulation,
    obs: &ObservableSet,
    noise: Option<NoiseModel>,
    base: Record,
    sim_time: f64,
) -> Vec<Record> {
    let a = cfg.adaptive.as_ref().expect("validated adaptive block");
    let m = cfg.learner.stacking.first().copied().unwrap_or(1);
    let start = Instant::now();
    let mut fits: Vec<Fit> = Vec::new();
    let outcome = adaptive_truncation(
        |cutoff| {
            let opts = FitOptions {
                cutoff,
                stacking: m,
                observables: obs.clone(),
                noise,
            };
            let fit = fit_trajectory(&sim.trajectory, inst.spec.basis(), &opts)?;
            let learned = fit.learned.clone();
            fits.push(fit);
            Ok(learned)
        },
        a.m_start,
        a.m_max,
        a.threshold,
        a.stability,
    );
    let elapsed = sim_time + start.elapsed().as_secs_f64();
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            return vec![Record {
                m: Some(m),
                wall_time: elapsed,
                status: format!("error: {e}"),
                ..base
            }]
        }
    };
    let mut out = Vec::new();
    for (step, fit) in outcome.history.iter().zip(&fits) {
        let mut rec = Record {
            m: Some(m),
            discrepancy: step.discrepancy,
            m_stop: Some(outcome.m_stop),
            converged: Some(outcome.converged),
            wall_time: elapsed,
            ..base.clone()
        };
        if let Err(e) = fill_fit(&mut rec, &inst.spec, fit) {
            rec.status = format!("error: {e}");
        }
        out.push(rec);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryOutput {
    pub calibration: Option<Calibration>,
    pub verify_rows: usize,
    pub summary: BoundsSummary,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
    pub scaling: Vec<ScalingFit>,
}

pub fn theory_spec(t: &TheoryConfig, seed: u64) -> SyntheticDesignSpec {
    SyntheticDesignSpec {
        k: t.k,
        s: t.verify_rows.unwrap_or(t.k.max(1)),
        mu0: t.mu0,
        mu1: t.mu1,
        family: t.family,
        psi: 1.0,
        sigma_noise: t.sigma,
        eps0: t.eps0,
        mismatch: t.mismatch,
        delta: t.delta,
        trials: t.trials,
        seed,
    }
}

/// Calibrates the sample-size constant on one seed, verifies the bounds on a
/// fresh seed at the implied row count, then fits the scaling exponents.
pub fn run_theory(cfg: &ExperimentConfig) -> anyhow::Result<TheoryOutput> {
    let t = cfg.theory.as_ref().context("theory block missing")?;
    let spec = theory_spec(t, cfg.seed);
    let (calibration, verify_rows) = match t.verify_rows {
        Some(s) => (None, s),
        None => {
            let cal = calibrate_bernstein(&spec, SpectralEvent::SigmaMin)?;
            let s = floquet_core::bernstein_rows(cal.fitted_c, spec.psi, spec.mu0, spec.mu1, spec.k, spec.delta);
            (Some(cal), s)
        }
    };
    let verify = SyntheticDesignSpec {
        s: verify_rows,
        seed: cfg.seed.wrapping_add(1),
        ..spec.clone()
    };
    let (summary, trials) = verify_bounds(&verify, None)?;
    let mut scaling = Vec::new();
    let as_f64 = |v: &[usize]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    if !t.rows.is_empty() {
        scaling.push(scaling_fit(&spec, ScalingAxis::Rows, &as_f64(&t.rows))?);
    }
    if !t.dims.is_empty() {
        let s = t.dims_rows.unwrap_or(4096);
        let base = SyntheticDesignSpec { s, ..spec.clone() };
        scaling.push(scaling_fit(&base, ScalingAxis::Dimension, &as_f64(&t.dims))?);
    }
    if !t.sigmas.is_empty() {
        let s = t.rows.first().copied().unwrap_or(verify_rows);
        let base = SyntheticDesignSpec { s, ..spec.clone() };
        scaling.push(scaling_fit(&base, ScalingAxis::Noise, &t.sigmas)?);
    }
    Ok(TheoryOutput {
        calibration,
        verify_rows,
        summary,
        trials,
        scaling,
    })
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub theory: Option<TheoryOutput>,
}

/// Validates and runs the whole experiment on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let diags = validate(cfg);
    if has_errors(&diags) {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        bail!("invalid config:\n  {}", lines.join("\n  "));
    }
    if cfg.experiment == ExperimentKind::Theory {
        return Ok(Outcome {
            records: Vec::new(),
            theory: Some(run_theory(cfg)?),
        });
    }
    let cells = cells(cfg);
    let records: Vec<Record> = cells
        .par_iter()
        .map(|c| run_cell(cfg, c))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(Outcome { records, theory: None })
}
