//! Correlators between Floquet bands, the stacked real-valued design system,
//! least-squares reconstruction, adaptive cutoff selection and the sample
//! bound calculators.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::drive_model::{DriveSpec, ERROR_GRID};
use crate::error::{Error, Result};
use crate::floquet_engine::{band_vectors, BandVectors, Trajectory};
use crate::pauli_algebra::{OperatorBasis, Pauli, PauliString, PauliSum};

/// Singular-value ratio below which a system is reported rank-deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservableProvenance {
    BasisCopy,
    BasisPlusRandom { count: usize, seed: u64 },
}

/// Hermitian probe observables `A_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub observables: Vec<PauliString>,
    pub provenance: ObservableProvenance,
}

impl ObservableSet {
    /// `A_j = P_j`, so `L = R`.
    pub fn basis_copy(basis: &OperatorBasis) -> Self {
        Self {
            observables: basis.words().cloned().collect(),
            provenance: ObservableProvenance::BasisCopy,
        }
    }

    /// Basis copy extended by `count` distinct random Pauli strings of weight
    /// one or two that are not already present.
    pub fn basis_plus_random(basis: &OperatorBasis, count: usize, seed: u64) -> Result<Self> {
        let n = basis.num_qubits();
        let mut observables: Vec<PauliString> = basis.words().cloned().collect();
        let mut seen: HashSet<String> = observables.iter().map(|p| p.word()).collect();
        let available = 3 * n + 9 * n * n.saturating_sub(1) / 2;
        if seen.len() + count > available + basis.len() || count > available {
            return Err(Error::InvalidParameter(format!(
                "cannot draw {count} distinct weight-<=2 strings on {n} qubits"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let letters = [Pauli::X, Pauli::Y, Pauli::Z];
        let mut added = 0;
        let mut attempts = 0usize;
        while added < count {
            attempts += 1;
            if attempts > 1000 * (count + 1) {
                return Err(Error::InvalidParameter(format!(
                    "could not find {count} fresh random observables"
                )));
            }
            let weight = if n == 1 { 1 } else { rng.random_range(1..=2) };
            let a = rng.random_range(0..n);
            let mut placements = vec![(a, letters[rng.random_range(0..3)])];
            if weight == 2 {
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                placements.push((b, letters[rng.random_range(0..3)]));
            }
            let p = PauliString::on_sites(n, &placements)?;
            if seen.insert(p.word()) {
                observables.push(p);
                added += 1;
            }
        }
        Ok(Self {
            observables,
            provenance: ObservableProvenance::BasisPlusRandom { count, seed },
        })
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }
}

/// Where synthetic measurement noise enters the system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTarget {
    /// Every correlator, design entries and right-hand side alike.
    #[default]
    Correlators,
    /// Right-hand side only.
    Beta,
}

/// Independent Gaussian perturbations of the real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub target: NoiseTarget,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            shots: None,
            seed,
            target: NoiseTarget::Correlators,
        })
    }

    /// `σ = 1/√N_s`
    pub fn from_shots(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shot count must be positive".into()));
        }
        let mut model = Self::new(1.0 / (shots as f64).sqrt(), seed)?;
        model.shots = Some(shots);
        Ok(model)
    }

    pub fn with_target(mut self, target: NoiseTarget) -> Self {
        self.target = target;
        self
    }
}

/// Band indices `[−M−m, M+m]`; empty when `M + m < 0`.
pub fn stacking_range(cutoff: usize, m: i64) -> Vec<i64> {
    let top = cutoff as i64 + m;
    if top < 0 {
        Vec::new()
    } else {
        (-top..=top).collect()
    }
}

fn inner(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨u^k| A P |u^m⟩`
pub fn correlator(bands: &BandVectors, a: &PauliString, p: &PauliString, k: i64, m: i64) -> Result<Complex64> {
    let uk = bands.get(k)?;
    let um = bands.get(m)?.to_owned();
    let pu = p.apply(&um);
    let apu = a.apply(&pu);
    Ok(inner(uk, apu.view()))
}

/// `(ε_α + kω)⟨u^k| A |u^k⟩`
pub fn beta_entry(bands: &BandVectors, eps_alpha: f64, omega: f64, a: &PauliString, k: i64) -> Result<Complex64> {
    let uk = bands.get(k)?;
    let au = a.apply(&uk.to_owned());
    Ok(inner(uk, au.view()) * (eps_alpha + k as f64 * omega))
}

/// Stacked system `A c = β` split into real row pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSystem {
    /// Complex design, rows `(k, j)`, columns `(q, i)`.
    pub a: Array2<Complex64>,
    pub beta: Array1<Complex64>,
    pub row_index: Vec<(i64, usize)>,
    /// Orders descend from `M` to `−M`; terms ascend within each order.
    pub col_index: Vec<(i64, usize)>,
    pub k_set: Vec<i64>,
    pub cutoff: usize,
    pub num_terms: usize,
}

impl DesignSystem {
    /// Real rows `2r` and `2r+1` hold the real and imaginary parts of complex row `r`.
    pub fn real_split(&self) -> (Array2<f64>, Array1<f64>) {
        let (rows, cols) = self.a.dim();
        let mut a = Array2::<f64>::zeros((2 * rows, cols));
        let mut b = Array1::<f64>::zeros(2 * rows);
        for r in 0..rows {
            for c in 0..cols {
                a[[2 * r, c]] = self.a[[r, c]].re;
                a[[2 * r + 1, c]] = self.a[[r, c]].im;
            }
            b[2 * r] = self.beta[r].re;
            b[2 * r + 1] = self.beta[r].im;
        }
        (a, b)
    }

    /// Real row count `S = 2·|k_set|·L`.
    pub fn real_rows(&self) -> usize {
        2 * self.a.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.a.ncols()
    }

    /// Column position of `c_{q,i}`.
    pub fn column_of(&self, q: i64, i: usize) -> usize {
        (self.cutoff as i64 - q) as usize * self.num_terms + i
    }

    /// Stacks coefficients of `spec` in column order.
    pub fn coefficient_vector(&self, spec: &DriveSpec) -> Array1<f64> {
        let mut c = Array1::zeros(self.num_columns());
        for (col, &(q, i)) in self.col_index.iter().enumerate() {
            c[col] = spec.coeff(q)[i];
        }
        c
    }

    /// `‖A c − β‖₂`
    pub fn residual(&self, c: &Array1<f64>) -> f64 {
        let cc = c.mapv(|v| Complex64::new(v, 0.0));
        let r = self.a.dot(&cc) - &self.beta;
        r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Assembles rows `(k, j)` for `k ∈ k_set` against columns `(q, i)` with
/// entries `⟨u^k| A_j P_i |u^{k−q}⟩` and right-hand side
/// `(ε + kω)⟨u^k| A_j |u^k⟩`.
pub fn assemble_system(
    bands: &BandVectors,
    eps_alpha: f64,
    omega: f64,
    basis: &OperatorBasis,
    observables: &ObservableSet,
    cutoff: usize,
    k_set: &[i64],
    noise: Option<&NoiseModel>,
) -> Result<DesignSystem> {
    let mut distinct = HashSet::new();
    if !k_set.iter().all(|k| distinct.insert(*k)) {
        return Err(Error::InvalidParameter(format!("band indices {k_set:?} repeat")));
    }
    let n = basis.num_qubits();
    if let Some(bad) = observables.observables.iter().find(|a| a.num_qubits() != n) {
        return Err(Error::DimensionMismatch(format!(
            "observable {bad} acts on {} qubits, basis on {n}",
            bad.num_qubits()
        )));
    }
    let m = cutoff as i64;
    for &k in k_set {
        for probe in [k - m, k + m] {
            bands.get(probe)?;
        }
    }
    let r = basis.len();
    let l = observables.len();
    let cols = (2 * cutoff + 1) * r;
    let rows = k_set.len() * l;

    let needed: Vec<i64> = match (k_set.iter().min(), k_set.iter().max()) {
        (Some(lo), Some(hi)) => (lo - m..=hi + m).collect(),
        _ => Vec::new(),
    };
    // P_i |u^k'⟩ for every band that appears in a column.
    let mut p_u: Vec<Vec<Array1<Complex64>>> = Vec::with_capacity(needed.len());
    for &kp in &needed {
        let u = bands.get(kp)?.to_owned();
        p_u.push(basis.words().map(|p| p.apply(&u)).collect());
    }
    let band_pos = |k: i64| (k - needed[0]) as usize;

    let mut a = Array2::<Complex64>::zeros((rows, cols));
    let mut beta = Array1::<Complex64>::zeros(rows);
    let mut row_index = Vec::with_capacity(rows);
    for (kpos, &k) in k_set.iter().enumerate() {
        let uk = bands.get(k)?.to_owned();
        for (j, obs) in observables.observables.iter().enumerate() {
            let row = kpos * l + j;
            row_index.push((k, j));
            // ⟨u^k| A = (A |u^k⟩)† for Hermitian A
            let au = obs.apply(&uk);
            beta[row] = inner(au.view(), uk.view()) * (eps_alpha + k as f64 * omega);
            for q in (-m..=m).rev() {
                let src = &p_u[band_pos(k - q)];
                for (i, pu) in src.iter().enumerate() {
                    a[[row, (m - q) as usize * r + i]] = inner(au.view(), pu.view());
                }
            }
        }
    }
    let col_index = (-m..=m).rev().flat_map(|q| (0..r).map(move |i| (q, i))).collect();

    if let Some(noise) = noise {
        if noise.sigma > 0.0 {
            let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let mut perturb = |v: &mut Complex64| {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                *v += Complex64::new(re, im);
            };
            for row in 0..rows {
                if noise.target == NoiseTarget::Correlators {
                    for col in 0..cols {
                        perturb(&mut a[[row, col]]);
                    }
                }
                perturb(&mut beta[row]);
            }
        }
    }

    Ok(DesignSystem {
        a,
        beta,
        row_index,
        col_index,
        k_set: k_set.to_vec(),
        cutoff,
        num_terms: r,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    /// Coefficients in the design's column order.
    pub c_hat: Vec<f64>,
    pub cutoff: usize,
    pub num_terms: usize,
    pub residual_norm: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition: f64,
    pub rank_deficient: bool,
    pub real_rows: usize,
    pub symmetry_defect: f64,
}

impl ReconstructionResult {
    /// `ĉ_{q,i}`
    pub fn coeff(&self, q: i64, i: usize) -> f64 {
        self.c_hat[(self.cutoff as i64 - q) as usize * self.num_terms + i]
    }
}

/// Minimum-norm least squares `min ‖a x − b‖₂` via the SVD; singular values
/// below `RANK_TOL·σ_max` count as zero. Returns the solution and the
/// singular values of `a`.
pub fn min_norm_lstsq(a: &Array2<f64>, b: &Array1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let (rows, cols) = a.dim();
    let mut x = Array1::<f64>::zeros(cols);
    if rows == 0 || cols == 0 {
        return Ok((x, Array1::zeros(0)));
    }
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let (u, vt) = (u.expect("left vectors"), vt.expect("right vectors"));
    let sigma_max = s.iter().cloned().fold(0.0, f64::max);
    let cut = RANK_TOL * sigma_max;
    let utb = u.t().dot(b);
    for (idx, &sv) in s.iter().enumerate() {
        if sv > cut {
            x.scaled_add(utb[idx] / sv, &vt.row(idx));
        }
    }
    Ok((x, s))
}

/// Real least squares on the real-split design; see [`min_norm_lstsq`].
pub fn solve(system: &DesignSystem) -> Result<ReconstructionResult> {
    let (a, b) = system.real_split();
    let (rows, cols) = a.dim();
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design system"));
    }
    let (c, singular) = min_norm_lstsq(&a, &b)?;
    let sigma_max = singular.iter().cloned().fold(0.0, f64::max);
    let sigma_min = if rows < cols || singular.is_empty() {
        0.0
    } else {
        singular.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    let rank_deficient = rows < cols || !(sigma_min > RANK_TOL * sigma_max);
    let residual_norm = system.residual(&c);
    let m = system.cutoff as i64;
    let r = system.num_terms;
    let mut symmetry_defect = 0.0f64;
    for q in 1..=m {
        for i in 0..r {
            let hi = c[system.column_of(q, i)];
            let lo = c[system.column_of(-q, i)];
            symmetry_defect = symmetry_defect.max((hi - lo).abs());
        }
    }
    Ok(ReconstructionResult {
        c_hat: c.to_vec(),
        cutoff: system.cutoff,
        num_terms: r,
        residual_norm,
        sigma_min,
        sigma_max,
        condition,
        rank_deficient,
        real_rows: rows,
        symmetry_defect,
    })
}

/// Maps `ĉ` back onto a drive over `basis` with period `period`; no symmetry
/// is imposed.
pub fn reconstruct(result: &ReconstructionResult, basis: &OperatorBasis, period: f64) -> Result<DriveSpec> {
    if result.num_terms != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "result has {} terms per order, basis has {}",
            result.num_terms,
            basis.len()
        )));
    }
    let m = result.cutoff as i64;
    let coeffs = (-m..=m)
        .map(|q| (0..basis.len()).map(|i| result.coeff(q, i)).collect())
        .collect();
    DriveSpec::new(period, result.cutoff, basis.clone(), coeffs, None)
}

/// Learning configuration applied to one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub cutoff: usize,
    /// Stacking parameter `m` of the band range `[−M−m, M+m]`.
    pub stacking: i64,
    pub observables: ObservableSet,
    pub noise: Option<NoiseModel>,
}

#[derive(Clone, Debug)]
pub struct Fit {
    pub result: ReconstructionResult,
    pub learned: DriveSpec,
}

/// Bands, assembly, solve and reconstruction for one cutoff.
pub fn fit_trajectory(traj: &Trajectory, basis: &OperatorBasis, opts: &FitOptions) -> Result<Fit> {
    let required = 2 * opts.cutoff + 1;
    if traj.samples < required {
        return Err(Error::Nyquist {
            samples: traj.samples,
            cutoff: opts.cutoff,
            required,
        });
    }
    let k_set = stacking_range(opts.cutoff, opts.stacking);
    let reach = k_set.last().copied().unwrap_or(0) + opts.cutoff as i64;
    let bands = band_vectors(traj, -reach, reach)?;
    let system = assemble_system(
        &bands,
        traj.eps_alpha,
        traj.omega(),
        basis,
        &opts.observables,
        opts.cutoff,
        &k_set,
        opts.noise.as_ref(),
    )?;
    let result = solve(&system)?;
    let learned = reconstruct(&result, basis, traj.period)?;
    Ok(Fit { result, learned })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStep {
    pub cutoff: usize,
    /// `None` at the first cutoff, which has no predecessor.
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub m_stop: usize,
    pub converged: bool,
    pub history: Vec<AdaptiveStep>,
    pub learned: DriveSpec,
}

/// `max_t ‖H_a(t) − H_b(t)‖_F / max(1, ‖H_a(t)‖_F)` over the standard grid.
pub fn relative_discrepancy(a: &DriveSpec, b: &DriveSpec) -> f64 {
    (0..ERROR_GRID)
        .map(|g| {
            let t = g as f64 * a.period() / ERROR_GRID as f64;
            let ha = a.pauli_sum_at(t);
            let mut diff: PauliSum = ha.clone();
            diff.add_scaled(&b.pauli_sum_at(t), Complex64::new(-1.0, 0.0));
            diff.frobenius_norm() / ha.frobenius_norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Raises the cutoff from `m_start` until successive reconstructions agree to
/// `threshold` for `stability` consecutive steps, or `m_max` is reached.
pub fn adaptive_truncation<F>(
    mut fit: F,
    m_start: usize,
    m_max: usize,
    threshold: f64,
    stability: usize,
) -> Result<AdaptiveOutcome>
where
    F: FnMut(usize) -> Result<DriveSpec>,
{
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if m_max < m_start || stability == 0 {
        return Err(Error::InvalidParameter(format!(
            "need m_start <= m_max and stability >= 1 (got {m_start}, {m_max}, {stability})"
        )));
    }
    let mut previous = fit(m_start)?;
    let mut history = vec![AdaptiveStep {
        cutoff: m_start,
        discrepancy: None,
    }];
    let mut streak = 0;
    for m in m_start + 1..=m_max {
        let current = fit(m)?;
        let d = relative_discrepancy(&current, &previous);
        history.push(AdaptiveStep {
            cutoff: m,
            discrepancy: Some(d),
        });
        streak = if d < threshold { streak + 1 } else { 0 };
        previous = current;
        if streak >= stability {
            return Ok(AdaptiveOutcome {
                m_stop: m,
                converged: true,
                history,
                learned: previous,
            });
        }
    }
    Ok(AdaptiveOutcome {
        m_stop: m_max,
        converged: false,
        history,
        learned: previous,
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

/// Rows sufficient for accuracy `ε`: `κ²σ²(K + ln(1/δ))/ε²` (unit constant).
pub fn bound_required_s(kappa2: f64, sigma: f64, k: f64, delta: f64, epsilon: f64) -> Result<f64> {
    check_positive("kappa2", kappa2)?;
    check_positive("sigma", sigma)?;
    check_positive("epsilon", epsilon)?;
    check_delta(delta)?;
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("K must be >= 0, got {k}")));
    }
    Ok(kappa2 * sigma * sigma * (k + (1.0 / delta).ln()) / (epsilon * epsilon))
}

/// Constants of the error bound; both default to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: f64,
    pub c_prime: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { c: 1.0, c_prime: 1.0 }
    }
}

/// `C(σ/μ₀)√(μ₁(K + ln(1/δ))/S) + C′(√μ₁/μ₀)ε₀`
#[allow(clippy::too_many_arguments)]
pub fn bound_error(
    sigma: f64,
    mu0: f64,
    mu1: f64,
    k: f64,
    s: f64,
    delta: f64,
    eps0: f64,
    constants: BoundConstants,
) -> Result<f64> {
    check_positive("mu0", mu0)?;
    check_positive("S", s)?;
    check_positive("K", k)?;
    check_delta(delta)?;
    if mu0 > mu1 {
        return Err(Error::InvalidParameter(format!("need mu0 <= mu1, got {mu0} > {mu1}")));
    }
    if !(sigma >= 0.0 && eps0 >= 0.0) {
        return Err(Error::InvalidParameter("sigma and eps0 must be >= 0".into()));
    }
    let stat = constants.c * (sigma / mu0) * (mu1 * (k + (1.0 / delta).ln()) / s).sqrt();
    let bias = constants.c_prime * (mu1.sqrt() / mu0) * eps0;
    Ok(stat + bias)
}

/// Order-of-magnitude resource counts for one reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub distinct_observables: f64,
    pub correlators_per_observable: f64,
    pub sample_complexity: f64,
    pub total_evolution_time: f64,
    pub postprocessing: f64,
    pub solver_memory: f64,
}

pub fn resource_estimate(n: f64, m: f64, r: f64, l: f64, period: f64) -> Result<ResourceEstimate> {
    for (name, v) in [("N", n), ("M", m), ("R", r), ("L", l), ("T", period)] {
        check_positive(name, v)?;
    }
    let width = 2.0 * m + 1.0;
    Ok(ResourceEstimate {
        distinct_observables: width * width * r * l,
        correlators_per_observable: n * n,
        sample_complexity: n * n * m * m * r * l,
        total_evolution_time: n * n * m * m * period * r * l,
        postprocessing: (width * r * l).powi(3),
        solver_memory: (width * r * l).powi(2),
    })
}
