//! Time evolution under a periodic drive, Floquet spectrum of the one-period
//! propagator, sampled Floquet-mode trajectories and their Fourier bands.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::Eig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive_model::DriveSpec;
use crate::error::{Error, Result};
use crate::pauli_algebra::PauliSum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Unitarity tolerance accepted by [`floquet_eigen`].
pub const UNITARY_TOL: f64 = 1e-6;
/// Eigenvalues of the monodromy closer than this are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-8;
/// Largest `τ·‖H‖₁` handled by a single Taylor expansion.
const TAYLOR_PIECE: f64 = 0.5;

/// Sampling and integration grid over one period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Samples per period; also the number of integration segments.
    pub samples: usize,
    /// Left-endpoint sub-steps inside each sampling segment.
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl TimeGrid {
    pub fn new(samples: usize) -> Self {
        Self { samples, substeps: 1 }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.substeps == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs samples >= 1 and substeps >= 1, got {} and {}",
                self.samples, self.substeps
            )));
        }
        Ok(())
    }
}

/// `block ← exp(−iτH)·block` by a truncated Taylor series, split into pieces
/// with `τ‖H‖₁ ≤ 1/2` so every expansion converges in a handful of terms.
pub fn expm_apply(h: &PauliSum, tau: f64, block: &mut Array2<Complex64>) {
    let norm = tau.abs() * h.l1_norm();
    if norm == 0.0 {
        return;
    }
    let pieces = (norm / TAYLOR_PIECE).ceil().max(1.0) as usize;
    let factor = Complex64::new(0.0, -tau / pieces as f64);
    let mut term = Array2::<Complex64>::zeros(block.raw_dim());
    let mut next = Array2::<Complex64>::zeros(block.raw_dim());
    for _ in 0..pieces {
        term.assign(block);
        for k in 1..=64 {
            h.apply_block(term.view(), &mut next);
            let scale = factor / k as f64;
            next.mapv_inplace(|v| v * scale);
            *block += &next;
            std::mem::swap(&mut term, &mut next);
            let tn = frobenius(&term);
            if tn <= 1e-17 * frobenius(block) || tn == 0.0 {
                break;
            }
        }
    }
}

fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Left endpoints and length of every integration step.
fn steps(spec: &DriveSpec, grid: &TimeGrid) -> impl Iterator<Item = (usize, f64, f64)> {
    let n = grid.samples;
    let sub = grid.substeps;
    let tau = spec.period() / (n * sub) as f64;
    (0..n * sub).map(move |j| (j / sub, j as f64 * tau, tau))
}

fn check_finite(block: &Array2<Complex64>) -> Result<()> {
    if block.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("propagator"))
    }
}

/// Propagators sampled on the grid.
#[derive(Clone, Debug)]
pub struct Propagation {
    /// `U(T, 0)`
    pub monodromy: Array2<Complex64>,
    /// `U(t_n, 0)` for `n = 0..N−1`
    pub snapshots: Vec<Array2<Complex64>>,
}

/// Composes left-endpoint steps `exp(−iH(t_left)Δt/substeps)` into `U(t_n, 0)`
/// for every sample and `U(T, 0)`. Memory grows as `N·4^n`; use [`monodromy`]
/// when only the one-period propagator is needed.
pub fn propagate(spec: &DriveSpec, grid: &TimeGrid) -> Result<Propagation> {
    grid.validate()?;
    let dim = spec.dim();
    let mut u = Array2::<Complex64>::eye(dim);
    let mut snapshots = Vec::with_capacity(grid.samples);
    let mut last = usize::MAX;
    for (n, t, tau) in steps(spec, grid) {
        if n != last {
            snapshots.push(u.clone());
            last = n;
        }
        expm_apply(&spec.pauli_sum_at(t), tau, &mut u);
    }
    check_finite(&u)?;
    Ok(Propagation {
        monodromy: u,
        snapshots,
    })
}

/// `U(T, 0)` on the given grid.
pub fn monodromy(spec: &DriveSpec, grid: &TimeGrid) -> Result<Array2<Complex64>> {
    grid.validate()?;
    let mut u = Array2::<Complex64>::eye(spec.dim());
    for (_, t, tau) in steps(spec, grid) {
        expm_apply(&spec.pauli_sum_at(t), tau, &mut u);
    }
    check_finite(&u)?;
    Ok(u)
}

/// `max |U†U − I|`
pub fn unitarity_defect(u: &Array2<Complex64>) -> f64 {
    let prod = u.t().mapv(|v| v.conj()).dot(u);
    prod.indexed_iter()
        .map(|((i, j), v)| (v - if i == j { ONE } else { ZERO }).norm())
        .fold(0.0, f64::max)
}

/// Folds a quasienergy into the principal branch `(−ω/2, ω/2]`.
pub fn fold_quasienergy(eps: f64, omega: f64) -> f64 {
    let x = eps.rem_euclid(omega);
    if x > omega / 2.0 {
        x - omega
    } else {
        x
    }
}

#[derive(Clone, Debug)]
pub struct FloquetSolution {
    pub omega: f64,
    pub period: f64,
    /// Ascending, inside `(−ω/2, ω/2]`.
    pub quasienergies: Vec<f64>,
    /// Column `α` is the eigenvector of `quasienergies[α]`.
    pub eigenvectors: Array2<Complex64>,
    pub monodromy: Array2<Complex64>,
}

impl FloquetSolution {
    pub fn dim(&self) -> usize {
        self.quasienergies.len()
    }

    /// Index of the quasienergy closest to zero (lowest index on ties).
    pub fn closest_to_zero(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.quasienergies.iter().enumerate() {
            if e.abs() < self.quasienergies[best].abs() {
                best = i;
            }
        }
        best
    }

    pub fn eigenvector(&self, alpha: usize) -> Result<ArrayView1<'_, Complex64>> {
        if alpha >= self.dim() {
            return Err(Error::InvalidAlpha { alpha, dim: self.dim() });
        }
        Ok(self.eigenvectors.column(alpha))
    }

    /// `max_α ‖U v_α − e^{−iε_α T} v_α‖`
    pub fn eigen_residual(&self) -> f64 {
        let uv = self.monodromy.dot(&self.eigenvectors);
        (0..self.dim())
            .map(|a| {
                let lambda = Complex64::from_polar(1.0, -self.quasienergies[a] * self.period);
                let r = &uv.column(a) - &self.eigenvectors.column(a).mapv(|v| v * lambda);
                r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Spectral decomposition of a one-period propagator. Eigenvectors of
/// (numerically) coincident eigenvalues are orthonormalised within their
/// cluster; quasienergies are `−arg(λ)/T` on the principal branch.
pub fn floquet_eigen(monodromy: &Array2<Complex64>, omega: f64) -> Result<FloquetSolution> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if monodromy.nrows() != monodromy.ncols() {
        return Err(Error::DimensionMismatch("monodromy is not square".into()));
    }
    if monodromy.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("monodromy"));
    }
    let defect = unitarity_defect(monodromy);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    let period = 2.0 * PI / omega;
    let dim = monodromy.nrows();
    let (values, mut vectors) = monodromy.eig()?;

    // Group eigenvalues into clusters along the unit circle.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].arg().total_cmp(&values[b].arg()));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) if (values[i] - values[*c.last().unwrap()]).norm() < CLUSTER_TOL => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    if clusters.len() > 1 {
        let first = clusters[0][0];
        let last = *clusters.last().unwrap().last().unwrap();
        if (values[first] - values[last]).norm() < CLUSTER_TOL {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }
    for cluster in &clusters {
        for (pos, &i) in cluster.iter().enumerate() {
            for &j in &cluster[..pos] {
                let proj: Complex64 = vectors
                    .column(j)
                    .iter()
                    .zip(vectors.column(i).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let vj = vectors.column(j).to_owned();
                vectors.column_mut(i).scaled_add(-proj, &vj);
            }
            let norm = vectors.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            vectors.column_mut(i).mapv_inplace(|v| v / norm);
        }
    }

    // Rayleigh quotients give phases consistent with the orthonormalised vectors.
    let uv = monodromy.dot(&vectors);
    let mut pairs: Vec<(f64, usize)> = (0..dim)
        .map(|a| {
            let lambda: Complex64 = vectors
                .column(a)
                .iter()
                .zip(uv.column(a).iter())
                .map(|(v, w)| v.conj() * w)
                .sum();
            (fold_quasienergy(-lambda.arg() / period, omega), a)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut eigenvectors = Array2::<Complex64>::zeros((dim, dim));
    for (dst, &(_, src)) in pairs.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&vectors.column(src));
    }
    Ok(FloquetSolution {
        omega,
        period,
        quasienergies: pairs.into_iter().map(|p| p.0).collect(),
        eigenvectors,
        monodromy: monodromy.clone(),
    })
}

/// Sampled periodic part of one Floquet solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: usize,
    pub period: f64,
    pub dt: f64,
    /// Row `n` holds `|u(t_n)⟩`.
    pub states: Array2<Complex64>,
    pub alpha: Option<usize>,
    pub eps_alpha: f64,
    /// `‖e^{iεT}U(T,0)|ψ(0)⟩ − |ψ(0)⟩‖` on the same grid.
    pub closure: f64,
}

impl Trajectory {
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, n: usize) -> ArrayView1<'_, Complex64> {
        self.states.row(n)
    }

    /// Largest deviation of any state norm from one.
    pub fn norm_defect(&self) -> f64 {
        self.states
            .axis_iter(Axis(0))
            .map(|r| (r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Debug dump: one row per sample, `n, t, re_0, im_0, re_1, im_1, …`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "n,t")?;
        for b in 0..self.dim() {
            write!(w, ",re_{b},im_{b}")?;
        }
        writeln!(w)?;
        for (n, row) in self.states.axis_iter(Axis(0)).enumerate() {
            write!(w, "{n},{:e}", n as f64 * self.dt)?;
            for v in row {
                write!(w, ",{:e},{:e}", v.re, v.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `|u(t_n)⟩ = e^{iεt_n} U(t_n, 0)|ψ(0)⟩` on the grid for an arbitrary start
/// state and quasienergy.
pub fn mode_trajectory_from(
    spec: &DriveSpec,
    psi0: ArrayView1<Complex64>,
    eps: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    grid.validate()?;
    let dim = spec.dim();
    if psi0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {dim}",
            psi0.len()
        )));
    }
    let n_samples = grid.samples;
    let dt = spec.period() / n_samples as f64;
    let mut psi = psi0.to_owned().insert_axis(Axis(1));
    let mut states = Array2::<Complex64>::zeros((n_samples, dim));
    let mut last = usize::MAX;
    for (n, t, tau) in steps(spec, grid) {
        if n != last {
            let phase = Complex64::from_polar(1.0, eps * n as f64 * dt);
            states.row_mut(n).assign(&psi.column(0).mapv(|v| v * phase));
            last = n;
        }
        expm_apply(&spec.pauli_sum_at(t), tau, &mut psi);
    }
    check_finite(&psi)?;
    let back = Complex64::from_polar(1.0, eps * spec.period());
    let closure = psi
        .column(0)
        .iter()
        .zip(psi0.iter())
        .map(|(a, b)| (a * back - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(Trajectory {
        samples: n_samples,
        period: spec.period(),
        dt,
        states,
        alpha: None,
        eps_alpha: eps,
        closure,
    })
}

/// Floquet-mode trajectory of eigenstate `alpha` of `solution`.
pub fn floquet_mode_trajectory(
    spec: &DriveSpec,
    solution: &FloquetSolution,
    alpha: usize,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let psi0 = solution.eigenvector(alpha)?;
    let mut traj = mode_trajectory_from(spec, psi0, solution.quasienergies[alpha], grid)?;
    traj.alpha = Some(alpha);
    Ok(traj)
}

/// Discrete Fourier components `|u^k⟩ = (1/N) Σ_n e^{ikωt_n} |u(t_n)⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandVectors {
    pub k_min: i64,
    pub k_max: i64,
    /// Row `k − k_min` holds `|u^k⟩`.
    pub vectors: Array2<Complex64>,
}

impl BandVectors {
    pub fn get(&self, k: i64) -> Result<ArrayView1<'_, Complex64>> {
        if k < self.k_min || k > self.k_max {
            return Err(Error::MissingBand {
                k,
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        Ok(self.vectors.row((k - self.k_min) as usize))
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i64> {
        self.k_min..=self.k_max
    }
}

pub fn band_vectors(traj: &Trajectory, k_min: i64, k_max: i64) -> Result<BandVectors> {
    let n = traj.samples;
    if n == 0 || traj.states.nrows() == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if k_min > k_max {
        return Err(Error::InvalidParameter(format!("empty band range [{k_min}, {k_max}]")));
    }
    // e^{ikωt_n} = e^{2πi·(kn mod N)/N}; indexing the table keeps aliasing exact.
    let roots: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
        .collect();
    let count = (k_max - k_min + 1) as usize;
    let mut vectors = Array2::<Complex64>::zeros((count, traj.dim()));
    let inv = 1.0 / n as f64;
    for (row, k) in (k_min..=k_max).enumerate() {
        let kk = k.rem_euclid(n as i64) as usize;
        let mut acc = vectors.row_mut(row);
        for (idx, state) in traj.states.axis_iter(Axis(0)).enumerate() {
            let w = roots[(kk * idx) % n] * inv;
            acc.scaled_add(w, &state);
        }
    }
    Ok(BandVectors { k_min, k_max, vectors })
}

/// `‖(ε + kω)|u^k⟩ − Σ_{q=−M}^{M} H_q |u^{k−q}⟩‖` for the retained band of `spec`.
pub fn band_residual(spec: &DriveSpec, eps: f64, bands: &BandVectors, k: i64) -> Result<f64> {
    let m = spec.cutoff() as i64;
    let uk = bands.get(k)?;
    let mut r: Array1<Complex64> = uk.mapv(|v| v * (eps + k as f64 * spec.omega()));
    for q in -m..=m {
        let hq = fourier_component(spec, q);
        let um = bands.get(k - q)?.to_owned();
        r -= &hq.apply(&um);
    }
    Ok(r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
}

/// `H_q` as a Pauli sum.
pub fn fourier_component(spec: &DriveSpec, q: i64) -> PauliSum {
    let c: Vec<Complex64> = spec.coeff(q).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    spec.basis().combine(&c)
}

/// Floquet decomposition plus the trajectory of one mode.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub solution: FloquetSolution,
    pub trajectory: Trajectory,
}

/// Monodromy, spectrum and the trajectory of `alpha` (default: quasienergy
/// closest to zero).
pub fn simulate(spec: &DriveSpec, grid: &TimeGrid, alpha: Option<usize>) -> Result<Simulation> {
    let u = monodromy(spec, grid)?;
    let solution = floquet_eigen(&u, spec.omega())?;
    let alpha = alpha.unwrap_or_else(|| solution.closest_to_zero());
    let trajectory = floquet_mode_trajectory(spec, &solution, alpha, grid)?;
    Ok(Simulation { solution, trajectory })
}
