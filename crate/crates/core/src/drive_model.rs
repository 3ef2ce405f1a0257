//! Time-periodic Hamiltonians `H(t) = Σ_m e^{-imωt} H_m` with `H_m = Σ_i c_{m,i} P_i`,
//! optional residual Fourier tails, random instance generation and the
//! Frobenius error metrics used to score reconstructions.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli_algebra::{build_basis, LatticeSpec, Model, OperatorBasis, PauliSum};

/// Number of equally spaced instants in `[0, T)` used by every error metric.
pub const ERROR_GRID: usize = 20;

/// Envelope applied to residual orders beyond the learned cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Decay {
    Flat,
    Algebraic { p: f64 },
    Geometric { gamma: f64 },
}

impl Decay {
    /// Relative weight of order `m` against the first residual order `first`.
    pub fn envelope(&self, m: i64, first: u64) -> f64 {
        let m = m.unsigned_abs() as f64;
        let first = first as f64;
        match *self {
            Decay::Flat => 1.0,
            Decay::Algebraic { p } => (first / m).powf(p + 1.0),
            Decay::Geometric { gamma } => (-gamma * (m - first)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailOrder {
    pub m: i64,
    pub c: Vec<f64>,
}

/// Residual Fourier content `ε₀ Σ_{|m|>M} e^{-imωt} H_m`. Stored coefficients
/// already carry the decay envelope; `eps0` multiplies them at evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub eps0: f64,
    pub decay: Decay,
    pub orders: Vec<TailOrder>,
}

impl TailSpec {
    pub fn max_order(&self) -> u64 {
        self.orders.iter().map(|o| o.m.unsigned_abs()).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Band {
    m: i64,
    c: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DriveRecord {
    period: f64,
    omega: f64,
    cutoff: usize,
    basis: OperatorBasis,
    coeffs: Vec<Band>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailSpec>,
}

/// A truncated-Fourier drive over a fixed operator basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DriveRecord", into = "DriveRecord")]
pub struct DriveSpec {
    period: f64,
    omega: f64,
    cutoff: usize,
    basis: OperatorBasis,
    /// `coeffs[m + cutoff][i] = c_{m,i}`
    coeffs: Vec<Vec<f64>>,
    tail: Option<TailSpec>,
}

impl From<DriveSpec> for DriveRecord {
    fn from(s: DriveSpec) -> Self {
        let cutoff = s.cutoff as i64;
        DriveRecord {
            period: s.period,
            omega: s.omega,
            cutoff: s.cutoff,
            basis: s.basis,
            coeffs: s
                .coeffs
                .into_iter()
                .enumerate()
                .map(|(idx, c)| Band {
                    m: idx as i64 - cutoff,
                    c,
                })
                .collect(),
            tail: s.tail,
        }
    }
}

impl TryFrom<DriveRecord> for DriveSpec {
    type Error = Error;

    fn try_from(r: DriveRecord) -> Result<Self> {
        let cutoff = r.cutoff as i64;
        let expected: Vec<i64> = (-cutoff..=cutoff).collect();
        let got: Vec<i64> = r.coeffs.iter().map(|b| b.m).collect();
        if got != expected {
            return Err(Error::InvalidParameter(format!(
                "coefficient bands {got:?} do not cover [-{cutoff}, {cutoff}] in order"
            )));
        }
        let spec = DriveSpec::new(
            r.period,
            r.cutoff,
            r.basis,
            r.coeffs.into_iter().map(|b| b.c).collect(),
            r.tail,
        )?;
        if (spec.omega - r.omega).abs() > 1e-12 * spec.omega.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega {} inconsistent with period {}",
                r.omega, r.period
            )));
        }
        Ok(spec)
    }
}

impl DriveSpec {
    /// `coeffs` lists bands `m = -cutoff ..= cutoff` in ascending order.
    pub fn new(
        period: f64,
        cutoff: usize,
        basis: OperatorBasis,
        coeffs: Vec<Vec<f64>>,
        tail: Option<TailSpec>,
    ) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {period}"
            )));
        }
        let r = basis.len();
        if coeffs.len() != 2 * cutoff + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient bands given for cutoff {cutoff}",
                coeffs.len()
            )));
        }
        for (idx, band) in coeffs.iter().enumerate() {
            if band.len() != r {
                return Err(Error::DimensionMismatch(format!(
                    "band {} has {} coefficients, basis has {r}",
                    idx as i64 - cutoff as i64,
                    band.len()
                )));
            }
            if band.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("drive coefficients"));
            }
        }
        if let Some(tail) = &tail {
            if !(tail.eps0.is_finite() && tail.eps0 >= 0.0) {
                return Err(Error::InvalidParameter(format!("eps0 must be >= 0, got {}", tail.eps0)));
            }
            let mut seen = std::collections::HashSet::new();
            for o in &tail.orders {
                if o.m.unsigned_abs() as usize <= cutoff {
                    return Err(Error::TailOverlap { order: o.m, cutoff });
                }
                if !seen.insert(o.m) {
                    return Err(Error::InvalidParameter(format!("tail order {} repeated", o.m)));
                }
                if o.c.len() != r {
                    return Err(Error::DimensionMismatch(format!(
                        "tail order {} has {} coefficients, basis has {r}",
                        o.m,
                        o.c.len()
                    )));
                }
            }
        }
        Ok(Self {
            period,
            omega: 2.0 * PI / period,
            cutoff,
            basis,
            coeffs,
            tail,
        })
    }

    /// Drive with every coefficient zero.
    pub fn zeros(period: f64, cutoff: usize, basis: OperatorBasis) -> Result<Self> {
        let r = basis.len();
        Self::new(period, cutoff, basis, vec![vec![0.0; r]; 2 * cutoff + 1], None)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn num_qubits(&self) -> usize {
        self.basis.num_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits()
    }

    pub fn tail(&self) -> Option<&TailSpec> {
        self.tail.as_ref()
    }

    /// `c_{m,·}`; zeros outside the retained band.
    pub fn coeff(&self, m: i64) -> Vec<f64> {
        if m.unsigned_abs() as usize > self.cutoff {
            return vec![0.0; self.basis.len()];
        }
        self.coeffs[(m + self.cutoff as i64) as usize].clone()
    }

    pub fn coeff_mut(&mut self, m: i64) -> &mut [f64] {
        assert!(m.unsigned_abs() as usize <= self.cutoff, "order {m} outside cutoff");
        &mut self.coeffs[(m + self.cutoff as i64) as usize]
    }

    /// Highest Fourier order present, tail included.
    pub fn max_order(&self) -> usize {
        let tail = self.tail.as_ref().map_or(0, |t| t.max_order() as usize);
        self.cutoff.max(tail)
    }

    /// Per-term weights `w_i(t)` with `H(t) = Σ_i w_i(t) P_i`.
    pub fn weights_at(&self, t: f64) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.basis.len()];
        let mut accumulate = |m: i64, c: &[f64], scale: f64| {
            let phase = Complex64::from_polar(scale, -(m as f64) * self.omega * t);
            for (wi, &ci) in w.iter_mut().zip(c) {
                *wi += phase * ci;
            }
        };
        for (idx, band) in self.coeffs.iter().enumerate() {
            accumulate(idx as i64 - self.cutoff as i64, band, 1.0);
        }
        if let Some(tail) = &self.tail {
            for o in &tail.orders {
                accumulate(o.m, &o.c, tail.eps0);
            }
        }
        w
    }

    pub fn pauli_sum_at(&self, t: f64) -> PauliSum {
        self.basis.combine(&self.weights_at(t))
    }

    /// Dense `H(t)`.
    pub fn eval_h(&self, t: f64) -> Array2<Complex64> {
        self.pauli_sum_at(t).to_dense()
    }

    /// Equivalent tail-free drive whose cutoff is the highest order present;
    /// tail coefficients are folded in with their `eps0` factor.
    pub fn absorb_tail(&self) -> DriveSpec {
        let top = self.max_order();
        let r = self.basis.len();
        let mut coeffs = vec![vec![0.0; r]; 2 * top + 1];
        for (idx, band) in self.coeffs.iter().enumerate() {
            let m = idx as i64 - self.cutoff as i64;
            coeffs[(m + top as i64) as usize].clone_from(band);
        }
        if let Some(tail) = &self.tail {
            for o in &tail.orders {
                let dst = &mut coeffs[(o.m + top as i64) as usize];
                for (d, &c) in dst.iter_mut().zip(&o.c) {
                    *d += tail.eps0 * c;
                }
            }
        }
        DriveSpec {
            period: self.period,
            omega: self.omega,
            cutoff: top,
            basis: self.basis.clone(),
            coeffs,
            tail: None,
        }
    }

    /// `H^{(m_keep)}`: all orders `|m| <= m_keep`, tail-free.
    pub fn truncated(&self, m_keep: usize) -> DriveSpec {
        let full = self.absorb_tail();
        let keep = m_keep.min(full.cutoff);
        let lo = full.cutoff - keep;
        DriveSpec {
            period: self.period,
            omega: self.omega,
            cutoff: keep,
            basis: full.basis,
            coeffs: full.coeffs[lo..lo + 2 * keep + 1].to_vec(),
            tail: None,
        }
    }

    /// `max_{m,i} |c_{m,i} - c_{-m,i}|` over the retained band.
    pub fn symmetry_defect(&self) -> f64 {
        (1..=self.cutoff as i64)
            .flat_map(|m| {
                self.coeff(m)
                    .into_iter()
                    .zip(self.coeff(-m))
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Seeded parameters from which an instance is regenerated bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub lattice: LatticeSpec,
    pub model: Model,
    pub cutoff: usize,
    pub period: f64,
    pub coeff_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub eps0: f64,
    /// Positive orders; each is mirrored to `-m` with the same coefficients.
    pub orders: Vec<u64>,
    pub decay: Decay,
}

impl TailParams {
    /// `length` consecutive orders starting just above `cutoff`.
    pub fn contiguous(cutoff: usize, length: usize, eps0: f64, decay: Decay) -> Self {
        let first = cutoff as u64 + 1;
        Self {
            eps0,
            orders: (first..first + length as u64).collect(),
            decay,
        }
    }
}

impl GenerationParams {
    /// Defaults: `T = 1/2` (ω = 4π) and coefficients uniform on `[-1, 1]`.
    pub fn new(lattice: LatticeSpec, model: Model, cutoff: usize) -> Self {
        Self {
            lattice,
            model,
            cutoff,
            period: 0.5,
            coeff_range: [-1.0, 1.0],
            tail: None,
        }
    }

    pub fn with_tail(mut self, tail: TailParams) -> Self {
        self.tail = Some(tail);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub spec: DriveSpec,
    pub seed: u64,
    pub provenance: GenerationParams,
}

impl InstanceRecord {
    pub fn regenerate(&self) -> Result<InstanceRecord> {
        generate_instance(&self.provenance, self.seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<InstanceRecord> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Draws `c_{m,i}` i.i.d. uniform for `m = 0..=M` and mirrors them to `-m`,
/// so `H(t)` is Hermitian. Tail orders are drawn the same way, rescaled to a
/// common sup-norm and shaped by the decay envelope.
pub fn generate_instance(params: &GenerationParams, seed: u64) -> Result<InstanceRecord> {
    let [lo, hi] = params.coeff_range;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "coefficient range [{lo}, {hi}] is empty"
        )));
    }
    let basis = build_basis(&params.lattice, params.model)?;
    let r = basis.len();
    let m_cut = params.cutoff;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..r).map(|_| rng.random_range(lo..hi)).collect() };

    let mut coeffs = vec![Vec::new(); 2 * m_cut + 1];
    for m in 0..=m_cut {
        let c = draw(&mut rng);
        coeffs[m_cut - m] = c.clone();
        coeffs[m_cut + m] = c;
    }

    let tail = match &params.tail {
        None => None,
        Some(tp) => {
            let first = m_cut as u64 + 1;
            let amplitude = lo.abs().max(hi.abs());
            let mut orders = Vec::with_capacity(2 * tp.orders.len());
            for &m in &tp.orders {
                if m as usize <= m_cut {
                    return Err(Error::TailOverlap {
                        order: m as i64,
                        cutoff: m_cut,
                    });
                }
                let raw = draw(&mut rng);
                let sup = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let scale = if sup > 0.0 {
                    amplitude * tp.decay.envelope(m as i64, first) / sup
                } else {
                    0.0
                };
                let c: Vec<f64> = raw.iter().map(|v| v * scale).collect();
                orders.push(TailOrder {
                    m: -(m as i64),
                    c: c.clone(),
                });
                orders.push(TailOrder { m: m as i64, c });
            }
            Some(TailSpec {
                eps0: tp.eps0,
                decay: tp.decay,
                orders,
            })
        }
    };

    let spec = DriveSpec::new(params.period, m_cut, basis, coeffs, tail)?;
    Ok(InstanceRecord {
        spec,
        seed,
        provenance: params.clone(),
    })
}

fn check_compatible(a: &DriveSpec, b: &DriveSpec) -> Result<()> {
    if a.num_qubits() != b.num_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} qubits",
            a.num_qubits(),
            b.num_qubits()
        )));
    }
    Ok(())
}

fn grid_times(period: f64, grid: usize) -> impl Iterator<Item = f64> {
    (0..grid).map(move |g| g as f64 * period / grid as f64)
}

fn difference_norm(a: &DriveSpec, b: &DriveSpec, t: f64) -> f64 {
    let mut diff = a.pauli_sum_at(t);
    diff.add_scaled(&b.pauli_sum_at(t), Complex64::new(-1.0, 0.0));
    diff.frobenius_norm()
}

/// Mean and (population) standard deviation of `‖H_true(t) − H_learned(t)‖_F`
/// over `grid` equally spaced instants of the true period.
pub fn frobenius_error(truth: &DriveSpec, learned: &DriveSpec, grid: usize) -> Result<(f64, f64)> {
    check_compatible(truth, learned)?;
    if grid == 0 {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    let errs: Vec<f64> = grid_times(truth.period, grid)
        .map(|t| difference_norm(truth, learned, t))
        .collect();
    Ok(mean_std(&errs))
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `max_t ‖H(t) − H^{(m_keep)}(t)‖_F` over the standard error grid.
pub fn tail_truncation_error(spec: &DriveSpec, m_keep: usize) -> f64 {
    if m_keep >= spec.max_order() {
        return 0.0;
    }
    let kept = spec.truncated(m_keep);
    grid_times(spec.period, ERROR_GRID)
        .map(|t| difference_norm(spec, &kept, t))
        .fold(0.0, f64::max)
}
