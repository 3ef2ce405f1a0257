//! Pauli words, lattice neighbour tables and the local operator bases of the
//! Ising and Heisenberg drive models.
//!
//! Qubit 0 is the leftmost letter of a word and the most significant bit of a
//! computational basis index, so `"ZI"` realizes `Z ⊗ I`.
//!
//! Two representations coexist:
//!
//! - [`PauliString`]: the user-facing word over `{I, X, Y, Z}` with a real phase.
//! - [`SparsePauli`] / [`PauliSum`]: the `coef · X^x Z^z` bitmask form used for
//!   products, commutators and matrix-free application to state blocks.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest qubit count accepted anywhere dense matrices may be realized.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn xz(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidPauli("zero-qubit word".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::DimensionCap {
            qubits: n,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

/// A Pauli word on `n` qubits with a real multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    letters: Vec<Pauli>,
    phase: f64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, phase: f64) -> Result<Self> {
        check_qubits(letters.len())?;
        if !phase.is_finite() {
            return Err(Error::InvalidPauli(format!("non-finite phase {phase}")));
        }
        Ok(Self { letters, phase })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n], 1.0)
    }

    /// Word with the given letters placed on `sites` and identity elsewhere.
    pub fn on_sites(n: usize, placements: &[(usize, Pauli)]) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &(site, p) in placements {
            if site >= n {
                return Err(Error::InvalidPauli(format!("site {site} outside {n}-qubit register")));
            }
            letters[site] = p;
        }
        Self::new(letters, 1.0)
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Letters only, without the phase.
    pub fn word(&self) -> String {
        self.letters.iter().map(|p| p.to_char()).collect()
    }

    pub fn to_sparse(&self) -> SparsePauli {
        let n = self.letters.len();
        let (mut x, mut z, mut ny) = (0u32, 0u32, 0u32);
        for (q, p) in self.letters.iter().enumerate() {
            let bit = 1u32 << (n - 1 - q);
            let (px, pz) = p.xz();
            if px {
                x |= bit;
            }
            if pz {
                z |= bit;
            }
            if px && pz {
                ny += 1;
            }
        }
        // Y = i X Z
        let coef = I_UNIT.powu(ny) * self.phase;
        SparsePauli { x, z, coef }
    }

    /// Dense `2^n × 2^n` realization.
    pub fn dense(&self) -> Array2<Complex64> {
        let mut sum = PauliSum::new(self.num_qubits());
        sum.push(self.to_sparse());
        sum.to_dense()
    }

    /// `self · v` without forming the matrix.
    pub fn apply(&self, v: &Array1<Complex64>) -> Array1<Complex64> {
        self.to_sparse().apply(self.num_qubits(), v)
    }

    /// True when the two words (ignoring phases) commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        !self.to_sparse().anticommutes(&other.to_sparse())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.phase != 1.0 {
            write!(f, "{}*", self.phase)?;
        }
        f.write_str(&self.word())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts `"ZZIIII"` or `"<phase>*ZZIIII"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, word) = match s.split_once('*') {
            Some((p, w)) => (
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidPauli(format!("bad phase in {s:?}")))?,
                w.trim(),
            ),
            None => (1.0, s),
        };
        let letters = word
            .chars()
            .map(|c| {
                Pauli::from_char(c.to_ascii_uppercase())
                    .ok_or_else(|| Error::InvalidPauli(format!("bad letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters, phase)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `coef · X^x Z^z` where bit `n-1-q` of each mask addresses qubit `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsePauli {
    pub x: u32,
    pub z: u32,
    pub coef: Complex64,
}

impl SparsePauli {
    pub fn mul(&self, other: &SparsePauli) -> SparsePauli {
        // Z^z1 X^x2 = (-1)^{|z1 & x2|} X^x2 Z^z1
        let sign = if (self.z & other.x).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        SparsePauli {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            coef: self.coef * other.coef * sign,
        }
    }

    pub fn anticommutes(&self, other: &SparsePauli) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 1
    }

    pub fn apply(&self, n: usize, v: &Array1<Complex64>) -> Array1<Complex64> {
        let d = 1usize << n;
        let mut out = Array1::zeros(d);
        for b in 0..d {
            let s = if (b as u32 & self.z).count_ones().is_multiple_of(2) {
                self.coef
            } else {
                -self.coef
            };
            out[b ^ self.x as usize] += s * v[b];
        }
        out
    }
}

/// Linear combination of Pauli words with merged duplicate terms.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n: usize,
    terms: Vec<SparsePauli>,
    index: HashMap<(u32, u32), usize>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            terms: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn terms(&self) -> &[SparsePauli] {
        &self.terms
    }

    pub fn push(&mut self, term: SparsePauli) {
        if term.coef == ZERO {
            return;
        }
        match self.index.get(&(term.x, term.z)) {
            Some(&pos) => self.terms[pos].coef += term.coef,
            None => {
                self.index.insert((term.x, term.z), self.terms.len());
                self.terms.push(term);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &PauliSum, scale: Complex64) {
        for t in &other.terms {
            self.push(SparsePauli {
                coef: t.coef * scale,
                ..*t
            });
        }
    }

    pub fn scaled(&self, scale: Complex64) -> PauliSum {
        let mut out = PauliSum::new(self.n);
        out.add_scaled(self, scale);
        out
    }

    /// `[a, b] = ab - ba`; only anticommuting pairs contribute.
    pub fn commutator(a: &PauliSum, b: &PauliSum) -> PauliSum {
        let mut out = PauliSum::new(a.n);
        for ta in &a.terms {
            for tb in &b.terms {
                if ta.anticommutes(tb) {
                    let mut p = ta.mul(tb);
                    p.coef *= 2.0;
                    out.push(p);
                }
            }
        }
        out
    }

    /// Upper bound on the spectral norm: each Pauli word is unitary.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm()).sum()
    }

    /// Exact Frobenius norm via trace orthogonality of distinct words.
    pub fn frobenius_norm(&self) -> f64 {
        let s: f64 = self.terms.iter().map(|t| t.coef.norm_sqr()).sum();
        (s * self.dim() as f64).sqrt()
    }

    /// `out = self · input` for a row-major block whose rows index the
    /// computational basis.
    pub fn apply_block(&self, input: ArrayView2<Complex64>, out: &mut Array2<Complex64>) {
        let d = self.dim();
        assert_eq!(input.nrows(), d, "block row count must equal 2^n");
        let cols = input.ncols();
        let src = input.as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        if out.dim() != (d, cols) || !out.is_standard_layout() {
            *out = Array2::zeros((d, cols));
        } else {
            out.fill(ZERO);
        }
        let dst = out.as_slice_mut().expect("standard layout");
        for t in &self.terms {
            let (pos, neg) = (t.coef, -t.coef);
            for b in 0..d {
                let c = if (b as u32 & t.z).count_ones().is_multiple_of(2) {
                    pos
                } else {
                    neg
                };
                let target = b ^ t.x as usize;
                let s = &src[b * cols..(b + 1) * cols];
                let o = &mut dst[target * cols..(target + 1) * cols];
                for (o, s) in o.iter_mut().zip(s) {
                    *o += c * s;
                }
            }
        }
    }

    pub fn apply(&self, v: &Array1<Complex64>) -> Array1<Complex64> {
        let d = self.dim();
        let col = v.view().into_shape_with_order((d, 1)).expect("vector reshape");
        let mut out = Array2::zeros((d, 1));
        self.apply_block(col, &mut out);
        out.into_shape_with_order(d).expect("vector reshape")
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for t in &self.terms {
            for b in 0..d {
                let c = if (b as u32 & t.z).count_ones().is_multiple_of(2) {
                    t.coef
                } else {
                    -t.coef
                };
                m[[b ^ t.x as usize, b]] += c;
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    Chain { n: usize },
    Grid { rows: usize, cols: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    pub periodic: bool,
}

impl LatticeSpec {
    pub fn chain(n: usize, periodic: bool) -> Self {
        Self {
            geometry: Geometry::Chain { n },
            periodic,
        }
    }

    pub fn grid(rows: usize, cols: usize, periodic: bool) -> Self {
        Self {
            geometry: Geometry::Grid { rows, cols },
            periodic,
        }
    }

    pub fn num_sites(&self) -> usize {
        match self.geometry {
            Geometry::Chain { n } => n,
            Geometry::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.geometry {
            Geometry::Chain { n: 0 } => {
                return Err(Error::InvalidLattice("chain needs at least one site".into()))
            }
            Geometry::Grid { rows, cols } if rows == 0 || cols == 0 => {
                return Err(Error::InvalidLattice(format!("grid({rows},{cols}) is empty")))
            }
            _ => {}
        }
        let n = self.num_sites();
        if n > MAX_QUBITS {
            return Err(Error::DimensionCap {
                qubits: n,
                cap: MAX_QUBITS,
            });
        }
        Ok(())
    }

    /// Nearest-neighbour pairs `(i, j)` with `i < j`, each unordered pair once,
    /// sorted lexicographically. Grid sites are numbered row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let mut link = |a: usize, b: usize| {
            if a != b {
                pairs.push((a.min(b), a.max(b)));
            }
        };
        match self.geometry {
            Geometry::Chain { n } => {
                for i in 0..n {
                    if i + 1 < n {
                        link(i, i + 1);
                    } else if self.periodic {
                        link(i, 0);
                    }
                }
            }
            Geometry::Grid { rows, cols } => {
                for r in 0..rows {
                    for c in 0..cols {
                        let site = r * cols + c;
                        if c + 1 < cols {
                            link(site, r * cols + c + 1);
                        } else if self.periodic {
                            link(site, r * cols);
                        }
                        if r + 1 < rows {
                            link(site, (r + 1) * cols + c);
                        } else if self.periodic {
                            link(site, c);
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bc = if self.periodic { "pbc" } else { "obc" };
        match self.geometry {
            Geometry::Chain { n } => write!(f, "chain({n},{bc})"),
            Geometry::Grid { rows, cols } => write!(f, "grid({rows}x{cols},{bc})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ising,
    Heisenberg,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Ising => "ising",
            Model::Heisenberg => "heisenberg",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ising" => Ok(Model::Ising),
            "heisenberg" => Ok(Model::Heisenberg),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

/// One basis operator together with the sites it touches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub word: PauliString,
    pub sites: Vec<usize>,
}

/// Ordered local operator basis `P_1 .. P_R` shared by every Fourier band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRecord", into = "BasisRecord")]
pub struct OperatorBasis {
    source: Option<(Model, LatticeSpec)>,
    n: usize,
    terms: Vec<BasisTerm>,
}

#[derive(Serialize, Deserialize)]
struct BasisRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeSpec>,
    terms: Vec<BasisTerm>,
}

impl From<OperatorBasis> for BasisRecord {
    fn from(b: OperatorBasis) -> Self {
        BasisRecord {
            model: b.source.map(|s| s.0),
            lattice: b.source.map(|s| s.1),
            terms: b.terms,
        }
    }
}

impl TryFrom<BasisRecord> for OperatorBasis {
    type Error = Error;

    fn try_from(r: BasisRecord) -> Result<Self> {
        match (r.model, r.lattice) {
            (Some(model), Some(lattice)) => {
                let built = build_basis(&lattice, model)?;
                if built.terms != r.terms {
                    return Err(Error::InvalidParameter(format!(
                        "stored terms do not match the {model} basis on {lattice}"
                    )));
                }
                Ok(built)
            }
            (None, None) => OperatorBasis::custom(r.terms.into_iter().map(|t| t.word).collect()),
            _ => Err(Error::InvalidParameter(
                "basis record needs both model and lattice, or neither".into(),
            )),
        }
    }
}

impl OperatorBasis {
    /// Arbitrary distinct words on a common register.
    pub fn custom(words: Vec<PauliString>) -> Result<Self> {
        let n = words
            .first()
            .map(|w| w.num_qubits())
            .ok_or_else(|| Error::InvalidParameter("empty basis".into()))?;
        let mut seen = HashMap::new();
        let mut terms = Vec::with_capacity(words.len());
        for w in words {
            if w.num_qubits() != n {
                return Err(Error::DimensionMismatch(format!(
                    "basis word {w} has {} qubits, expected {n}",
                    w.num_qubits()
                )));
            }
            if seen.insert(w.word(), ()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate basis word {w}")));
            }
            let sites = w
                .letters()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != Pauli::I)
                .map(|(q, _)| q)
                .collect();
            terms.push(BasisTerm { word: w, sites });
        }
        Ok(Self { source: None, n, terms })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn word(&self, i: usize) -> &PauliString {
        &self.terms[i].word
    }

    pub fn words(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.iter().map(|t| &t.word)
    }

    pub fn model(&self) -> Option<Model> {
        self.source.map(|s| s.0)
    }

    pub fn lattice(&self) -> Option<LatticeSpec> {
        self.source.map(|s| s.1)
    }

    /// `Σ_i w_i P_i` as a merged Pauli sum.
    pub fn combine(&self, weights: &[Complex64]) -> PauliSum {
        debug_assert_eq!(weights.len(), self.terms.len());
        let mut sum = PauliSum::new(self.n);
        for (t, &w) in self.terms.iter().zip(weights) {
            let mut s = t.word.to_sparse();
            s.coef *= w;
            sum.push(s);
        }
        sum
    }
}

/// Nearest-neighbour couplings first (edges in lexicographic order; for the
/// Heisenberg model XX, YY, ZZ per edge), then one transverse X field per site.
pub fn build_basis(lattice: &LatticeSpec, model: Model) -> Result<OperatorBasis> {
    lattice.validate()?;
    let n = lattice.num_sites();
    let couplings: &[Pauli] = match model {
        Model::Ising => &[Pauli::Z],
        Model::Heisenberg => &[Pauli::X, Pauli::Y, Pauli::Z],
    };
    let mut terms = Vec::new();
    for (i, j) in lattice.edges() {
        for &p in couplings {
            terms.push(BasisTerm {
                word: PauliString::on_sites(n, &[(i, p), (j, p)])?,
                sites: vec![i, j],
            });
        }
    }
    for i in 0..n {
        terms.push(BasisTerm {
            word: PauliString::on_sites(n, &[(i, Pauli::X)])?,
            sites: vec![i],
        });
    }
    Ok(OperatorBasis {
        source: Some((model, *lattice)),
        n,
        terms,
    })
}
