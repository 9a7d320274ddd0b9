//! Dense state vectors over small labelled qubit registers.
//!
//! Amplitude indexing is big-endian in label order: `labels[0]` is the most
//! significant bit of the amplitude index and `labels[n - 1]` the least
//! significant. A two-qubit state over `[A, B]` therefore stores
//! `|00⟩, |01⟩, |10⟩, |11⟩` at indices 0..4 with the `A` bit first.
//!
//! Every operation returns a new value; nothing here mutates in place.
//! Stochastic operations take the generator explicitly.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Largest register the simulator will build.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for algebraic identities (unitarity, orthonormality, completeness).
pub const ALGEBRA_TOL: f64 = 1e-10;

/// Norm drift allowed after a single operation.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(Label),
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(Label),
    #[error("operator acts on {expected} qubits but {got} targets were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit limit")]
    TooManyQubits(usize),
    #[error("expected {expected} amplitudes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("basis is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("basis leaves {0:.3e} of the state's weight unresolved")]
    Unresolved(f64),
    #[error("ordering is not a permutation of the register labels")]
    NotAPermutation,
    #[error("Kraus set is not trace preserving (max deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("empty Kraus operator list or target group")]
    EmptyGroup,
    #[error("ancilla register of {got} qubits cannot index {needed} basis vectors")]
    AncillaTooSmall { needed: usize, got: usize },
    #[error("no Kraus branch survives on this state")]
    NoSurvivingBranch,
}

pub type Result<T, E = QStateError> = std::result::Result<T, E>;

/// Role tag for one qubit of a register (`A`, `B`, `A'`, `E3`, `p2`, ...).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

impl From<&Label> for Label {
    fn from(l: &Label) -> Self {
        l.clone()
    }
}

/// Builds a label list from anything label-like.
pub fn labels<I, L>(items: I) -> Vec<Label>
where
    I: IntoIterator<Item = L>,
    L: Into<Label>,
{
    items.into_iter().map(Into::into).collect()
}

/// Square complex matrix acting on `arity` qubits, row-major, checked unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    arity: usize,
    matrix: Vec<Complex64>,
}

impl Unitary {
    pub fn new(arity: usize, matrix: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << arity;
        if matrix.len() != dim * dim {
            return Err(QStateError::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let u = Unitary { arity, matrix };
        let dev = u.unitarity_deviation();
        if dev > ALGEBRA_TOL {
            return Err(QStateError::NotUnitary(dev));
        }
        Ok(u)
    }

    /// Real-valued single-qubit matrix given row by row.
    pub fn single_real(rows: [[f64; 2]; 2]) -> Result<Self> {
        Unitary::new(
            1,
            rows.iter()
                .flat_map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)))
                .collect(),
        )
    }

    pub fn identity(arity: usize) -> Self {
        let dim = 1usize << arity;
        let mut matrix = vec![ZERO; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = ONE;
        }
        Unitary { arity, matrix }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                m[c * d + r] = self.matrix[r * d + c].conj();
            }
        }
        Unitary {
            arity: self.arity,
            matrix: m,
        }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Unitary) -> Result<Self> {
        if self.arity != other.arity {
            return Err(QStateError::ArityMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        let d = self.dim();
        let mut m = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                m[r * d + c] = (0..d).map(|k| self.entry(r, k) * other.entry(k, c)).sum();
            }
        }
        Ok(Unitary {
            arity: self.arity,
            matrix: m,
        })
    }

    /// Kronecker product `self ⊗ other` (self on the more significant qubits).
    pub fn kron(&self, other: &Unitary) -> Self {
        Unitary {
            arity: self.arity + other.arity,
            matrix: kron_matrix(&self.matrix, self.dim(), &other.matrix, other.dim()),
        }
    }

    /// Largest entry of `|U·U† − I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let v: Complex64 = (0..d)
                    .map(|k| self.entry(r, k) * self.entry(c, k).conj())
                    .sum();
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }
}

fn kron_matrix(a: &[Complex64], da: usize, b: &[Complex64], db: usize) -> Vec<Complex64> {
    let d = da * db;
    let mut m = vec![ZERO; d * d];
    for ar in 0..da {
        for ac in 0..da {
            let x = a[ar * da + ac];
            if x == ZERO {
                continue;
            }
            for br in 0..db {
                for bc in 0..db {
                    m[(ar * db + br) * d + ac * db + bc] = x * b[br * db + bc];
                }
            }
        }
    }
    m
}

/// Orthonormal vectors over `qubits` qubits. A basis with fewer than
/// `2^qubits` vectors is partial: measuring with it fails unless the state
/// lies entirely inside its span.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    qubits: usize,
    vectors: Vec<Vec<Complex64>>,
    names: Vec<String>,
}

impl OrthonormalBasis {
    pub fn new(qubits: usize, vectors: Vec<Vec<Complex64>>, names: Vec<String>) -> Result<Self> {
        let dim = 1usize << qubits;
        if vectors.is_empty() || vectors.len() > dim || names.len() != vectors.len() {
            return Err(QStateError::DimensionMismatch {
                expected: dim,
                got: vectors.len(),
            });
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(QStateError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        let mut worst = 0.0f64;
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate().skip(i) {
                let ip: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((ip - target).norm());
            }
        }
        if worst > ALGEBRA_TOL {
            return Err(QStateError::NotOrthonormal(worst));
        }
        Ok(OrthonormalBasis {
            qubits,
            vectors,
            names,
        })
    }

    /// The computational basis `{|0…0⟩, …, |1…1⟩}` over `qubits` qubits.
    pub fn computational(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let vectors = (0..dim)
            .map(|i| {
                let mut v = vec![ZERO; dim];
                v[i] = ONE;
                v
            })
            .collect();
        let names = (0..dim)
            .map(|i| format!("{:0width$b}", i, width = qubits))
            .collect();
        OrthonormalBasis {
            qubits,
            vectors,
            names,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.vectors.len() == 1 << self.qubits
    }

    pub fn vector(&self, i: usize) -> &[Complex64] {
        &self.vectors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Position of the basis vector with the given display name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `Σᵢ |bᵢ⟩⟨bᵢ|` as a dense row-major matrix.
    pub fn projector_sum(&self) -> Vec<Complex64> {
        let d = 1usize << self.qubits;
        let mut m = vec![ZERO; d * d];
        for v in &self.vectors {
            for r in 0..d {
                for c in 0..d {
                    m[r * d + c] += v[r] * v[c].conj();
                }
            }
        }
        m
    }
}

/// Single-qubit Kraus operators `{Eᵢ}` with `Σ Eᵢ†Eᵢ = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    ops: Vec<[Complex64; 4]>,
}

impl KrausSet {
    pub fn new(ops: Vec<[Complex64; 4]>) -> Result<Self> {
        if ops.is_empty() {
            return Err(QStateError::EmptyGroup);
        }
        let mut acc = [ZERO; 4];
        for e in &ops {
            for r in 0..2 {
                for c in 0..2 {
                    acc[r * 2 + c] += (0..2)
                        .map(|k| e[k * 2 + r].conj() * e[k * 2 + c])
                        .sum::<Complex64>();
                }
            }
        }
        let dev = [
            (acc[0] - ONE).norm(),
            acc[1].norm(),
            acc[2].norm(),
            (acc[3] - ONE).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if dev > ALGEBRA_TOL {
            return Err(QStateError::NotTracePreserving(dev));
        }
        Ok(KrausSet { ops })
    }

    pub fn from_real(ops: &[[f64; 4]]) -> Result<Self> {
        KrausSet::new(
            ops.iter()
                .map(|o| o.map(|x| Complex64::new(x, 0.0)))
                .collect(),
        )
    }

    pub fn ops(&self) -> &[[Complex64; 4]] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Operator norm of a 2x2 matrix (square root of the top eigenvalue of E†E).
fn operator_norm(e: &[Complex64; 4]) -> f64 {
    let a = e[0].norm_sqr() + e[2].norm_sqr();
    let d = e[1].norm_sqr() + e[3].norm_sqr();
    let b = e[0].conj() * e[1] + e[2].conj() * e[3];
    let tr = a + d;
    let disc = ((a - d) * (a - d) / 4.0 + b.norm_sqr()).sqrt();
    (tr / 2.0 + disc).max(0.0).sqrt()
}

struct Layout {
    /// Amplitude offset of each target sub-index (targets big-endian).
    offsets: Vec<usize>,
    /// Amplitude indices with every target bit cleared.
    bases: Vec<usize>,
}

/// Normalized amplitude array over uniquely labelled qubits.
#[derive(Clone, Debug)]
pub struct StateVector {
    amps: Vec<Complex64>,
    labels: Vec<Label>,
}

impl StateVector {
    /// Builds a state and normalizes it. Fails on zero norm, duplicate
    /// labels or a length that is not `2^labels.len()`.
    pub fn new(labels: Vec<Label>, amps: Vec<Complex64>) -> Result<Self> {
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if amps.len() != expected {
            return Err(QStateError::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        StateVector { amps, labels }.normalized()
    }

    pub fn from_real<L: Into<Label>>(
        labels: impl IntoIterator<Item = L>,
        amps: &[f64],
    ) -> Result<Self> {
        StateVector::new(
            self::labels(labels),
            amps.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Computational basis state; `bits` is read big-endian, e.g. `"01"`.
    pub fn basis_state<L: Into<Label>>(
        labels: impl IntoIterator<Item = L>,
        bits: &str,
    ) -> Result<Self> {
        let labels = self::labels(labels);
        check_labels(&labels)?;
        if bits.len() != labels.len() || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(QStateError::DimensionMismatch {
                expected: labels.len(),
                got: bits.len(),
            });
        }
        let idx = usize::from_str_radix(bits, 2).unwrap_or(0);
        let mut amps = vec![ZERO; 1 << labels.len()];
        amps[idx] = ONE;
        Ok(StateVector { amps, labels })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn has(&self, label: &Label) -> bool {
        self.labels.contains(label)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn position(&self, label: &Label) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| QStateError::UnknownLabel(label.clone()))
    }

    fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if n.is_nan() || n <= 1e-300 {
            return Err(QStateError::ZeroNorm);
        }
        if (n - 1.0).abs() > NORM_TOL / 4.0 {
            let s = 1.0 / n.sqrt();
            for a in &mut self.amps {
                *a *= s;
            }
        }
        Ok(self)
    }

    fn layout(&self, targets: &[Label]) -> Result<Layout> {
        let n = self.labels.len();
        let mut all = 0usize;
        let mut masks = Vec::with_capacity(targets.len());
        for t in targets {
            let m = 1usize << (n - 1 - self.position(t)?);
            if all & m != 0 {
                return Err(QStateError::DuplicateLabel(t.clone()));
            }
            all |= m;
            masks.push(m);
        }
        let k = masks.len();
        let offsets = (0..1usize << k)
            .map(|t| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (t >> (k - 1 - j)) & 1 == 1)
                    .map(|(_, m)| m)
                    .sum()
            })
            .collect();
        let bases = (0..1usize << n).filter(|i| i & all == 0).collect();
        Ok(Layout { offsets, bases })
    }

    /// Kronecker product; labels concatenated `self` then `other`.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_labels(&labels)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { amps, labels }.normalized()
    }

    /// Applies a (not necessarily unitary) matrix to the targets without renormalizing.
    fn apply_matrix_raw(&self, matrix: &[Complex64], targets: &[Label]) -> Result<Self> {
        let layout = self.layout(targets)?;
        let d = layout.offsets.len();
        let mut out = vec![ZERO; self.amps.len()];
        let mut gathered = vec![ZERO; d];
        for &base in &layout.bases {
            for (t, off) in layout.offsets.iter().enumerate() {
                gathered[t] = self.amps[base + off];
            }
            for (r, off) in layout.offsets.iter().enumerate() {
                let row = &matrix[r * d..(r + 1) * d];
                out[base + off] = row.iter().zip(&gathered).map(|(m, v)| m * v).sum();
            }
        }
        Ok(StateVector {
            amps: out,
            labels: self.labels.clone(),
        })
    }

    /// Applies `u` to the target qubits (in the order given), identity elsewhere.
    pub fn apply_unitary(&self, u: &Unitary, targets: &[Label]) -> Result<Self> {
        if targets.len() != u.arity() {
            return Err(QStateError::ArityMismatch {
                expected: u.arity(),
                got: targets.len(),
            });
        }
        self.apply_matrix_raw(u.matrix(), targets)?.normalized()
    }

    /// Applies the same single-qubit unitary to each listed qubit.
    pub fn apply_each(&self, u: &Unitary, targets: &[Label]) -> Result<Self> {
        let mut s = self.clone();
        for t in targets {
            s = s.apply_unitary(u, std::slice::from_ref(t))?;
        }
        Ok(s)
    }

    /// Reorders the register so its labels read `order`; physical content is unchanged.
    pub fn permute(&self, order: &[Label]) -> Result<Self> {
        let n = self.labels.len();
        if order.len() != n {
            return Err(QStateError::NotAPermutation);
        }
        let mut src_bit = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for l in order {
            let p = self.position(l).map_err(|_| QStateError::NotAPermutation)?;
            if seen[p] {
                return Err(QStateError::NotAPermutation);
            }
            seen[p] = true;
            src_bit.push(n - 1 - p);
        }
        let mut amps = vec![ZERO; self.amps.len()];
        for (j, slot) in amps.iter_mut().enumerate() {
            let mut i = 0usize;
            for (k, &sb) in src_bit.iter().enumerate() {
                if (j >> (n - 1 - k)) & 1 == 1 {
                    i |= 1 << sb;
                }
            }
            *slot = self.amps[i];
        }
        Ok(StateVector {
            amps,
            labels: order.to_vec(),
        })
    }

    /// Renames one qubit; the amplitudes are untouched.
    pub fn relabel(&self, from: &Label, to: impl Into<Label>) -> Result<Self> {
        let to = to.into();
        let p = self.position(from)?;
        if from != &to && self.has(&to) {
            return Err(QStateError::DuplicateLabel(to));
        }
        let mut s = self.clone();
        s.labels[p] = to;
        Ok(s)
    }

    /// Exact outcome probabilities for measuring `targets` in `basis`.
    pub fn outcome_distribution(
        &self,
        basis: &OrthonormalBasis,
        targets: &[Label],
    ) -> Result<Vec<f64>> {
        if targets.len() != basis.qubits() {
            return Err(QStateError::ArityMismatch {
                expected: basis.qubits(),
                got: targets.len(),
            });
        }
        let layout = self.layout(targets)?;
        let probs: Vec<f64> = (0..basis.len())
            .map(|i| {
                let v = basis.vector(i);
                layout
                    .bases
                    .iter()
                    .map(|&base| {
                        layout
                            .offsets
                            .iter()
                            .zip(v)
                            .map(|(off, b)| b.conj() * self.amps[base + off])
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum()
            })
            .collect();
        let total: f64 = probs.iter().sum();
        if (1.0 - total) > ALGEBRA_TOL {
            return Err(QStateError::Unresolved(1.0 - total));
        }
        Ok(probs)
    }

    /// Projects onto basis vector `outcome` on the targets and renormalizes.
    pub fn project(
        &self,
        basis: &OrthonormalBasis,
        targets: &[Label],
        outcome: usize,
    ) -> Result<Self> {
        let layout = self.layout(targets)?;
        let v = basis.vector(outcome);
        let mut amps = vec![ZERO; self.amps.len()];
        for &base in &layout.bases {
            let c: Complex64 = layout
                .offsets
                .iter()
                .zip(v)
                .map(|(off, b)| b.conj() * self.amps[base + off])
                .sum();
            for (off, b) in layout.offsets.iter().zip(v) {
                amps[base + off] = b * c;
            }
        }
        StateVector {
            amps,
            labels: self.labels.clone(),
        }
        .normalized()
    }

    /// Samples an outcome from [`outcome_distribution`](Self::outcome_distribution)
    /// and returns it with the collapsed state.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        basis: &OrthonormalBasis,
        targets: &[Label],
        rng: &mut R,
    ) -> Result<(usize, Self)> {
        let probs = self.outcome_distribution(basis, targets)?;
        let k = sample_index(&probs, rng);
        Ok((k, self.project(basis, targets, k)?))
    }

    /// Coherent copy of the targets' basis index into fresh ancillas:
    /// `Σᵢ (|bᵢ⟩⟨bᵢ| ⊗ I)ψ ⊗ |i⟩`. Ancillas are appended after the existing labels.
    pub fn purify(
        &self,
        basis: &OrthonormalBasis,
        targets: &[Label],
        ancillas: &[Label],
    ) -> Result<Self> {
        if targets.len() != basis.qubits() {
            return Err(QStateError::ArityMismatch {
                expected: basis.qubits(),
                got: targets.len(),
            });
        }
        if basis.len() > 1 << ancillas.len() {
            return Err(QStateError::AncillaTooSmall {
                needed: basis.len(),
                got: ancillas.len(),
            });
        }
        let mut labels = self.labels.clone();
        labels.extend(ancillas.iter().cloned());
        check_labels(&labels)?;
        if labels.len() > MAX_QUBITS {
            return Err(QStateError::TooManyQubits(labels.len()));
        }
        // Unresolved weight would silently vanish; refuse partial bases that lose it.
        self.outcome_distribution(basis, targets)?;
        let layout = self.layout(targets)?;
        let a = ancillas.len();
        let mut amps = vec![ZERO; self.amps.len() << a];
        for (i, v) in (0..basis.len()).map(|i| (i, basis.vector(i))) {
            for &base in &layout.bases {
                let c: Complex64 = layout
                    .offsets
                    .iter()
                    .zip(v)
                    .map(|(off, b)| b.conj() * self.amps[base + off])
                    .sum();
                if c == ZERO {
                    continue;
                }
                for (off, b) in layout.offsets.iter().zip(v) {
                    amps[((base + off) << a) | i] += b * c;
                }
            }
        }
        StateVector { amps, labels }.normalized()
    }

    /// Trajectory sampling of a single-qubit Kraus channel.
    ///
    /// With `correlated` set, one branch is drawn per group and the same
    /// operator hits every qubit of the group. The group operator for
    /// branch `i` is `Eᵢ^{⊗g} / ‖Eᵢ‖^{g-1}`, which reduces to `√pᵢ·Pᵢ^{⊗g}`
    /// for Pauli-type sets; branch weights are renormalized over the
    /// correlated branches. Without `correlated`, every qubit draws its own
    /// branch. Returns the chosen branch per group (correlated) or per qubit.
    pub fn apply_kraus<R: Rng + ?Sized>(
        &self,
        kraus: &KrausSet,
        groups: &[Vec<Label>],
        correlated: bool,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Self)> {
        let mut state = self.clone();
        let mut chosen = Vec::new();
        for group in groups {
            if group.is_empty() {
                return Err(QStateError::EmptyGroup);
            }
            if correlated {
                let mut branches = Vec::with_capacity(kraus.len());
                for e in kraus.ops() {
                    let s = operator_norm(e);
                    if s <= 0.0 {
                        branches.push(None);
                        continue;
                    }
                    let scale = s.powi(1 - group.len() as i32);
                    let mut b = state.clone();
                    for (k, q) in group.iter().enumerate() {
                        let op: Vec<Complex64> = if k == 0 {
                            e.iter().map(|x| x * scale).collect()
                        } else {
                            e.to_vec()
                        };
                        b = b.apply_matrix_raw(&op, std::slice::from_ref(q))?;
                    }
                    branches.push(Some(b));
                }
                let weights: Vec<f64> = branches
                    .iter()
                    .map(|b| b.as_ref().map_or(0.0, StateVector::norm_sqr))
                    .collect();
                if weights.iter().sum::<f64>() <= 1e-300 {
                    return Err(QStateError::NoSurvivingBranch);
                }
                let i = sample_index(&weights, rng);
                chosen.push(i);
                state = branches
                    .swap_remove(i)
                    .expect("sampled branch has weight")
                    .normalized()?;
            } else {
                for q in group {
                    let branches = kraus
                        .ops()
                        .iter()
                        .map(|e| state.apply_matrix_raw(e, std::slice::from_ref(q)))
                        .collect::<Result<Vec<_>>>()?;
                    let weights: Vec<f64> = branches.iter().map(StateVector::norm_sqr).collect();
                    let i = sample_index(&weights, rng);
                    chosen.push(i);
                    state = branches
                        .into_iter()
                        .nth(i)
                        .expect("index in range")
                        .normalized()?;
                }
            }
        }
        Ok((chosen, state))
    }

    /// `⟨self|other⟩`, aligning `other` to this register's label order first.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        let other = other.permute(&self.labels)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// True when the states agree up to a global phase: `|⟨u|v⟩| ≥ 1 − tol`.
    pub fn equal_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        self.inner(other)
            .is_ok_and(|ip| (1.0 - ip.norm()).abs() <= tol)
    }

    /// Reduced density matrix of the targets (row-major, targets big-endian).
    pub fn reduced_density(&self, targets: &[Label]) -> Result<Vec<Complex64>> {
        let layout = self.layout(targets)?;
        let d = layout.offsets.len();
        let mut rho = vec![ZERO; d * d];
        for &base in &layout.bases {
            for r in 0..d {
                let ar = self.amps[base + layout.offsets[r]];
                if ar == ZERO {
                    continue;
                }
                for c in 0..d {
                    rho[r * d + c] += ar * self.amps[base + layout.offsets[c]].conj();
                }
            }
        }
        Ok(rho)
    }
}

fn check_labels(labels: &[Label]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(QStateError::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(QStateError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if x < w {
            return i;
        }
        x -= w;
    }
    last
}
