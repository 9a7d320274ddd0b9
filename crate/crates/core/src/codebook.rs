//! Coding states, bases, gates and Kraus sets, and the per-mode encodings
//! that Alice prepares.
//!
//! Plain coding set `S = {|00⟩, |11⟩, |φ⟩, |φ′⟩}` carries the two-bit symbols
//! `00, 11, 01, 10` in that order, with `|φ⟩ = (|01⟩ − |10⟩)/√2` and
//! `|φ′⟩ = (|01⟩ + |10⟩)/√2`. Under collective rotation the set shrinks to
//! `S′ = {|φ⟩, |φ″⟩}` with `|φ″⟩ = (|00⟩ + |11⟩)/√2` carrying one bit each.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{labels, KrausSet, Label, OrthonormalBasis, QStateError, StateVector, Unitary};

const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodebookError {
    #[error("symbol {0} is not representable in this codebook")]
    SymbolOutOfRange(CodingSymbol),
    #[error("outcome index {0} is outside the coding basis")]
    OutcomeOutOfRange(usize),
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse `{0}`")]
    Parse(String),
    #[error(transparent)]
    State(#[from] QStateError),
}

/// Which of the two protocols a configuration, codebook or report belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Two-stage transmission with decoy qubits.
    #[serde(rename = "1")]
    One,
    /// Single-stage transmission with block order rearrangement.
    #[serde(rename = "2")]
    Two,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::One => "1",
            Protocol::Two => "2",
        })
    }
}

impl FromStr for Protocol {
    type Err = CodebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "I" | "one" => Ok(Protocol::One),
            "2" | "II" | "two" => Ok(Protocol::Two),
            other => Err(CodebookError::Parse(format!("protocol {other}"))),
        }
    }
}

/// A classical symbol carried by one coding state: two bits under `S`,
/// one bit under `S′`. `bits` holds the value right-aligned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodingSymbol {
    bits: u8,
    width: u8,
}

impl CodingSymbol {
    pub fn new(bits: u8, width: u8) -> Result<Self, CodebookError> {
        if !(1..=2).contains(&width) || bits >= 1 << width {
            return Err(CodebookError::Parse(format!("symbol {bits}/{width}")));
        }
        Ok(CodingSymbol { bits, width })
    }

    pub fn two_bit(bits: u8) -> Self {
        CodingSymbol {
            bits: bits & 3,
            width: 2,
        }
    }

    pub fn one_bit(bit: bool) -> Self {
        CodingSymbol {
            bits: bit as u8,
            width: 1,
        }
    }

    pub fn value(self) -> u8 {
        self.bits
    }

    pub fn width(self) -> u8 {
        self.width
    }

    /// Most significant bit first.
    pub fn to_bits(self) -> impl Iterator<Item = bool> {
        (0..self.width)
            .rev()
            .map(move |k| (self.bits >> k) & 1 == 1)
    }
}

impl fmt::Display for CodingSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0w$b}", self.bits, w = self.width as usize)
    }
}

/// Channel noise together with its parameters. `None` parameters on the
/// collective modes mean "draw per run". Serialized in its string form,
/// e.g. `pauli:0.7,0.1,0.1,0.1`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NoiseMode {
    #[default]
    None,
    CollectiveDephasing {
        phi: Option<f64>,
    },
    CollectiveRotation {
        theta: Option<f64>,
    },
    /// `I` with probability `p_identity`, otherwise `Z`.
    PauliZ {
        p_identity: f64,
    },
    /// `I` with probability `p_identity`, otherwise `X`.
    PauliX {
        p_identity: f64,
    },
    /// `I` with probability `p_identity`, otherwise `ZX`.
    PauliZX {
        p_identity: f64,
    },
    /// Probabilities of `I, Z, X, ZX`.
    PauliFull {
        probs: [f64; 4],
    },
    PhaseDamping {
        p: f64,
    },
    AmplitudeDamping {
        p: f64,
    },
}

impl NoiseMode {
    pub fn tag(&self) -> &'static str {
        match self {
            NoiseMode::None => "none",
            NoiseMode::CollectiveDephasing { .. } => "cd",
            NoiseMode::CollectiveRotation { .. } => "cr",
            NoiseMode::PauliZ { .. } => "pauli-z",
            NoiseMode::PauliX { .. } => "pauli-x",
            NoiseMode::PauliZX { .. } => "pauli-zx",
            NoiseMode::PauliFull { .. } => "pauli",
            NoiseMode::PhaseDamping { .. } => "pd",
            NoiseMode::AmplitudeDamping { .. } => "ad",
        }
    }

    pub fn validate(&self) -> Result<(), CodebookError> {
        let prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(CodebookError::InvalidParameter(format!(
                    "{what} = {p} is outside [0, 1]"
                )))
            }
        };
        let finite = |x: Option<f64>, what: &str| match x {
            Some(v) if !v.is_finite() => Err(CodebookError::InvalidParameter(format!(
                "{what} = {v} is not finite"
            ))),
            _ => Ok(()),
        };
        match *self {
            NoiseMode::None => Ok(()),
            NoiseMode::CollectiveDephasing { phi } => finite(phi, "phi"),
            NoiseMode::CollectiveRotation { theta } => finite(theta, "theta"),
            NoiseMode::PauliZ { p_identity }
            | NoiseMode::PauliX { p_identity }
            | NoiseMode::PauliZX { p_identity } => prob(p_identity, "p"),
            NoiseMode::PauliFull { probs } => {
                for p in probs {
                    prob(p, "p")?;
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(CodebookError::InvalidParameter(format!(
                        "Pauli probabilities sum to {s}, not 1"
                    )));
                }
                Ok(())
            }
            NoiseMode::PhaseDamping { p } | NoiseMode::AmplitudeDamping { p } => prob(p, "p"),
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())?;
        match self {
            NoiseMode::None => Ok(()),
            NoiseMode::CollectiveDephasing { phi: x }
            | NoiseMode::CollectiveRotation { theta: x } => match x {
                Some(v) => write!(f, ":{v}"),
                None => Ok(()),
            },
            NoiseMode::PauliZ { p_identity }
            | NoiseMode::PauliX { p_identity }
            | NoiseMode::PauliZX { p_identity } => write!(f, ":{p_identity}"),
            NoiseMode::PauliFull { probs } => {
                write!(f, ":{},{},{},{}", probs[0], probs[1], probs[2], probs[3])
            }
            NoiseMode::PhaseDamping { p } | NoiseMode::AmplitudeDamping { p } => write!(f, ":{p}"),
        }
    }
}

impl FromStr for NoiseMode {
    type Err = CodebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tag, params) = match s.trim().split_once(':') {
            Some((t, p)) => (t, Some(p)),
            None => (s.trim(), None),
        };
        let bad = || CodebookError::Parse(format!("noise mode `{s}`"));
        let num = |p: Option<&str>| -> Result<f64, CodebookError> {
            p.ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())
        };
        let opt = |p: Option<&str>| -> Result<Option<f64>, CodebookError> {
            p.map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .transpose()
        };
        let mode = match tag {
            "none" => NoiseMode::None,
            "cd" => NoiseMode::CollectiveDephasing { phi: opt(params)? },
            "cr" => NoiseMode::CollectiveRotation {
                theta: opt(params)?,
            },
            "pauli-z" => NoiseMode::PauliZ {
                p_identity: num(params)?,
            },
            "pauli-x" => NoiseMode::PauliX {
                p_identity: num(params)?,
            },
            "pauli-zx" => NoiseMode::PauliZX {
                p_identity: num(params)?,
            },
            "pauli" => {
                let v = params
                    .ok_or_else(bad)?
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>, _>>()?;
                let probs: [f64; 4] = v.try_into().map_err(|_| bad())?;
                NoiseMode::PauliFull { probs }
            }
            "pd" => NoiseMode::PhaseDamping { p: num(params)? },
            "ad" => NoiseMode::AmplitudeDamping { p: num(params)? },
            _ => return Err(bad()),
        };
        if matches!(mode, NoiseMode::None) && params.is_some() {
            return Err(bad());
        }
        mode.validate()?;
        Ok(mode)
    }
}

impl From<NoiseMode> for String {
    fn from(m: NoiseMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for NoiseMode {
    type Error = CodebookError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

// ---------------------------------------------------------------------------
// Named states, gates and Kraus sets.

pub fn ket00() -> [Complex64; 4] {
    [c(1.0), c(0.0), c(0.0), c(0.0)]
}

pub fn ket11() -> [Complex64; 4] {
    [c(0.0), c(0.0), c(0.0), c(1.0)]
}

/// `(|01⟩ − |10⟩)/√2`
pub fn phi() -> [Complex64; 4] {
    [c(0.0), c(R), c(-R), c(0.0)]
}

/// `(|01⟩ + |10⟩)/√2`
pub fn phi_prime() -> [Complex64; 4] {
    [c(0.0), c(R), c(R), c(0.0)]
}

/// `(|00⟩ + |11⟩)/√2`
pub fn phi_double_prime() -> [Complex64; 4] {
    [c(R), c(0.0), c(0.0), c(R)]
}

/// The four Bell states `Φ⁺, Φ⁻, Ψ⁺, Ψ⁻`.
pub fn bell_states() -> [[Complex64; 4]; 4] {
    [
        [c(R), c(0.0), c(0.0), c(R)],
        [c(R), c(0.0), c(0.0), c(-R)],
        [c(0.0), c(R), c(R), c(0.0)],
        [c(0.0), c(R), c(-R), c(0.0)],
    ]
}

pub fn plus() -> [Complex64; 2] {
    [c(R), c(R)]
}

pub fn minus() -> [Complex64; 2] {
    [c(R), c(-R)]
}

pub fn qubit(amps: [Complex64; 2], label: impl Into<Label>) -> StateVector {
    StateVector::new(vec![label.into()], amps.to_vec()).expect("unit vector")
}

pub fn pair(amps: [Complex64; 4], a: impl Into<Label>, b: impl Into<Label>) -> StateVector {
    StateVector::new(vec![a.into(), b.into()], amps.to_vec()).expect("unit vector")
}

pub fn gate_i() -> Unitary {
    Unitary::identity(1)
}

pub fn gate_z() -> Unitary {
    Unitary::single_real([[1.0, 0.0], [0.0, -1.0]]).expect("unitary")
}

pub fn gate_x() -> Unitary {
    Unitary::single_real([[0.0, 1.0], [1.0, 0.0]]).expect("unitary")
}

/// `Z·X = [[0, 1], [−1, 0]]`.
pub fn gate_zx() -> Unitary {
    Unitary::single_real([[0.0, 1.0], [-1.0, 0.0]]).expect("unitary")
}

/// `X·Z`, the inverse of `Z·X`.
pub fn gate_xz() -> Unitary {
    Unitary::single_real([[0.0, -1.0], [1.0, 0.0]]).expect("unitary")
}

pub fn gate_h() -> Unitary {
    Unitary::single_real([[R, R], [R, -R]]).expect("unitary")
}

/// `[[1, 1], [i, −i]]/√2`; its columns are the eigenvectors of `ZX`.
pub fn gate_h_prime() -> Unitary {
    Unitary::new(
        1,
        vec![c(R), c(R), Complex64::new(0.0, R), Complex64::new(0.0, -R)],
    )
    .expect("unitary")
}

/// Collective dephasing `diag(1, e^{iφ})`.
pub fn gate_cd(phi: f64) -> Unitary {
    Unitary::new(
        1,
        vec![c(1.0), c(0.0), c(0.0), Complex64::from_polar(1.0, phi)],
    )
    .expect("unitary")
}

/// Collective rotation `[[cos θ, sin θ], [sin θ, −cos θ]]`.
pub fn gate_cr(theta: f64) -> Unitary {
    let (s, co) = theta.sin_cos();
    Unitary::single_real([[co, s], [s, -co]]).expect("unitary")
}

/// Controlled NOT with the first target as control.
pub fn gate_cnot() -> Unitary {
    let mut m = vec![c(0.0); 16];
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[r * 4 + col] = c(1.0);
    }
    Unitary::new(2, m).expect("unitary")
}

fn check_probability(p: f64) -> Result<(), CodebookError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CodebookError::InvalidParameter(format!(
            "p = {p} is outside [0, 1]"
        )))
    }
}

/// Phase damping `E₀ = √(1−p)·I`, `E₁ = √p·|0⟩⟨0|`, `E₂ = √p·|1⟩⟨1|`.
pub fn pd_kraus(p: f64) -> Result<KrausSet, CodebookError> {
    check_probability(p)?;
    let (a, b) = ((1.0 - p).sqrt(), p.sqrt());
    Ok(KrausSet::from_real(&[
        [a, 0.0, 0.0, a],
        [b, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, b],
    ])?)
}

/// Amplitude damping `E₀ = diag(1, √(1−p))`, `E₁ = √p·|0⟩⟨1|`.
pub fn ad_kraus(p: f64) -> Result<KrausSet, CodebookError> {
    check_probability(p)?;
    Ok(KrausSet::from_real(&[
        [1.0, 0.0, 0.0, (1.0 - p).sqrt()],
        [0.0, p.sqrt(), 0.0, 0.0],
    ])?)
}

/// `{√p_I·I, √p_Z·Z, √p_X·X, √p_ZX·ZX}`.
pub fn pauli_kraus(probs: [f64; 4]) -> Result<KrausSet, CodebookError> {
    let gates = [gate_i(), gate_z(), gate_x(), gate_zx()];
    let ops = probs
        .iter()
        .zip(&gates)
        .map(|(&p, g)| {
            check_probability(p)?;
            let m = g.matrix();
            let s = p.sqrt();
            Ok([m[0] * s, m[1] * s, m[2] * s, m[3] * s])
        })
        .collect::<Result<Vec<_>, CodebookError>>()?;
    Ok(KrausSet::new(ops)?)
}

/// The coding basis `S` in the order `|00⟩, |11⟩, |φ⟩, |φ′⟩`.
pub fn basis_s() -> OrthonormalBasis {
    OrthonormalBasis::new(
        2,
        vec![
            ket00().to_vec(),
            ket11().to_vec(),
            phi().to_vec(),
            phi_prime().to_vec(),
        ],
        vec!["00".into(), "11".into(), "phi".into(), "phi'".into()],
    )
    .expect("orthonormal")
}

/// `S′ = {|φ⟩, |φ″⟩}` completed by two vectors outside the coding set.
///
/// Only the first two vectors carry symbols; the other two exist so that a
/// state pushed out of `span(S′)` still yields an (erroneous) outcome.
pub fn basis_s_prime() -> OrthonormalBasis {
    OrthonormalBasis::new(
        2,
        vec![
            phi().to_vec(),
            phi_double_prime().to_vec(),
            phi_prime().to_vec(),
            bell_states()[1].to_vec(),
        ],
        vec!["phi".into(), "phi''".into(), "phi'".into(), "bell-".into()],
    )
    .expect("orthonormal")
}

pub fn basis_plus_minus() -> OrthonormalBasis {
    OrthonormalBasis::new(
        1,
        vec![plus().to_vec(), minus().to_vec()],
        vec!["+".into(), "-".into()],
    )
    .expect("orthonormal")
}

pub fn basis_computational() -> OrthonormalBasis {
    OrthonormalBasis::computational(1)
}

// ---------------------------------------------------------------------------
// Codebooks.

/// How the logical pair `(A, B)` is dressed with auxiliary qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    /// Just the pair.
    Plain,
    /// One `|+⟩` flag per partita (`A′`, `B′`), revealing a `Z` hit.
    PhaseFlag,
    /// `|+⟩` and `|0⟩` flags per partita, revealing `Z`, `X` or `ZX`.
    PauliFlags,
    /// Dual-rail pairs `A A′`, `B B′` with the auxiliary prepared in `|1⟩`
    /// and entangled by a controlled NOT.
    DualRail,
}

/// Decoy particle sent with the first stage of protocol I.
#[derive(Clone, Debug)]
pub struct Decoy {
    /// Prepared state over `unit`, frame already applied.
    pub state: StateVector,
    /// Transmitted particles, each a data qubit followed by its auxiliaries.
    pub units: Vec<Vec<Label>>,
    /// Qubits measured after correction.
    pub data: Vec<Label>,
    pub basis: OrthonormalBasis,
    /// Outcome index that counts as "decoy intact".
    pub expected: usize,
}

/// Encoded coding set for one (protocol, noise adaptation) pair.
#[derive(Clone, Debug)]
pub struct Codebook {
    protocol: Protocol,
    mode: NoiseMode,
    encoding: Encoding,
    coding_basis: OrthonormalBasis,
    symbols: Vec<CodingSymbol>,
    frame: Option<Unitary>,
    block_flag: bool,
    decoy: Option<Decoy>,
}

pub const LABEL_A: &str = "A";
pub const LABEL_B: &str = "B";
/// Per-block flag qubit used by protocol II under the full Pauli channel.
pub const LABEL_FLAG: &str = "F";

impl Codebook {
    /// The unmodified codebook: `S`, `|+⟩` decoys for protocol I.
    pub fn plain(protocol: Protocol) -> Self {
        Codebook::build(protocol, NoiseMode::None).expect("plain codebook")
    }

    /// The codebook adapted to `mode` (encoded states, decoys, frame).
    pub fn for_mode(protocol: Protocol, mode: NoiseMode) -> Result<Self, CodebookError> {
        mode.validate()?;
        Codebook::build(protocol, mode)
    }

    fn build(protocol: Protocol, mode: NoiseMode) -> Result<Self, CodebookError> {
        let two_bit: Vec<CodingSymbol> = [0b00, 0b11, 0b01, 0b10]
            .into_iter()
            .map(CodingSymbol::two_bit)
            .collect();
        let mut cb = Codebook {
            protocol,
            mode,
            encoding: Encoding::Plain,
            coding_basis: basis_s(),
            symbols: two_bit,
            frame: None,
            block_flag: false,
            decoy: None,
        };
        match mode {
            NoiseMode::None | NoiseMode::CollectiveDephasing { .. } => {}
            NoiseMode::CollectiveRotation { .. } => {
                cb.coding_basis = basis_s_prime();
                cb.symbols = vec![CodingSymbol::one_bit(false), CodingSymbol::one_bit(true)];
            }
            NoiseMode::PauliZ { .. } | NoiseMode::PauliX { .. } | NoiseMode::PauliZX { .. } => {
                if protocol == Protocol::One {
                    cb.encoding = Encoding::PhaseFlag;
                }
                cb.frame = match mode {
                    NoiseMode::PauliX { .. } => Some(gate_h()),
                    NoiseMode::PauliZX { .. } => Some(gate_h_prime()),
                    _ => None,
                };
            }
            NoiseMode::PauliFull { .. } => match protocol {
                Protocol::One => cb.encoding = Encoding::PauliFlags,
                Protocol::Two => cb.block_flag = true,
            },
            NoiseMode::PhaseDamping { .. } | NoiseMode::AmplitudeDamping { .. } => {
                cb.encoding = Encoding::DualRail;
            }
        }
        if protocol == Protocol::One {
            cb.decoy = Some(cb.build_decoy()?);
        }
        Ok(cb)
    }

    fn build_decoy(&self) -> Result<Decoy, CodebookError> {
        let b = Label::from(LABEL_B);
        let (logical, data, basis, expected) = match self.mode {
            NoiseMode::CollectiveDephasing { .. } => (
                pair(phi(), LABEL_B, "Bd"),
                labels([LABEL_B, "Bd"]),
                basis_s(),
                2,
            ),
            NoiseMode::CollectiveRotation { .. } => (
                pair(phi(), LABEL_B, "Bd"),
                labels([LABEL_B, "Bd"]),
                basis_s_prime(),
                0,
            ),
            _ => (
                qubit(plus(), b.clone()),
                vec![b.clone()],
                basis_plus_minus(),
                0,
            ),
        };
        let state = self.dress(logical, std::slice::from_ref(&b))?;
        let units = if data.len() == 2 {
            data.iter().map(|d| vec![d.clone()]).collect()
        } else {
            vec![self.unit_of(&b)]
        };
        Ok(Decoy {
            state,
            units,
            data,
            basis,
            expected,
        })
    }

    /// Adds auxiliary qubits for each data qubit in `data` and applies the frame.
    fn dress(&self, logical: StateVector, data: &[Label]) -> Result<StateVector, CodebookError> {
        let mut s = logical;
        for d in data {
            let aux = aux_labels(d, self.encoding);
            match self.encoding {
                Encoding::Plain => {}
                Encoding::PhaseFlag => s = s.tensor(&qubit(plus(), aux[0].clone()))?,
                Encoding::PauliFlags => {
                    s = s.tensor(&qubit(plus(), aux[0].clone()))?;
                    s = s.tensor(&StateVector::basis_state([aux[1].clone()], "0")?)?;
                }
                Encoding::DualRail => {
                    s = s.tensor(&StateVector::basis_state([aux[0].clone()], "1")?)?;
                    s = s.apply_unitary(&gate_cnot(), &[d.clone(), aux[0].clone()])?;
                }
            }
        }
        if let Some(f) = &self.frame {
            let all = s.labels().to_vec();
            s = s.apply_each(f, &all)?;
        }
        Ok(s)
    }

    fn unit_of(&self, data: &Label) -> Vec<Label> {
        let mut u = vec![data.clone()];
        u.extend(aux_labels(data, self.encoding));
        u
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn coding_basis(&self) -> &OrthonormalBasis {
        &self.coding_basis
    }

    pub fn symbols(&self) -> &[CodingSymbol] {
        &self.symbols
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.symbols.len().trailing_zeros()
    }

    /// Unitary Alice applies to every qubit she prepares (Bob undoes it).
    pub fn frame(&self) -> Option<&Unitary> {
        self.frame.as_ref()
    }

    pub fn has_block_flag(&self) -> bool {
        self.block_flag
    }

    pub fn decoy(&self) -> Option<&Decoy> {
        self.decoy.as_ref()
    }

    /// Qubits travelling with Alice's `A` partita (data first).
    pub fn a_unit(&self) -> Vec<Label> {
        self.unit_of(&Label::from(LABEL_A))
    }

    /// Qubits travelling with the `B` partita (data first).
    pub fn b_unit(&self) -> Vec<Label> {
        self.unit_of(&Label::from(LABEL_B))
    }

    pub fn qubits_per_state(&self) -> usize {
        self.a_unit().len() + self.b_unit().len()
    }

    pub fn random_symbol<R: Rng + ?Sized>(&self, rng: &mut R) -> CodingSymbol {
        self.symbols[rng.gen_range(0..self.symbols.len())]
    }

    pub fn symbol_index(&self, sym: CodingSymbol) -> Result<usize, CodebookError> {
        self.symbols
            .iter()
            .position(|&s| s == sym)
            .ok_or(CodebookError::SymbolOutOfRange(sym))
    }

    /// Fully encoded state for `sym` over the `A`/`B` units.
    pub fn encode_symbol(&self, sym: CodingSymbol) -> Result<StateVector, CodebookError> {
        let idx = self.symbol_index(sym)?;
        let v = self.coding_basis.vector(idx);
        let logical = pair([v[0], v[1], v[2], v[3]], LABEL_A, LABEL_B);
        self.dress(logical, &labels([LABEL_A, LABEL_B]))
    }

    /// Inverse of the symbol map. Indices past the symbol list (the padding
    /// vectors of `S′`) are valid outcomes but carry no symbol.
    pub fn decode_outcome(&self, outcome: usize) -> Result<CodingSymbol, CodebookError> {
        self.symbols
            .get(outcome)
            .copied()
            .ok_or(CodebookError::OutcomeOutOfRange(outcome))
    }
}

/// Auxiliary labels attached to data qubit `d` under `encoding`.
pub fn aux_labels(d: &Label, encoding: Encoding) -> Vec<Label> {
    match encoding {
        Encoding::Plain => vec![],
        Encoding::PhaseFlag | Encoding::DualRail => vec![Label::new(format!("{d}'"))],
        Encoding::PauliFlags => vec![Label::new(format!("{d}'")), Label::new(format!("{d}''"))],
    }
}
