//! Eavesdropping strategies.
//!
//! An adversary sees each transmission stage as a list of [`InTransit`]
//! parcels. It may act on the parcel's register arbitrarily, including
//! tensoring in its own qubits (labels starting with `E`) and relabelling,
//! but the particle labels listed in the parcel must still be present when
//! it hands the register back; those are what the receiver measures.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{
    basis_computational, basis_plus_minus, basis_s, gate_i, gate_x, gate_z, pair, phi, Codebook,
    CodingSymbol, Protocol,
};
use crate::qstate::{Label, OrthonormalBasis, QStateError, StateVector, Unitary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("attack `{attack}` does not apply to protocol {protocol}")]
    Unsupported { attack: String, protocol: Protocol },
    #[error("block attacks need 4 particles per block, got {0}")]
    BlockSize(usize),
    #[error("cannot parse attack `{0}`")]
    Parse(String),
    #[error(transparent)]
    State(#[from] QStateError),
}

/// Single-qubit basis used by purifying and measuring attacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitBasis {
    Computational,
    PlusMinus,
}

impl QubitBasis {
    pub fn basis(self) -> OrthonormalBasis {
        match self {
            QubitBasis::Computational => basis_computational(),
            QubitBasis::PlusMinus => basis_plus_minus(),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            QubitBasis::Computational => "computational",
            QubitBasis::PlusMinus => "plusminus",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "computational" | "z" => Some(QubitBasis::Computational),
            "plusminus" | "pm" | "x" => Some(QubitBasis::PlusMinus),
            _ => None,
        }
    }
}

/// Which transmitted qubits a single-qubit purification touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coverage {
    /// Every data qubit in transit.
    Every,
    /// Exactly one qubit of each coding state: the stage-1 particles of
    /// protocol I, and physical particles 1 and 4 of each protocol II block
    /// (which belong to different states whatever the order string says).
    OnePerState,
}

/// Eve's own pair in a substitution attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Resource {
    /// `|00⟩`.
    Product,
    /// The singlet `|φ⟩`.
    Entangled,
}

/// Local unitary Eve applies to her forwarded partner after learning the symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubstituteCorrection {
    Identity,
    /// The correction table that minimises Bob's error for the resource.
    BestResponse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Granularity {
    SingleQubit(QubitBasis),
    /// Two-qubit measurement in the coding basis after guessing the block order.
    BlockS,
}

/// Attack descriptor; [`AttackStrategy::new`] turns it into a stateful strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AttackKind {
    #[default]
    NoAttack,
    PurifySingleQubit {
        basis: QubitBasis,
        coverage: Coverage,
    },
    PurifyBlockS,
    Substitute {
        resource: Resource,
        correction: SubstituteCorrection,
    },
    MeasureResend(Granularity),
    TwoStage,
}

impl AttackKind {
    /// Rejects strategies that have no meaning for `protocol`.
    pub fn check(&self, protocol: Protocol) -> Result<(), AttackError> {
        let ok = match self {
            AttackKind::PurifyBlockS | AttackKind::MeasureResend(Granularity::BlockS) => {
                protocol == Protocol::Two
            }
            AttackKind::TwoStage => protocol == Protocol::One,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(AttackError::Unsupported {
                attack: self.to_string(),
                protocol,
            })
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::NoAttack => f.write_str("none"),
            AttackKind::PurifySingleQubit { basis, coverage } => {
                write!(f, "purify-single:{}", basis.tag())?;
                match coverage {
                    Coverage::Every => Ok(()),
                    Coverage::OnePerState => f.write_str(":one-per-state"),
                }
            }
            AttackKind::PurifyBlockS => f.write_str("purify-block"),
            AttackKind::Substitute {
                resource,
                correction,
            } => {
                f.write_str(match resource {
                    Resource::Product => "substitute:product",
                    Resource::Entangled => "substitute:entangled",
                })?;
                match correction {
                    SubstituteCorrection::Identity => Ok(()),
                    SubstituteCorrection::BestResponse => f.write_str(":best"),
                }
            }
            AttackKind::MeasureResend(Granularity::SingleQubit(b)) => {
                write!(f, "measure-resend:{}", b.tag())
            }
            AttackKind::MeasureResend(Granularity::BlockS) => f.write_str("measure-resend:block"),
            AttackKind::TwoStage => f.write_str("two-stage"),
        }
    }
}

impl FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AttackError::Parse(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        Ok(match parts.as_slice() {
            ["none"] => AttackKind::NoAttack,
            ["purify-single", b] | ["purify-single", b, "every"] => AttackKind::PurifySingleQubit {
                basis: QubitBasis::parse(b).ok_or_else(bad)?,
                coverage: Coverage::Every,
            },
            ["purify-single", b, "one-per-state"] => AttackKind::PurifySingleQubit {
                basis: QubitBasis::parse(b).ok_or_else(bad)?,
                coverage: Coverage::OnePerState,
            },
            ["purify-block"] => AttackKind::PurifyBlockS,
            ["substitute", r, rest @ ..] => {
                let resource = match *r {
                    "product" => Resource::Product,
                    "entangled" => Resource::Entangled,
                    _ => return Err(bad()),
                };
                let correction = match rest {
                    [] | ["identity"] => SubstituteCorrection::Identity,
                    ["best"] => SubstituteCorrection::BestResponse,
                    _ => return Err(bad()),
                };
                AttackKind::Substitute {
                    resource,
                    correction,
                }
            }
            ["measure-resend", "block"] => AttackKind::MeasureResend(Granularity::BlockS),
            ["measure-resend", b] => AttackKind::MeasureResend(Granularity::SingleQubit(
                QubitBasis::parse(b).ok_or_else(bad)?,
            )),
            ["two-stage"] => AttackKind::TwoStage,
            _ => return Err(bad()),
        })
    }
}

impl From<AttackKind> for String {
    fn from(a: AttackKind) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for AttackKind {
    type Error = AttackError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Public information available while particles are in flight.
#[derive(Clone, Copy, Debug)]
pub struct StageContext<'a> {
    pub protocol: Protocol,
    pub stage: u8,
    pub codebook: &'a Codebook,
    /// Decoy-position string, once published (protocol I, stage 2).
    pub r_string: Option<&'a [bool]>,
}

/// One slot's particles as seen on the channel.
#[derive(Debug)]
pub struct InTransit<'a> {
    /// Stage-1 sequence index (protocol I) or block index (protocol II).
    pub slot: usize,
    pub register: &'a mut StateVector,
    /// Physical particles, each a data qubit followed by its auxiliaries.
    pub units: &'a [Vec<Label>],
    /// Block-level auxiliary qubits.
    pub flags: &'a [Label],
}

/// Everything published by the end of the run.
#[derive(Clone, Copy, Debug)]
pub struct PublicRecord<'a> {
    pub protocol: Protocol,
    pub r_string: Option<&'a [bool]>,
    pub s_string: Option<&'a [bool]>,
}

/// Eve's guesses per coding position.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EveKnowledge {
    pub guesses: Vec<Option<CodingSymbol>>,
    /// Set where Eve knows her guess is the symbol Alice sent.
    pub confident: Vec<bool>,
}

impl EveKnowledge {
    fn new(positions: usize) -> Self {
        EveKnowledge {
            guesses: vec![None; positions],
            confident: vec![false; positions],
        }
    }

    fn set(&mut self, pos: usize, sym: CodingSymbol, confident: bool) {
        if pos < self.guesses.len() {
            self.guesses[pos] = Some(sym);
            self.confident[pos] = confident;
        }
    }
}

/// Interception hooks called by the protocol engine.
pub trait Adversary: Send {
    fn describe(&self) -> String;

    /// Resets memory for a run over `positions` coding states.
    fn start(&mut self, protocol: Protocol, positions: usize) -> Result<(), AttackError>;

    fn intercept(
        &mut self,
        ctx: &StageContext<'_>,
        parcels: &mut [InTransit<'_>],
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError>;

    /// Runs after every classical message is public. `registers` is indexed
    /// by slot, as in [`InTransit::slot`].
    fn conclude(
        &mut self,
        public: &PublicRecord<'_>,
        registers: &mut [StateVector],
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError>;

    fn knowledge(&self) -> Option<EveKnowledge>;
}

#[derive(Clone, Debug, Default)]
struct SlotMemory {
    /// Eve's guess that the block's inner particles were swapped.
    guess_swap: bool,
    /// Probe qubits kept per particle or per pair.
    probes: Vec<Label>,
    /// Alice's particles taken out of the channel.
    stolen: Vec<Label>,
    /// Outcome indices of measurements already made.
    outcomes: Vec<usize>,
}

/// The built-in strategies.
#[derive(Clone, Debug)]
pub struct AttackStrategy {
    kind: AttackKind,
    protocol: Protocol,
    counter: usize,
    memory: Vec<SlotMemory>,
    knowledge: EveKnowledge,
}

/// Coding-basis symbols in outcome order, independent of the run's codebook.
fn s_symbol(idx: usize) -> CodingSymbol {
    CodingSymbol::two_bit([0b00, 0b11, 0b01, 0b10][idx & 3])
}

/// Coding position of protocol I slot `slot`, if it carries a coding state.
fn coding_position(r: &[bool], slot: usize) -> Option<usize> {
    if r.get(slot).copied().unwrap_or(true) {
        return None;
    }
    Some(r[..slot].iter().filter(|&&d| !d).count())
}

fn pairs_for(swap: bool) -> [(usize, usize); 2] {
    if swap {
        [(0, 2), (1, 3)]
    } else {
        [(0, 1), (2, 3)]
    }
}

impl AttackStrategy {
    pub fn new(kind: AttackKind) -> Self {
        AttackStrategy {
            kind,
            protocol: Protocol::One,
            counter: 0,
            memory: Vec::new(),
            knowledge: EveKnowledge::default(),
        }
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    fn fresh(&mut self) -> Label {
        self.counter += 1;
        Label::new(format!("E{}", self.counter))
    }

    fn slot(&mut self, slot: usize) -> &mut SlotMemory {
        if self.memory.len() <= slot {
            self.memory.resize_with(slot + 1, SlotMemory::default);
        }
        &mut self.memory[slot]
    }

    fn purify_single(
        &mut self,
        ctx: &StageContext<'_>,
        p: &mut InTransit<'_>,
        basis: QubitBasis,
        coverage: Coverage,
    ) -> Result<(), AttackError> {
        let chosen: Vec<usize> = match (coverage, ctx.protocol) {
            (Coverage::Every, _) => (0..p.units.len()).collect(),
            (Coverage::OnePerState, Protocol::One) if ctx.stage == 1 => {
                (0..p.units.len()).collect()
            }
            (Coverage::OnePerState, Protocol::One) => vec![],
            (Coverage::OnePerState, Protocol::Two) => vec![0, 3],
        };
        for u in chosen {
            let target = p
                .units
                .get(u)
                .ok_or(AttackError::BlockSize(p.units.len()))?[0]
                .clone();
            let e = self.fresh();
            *p.register = p
                .register
                .purify(&basis.basis(), &[target], std::slice::from_ref(&e))?;
            self.slot(p.slot).probes.push(e);
        }
        Ok(())
    }

    fn block_data(p: &InTransit<'_>) -> Result<Vec<Label>, AttackError> {
        if p.units.len() != 4 {
            return Err(AttackError::BlockSize(p.units.len()));
        }
        Ok(p.units.iter().map(|u| u[0].clone()).collect())
    }

    fn purify_block(
        &mut self,
        p: &mut InTransit<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        let data = Self::block_data(p)?;
        let swap = rng.gen_bool(0.5);
        let mut probes = Vec::new();
        for (i, j) in pairs_for(swap) {
            let anc = [self.fresh(), self.fresh()];
            *p.register =
                p.register
                    .purify(&basis_s(), &[data[i].clone(), data[j].clone()], &anc)?;
            probes.extend(anc);
        }
        let m = self.slot(p.slot);
        m.guess_swap = swap;
        m.probes = probes;
        Ok(())
    }

    fn measure_block(
        &mut self,
        p: &mut InTransit<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        let data = Self::block_data(p)?;
        let swap = rng.gen_bool(0.5);
        let mut outcomes = Vec::new();
        for (i, j) in pairs_for(swap) {
            let (k, next) =
                p.register
                    .measure(&basis_s(), &[data[i].clone(), data[j].clone()], rng)?;
            *p.register = next;
            outcomes.push(k);
        }
        let m = self.slot(p.slot);
        m.guess_swap = swap;
        m.outcomes = outcomes;
        Ok(())
    }

    /// Splices Eve's resource in place of the particle `target`: Alice's qubit
    /// is renamed into Eve's namespace and Eve's first qubit takes its label.
    /// Returns (stolen label, Eve's retained partner).
    fn swap_in(
        &mut self,
        register: &mut StateVector,
        target: &Label,
        resource: Resource,
    ) -> Result<(Label, Label), AttackError> {
        let (e1, e2, stolen) = (self.fresh(), self.fresh(), self.fresh());
        let res = match resource {
            Resource::Product => StateVector::basis_state([e1.clone(), e2.clone()], "00")?,
            Resource::Entangled => pair(phi(), e1.clone(), e2.clone()),
        };
        *register = register
            .tensor(&res)?
            .relabel(target, stolen.clone())?
            .relabel(&e1, target.clone())?;
        Ok((stolen, e2))
    }

    fn substitute(
        &mut self,
        ctx: &StageContext<'_>,
        p: &mut InTransit<'_>,
        resource: Resource,
        correction: SubstituteCorrection,
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        match (ctx.protocol, ctx.stage) {
            (Protocol::One, 1) => {
                for u in p.units {
                    let (stolen, partner) = self.swap_in(p.register, &u[0], resource)?;
                    let m = self.slot(p.slot);
                    m.stolen.push(stolen);
                    m.probes.push(partner);
                }
            }
            (Protocol::One, _) => {
                let a = p.units.first().ok_or(AttackError::BlockSize(0))?[0].clone();
                let m = self.slot(p.slot).clone();
                let (Some(stolen_b), Some(partner)) = (m.stolen.first(), m.probes.first()) else {
                    return Ok(());
                };
                let stolen_a = self.fresh();
                let reg = p.register.relabel(&a, stolen_a.clone())?;
                let (k, reg) = reg.measure(&basis_s(), &[stolen_a, stolen_b.clone()], rng)?;
                let fix = substitute_table(resource, correction)[k].clone();
                *p.register = reg
                    .apply_unitary(&fix, std::slice::from_ref(partner))?
                    .relabel(partner, a)?;
                if let Some(pos) = ctx.r_string.and_then(|r| coding_position(r, p.slot)) {
                    self.knowledge.set(pos, s_symbol(k), true);
                }
            }
            (Protocol::Two, _) => {
                let data = Self::block_data(p)?;
                let (s1, s2, s3, s4) = (self.fresh(), self.fresh(), self.fresh(), self.fresh());
                let stolen = [s1, s2, s3, s4];
                let mut reg = p.register.clone();
                for (d, s) in data.iter().zip(&stolen) {
                    reg = reg.relabel(d, s.clone())?;
                }
                let own = match resource {
                    Resource::Product => StateVector::basis_state(data.clone(), "0000")?,
                    Resource::Entangled => pair(phi(), data[0].clone(), data[1].clone())
                        .tensor(&pair(phi(), data[2].clone(), data[3].clone()))?,
                };
                *p.register = reg.tensor(&own)?;
                self.slot(p.slot).stolen = stolen.to_vec();
            }
        }
        Ok(())
    }

    fn measure_single(
        &mut self,
        p: &mut InTransit<'_>,
        basis: QubitBasis,
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        for u in p.units {
            let (_, next) = p.register.measure(&basis.basis(), &u[..1], rng)?;
            *p.register = next;
        }
        Ok(())
    }

    fn two_stage(
        &mut self,
        ctx: &StageContext<'_>,
        p: &mut InTransit<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        if ctx.stage == 1 {
            for u in p.units {
                let (e, e2) = (self.fresh(), self.fresh());
                let comp = basis_computational();
                *p.register = p
                    .register
                    .purify(&comp, &u[..1], std::slice::from_ref(&e))?
                    .purify(&comp, &u[..1], std::slice::from_ref(&e2))?
                    .apply_unitary(&gate_x(), std::slice::from_ref(&e2))?;
                let m = self.slot(p.slot);
                m.probes.push(e);
                m.probes.push(e2);
            }
            return Ok(());
        }
        let a = p.units.first().ok_or(AttackError::BlockSize(0))?[0].clone();
        let m = self.slot(p.slot).clone();
        let [e, e2, ..] = m.probes.as_slice() else {
            return Ok(());
        };
        let stolen = self.fresh();
        let reg = p.register.relabel(&a, stolen.clone())?;
        let (k, reg) = reg.measure(&basis_s(), &[stolen, e.clone()], rng)?;
        let fix = match k {
            0 | 1 => gate_x(),
            2 => gate_z(),
            _ => gate_i(),
        };
        *p.register = reg
            .apply_unitary(&fix, std::slice::from_ref(e2))?
            .relabel(e2, a)?;
        if k < 2 {
            if let Some(pos) = ctx.r_string.and_then(|r| coding_position(r, p.slot)) {
                self.knowledge.set(pos, s_symbol(k), true);
            }
        }
        Ok(())
    }
}

/// Correction applied to Eve's forwarded qubit, indexed by her outcome in
/// the coding basis (`00, 11, φ, φ′`).
pub fn substitute_table(resource: Resource, correction: SubstituteCorrection) -> [Unitary; 4] {
    match (resource, correction) {
        (_, SubstituteCorrection::Identity) => [gate_i(), gate_i(), gate_i(), gate_i()],
        (Resource::Product, SubstituteCorrection::BestResponse) => {
            [gate_i(), gate_i(), gate_x(), gate_x()]
        }
        (Resource::Entangled, SubstituteCorrection::BestResponse) => {
            [gate_x(), gate_x(), gate_i(), gate_z()]
        }
    }
}

impl Adversary for AttackStrategy {
    fn describe(&self) -> String {
        self.kind.to_string()
    }

    fn start(&mut self, protocol: Protocol, positions: usize) -> Result<(), AttackError> {
        self.kind.check(protocol)?;
        self.protocol = protocol;
        self.counter = 0;
        self.memory.clear();
        self.knowledge = EveKnowledge::new(positions);
        Ok(())
    }

    fn intercept(
        &mut self,
        ctx: &StageContext<'_>,
        parcels: &mut [InTransit<'_>],
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        self.kind.check(ctx.protocol)?;
        for p in parcels.iter_mut() {
            match self.kind {
                AttackKind::NoAttack => {}
                AttackKind::PurifySingleQubit { basis, coverage } => {
                    self.purify_single(ctx, p, basis, coverage)?
                }
                AttackKind::PurifyBlockS => self.purify_block(p, rng)?,
                AttackKind::Substitute {
                    resource,
                    correction,
                } => self.substitute(ctx, p, resource, correction, rng)?,
                AttackKind::MeasureResend(Granularity::SingleQubit(b)) => {
                    self.measure_single(p, b, rng)?
                }
                AttackKind::MeasureResend(Granularity::BlockS) => self.measure_block(p, rng)?,
                AttackKind::TwoStage => self.two_stage(ctx, p, rng)?,
            }
        }
        Ok(())
    }

    fn conclude(
        &mut self,
        public: &PublicRecord<'_>,
        registers: &mut [StateVector],
        rng: &mut dyn RngCore,
    ) -> Result<(), AttackError> {
        let Some(s) = public.s_string else {
            return Ok(());
        };
        for (block, reg) in registers.iter_mut().enumerate() {
            let Some(m) = self.memory.get(block).cloned() else {
                continue;
            };
            let right = s.get(block).copied() == Some(m.guess_swap);
            match self.kind {
                AttackKind::PurifyBlockS => {
                    for (j, anc) in m.probes.chunks(2).enumerate() {
                        let (k, next) = reg.measure(
                            &crate::qstate::OrthonormalBasis::computational(2),
                            anc,
                            rng,
                        )?;
                        *reg = next;
                        self.knowledge.set(2 * block + j, s_symbol(k), right);
                    }
                }
                AttackKind::MeasureResend(Granularity::BlockS) => {
                    for (j, &k) in m.outcomes.iter().enumerate() {
                        self.knowledge.set(2 * block + j, s_symbol(k), right);
                    }
                }
                AttackKind::Substitute { .. } if m.stolen.len() == 4 => {
                    for (j, (a, b)) in pairs_for(s[block]).into_iter().enumerate() {
                        let (k, next) = reg.measure(
                            &basis_s(),
                            &[m.stolen[a].clone(), m.stolen[b].clone()],
                            rng,
                        )?;
                        *reg = next;
                        self.knowledge.set(2 * block + j, s_symbol(k), true);
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn knowledge(&self) -> Option<EveKnowledge> {
        match self.kind {
            AttackKind::NoAttack | AttackKind::PurifySingleQubit { .. } => None,
            AttackKind::MeasureResend(Granularity::SingleQubit(_)) => None,
            _ => Some(self.knowledge.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{phi_prime, LABEL_A, LABEL_B};
    use crate::qstate::labels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse_all() -> Vec<&'static str> {
        vec![
            "none",
            "purify-single:computational",
            "purify-single:plusminus:one-per-state",
            "purify-block",
            "substitute:product",
            "substitute:entangled:best",
            "measure-resend:computational",
            "measure-resend:plusminus",
            "measure-resend:block",
            "two-stage",
        ]
    }

    #[test]
    fn attack_strings_round_trip() {
        for s in parse_all() {
            let k: AttackKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("purify-single:diagonal".parse::<AttackKind>().is_err());
        assert!("substitute".parse::<AttackKind>().is_err());
    }

    #[test]
    fn protocol_restrictions() {
        assert!(AttackKind::PurifyBlockS.check(Protocol::One).is_err());
        assert!(AttackKind::MeasureResend(Granularity::BlockS)
            .check(Protocol::One)
            .is_err());
        assert!(AttackKind::TwoStage.check(Protocol::Two).is_err());
        assert!(AttackKind::TwoStage.check(Protocol::One).is_ok());
    }

    #[test]
    fn qubitwise_purification_of_phi_prime() {
        let cb = Codebook::plain(Protocol::One);
        let mut reg = pair(phi_prime(), LABEL_A, LABEL_B);
        let mut eve = AttackStrategy::new(AttackKind::PurifySingleQubit {
            basis: QubitBasis::Computational,
            coverage: Coverage::Every,
        });
        eve.start(Protocol::One, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (stage, unit) in [(1u8, labels([LABEL_B])), (2, labels([LABEL_A]))] {
            let r = [false];
            let ctx = StageContext {
                protocol: Protocol::One,
                stage,
                codebook: &cb,
                r_string: Some(&r),
            };
            let units = [unit];
            let mut p = [InTransit {
                slot: 0,
                register: &mut reg,
                units: &units,
                flags: &[],
            }];
            eve.intercept(&ctx, &mut p, &mut rng).unwrap();
        }
        // Probe order is B's then A's; reorder to A B E E′ with E copying A.
        let reg = reg.permute(&labels(["A", "B", "E2", "E1"])).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = [0.0; 16];
        amps[0b0101] = r;
        amps[0b1010] = r;
        let expect = StateVector::from_real(["A", "B", "E2", "E1"], &amps).unwrap();
        assert!(reg.equal_up_to_phase(&expect, 1e-10));
    }

    #[test]
    fn coding_position_skips_decoys() {
        let r = [false, true, false, true, false];
        assert_eq!(coding_position(&r, 0), Some(0));
        assert_eq!(coding_position(&r, 1), None);
        assert_eq!(coding_position(&r, 4), Some(2));
    }

    #[test]
    fn substitute_tables_are_unitary() {
        for res in [Resource::Product, Resource::Entangled] {
            for c in [
                SubstituteCorrection::Identity,
                SubstituteCorrection::BestResponse,
            ] {
                for g in substitute_table(res, c) {
                    assert!(g.unitarity_deviation() < 1e-12);
                }
            }
        }
    }
}
