//! Protocol state machines.
//!
//! Protocol I: Alice prepares `2N` coding states, mixes `D` decoy particles
//! into the stream of `B` partite at positions recorded in `r`, sends that
//! stream, waits for a receipt, then sends the `A` partite and publishes
//! `r`. Protocol II: Alice groups the states into `N` blocks of two, swaps
//! the inner particles of block `i` when `sᵢ = 1`, sends everything at once
//! and publishes `s` after the receipt. In both, Bob measures, publishes a
//! random half of the coding positions with outcomes, and the rest is key.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    Adversary, AttackError, AttackKind, AttackStrategy, EveKnowledge, InTransit, PublicRecord,
    StageContext,
};
use crate::analysis::{efficiency, ResourceLedger};
use crate::codebook::{
    Codebook, CodebookError, CodingSymbol, NoiseMode, Protocol, LABEL_A, LABEL_B, LABEL_FLAG,
};
use crate::noise::{
    adapt_protocol, bob_correct, AngleSchedule, ChannelModel, Corrected, CorrectionRule, Grouping,
    RunChannel,
};
use crate::qstate::{Label, QStateError, StateVector, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stage {stage}, slot {slot}: {detail}")]
    HookFault {
        stage: u8,
        slot: usize,
        detail: String,
    },
    #[error("empty checking set")]
    EmptyCheckingSet,
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    State(#[from] QStateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Half the number of coding states.
    pub n: usize,
    pub noise: NoiseMode,
    /// Use the codebook and correction procedure matched to `noise`.
    pub adapt_to_noise: bool,
    pub grouping: Grouping,
    pub angle_schedule: AngleSchedule,
    /// Fraction of received coding states Bob publishes for checking.
    pub checking_fraction: f64,
    /// Decoys per coding state (protocol I).
    pub decoy_ratio: f64,
    /// Highest tolerated error rate; anything above aborts.
    pub error_threshold: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol, n: usize) -> Self {
        ProtocolConfig {
            protocol,
            n,
            noise: NoiseMode::None,
            adapt_to_noise: true,
            grouping: Grouping::Correlated,
            angle_schedule: AngleSchedule::PerRun,
            checking_fraction: 0.5,
            decoy_ratio: 0.25,
            error_threshold: 0.0,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.error_threshold = t;
        self
    }

    pub fn with_decoy_ratio(mut self, r: f64) -> Self {
        self.decoy_ratio = r;
        self
    }

    pub fn positions(&self) -> usize {
        2 * self.n
    }

    /// Decoys inserted by protocol I (none for protocol II).
    pub fn decoys(&self) -> usize {
        match self.protocol {
            Protocol::One => (self.decoy_ratio * self.positions() as f64).round() as usize,
            Protocol::Two => 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if !(self.checking_fraction > 0.0 && self.checking_fraction < 1.0) {
            return bad(format!(
                "checking fraction {} is outside (0, 1)",
                self.checking_fraction
            ));
        }
        if !(self.decoy_ratio >= 0.0 && self.decoy_ratio.is_finite()) {
            return bad(format!(
                "decoy ratio {} is negative or not finite",
                self.decoy_ratio
            ));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return bad(format!(
                "error threshold {} is outside [0, 1]",
                self.error_threshold
            ));
        }
        self.noise.validate()?;
        Ok(())
    }

    fn codebook_and_rule(&self) -> Result<(Codebook, CorrectionRule), EngineError> {
        if self.adapt_to_noise {
            let a = adapt_protocol(self.protocol, self.noise)?;
            Ok((a.codebook, a.rule))
        } else {
            Ok((Codebook::plain(self.protocol), CorrectionRule::Identity))
        }
    }
}

/// Errors out of a number of scored items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub errors: usize,
    pub count: usize,
}

impl ErrorTally {
    /// `errors / count`, or 0 when nothing was scored.
    pub fn rate(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.errors as f64 / self.count as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Receipt,
    DecoyPositions,
    OrderString,
    CheckingPositions,
    CheckingOutcomes,
    Verdict,
}

/// A public classical message and its cost in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub bits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u8,
    /// Transmitted qubit labels per parcel, in sending order.
    pub particles: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub protocol: Protocol,
    pub prepared_symbols: Vec<CodingSymbol>,
    /// `true` marks a decoy slot.
    pub r_string: Option<Vec<bool>>,
    /// `true` marks a block whose inner particles were swapped.
    pub s_string: Option<Vec<bool>>,
    pub stages: Vec<StageRecord>,
    /// Bob's decoded symbol per coding position; `None` when the outcome
    /// carries no symbol or the position was discarded.
    pub bob_symbols: Vec<Option<CodingSymbol>>,
    pub discarded: Vec<usize>,
    pub checking_set: Vec<usize>,
    pub published_outcomes: Vec<(usize, Option<CodingSymbol>)>,
    /// Outcome index per decoy, `None` when discarded.
    pub decoy_outcomes: Vec<Option<usize>>,
    pub messages: Vec<Message>,
    pub classical_bit_count: usize,
    pub qubit_count: usize,
    /// Collective angle the channel used, if any.
    pub channel_angle: Option<f64>,
    pub eve: Option<EveKnowledge>,
}

/// How much of Alice's data Eve guessed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveScore {
    pub guessed: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub n: usize,
    pub decoy: ErrorTally,
    pub checking: ErrorTally,
    /// Coding states Bob discarded after a failed dual-rail check.
    pub discarded: usize,
    pub aborted: bool,
    /// Bob's sifted key as a `0`/`1` string; empty when aborted.
    pub key_bits: String,
    pub alice_key_bits: String,
    pub ledger: ResourceLedger,
    pub efficiency: f64,
    pub eve: Option<EveScore>,
}

impl RunReport {
    pub fn decoy_error_rate(&self) -> f64 {
        self.decoy.rate()
    }

    pub fn checking_error_rate(&self) -> f64 {
        self.checking.rate()
    }
}

/// Compares Bob's symbols with Alice's on `checking_set`. Returns the error
/// rate and the mismatching positions.
pub fn checking_procedure(
    prepared: &[CodingSymbol],
    received: &[Option<CodingSymbol>],
    checking_set: &[usize],
) -> Result<(f64, Vec<usize>), EngineError> {
    if checking_set.is_empty() {
        return Err(EngineError::EmptyCheckingSet);
    }
    let mut bad = Vec::new();
    for &i in checking_set {
        let (Some(a), Some(b)) = (prepared.get(i), received.get(i)) else {
            return Err(EngineError::InvalidConfig(format!(
                "checking position {i} out of range"
            )));
        };
        if Some(*a) != *b {
            bad.push(i);
        }
    }
    Ok((bad.len() as f64 / checking_set.len() as f64, bad))
}

/// Concatenates the bits of every symbol whose position is not excluded.
pub fn sift_key(
    symbols: &[CodingSymbol],
    excluded: &BTreeSet<usize>,
    bits_per_symbol: u32,
) -> String {
    symbols
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .flat_map(|(_, s)| {
            debug_assert_eq!(u32::from(s.width()), bits_per_symbol);
            s.to_bits()
        })
        .map(|b| if b { '1' } else { '0' })
        .collect()
}

/// Runs one protocol with a fresh generator seeded from `cfg.seed`.
pub fn run(
    cfg: &ProtocolConfig,
    adv: &mut dyn Adversary,
) -> Result<(RunReport, Transcript), EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_with_rng(cfg, adv, &mut rng)
}

pub fn run_with_rng<R: Rng>(
    cfg: &ProtocolConfig,
    adv: &mut dyn Adversary,
    rng: &mut R,
) -> Result<(RunReport, Transcript), EngineError> {
    match cfg.protocol {
        Protocol::One => run_protocol_one(cfg, adv, rng),
        Protocol::Two => run_protocol_two(cfg, adv, rng),
    }
}

/// Generator for trial `trial` of a batch: the master seed selects the key,
/// the trial index the stream.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent runs in parallel; output order follows the
/// trial index.
pub fn run_trials(
    cfg: &ProtocolConfig,
    attack: AttackKind,
    trials: usize,
) -> Result<Vec<RunReport>, EngineError> {
    cfg.validate()?;
    attack.check(cfg.protocol)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t as u64);
            let mut adv = AttackStrategy::new(attack);
            run_with_rng(cfg, &mut adv, &mut rng).map(|(r, _)| r)
        })
        .collect()
}

/// Run-wide state shared by both protocols.
struct Session<'a> {
    cfg: &'a ProtocolConfig,
    codebook: Codebook,
    rule: CorrectionRule,
    channel: RunChannel,
    stages: Vec<StageRecord>,
    messages: Vec<Message>,
    qubits: usize,
}

/// One slot's parcel: its register lives in the session-wide register list.
struct Parcel {
    slot: usize,
    units: Vec<Vec<Label>>,
    flags: Vec<Label>,
}

impl<'a> Session<'a> {
    fn new<R: Rng>(cfg: &'a ProtocolConfig, rng: &mut R) -> Result<Self, EngineError> {
        cfg.validate()?;
        let (codebook, rule) = cfg.codebook_and_rule()?;
        let channel = ChannelModel::new(cfg.noise, cfg.grouping)?
            .with_schedule(cfg.angle_schedule)
            .realize(rng)?;
        Ok(Session {
            cfg,
            codebook,
            rule,
            channel,
            stages: Vec::new(),
            messages: Vec::new(),
            qubits: 0,
        })
    }

    fn publish(&mut self, kind: MessageKind, bits: usize) {
        self.messages.push(Message { kind, bits });
    }

    /// Passes parcels through the adversary, checks that every particle
    /// label survived, then applies the channel.
    fn transmit<R: Rng>(
        &mut self,
        stage: u8,
        registers: &mut [StateVector],
        parcels: &[Parcel],
        adv: &mut dyn Adversary,
        r_string: Option<&[bool]>,
        rng: &mut R,
    ) -> Result<(), EngineError> {
        self.channel.begin_stage(stage, rng);
        let ctx = StageContext {
            protocol: self.cfg.protocol,
            stage,
            codebook: &self.codebook,
            r_string,
        };
        {
            let mut by_slot: Vec<Option<&mut StateVector>> =
                registers.iter_mut().map(Some).collect();
            let mut transit = Vec::with_capacity(parcels.len());
            for p in parcels {
                let register = by_slot[p.slot]
                    .take()
                    .ok_or_else(|| EngineError::HookFault {
                        stage,
                        slot: p.slot,
                        detail: "slot sent twice in one stage".into(),
                    })?;
                transit.push(InTransit {
                    slot: p.slot,
                    register,
                    units: &p.units,
                    flags: &p.flags,
                });
            }
            adv.intercept(&ctx, &mut transit, rng as &mut dyn RngCore)?;
        }
        let mut record = Vec::with_capacity(parcels.len());
        for p in parcels {
            let reg = &mut registers[p.slot];
            let labels: Vec<Label> = p.units.iter().flatten().chain(&p.flags).cloned().collect();
            if let Some(missing) = labels.iter().find(|l| !reg.has(l)) {
                return Err(EngineError::HookFault {
                    stage,
                    slot: p.slot,
                    detail: format!("particle {missing} was not delivered"),
                });
            }
            if reg.num_qubits() > MAX_QUBITS {
                return Err(EngineError::HookFault {
                    stage,
                    slot: p.slot,
                    detail: format!("register grew to {} qubits", reg.num_qubits()),
                });
            }
            *reg = self.channel.apply(reg, &p.units, &p.flags, rng)?;
            self.qubits += labels.len();
            record.push(labels.iter().map(|l| l.as_str().to_string()).collect());
        }
        self.stages.push(StageRecord {
            stage,
            particles: record,
        });
        Ok(())
    }

    /// Bob's correction followed by a coding-basis measurement of each
    /// `(A, B)` pair. Returns the outcome per pair, `None` if discarded.
    fn receive<R: Rng>(
        &self,
        register: &StateVector,
        states: &[(Vec<Label>, Vec<Label>)],
        flags: &[Label],
        rng: &mut R,
    ) -> Result<Vec<Option<usize>>, EngineError> {
        let frame = self.codebook.frame();
        let mut reg = register.clone();
        let mut discarded = vec![false; states.len()];
        if self.rule == CorrectionRule::BlockFlip {
            let units: Vec<Vec<Label>> = states
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .collect();
            match bob_correct(self.rule, frame, &reg, &units, flags, rng)? {
                Corrected::Kept(s) => reg = s,
                Corrected::Discard => discarded.fill(true),
            }
        } else {
            for (k, (a, b)) in states.iter().enumerate() {
                match bob_correct(self.rule, frame, &reg, &[a.clone(), b.clone()], &[], rng)? {
                    Corrected::Kept(s) => reg = s,
                    Corrected::Discard => discarded[k] = true,
                }
            }
        }
        let mut out = Vec::with_capacity(states.len());
        for (k, (a, b)) in states.iter().enumerate() {
            if discarded[k] {
                out.push(None);
                continue;
            }
            let (idx, next) = reg.measure(
                self.codebook.coding_basis(),
                &[a[0].clone(), b[0].clone()],
                rng,
            )?;
            reg = next;
            out.push(Some(idx));
        }
        Ok(out)
    }

    /// Steps 8 and 9: checking, verdict, sifting, ledger.
    #[allow(clippy::too_many_arguments)]
    fn finish<R: Rng>(
        mut self,
        prepared: Vec<CodingSymbol>,
        outcomes: Vec<Option<usize>>,
        decoy: ErrorTally,
        decoy_outcomes: Vec<Option<usize>>,
        r_string: Option<Vec<bool>>,
        s_string: Option<Vec<bool>>,
        registers: &mut [StateVector],
        adv: &mut dyn Adversary,
        rng: &mut R,
    ) -> Result<(RunReport, Transcript), EngineError> {
        let cfg = self.cfg;
        let bits = self.codebook.bits_per_symbol();
        let bob: Vec<Option<CodingSymbol>> = outcomes
            .iter()
            .map(|o| o.and_then(|k| self.codebook.decode_outcome(k).ok()))
            .collect();
        let discarded: Vec<usize> = (0..outcomes.len())
            .filter(|&i| outcomes[i].is_none())
            .collect();
        let kept: Vec<usize> = (0..outcomes.len())
            .filter(|&i| outcomes[i].is_some())
            .collect();
        let m = ((kept.len() as f64) * cfg.checking_fraction).round() as usize;
        let mut checking_set: Vec<usize> = index::sample(rng, kept.len(), m.min(kept.len()))
            .into_iter()
            .map(|j| kept[j])
            .collect();
        checking_set.sort_unstable();
        self.publish(MessageKind::CheckingPositions, prepared.len());
        self.publish(
            MessageKind::CheckingOutcomes,
            bits as usize * checking_set.len(),
        );
        let checking = if checking_set.is_empty() {
            ErrorTally::default()
        } else {
            let (_, bad) = checking_procedure(&prepared, &bob, &checking_set)?;
            ErrorTally {
                errors: bad.len(),
                count: checking_set.len(),
            }
        };
        let aborted = checking.rate() > cfg.error_threshold || decoy.rate() > cfg.error_threshold;
        self.publish(MessageKind::Verdict, 1);

        adv.conclude(
            &PublicRecord {
                protocol: cfg.protocol,
                r_string: r_string.as_deref(),
                s_string: s_string.as_deref(),
            },
            registers,
            rng as &mut dyn RngCore,
        )?;
        let eve = adv.knowledge();
        let eve_score = eve.as_ref().map(|k| {
            let guessed = k.guesses.iter().filter(|g| g.is_some()).count();
            let correct = k
                .guesses
                .iter()
                .zip(&prepared)
                .filter(|(g, p)| **g == Some(**p))
                .count();
            EveScore { guessed, correct }
        });

        let excluded: BTreeSet<usize> = checking_set.iter().chain(&discarded).copied().collect();
        let (key_bits, alice_key_bits) = if aborted {
            (String::new(), String::new())
        } else {
            let zero = CodingSymbol::new(0, bits as u8)?;
            let bob_filled: Vec<CodingSymbol> = bob.iter().map(|s| s.unwrap_or(zero)).collect();
            (
                sift_key(&bob_filled, &excluded, bits),
                sift_key(&prepared, &excluded, bits),
            )
        };
        let classical_bits: usize = self.messages.iter().map(|m| m.bits).sum();
        let ledger = ResourceLedger {
            qubits: self.qubits as u64,
            classical_bits: classical_bits as u64,
            key_bits: key_bits.len() as u64,
        };
        let report = RunReport {
            protocol: cfg.protocol,
            n: cfg.n,
            decoy,
            checking,
            discarded: discarded.len(),
            aborted,
            efficiency: efficiency(&ledger).unwrap_or(0.0),
            key_bits,
            alice_key_bits,
            ledger,
            eve: eve_score,
        };
        let published_outcomes = checking_set.iter().map(|&i| (i, bob[i])).collect();
        let transcript = Transcript {
            protocol: cfg.protocol,
            prepared_symbols: prepared,
            r_string,
            s_string,
            stages: self.stages,
            bob_symbols: bob,
            discarded,
            checking_set,
            published_outcomes,
            decoy_outcomes,
            messages: self.messages,
            classical_bit_count: classical_bits,
            qubit_count: self.qubits,
            channel_angle: self.channel.angle(),
            eve,
        };
        Ok((report, transcript))
    }
}

fn prepare<R: Rng>(cb: &Codebook, count: usize, rng: &mut R) -> Vec<CodingSymbol> {
    (0..count).map(|_| cb.random_symbol(rng)).collect()
}

/// Two-stage protocol with decoys.
pub fn run_protocol_one<R: Rng>(
    cfg: &ProtocolConfig,
    adv: &mut dyn Adversary,
    rng: &mut R,
) -> Result<(RunReport, Transcript), EngineError> {
    if cfg.protocol != Protocol::One {
        return Err(EngineError::InvalidConfig(
            "configuration is not for protocol 1".into(),
        ));
    }
    let mut session = Session::new(cfg, rng)?;
    let positions = cfg.positions();
    adv.start(Protocol::One, positions)?;
    let cb = session.codebook.clone();

    let prepared = prepare(&cb, positions, rng);
    let decoys = cfg.decoys();
    let decoy = match (decoys, cb.decoy()) {
        (0, _) => None,
        (_, Some(d)) => Some(d.clone()),
        (_, None) => {
            return Err(EngineError::InvalidConfig(
                "codebook has no decoy state".into(),
            ))
        }
    };
    let mut r: Vec<bool> = (0..positions + decoys).map(|i| i >= positions).collect();
    r.shuffle(rng);

    let mut registers = Vec::with_capacity(r.len());
    let mut stage1 = Vec::with_capacity(r.len());
    let mut stage2 = Vec::with_capacity(positions);
    let mut symbols = prepared.iter();
    for (slot, &is_decoy) in r.iter().enumerate() {
        if is_decoy {
            let d = decoy.as_ref().expect("decoys present");
            registers.push(d.state.clone());
            stage1.push(Parcel {
                slot,
                units: d.units.clone(),
                flags: vec![],
            });
        } else {
            let sym = *symbols.next().expect("one symbol per coding slot");
            registers.push(cb.encode_symbol(sym)?);
            stage1.push(Parcel {
                slot,
                units: vec![cb.b_unit()],
                flags: vec![],
            });
            stage2.push(Parcel {
                slot,
                units: vec![cb.a_unit()],
                flags: vec![],
            });
        }
    }

    session.transmit(1, &mut registers, &stage1, adv, None, rng)?;
    session.publish(MessageKind::Receipt, 1);
    session.publish(MessageKind::DecoyPositions, r.len());
    session.transmit(2, &mut registers, &stage2, adv, Some(&r), rng)?;
    session.publish(MessageKind::Receipt, 1);

    let mut outcomes = Vec::with_capacity(positions);
    let mut decoy_outcomes = Vec::with_capacity(decoys);
    let mut decoy_tally = ErrorTally::default();
    for (slot, &is_decoy) in r.iter().enumerate() {
        let reg = &registers[slot];
        if is_decoy {
            let d = decoy.as_ref().expect("decoys present");
            match bob_correct(session.rule, cb.frame(), reg, &d.units, &[], rng)? {
                Corrected::Kept(s) => {
                    let (k, _) = s.measure(&d.basis, &d.data, rng)?;
                    decoy_tally.count += 1;
                    decoy_tally.errors += usize::from(k != d.expected);
                    decoy_outcomes.push(Some(k));
                }
                Corrected::Discard => decoy_outcomes.push(None),
            }
        } else {
            let states = [(cb.a_unit(), cb.b_unit())];
            outcomes.push(session.receive(reg, &states, &[], rng)?[0]);
        }
    }
    session.finish(
        prepared,
        outcomes,
        decoy_tally,
        decoy_outcomes,
        Some(r),
        None,
        &mut registers,
        adv,
        rng,
    )
}

/// Inserts the block index after a label's role letter: `A'` → `A1'`.
fn tag(label: &Label, k: usize) -> Label {
    let s = label.as_str();
    let split = s.char_indices().nth(1).map_or(s.len(), |(i, _)| i);
    Label::new(format!("{}{}{}", &s[..split], k, &s[split..]))
}

fn physical(unit: &[Label], k: usize) -> Vec<Label> {
    (0..unit.len())
        .map(|j| {
            if j == 0 {
                Label::new(format!("p{k}"))
            } else {
                Label::new(format!("p{k}.{j}"))
            }
        })
        .collect()
}

/// Logical units of a block in the order `A₁, B₁, A₂, B₂`.
fn block_units(cb: &Codebook) -> Vec<Vec<Label>> {
    let (a, b) = (cb.a_unit(), cb.b_unit());
    let t = |u: &[Label], k| u.iter().map(|l| tag(l, k)).collect::<Vec<_>>();
    vec![t(&a, 1), t(&b, 1), t(&a, 2), t(&b, 2)]
}

/// Which logical unit sits at each physical position.
pub fn block_order(swap: bool) -> [usize; 4] {
    if swap {
        [0, 2, 1, 3]
    } else {
        [0, 1, 2, 3]
    }
}

/// Reorders a prepared block for transmission: the register is permuted so
/// physical particles appear in sending order, then renamed `p1…p4`
/// (auxiliaries `pk.j`). Returns the block and its physical units.
pub fn rearrange_block(
    block: &StateVector,
    logical: &[Vec<Label>],
    flags: &[Label],
    swap: bool,
) -> Result<(StateVector, Vec<Vec<Label>>), QStateError> {
    let order = block_order(swap);
    let mut perm: Vec<Label> = order
        .iter()
        .flat_map(|&u| logical[u].iter().cloned())
        .collect();
    perm.extend(flags.iter().cloned());
    let rest: Vec<Label> = block
        .labels()
        .iter()
        .filter(|l| !perm.contains(l))
        .cloned()
        .collect();
    perm.extend(rest);
    let mut out = block.permute(&perm)?;
    let mut units = Vec::with_capacity(4);
    for (k, &u) in order.iter().enumerate() {
        let phys = physical(&logical[u], k + 1);
        for (from, to) in logical[u].iter().zip(&phys) {
            out = out.relabel(from, to.clone())?;
        }
        units.push(phys);
    }
    Ok((out, units))
}

/// Inverse renaming of [`rearrange_block`] once `s` is public.
pub fn restore_block(
    block: &StateVector,
    logical: &[Vec<Label>],
    swap: bool,
) -> Result<StateVector, QStateError> {
    let mut out = block.clone();
    for (k, &u) in block_order(swap).iter().enumerate() {
        for (from, to) in physical(&logical[u], k + 1).iter().zip(&logical[u]) {
            out = out.relabel(from, to.clone())?;
        }
    }
    Ok(out)
}

/// Single-stage protocol with block order rearrangement.
pub fn run_protocol_two<R: Rng>(
    cfg: &ProtocolConfig,
    adv: &mut dyn Adversary,
    rng: &mut R,
) -> Result<(RunReport, Transcript), EngineError> {
    if cfg.protocol != Protocol::Two {
        return Err(EngineError::InvalidConfig(
            "configuration is not for protocol 2".into(),
        ));
    }
    let mut session = Session::new(cfg, rng)?;
    let positions = cfg.positions();
    adv.start(Protocol::Two, positions)?;
    let cb = session.codebook.clone();
    let prepared = prepare(&cb, positions, rng);
    let s: Vec<bool> = (0..cfg.n).map(|_| rng.gen_bool(0.5)).collect();

    let logical = block_units(&cb);
    let flags: Vec<Label> = if cb.has_block_flag() {
        vec![Label::new(LABEL_FLAG)]
    } else {
        vec![]
    };
    let relabel_state = |sym: CodingSymbol, k: usize| -> Result<StateVector, EngineError> {
        let mut st = cb.encode_symbol(sym)?;
        for l in cb.a_unit().iter().chain(&cb.b_unit()) {
            st = st.relabel(l, tag(l, k))?;
        }
        Ok(st)
    };
    let mut registers = Vec::with_capacity(cfg.n);
    let mut parcels = Vec::with_capacity(cfg.n);
    for (block, &swap) in s.iter().enumerate() {
        let mut reg = relabel_state(prepared[2 * block], 1)?
            .tensor(&relabel_state(prepared[2 * block + 1], 2)?)?;
        if let Some(f) = flags.first() {
            reg = reg.tensor(&StateVector::basis_state([f.clone()], "0")?)?;
        }
        let (reg, units) = rearrange_block(&reg, &logical, &flags, swap)?;
        registers.push(reg);
        parcels.push(Parcel {
            slot: block,
            units,
            flags: flags.clone(),
        });
    }

    session.transmit(1, &mut registers, &parcels, adv, None, rng)?;
    session.publish(MessageKind::Receipt, 1);
    session.publish(MessageKind::OrderString, s.len());

    let states = [
        (logical[0].clone(), logical[1].clone()),
        (logical[2].clone(), logical[3].clone()),
    ];
    let mut outcomes = Vec::with_capacity(positions);
    for (block, &swap) in s.iter().enumerate() {
        let reg = restore_block(&registers[block], &logical, swap)?;
        outcomes.extend(session.receive(&reg, &states, &flags, rng)?);
        registers[block] = reg;
    }
    session.finish(
        prepared,
        outcomes,
        ErrorTally::default(),
        vec![],
        None,
        Some(s),
        &mut registers,
        adv,
        rng,
    )
}

/// Labels of the `(A, B)` data pair of a plain codebook, for tests and tools.
pub fn data_pair() -> [Label; 2] {
    [Label::new(LABEL_A), Label::new(LABEL_B)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::basis_s;

    fn no_attack() -> AttackStrategy {
        AttackStrategy::new(AttackKind::NoAttack)
    }

    #[test]
    fn small_noiseless_runs_are_error_free() {
        for protocol in [Protocol::One, Protocol::Two] {
            let cfg = ProtocolConfig::new(protocol, 4).with_seed(3);
            let (rep, tr) = run(&cfg, &mut no_attack()).unwrap();
            assert_eq!(rep.checking.errors, 0);
            assert_eq!(rep.decoy.errors, 0);
            assert_eq!(rep.key_bits.len(), 8);
            assert_eq!(rep.key_bits, rep.alice_key_bits);
            assert_eq!(tr.checking_set.len(), 4);
        }
    }

    #[test]
    fn r_string_has_quarter_decoys() {
        let cfg = ProtocolConfig::new(Protocol::One, 10).with_seed(1);
        let (_, tr) = run(&cfg, &mut no_attack()).unwrap();
        let r = tr.r_string.unwrap();
        assert_eq!(r.len(), 25);
        assert_eq!(r.iter().filter(|&&b| b).count(), 5);
    }

    #[test]
    fn checking_procedure_ratios() {
        let a: Vec<CodingSymbol> = (0..100).map(|i| CodingSymbol::two_bit(i as u8)).collect();
        let same: Vec<_> = a.iter().map(|&s| Some(s)).collect();
        let all: Vec<usize> = (0..100).collect();
        assert_eq!(checking_procedure(&a, &same, &all).unwrap().0, 0.0);
        let flipped: Vec<_> = a
            .iter()
            .map(|s| Some(CodingSymbol::two_bit(s.value() ^ 1)))
            .collect();
        assert_eq!(checking_procedure(&a, &flipped, &all).unwrap().0, 1.0);
        let mut quarter = same.clone();
        for q in quarter.iter_mut().take(25) {
            *q = None;
        }
        assert_eq!(checking_procedure(&a, &quarter, &all).unwrap().0, 0.25);
        assert_eq!(
            checking_procedure(&a, &same, &[]),
            Err(EngineError::EmptyCheckingSet)
        );
    }

    #[test]
    fn sift_examples() {
        let syms = [CodingSymbol::two_bit(0b00), CodingSymbol::two_bit(0b11)];
        assert_eq!(sift_key(&syms, &BTreeSet::new(), 2), "0011");
        assert_eq!(sift_key(&syms, &[0, 1].into_iter().collect(), 2), "");
    }

    #[test]
    fn rearrangement_round_trip_preserves_distribution() {
        let cb = Codebook::plain(Protocol::Two);
        let logical = block_units(&cb);
        let a = cb.encode_symbol(CodingSymbol::two_bit(0b01)).unwrap();
        let b = cb.encode_symbol(CodingSymbol::two_bit(0b10)).unwrap();
        let retag = |s: StateVector, k| {
            s.relabel(&Label::new("A"), tag(&Label::new("A"), k))
                .unwrap()
                .relabel(&Label::new("B"), tag(&Label::new("B"), k))
                .unwrap()
        };
        let block = retag(a, 1).tensor(&retag(b, 2)).unwrap();
        for swap in [false, true] {
            let (sent, units) = rearrange_block(&block, &logical, &[], swap).unwrap();
            assert_eq!(units.len(), 4);
            let back = restore_block(&sent, &logical, swap).unwrap();
            for pair in [["A1", "B1"], ["A2", "B2"]] {
                let t = crate::qstate::labels(pair);
                assert_eq!(
                    back.outcome_distribution(&basis_s(), &t).unwrap(),
                    block.outcome_distribution(&basis_s(), &t).unwrap()
                );
            }
        }
    }

    #[test]
    fn swapped_block_orders_particles() {
        let cb = Codebook::plain(Protocol::Two);
        let logical = block_units(&cb);
        let block = StateVector::basis_state(["A1", "B1", "A2", "B2"], "0011").unwrap();
        let (sent, _) = rearrange_block(&block, &logical, &[], true).unwrap();
        let expect = StateVector::basis_state(["p1", "p2", "p3", "p4"], "0101").unwrap();
        assert!(sent.equal_up_to_phase(&expect, 1e-12));
    }

    #[test]
    fn invalid_configs() {
        assert!(ProtocolConfig::new(Protocol::One, 1).validate().is_err());
        let mut c = ProtocolConfig::new(Protocol::Two, 4);
        c.checking_fraction = 1.0;
        assert!(c.validate().is_err());
        let c = ProtocolConfig::new(Protocol::Two, 4).with_threshold(1.5);
        assert!(c.validate().is_err());
        let c = ProtocolConfig::new(Protocol::One, 4);
        assert!(run_protocol_two(&c, &mut no_attack(), &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = ProtocolConfig::new(Protocol::Two, 8)
            .with_seed(99)
            .with_threshold(1.0);
        let a = run_trials(&cfg, AttackKind::PurifyBlockS, 6).unwrap();
        let b = run_trials(&cfg, AttackKind::PurifyBlockS, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].alice_key_bits, a[1].alice_key_bits);
    }
}
