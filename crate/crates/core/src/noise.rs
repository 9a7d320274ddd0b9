//! Channel models and the receiver-side procedures that undo them.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::{
    ad_kraus, basis_computational, basis_plus_minus, gate_cd, gate_cnot, gate_cr, gate_x, gate_xz,
    gate_z, pauli_kraus, pd_kraus, Codebook, CodebookError, Encoding, NoiseMode, Protocol,
};
use crate::qstate::{KrausSet, Label, QStateError, StateVector, Unitary};

/// Which transmitted qubits share one noise draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// Qubits sent together suffer the same Kraus branch or angle.
    #[default]
    Correlated,
    /// Every qubit draws on its own.
    Independent,
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::Correlated => "correlated",
            Grouping::Independent => "independent",
        })
    }
}

impl FromStr for Grouping {
    type Err = CodebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "correlated" => Ok(Grouping::Correlated),
            "independent" => Ok(Grouping::Independent),
            other => Err(CodebookError::Parse(format!("grouping {other}"))),
        }
    }
}

/// When an unspecified collective angle is redrawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleSchedule {
    /// One angle for the whole run, shared by both transmission stages.
    #[default]
    PerRun,
    /// A fresh angle at every transmission stage.
    PerStage,
}

impl fmt::Display for AngleSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleSchedule::PerRun => "per-run",
            AngleSchedule::PerStage => "per-stage",
        })
    }
}

impl FromStr for AngleSchedule {
    type Err = CodebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "per-run" => Ok(AngleSchedule::PerRun),
            "per-stage" => Ok(AngleSchedule::PerStage),
            other => Err(CodebookError::Parse(format!("angle schedule {other}"))),
        }
    }
}

/// A noise mode together with its grouping rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub mode: NoiseMode,
    pub grouping: Grouping,
    pub schedule: AngleSchedule,
}

impl ChannelModel {
    pub fn new(mode: NoiseMode, grouping: Grouping) -> Result<Self, CodebookError> {
        mode.validate()?;
        Ok(ChannelModel {
            mode,
            grouping,
            schedule: AngleSchedule::PerRun,
        })
    }

    pub fn with_schedule(mut self, schedule: AngleSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn noiseless() -> Self {
        ChannelModel {
            mode: NoiseMode::None,
            grouping: Grouping::Correlated,
            schedule: AngleSchedule::PerRun,
        }
    }

    fn kraus(&self) -> Result<Option<KrausSet>, CodebookError> {
        Ok(match self.mode {
            NoiseMode::PauliZ { p_identity: p } => Some(pauli_kraus([p, 1.0 - p, 0.0, 0.0])?),
            NoiseMode::PauliX { p_identity: p } => Some(pauli_kraus([p, 0.0, 1.0 - p, 0.0])?),
            NoiseMode::PauliZX { p_identity: p } => Some(pauli_kraus([p, 0.0, 0.0, 1.0 - p])?),
            NoiseMode::PauliFull { probs } => Some(pauli_kraus(probs)?),
            NoiseMode::PhaseDamping { p } => Some(pd_kraus(p)?),
            NoiseMode::AmplitudeDamping { p } => Some(ad_kraus(p)?),
            _ => None,
        })
    }

    /// Fixes the per-run parameters. Collective angles left unspecified in
    /// the mode are drawn uniformly from `[0, 2π)`.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RunChannel, CodebookError> {
        let mut ch = RunChannel {
            model: *self,
            kraus: self.kraus()?,
            angle: None,
        };
        ch.draw_angle(rng);
        Ok(ch)
    }
}

/// A channel with its run-level parameters fixed.
#[derive(Clone, Debug)]
pub struct RunChannel {
    model: ChannelModel,
    kraus: Option<KrausSet>,
    angle: Option<f64>,
}

impl RunChannel {
    fn fixed_angle(&self) -> Option<f64> {
        match self.model.mode {
            NoiseMode::CollectiveDephasing { phi } => phi,
            NoiseMode::CollectiveRotation { theta } => theta,
            _ => None,
        }
    }

    fn collective(&self) -> bool {
        matches!(
            self.model.mode,
            NoiseMode::CollectiveDephasing { .. } | NoiseMode::CollectiveRotation { .. }
        )
    }

    fn draw_angle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.collective() {
            self.angle = Some(
                self.fixed_angle()
                    .unwrap_or_else(|| rng.gen_range(0.0..TAU)),
            );
        }
    }

    /// Called by the engine before each transmission stage.
    pub fn begin_stage<R: Rng + ?Sized>(&mut self, stage: u8, rng: &mut R) {
        if stage > 1 && self.model.schedule == AngleSchedule::PerStage {
            self.draw_angle(rng);
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// The collective angle in force, if any.
    pub fn angle(&self) -> Option<f64> {
        self.angle
    }

    fn gate(&self, angle: f64) -> Unitary {
        match self.model.mode {
            NoiseMode::CollectiveDephasing { .. } => gate_cd(angle),
            _ => gate_cr(angle),
        }
    }

    /// Sends the particles `units` and block-level `flags` of `register`
    /// through the channel.
    ///
    /// Collective modes hit every qubit with the run angle (independent
    /// grouping with an unspecified angle draws one per qubit). Pauli modes
    /// draw one branch for the whole parcel; damping modes one branch per
    /// particle. Independent grouping draws per qubit throughout.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        register: &StateVector,
        units: &[Vec<Label>],
        flags: &[Label],
        rng: &mut R,
    ) -> Result<StateVector, QStateError> {
        let all: Vec<Label> = units.iter().flatten().chain(flags).cloned().collect();
        if all.is_empty() {
            return Err(QStateError::EmptyGroup);
        }
        if let Some(angle) = self.angle {
            if self.model.grouping == Grouping::Independent && self.fixed_angle().is_none() {
                let mut s = register.clone();
                for q in &all {
                    let g = self.gate(rng.gen_range(0.0..TAU));
                    s = s.apply_unitary(&g, std::slice::from_ref(q))?;
                }
                return Ok(s);
            }
            return register.apply_each(&self.gate(angle), &all);
        }
        let Some(kraus) = &self.kraus else {
            for q in &all {
                register.position(q)?;
            }
            return Ok(register.clone());
        };
        let groups: Vec<Vec<Label>> = match self.model.grouping {
            Grouping::Independent => all.iter().map(|q| vec![q.clone()]).collect(),
            Grouping::Correlated => match self.model.mode {
                NoiseMode::PhaseDamping { .. } | NoiseMode::AmplitudeDamping { .. } => {
                    let mut g = units.to_vec();
                    g.extend(flags.iter().map(|f| vec![f.clone()]));
                    g
                }
                _ => vec![all],
            },
        };
        let correlated = self.model.grouping == Grouping::Correlated;
        Ok(register.apply_kraus(kraus, &groups, correlated, rng)?.1)
    }
}

/// Bob's detection and correction procedure for one encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionRule {
    Identity,
    /// Read the `|+⟩` flag in `{|+⟩,|−⟩}`; `|−⟩` means apply `Z`.
    PhaseFlag,
    /// Read `(|+⟩, |0⟩)` flags; `(−,0)`→`Z`, `(+,1)`→`X`, `(−,1)`→`XZ`.
    PauliFlags,
    /// Read the block's `|0⟩` flag; `|1⟩` means `X` on every data qubit.
    BlockFlip,
    /// Controlled NOT data→auxiliary, then read the auxiliary; `|0⟩` discards.
    DualRail,
}

impl CorrectionRule {
    pub fn for_codebook(cb: &Codebook) -> Self {
        if cb.has_block_flag() {
            return CorrectionRule::BlockFlip;
        }
        match cb.encoding() {
            Encoding::Plain => CorrectionRule::Identity,
            Encoding::PhaseFlag => CorrectionRule::PhaseFlag,
            Encoding::PauliFlags => CorrectionRule::PauliFlags,
            Encoding::DualRail => CorrectionRule::DualRail,
        }
    }
}

/// Outcome of [`bob_correct`].
#[derive(Clone, Debug)]
pub enum Corrected {
    Kept(StateVector),
    Discard,
}

fn aux(unit: &[Label], k: usize) -> Result<&Label, QStateError> {
    unit.get(k + 1).ok_or_else(|| {
        QStateError::UnknownLabel(Label::new(format!("{}{}", unit[0], "'".repeat(k + 1))))
    })
}

/// Undoes the preparation frame on every received qubit, then runs the
/// rule's auxiliary measurements and corrections. `units` lists particles as
/// data qubit followed by its auxiliaries.
pub fn bob_correct<R: Rng + ?Sized>(
    rule: CorrectionRule,
    frame: Option<&Unitary>,
    register: &StateVector,
    units: &[Vec<Label>],
    flags: &[Label],
    rng: &mut R,
) -> Result<Corrected, QStateError> {
    let mut s = register.clone();
    if let Some(f) = frame {
        let all: Vec<Label> = units.iter().flatten().chain(flags).cloned().collect();
        s = s.apply_each(&f.adjoint(), &all)?;
    }
    if units.iter().any(|u| u.is_empty()) {
        return Err(QStateError::EmptyGroup);
    }
    match rule {
        CorrectionRule::Identity => {}
        CorrectionRule::PhaseFlag => {
            for u in units {
                let (k, next) = s.measure(&basis_plus_minus(), &[aux(u, 0)?.clone()], rng)?;
                s = next;
                if k == 1 {
                    s = s.apply_unitary(&gate_z(), &u[..1])?;
                }
            }
        }
        CorrectionRule::PauliFlags => {
            for u in units {
                let (phase, next) = s.measure(&basis_plus_minus(), &[aux(u, 0)?.clone()], rng)?;
                let (flip, next) =
                    next.measure(&basis_computational(), &[aux(u, 1)?.clone()], rng)?;
                s = next;
                let fix = match (phase, flip) {
                    (1, 0) => Some(gate_z()),
                    (0, 1) => Some(gate_x()),
                    (1, 1) => Some(gate_xz()),
                    _ => None,
                };
                if let Some(g) = fix {
                    s = s.apply_unitary(&g, &u[..1])?;
                }
            }
        }
        CorrectionRule::BlockFlip => {
            let flag = flags.first().ok_or_else(|| {
                QStateError::UnknownLabel(Label::new(crate::codebook::LABEL_FLAG))
            })?;
            let (k, next) = s.measure(&basis_computational(), std::slice::from_ref(flag), rng)?;
            s = next;
            if k == 1 {
                let data: Vec<Label> = units.iter().map(|u| u[0].clone()).collect();
                s = s.apply_each(&gate_x(), &data)?;
            }
        }
        CorrectionRule::DualRail => {
            for u in units {
                let a = aux(u, 0)?.clone();
                s = s.apply_unitary(&gate_cnot(), &[u[0].clone(), a.clone()])?;
                let (k, next) = s.measure(&basis_computational(), &[a], rng)?;
                if k == 0 {
                    return Ok(Corrected::Discard);
                }
                s = next;
            }
        }
    }
    Ok(Corrected::Kept(s))
}

/// Everything a protocol run needs to cope with one noise mode.
#[derive(Clone, Debug)]
pub struct Adaptation {
    pub codebook: Codebook,
    pub rule: CorrectionRule,
    /// Qubits consumed per key bit at the default checking fraction (1/2)
    /// and decoy ratio (1/4).
    pub qubits_per_key_bit: Ratio<u64>,
}

/// Encoded codebook, correction rule and qubit cost for `mode`.
pub fn adapt_protocol(protocol: Protocol, mode: NoiseMode) -> Result<Adaptation, CodebookError> {
    let codebook = Codebook::for_mode(protocol, mode)?;
    let rule = CorrectionRule::for_codebook(&codebook);
    let qubits_per_key_bit = qubits_per_key_bit(&codebook, Ratio::new(1, 2), Ratio::new(1, 4));
    Ok(Adaptation {
        codebook,
        rule,
        qubits_per_key_bit,
    })
}

/// Transmitted qubits per sifted key bit for a codebook, given the checked
/// fraction of coding states and decoys per coding state.
pub fn qubits_per_key_bit(
    cb: &Codebook,
    checking: Ratio<u64>,
    decoy_ratio: Ratio<u64>,
) -> Ratio<u64> {
    let per_state = Ratio::from_integer(cb.qubits_per_state() as u64)
        + decoy_ratio * decoy_qubits(cb) as u64
        + if cb.has_block_flag() {
            Ratio::new(1, 2)
        } else {
            Ratio::from_integer(0)
        };
    let key_per_state = (Ratio::from_integer(1) - checking) * cb.bits_per_symbol() as u64;
    per_state / key_per_state
}

/// Parameter sweep for the kind of `mode`: 16 evenly spaced angles for the
/// collective modes, `p ∈ {0.1, …, 0.9}` for single-parameter modes and eight
/// points of the probability simplex for the full Pauli channel.
pub fn parameter_grid(mode: NoiseMode) -> Vec<NoiseMode> {
    let angles = (0..16).map(|k| TAU * k as f64 / 16.0);
    let ps = (1..=9).map(|k| k as f64 / 10.0);
    match mode {
        NoiseMode::None => vec![NoiseMode::None],
        NoiseMode::CollectiveDephasing { .. } => angles
            .map(|a| NoiseMode::CollectiveDephasing { phi: Some(a) })
            .collect(),
        NoiseMode::CollectiveRotation { .. } => angles
            .map(|a| NoiseMode::CollectiveRotation { theta: Some(a) })
            .collect(),
        NoiseMode::PauliZ { .. } => ps.map(|p| NoiseMode::PauliZ { p_identity: p }).collect(),
        NoiseMode::PauliX { .. } => ps.map(|p| NoiseMode::PauliX { p_identity: p }).collect(),
        NoiseMode::PauliZX { .. } => ps.map(|p| NoiseMode::PauliZX { p_identity: p }).collect(),
        NoiseMode::PhaseDamping { .. } => ps.map(|p| NoiseMode::PhaseDamping { p }).collect(),
        NoiseMode::AmplitudeDamping { .. } => {
            ps.map(|p| NoiseMode::AmplitudeDamping { p }).collect()
        }
        NoiseMode::PauliFull { .. } => [
            [0.25, 0.25, 0.25, 0.25],
            [0.7, 0.1, 0.1, 0.1],
            [0.1, 0.7, 0.1, 0.1],
            [0.1, 0.1, 0.7, 0.1],
            [0.1, 0.1, 0.1, 0.7],
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
            [0.4, 0.3, 0.2, 0.1],
        ]
        .into_iter()
        .map(|probs| NoiseMode::PauliFull { probs })
        .collect(),
    }
}

/// One representative of every noisy mode.
pub fn noisy_modes() -> [NoiseMode; 8] {
    [
        NoiseMode::CollectiveDephasing { phi: None },
        NoiseMode::CollectiveRotation { theta: None },
        NoiseMode::PauliZ { p_identity: 0.5 },
        NoiseMode::PauliX { p_identity: 0.5 },
        NoiseMode::PauliZX { p_identity: 0.5 },
        NoiseMode::PauliFull { probs: [0.25; 4] },
        NoiseMode::PhaseDamping { p: 0.5 },
        NoiseMode::AmplitudeDamping { p: 0.5 },
    ]
}

/// Qubits in one decoy (0 when the protocol uses none).
pub fn decoy_qubits(cb: &Codebook) -> usize {
    cb.decoy().map_or(0, |d| d.units.iter().map(Vec::len).sum())
}
