//! Statistics over run reports, resource ledgers, the efficiency metric
//! `e = c / (q + b)` and the block-purification constant table.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{basis_s, ket00, ket11, pair, phi, phi_prime, Codebook, NoiseMode, Protocol};
use crate::engine::{ProtocolConfig, RunReport};
use crate::noise::{adapt_protocol, decoy_qubits, noisy_modes, qubits_per_key_bit};
use crate::qstate::{labels, Label, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("efficiency undefined: no qubits or classical bits consumed")]
    ZeroDenominator,
    #[error("cannot aggregate an empty report list")]
    Empty,
    #[error("reports mix configurations: {0}")]
    Heterogeneous(String),
}

/// Resources consumed by a run, or per key bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub qubits: u64,
    pub classical_bits: u64,
    pub key_bits: u64,
}

impl ResourceLedger {
    pub fn scaled(&self, k: u64) -> Self {
        ResourceLedger {
            qubits: self.qubits * k,
            classical_bits: self.classical_bits * k,
            key_bits: self.key_bits * k,
        }
    }
}

/// `key_bits / (qubits + classical_bits)` as an exact fraction.
pub fn efficiency_exact(ledger: &ResourceLedger) -> Result<Ratio<u64>, AnalysisError> {
    let d = ledger.qubits + ledger.classical_bits;
    if d == 0 {
        return Err(AnalysisError::ZeroDenominator);
    }
    Ok(Ratio::new(ledger.key_bits, d))
}

pub fn efficiency(ledger: &ResourceLedger) -> Result<f64, AnalysisError> {
    let e = efficiency_exact(ledger)?;
    Ok(*e.numer() as f64 / *e.denom() as f64)
}

/// Consumption per key bit, in exact fractions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateRow {
    pub name: String,
    pub qubits: Ratio<u64>,
    pub classical_bits: Ratio<u64>,
    pub key_bits: Ratio<u64>,
}

impl RateRow {
    fn new(name: &str, qubits: Ratio<u64>, classical_bits: Ratio<u64>) -> Self {
        RateRow {
            name: name.to_string(),
            qubits,
            classical_bits,
            key_bits: Ratio::from_integer(1),
        }
    }

    pub fn efficiency(&self) -> Ratio<u64> {
        self.key_bits / (self.qubits + self.classical_bits)
    }
}

fn r(n: u64, d: u64) -> Ratio<u64> {
    Ratio::new(n, d)
}

/// BB84, modified BB84 and both protocols, per key bit.
pub fn reference_table() -> Vec<RateRow> {
    vec![
        RateRow::new("BB84", r(4, 1), r(11, 1)),
        RateRow::new("modified BB84", r(2, 1), r(5, 1)),
        RateRow::new("protocol 1", r(9, 4), r(13, 4)),
        RateRow::new("protocol 2", r(2, 1), r(5, 2)),
    ]
}

/// Per-key-bit rates of a protocol with the given codebook, ignoring the
/// constant number of single-bit administrative messages.
pub fn protocol_rates(
    protocol: Protocol,
    cb: &Codebook,
    checking: Ratio<u64>,
    decoy_ratio: Ratio<u64>,
) -> RateRow {
    let bits = cb.bits_per_symbol() as u64;
    let key_per_state = (r(1, 1) - checking) * bits;
    let order = match protocol {
        Protocol::One => r(1, 1) + decoy_ratio,
        Protocol::Two => r(1, 2),
    };
    let classical = (order + r(1, 1) + checking * bits) / key_per_state;
    let name = format!("protocol {protocol} / {}", cb.mode().tag());
    RateRow::new(
        &name,
        qubits_per_key_bit(cb, checking, decoy_ratio),
        classical,
    )
}

/// Rate rows for every noise adaptation of both protocols, at the default
/// checking fraction and decoy ratio.
pub fn noise_rate_table() -> Vec<RateRow> {
    let mut rows = Vec::new();
    for protocol in [Protocol::One, Protocol::Two] {
        for m in std::iter::once(NoiseMode::None).chain(noisy_modes()) {
            let cb = adapt_protocol(protocol, m).expect("valid mode").codebook;
            rows.push(protocol_rates(protocol, &cb, r(1, 2), r(1, 4)));
        }
    }
    rows
}

/// Closed-form ledger of one unattacked, loss-free run.
pub fn expected_ledger(cfg: &ProtocolConfig, cb: &Codebook) -> ResourceLedger {
    let positions = cfg.positions() as u64;
    let bits = cb.bits_per_symbol() as u64;
    let checks = (positions as f64 * cfg.checking_fraction).round() as u64;
    let per_state = cb.qubits_per_state() as u64;
    let (qubits, order, admin) = match cfg.protocol {
        Protocol::One => {
            let d = cfg.decoys() as u64;
            (
                positions * per_state + d * decoy_qubits(cb) as u64,
                positions + d,
                3,
            )
        }
        Protocol::Two => {
            let n = cfg.n as u64;
            let flag = if cb.has_block_flag() { n } else { 0 };
            (positions * per_state + flag, n, 2)
        }
    };
    ResourceLedger {
        qubits,
        classical_bits: order + positions + bits * checks + admin,
        key_bits: bits * (positions - checks),
    }
}

/// Mean of per-run rates with its standard error and 95% half-width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub mean: f64,
    pub std_err: f64,
    pub half_width_95: f64,
    /// Total errors over total scored items across runs.
    pub pooled: f64,
    pub pooled_std_err: f64,
    pub errors: usize,
    pub count: usize,
}

const Z95: f64 = 1.959_963_984_540_054;

fn summarize(rates: &[f64], errors: usize, count: usize) -> RateSummary {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = if rates.len() > 1 {
        rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_err = (var / n).sqrt();
    let pooled = if count == 0 {
        0.0
    } else {
        errors as f64 / count as f64
    };
    let pooled_std_err = if count == 0 {
        0.0
    } else {
        (pooled * (1.0 - pooled) / count as f64).sqrt()
    };
    RateSummary {
        mean,
        std_err,
        half_width_95: Z95 * std_err,
        pooled,
        pooled_std_err,
        errors,
        count,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub checking: RateSummary,
    pub decoy: RateSummary,
    pub aborted: usize,
    pub discarded: usize,
    pub mean_efficiency: f64,
    pub total: ResourceLedger,
}

/// Summary statistics over reports of one configuration.
pub fn aggregate(reports: &[RunReport]) -> Result<Summary, AnalysisError> {
    let first = reports.first().ok_or(AnalysisError::Empty)?;
    if let Some(o) = reports
        .iter()
        .find(|x| x.protocol != first.protocol || x.n != first.n)
    {
        return Err(AnalysisError::Heterogeneous(format!(
            "protocol {} n {} vs protocol {} n {}",
            first.protocol, first.n, o.protocol, o.n
        )));
    }
    let tally = |f: fn(&RunReport) -> crate::engine::ErrorTally| {
        let rates: Vec<f64> = reports.iter().map(|x| f(x).rate()).collect();
        let errors = reports.iter().map(|x| f(x).errors).sum();
        let count = reports.iter().map(|x| f(x).count).sum();
        summarize(&rates, errors, count)
    };
    let mut total = ResourceLedger::default();
    for x in reports {
        total.qubits += x.ledger.qubits;
        total.classical_bits += x.ledger.classical_bits;
        total.key_bits += x.ledger.key_bits;
    }
    Ok(Summary {
        runs: reports.len(),
        checking: tally(|x| x.checking),
        decoy: tally(|x| x.decoy),
        aborted: reports.iter().filter(|x| x.aborted).count(),
        discarded: reports.iter().map(|x| x.discarded).sum(),
        mean_efficiency: reports.iter().map(|x| x.efficiency).sum::<f64>() / reports.len() as f64,
        total,
    })
}

/// The coding states as block members, in the order `00, 11, φ, φ′`.
pub const CASE_NAMES: [&str; 4] = ["0", "1", "phi", "phi'"];

/// One two-state block case with Eve's order guess wrong.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub case: String,
    /// Error probability of the first state (particles 1, 2).
    pub first: f64,
    /// Error probability of the second state (particles 3, 4).
    pub second: f64,
    /// The value scored for this case: the first state's error.
    pub oracle: f64,
    pub oracle_exact: Ratio<i64>,
    pub published: Ratio<i64>,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackTable {
    pub rows: Vec<AttackRow>,
    /// Mean of `oracle` over the 16 cases, i.e. the error given a wrong guess.
    pub wrong_guess_average: Ratio<i64>,
    /// Half of the above: the guess is wrong half the time.
    pub whole_rate: Ratio<i64>,
    /// Mean of both states' errors over the 16 cases.
    pub both_states_average: Ratio<i64>,
    pub published_wrong_guess_average: Ratio<i64>,
    pub published_whole_rate: Ratio<i64>,
    /// Mean of the published per-case constants.
    pub published_case_mean: Ratio<i64>,
    /// Value of the published inline sum `(4·7/10 + 4·1/2 + 4·3/4 + 2·1/2 + 2·0)/16`.
    pub published_inline_sum: Ratio<i64>,
}

fn coding_state(k: usize) -> [num_complex::Complex64; 4] {
    [ket00(), ket11(), phi(), phi_prime()][k]
}

/// Published wrong-guess error for block case `(x, y)`.
pub fn published_case_constant(x: usize, y: usize) -> Ratio<i64> {
    let ent = |k: usize| k >= 2;
    match (ent(x), ent(y)) {
        (true, true) => Ratio::new(7, 10),
        (true, false) => Ratio::new(3, 4),
        (false, true) => Ratio::new(1, 2),
        (false, false) if x == y => Ratio::new(0, 1),
        (false, false) => Ratio::new(3, 4),
    }
}

/// The block `|x⟩₁₂|y⟩₃₄` after Eve purifies it in the coding basis on the
/// pairs (1,3) and (2,4), i.e. under the wrong order guess.
pub fn wrong_guess_block(x: usize, y: usize) -> StateVector {
    let block = pair(coding_state(x), "1", "2")
        .tensor(&pair(coding_state(y), "3", "4"))
        .expect("disjoint labels");
    let s = basis_s();
    block
        .purify(&s, &labels(["1", "3"]), &labels(["e1", "e2"]))
        .and_then(|b| b.purify(&s, &labels(["2", "4"]), &labels(["e3", "e4"])))
        .expect("valid purification")
}

/// Probability that measuring `targets` of `state` in the coding basis
/// misses outcome `expected`.
pub fn error_probability(state: &StateVector, targets: &[Label], expected: usize) -> f64 {
    let p = state
        .outcome_distribution(&basis_s(), targets)
        .expect("basis resolves");
    1.0 - p[expected]
}

/// Recovers a small-denominator fraction from an oracle probability.
fn exact(x: f64) -> Ratio<i64> {
    (1..=1000)
        .find_map(|d| {
            let n = (x * d as f64).round();
            ((n - x * d as f64).abs() < 1e-9).then(|| Ratio::new(n as i64, d))
        })
        .or_else(|| Ratio::approximate_float(x))
        .unwrap_or_else(|| Ratio::from_integer(0))
}

/// Wrong-guess error constants of the block purification attack computed
/// from the exact outcome distributions, beside the published values.
#[allow(clippy::needless_range_loop)]
pub fn attack_constant_table() -> AttackTable {
    let mut rows = Vec::with_capacity(16);
    let mut both = Ratio::from_integer(0);
    for x in 0..4 {
        for y in 0..4 {
            let st = wrong_guess_block(x, y);
            let first = error_probability(&st, &labels(["1", "2"]), x);
            let second = error_probability(&st, &labels(["3", "4"]), y);
            let published = published_case_constant(x, y);
            let oracle_exact = exact(first);
            let published_f = *published.numer() as f64 / *published.denom() as f64;
            both += exact(first) + exact(second);
            rows.push(AttackRow {
                case: format!("b_{}{}", CASE_NAMES[x], CASE_NAMES[y]),
                first,
                second,
                oracle: first,
                oracle_exact,
                published,
                matches: (first - published_f).abs() < 1e-9,
            });
        }
    }
    let avg: Ratio<i64> = rows.iter().map(|r| r.oracle_exact).sum::<Ratio<i64>>() / 16;
    let published_case_mean = rows.iter().map(|r| r.published).sum::<Ratio<i64>>() / 16;
    let inline = (Ratio::new(4 * 7, 10)
        + Ratio::new(4, 2)
        + Ratio::new(4 * 3, 4)
        + Ratio::new(2, 2)
        + Ratio::from_integer(0))
        / 16;
    AttackTable {
        rows,
        wrong_guess_average: avg,
        whole_rate: avg / 2,
        both_states_average: both / 32,
        published_wrong_guess_average: Ratio::new(93, 160),
        published_whole_rate: Ratio::new(93, 320),
        published_case_mean,
        published_inline_sum: inline,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ErrorTally;
    use proptest::prelude::*;

    fn report(errors: usize, count: usize) -> RunReport {
        RunReport {
            protocol: Protocol::Two,
            n: 4,
            decoy: ErrorTally::default(),
            checking: ErrorTally { errors, count },
            discarded: 0,
            aborted: false,
            key_bits: String::new(),
            alice_key_bits: String::new(),
            ledger: ResourceLedger::default(),
            efficiency: 0.0,
            eve: None,
        }
    }

    #[test]
    fn efficiency_examples() {
        let n = 1000;
        let e = |q, b| {
            efficiency_exact(&ResourceLedger {
                qubits: q,
                classical_bits: b,
                key_bits: n,
            })
            .unwrap()
        };
        assert_eq!(e(2250, 3250), Ratio::new(2, 11));
        assert_eq!(e(2000, 2500), Ratio::new(2, 9));
        assert_eq!(e(4000, 11000), Ratio::new(1, 15));
        assert_eq!(
            efficiency(&ResourceLedger::default()),
            Err(AnalysisError::ZeroDenominator)
        );
    }

    #[test]
    fn reference_rows() {
        let t = reference_table();
        let e: Vec<_> = t.iter().map(RateRow::efficiency).collect();
        assert_eq!(e, vec![r(1, 15), r(1, 7), r(2, 11), r(2, 9)]);
    }

    #[test]
    fn default_rates_reproduce_reference_rows() {
        for (p, row) in [(Protocol::One, 2), (Protocol::Two, 3)] {
            let got = protocol_rates(p, &Codebook::plain(p), r(1, 2), r(1, 4));
            let want = &reference_table()[row];
            assert_eq!(
                (got.qubits, got.classical_bits),
                (want.qubits, want.classical_bits)
            );
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[report(0, 10), report(0, 10)]).unwrap();
        assert_eq!((s.checking.mean, s.checking.half_width_95), (0.0, 0.0));
        let s = aggregate(&[report(0, 10), report(10, 10)]).unwrap();
        assert_eq!(s.checking.mean, 0.5);
        assert_eq!(aggregate(&[]), Err(AnalysisError::Empty));
        let mut other = report(0, 1);
        other.n = 5;
        assert!(aggregate(&[report(0, 1), other]).is_err());
    }

    #[test]
    fn table_shape_and_known_rows() {
        let t = attack_constant_table();
        assert_eq!(t.rows.len(), 16);
        let row = |name: &str| t.rows.iter().find(|r| r.case == name).unwrap();
        assert_eq!(row("b_00").oracle_exact, Ratio::from_integer(0));
        assert_eq!(row("b_phi0").oracle_exact, Ratio::new(3, 4));
        assert_eq!(row("b_01").oracle_exact, Ratio::new(3, 4));
        assert_eq!(t.published_inline_sum, Ratio::new(88, 160));
        assert_eq!(t.published_case_mean, Ratio::new(93, 160));
    }

    proptest! {
        #[test]
        fn efficiency_is_scale_invariant(q in 1u64..10_000, b in 0u64..10_000, c in 0u64..10_000, k in 1u64..1000) {
            let l = ResourceLedger { qubits: q, classical_bits: b, key_bits: c };
            prop_assert_eq!(efficiency_exact(&l).unwrap(), efficiency_exact(&l.scaled(k)).unwrap());
        }

        #[test]
        fn aggregate_mean_is_weighted_mean_of_parts(
            a in prop::collection::vec((0usize..20, 20usize..40), 1..20),
            b in prop::collection::vec((0usize..20, 20usize..40), 1..20),
        ) {
            let ra: Vec<_> = a.iter().map(|&(e, c)| report(e, c)).collect();
            let rb: Vec<_> = b.iter().map(|&(e, c)| report(e, c)).collect();
            let all: Vec<_> = ra.iter().chain(&rb).cloned().collect();
            let (sa, sb, s) = (aggregate(&ra).unwrap(), aggregate(&rb).unwrap(), aggregate(&all).unwrap());
            let weighted = (sa.checking.mean * ra.len() as f64 + sb.checking.mean * rb.len() as f64) / all.len() as f64;
            prop_assert!((s.checking.mean - weighted).abs() < 1e-12);
            prop_assert_eq!(s.checking.errors, sa.checking.errors + sb.checking.errors);
        }
    }
}
