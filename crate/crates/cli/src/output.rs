//! Rendering of batch results and tables as JSON, CSV or plain text.

use std::fmt::Write as _;

use clap::ValueEnum;
use orthoqkd::analysis::{AttackTable, RateRow, Summary};
use orthoqkd::RunReport;
use serde::Serialize;

use crate::settings::Settings;
use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct BatchOut<'a> {
    settings: &'a Settings,
    summary: &'a Summary,
    runs: &'a [RunReport],
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    aborted: bool,
    checking_errors: usize,
    checking_count: usize,
    decoy_errors: usize,
    decoy_count: usize,
    discarded: usize,
    key_bits: u64,
    qubits: u64,
    classical_bits: u64,
    efficiency: f64,
    eve_guessed: Option<usize>,
    eve_correct: Option<usize>,
}

pub fn batch(
    settings: &Settings,
    summary: &Summary,
    runs: &[RunReport],
    format: Format,
) -> Result<String, CliError> {
    match format {
        Format::Json => json(&BatchOut {
            settings,
            summary,
            runs,
        }),
        Format::Csv => {
            let rows: Vec<TrialRow> = runs
                .iter()
                .enumerate()
                .map(|(trial, r)| TrialRow {
                    trial,
                    aborted: r.aborted,
                    checking_errors: r.checking.errors,
                    checking_count: r.checking.count,
                    decoy_errors: r.decoy.errors,
                    decoy_count: r.decoy.count,
                    discarded: r.discarded,
                    key_bits: r.ledger.key_bits,
                    qubits: r.ledger.qubits,
                    classical_bits: r.ledger.classical_bits,
                    efficiency: r.efficiency,
                    eve_guessed: r.eve.map(|e| e.guessed),
                    eve_correct: r.eve.map(|e| e.correct),
                })
                .collect();
            csv_rows(&rows)
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "protocol {} N={} trials={} seed={} attack={} noise={} grouping={}",
                settings.protocol,
                settings.n,
                settings.trials,
                settings.seed,
                settings.attack,
                settings.noise,
                settings.grouping
            );
            for (name, t) in [("checking", &summary.checking), ("decoy", &summary.decoy)] {
                if t.count == 0 {
                    continue;
                }
                let _ = writeln!(
                    s,
                    "{name:<9} error {:.6} ± {:.6} (95%), pooled {}/{} = {:.6}",
                    t.mean, t.half_width_95, t.errors, t.count, t.pooled
                );
            }
            let _ = writeln!(s, "aborted   {}/{}", summary.aborted, summary.runs);
            let _ = writeln!(s, "discarded {}", summary.discarded);
            let _ = writeln!(
                s,
                "totals    {} qubits, {} classical bits, {} key bits, mean efficiency {:.6}",
                summary.total.qubits,
                summary.total.classical_bits,
                summary.total.key_bits,
                summary.mean_efficiency
            );
            Ok(s)
        }
    }
}

#[derive(Serialize)]
struct CaseOut {
    case: String,
    first: f64,
    second: f64,
    oracle: String,
    published: String,
    matches: bool,
}

#[derive(Serialize)]
struct AttackOut {
    rows: Vec<CaseOut>,
    oracle_wrong_guess_average: String,
    oracle_whole_rate: String,
    oracle_both_states_average: String,
    published_wrong_guess_average: String,
    published_whole_rate: String,
    published_case_mean: String,
    published_inline_sum: String,
}

pub fn attack_table(t: &AttackTable, format: Format) -> Result<String, CliError> {
    let rows: Vec<CaseOut> = t
        .rows
        .iter()
        .map(|r| CaseOut {
            case: r.case.clone(),
            first: r.first,
            second: r.second,
            oracle: r.oracle_exact.to_string(),
            published: r.published.to_string(),
            matches: r.matches,
        })
        .collect();
    match format {
        Format::Csv => csv_rows(&rows),
        Format::Json => json(&AttackOut {
            rows,
            oracle_wrong_guess_average: t.wrong_guess_average.to_string(),
            oracle_whole_rate: t.whole_rate.to_string(),
            oracle_both_states_average: t.both_states_average.to_string(),
            published_wrong_guess_average: t.published_wrong_guess_average.to_string(),
            published_whole_rate: t.published_whole_rate.to_string(),
            published_case_mean: t.published_case_mean.to_string(),
            published_inline_sum: format!("{}/160", t.published_inline_sum * 160),
        }),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<10} {:>8} {:>8} {:>7} {:>9}  match",
                "case", "first", "second", "oracle", "published"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:<10} {:>8.6} {:>8.6} {:>7} {:>9}  {}",
                    r.case,
                    r.first,
                    r.second,
                    r.oracle,
                    r.published,
                    if r.matches { "yes" } else { "no" }
                );
            }
            let _ = writeln!(
                s,
                "wrong-guess average: oracle {} ({}/160), published {}, published inline sum {}/160",
                t.wrong_guess_average,
                t.wrong_guess_average * 160,
                t.published_wrong_guess_average,
                t.published_inline_sum * 160
            );
            let _ = writeln!(
                s,
                "whole rate: oracle {}, published {}",
                t.whole_rate, t.published_whole_rate
            );
            Ok(s)
        }
    }
}

#[derive(Serialize)]
struct RateOut {
    name: String,
    qubits_per_key_bit: String,
    classical_bits_per_key_bit: String,
    efficiency: String,
    efficiency_value: f64,
}

pub fn rate_table(rows: &[RateRow], format: Format) -> Result<String, CliError> {
    let out: Vec<RateOut> = rows
        .iter()
        .map(|r| {
            let e = r.efficiency();
            RateOut {
                name: r.name.clone(),
                qubits_per_key_bit: r.qubits.to_string(),
                classical_bits_per_key_bit: r.classical_bits.to_string(),
                efficiency: e.to_string(),
                efficiency_value: *e.numer() as f64 / *e.denom() as f64,
            }
        })
        .collect();
    match format {
        Format::Json => json(&out),
        Format::Csv => csv_rows(&out),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<28} {:>8} {:>8} {:>10}",
                "scheme", "qubits", "bits", "efficiency"
            );
            for r in &out {
                let _ = writeln!(
                    s,
                    "{:<28} {:>8} {:>8} {:>10} ({:.4})",
                    r.name,
                    r.qubits_per_key_bit,
                    r.classical_bits_per_key_bit,
                    r.efficiency,
                    r.efficiency_value
                );
            }
            Ok(s)
        }
    }
}
