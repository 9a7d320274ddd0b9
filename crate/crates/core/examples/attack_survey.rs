//! Pooled checking and decoy error rates of every built-in attack at N=1000.

use orthoqkd::analysis::aggregate;
use orthoqkd::{run_trials, AttackKind, Protocol, ProtocolConfig};

fn main() {
    let attacks = [
        "none",
        "purify-single:computational",
        "purify-single:plusminus",
        "purify-single:plusminus:one-per-state",
        "purify-block",
        "substitute:product",
        "substitute:product:best",
        "substitute:entangled",
        "substitute:entangled:best",
        "measure-resend:computational",
        "measure-resend:plusminus",
        "measure-resend:block",
        "two-stage",
    ];
    for p in [Protocol::One, Protocol::Two] {
        for a in attacks {
            let kind: AttackKind = a.parse().unwrap();
            if kind.check(p).is_err() {
                continue;
            }
            let cfg = ProtocolConfig::new(p, 1000)
                .with_seed(1)
                .with_threshold(1.0);
            let reps = run_trials(&cfg, kind, 20).unwrap();
            let s = aggregate(&reps).unwrap();
            println!(
                "protocol {p}  {a:40} checking {:.4} ± {:.4}  decoy {:.4}",
                s.checking.pooled, s.checking.pooled_std_err, s.decoy.pooled
            );
        }
    }
}
