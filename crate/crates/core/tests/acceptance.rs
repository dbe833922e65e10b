//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p dpaudit --test acceptance`.

mod common;

use std::process::ExitCode;

use dpaudit::auditors::{AuditorConfig, DpSniperConfig, DpsgdAuditConfig, MplConfig};
use dpaudit::fp_analyzer::{classify, svt_sniper_region, Verdict};
use dpaudit::ground_truth::{optimal_witness, true_epsilon, witness_power};
use dpaudit::harness::{ground_truth, FigurePlan, FigureRow, RunKey};
use dpaudit::mechanisms::{
    canonical_pair, collision_free_seed, sample_batch, DensityOracle, DpsgdConfig, MechanismSpec,
    OutputSample, SampleBatch, Symbol, SymbolString,
};

/// Criteria allowed to fail; see the decisions ledger.
const EXPECTED_FAILURES: [usize; 1] = [5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c_of(row: &FigureRow) -> f64 {
    row.series.trim_start_matches("c=").parse().unwrap()
}

fn run(id: &str, scale: f64, seeds: &[u64]) -> Vec<FigureRow> {
    FigurePlan::new(id).unwrap().run(scale, seeds).unwrap().rows
}

fn laplace_split() -> Outcome {
    let rows = run("fig5", 1.0, &[1]);
    let mut worst = 0.0f64;
    let mut gaps_ok = true;
    for r in &rows {
        let c = c_of(r);
        let target = if r.x <= -(2.0 * c).ln() {
            r.x
        } else {
            gaps_ok &= r.eps_star.unwrap().value - r.xi > 0.0;
            (1.0 - (-r.x).exp() / (4.0 * c)).ln() - c.ln()
        };
        worst = worst.max((r.xi - target).abs());
    }
    outcome(
        worst <= 0.1 && gaps_ok && rows.len() == 32,
        format!("{} points, max |xi - target| = {worst:.3} (tol 0.1), eps* > xi above the knee: {gaps_ok}", rows.len()),
    )
}

fn adapted_laplace_sniper() -> Outcome {
    let rows = run("fig6", 1.0, &[1]);
    let ok = rows
        .iter()
        .filter(|r| r.ci_low <= r.eps_c.unwrap() && r.eps_star.unwrap().is_infinite())
        .count();
    outcome(
        ok == 8 && rows.len() == 8,
        format!("{ok}/{} cells pass with eps* = inf", rows.len()),
    )
}

fn svt_region() -> Outcome {
    let rows = run("fig7", 1.0, &[1]);
    let worst = rows
        .iter()
        .map(|r| (r.xi - r.predicted_xi.unwrap()).abs())
        .fold(0.0f64, f64::max);
    let mut agree = 0;
    for r in &rows {
        let c = c_of(r);
        let claim = if c < 0.02 { 4.0 } else { 2.5 };
        let region = svt_sniper_region(c, claim).unwrap();
        let predicted = region.contains(&region.point(r.x));
        let empirical =
            classify(claim, r.eps_star.unwrap(), r.ci_low).verdict == Verdict::FalsePositive;
        agree += usize::from(predicted == empirical);
    }
    let share = agree as f64 / rows.len() as f64;
    outcome(
        worst <= 0.15 && share >= 0.9,
        format!(
            "max |xi - predicted| = {worst:.3} (tol 0.15), region agrees on {agree}/{} points",
            rows.len()
        ),
    )
}

fn mpl_adapted() -> Outcome {
    let lap = run("fig8", 1.0, &[1]);
    let worst = lap
        .iter()
        .map(|r| (r.xi - r.predicted_xi.unwrap()).abs())
        .fold(0.0f64, f64::max);
    let svt = run("fig9", 1.0, &[1]);
    let passing = svt.iter().filter(|r| r.xi <= r.eps_c.unwrap()).count();
    outcome(
        worst <= 0.1 && passing == svt.len(),
        format!("adapted Laplace max |xi - theta| = {worst:.3} (tol 0.1); adapted SVT {passing}/{} with xi <= eps_c", svt.len()),
    )
}

fn siege_table() -> Outcome {
    const PAPER: [(Verdict, f64, f64); 3] = [
        (Verdict::FalseNegative, 1.56, 0.055),
        (Verdict::FalseNegative, 3.9, 0.0006),
        (Verdict::FalsePositive, 4.7, 0.005),
    ];
    let seeds: Vec<u64> = (0..5).collect();
    let rows = run("table6", 1.0, &seeds);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (verdict, xi, alpha)) in PAPER.iter().enumerate() {
        let mine: Vec<&FigureRow> = rows
            .iter()
            .skip(i * seeds.len())
            .take(seeds.len())
            .collect();
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let m_xi = median(mine.iter().map(|r| r.xi).collect());
        let m_alpha = median(mine.iter().map(|r| r.alpha.unwrap_or(f64::NAN)).collect());
        let hits = mine.iter().filter(|r| r.verdict == Some(*verdict)).count();
        let ok = 2 * hits > seeds.len()
            && (m_xi - xi).abs() <= 0.5
            && (m_alpha / alpha).log10().abs() <= 1.0;
        pass &= ok;
        parts.push(format!(
            "row {}: {hits}/{} {verdict}, xi {m_xi:.2} vs {xi}, alpha {m_alpha:.2e} vs {alpha}",
            i + 1,
            seeds.len()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn dpsgd_window() -> Outcome {
    let plan = FigurePlan::new("fig11").unwrap();
    let case = plan
        .cases
        .iter()
        .find(|c| c.x == 4.0 && c.series == "c=0.02")
        .cloned()
        .unwrap();
    let one = FigurePlan {
        cases: vec![case],
        ..plan
    };
    let seeds: Vec<u64> = (0..20).collect();
    let rows = one.run(1.0, &seeds).unwrap().rows;
    let below = rows.iter().filter(|r| r.ci_high < 4.0).count();
    outcome(
        below * 10 >= rows.len() * 9,
        format!("{below}/{} intervals end below eps* = 4", rows.len()),
    )
}

fn rappor(theta: f64, k: usize) -> MechanismSpec {
    MechanismSpec::rappor(theta, k, 2, collision_free_seed(k, 2, 1.0, 0.0, 0).unwrap())
}

fn soundness() -> Outcome {
    let mut specs = Vec::new();
    for t in [0.5, 1.0, 2.0, 4.0] {
        specs.push(MechanismSpec::laplace(t));
    }
    for t in [0.5, 1.0, 2.0] {
        specs.push(MechanismSpec::gaussian(t));
    }
    for t in [1.0, 4.0, 12.0] {
        specs.push(MechanismSpec::svt(t, vec![1.0], 1));
    }
    for t in [0.2, 0.5, 0.9] {
        specs.push(rappor(t, 8));
    }
    let mut keys = Vec::new();
    for spec in &specs {
        for seed in 0..3 {
            let auditors = [
                AuditorConfig::DpSniper(DpSniperConfig::with_budget(0.01, 200_000)),
                AuditorConfig::Mpl(MplConfig {
                    samples: 20_000,
                    ..MplConfig::new(1e-4)
                }),
            ];
            for auditor in auditors {
                keys.push(RunKey {
                    pair: canonical_pair(spec),
                    spec: spec.clone(),
                    auditor,
                    seed,
                });
            }
        }
    }
    for theta in [0.5, 1.0, 3.0] {
        for spec in [
            MechanismSpec::gaussian(theta),
            MechanismSpec::dpsgd(theta, DpsgdConfig::default()),
        ] {
            for (seed, c) in [(0, 0.0), (1, 0.02), (2, 0.0)] {
                let auditor = AuditorConfig::DpsgdAudit(DpsgdAuditConfig {
                    samples: 10_000,
                    min_probability: c,
                    ..DpsgdAuditConfig::new(1e-4)
                });
                keys.push(RunKey {
                    pair: canonical_pair(&spec),
                    spec: spec.clone(),
                    auditor,
                    seed,
                });
            }
        }
    }
    let mut sound = 0;
    let mut failures = Vec::new();
    for key in &keys {
        let est = key.run().unwrap();
        let star = ground_truth(key).unwrap().unwrap().value;
        if est.ci_low <= star + 0.05 {
            sound += 1;
        } else {
            failures.push(format!("{:?} {:?}", key.spec.family, key.auditor.tool()));
        }
    }
    let share = sound as f64 / keys.len() as f64;
    outcome(
        share >= 0.95,
        format!(
            "{sound}/{} runs with ci_low <= eps* + 0.05 {failures:?}",
            keys.len()
        ),
    )
}

fn within_4_sigma(count: usize, n: usize, p: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (count as f64 / n as f64 - p).abs() <= 4.0 * se + 1e-12
}

fn brute_epsilon(spec: &MechanismSpec, outputs: &[OutputSample]) -> f64 {
    let o = DensityOracle::new(spec).unwrap();
    let pair = canonical_pair(spec);
    outputs
        .iter()
        .map(|x| {
            let pa = o.density(&pair.q_a, x).unwrap();
            let pb = o.density(&pair.q_a_prime, x).unwrap();
            (pa.ln() - pb.ln()).abs()
        })
        .fold(0.0, f64::max)
}

fn bit_vectors(k: usize) -> Vec<OutputSample> {
    (0..1u32 << k)
        .map(|m| OutputSample::Bits((0..k).map(|j| m >> j & 1 == 1).collect()))
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let n = 1_000_000;
    let mut worst = 0.0f64;
    let mut mc_ok = true;
    let mut checked = 0;
    let mut exact = |spec: &MechanismSpec, outputs: &[OutputSample]| {
        let brute = brute_epsilon(spec, outputs);
        let pair = canonical_pair(spec);
        let w = optimal_witness(spec, &pair, 0.0).unwrap();
        let e = true_epsilon(spec, 0.0).unwrap().value;
        let p = witness_power(spec, &pair, &w, 0.0).unwrap();
        worst = worst.max((e - brute).abs()).max((p - brute).abs());
    };
    let svt_outputs: Vec<OutputSample> = [Symbol::Top, Symbol::Bottom]
        .iter()
        .map(|s| OutputSample::Symbols(vec![*s]))
        .collect();
    for theta in [0.1, 0.5, 1.0, 2.0, 4.0, 12.0] {
        exact(&MechanismSpec::svt(theta, vec![1.0], 1), &svt_outputs);
    }
    for k in [4usize, 8, 12] {
        for theta in [0.2, 0.5, 0.9] {
            exact(&rappor(theta, k), &bit_vectors(k));
        }
    }

    let svt = MechanismSpec::svt(1.0, vec![1.0], 1);
    let o = DensityOracle::new(&svt).unwrap();
    for input in [canonical_pair(&svt).q_a, canonical_pair(&svt).q_a_prime] {
        let SampleBatch::Symbols(v) = sample_batch(&svt, &input, 5, n).unwrap() else {
            unreachable!()
        };
        let top = SymbolString::from_symbols(&[Symbol::Top]);
        let p = o.svt_mass(&input, &top).unwrap();
        mc_ok &= within_4_sigma(v.iter().filter(|s| **s == top).count(), n, p);
        checked += 1;
    }
    for k in [4usize, 8, 12] {
        let spec = rappor(0.5, k);
        let o = DensityOracle::new(&spec).unwrap();
        let input = canonical_pair(&spec).q_a;
        let masses: Vec<(Vec<bool>, f64)> = bit_vectors(k)
            .into_iter()
            .map(|x| {
                let p = o.density(&input, &x).unwrap();
                let OutputSample::Bits(b) = x else {
                    unreachable!()
                };
                (b, p)
            })
            .collect();
        let batch = sample_batch(&spec, &input, 6, n).unwrap();
        let mut counts = vec![0usize; k];
        for i in 0..batch.len() {
            let OutputSample::Bits(b) = batch.get(i) else {
                unreachable!()
            };
            for (c, bit) in counts.iter_mut().zip(b) {
                *c += usize::from(bit);
            }
        }
        for (j, &count) in counts.iter().enumerate() {
            let p: f64 = masses.iter().filter(|(b, _)| b[j]).map(|(_, p)| p).sum();
            mc_ok &= within_4_sigma(count, n, p);
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-6 && mc_ok,
        format!("max enumeration gap {worst:.1e} (tol 1e-6); {checked} frequencies within 4 sigma: {mc_ok}"),
    )
}

fn region_boundaries() -> Outcome {
    let (checked, bad) = common::boundary::boundary_mismatches();
    outcome(
        bad.is_empty() && checked >= 25,
        format!(
            "{checked} boundaries checked, {} off by more than 1e-3 {bad:?}",
            bad.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, laplace_split),
        (2, adapted_laplace_sniper),
        (3, svt_region),
        (4, mpl_adapted),
        (5, siege_table),
        (6, dpsgd_window),
        (7, soundness),
        (8, oracle_equivalence),
        (9, region_boundaries),
    ];
    let mut unexpected = Vec::new();
    for (id, check) in criteria {
        let o = check();
        println!(
            "criterion {id}: {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass && !EXPECTED_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
