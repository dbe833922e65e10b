use std::path::Path;

use dpaudit::auditors::{
    deltasiege_audit, dpsgd_audit, dpsniper_audit, dpsniper_witness, mpl_audit, DeltaSiegeConfig,
    DpSniperConfig, DpsgdAuditConfig, MplConfig, SurrogateFn,
};
use dpaudit::fp_analyzer::mpl_core_width;
use dpaudit::mechanisms::{
    canonical_pair, AdjacentPair, DensityOracle, DpsgdConfig, MechanismSampler, MechanismSpec,
    SampleBatch,
};

fn sampler(spec: &MechanismSpec) -> MechanismSampler {
    MechanismSampler::new(spec).unwrap()
}

fn sniper(
    spec: &MechanismSpec,
    c: f64,
    budget: usize,
    seed: u64,
) -> dpaudit::estimators::PowerEstimate {
    dpsniper_audit(
        &sampler(spec),
        &canonical_pair(spec),
        &DpSniperConfig::with_budget(c, budget),
        seed,
    )
    .unwrap()
}

fn mpl(
    spec: &MechanismSpec,
    pair: &AdjacentPair,
    samples: usize,
    seed: u64,
) -> dpaudit::estimators::PowerEstimate {
    let cfg = MplConfig {
        samples,
        ..MplConfig::new(1e-4)
    };
    mpl_audit(&sampler(spec), pair, &cfg, seed).unwrap()
}

#[test]
fn auditors_never_touch_the_oracle() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("src/auditors");
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        for banned in [
            "DensityOracle",
            "ground_truth",
            "oracle::",
            "svt_mass",
            "rappor_filter",
        ] {
            assert!(
                !text.contains(banned),
                "{} mentions {banned}",
                path.display()
            );
        }
        checked += 1;
    }
    assert!(checked >= 6);
}

#[test]
fn sniper_is_tight_on_laplace_below_the_knee() {
    let e = sniper(&MechanismSpec::laplace(2.0), 0.01, 4_000_000, 1);
    assert!((e.xi_star - 2.0).abs() <= 0.1, "{e:?}");
}

#[test]
fn sniper_is_floored_on_laplace_above_the_knee() {
    let (theta, c) = (5.0f64, 0.05f64);
    let predicted = (1.0 - (-theta).exp() / (4.0 * c)).ln() - c.ln();
    assert!((predicted - 2.962).abs() < 1e-3);
    let e = sniper(&MechanismSpec::laplace(theta), c, 2_050_000, 2);
    assert!(
        (e.xi_star - predicted).abs() <= 0.1,
        "{} vs {predicted}",
        e.xi_star
    );
}

#[test]
fn sniper_sees_nothing_on_identical_inputs() {
    let spec = MechanismSpec::laplace(1.0);
    let pair = AdjacentPair::identical(vec![0.0]);
    let e = dpsniper_audit(
        &sampler(&spec),
        &pair,
        &DpSniperConfig::with_budget(0.05, 400_000),
        3,
    )
    .unwrap();
    assert!(e.ci_low <= 0.05, "{e:?}");
}

/// Oracle Pr[M(input) in S] for a scalar mechanism and a score-threshold witness.
fn scalar_witness_mass(spec: &MechanismSpec, input: f64, seed: u64, c: f64, n: usize) -> f64 {
    let pair = canonical_pair(spec);
    let cfg = DpSniperConfig::with_budget(c, 2 * n);
    let (model, w) = dpsniper_witness(&sampler(spec), &pair, &cfg, seed).unwrap();
    let o = DensityOracle::new(spec).unwrap();
    let (lo, hi, steps) = (-40.0, 40.0, 400_000);
    let h = (hi - lo) / steps as f64;
    let mut total = o
        .interval_probability(&[input], f64::NEG_INFINITY, lo)
        .unwrap()
        * w.membership(model.score_real(lo))
        + (1.0 - o.cdf(&[input], hi).unwrap()) * w.membership(model.score_real(hi));
    for i in 0..steps {
        let a = lo + i as f64 * h;
        let mid = model.score_real(a + 0.5 * h);
        total += o.interval_probability(&[input], a, a + h).unwrap() * w.membership(mid);
    }
    total
}

#[test]
fn sniper_witness_is_calibrated_to_the_floor() {
    for (theta, c, seed) in [(1.0, 0.05, 4), (3.0, 0.01, 5), (6.0, 0.05, 6)] {
        let spec = MechanismSpec::laplace(theta);
        let n = 200_000;
        let prime = canonical_pair(&spec).q_a_prime[0];
        let p = scalar_witness_mass(&spec, prime, seed, c, n);
        let band = 4.0 * (c * (1.0 - c) / n as f64).sqrt();
        assert!((p - c).abs() <= band, "theta {theta}: {p} vs {c} +- {band}");
    }

    let spec = MechanismSpec::svt(6.0, vec![1.0, 1.0, 1.0], 1);
    let pair = canonical_pair(&spec);
    let (c, n) = (0.05, 200_000);
    let (model, w) = dpsniper_witness(
        &sampler(&spec),
        &pair,
        &DpSniperConfig::with_budget(c, 2 * n),
        7,
    )
    .unwrap();
    let o = DensityOracle::new(&spec).unwrap();
    let outputs = o.svt_outputs().unwrap();
    let scores = model.scores(&SampleBatch::Symbols(outputs.clone()));
    let p: f64 = outputs
        .iter()
        .zip(scores)
        .map(|(s, sc)| o.svt_mass(&pair.q_a_prime, s).unwrap() * w.membership(sc))
        .sum();
    let band = 4.0 * (c * (1.0 - c) / n as f64).sqrt();
    assert!((p - c).abs() <= band, "svt: {p} vs {c} +- {band}");
}

#[test]
fn mpl_is_tight_on_laplace() {
    let spec = MechanismSpec::laplace(1.0);
    let e = mpl(&spec, &canonical_pair(&spec), 3_000_000, 8);
    assert!((e.xi_star - 1.0).abs() <= 0.1, "{e:?}");
}

#[test]
fn mpl_reads_theta_off_the_adapted_laplace() {
    for theta in [0.5, 0.98] {
        let spec = MechanismSpec::adapted_laplace(theta, mpl_core_width(theta, 1e-4, 1.0));
        let e = mpl(&spec, &canonical_pair(&spec), 3_000_000, 9);
        assert!((e.xi_star - theta).abs() <= 0.1, "theta {theta}: {e:?}");
    }
}

#[test]
fn mpl_sees_nothing_on_identical_inputs() {
    let spec = MechanismSpec::laplace(1.0);
    let e = mpl(&spec, &AdjacentPair::identical(vec![0.0]), 1_000_000, 10);
    assert!(e.ci_low <= 0.05, "{e:?}");
}

#[test]
fn siege_with_sensitivity_surrogate_matches_the_floored_laplace_value() {
    let (theta, c) = (5.0f64, 0.05f64);
    let cfg = DeltaSiegeConfig {
        min_probability: c,
        samples: 400_000,
        runs: 1,
        ..DeltaSiegeConfig::new(
            SurrogateFn::SensitivityOverEpsilon { sensitivity: 1.0 },
            1e-9,
        )
    };
    let spec = MechanismSpec::laplace(theta);
    let e = deltasiege_audit(&sampler(&spec), &canonical_pair(&spec), &cfg, 11).unwrap();
    let predicted = (1.0 - (-theta).exp() / (4.0 * c)).ln() - c.ln();
    assert!(
        (e.xi_star - predicted).abs() <= 0.1,
        "{} vs {predicted}",
        e.xi_star
    );
}

#[test]
fn siege_selection_ignores_monotone_reshaping_of_the_surrogate() {
    let spec = MechanismSpec::gaussian(0.8);
    let pair = canonical_pair(&spec);
    let base = DeltaSiegeConfig {
        min_probability: 0.005,
        samples: 20_000,
        runs: 2,
        ..DeltaSiegeConfig::new(SurrogateFn::InverseExpDelta, 0.01)
    };
    for exponent in [0.5, 3.0] {
        let warped = DeltaSiegeConfig {
            surrogate: SurrogateFn::Power {
                base: Box::new(SurrogateFn::InverseExpDelta),
                exponent,
            },
            ..base.clone()
        };
        for seed in 0..3 {
            let a = deltasiege_audit(&sampler(&spec), &pair, &base, seed).unwrap();
            let b = deltasiege_audit(&sampler(&spec), &pair, &warped, seed).unwrap();
            assert_eq!((a.alpha, a.beta), (b.alpha, b.beta));
            assert_eq!(a.witness.threshold, b.witness.threshold);
            assert!(
                (a.xi_star - b.xi_star).abs() < 1e-6,
                "{} vs {}",
                a.xi_star,
                b.xi_star
            );
        }
    }
}

#[test]
fn dpsgd_pure_noise_interval_contains_zero() {
    let spec = MechanismSpec::dpsgd(1e3, DpsgdConfig::default());
    let cfg = DpsgdAuditConfig {
        samples: 10_000,
        ..DpsgdAuditConfig::new(1e-4)
    };
    for seed in 0..5 {
        let e = dpsgd_audit(&sampler(&spec), &canonical_pair(&spec), &cfg, seed).unwrap();
        assert!(e.ci_low <= 0.0 && 0.0 <= e.ci_high, "{e:?}");
    }
}

#[test]
fn dpsgd_at_zero_delta_is_the_best_one_sided_branch() {
    let spec = MechanismSpec::dpsgd(1.0, DpsgdConfig::default());
    let cfg = DpsgdAuditConfig {
        samples: 10_000,
        ..DpsgdAuditConfig::new(0.0)
    };
    let e = dpsgd_audit(&sampler(&spec), &canonical_pair(&spec), &cfg, 12).unwrap();
    let (alpha, beta) = (e.alpha.unwrap(), e.beta.unwrap());
    let one_sided = ((1.0 - beta) / alpha).ln().max(((1.0 - alpha) / beta).ln());
    assert!(
        (e.xi_star - one_sided).abs() < 1e-6,
        "{} vs {one_sided}",
        e.xi_star
    );
}
