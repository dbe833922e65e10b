use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use statrs::distribution::{Binomial, DiscreteCDF};

use dpaudit::estimators::{
    bayesian_interval, binomial_lower_bound, fit_ratio_model, kde_fit, truncate_density,
    truncate_probability, two_branch_power, BandwidthRule,
};
use dpaudit::mechanisms::{
    pair_for, sample_batch, DensityOracle, MechanismSpec, OutputSample, Pattern, SampleBatch,
};

fn reals(spec: &MechanismSpec, input: f64, seed: u64, n: usize) -> Vec<f64> {
    match sample_batch(spec, &[input], seed, n).unwrap() {
        SampleBatch::Real(v) => v,
        _ => unreachable!(),
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn laplace_ratio_model_tracks_the_true_ratio() {
    let spec = MechanismSpec::laplace(2.0);
    let a = reals(&spec, 0.0, 1, 50_000);
    let b = reals(&spec, 1.0, 2, 50_000);
    let model = fit_ratio_model(&SampleBatch::Real(a), &SampleBatch::Real(b)).unwrap();
    assert!(model.score_real(-1.0) >= model.score_real(0.2));
    assert!(model.score_real(0.2) > model.score_real(0.8));
    assert!(model.score_real(0.8) >= model.score_real(2.0));

    // Held-out draws from both inputs, restricted to where r actually varies.
    let o = DensityOracle::new(&spec).unwrap();
    let mut held = reals(&spec, 0.0, 3, 5_000);
    held.extend(reals(&spec, 1.0, 4, 5_000));
    held.retain(|x| (0.0..=1.0).contains(x));
    let density = |x: f64, at: f64| o.density(&[at], &OutputSample::Real(x)).unwrap();
    let truth: Vec<f64> = held
        .iter()
        .map(|&x| density(x, 0.0) / density(x, 1.0))
        .collect();
    let scores: Vec<f64> = held.iter().map(|&x| model.score_real(x)).collect();
    let rho = spearman(&scores, &truth);
    assert!(rho >= 0.99, "spearman {rho}");
}

#[test]
fn identical_inputs_give_no_signal() {
    let spec = MechanismSpec::gaussian(1.0);
    let a = reals(&spec, 0.0, 5, 20_000);
    let b = reals(&spec, 0.0, 6, 20_000);
    let model = fit_ratio_model(&SampleBatch::Real(a), &SampleBatch::Real(b)).unwrap();
    let test_a = reals(&spec, 0.0, 7, 5_000);
    let test_b = reals(&spec, 0.0, 8, 5_000);
    let correct = test_a
        .iter()
        .filter(|&&x| model.score_real(x) > 0.0)
        .count()
        + test_b
            .iter()
            .filter(|&&x| model.score_real(x) <= 0.0)
            .count();
    let n = 10_000u64;
    let dist = Binomial::new(0.5, n).unwrap();
    let k = correct as u64;
    let p = 2.0 * dist.cdf(k.min(n - k)).min(0.5);
    assert!(p > 0.01, "{correct} of {n} correct, p = {p}");
}

#[test]
fn svt_class_scores_follow_the_oracle_ratio() {
    let spec = MechanismSpec::svt(2.0, vec![1.0; 10], 1);
    let pair = pair_for(&spec, Pattern::XShape).unwrap();
    let n = 1_000_000;
    let a = sample_batch(&spec, &pair.q_a, 11, n).unwrap();
    let b = sample_batch(&spec, &pair.q_a_prime, 12, n).unwrap();
    let model = fit_ratio_model(&a, &b).unwrap();
    let o = DensityOracle::new(&spec).unwrap();
    let outputs = o.svt_outputs().unwrap();
    assert_eq!(outputs.len(), 11);
    let batch = SampleBatch::Symbols(outputs.clone());
    let scores = model.scores(&batch);
    let truth: Vec<f64> = outputs
        .iter()
        .map(|s| (o.svt_mass(&pair.q_a, s).unwrap() / o.svt_mass(&pair.q_a_prime, s).unwrap()).ln())
        .collect();
    let order = |v: &[f64]| {
        let mut i: Vec<usize> = (0..v.len()).collect();
        i.sort_by(|&x, &y| v[x].total_cmp(&v[y]));
        i
    };
    assert_eq!(order(&scores), order(&truth));
}

#[test]
fn kde_examples() {
    let spec = MechanismSpec::laplace(1.0);
    let v = reals(&spec, 0.0, 13, 3_000_000);
    let m = kde_fit(&v, BandwidthRule::NonSmooth).unwrap();
    assert!((m.density(0.0) - 0.5).abs() <= 0.01, "{}", m.density(0.0));

    assert!(kde_fit(&[2.0; 500], BandwidthRule::Silverman).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let u: Vec<f64> = (0..100_000)
        .map(|_| rand::Rng::random::<f64>(&mut rng))
        .collect();
    let m = kde_fit(&u, BandwidthRule::Silverman).unwrap();
    let p = m.density(0.5);
    assert!((0.9..=1.1).contains(&p), "{p}");
}

#[test]
fn kde_integrates_to_one_and_converges() {
    let spec = MechanismSpec::laplace(1.0);
    let mut errors = Vec::new();
    for (i, n) in [50_000usize, 100_000, 200_000].into_iter().enumerate() {
        let v = reals(&spec, 0.0, 20 + i as u64, n);
        let m = kde_fit(&v, BandwidthRule::NonSmooth).unwrap();
        if i == 0 {
            let (lo, hi) = (
                m.support.0 - 8.0 * m.bandwidth,
                m.support.1 + 8.0 * m.bandwidth,
            );
            let total = dpaudit::numeric::integrate(|x| m.density(x), lo, hi, 1e-6);
            assert!((total - 1.0).abs() < 1e-3, "{total}");
            assert!(m.density(lo) >= 0.0);
        }
        errors.push((m.density(0.0) - 0.5).abs());
    }
    assert!(errors[2] <= errors[0], "{errors:?}");
}

#[test]
fn floors() {
    assert_eq!(truncate_density(0.003, 1e-4), 0.003);
    assert_eq!(truncate_density(1e-6, 1e-4), 1e-4);
    assert_eq!(truncate_probability(0.0, 0.01), 0.01);
}

/// Lower Clopper-Pearson bound by bisection on Pr[X >= k | p] = 1 - confidence.
fn cp_lower_by_bisection(k: u64, n: u64, confidence: f64) -> f64 {
    let tail = |p: f64| 1.0 - Binomial::new(p, n).unwrap().cdf(k - 1);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) < 1.0 - confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn clopper_pearson_examples() {
    assert_eq!(binomial_lower_bound(0, 40, 0.95).unwrap(), 0.0);
    assert_abs_diff_eq!(
        binomial_lower_bound(40, 40, 0.95).unwrap(),
        0.05f64.powf(1.0 / 40.0),
        epsilon = 1e-12
    );
    let lb = binomial_lower_bound(50, 100, 0.95).unwrap();
    assert_abs_diff_eq!(lb, cp_lower_by_bisection(50, 100, 0.95), epsilon = 1e-8);
    assert_abs_diff_eq!(lb, 0.41362, epsilon = 1e-5);
    assert_abs_diff_eq!(lb, 0.4128, epsilon = 1e-3);
}

#[test]
fn bayesian_interval_examples() {
    let (lo, _) = bayesian_interval(10_000, 0, 10_000, 0.1, 0.0).unwrap();
    assert!(lo > 8.0, "{lo}");
    let (lo, hi) = bayesian_interval(400, 400, 10_000, 0.03, 0.0).unwrap();
    assert!(lo <= 0.0 && 0.0 <= hi);
}

#[test]
fn bayesian_interval_covers_the_posterior() {
    let (n, delta, sig) = (10_000u64, 1e-4, 0.03);
    let (lo, hi) = bayesian_interval(600, 300, n, sig, delta).unwrap();
    assert!(lo <= 2f64.ln() && 2f64.ln() <= hi, "({lo}, {hi})");

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pa = Beta::new(601.0, (n - 600 + 1) as f64).unwrap();
    let pb = Beta::new(301.0, (n - 300 + 1) as f64).unwrap();
    let mut draws: Vec<f64> = (0..1_000_000)
        .map(|_| two_branch_power(pa.sample(&mut rng), pb.sample(&mut rng), delta))
        .collect();
    draws.sort_by(f64::total_cmp);
    let q = |p: f64| draws[(p * (draws.len() - 1) as f64) as usize];
    let (mlo, mhi) = (q(sig / 2.0), q(1.0 - sig / 2.0));
    assert!(mlo <= 2f64.ln() && 2f64.ln() <= mhi);
    assert!(
        lo <= mlo && mhi <= hi,
        "({lo}, {hi}) vs posterior ({mlo}, {mhi})"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clopper_pearson_covers(p in 0.01f64..0.99, seed in 0u64..1000) {
        let n = 200u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = rand_distr::Binomial::new(n, p).unwrap();
        let covered = (0..1000)
            .filter(|_| binomial_lower_bound(dist.sample(&mut rng), n, 0.95).unwrap() <= p)
            .count();
        // 95% nominal; allow three binomial standard errors of slack.
        prop_assert!(covered >= 950 - 21, "{covered} of 1000");
    }

    #[test]
    fn ratio_model_order_survives_monotone_transforms(seed in 0u64..500, theta in 0.3f64..3.0) {
        let spec = MechanismSpec::laplace(theta);
        let a = reals(&spec, 0.0, seed, 2000);
        let b = reals(&spec, 1.0, seed + 1, 2000);
        let g = |x: f64| x.powi(3) + 2.0 * x;
        let plain = fit_ratio_model(&SampleBatch::Real(a.clone()), &SampleBatch::Real(b.clone())).unwrap();
        let ga: Vec<f64> = a.iter().map(|x| g(*x)).collect();
        let gb: Vec<f64> = b.iter().map(|x| g(*x)).collect();
        let warped = fit_ratio_model(&SampleBatch::Real(ga.clone()), &SampleBatch::Real(gb)).unwrap();
        let s1 = plain.scores(&SampleBatch::Real(a));
        let s2 = warped.scores(&SampleBatch::Real(ga));
        for i in 0..s1.len() {
            for j in [i / 2, (i * 7 + 3) % s1.len()] {
                if (s1[i] - s1[j]).abs() > 1e-9 {
                    prop_assert_eq!(s1[i] < s1[j], s2[i] < s2[j]);
                }
            }
        }
    }
}
