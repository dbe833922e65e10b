use crate::error::{invalid, Error, Result};
use crate::numeric::beta_quantile;

fn check(successes: u64, trials: u64, confidence: f64) -> Result<()> {
    if successes > trials {
        return Err(invalid(format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence {confidence} is not in (0, 1)")));
    }
    Ok(())
}

/// One-sided Clopper-Pearson lower bound on a Bernoulli parameter.
pub fn binomial_lower_bound(successes: u64, trials: u64, confidence: f64) -> Result<f64> {
    check(successes, trials, confidence)?;
    if successes == 0 {
        return Ok(0.0);
    }
    if successes == trials {
        return Ok((1.0 - confidence).powf(1.0 / trials as f64));
    }
    Ok(beta_quantile(
        1.0 - confidence,
        successes as f64,
        (trials - successes + 1) as f64,
    ))
}

/// One-sided Clopper-Pearson upper bound on a Bernoulli parameter.
pub fn binomial_upper_bound(successes: u64, trials: u64, confidence: f64) -> Result<f64> {
    check(successes, trials, confidence)?;
    Ok(1.0 - binomial_lower_bound(trials - successes, trials, confidence)?)
}

/// Equal-tailed credible interval of Beta(1 + k, 1 + n - k) with total tail mass `tail`.
pub fn beta_credible(successes: u64, trials: u64, tail: f64) -> (f64, f64) {
    let a = 1.0 + successes as f64;
    let b = 1.0 + (trials - successes) as f64;
    (
        beta_quantile(tail / 2.0, a, b),
        beta_quantile(1.0 - tail / 2.0, a, b),
    )
}

/// max(ln((p - delta)/q), ln((1 - q - delta)/(1 - p))), or -inf when neither is defined.
pub fn two_branch_power(p: f64, q: f64, delta: f64) -> f64 {
    let first = if p > delta && q > 0.0 {
        (p - delta).ln() - q.ln()
    } else if p > delta {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let second = if 1.0 - q > delta && p < 1.0 {
        (1.0 - q - delta).ln() - (1.0 - p).ln()
    } else if 1.0 - q > delta {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    first.max(second)
}

/// Two-sided interval on the power from independent uniform-prior posteriors on
/// Pr[M(a) in S] (`successes_a` of `trials`) and Pr[M(a') in S].
///
/// Each probability gets an equal-tailed credible interval with `significance/2`
/// in each tail; the lower end of the power combines the pessimistic ends, the
/// upper end the optimistic ones.
pub fn bayesian_interval(
    successes_a: u64,
    successes_b: u64,
    trials: u64,
    significance: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(invalid(format!(
            "significance {significance} is not in (0, 1)"
        )));
    }
    if successes_a > trials || successes_b > trials {
        return Err(invalid("more successes than trials"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid("delta must lie in [0, 1)"));
    }
    let (a_lo, a_hi) = beta_credible(successes_a, trials, significance);
    let (b_lo, b_hi) = beta_credible(successes_b, trials, significance);
    let hi = two_branch_power(a_hi, b_lo, delta);
    if hi == f64::NEG_INFINITY {
        return Err(Error::NoSolution(format!(
            "delta {delta} exceeds the posterior mass on both branches"
        )));
    }
    let lo = two_branch_power(a_lo, b_hi, delta);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bounds_at_the_edges() {
        assert_eq!(binomial_lower_bound(0, 20, 0.95).unwrap(), 0.0);
        assert_abs_diff_eq!(
            binomial_lower_bound(20, 20, 0.95).unwrap(),
            0.05f64.powf(0.05),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            binomial_upper_bound(20, 20, 0.95).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(binomial_lower_bound(3, 2, 0.95).is_err());
        assert!(binomial_lower_bound(1, 2, 1.0).is_err());
    }

    #[test]
    fn credible_interval_is_ordered() {
        let (lo, hi) = beta_credible(30, 100, 0.05);
        assert!(lo < 0.3 && 0.3 < hi);
    }
}
