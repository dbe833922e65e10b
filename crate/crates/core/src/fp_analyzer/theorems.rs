//! Closed-form auditor power and false-positive regions for each
//! (mechanism, auditor) pair.
//!
//! Benchmark SVT is the single-query instance with threshold 1 on the pair
//! a = [1], a' = [0]; adapted SVT uses a = [1], a' = [2]; RAPPOR counts only the
//! 2h bits on which the two Bloom filters differ.

use crate::auditors::SurrogateFn;
use crate::error::{invalid, Result};
use crate::ground_truth::{gaussian_inverse_delta, TradeoffCurve};
use crate::mechanisms::{adapted_svt_mass, Family};
use crate::numeric::{bisect, scan_max};

use super::region::{Constraint, Domain, ParamRegion, Relation};

/// Default gap between the adapted SVT's theta2 and the claim.
pub const SVT_THETA2_GAP: f64 = 0.5;

fn check_floor(c: f64, name: &str) -> Result<()> {
    if !(c > 0.0 && c < 0.5) {
        return Err(invalid(format!("{name} must lie in (0, 1/2), got {c}")));
    }
    Ok(())
}

fn check_claim(eps_c: f64) -> Result<()> {
    if !(eps_c >= 0.0 && eps_c.is_finite()) {
        return Err(invalid(format!(
            "claimed epsilon must be finite and nonnegative, got {eps_c}"
        )));
    }
    Ok(())
}

fn theta_domain() -> Domain {
    Domain {
        lo: 1e-4,
        hi: 200.0,
        open_above: true,
    }
}

// ---------------------------------------------------------------- Laplace

/// DP-Sniper's power against benchmark Laplace: theta while the optimal set
/// carries at least c under a', the floored value afterwards.
pub fn laplace_sniper_xi(theta: f64, c: f64) -> f64 {
    if theta <= -(2.0 * c).ln() {
        theta
    } else {
        (1.0 - (-theta).exp() / (4.0 * c)).ln() - c.ln()
    }
}

/// Benchmark Laplace against DP-Sniper (and against Delta-Siege with smallest
/// probability c). Region over theta.
pub fn laplace_sniper_region(c: f64, eps_c: f64) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    check_claim(eps_c)?;
    let k = 4.0 * c - 4.0 * c * c * eps_c.exp();
    ParamRegion::solve(
        Family::Laplace,
        vec!["theta"],
        vec![0.0],
        0,
        theta_domain(),
        vec![
            Constraint::new("P1", "theta > -ln(2c)", Relation::Less, move |p| {
                -(2.0 * c).ln() - p[0]
            }),
            Constraint::new("R1", "theta > eps_c", Relation::Less, move |p| eps_c - p[0]),
            Constraint::new(
                "R2",
                "theta <= -ln(4c - 4c^2 e^eps_c)",
                Relation::LessEq,
                move |p| {
                    if k > 0.0 {
                        p[0] + k.ln()
                    } else {
                        -1.0
                    }
                },
            ),
        ],
    )
}

/// Mass of adapted Laplace (sensitivity `sens`) on the outputs a' cannot produce.
pub fn adapted_laplace_excess(theta1: f64, theta2: f64, sens: f64) -> f64 {
    let x = theta1 * theta2 / sens;
    if theta1 <= 1.0 {
        0.5 * theta1 * (-x).exp()
    } else {
        0.5 * (-x + theta1 - 1.0).exp()
    }
}

/// Mass under a' of the outputs where both cores overlap below a, the only
/// place the likelihood ratio equals e^theta1.
pub fn adapted_laplace_core_overlap(theta1: f64, theta2: f64, sens: f64) -> f64 {
    (0.5 * ((-theta1).exp() - (-theta1 * theta2 / sens).exp())).max(0.0)
}

/// DP-Sniper's power against adapted Laplace when c is small enough for the
/// ratio-e^theta1 part to fill the rest of the set.
pub fn adapted_laplace_sniper_xi(theta1: f64, theta2: f64, c: f64, sens: f64) -> f64 {
    (adapted_laplace_excess(theta1, theta2, sens) + theta1.exp() * c).ln() - c.ln()
}

/// Adapted Laplace against DP-Sniper: theta1 fixed at eps_c / 2, region over theta2.
pub fn adapted_laplace_sniper_params(c: f64, eps_c: f64, sens: f64) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    check_claim(eps_c)?;
    if eps_c <= 0.0 {
        return Err(invalid("adapted Laplace needs a positive claim"));
    }
    ParamRegion::solve(
        Family::AdaptedLaplace,
        vec!["theta1", "theta2"],
        vec![eps_c / 2.0, 0.0],
        1,
        Domain {
            lo: 1e-6,
            hi: 1e5,
            open_above: true,
        },
        vec![
            Constraint::new(
                "P1",
                "Pr[M(a') lands where the ratio is e^theta1] >= c",
                Relation::LessEq,
                move |p| c - adapted_laplace_core_overlap(p[0], p[1], sens),
            ),
            Constraint::new("R1", "epsilon* is infinite", Relation::Less, |_| -1.0),
            Constraint::new("R2", "theta1 < eps_c", Relation::Less, move |p| {
                p[0] - eps_c
            }),
            Constraint::new(
                "R2",
                "excess mass <= (e^eps_c - e^theta1) c",
                Relation::LessEq,
                move |p| {
                    let room = eps_c.exp() - p[0].exp();
                    if room <= 0.0 {
                        f64::INFINITY
                    } else {
                        adapted_laplace_excess(p[0], p[1], sens).ln() - (room * c).ln()
                    }
                },
            ),
        ],
    )
}

/// Core half-width that makes the adapted Laplace tail density equal to tau.
pub fn mpl_core_width(theta: f64, tau: f64, sens: f64) -> f64 {
    (sens / theta) * (theta / (2.0 * sens * tau)).ln()
}

/// Adapted Laplace against MPL: region over theta (the mechanism uses
/// theta1 = theta and the core width of [`mpl_core_width`]).
pub fn adapted_laplace_mpl_params(tau: f64, eps_c: f64, sens: f64) -> Result<ParamRegion> {
    if !(tau > 0.0) {
        return Err(invalid("density floor tau must be positive"));
    }
    check_claim(eps_c)?;
    ParamRegion::solve(
        Family::AdaptedLaplace,
        vec!["theta"],
        vec![0.0],
        0,
        Domain {
            lo: 1e-8,
            hi: 1e3,
            open_above: true,
        },
        vec![
            Constraint::new(
                "P2",
                "core density reaches tau: theta > 2 sens tau",
                Relation::Less,
                move |p| 2.0 * sens * tau - p[0],
            ),
            Constraint::new("R1", "epsilon* is infinite", Relation::Less, |_| -1.0),
            Constraint::new("R2", "theta <= eps_c", Relation::LessEq, move |p| {
                p[0] - eps_c
            }),
        ],
    )
}

// ---------------------------------------------------------------- SVT

/// Pr[benchmark SVT outputs top on a' = [0]]; a = [1] outputs top with
/// probability 1/2.
pub fn svt_top_mass(theta: f64) -> f64 {
    (2.0 / 3.0) * (-theta / 4.0).exp() - (1.0 / 6.0) * (-theta / 2.0).exp()
}

/// Exact privacy level of benchmark SVT on its canonical pair: the larger of
/// the two atoms' log-ratios.
pub fn svt_epsilon(theta: f64) -> f64 {
    let g = svt_top_mass(theta);
    (0.5 / g).ln().max((2.0 * (1.0 - g)).ln())
}

/// DP-Sniper's power against benchmark SVT on (a, a').
pub fn svt_sniper_xi(theta: f64, c: f64) -> f64 {
    let g = svt_top_mass(theta);
    if g >= c {
        (0.5 / g).ln()
    } else {
        ((1.0 + (c - g) / (1.0 - g)) / (2.0 * c)).ln()
    }
}

/// Benchmark SVT against DP-Sniper. Region over theta.
pub fn svt_sniper_region(c: f64, eps_c: f64) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    check_claim(eps_c)?;
    ParamRegion::solve(
        Family::Svt,
        vec!["theta"],
        vec![0.0],
        0,
        theta_domain(),
        vec![
            Constraint::new("P1", "Pr[M(a') = top] < c", Relation::Less, move |p| {
                svt_top_mass(p[0]) - c
            }),
            Constraint::new("R1", "epsilon*(theta) > eps_c", Relation::Less, move |p| {
                eps_c - svt_epsilon(p[0])
            }),
            Constraint::new("R2", "xi*(theta) <= eps_c", Relation::LessEq, move |p| {
                svt_sniper_xi(p[0], c) - eps_c
            }),
        ],
    )
}

/// Pr[adapted SVT outputs bottom on a' = [2]]; on a = [1] it is e^theta2 times larger.
pub fn adapted_svt_bottom_mass(theta1: f64, theta2: f64) -> f64 {
    0.5 * (-theta2).exp() * adapted_svt_mass(theta1, theta2)
}

/// DP-Sniper's power against adapted SVT when the bottom atom is below c.
pub fn adapted_svt_sniper_xi(theta1: f64, theta2: f64, c: f64) -> f64 {
    let m = adapted_svt_bottom_mass(theta1, theta2);
    let top = theta2.exp() * m;
    if m >= c {
        return theta2;
    }
    let q = (c - m) / (1.0 - m);
    (top + q * (1.0 - top)).ln() - c.ln()
}

/// MPL's power against adapted SVT when the bottom atom is below tau under a'.
pub fn adapted_svt_mpl_xi(theta1: f64, theta2: f64, tau: f64) -> f64 {
    let m = adapted_svt_bottom_mass(theta1, theta2);
    let top = theta2.exp() * m;
    (top.max(tau) / m.max(tau)).ln()
}

/// Adapted SVT against DP-Sniper: theta2 = eps_c + `gap`, region over theta1.
pub fn adapted_svt_sniper_params(c: f64, eps_c: f64, gap: f64) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    check_claim(eps_c)?;
    ParamRegion::solve(
        Family::AdaptedSvt,
        vec!["theta1", "theta2"],
        vec![0.0, eps_c + gap],
        0,
        Domain {
            lo: 1e-6,
            hi: 1e4,
            open_above: true,
        },
        vec![
            Constraint::new("P1", "Pr[M(a') = bottom] < c", Relation::Less, move |p| {
                adapted_svt_bottom_mass(p[0], p[1]).ln() - c.ln()
            }),
            Constraint::new("R1", "theta2 > eps_c", Relation::Less, move |p| {
                eps_c - p[1]
            }),
            Constraint::new(
                "R2",
                "e^theta2 m + q (1 - e^theta2 m) <= e^eps_c c",
                Relation::LessEq,
                move |p| {
                    let m = adapted_svt_bottom_mass(p[0], p[1]);
                    let top = p[1].exp() * m;
                    let q = (c - m) / (1.0 - m);
                    top + q * (1.0 - top) - eps_c.exp() * c
                },
            ),
        ],
    )
}

/// Adapted SVT against MPL: theta2 = eps_c + `gap`, region over theta1.
pub fn adapted_svt_mpl_params(tau: f64, eps_c: f64, gap: f64) -> Result<ParamRegion> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid("density floor tau must lie in (0, 1)"));
    }
    check_claim(eps_c)?;
    ParamRegion::solve(
        Family::AdaptedSvt,
        vec!["theta1", "theta2"],
        vec![0.0, eps_c + gap],
        0,
        Domain {
            lo: 1e-6,
            hi: 1e4,
            open_above: true,
        },
        vec![
            Constraint::new("P1", "Pr[M(a') = bottom] < tau", Relation::Less, move |p| {
                adapted_svt_bottom_mass(p[0], p[1]).ln() - tau.ln()
            }),
            Constraint::new("R1", "theta2 > eps_c", Relation::Less, move |p| {
                eps_c - p[1]
            }),
            Constraint::new(
                "R2",
                "e^theta2 m <= e^eps_c tau",
                Relation::LessEq,
                move |p| p[1] + adapted_svt_bottom_mass(p[0], p[1]).ln() - eps_c - tau.ln(),
            ),
        ],
    )
}

// ---------------------------------------------------------------- RAPPOR

/// Privacy level of one-time RAPPOR with h hashes.
pub fn rappor_epsilon(theta: f64, h: usize) -> f64 {
    2.0 * h as f64 * ((1.0 - 0.5 * theta).ln() - (0.5 * theta).ln())
}

/// (Pr[a in S*], Pr[a' in S*], Pr[a in S'], Pr[a' in S']) for the extreme class
/// S* and the class S' with one differing bit unflipped.
fn rappor_classes(theta: f64, h: usize) -> (f64, f64, f64, f64) {
    let m = 2 * h as i32;
    let (keep, flip) = (1.0 - 0.5 * theta, 0.5 * theta);
    (
        keep.powi(m),
        flip.powi(m),
        m as f64 * keep.powi(m - 1) * flip,
        m as f64 * keep * flip.powi(m - 1),
    )
}

/// DP-Sniper's power against RAPPOR while S* and S' together reach c under a'.
pub fn rappor_sniper_xi(theta: f64, c: f64, h: usize) -> f64 {
    let (pa_star, pb_star, pa_next, pb_next) = rappor_classes(theta, h);
    if pb_star >= c {
        return rappor_epsilon(theta, h);
    }
    let q = (c - pb_star) / pb_next;
    (pa_star + q * pa_next).ln() - c.ln()
}

/// One-time RAPPOR against DP-Sniper. Region over theta in (0, 1].
pub fn rappor_sniper_region(c: f64, eps_c: f64, h: usize) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    check_claim(eps_c)?;
    if h == 0 {
        return Err(invalid("RAPPOR needs at least one hash"));
    }
    let m = 2.0 * h as f64;
    ParamRegion::solve(
        Family::RapporOneTime,
        vec!["theta"],
        vec![0.0],
        0,
        Domain {
            lo: 1e-6,
            hi: 1.0,
            open_above: false,
        },
        vec![
            Constraint::new("P1", "(theta/2)^(2h) < c", Relation::Less, move |p| {
                m * (0.5 * p[0]).ln() - c.ln()
            }),
            Constraint::new(
                "R1",
                "2h (ln(1 - theta/2) - ln(theta/2)) > eps_c",
                Relation::Less,
                move |p| eps_c - rappor_epsilon(p[0], h),
            ),
            Constraint::new(
                "R2",
                "(1 - theta/2)^(2h) + q h theta (1 - theta/2)^(2h-1) <= e^eps_c c",
                Relation::LessEq,
                move |p| {
                    let (pa_star, pb_star, pa_next, pb_next) = rappor_classes(p[0], h);
                    pa_star + (c - pb_star) / pb_next * pa_next - eps_c.exp() * c
                },
            ),
            Constraint::new(
                "side",
                "Pr[M(a') in S* u S'] >= c",
                Relation::LessEq,
                move |p| {
                    let (_, pb_star, _, pb_next) = rappor_classes(p[0], h);
                    c - pb_star - pb_next
                },
            ),
        ],
    )
}

// ---------------------------------------------------------------- Gaussian

/// Gaussian privacy level at delta_c; +inf when beyond the solver's cap.
pub fn gaussian_epsilon(theta: f64, delta_c: f64, sens: f64) -> f64 {
    gaussian_inverse_delta(sens / theta, delta_c).unwrap_or(f64::INFINITY)
}

/// The noise scale at which the Gaussian mechanism is exactly (eps, delta_c)-DP.
pub fn gaussian_theta_for_epsilon(eps: f64, delta_c: f64, sens: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("epsilon must be positive and finite"));
    }
    let f = |u: f64| gaussian_epsilon(sens * u.exp(), delta_c, sens) - eps;
    Ok(sens * bisect(f, -8.0, 8.0, 1e-12)?.exp())
}

/// Delta-Siege's smallest surrogate value over the Gaussian tradeoff curve
/// restricted to alpha >= c, with the alpha that attains it.
pub fn gaussian_rho_star(theta: f64, c: f64, surrogate: &SurrogateFn, sens: f64) -> (f64, f64) {
    let curve = TradeoffCurve::gaussian(sens, theta);
    let lo = c.max(1e-12).ln();
    let hi = (1.0 - 1e-9f64).ln();
    let neg_rho = |u: f64| {
        let a = u.exp();
        surrogate
            .minimize_on_line(a, curve.power(a))
            .map_or(f64::NEG_INFINITY, |(r, _, _)| -r)
    };
    let (u, v) = scan_max(neg_rho, lo, hi, 600, 1e-12);
    (-v, u.exp())
}

/// Delta-Siege's power against the Gaussian mechanism.
pub fn gaussian_siege_xi(
    theta: f64,
    c: f64,
    delta_c: f64,
    surrogate: &SurrogateFn,
    sens: f64,
) -> f64 {
    let (rho, _) = gaussian_rho_star(theta, c, surrogate, sens);
    surrogate.solve_epsilon(rho, delta_c)
}

/// Benchmark Gaussian against Delta-Siege: (false-positive, false-negative)
/// regions over theta.
pub fn gaussian_deltasiege_regions(
    c: f64,
    delta_c: f64,
    eps_c: f64,
    surrogate: &SurrogateFn,
    sens: f64,
) -> Result<(ParamRegion, ParamRegion)> {
    if !(0.0..0.5).contains(&c) {
        return Err(invalid("smallest probability c must lie in [0, 1/2)"));
    }
    if !(delta_c > 0.0 && delta_c < 1.0) {
        return Err(invalid("delta_c must lie in (0, 1)"));
    }
    check_claim(eps_c)?;
    surrogate.validate()?;
    let domain = Domain {
        lo: 0.02,
        hi: 50.0,
        open_above: true,
    };
    let xi = {
        let s = surrogate.clone();
        move |p: &[f64]| gaussian_siege_xi(p[0], c, delta_c, &s, sens)
    };
    let xi2 = xi.clone();
    let fp = ParamRegion::solve(
        Family::Gaussian,
        vec!["theta"],
        vec![0.0],
        0,
        domain,
        vec![
            Constraint::new("R2", "xi*(theta) <= eps_c", Relation::LessEq, move |p| {
                xi(p) - eps_c
            }),
            Constraint::new("R1", "eps_c < epsilon*(theta)", Relation::Less, move |p| {
                eps_c - gaussian_epsilon(p[0], delta_c, sens)
            }),
        ],
    )?;
    let fneg = ParamRegion::solve(
        Family::Gaussian,
        vec!["theta"],
        vec![0.0],
        0,
        domain,
        vec![
            Constraint::new("R4", "xi*(theta) > eps_c", Relation::Less, move |p| {
                eps_c - xi2(p)
            }),
            Constraint::new(
                "R3",
                "eps_c >= epsilon*(theta)",
                Relation::LessEq,
                move |p| gaussian_epsilon(p[0], delta_c, sens) - eps_c,
            ),
        ],
    )?;
    Ok((fp, fneg))
}

/// Power of a blackbox auditor whose smallest achievable probability is c
/// against one Gaussian (DPSGD) step.
pub fn dpsgd_xi(theta: f64, c: f64, delta_c: f64, sens: f64) -> f64 {
    let beta = TradeoffCurve::gaussian(sens, theta).beta_unchecked(c);
    let num = 1.0 - delta_c - beta;
    if num <= 0.0 {
        f64::NEG_INFINITY
    } else {
        num.ln() - c.ln()
    }
}

/// One-step DPSGD against a blackbox auditor with smallest probability c.
/// Region over the noise multiplier theta.
pub fn dpsgd_fp_region(c: f64, delta_c: f64, eps_c: f64, sens: f64) -> Result<ParamRegion> {
    check_floor(c, "probability floor c")?;
    if !(delta_c > 0.0 && delta_c < 1.0) {
        return Err(invalid("delta_c must lie in (0, 1)"));
    }
    check_claim(eps_c)?;
    ParamRegion::solve(
        Family::DpsgdOneStep,
        vec!["theta"],
        vec![0.0],
        0,
        Domain {
            lo: 0.02,
            hi: 50.0,
            open_above: true,
        },
        vec![
            Constraint::new(
                "R2",
                "ln(1 - delta_c - beta(c)) - ln c <= eps_c",
                Relation::LessEq,
                move |p| dpsgd_xi(p[0], c, delta_c, sens) - eps_c,
            ),
            Constraint::new("R1", "eps_c < epsilon*(theta)", Relation::Less, move |p| {
                eps_c - gaussian_epsilon(p[0], delta_c, sens)
            }),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_xi_is_continuous_at_the_knee() {
        let c: f64 = 0.05;
        let knee = -(2.0 * c).ln();
        assert!(
            (laplace_sniper_xi(knee - 1e-9, c) - laplace_sniper_xi(knee + 1e-9, c)).abs() < 1e-6
        );
    }

    #[test]
    fn laplace_region_with_vacuous_upper_bound() {
        let r = laplace_sniper_region(0.05, 3.0).unwrap();
        assert_eq!(r.intervals.len(), 1);
        assert!((r.intervals[0].lo - 3.0).abs() < 1e-6);
        assert_eq!(r.intervals[0].hi, f64::INFINITY);
        assert!(!laplace_sniper_region(0.05, 1.0).unwrap().contains(&[1.5]));
    }

    #[test]
    fn svt_xi_is_continuous_where_top_mass_hits_c() {
        let c = 0.05;
        let t = crate::numeric::bisect(|t| svt_top_mass(t) - c, 0.1, 50.0, 1e-12).unwrap();
        assert!((svt_sniper_xi(t - 1e-7, c) - svt_sniper_xi(t + 1e-7, c)).abs() < 1e-5);
    }

    #[test]
    fn adapted_svt_small_claim_has_a_solution() {
        let r = adapted_svt_sniper_params(0.01, 0.1, SVT_THETA2_GAP).unwrap();
        let p = r.pick(0.02).unwrap();
        assert!(adapted_svt_bottom_mass(p[0], p[1]) < 0.01);
        assert!(adapted_svt_sniper_xi(p[0], p[1], 0.01) <= 0.1);
    }
}
