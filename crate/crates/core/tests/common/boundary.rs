//! Brute-force boundary oracle: every condition recomputed from oracle
//! probabilities and ground-truth epsilon, with no sampling.

use dpaudit::auditors::{
    AuditorConfig, DeltaSiegeConfig, DpSniperConfig, DpsgdAuditConfig, MplConfig, SurrogateFn,
};
use dpaudit::fp_analyzer::{mpl_core_width, regions_for, ParamRegion};
use dpaudit::ground_truth::true_epsilon;
use dpaudit::mechanisms::{
    canonical_pair, collision_free_seed, DensityOracle, DpsgdConfig, Family, MechanismSpec,
    OutputSample,
};

/// (Pr under a, Pr under a') for each cell of a partition of the output space.
pub type Cells = Vec<(f64, f64)>;

pub fn scalar_cells(spec: &MechanismSpec, lo: f64, hi: f64, n: usize, breaks: &[f64]) -> Cells {
    let o = DensityOracle::new(spec).unwrap();
    let pair = canonical_pair(spec);
    let mut edges: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    edges.extend(breaks.iter().filter(|b| (lo..=hi).contains(*b)));
    edges.push(f64::NEG_INFINITY);
    edges.push(f64::INFINITY);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    // Right of the centre, mirror the noise so tail cells keep their precision.
    let mass = |q: &[f64], lo: f64, hi: f64| {
        let m = o.location(q).unwrap();
        let f = |v: f64| o.noise_cdf(v).unwrap();
        if lo >= m {
            f(m - lo) - f(m - hi)
        } else {
            f(hi - m) - f(lo - m)
        }
    };
    edges
        .windows(2)
        .map(|w| {
            (
                mass(&pair.q_a, w[0], w[1]),
                mass(&pair.q_a_prime, w[0], w[1]),
            )
        })
        .collect()
}

pub fn discrete_cells(spec: &MechanismSpec, outputs: &[OutputSample]) -> Cells {
    let o = DensityOracle::new(spec).unwrap();
    let pair = canonical_pair(spec);
    outputs
        .iter()
        .map(|x| {
            (
                o.density(&pair.q_a, x).unwrap(),
                o.density(&pair.q_a_prime, x).unwrap(),
            )
        })
        .collect()
}

pub fn svt_cells(spec: &MechanismSpec) -> Cells {
    let o = DensityOracle::new(spec).unwrap();
    let pair = canonical_pair(spec);
    o.svt_outputs()
        .unwrap()
        .iter()
        .map(|s| {
            (
                o.svt_mass(&pair.q_a, s).unwrap(),
                o.svt_mass(&pair.q_a_prime, s).unwrap(),
            )
        })
        .collect()
}

pub fn rappor_spec(theta: f64) -> MechanismSpec {
    MechanismSpec::rappor(theta, 8, 2, collision_free_seed(8, 2, 1.0, 0.0, 0).unwrap())
}

pub fn rappor_cells(theta: f64) -> Cells {
    let outputs: Vec<OutputSample> = (0..1u32 << 8)
        .map(|m| OutputSample::Bits((0..8).map(|j| m >> j & 1 == 1).collect()))
        .collect();
    discrete_cells(&rappor_spec(theta), &outputs)
}

pub fn by_ratio(cells: &Cells) -> Vec<(f64, f64, f64)> {
    let mut v: Vec<(f64, f64, f64)> = cells
        .iter()
        .filter(|(a, b)| *a > 0.0 || *b > 0.0)
        .map(|&(a, b)| (a.ln() - b.ln(), a, b))
        .collect();
    v.sort_by(|x, y| y.0.total_cmp(&x.0));
    v
}

/// Pr_a' of the first `k` distinct likelihood-ratio levels.
pub fn top_levels_mass(cells: &Cells, k: usize) -> f64 {
    let sorted = by_ratio(cells);
    let mut levels = 0;
    let mut last = f64::NAN;
    let mut mass = 0.0;
    for (r, _, b) in sorted {
        if !((r - last).abs() <= 1e-7 * r.abs().max(1.0)) {
            levels += 1;
            last = r;
        }
        if levels > k {
            break;
        }
        mass += b;
    }
    mass
}

/// Largest Pr_a(S) over sets with Pr_a'(S) = c.
pub fn neyman_pearson(cells: &Cells, c: f64) -> f64 {
    let mut room = c;
    let mut got = 0.0;
    for (_, a, b) in by_ratio(cells) {
        if b <= room {
            got += a;
            room -= b;
        } else {
            got += a * room / b;
            break;
        }
    }
    got
}

pub fn floored_sniper_xi(cells: &Cells, c: f64) -> f64 {
    neyman_pearson(cells, c).max(c).ln() - c.ln()
}

pub fn floored_max_ratio(pairs: impl Iterator<Item = (f64, f64)>, tau: f64) -> f64 {
    pairs
        .map(|(a, b)| (a.max(tau).ln() - b.max(tau).ln()).abs())
        .fold(0.0, f64::max)
}

pub fn eps_star(spec: &MechanismSpec, delta: f64) -> f64 {
    true_epsilon(spec, delta).unwrap().value
}

pub fn laplace_cells(theta: f64) -> Cells {
    let w = 60.0 / theta;
    scalar_cells(
        &MechanismSpec::laplace(theta),
        1.0 - w.min(40.0),
        2.0 + w.min(40.0),
        200_000,
        &[1.0, 2.0],
    )
}

pub fn adapted_laplace_cells(theta1: f64, theta2: f64) -> Cells {
    let reach = theta2 + 1.0 / theta1;
    let mut breaks = Vec::new();
    for q in [1.0, 2.0] {
        breaks.extend([q - reach, q - theta2, q, q + theta2, q + reach]);
    }
    let spec = MechanismSpec::adapted_laplace(theta1, theta2);
    scalar_cells(
        &spec,
        1.0 - reach - 0.5,
        2.0 + reach + 0.5,
        200_000,
        &breaks,
    )
}

pub fn adapted_laplace_mpl_xi(theta: f64, tau: f64) -> f64 {
    let spec = MechanismSpec::adapted_laplace(theta, mpl_core_width(theta, tau, 1.0));
    let o = DensityOracle::new(&spec).unwrap();
    let reach = o.noise_reach();
    let (lo, hi, n) = (1.0 - reach - 0.5, 2.0 + reach + 0.5, 400_000);
    let d = |at: f64, x: f64| o.density(&[at], &OutputSample::Real(x)).unwrap();
    floored_max_ratio(
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|x| (d(1.0, x), d(2.0, x))),
        tau,
    )
}

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Delta-Siege's power with rho = 1/(e^eps delta) over lower-tail threshold
/// sets carrying at least c under a'.
pub fn gaussian_siege_xi_oracle(theta: f64, c: f64, delta_c: f64) -> f64 {
    let spec = MechanismSpec::gaussian(theta);
    let o = DensityOracle::new(&spec).unwrap();
    let pair = canonical_pair(&spec);
    let (a, b) = (pair.q_a[0], pair.q_a_prime[0]);
    let rho = |t: f64| {
        let alpha = o.cdf(&[b], t).unwrap();
        let s = o.cdf(&[a], t).unwrap();
        if s >= 2.0 * alpha {
            4.0 * alpha / (s * s)
        } else if s > alpha {
            1.0 / (s - alpha)
        } else {
            f64::INFINITY
        }
    };
    let t_c = bisect(
        |t| o.cdf(&[b], t).unwrap() - c,
        b - 60.0 * theta,
        b + 60.0 * theta,
    );
    let hi = b + 12.0 * theta;
    let n = 4000;
    let step = (hi - t_c) / n as f64;
    let (mut best_t, mut best) = (t_c, rho(t_c));
    for i in 1..=n {
        let t = t_c + step * i as f64;
        let r = rho(t);
        if r < best {
            best = r;
            best_t = t;
        }
    }
    let (mut lo, mut up) = ((best_t - step).max(t_c), best_t + step);
    for _ in 0..100 {
        let (m1, m2) = (lo + (up - lo) / 3.0, up - (up - lo) / 3.0);
        if rho(m1) <= rho(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    let r = best.min(rho(0.5 * (lo + up)));
    -(r * delta_c).ln()
}

pub fn dpsgd_xi_oracle(theta: f64, c: f64, delta_c: f64) -> f64 {
    let spec = MechanismSpec::dpsgd(theta, DpsgdConfig::default());
    let o = DensityOracle::new(&spec).unwrap();
    let pair = canonical_pair(&spec);
    let lb = o.location(&pair.q_a_prime).unwrap();
    let t = bisect(
        |t| 1.0 - o.cdf(&pair.q_a_prime, t).unwrap() - c,
        lb - 60.0 * theta,
        lb + 60.0 * theta,
    );
    let p = 1.0 - o.cdf(&pair.q_a, t).unwrap();
    if p > delta_c {
        (p - delta_c).ln() - c.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// The auditor setting a region was solved for.
#[derive(Clone, Copy)]
pub enum Setting {
    Sniper { c: f64 },
    Mpl { tau: f64 },
    Siege { c: f64, delta: f64 },
    Dpsgd { c: f64, delta: f64 },
}

/// Oracle truth of the condition `label` of solver `solver` at `p`, from
/// oracle probabilities and ground-truth epsilon only.
pub fn oracle_condition(solver: &str, label: &str, p: &[f64], eps_c: f64, s: Setting) -> bool {
    match (solver, s) {
        (
            "laplace/dp_sniper" | "laplace/delta_siege",
            Setting::Sniper { c } | Setting::Siege { c, .. },
        ) => {
            let cells = laplace_cells(p[0]);
            match label {
                "P1" => top_levels_mass(&cells, 1) < c,
                "R1" => eps_c < eps_star(&MechanismSpec::laplace(p[0]), 0.0),
                "R2" => floored_sniper_xi(&cells, c) <= eps_c,
                _ => unreachable!("{label}"),
            }
        }
        ("adapted_laplace/dp_sniper", Setting::Sniper { c }) => match label {
            "P1" => {
                let level: f64 = by_ratio(&adapted_laplace_cells(p[0], p[1]))
                    .iter()
                    .filter(|(r, _, _)| (r - p[0]).abs() < 1e-6)
                    .map(|x| x.2)
                    .sum();
                level >= c
            }
            "R1" => eps_star(&MechanismSpec::adapted_laplace(p[0], p[1]), 0.0).is_infinite(),
            "R2" => floored_sniper_xi(&adapted_laplace_cells(p[0], p[1]), c) <= eps_c,
            _ => unreachable!("{label}"),
        },
        ("adapted_laplace/mpl", Setting::Mpl { tau }) => match label {
            "P2" => {
                let o = DensityOracle::new(&MechanismSpec::laplace(p[0])).unwrap();
                o.density(&[0.0], &OutputSample::Real(0.0)).unwrap() > tau
            }
            "R1" => true,
            "R2" => adapted_laplace_mpl_xi(p[0], tau) <= eps_c,
            _ => unreachable!("{label}"),
        },
        ("svt/dp_sniper", Setting::Sniper { c }) => {
            let spec = MechanismSpec::svt(p[0], vec![1.0], 1);
            let cells = svt_cells(&spec);
            match label {
                "P1" => top_levels_mass(&cells, 1) < c,
                "R1" => eps_c < eps_star(&spec, 0.0),
                "R2" => floored_sniper_xi(&cells, c) <= eps_c,
                _ => unreachable!("{label}"),
            }
        }
        ("adapted_svt/dp_sniper" | "adapted_svt/mpl", _) => {
            let spec = MechanismSpec::adapted_svt(p[0], p[1], vec![1.0], 1);
            let cells = svt_cells(&spec);
            let floor = match s {
                Setting::Sniper { c } => c,
                Setting::Mpl { tau } => tau,
                _ => unreachable!(),
            };
            match (label, s) {
                ("P1", _) => top_levels_mass(&cells, 1) < floor,
                ("R1", _) => eps_c < eps_star(&spec, 0.0),
                ("R2", Setting::Sniper { c }) => floored_sniper_xi(&cells, c) <= eps_c,
                ("R2", Setting::Mpl { tau }) => floored_max_ratio(cells.into_iter(), tau) <= eps_c,
                _ => unreachable!("{label}"),
            }
        }
        ("rappor/dp_sniper", Setting::Sniper { c }) => {
            let cells = rappor_cells(p[0]);
            match label {
                "P1" => top_levels_mass(&cells, 1) < c,
                "R1" => eps_c < eps_star(&rappor_spec(p[0]), 0.0),
                "R2" => floored_sniper_xi(&cells, c) <= eps_c,
                "side" => top_levels_mass(&cells, 2) >= c,
                _ => unreachable!("{label}"),
            }
        }
        (
            "gaussian/delta_siege" | "gaussian/delta_siege/false_negative",
            Setting::Siege { c, delta },
        ) => {
            let star = || eps_star(&MechanismSpec::gaussian(p[0]), delta);
            let xi = || gaussian_siege_xi_oracle(p[0], c, delta);
            match label {
                "R1" => eps_c < star(),
                "R2" => xi() <= eps_c,
                "R3" => eps_c >= star(),
                "R4" => xi() > eps_c,
                _ => unreachable!("{label}"),
            }
        }
        ("dpsgd/dpsgd_audit", Setting::Dpsgd { c, delta }) => match label {
            "R1" => eps_c < eps_star(&MechanismSpec::dpsgd(p[0], DpsgdConfig::default()), delta),
            "R2" => dpsgd_xi_oracle(p[0], c, delta) <= eps_c,
            _ => unreachable!("{label}"),
        },
        _ => panic!("no oracle for {solver}"),
    }
}

pub fn is_precondition(label: &str) -> bool {
    label.starts_with('P') || label == "side"
}

pub struct Case {
    pub family: Family,
    pub eps_c: f64,
    pub auditor: AuditorConfig,
    pub setting: Setting,
}

pub fn cases() -> Vec<Case> {
    let sniper = |family, c: f64, eps_c| Case {
        family,
        eps_c,
        auditor: AuditorConfig::DpSniper(DpSniperConfig::new(c)),
        setting: Setting::Sniper { c },
    };
    let mpl = |family, eps_c| Case {
        family,
        eps_c,
        auditor: AuditorConfig::Mpl(MplConfig::new(1e-4)),
        setting: Setting::Mpl { tau: 1e-4 },
    };
    let siege = |family, c: f64, delta: f64, eps_c| Case {
        family,
        eps_c,
        auditor: AuditorConfig::DeltaSiege(DeltaSiegeConfig {
            min_probability: c,
            ..DeltaSiegeConfig::new(SurrogateFn::InverseExpDelta, delta)
        }),
        setting: Setting::Siege { c, delta },
    };
    let dpsgd = |c: f64, delta: f64, eps_c| Case {
        family: Family::DpsgdOneStep,
        eps_c,
        auditor: AuditorConfig::DpsgdAudit(DpsgdAuditConfig {
            min_probability: c,
            ..DpsgdAuditConfig::new(delta)
        }),
        setting: Setting::Dpsgd { c, delta },
    };
    vec![
        sniper(Family::Laplace, 0.01, 4.0),
        sniper(Family::Laplace, 0.05, 1.0),
        sniper(Family::Laplace, 0.05, 3.0),
        sniper(Family::Svt, 0.01, 0.5),
        sniper(Family::Svt, 0.05, 0.6),
        sniper(Family::Svt, 0.05, 2.5),
        sniper(Family::Svt, 0.01, 0.1),
        sniper(Family::RapporOneTime, 0.05, 1.0),
        sniper(Family::RapporOneTime, 0.01, 2.0),
        mpl(Family::Laplace, 1.0),
        mpl(Family::Svt, 0.5),
        siege(Family::Laplace, 0.01, 1e-6, 4.0),
        siege(Family::Gaussian, 0.005, 0.05, 5.0),
        siege(Family::Gaussian, 0.005, 0.005, 3.0),
        dpsgd(0.02, 1e-5, 2.0),
        dpsgd(0.02, 1e-4, 4.0),
    ]
}

pub fn regime_holds(region: &ParamRegion, p: &[f64]) -> bool {
    region
        .constraints
        .iter()
        .filter(|c| is_precondition(&c.label))
        .all(|c| c.holds(p))
}

/// Checks every closed-form boundary against the oracle, 1e-3 (relative
/// below 1) on either side. Returns the number checked and the mismatches.
pub fn boundary_mismatches() -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for case in cases() {
        for (solver, region) in regions_for(case.family, case.eps_c, &case.auditor).unwrap() {
            for (con, set) in region.constraints.iter().zip(&region.solved) {
                for iv in set {
                    for e in [iv.lo, iv.hi] {
                        if !e.is_finite() {
                            continue;
                        }
                        let tol = 1e-3 * e.abs().min(1.0);
                        let (below, above) = (region.point(e - tol), region.point(e + tol));
                        if con.holds(&below) == con.holds(&above) {
                            continue;
                        }
                        if !is_precondition(&con.label)
                            && !(regime_holds(&region, &below) && regime_holds(&region, &above))
                        {
                            continue;
                        }
                        for p in [&below, &above] {
                            if oracle_condition(&solver, &con.label, p, case.eps_c, case.setting)
                                != con.holds(p)
                            {
                                bad.push(format!(
                                    "{solver} eps_c={} {} at {:?} (boundary {e})",
                                    case.eps_c, con.label, p
                                ));
                            }
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    (checked, bad)
}
