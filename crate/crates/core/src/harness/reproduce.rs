//! Data series behind the published experiments, at configurable scale.

use std::io::Write;

use super::report::{ground_truth, kind_name, RunKey};
use crate::auditors::{
    AuditorConfig, DeltaSiegeConfig, DpSniperConfig, DpsgdAuditConfig, MplConfig, SurrogateFn,
};
use crate::error::{Error, Result};
use crate::fp_analyzer::*;
use crate::ground_truth::Epsilon;
use crate::mechanisms::{canonical_pair, DpsgdConfig, MechanismSpec};
use crate::serde_ext::fmt;

/// Every figure id `reproduce` understands.
pub const FIGURES: [&str; 10] = [
    "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "table6", "fig11", "fig12", "fig13",
];

const MPL_TAU: f64 = 1e-4;
const ADAPTED_CLAIMS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
const SIEGE_FLOOR: f64 = 0.005;
const SIEGE_ROW3_CLAIM: f64 = 5.0;
const DPSGD_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 6.0, 8.0];
const DPSGD_MODERATE_C: f64 = 0.02;

/// One audited point of a figure.
#[derive(Clone, Debug)]
pub struct Case {
    pub series: String,
    pub x: f64,
    /// The claim the point is classified against, if the figure has one.
    pub eps_c: Option<f64>,
    pub spec: MechanismSpec,
    pub auditor: AuditorConfig,
    /// Closed-form power, where a formula exists.
    pub predicted_xi: Option<f64>,
}

/// The cases of one figure, ready to run.
#[derive(Clone, Debug)]
pub struct FigurePlan {
    pub id: String,
    /// What the x column holds.
    pub x_label: &'static str,
    pub cases: Vec<Case>,
}

/// One emitted row.
#[derive(Clone, Debug, PartialEq)]
pub struct FigureRow {
    pub figure: String,
    pub series: String,
    pub x: f64,
    pub params: Vec<f64>,
    pub eps_c: Option<f64>,
    pub xi: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted_xi: Option<f64>,
    pub eps_star: Option<Epsilon>,
    pub verdict: Option<Verdict>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureData {
    pub id: String,
    pub x_label: &'static str,
    pub rows: Vec<FigureRow>,
}

pub const FIGURE_CSV_HEADER: [&str; 17] = [
    "figure",
    "series",
    "x_label",
    "x",
    "params",
    "eps_c",
    "xi",
    "ci_low",
    "ci_high",
    "predicted_xi",
    "eps_star",
    "eps_star_kind",
    "verdict",
    "alpha",
    "beta",
    "seed",
    "config_hash",
];

impl FigurePlan {
    /// The plan with the figure's own grid.
    pub fn new(id: &str) -> Result<Self> {
        Self::build(id, None)
    }

    /// The plan with `grid` in place of the figure's x values, in every series.
    pub fn with_grid(id: &str, grid: &[f64]) -> Result<Self> {
        Self::build(id, Some(grid))
    }

    fn build(id: &str, grid: Option<&[f64]>) -> Result<Self> {
        let key = id.trim().to_ascii_lowercase();
        let xs = |default: Vec<f64>| grid.map(<[f64]>::to_vec).unwrap_or(default);
        let half_steps = |lo: f64, hi: f64, step: f64| {
            let n = ((hi - lo) / step).round() as usize;
            (0..=n).map(|i| lo + step * i as f64).collect::<Vec<_>>()
        };
        let (x_label, cases) = match key.as_str() {
            "fig5" => (
                "theta",
                benchmark_curve(
                    &xs(half_steps(0.5, 8.0, 0.5)),
                    MechanismSpec::laplace,
                    laplace_sniper_xi,
                ),
            ),
            "fig7" => (
                "theta",
                benchmark_curve(
                    &xs(half_steps(1.0, 24.0, 1.0)),
                    |t| MechanismSpec::svt(t, vec![1.0], 1),
                    svt_sniper_xi,
                ),
            ),
            "fig6" => (
                "eps_c",
                adapted_laplace_sniper(&xs(ADAPTED_CLAIMS.to_vec()))?,
            ),
            "fig8" => ("eps_c", adapted_laplace_mpl(&xs(ADAPTED_CLAIMS.to_vec()))?),
            "fig9" => ("eps_c", adapted_svt_mpl(&xs(ADAPTED_CLAIMS.to_vec()))?),
            "fig10" => ("eps_c", adapted_svt_sniper(&xs(ADAPTED_CLAIMS.to_vec()))?),
            "table6" => ("theta", siege_table(grid)?),
            "fig11" => (
                "eps_star",
                dpsgd_intervals(&xs(DPSGD_LEVELS.to_vec()), 1000, 1e-4)?,
            ),
            "fig12" => (
                "eps_star",
                dpsgd_intervals(&xs(DPSGD_LEVELS.to_vec()), 10_000, 1e-4)?,
            ),
            "fig13" => (
                "eps_star",
                dpsgd_intervals(&xs(DPSGD_LEVELS.to_vec()), 10_000, 1e-5)?,
            ),
            _ => {
                return Err(Error::Unknown {
                    kind: "figure",
                    name: id.into(),
                })
            }
        };
        Ok(Self {
            id: key,
            x_label,
            cases,
        })
    }

    /// Audits every case under every seed. `scale` multiplies sample budgets.
    pub fn run(&self, scale: f64, seeds: &[u64]) -> Result<FigureData> {
        if !(scale > 0.0) {
            return Err(Error::Config(format!("scale {scale} must be positive")));
        }
        let jobs: Vec<(&Case, u64)> = self
            .cases
            .iter()
            .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
            .collect();
        let job = |(case, seed): (&Case, u64)| self.run_case(case, scale, seed);
        #[cfg(feature = "parallel")]
        let rows: Result<Vec<_>> = {
            use rayon::prelude::*;
            jobs.into_par_iter().map(job).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Result<Vec<_>> = jobs.into_iter().map(job).collect();
        Ok(FigureData {
            id: self.id.clone(),
            x_label: self.x_label,
            rows: rows?,
        })
    }

    fn run_case(&self, case: &Case, scale: f64, seed: u64) -> Result<FigureRow> {
        let auditor = if scale == 1.0 {
            case.auditor.clone()
        } else {
            case.auditor.scaled(scale)
        };
        let key = RunKey {
            pair: canonical_pair(&case.spec),
            spec: case.spec.clone(),
            auditor,
            seed,
        };
        let est = key.run()?;
        let eps_star = ground_truth(&key)?;
        let verdict = match (case.eps_c, eps_star) {
            (Some(c), Some(e)) => Some(classify(c, e, est.ci_low).verdict),
            _ => None,
        };
        Ok(FigureRow {
            figure: self.id.clone(),
            series: case.series.clone(),
            x: case.x,
            params: case.spec.params.clone(),
            eps_c: case.eps_c,
            xi: est.xi_star,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            predicted_xi: case.predicted_xi,
            eps_star,
            verdict,
            alpha: est.alpha,
            beta: est.beta,
            seed,
            config_hash: key.hash(),
        })
    }
}

impl FigureData {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FIGURE_CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.figure.clone(),
                r.series.clone(),
                self.x_label.to_string(),
                fmt(r.x),
                r.params
                    .iter()
                    .map(|p| fmt(*p))
                    .collect::<Vec<_>>()
                    .join(";"),
                opt(r.eps_c),
                fmt(r.xi),
                fmt(r.ci_low),
                fmt(r.ci_high),
                opt(r.predicted_xi),
                opt(r.eps_star.map(|e| e.value)),
                r.eps_star
                    .map(|e| kind_name(e.kind).to_string())
                    .unwrap_or_default(),
                r.verdict.map(|v| v.to_string()).unwrap_or_default(),
                opt(r.alpha),
                opt(r.beta),
                r.seed.to_string(),
                r.config_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a figure at `scale` with `seeds` and writes its CSV.
pub fn reproduce<W: Write>(id: &str, scale: f64, seeds: &[u64], out: W) -> Result<FigureData> {
    let data = FigurePlan::new(id)?.run(scale, seeds)?;
    data.write_csv(out)?;
    Ok(data)
}

fn series_c(c: f64) -> String {
    format!("c={c}")
}

fn benchmark_curve(
    thetas: &[f64],
    spec: impl Fn(f64) -> MechanismSpec,
    xi: fn(f64, f64) -> f64,
) -> Vec<Case> {
    [0.01, 0.05]
        .iter()
        .flat_map(|&c| thetas.iter().map(move |&t| (c, t)))
        .map(|(c, t)| Case {
            series: series_c(c),
            x: t,
            eps_c: None,
            spec: spec(t),
            auditor: AuditorConfig::DpSniper(DpSniperConfig::new(c)),
            predicted_xi: Some(xi(t, c)),
        })
        .collect()
}

fn adapted_laplace_sniper(claims: &[f64]) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for c in [0.01, 0.05] {
        for &e in claims {
            let p = adapted_laplace_sniper_params(c, e, 1.0)?.pick(DEFAULT_MARGIN)?;
            out.push(Case {
                series: series_c(c),
                x: e,
                eps_c: Some(e),
                spec: MechanismSpec::adapted_laplace(p[0], p[1]),
                auditor: AuditorConfig::DpSniper(DpSniperConfig::new(c)),
                predicted_xi: Some(adapted_laplace_sniper_xi(p[0], p[1], c, 1.0)),
            });
        }
    }
    Ok(out)
}

fn adapted_laplace_mpl(claims: &[f64]) -> Result<Vec<Case>> {
    claims
        .iter()
        .map(|&e| {
            let p = adapted_laplace_mpl_params(MPL_TAU, e, 1.0)?.pick(DEFAULT_MARGIN)?;
            Ok(Case {
                series: format!("tau={MPL_TAU}"),
                x: e,
                eps_c: Some(e),
                spec: MechanismSpec::adapted_laplace(p[0], mpl_core_width(p[0], MPL_TAU, 1.0)),
                auditor: AuditorConfig::Mpl(MplConfig::new(MPL_TAU)),
                predicted_xi: Some(p[0]),
            })
        })
        .collect()
}

fn adapted_svt_mpl(claims: &[f64]) -> Result<Vec<Case>> {
    claims
        .iter()
        .map(|&e| {
            let p = adapted_svt_mpl_params(MPL_TAU, e, SVT_THETA2_GAP)?.pick(DEFAULT_MARGIN)?;
            Ok(Case {
                series: format!("tau={MPL_TAU}"),
                x: e,
                eps_c: Some(e),
                spec: MechanismSpec::adapted_svt(p[0], p[1], vec![1.0], 1),
                auditor: AuditorConfig::Mpl(MplConfig::new(MPL_TAU)),
                predicted_xi: Some(adapted_svt_mpl_xi(p[0], p[1], MPL_TAU)),
            })
        })
        .collect()
}

fn adapted_svt_sniper(claims: &[f64]) -> Result<Vec<Case>> {
    let c = 0.01;
    claims
        .iter()
        .map(|&e| {
            let p = adapted_svt_sniper_params(c, e, SVT_THETA2_GAP)?.pick(DEFAULT_MARGIN)?;
            Ok(Case {
                series: series_c(c),
                x: e,
                eps_c: Some(e),
                spec: MechanismSpec::adapted_svt(p[0], p[1], vec![1.0], 1),
                auditor: AuditorConfig::DpSniper(DpSniperConfig::new(c)),
                predicted_xi: Some(adapted_svt_sniper_xi(p[0], p[1], c)),
            })
        })
        .collect()
}

/// The Gaussian rows against Delta-Siege. At delta 0.005 the honest claim
/// eps_c = eps* is audited; at delta 0.05 the claim is 5.
fn siege_table(grid: Option<&[f64]>) -> Result<Vec<Case>> {
    let rows: Vec<(f64, f64)> = match grid {
        None => vec![(0.005, 5.3437), (0.005, 0.79399), (0.05, 0.466165)],
        Some(g) => [0.005, 0.05]
            .iter()
            .flat_map(|&d| g.iter().map(move |&t| (d, t)))
            .collect(),
    };
    let s = SurrogateFn::InverseExpDelta;
    rows.into_iter()
        .map(|(delta, theta)| {
            let claim = if delta < 0.01 {
                gaussian_epsilon(theta, delta, 1.0)
            } else {
                SIEGE_ROW3_CLAIM
            };
            let cfg = DeltaSiegeConfig {
                min_probability: SIEGE_FLOOR,
                ..DeltaSiegeConfig::new(s.clone(), delta)
            };
            Ok(Case {
                series: format!("delta_c={delta}"),
                x: theta,
                eps_c: Some(claim),
                spec: MechanismSpec::gaussian(theta),
                auditor: AuditorConfig::DeltaSiege(cfg),
                predicted_xi: Some(gaussian_siege_xi(theta, SIEGE_FLOOR, delta, &s, 1.0)),
            })
        })
        .collect()
}

/// DPSGD intervals at each target eps*, with unrestricted thresholds (c ~ 0)
/// and with thresholds held to c = 0.02.
fn dpsgd_intervals(levels: &[f64], samples: usize, delta: f64) -> Result<Vec<Case>> {
    let step = DpsgdConfig::default();
    let mut out = Vec::new();
    for c in [0.0, DPSGD_MODERATE_C] {
        for &eps in levels {
            let theta = gaussian_theta_for_epsilon(eps, delta, step.clip)?;
            let cfg = DpsgdAuditConfig {
                min_probability: c,
                samples,
                ..DpsgdAuditConfig::new(delta)
            };
            out.push(Case {
                series: if c == 0.0 { "c~0".into() } else { series_c(c) },
                x: eps,
                eps_c: None,
                spec: MechanismSpec::dpsgd(theta, step.clone()),
                auditor: AuditorConfig::DpsgdAudit(cfg),
                predicted_xi: (c > 0.0).then(|| dpsgd_xi(theta, c, delta, step.clip)),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_figure() {
        assert!(matches!(
            FigurePlan::new("fig99"),
            Err(Error::Unknown { .. })
        ));
    }

    #[test]
    fn empty_grid_gives_header_only() {
        let plan = FigurePlan::with_grid("fig5", &[]).unwrap();
        let mut buf = Vec::new();
        plan.run(1.0, &[1]).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("figure,series,x_label"));
    }

    #[test]
    fn every_figure_builds() {
        for id in FIGURES {
            let plan = FigurePlan::new(id).unwrap();
            assert!(!plan.cases.is_empty(), "{id}");
        }
    }
}
