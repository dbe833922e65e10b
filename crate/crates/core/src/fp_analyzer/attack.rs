use serde::{Deserialize, Serialize};

use crate::auditors::{AuditorConfig, Tool};
use crate::error::{invalid, Error, Result};
use crate::ground_truth::{true_epsilon_for, Epsilon, PrivacyClaim};
use crate::mechanisms::{
    canonical_pair, collision_free_seed, AdjacentPair, DpsgdConfig, Family, MechanismSpec,
};

use super::region::{ParamRegion, DEFAULT_MARGIN};
use super::theorems::*;

/// RAPPOR shape used for constructed attacks: small enough to enumerate.
pub const ATTACK_RAPPOR_K: usize = 8;
pub const ATTACK_RAPPOR_H: usize = 2;

/// Which construction produced the attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// An unmodified mechanism whose parameter sits in the loose audit region.
    Benchmark,
    /// A mechanism with modified noise, used when the benchmark region is empty.
    Adapted,
}

/// A curator attack: a mechanism, the claim it makes, and why it should pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackManifest {
    /// The family the curator started from.
    pub family: Family,
    pub construction: Construction,
    pub spec: MechanismSpec,
    pub pair: AdjacentPair,
    pub claim: PrivacyClaim,
    pub auditor: Tool,
    /// Identifier of the region solver that was used.
    pub solver: String,
    pub margin: f64,
    /// The solved region, as text.
    pub region: String,
    /// The auditor's power predicted in closed form.
    #[serde(with = "crate::serde_ext")]
    pub predicted_xi: f64,
    pub eps_star: Epsilon,
}

/// Builds a mechanism that violates an eps_c claim yet should pass `auditor`:
/// a benchmark mechanism from the loose region when there is one, otherwise an
/// adapted mechanism.
///
/// Fails with `Unsupported` for pairs without a region solver and with
/// `NoSolution` when every applicable region is empty.
pub fn construct_attack(
    family: Family,
    eps_c: f64,
    auditor: &AuditorConfig,
) -> Result<AttackManifest> {
    construct_attack_with_margin(family, eps_c, auditor, DEFAULT_MARGIN)
}

pub fn construct_attack_with_margin(
    family: Family,
    eps_c: f64,
    auditor: &AuditorConfig,
    margin: f64,
) -> Result<AttackManifest> {
    let claim = PrivacyClaim::new(eps_c, auditor.delta_c())?;
    let unsupported = || {
        Error::Unsupported(format!(
            "no attack construction for {family} against {}",
            auditor.tool()
        ))
    };
    let built = match (auditor, family) {
        (AuditorConfig::DpSniper(cfg), Family::Laplace) => first_of(vec![
            Box::new(|| {
                let r = laplace_sniper_region(cfg.c, eps_c)?;
                let p = r.pick(margin)?;
                Ok(built(
                    Construction::Benchmark,
                    MechanismSpec::laplace(p[0]),
                    "laplace/dp_sniper",
                    &r,
                    laplace_sniper_xi(p[0], cfg.c),
                ))
            }),
            Box::new(|| {
                let r = adapted_laplace_sniper_params(cfg.c, eps_c, 1.0)?;
                let p = r.pick(margin)?;
                let xi = adapted_laplace_sniper_xi(p[0], p[1], cfg.c, 1.0);
                Ok(built(
                    Construction::Adapted,
                    MechanismSpec::adapted_laplace(p[0], p[1]),
                    "adapted_laplace/dp_sniper",
                    &r,
                    xi,
                ))
            }),
        ])?,
        (AuditorConfig::DpSniper(cfg), Family::Svt) => first_of(vec![
            Box::new(|| {
                let r = svt_sniper_region(cfg.c, eps_c)?;
                let p = r.pick(margin)?;
                let spec = MechanismSpec::svt(p[0], vec![1.0], 1);
                Ok(built(
                    Construction::Benchmark,
                    spec,
                    "svt/dp_sniper",
                    &r,
                    svt_sniper_xi(p[0], cfg.c),
                ))
            }),
            Box::new(|| {
                let r = adapted_svt_sniper_params(cfg.c, eps_c, SVT_THETA2_GAP)?;
                let p = r.pick(margin)?;
                let spec = MechanismSpec::adapted_svt(p[0], p[1], vec![1.0], 1);
                let xi = adapted_svt_sniper_xi(p[0], p[1], cfg.c);
                Ok(built(
                    Construction::Adapted,
                    spec,
                    "adapted_svt/dp_sniper",
                    &r,
                    xi,
                ))
            }),
        ])?,
        (AuditorConfig::DpSniper(cfg), Family::RapporOneTime) => {
            let r = rappor_sniper_region(cfg.c, eps_c, ATTACK_RAPPOR_H)?;
            let p = r.pick(margin)?;
            let seed = collision_free_seed(ATTACK_RAPPOR_K, ATTACK_RAPPOR_H, 1.0, 0.0, 0)?;
            let spec = MechanismSpec::rappor(p[0], ATTACK_RAPPOR_K, ATTACK_RAPPOR_H, seed);
            built(
                Construction::Benchmark,
                spec,
                "rappor/dp_sniper",
                &r,
                rappor_sniper_xi(p[0], cfg.c, ATTACK_RAPPOR_H),
            )
        }
        (AuditorConfig::Mpl(cfg), Family::Laplace) => {
            let r = adapted_laplace_mpl_params(cfg.tau, eps_c, 1.0)?;
            let p = r.pick(margin)?;
            let spec = MechanismSpec::adapted_laplace(p[0], mpl_core_width(p[0], cfg.tau, 1.0));
            built(Construction::Adapted, spec, "adapted_laplace/mpl", &r, p[0])
        }
        (AuditorConfig::Mpl(cfg), Family::Svt) => {
            let r = adapted_svt_mpl_params(cfg.tau, eps_c, SVT_THETA2_GAP)?;
            let p = r.pick(margin)?;
            let spec = MechanismSpec::adapted_svt(p[0], p[1], vec![1.0], 1);
            built(
                Construction::Adapted,
                spec,
                "adapted_svt/mpl",
                &r,
                adapted_svt_mpl_xi(p[0], p[1], cfg.tau),
            )
        }
        (AuditorConfig::DeltaSiege(cfg), Family::Gaussian) => {
            let (r, _) = gaussian_deltasiege_regions(
                cfg.min_probability,
                cfg.delta_c,
                eps_c,
                &cfg.surrogate,
                1.0,
            )?;
            let p = r.pick(margin)?;
            let xi = gaussian_siege_xi(p[0], cfg.min_probability, cfg.delta_c, &cfg.surrogate, 1.0);
            built(
                Construction::Benchmark,
                MechanismSpec::gaussian(p[0]),
                "gaussian/delta_siege",
                &r,
                xi,
            )
        }
        (AuditorConfig::DeltaSiege(cfg), Family::Laplace) => {
            if !(cfg.min_probability > 0.0) {
                return Err(invalid(
                    "the Laplace construction needs a positive smallest probability",
                ));
            }
            let r = laplace_sniper_region(cfg.min_probability, eps_c)?;
            let p = r.pick(margin)?;
            let xi = laplace_sniper_xi(p[0], cfg.min_probability);
            built(
                Construction::Benchmark,
                MechanismSpec::laplace(p[0]),
                "laplace/delta_siege",
                &r,
                xi,
            )
        }
        (AuditorConfig::DpsgdAudit(cfg), Family::DpsgdOneStep) => {
            if !(cfg.min_probability > 0.0) {
                return Err(invalid(
                    "the DPSGD construction needs a positive smallest probability",
                ));
            }
            let step = DpsgdConfig::default();
            let r = dpsgd_fp_region(cfg.min_probability, cfg.delta_c, eps_c, step.clip)?;
            let p = r.pick(margin)?;
            let xi = dpsgd_xi(p[0], cfg.min_probability, cfg.delta_c, step.clip);
            built(
                Construction::Benchmark,
                MechanismSpec::dpsgd(p[0], step),
                "dpsgd/dpsgd_audit",
                &r,
                xi,
            )
        }
        _ => return Err(unsupported()),
    };
    let pair = canonical_pair(&built.spec);
    let eps_star = true_epsilon_for(&built.spec, &pair, claim.delta)?;
    Ok(AttackManifest {
        family,
        construction: built.construction,
        spec: built.spec,
        pair,
        claim,
        auditor: auditor.tool(),
        solver: built.solver,
        margin,
        region: built.region,
        predicted_xi: built.xi,
        eps_star,
    })
}

/// Every region solver that applies to `family` against `auditor`, labelled
/// like `AttackManifest::solver`. Benchmark regions come before adapted ones;
/// the Gaussian pair also yields its false-negative region.
pub fn regions_for(
    family: Family,
    eps_c: f64,
    auditor: &AuditorConfig,
) -> Result<Vec<(String, ParamRegion)>> {
    let one = |label: &str, r: ParamRegion| vec![(label.to_string(), r)];
    Ok(match (auditor, family) {
        (AuditorConfig::DpSniper(cfg), Family::Laplace) => vec![
            (
                "laplace/dp_sniper".into(),
                laplace_sniper_region(cfg.c, eps_c)?,
            ),
            (
                "adapted_laplace/dp_sniper".into(),
                adapted_laplace_sniper_params(cfg.c, eps_c, 1.0)?,
            ),
        ],
        (AuditorConfig::DpSniper(cfg), Family::Svt) => vec![
            ("svt/dp_sniper".into(), svt_sniper_region(cfg.c, eps_c)?),
            (
                "adapted_svt/dp_sniper".into(),
                adapted_svt_sniper_params(cfg.c, eps_c, SVT_THETA2_GAP)?,
            ),
        ],
        (AuditorConfig::DpSniper(cfg), Family::RapporOneTime) => one(
            "rappor/dp_sniper",
            rappor_sniper_region(cfg.c, eps_c, ATTACK_RAPPOR_H)?,
        ),
        (AuditorConfig::Mpl(cfg), Family::Laplace) => one(
            "adapted_laplace/mpl",
            adapted_laplace_mpl_params(cfg.tau, eps_c, 1.0)?,
        ),
        (AuditorConfig::Mpl(cfg), Family::Svt) => one(
            "adapted_svt/mpl",
            adapted_svt_mpl_params(cfg.tau, eps_c, SVT_THETA2_GAP)?,
        ),
        (AuditorConfig::DeltaSiege(cfg), Family::Gaussian) => {
            let (fp, fneg) = gaussian_deltasiege_regions(
                cfg.min_probability,
                cfg.delta_c,
                eps_c,
                &cfg.surrogate,
                1.0,
            )?;
            vec![
                ("gaussian/delta_siege".into(), fp),
                ("gaussian/delta_siege/false_negative".into(), fneg),
            ]
        }
        (AuditorConfig::DeltaSiege(cfg), Family::Laplace) if cfg.min_probability > 0.0 => one(
            "laplace/delta_siege",
            laplace_sniper_region(cfg.min_probability, eps_c)?,
        ),
        (AuditorConfig::DpsgdAudit(cfg), Family::DpsgdOneStep) if cfg.min_probability > 0.0 => one(
            "dpsgd/dpsgd_audit",
            dpsgd_fp_region(
                cfg.min_probability,
                cfg.delta_c,
                eps_c,
                DpsgdConfig::default().clip,
            )?,
        ),
        _ => {
            return Err(Error::Unsupported(format!(
                "no region solver for {family} against {}",
                auditor.tool()
            )))
        }
    })
}

struct Built {
    construction: Construction,
    spec: MechanismSpec,
    solver: String,
    region: String,
    xi: f64,
}

fn built(
    construction: Construction,
    spec: MechanismSpec,
    solver: &str,
    r: &ParamRegion,
    xi: f64,
) -> Built {
    Built {
        construction,
        spec,
        solver: solver.into(),
        region: r.to_string(),
        xi,
    }
}

type Attempt<'a> = Box<dyn Fn() -> Result<Built> + 'a>;

/// Tries the constructions in order, falling through only on empty regions.
fn first_of(attempts: Vec<Attempt<'_>>) -> Result<Built> {
    let mut last = None;
    for a in attempts {
        match a() {
            Ok(b) => return Ok(b),
            Err(e @ Error::NoSolution(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NoSolution("no construction applies".into())))
}
