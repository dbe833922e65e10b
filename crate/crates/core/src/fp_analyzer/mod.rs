//! False-positive analysis: verdicts, closed-form parameter regions in which an
//! auditor passes a violated claim, and curator-attack construction.
//!
//! Region constraints carry the labels used throughout the analysis: `P*` for
//! prerequisites under which the auditor cannot see the optimal witness, `R1`
//! for "the claim is violated" (eps_c < eps*), `R2` for "the audit passes"
//! (xi* <= eps_c), and `R3`/`R4` for their false-negative counterparts.

mod attack;
mod region;
mod theorems;
mod verdict;

pub use attack::{
    construct_attack, construct_attack_with_margin, regions_for, AttackManifest, Construction,
    ATTACK_RAPPOR_H, ATTACK_RAPPOR_K,
};
pub use region::{
    write_regions_csv, Constraint, Domain, Interval, ParamRegion, Relation, DEFAULT_MARGIN,
    REGION_CSV_HEADER,
};
pub use theorems::*;
pub use verdict::{classify, AuditVerdict, Verdict};
