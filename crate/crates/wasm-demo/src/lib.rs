//! Browser bindings for the demo page. Every export returns a JSON string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use dpaudit::auditors::SurrogateFn;
use dpaudit::fp_analyzer::{
    classify, gaussian_deltasiege_regions, gaussian_epsilon, gaussian_siege_xi,
    laplace_sniper_region, laplace_sniper_xi,
};
use dpaudit::ground_truth::{claimed_tradeoff, pseudo_tradeoff, Epsilon, TradeoffCurve};

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// The Laplace tradeoff curve of noise scale `theta`, the curve an eps_c claim
/// allows, and the looser curve a probability floor `c` enforces.
#[wasm_bindgen]
pub fn tradeoff_curves(theta: f64, eps_c: f64, c: f64, points: usize) -> String {
    let curve = TradeoffCurve::Laplace { theta_eff: theta };
    let rows: Vec<Value> = grid(0.0, 1.0, points)
        .map(|a| {
            let a = a.clamp(1e-9, 1.0 - 1e-9);
            json!({
                "alpha": a,
                "mechanism": 1.0 - curve.power(a),
                "claimed": claimed_tradeoff(eps_c, 0.0, a),
                "pseudo": pseudo_tradeoff(eps_c, c, a),
            })
        })
        .collect();
    json!({ "rows": rows }).to_string()
}

/// True level and DP-Sniper's power for Laplace noise over theta, plus the
/// false-positive region of the claim.
#[wasm_bindgen]
pub fn laplace_sniper(c: f64, eps_c: f64, theta_max: f64, points: usize) -> String {
    let rows: Vec<Value> = grid(0.05, theta_max, points)
        .map(|t| {
            let xi = laplace_sniper_xi(t, c);
            json!({
                "theta": t,
                "eps_star": t,
                "xi": xi,
                "verdict": classify(eps_c, Epsilon::exact(t), xi).verdict.code(),
            })
        })
        .collect();
    let region = laplace_sniper_region(c, eps_c).map(|r| r.to_string());
    json!({
        "rows": rows,
        "region": region.as_ref().ok(),
        "error": region.as_ref().err().map(|e| e.to_string()),
    })
    .to_string()
}

/// Delta-Siege against the Gaussian mechanism with the surrogate
/// 1/(e^eps delta): true level, predicted power and verdict over theta.
#[wasm_bindgen]
pub fn gaussian_siege(delta_c: f64, eps_c: f64, c: f64, theta_max: f64, points: usize) -> String {
    let s = SurrogateFn::InverseExpDelta;
    let rows: Vec<Value> = grid(0.25, theta_max, points)
        .map(|t| {
            let star = gaussian_epsilon(t, delta_c, 1.0);
            let xi = gaussian_siege_xi(t, c, delta_c, &s, 1.0);
            json!({
                "theta": t,
                "eps_star": finite(star),
                "xi": finite(xi),
                "verdict": classify(eps_c, Epsilon::exact(star), xi).verdict.code(),
            })
        })
        .collect();
    let regions = gaussian_deltasiege_regions(c, delta_c, eps_c, &s, 1.0);
    let (fp, fneg) = match &regions {
        Ok((fp, fneg)) => (Some(fp.to_string()), Some(fneg.to_string())),
        Err(_) => (None, None),
    };
    json!({
        "rows": rows,
        "fp_region": fp,
        "fn_region": fneg,
        "error": regions.err().map(|e| e.to_string()),
    })
    .to_string()
}
