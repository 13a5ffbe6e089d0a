//! Deterministic report rendering shared by the CLI and the test suites.
//!
//! All floats are written as 17-significant-digit scientific notation, so a
//! rerun with the same inputs produces byte-identical files.

use crate::bounds::{ConstantsSet, FAlphaRow};
use crate::kam::KamExpansion;
use crate::kato::{KatoLedgerRow, LipschitzEstimate};
use crate::wandering::WanderingReport;

/// 17 significant digits, scientific: round-trips every f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_f64(v),
        None => "nan".to_string(),
    }
}

/// `s,b_norm,k_norm,vhat_norm,bound_bs`
pub fn kam_ledger_csv(exp: &KamExpansion) -> String {
    let mut out = String::from("s,b_norm,k_norm,vhat_norm,bound_bs\n");
    for row in &exp.norms {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.s,
            fmt_f64(row.b_norm),
            fmt_f64(row.k_norm),
            fmt_f64(row.vhat_norm),
            fmt_f64(row.b_certificate),
        ));
    }
    out
}

/// `epsilon,residual`
pub fn residual_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("epsilon,residual\n");
    for &(eps, r) in rows {
        out.push_str(&format!("{},{}\n", fmt_f64(eps), fmt_f64(r)));
    }
    out
}

/// `epsilon,delta_state,delta_norm,bound,in_regime,pass`
pub fn wandering_csv(report: &WanderingReport) -> String {
    let mut out = String::from("epsilon,delta_state,delta_norm,bound,in_regime,pass\n");
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(p.eps),
            fmt_opt(p.delta_state),
            fmt_f64(p.delta_norm),
            fmt_f64(p.bound),
            p.in_regime,
            p.pass,
        ));
    }
    out
}

/// `x,f_alpha,linear,quadratic`
pub fn f_alpha_csv(rows: &[FAlphaRow]) -> String {
    let mut out = String::from("x,f_alpha,linear,quadratic\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.x),
            fmt_f64(r.f_alpha),
            fmt_f64(r.linear),
            fmt_f64(r.quadratic),
        ));
    }
    out
}

/// `epsilon,n,p_diff_norm,u_dev_norm` — projection drift and unitary
/// deviation per perturbed cluster.
pub fn kato_ledger_csv(rows: &[KatoLedgerRow]) -> String {
    let mut out = String::from("epsilon,n,p_diff_norm,u_dev_norm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.epsilon),
            r.n,
            fmt_f64(r.p_diff_norm),
            fmt_f64(r.u_dev_norm),
        ));
    }
    out
}

/// `cluster,c_k,spread,flat` — Lipschitz summary per unperturbed cluster.
pub fn lipschitz_csv(estimates: &[LipschitzEstimate]) -> String {
    let mut out = String::from("cluster,c_k,spread,flat\n");
    for est in estimates {
        out.push_str(&format!(
            "{},{},{},{}\n",
            est.cluster,
            fmt_f64(est.c_k),
            fmt_f64(est.spread),
            est.flat,
        ));
    }
    out
}

pub fn constants_json(c: &ConstantsSet) -> String {
    serde_json::to_string_pretty(c).expect("plain struct serializes")
}
