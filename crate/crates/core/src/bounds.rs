//! Certified constants and every closed-form bound of the theory:
//! `alpha`, `beta`, `rho`, the Catalan majorants and their generating
//! function, the validity threshold `eps <= eta/(v rho)`, and the
//! wandering / eternal / finite-dimensional bound evaluators.

use std::sync::OnceLock;

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{KamError, Result};

/// `alpha`, `beta`, `rho` with the residual of the defining equation at the
/// returned `alpha`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstantsSet {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    /// Value of `(alpha+1)(e^{2/alpha}-1) - 3` at the returned root.
    pub alpha_residual: f64,
}

fn alpha_equation(a: f64) -> f64 {
    (a + 1.0) * ((2.0 / a).exp() - 1.0) - 3.0
}

/// Solve `(alpha+1)(e^{2/alpha}-1) = 3` by bisection on `(1, 100)` (where the
/// left side is strictly decreasing) and derive
/// `beta = (16 pi alpha / sqrt(3)) (e^{1/(2 alpha)} - 1)`,
/// `rho = 4 pi alpha / sqrt(3)`.
pub fn solve_alpha(tol: f64) -> ConstantsSet {
    assert!(tol > 0.0, "tolerance must be positive");
    let (mut lo, mut hi) = (1.0f64, 100.0f64);
    let (glo, ghi) = (alpha_equation(lo), alpha_equation(hi));
    assert!(
        glo > 0.0 && ghi < 0.0,
        "bracket must straddle the root of the strictly decreasing equation"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.max(1.0) || mid == lo || mid == hi {
            break;
        }
        if alpha_equation(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let sqrt3 = 3.0f64.sqrt();
    let pi = std::f64::consts::PI;
    ConstantsSet {
        alpha,
        beta: 16.0 * pi * alpha / sqrt3 * ((0.5 / alpha).exp() - 1.0),
        rho: 4.0 * pi * alpha / sqrt3,
        alpha_residual: alpha_equation(alpha),
    }
}

/// The constants at full precision, computed once.
pub fn constants() -> &'static ConstantsSet {
    static CACHE: OnceLock<ConstantsSet> = OnceLock::new();
    CACHE.get_or_init(|| solve_alpha(1e-16))
}

/// Catalan numbers in the shifted convention `d_1 = 1`,
/// `d_s = sum_{l=1}^{s-1} d_l d_{s-l}`, exact integer arithmetic.
///
/// Returns `d_1..d_{s_max}` (index 0 holds `d_1`).
pub fn catalan_sequence(s_max: usize) -> Vec<BigUint> {
    let mut d: Vec<BigUint> = Vec::with_capacity(s_max);
    if s_max == 0 {
        return d;
    }
    d.push(BigUint::from(1u32));
    for s in 2..=s_max {
        let mut acc = BigUint::from(0u32);
        for l in 1..s {
            acc += &d[l - 1] * &d[s - l - 1];
        }
        d.push(acc);
    }
    d
}

/// `d_s` for `s >= 1`; `s = 0` is rejected (the sequence is indexed from 1).
pub fn catalan(s: usize) -> Result<BigUint> {
    if s == 0 {
        return Err(KamError::Domain(
            "Catalan numbers are indexed from s = 1".into(),
        ));
    }
    Ok(catalan_sequence(s).pop().expect("nonempty by construction"))
}

/// `d_s` as f64 (exact for every `s` whose value fits the 53-bit mantissa;
/// correctly rounded beyond).
pub fn catalan_f64(s: usize) -> Result<f64> {
    use num_bigint::ToBigInt;
    let d = catalan(s)?;
    let big = d.to_bigint().expect("unsigned fits bigint");
    let (_, digits) = big.to_u64_digits();
    // fold 64-bit limbs most-significant first
    let mut x = 0.0f64;
    for limb in digits.iter().rev() {
        x = x * 2.0f64.powi(64) + *limb as f64;
    }
    Ok(x)
}

/// Generating function of the Catalan numbers,
/// `D(y) = (1 - sqrt(1-4y)) / (2y)` on `[0, 1/4]` with `D(0) = 1`.
pub fn catalan_gen(y: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&y) {
        return Err(KamError::Domain(format!(
            "generating function defined on [0, 1/4], got {y}"
        )));
    }
    // 2/(1 + sqrt(1-4y)) is the same branch without cancellation at small y
    Ok(2.0 / (1.0 + (1.0 - 4.0 * y).sqrt()))
}

/// `f_alpha(x) = e^{(1 - sqrt(1-x))/(2 alpha)} - 1`, the norm profile of
/// `W - I` as a function of `x = 4 alpha eps b`.
pub fn f_alpha(x: f64, alpha: f64) -> f64 {
    ((1.0 - (1.0 - x).sqrt()) / (2.0 * alpha)).exp() - 1.0
}

/// Optimal linear majorant of `f_alpha` on `[0, 1]`.
pub fn f_alpha_linear(x: f64, alpha: f64) -> f64 {
    ((0.5 / alpha).exp() - 1.0) * x
}

/// Quadratic majorant `x/(4 alpha) + c x^2`, `c = e^{1/(2 alpha)} - 1 - 1/(4 alpha)`.
pub fn f_alpha_quadratic(x: f64, alpha: f64) -> f64 {
    let c = (0.5 / alpha).exp() - 1.0 - 0.25 / alpha;
    x / (4.0 * alpha) + c * x * x
}

/// One row of the comparison table on `[0, 1]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FAlphaRow {
    pub x: f64,
    pub f_alpha: f64,
    pub linear: f64,
    pub quadratic: f64,
}

/// Tabulate `f_alpha` with its linear and quadratic majorants on `[0, 1]`.
pub fn f_alpha_table(n_points: usize) -> Result<Vec<FAlphaRow>> {
    if n_points < 2 {
        return Err(KamError::InvalidParameter(
            "f_alpha table needs at least 2 points".into(),
        ));
    }
    let alpha = constants().alpha;
    Ok((0..n_points)
        .map(|i| {
            let x = i as f64 / (n_points - 1) as f64;
            FAlphaRow {
                x,
                f_alpha: f_alpha(x, alpha),
                linear: f_alpha_linear(x, alpha),
                quadratic: f_alpha_quadratic(x, alpha),
            }
        })
        .collect())
}

/// Instance constants: `b = pi v / (sqrt(3) eta)` and the validity threshold
/// `eps <= eta / (v rho)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundSet {
    pub v: f64,
    pub eta: f64,
    pub b: f64,
    pub eps_threshold: f64,
}

impl BoundSet {
    pub fn new(v: f64, eta: f64) -> Result<Self> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the guard
    if !(eta > 0.0) {
            return Err(KamError::GapVanished { eta });
        }
        if v < 0.0 {
            return Err(KamError::InvalidParameter(format!(
                "perturbation norm must be nonnegative, got {v}"
            )));
        }
        let c = constants();
        let b = std::f64::consts::PI * v / (3.0f64.sqrt() * eta);
        let eps_threshold = if v > 0.0 {
            eta / (v * c.rho)
        } else {
            f64::INFINITY
        };
        if v > 0.0 {
            // algebraic identity eta/(v rho) = 1/(4 alpha b)
            debug_assert!(
                (eps_threshold - 1.0 / (4.0 * c.alpha * b)).abs() <= 1e-12 * eps_threshold,
                "threshold identity violated"
            );
        }
        Ok(Self {
            v,
            eta,
            b,
            eps_threshold,
        })
    }

    pub fn in_regime(&self, eps: f64) -> bool {
        (0.0..=self.eps_threshold).contains(&eps)
    }

    /// Evaluate every closed-form bound at `eps` for a symmetry of norm
    /// `norm_s` and `d_clusters` distinct eigenvalues.
    pub fn evaluate(&self, norm_s: f64, d_clusters: usize, eps: f64) -> BoundValues {
        let c = constants();
        let in_regime = self.in_regime(eps);
        let ratio = self.v / self.eta;
        let exp_forms = if in_regime {
            let y = c.alpha * eps * self.b; // <= 1/4 inside the regime
            let d = catalan_gen(y).expect("alpha*eps*b <= 1/4 in regime");
            let k_norm = eps * self.b * d;
            Some((k_norm.exp() - 1.0, k_norm, self.v * d))
        } else {
            None
        };
        BoundValues {
            eps,
            in_regime,
            wandering: c.beta * ratio * norm_s * eps,
            eternal: 0.5 * c.beta * ratio * eps,
            w_minus_i_linear: 0.25 * c.beta * ratio * eps,
            w_minus_i_exp: exp_forms.map(|t| t.0),
            k_norm: exp_forms.map(|t| t.1),
            vhat_norm: exp_forms.map(|t| t.2),
            finite_dim: 14.0 * (d_clusters as f64).sqrt() * self.v * norm_s * eps / self.eta,
        }
    }
}

/// Evaluated right-hand sides of the bounds at one `eps`.
///
/// The exponential forms require `alpha eps b <= 1/4`; outside the regime
/// they are `None` (flagged invalid) while the linear forms are still
/// reported so sweeps can visualize where the guarantees expire.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundValues {
    pub eps: f64,
    pub in_regime: bool,
    /// `beta (v/eta) ||S|| eps` — wandering range in operator norm.
    pub wandering: f64,
    /// `(beta/2)(v/eta) eps` — eternal block-diagonal approximation.
    pub eternal: f64,
    /// `(beta/4)(v/eta) eps` — linearized `||W - I||`.
    pub w_minus_i_linear: f64,
    /// `e^{eps b D(alpha eps b)} - 1` — sharp `||W - I||`.
    pub w_minus_i_exp: Option<f64>,
    /// `eps b D(alpha eps b)` — `||K(eps)||`.
    pub k_norm: Option<f64>,
    /// `v D(alpha eps b)` — `||V_hat(eps)||`.
    pub vhat_norm: Option<f64>,
    /// `14 sqrt(d) v ||S|| eps / eta` — finite-dimensional comparison bound.
    pub finite_dim: f64,
}

/// Convenience free function mirroring the record evaluator.
pub fn evaluate_bounds(
    v: f64,
    eta: f64,
    norm_s: f64,
    d_clusters: usize,
    eps: f64,
) -> Result<BoundValues> {
    Ok(BoundSet::new(v, eta)?.evaluate(norm_s, d_clusters, eps))
}

/// Exhaustive check of the composition inequality
/// `sum_{|l| = s} d_{l_1} ... d_{l_n} <= d_s` for all `s <= s_max` and all
/// `n`, by direct enumeration of the compositions.
#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionCheck {
    pub holds: bool,
    pub s_max: usize,
    /// Smallest slack `d_s - sum`, over all `(s, n)`.
    pub min_slack: u128,
    /// `(s, n)` attaining the smallest slack.
    pub worst: (usize, usize),
}

pub fn convolution_inequality_check(s_max: usize) -> Result<ConvolutionCheck> {
    if s_max == 0 || s_max > 14 {
        return Err(KamError::InvalidParameter(
            "exhaustive composition check supports 1 <= s_max <= 14".into(),
        ));
    }
    let d: Vec<u128> = catalan_sequence(s_max)
        .iter()
        .map(|b| {
            let digits = b.to_u64_digits();
            match digits.len() {
                0 => 0u128,
                1 => digits[0] as u128,
                2 => (digits[1] as u128) << 64 | digits[0] as u128,
                _ => unreachable!("d_14 fits u128"),
            }
        })
        .collect();

    let mut holds = true;
    let mut min_slack = u128::MAX;
    let mut worst = (0, 0);
    for s in 1..=s_max {
        for n in 1..=s {
            let total = composition_sum(&d, s, n);
            if total > d[s - 1] {
                holds = false;
            }
            let slack = d[s - 1].saturating_sub(total);
            if slack < min_slack {
                min_slack = slack;
                worst = (s, n);
            }
        }
    }
    Ok(ConvolutionCheck {
        holds,
        s_max,
        min_slack,
        worst,
    })
}

/// `sum over compositions of s into n positive parts of prod d_{l_i}`.
fn composition_sum(d: &[u128], s: usize, n: usize) -> u128 {
    fn recurse(d: &[u128], remaining: usize, parts_left: usize, acc: u128) -> u128 {
        if parts_left == 1 {
            return acc * d[remaining - 1];
        }
        let mut total = 0u128;
        for first in 1..=(remaining - parts_left + 1) {
            total += recurse(d, remaining - first, parts_left - 1, acc * d[first - 1]);
        }
        total
    }
    if n > s {
        return 0;
    }
    recurse(d, s, n, 1)
}
