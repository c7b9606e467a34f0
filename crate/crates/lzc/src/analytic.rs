//! Closed-form transition probabilities.
//!
//! Everything here is a function of the model parameters and the
//! characteristic roots: the exact survival probability
//!
//! ```text
//! P00 = Π_j (e^{-2π l_j} + 1) / (e^{π k_j} + 1)
//! ```
//!
//! its degenerate-band and independent-crossing limits, the explicit
//! three-level (`N = 2`) formulas, the band-to-level asymptote `P_q0` and the
//! level-to-band asymptote `P_0j(t)`. All Gamma ratios are evaluated as
//! `exp` of log-Gamma sums and every product with large exponents goes
//! through sign-and-log bookkeeping, so `k` values far beyond the overflow
//! range of `e^{πk}` are handled.

use crate::model::{CharacteristicRoots, ModelParams, ROOT_TOL};
use crate::special::{ln_cosh, log_gamma, softplus};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("operation requires N = {expected} band levels, got {got}")]
    WrongLevelCount { expected: usize, got: usize },
    #[error("band levels are degenerate: {0}")]
    Degeneracy(String),
    #[error("band level index q = {q} outside 1..={n}")]
    InvalidLevel { q: usize, n: usize },
    #[error("coefficient matrix is numerically singular (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },
    #[error("characteristic roots too close for the Gamma-ratio formula: {0}")]
    DegenerateRoot(String),
}

/// Minimum separation between roots (and between roots and band points)
/// before the Gamma factors of the `P_0j` formula hit a pole.
const GAMMA_POLE_TOL: f64 = 1e-8;

/// Slack allowed before an out-of-range probability is treated as a formula
/// bug. Clamping happens only after this assertion.
const PROBABILITY_SLACK: f64 = 1e-10;

fn checked_probability(raw: f64, what: &str) -> f64 {
    assert!(
        raw > -PROBABILITY_SLACK && raw < 1.0 + PROBABILITY_SLACK,
        "{what} = {raw:e} outside [0, 1] beyond tolerance; formula or input bug"
    );
    raw.clamp(0.0, 1.0)
}

fn lg(z: Complex64) -> Complex64 {
    log_gamma(z).expect("gamma argument off the pole set by construction")
}

/// value = sign · exp(ln_abs); the bookkeeping type for products of factors
/// whose exponents may individually overflow.
#[derive(Debug, Clone, Copy)]
struct SignedLog {
    ln_abs: f64,
    sign: f64,
}

impl SignedLog {
    fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self {
                ln_abs: f64::NEG_INFINITY,
                sign: 0.0,
            }
        } else {
            Self {
                ln_abs: v.abs().ln(),
                sign: v.signum(),
            }
        }
    }

    /// e^x - 1 in sign/log form.
    fn expm1(x: f64) -> Self {
        if x == 0.0 {
            Self {
                ln_abs: f64::NEG_INFINITY,
                sign: 0.0,
            }
        } else if x > 0.0 {
            Self {
                ln_abs: x + (-(-x).exp_m1()).ln(),
                sign: 1.0,
            }
        } else {
            Self {
                ln_abs: (-x.exp_m1()).ln(),
                sign: -1.0,
            }
        }
    }

    /// e^x + 1 (always positive).
    fn exp_plus_one(x: f64) -> Self {
        Self {
            ln_abs: softplus(x),
            sign: 1.0,
        }
    }

    fn exp(x: f64) -> Self {
        Self {
            ln_abs: x,
            sign: 1.0,
        }
    }

    fn mul(self, other: Self) -> Self {
        Self {
            ln_abs: self.ln_abs + other.ln_abs,
            sign: self.sign * other.sign,
        }
    }

    fn div(self, other: Self) -> Self {
        Self {
            ln_abs: self.ln_abs - other.ln_abs,
            sign: self.sign * other.sign,
        }
    }

    fn value(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

/// Exact survival probability `P00` (the probability to remain on the
/// crossing level at `t → ∞` given unit initial population there).
///
/// Evaluated entirely in log space, so arbitrarily large `|k_j|` and `|l_j|`
/// are safe.
pub fn survival_probability(params: &ModelParams, roots: &CharacteristicRoots) -> f64 {
    let ln_p: f64 = roots
        .l
        .iter()
        .zip(params.k())
        .map(|(&l, &k)| softplus(-2.0 * PI * l) - softplus(PI * k))
        .sum();
    checked_probability(ln_p.exp(), "P00")
}

/// Closed form for a fully degenerate band (all `k_j` equal):
/// `P00 = (e^{π[k - Σ g_i²/β]} + 1) / (e^{πk} + 1)`.
pub fn p00_degenerate(params: &ModelParams) -> Result<f64, AnalyticError> {
    let k = params.k();
    let spread = k[k.len() - 1] - k[0];
    if spread.abs() > ROOT_TOL * (1.0 + k[0].abs() + k[k.len() - 1].abs()) {
        return Err(AnalyticError::Degeneracy(format!(
            "k spans [{}, {}]; p00_degenerate requires identical k",
            k[0],
            k[k.len() - 1]
        )));
    }
    let kbar = k.iter().sum::<f64>() / k.len() as f64;
    let s = 2.0 * params.coupling_sum(); // Σ g²/β
    let ln_p = softplus(PI * (kbar - s)) - softplus(PI * kbar);
    Ok(checked_probability(ln_p.exp(), "P00 (degenerate band)"))
}

/// The independent-crossings approximation together with its validity
/// diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentCrossings {
    /// `Π_i (e^{π[k_i - g_i²/β]} + 1) / (e^{π k_i} + 1)`.
    pub p00: f64,
    /// `min_{i≠j} |k_i - k_j| · β / max_s g_s²`; the approximation is good
    /// when this is large. Infinite for `N = 1` or vanishing couplings.
    pub separation_ratio: f64,
}

/// Product of two-level survival factors, exact in the limit of well
/// separated band levels.
pub fn p00_independent_crossings(params: &ModelParams) -> IndependentCrossings {
    let beta = params.beta();
    let ln_p: f64 = params
        .k()
        .iter()
        .zip(params.g())
        .map(|(&k, &g)| softplus(PI * (k - g * g / beta)) - softplus(PI * k))
        .sum();
    let k = params.k();
    let min_sep = k
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min);
    let max_gsq = params.g().iter().map(|g| g * g).fold(0.0f64, f64::max);
    let separation_ratio = if max_gsq == 0.0 {
        f64::INFINITY
    } else {
        min_sep * beta / max_gsq
    };
    IndependentCrossings {
        p00: checked_probability(ln_p.exp(), "P00 (independent crossings)"),
        separation_ratio,
    }
}

/// Explicit roots for `N = 2`, ascending:
/// `l = (g₊ - βk₊ ∓ √(g₊² + βk₋(βk₋ - 2g₋))) / 4β` with `k± = k1 ± k2`,
/// `g± = g1² ± g2²`. The discriminant is rewritten as
/// `(βk₋ - g₋)² + 4 g1² g2²`, a sum of squares, so it can never go negative
/// from rounding.
pub fn n2_roots(params: &ModelParams) -> Result<(f64, f64), AnalyticError> {
    if params.n_levels() != 2 {
        return Err(AnalyticError::WrongLevelCount {
            expected: 2,
            got: params.n_levels(),
        });
    }
    let beta = params.beta();
    let (k1, k2) = (params.k()[0], params.k()[1]);
    let (g1, g2) = (params.g()[0], params.g()[1]);
    let kp = k1 + k2;
    let km = k1 - k2;
    let gp = g1 * g1 + g2 * g2;
    let gm = g1 * g1 - g2 * g2;
    let disc = (beta * km - gm).powi(2) + 4.0 * g1 * g1 * g2 * g2;
    debug_assert!(disc >= 0.0);
    let root = disc.sqrt();
    Ok((
        (gp - beta * kp - root) / (4.0 * beta),
        (gp - beta * kp + root) / (4.0 * beta),
    ))
}

/// The three transition probabilities of the three-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N2Probabilities {
    pub p00: f64,
    pub p10: f64,
    pub p20: f64,
}

/// Closed forms for `P00`, `P10`, `P20` at `N = 2`, evaluated in
/// sign-and-log arithmetic. Requires `k1 ≠ k2`; the `P10`/`P20` formulas
/// divide by `e^{-πk1} - e^{-πk2}`.
pub fn n2_probabilities(params: &ModelParams) -> Result<N2Probabilities, AnalyticError> {
    if params.n_levels() != 2 {
        return Err(AnalyticError::WrongLevelCount {
            expected: 2,
            got: params.n_levels(),
        });
    }
    let (k1, k2) = (params.k()[0], params.k()[1]);
    if params.has_degenerate_k() {
        return Err(AnalyticError::Degeneracy(format!(
            "k1 = {k1}, k2 = {k2}: P10/P20 closed forms are singular at k1 = k2"
        )));
    }
    let beta = params.beta();
    let (g1, g2) = (params.g()[0], params.g()[1]);
    let (l1, l2) = n2_roots(params)?;

    let ln_p00 =
        softplus(-2.0 * PI * l1) - softplus(PI * k1) + softplus(-2.0 * PI * l2) - softplus(PI * k2);
    let p00 = checked_probability(ln_p00.exp(), "P00 (N=2)");

    // band → level 0, sign/log factor by factor
    let pq0 = |kq: f64, ko: f64, gq: f64| -> f64 {
        if gq == 0.0 {
            return 0.0;
        }
        let front = SignedLog::from_value(gq * gq / (2.0 * beta))
            .mul(SignedLog::from_value(ko / 2.0 - kq / 2.0))
            .div(SignedLog::from_value(kq / 2.0 + l1))
            .div(SignedLog::from_value(kq / 2.0 + l2));
        let damping = SignedLog::exp(-PI * (g1 * g1 / beta + g2 * g2 / beta));
        let numer =
            SignedLog::expm1(PI * (kq + 2.0 * l1)).mul(SignedLog::expm1(PI * (kq + 2.0 * l2)));
        // e^{-πkq} - e^{-πko} = e^{-πkq} (1 - e^{-π(ko - kq)})
        let diff = SignedLog::exp(-PI * kq)
            .mul(SignedLog::expm1(-PI * (ko - kq)))
            .mul(SignedLog {
                ln_abs: 0.0,
                sign: -1.0,
            });
        let denom = diff.mul(SignedLog::exp_plus_one(PI * kq));
        front.mul(damping).mul(numer).div(denom).value()
    };
    let p10 = checked_probability(pq0(k1, k2, g1), "P10 (N=2)");
    let p20 = checked_probability(pq0(k2, k1, g2), "P20 (N=2)");
    Ok(N2Probabilities { p00, p10, p20 })
}

/// Coefficients `c_{r,q}` expanding the band-initialized solution over the
/// fundamental set, together with the intermediate γ and ζ matrices.
#[derive(Debug, Clone)]
pub struct BandCoefficients {
    /// Source band level, 1-based.
    pub q: usize,
    /// `c_{r,q}` for r = 1..N.
    pub c: Vec<Complex64>,
    /// `gamma[m][r]` = γ_{m+1, r+1}.
    pub gamma: Vec<Vec<Complex64>>,
    /// `zeta[r]` is the column vector ζ_{r+1}.
    pub zeta: Vec<Vec<Complex64>>,
}

impl BandCoefficients {
    /// `‖Σ_r c_r ζ_r - g_q e_q‖_∞ / max(1, |g_q|)`: how well the expansion
    /// reproduces unit initial population of level q.
    pub fn initial_condition_residual(&self, params: &ModelParams) -> f64 {
        let n = self.c.len();
        let gq = params.g()[self.q - 1];
        let mut worst = 0.0f64;
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..n {
                acc += self.c[r] * self.zeta[r][j];
            }
            if j == self.q - 1 {
                acc -= gq;
            }
            worst = worst.max(acc.norm());
        }
        worst / gq.abs().max(1.0)
    }
}

/// Dual Vandermonde solve: finds w with Σ_j x_j^m w_j = b_m (Björck-Pereyra,
/// O(N²), nodes must be distinct).
fn vandermonde_dual_solve(nodes: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = nodes.len();
    let mut w = b.to_vec();
    if n <= 1 {
        return w;
    }
    for k in 0..n - 1 {
        for i in ((k + 1)..n).rev() {
            let prev = w[i - 1];
            w[i] -= nodes[k] * prev;
        }
    }
    for k in (0..n - 1).rev() {
        for i in (k + 1)..n {
            w[i] /= nodes[i] - nodes[i - k - 1];
        }
        for i in k..n - 1 {
            let next = w[i + 1];
            w[i] -= next;
        }
    }
    w
}

/// Builds the γ matrix, solves the Vandermonde system for each fundamental
/// solution's initial data ζ_r, and extracts the expansion coefficients
/// `c_q = Z⁻¹ diag(g) e_q` for unit initial population of band level `q`.
///
/// γ_{m,r} = 2^{m-1/2} i^m (βi)^{h_r} Γ(h_r)⁻¹ (h_r-1)^{m-1}
///           Π_s Γ(1+h_r-ξ_s)/Γ(1+h_r-h_s),
///
/// where the s = r factor of the h-product is Γ(1) = 1. The `(βi)^{h_r}`
/// factor is the small-t constant of the r-th fundamental solution; it makes
/// the N = 2 coefficients reproduce the closed forms `P10`/`P20` exactly and
/// the pipeline agree with direct numerical integration.
pub fn band_coefficients(
    params: &ModelParams,
    roots: &CharacteristicRoots,
    q: usize,
) -> Result<BandCoefficients, AnalyticError> {
    let n = params.n_levels();
    if q == 0 || q > n {
        return Err(AnalyticError::InvalidLevel { q, n });
    }
    if params.has_degenerate_k() {
        return Err(AnalyticError::Degeneracy(
            "duplicate k_j make the Vandermonde system singular".into(),
        ));
    }
    let beta = params.beta();
    let ln_beta_i = Complex64::new(beta.ln(), PI / 2.0); // ln(βi), principal

    let mut gamma = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for r in 0..n {
        let h_r = roots.h[r];
        let mut lg_sum = -lg(h_r) + h_r * ln_beta_i;
        for s in 0..n {
            lg_sum += lg(Complex64::new(1.0, 0.0) + h_r - roots.xi[s]);
            lg_sum -= lg(Complex64::new(1.0, 0.0) + h_r - roots.h[s]);
        }
        let base = std::f64::consts::SQRT_2 * Complex64::I * lg_sum.exp();
        let step = 2.0 * Complex64::I * (h_r - 1.0);
        let mut pw = Complex64::new(1.0, 0.0);
        for m in 0..n {
            gamma[m][r] = base * pw;
            pw *= step;
        }
    }

    let nodes: Vec<Complex64> = params
        .k()
        .iter()
        .map(|&k| Complex64::new(k, -1.0))
        .collect();
    let mut zeta: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for r in 0..n {
        let col: Vec<Complex64> = (0..n).map(|m| gamma[m][r]).collect();
        zeta.push(vandermonde_dual_solve(&nodes, &col));
    }

    let z = nalgebra::DMatrix::from_fn(n, n, |j, r| zeta[r][j]);
    let z_inv = z
        .clone()
        .try_inverse()
        .ok_or(AnalyticError::SingularMatrix {
            cond: f64::INFINITY,
        })?;
    let norm1 = |m: &nalgebra::DMatrix<Complex64>| -> f64 {
        (0..m.ncols())
            .map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let cond = norm1(&z) * norm1(&z_inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(AnalyticError::SingularMatrix { cond });
    }
    let gq = params.g()[q - 1];
    let c: Vec<Complex64> = (0..n).map(|r| z_inv[(r, q - 1)] * gq).collect();
    Ok(BandCoefficients { q, c, gamma, zeta })
}

/// Σ g_j²/2β prefactor exponent shared by the `P_q0` forms.
fn pq0_ln_prefactor(params: &ModelParams) -> f64 {
    -PI * params.coupling_sum()
}

/// Instantaneous `P_q0(t) = e^{-πΣg²/2β} |Σ_r c_r t^{i k_r/2} e^{π k_r/2}|²`.
pub fn pq0_asymptote(coeffs: &BandCoefficients, params: &ModelParams, t: f64) -> f64 {
    assert!(t > 0.0, "pq0_asymptote requires t > 0");
    let ln_t = t.ln();
    let mut exponents: Vec<Complex64> = Vec::with_capacity(coeffs.c.len());
    for (r, &c_r) in coeffs.c.iter().enumerate() {
        if c_r == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k_r = params.k()[r];
        exponents.push(c_r.ln() + PI * k_r / 2.0 + Complex64::new(0.0, k_r / 2.0 * ln_t));
    }
    if exponents.is_empty() {
        return 0.0;
    }
    let shift = exponents
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: Complex64 = exponents.iter().map(|e| (e - shift).exp()).sum();
    let val = (pq0_ln_prefactor(params) + 2.0 * (shift + sum.norm().ln())).exp();
    checked_probability(val, "P_q0(t)")
}

/// Time-averaged `P_q0`: the cross terms `t^{i(k_r-k_s)/2}` average to zero
/// for distinct `k`, leaving `e^{-πΣg²/2β} Σ_r |c_r|² e^{π k_r}`.
pub fn pq0_time_average(coeffs: &BandCoefficients, params: &ModelParams) -> f64 {
    let terms: Vec<f64> = coeffs
        .c
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
        .map(|(r, c)| 2.0 * c.norm().ln() + PI * params.k()[r])
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    let shift = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|&e| (e - shift).exp()).sum();
    let val = (pq0_ln_prefactor(params) + shift + sum.ln()).exp();
    checked_probability(val, "time-averaged P_q0")
}

/// Precomputed evaluator for the level-to-band asymptote `P_0j(t)`, which
/// oscillates in `ln t` and does not converge as `t → ∞`.
#[derive(Debug, Clone)]
pub struct P0jCurve {
    /// ln(|Q|² g_j² / 2β)
    ln_prefactor: f64,
    /// complex log of the s-th coefficient (everything except `(βt)^{i l_s}`)
    w: Vec<Complex64>,
    l: Vec<f64>,
    beta: f64,
}

impl P0jCurve {
    /// Evaluates the asymptote at time `t > 0`.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t > 0.0, "P0j asymptote requires t > 0");
        if self.ln_prefactor == f64::NEG_INFINITY {
            return 0.0;
        }
        let ln_bt = (self.beta * t).ln();
        let shift = self
            .w
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: Complex64 = self
            .w
            .iter()
            .zip(&self.l)
            .map(|(&w_s, &l_s)| (w_s - shift + Complex64::new(0.0, l_s * ln_bt)).exp())
            .sum();
        let val = (self.ln_prefactor + 2.0 * (shift + sum.norm().ln())).exp();
        checked_probability(val, "P_0j(t)")
    }
}

/// Builds the `P_0j` evaluator for band level `j` (1-based):
///
/// ```text
/// P0j(t) = (|Q|² g_j²/2β) |Σ_s e^{-πl_s/2} (βt)^{i l_s}
///           Γ(1-ξ_s)/Γ(1+ξ_s-h_j) · Π_{r≠s}Γ(ξ_s-ξ_r) / Π_{r≠j}Γ(ξ_s-h_r)|²
/// ```
///
/// with `Q = Π Γ(1/2 + i k_j/2)/Γ(1-ξ_j)`. Errors with `DegenerateRoot` when
/// two roots (or a root and a band point `-k_r/2`, r ≠ j) coincide within
/// 1e-8 and a Gamma factor sits on a pole.
pub fn p0j_curve(
    params: &ModelParams,
    roots: &CharacteristicRoots,
    j: usize,
) -> Result<P0jCurve, AnalyticError> {
    let n = params.n_levels();
    if j == 0 || j > n {
        return Err(AnalyticError::InvalidLevel { q: j, n });
    }
    for s in 0..n {
        for r in 0..n {
            if r != s && (roots.l[s] - roots.l[r]).abs() < GAMMA_POLE_TOL {
                return Err(AnalyticError::DegenerateRoot(format!(
                    "roots l[{s}] and l[{r}] within {GAMMA_POLE_TOL}"
                )));
            }
            if r != j - 1 && (roots.l[s] + params.k()[r] / 2.0).abs() < GAMMA_POLE_TOL {
                return Err(AnalyticError::DegenerateRoot(format!(
                    "root l[{s}] within {GAMMA_POLE_TOL} of band point -k[{r}]/2"
                )));
            }
        }
    }
    let beta = params.beta();
    let g_j = params.g()[j - 1];
    // |Q|² = Π cosh(π l_m) / cosh(π k_m / 2) via |Γ(1/2 + ix)|² = π/cosh(πx)
    let ln_q2: f64 = roots
        .l
        .iter()
        .zip(params.k())
        .map(|(&l, &k)| ln_cosh(PI * l) - ln_cosh(PI * k / 2.0))
        .sum();
    let ln_prefactor = if g_j == 0.0 {
        f64::NEG_INFINITY
    } else {
        ln_q2 + 2.0 * g_j.abs().ln() - (2.0 * beta).ln()
    };
    let one = Complex64::new(1.0, 0.0);
    let mut w = Vec::with_capacity(n);
    for s in 0..n {
        let xi_s = roots.xi[s];
        let mut acc = Complex64::new(-PI * roots.l[s] / 2.0, 0.0) + lg(one - xi_s)
            - lg(one + xi_s - roots.h[j - 1]);
        for r in 0..n {
            if r != s {
                acc += lg(xi_s - roots.xi[r]);
            }
            if r != j - 1 {
                acc -= lg(xi_s - roots.h[r]);
            }
        }
        w.push(acc);
    }
    Ok(P0jCurve {
        ln_prefactor,
        w,
        l: roots.l.clone(),
        beta,
    })
}

/// One-shot evaluation of the `P_0j` asymptote at time `t`.
pub fn p0j_asymptote(
    params: &ModelParams,
    roots: &CharacteristicRoots,
    j: usize,
    t: f64,
) -> Result<f64, AnalyticError> {
    Ok(p0j_curve(params, roots, j)?.eval(t))
}

/// Which closed form produced a reported number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    /// Exact product over the characteristic roots.
    ExactProduct,
    /// Band-to-level asymptote via the expansion coefficients.
    Pq0Asymptote,
    /// Level-to-band oscillatory asymptote.
    P0jAsymptote,
}

/// Analytic probabilities for one initialization, with provenance.
#[derive(Debug, Clone)]
pub struct ProbabilityReport {
    pub p00: f64,
    pub p00_formula: Formula,
    /// One evaluator per band level; empty when the roots are too close for
    /// the Gamma-ratio formula (degenerate bands).
    pub p0j: Vec<P0jCurve>,
    pub p0j_formula: Formula,
    /// Time-averaged `P_q0` for band initialization, `None` for level-0 runs.
    pub pq0_avg: Option<f64>,
    pub pq0_formula: Option<Formula>,
}

impl ProbabilityReport {
    /// Report for unit initial population of the crossing level.
    pub fn level0(params: &ModelParams, roots: &CharacteristicRoots) -> Self {
        let p00 = survival_probability(params, roots);
        let p0j: Vec<P0jCurve> = (1..=params.n_levels())
            .map(|j| p0j_curve(params, roots, j))
            .collect::<Result<_, _>>()
            .unwrap_or_default();
        Self {
            p00,
            p00_formula: Formula::ExactProduct,
            p0j,
            p0j_formula: Formula::P0jAsymptote,
            pq0_avg: None,
            pq0_formula: None,
        }
    }

    /// Report for unit initial population of band level `q` (1-based).
    pub fn band(
        params: &ModelParams,
        roots: &CharacteristicRoots,
        q: usize,
    ) -> Result<Self, AnalyticError> {
        let coeffs = band_coefficients(params, roots, q)?;
        let mut report = Self::level0(params, roots);
        report.pq0_avg = Some(pq0_time_average(&coeffs, params));
        report.pq0_formula = Some(Formula::Pq0Asymptote);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{find_roots, ModelParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn params(beta: f64, k: &[f64], g: &[f64]) -> ModelParams {
        ModelParams::new(beta, k.to_vec(), g.to_vec()).unwrap()
    }

    fn survival(beta: f64, k: &[f64], g: &[f64]) -> f64 {
        let p = params(beta, k, g);
        let r = find_roots(&p).unwrap();
        survival_probability(&p, &r)
    }

    #[test]
    fn uncoupled_survival_is_one() {
        assert_abs_diff_eq!(
            survival(1.0, &[0.5, 1.5, -2.0], &[0.0, 0.0, 0.0]),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn survival_handles_huge_exponents() {
        // e^{πk} overflows for k ≳ 700/π without log-space evaluation
        let v = survival(1.0, &[500.0, 900.0], &[1.0, 1.0]);
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn degenerate_closed_form_matches_general_pipeline() {
        let p = params(1.5, &[2.0, 2.0, 2.0], &[0.5, 0.7, 0.3]);
        let r = find_roots(&p).unwrap();
        let a = survival_probability(&p, &r);
        let b = p00_degenerate(&p).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_rejects_spread_k() {
        assert!(matches!(
            p00_degenerate(&params(1.0, &[1.0, 1.1], &[0.5, 0.5])),
            Err(AnalyticError::Degeneracy(_))
        ));
    }

    #[test]
    fn degenerate_direct_value() {
        // N=2, k=1, β=1, g=(1,1): (e^{π(1-2)} + 1)/(e^{π} + 1)
        let p = params(1.0, &[1.0, 1.0], &[1.0, 1.0]);
        let want = ((PI * (1.0 - 2.0)).exp() + 1.0) / (PI.exp() + 1.0);
        assert_abs_diff_eq!(p00_degenerate(&p).unwrap(), want, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_lower_bound_strict() {
        // P00 > 1/(e^{πk} + 1) for any coupling strength. In log space the
        // gap is exactly softplus(π(k - Σg²/β)) > 0, which stays strictly
        // positive in f64 even when the direct values round to equality.
        let k = 0.8;
        let bound = 1.0 / ((PI * k).exp() + 1.0);
        for s in [0.0f64, 0.5, 2.0, 10.0, 50.0] {
            let p = params(1.0, &[k, k], &[(s / 2.0).sqrt(), (s / 2.0).sqrt()]);
            let v = p00_degenerate(&p).unwrap();
            assert!(v >= bound, "s={s}: {v} < {bound}");
            let ln_gap = softplus(PI * (k - s));
            assert!(ln_gap > 0.0, "s={s}: log-space gap not strictly positive");
        }
    }

    #[test]
    fn independent_crossings_limits() {
        let p = params(1.0, &[0.5, 3.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(p00_independent_crossings(&p).p00, 1.0, epsilon = 1e-15);

        // N=1 is a single crossing: approximation is exact
        let p1 = params(1.3, &[0.7], &[0.9]);
        let r1 = find_roots(&p1).unwrap();
        assert_abs_diff_eq!(
            p00_independent_crossings(&p1).p00,
            survival_probability(&p1, &r1),
            epsilon = 1e-13
        );
        assert!(p00_independent_crossings(&p1)
            .separation_ratio
            .is_infinite());

        // widely separated N=2
        let p2 = params(1.0, &[0.0, 100.0], &[0.5, 0.5]);
        let r2 = find_roots(&p2).unwrap();
        let exact = survival_probability(&p2, &r2);
        let approx = p00_independent_crossings(&p2);
        assert!(
            (approx.p00 - exact).abs() < 1e-3,
            "{} vs {exact}",
            approx.p00
        );
        assert!(approx.separation_ratio > 100.0);
    }

    #[test]
    fn n2_roots_equal_k_case() {
        // At k₋ = 0 the roots are (0, (g1²+g2²)/2β): fixed by the
        // characteristic-polynomial oracle (g(y) at k = 0 has its nonzero
        // root at Σg²/2β).
        let p = params(1.7, &[0.0, 0.0], &[1.1, 0.6]);
        let (lo, hi) = n2_roots(&p).unwrap();
        let gp = 1.1f64 * 1.1 + 0.6 * 0.6;
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, gp / (2.0 * 1.7), epsilon = 1e-14);
        let r = find_roots(&p).unwrap();
        assert_abs_diff_eq!(r.l[0], lo, epsilon = 1e-12);
        assert_abs_diff_eq!(r.l[1], hi, epsilon = 1e-12);
    }

    #[test]
    fn n2_roots_wide_separation_limit() {
        // k₋ ≫ g²/β: l ≈ (g²_{1,2}/β - k_{1,2}) / 2
        let p = params(1.0, &[0.3, 400.0], &[0.5, 0.8]);
        let (lo, hi) = n2_roots(&p).unwrap();
        let want_hi = (0.5f64 * 0.5 / 1.0 - 0.3) / 2.0;
        let want_lo = (0.8f64 * 0.8 / 1.0 - 400.0) / 2.0;
        assert!((hi - want_hi).abs() < 1e-3, "{hi} vs {want_hi}");
        assert!((lo - want_lo).abs() < 1e-3, "{lo} vs {want_lo}");
    }

    #[test]
    fn n2_roots_match_find_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k1 = rng.random_range(-3.0..10.0);
            let k2 = k1 + rng.random_range(0.05..8.0);
            let p = params(
                rng.random_range(0.5..3.0),
                &[k1, k2],
                &[rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
            );
            let (lo, hi) = n2_roots(&p).unwrap();
            let r = find_roots(&p).unwrap();
            assert!(
                (r.l[0] - lo).abs() <= 1e-12 * (1.0 + lo.abs()),
                "{} vs {lo}",
                r.l[0]
            );
            assert!(
                (r.l[1] - hi).abs() <= 1e-12 * (1.0 + hi.abs()),
                "{} vs {hi}",
                r.l[1]
            );
        }
    }

    #[test]
    fn n2_probabilities_no_coupling() {
        let p = params(2.0, &[0.4, 3.1], &[0.0, 0.0]);
        let v = n2_probabilities(&p).unwrap();
        assert_abs_diff_eq!(v.p00, 1.0, epsilon = 1e-14);
        assert_eq!(v.p10, 0.0);
        assert_eq!(v.p20, 0.0);
    }

    #[test]
    fn n2_probabilities_degenerate_error() {
        assert!(matches!(
            n2_probabilities(&params(1.0, &[1.0, 1.0], &[0.5, 0.5])),
            Err(AnalyticError::Degeneracy(_))
        ));
    }

    #[test]
    fn n2_p00_matches_survival() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let k1 = rng.random_range(-3.0..10.0);
            let k2 = k1 + rng.random_range(0.05..8.0);
            let p = params(
                rng.random_range(0.5..3.0),
                &[k1, k2],
                &[rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
            );
            let v = n2_probabilities(&p).unwrap();
            let r = find_roots(&p).unwrap();
            let s = survival_probability(&p, &r);
            assert!((v.p00 - s).abs() <= 1e-12, "{} vs {s}", v.p00);
        }
    }

    #[test]
    fn band_coefficients_n1_scalar_chain() {
        // 1x1 Vandermonde: ζ₁ = γ_{1,1} and c₁ ζ₁ = g₁
        let p = params(1.0, &[0.8], &[0.7]);
        let r = find_roots(&p).unwrap();
        let bc = band_coefficients(&p, &r, 1).unwrap();
        assert_eq!(bc.zeta[0][0], bc.gamma[0][0]);
        let recon = bc.c[0] * bc.zeta[0][0];
        assert_abs_diff_eq!(recon.re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(recon.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn band_coefficients_residual_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let n = rng.random_range(1..=5usize);
            let mut k: Vec<f64> = Vec::new();
            while k.len() < n {
                let cand: f64 = rng.random_range(-3.0..10.0);
                if k.iter().all(|&x: &f64| (x - cand).abs() > 0.05) {
                    k.push(cand);
                }
            }
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.8)).collect();
            let p = ModelParams::new(rng.random_range(0.5..3.0), k, g).unwrap();
            let r = find_roots(&p).unwrap();
            let q = rng.random_range(1..=n);
            let bc = band_coefficients(&p, &r, q).unwrap();
            assert!(bc.initial_condition_residual(&p) < 1e-8, "{p:?} q={q}");
        }
    }

    #[test]
    fn band_coefficients_degenerate_k_rejected() {
        let p = params(1.0, &[1.0, 1.0], &[0.5, 0.5]);
        let r = find_roots(&p).unwrap();
        assert!(matches!(
            band_coefficients(&p, &r, 1),
            Err(AnalyticError::Degeneracy(_))
        ));
    }

    #[test]
    fn pq0_n1_unitarity() {
        // two-level system: time-averaged P10 must equal 1 - P00
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let p = params(
                rng.random_range(0.5..3.0),
                &[rng.random_range(-3.0..12.0)],
                &[rng.random_range(0.05..2.0)],
            );
            let r = find_roots(&p).unwrap();
            let bc = band_coefficients(&p, &r, 1).unwrap();
            let avg = pq0_time_average(&bc, &p);
            let want = 1.0 - survival_probability(&p, &r);
            assert!((avg - want).abs() < 1e-10, "{avg} vs {want} ({p:?})");
        }
    }

    #[test]
    fn pq0_n2_matches_closed_forms() {
        let p = params(2.02, &[1.57, 12.4], &[1.7, 0.425]);
        let r = find_roots(&p).unwrap();
        let closed = n2_probabilities(&p).unwrap();
        let b1 = band_coefficients(&p, &r, 1).unwrap();
        let b2 = band_coefficients(&p, &r, 2).unwrap();
        assert_abs_diff_eq!(pq0_time_average(&b1, &p), closed.p10, epsilon = 1e-10);
        assert_abs_diff_eq!(pq0_time_average(&b2, &p), closed.p20, epsilon = 1e-10);
    }

    #[test]
    fn pq0_oscillation_about_average() {
        let p = params(1.0, &[0.5, 1.3, 2.6], &[0.6, 0.5, 0.8]);
        let r = find_roots(&p).unwrap();
        let bc = band_coefficients(&p, &r, 2).unwrap();
        let avg = pq0_time_average(&bc, &p);
        // amplitude bound from the cross terms
        let mut bound = 0.0;
        for s in 0..3 {
            for t in 0..3 {
                if s != t {
                    bound += (bc.c[s].norm() * bc.c[t].norm())
                        * (PI * (p.k()[s] + p.k()[t]) / 2.0).exp();
                }
            }
        }
        bound *= (-PI * p.coupling_sum()).exp();
        let mut mean_dev = 0.0;
        let n_samples = 2000;
        for i in 0..n_samples {
            let t = 1e3 * 10f64.powf(i as f64 / n_samples as f64);
            let dev = pq0_asymptote(&bc, &p, t) - avg;
            assert!(dev.abs() <= bound + 1e-12);
            mean_dev += dev;
        }
        assert!((mean_dev / n_samples as f64).abs() < 1e-2);
    }

    #[test]
    fn p0j_zero_coupling_vanishes() {
        let p = params(1.0, &[0.3, 1.1], &[0.0, 0.5]);
        let r = find_roots(&p).unwrap();
        let v = p0j_asymptote(&p, &r, 1, 1e3).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn p0j_degenerate_roots_rejected() {
        let p = params(1.0, &[1.0, 1.0], &[0.4, 0.4]);
        let r = find_roots(&p).unwrap();
        assert!(matches!(
            p0j_curve(&p, &r, 1),
            Err(AnalyticError::DegenerateRoot(_))
        ));
    }

    #[test]
    fn p0j_unitarity_with_p00() {
        // P00 + <Σ_j P0j> over a log-t grid ≈ 1
        let p = params(1.0, &[0.3, 1.1], &[0.8, 0.5]);
        let r = find_roots(&p).unwrap();
        let p00 = survival_probability(&p, &r);
        let curves: Vec<_> = (1..=2).map(|j| p0j_curve(&p, &r, j).unwrap()).collect();
        let n_samples = 4000;
        let mut acc = 0.0;
        for i in 0..n_samples {
            let t = 1e3 * 10f64.powf(3.0 * i as f64 / n_samples as f64);
            acc += curves.iter().map(|c| c.eval(t)).sum::<f64>();
        }
        let total = p00 + acc / n_samples as f64;
        assert!(
            (total - 1.0).abs() < 1e-2,
            "unitarity defect {}",
            total - 1.0
        );
    }

    #[test]
    fn report_shapes() {
        let p = params(1.0, &[0.3, 1.1], &[0.8, 0.5]);
        let r = find_roots(&p).unwrap();
        let rep = ProbabilityReport::level0(&p, &r);
        assert_eq!(rep.p0j.len(), 2);
        assert!(rep.pq0_avg.is_none());
        let rep = ProbabilityReport::band(&p, &r, 1).unwrap();
        assert!(rep.pq0_avg.is_some());
        assert_eq!(rep.p00_formula, Formula::ExactProduct);
    }

    proptest! {
        #[test]
        fn survival_in_unit_interval(
            beta in 0.5f64..3.0,
            seed in 0u64..1_000,
            n in 1usize..=6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut k: Vec<f64> = Vec::new();
            while k.len() < n {
                let cand: f64 = rng.random_range(-3.0..15.0);
                if k.iter().all(|&x: &f64| (x - cand).abs() > 1e-6) {
                    k.push(cand);
                }
            }
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let p = ModelParams::new(beta, k, g).unwrap();
            let r = find_roots(&p).unwrap();
            let v = survival_probability(&p, &r);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
