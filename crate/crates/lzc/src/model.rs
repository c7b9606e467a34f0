//! The physical model instance and its characteristic polynomial.
//!
//! A single diabatic level with energy `β t` crosses a band of `N` levels
//! with Coulomb-like energies `k_j / t`, coupled by constants `g_j`. All
//! transition probabilities are functions of the `N` real roots `l_j` of
//!
//! ```text
//! g(y) = Π_j (y + k_j/2)  -  Σ_j (g_j²/2β) Π_{m≠j} (y + k_m/2)
//! ```
//!
//! which this module isolates by bracketed bisection plus Newton polish,
//! with a companion-matrix eigenvalue solve as fallback and test oracle.

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance used both to flag duplicate `k_j` and as the residual
/// scale for polished roots.
pub const ROOT_TOL: f64 = 1e-12;

/// Imaginary-part tolerance for accepting companion-matrix eigenvalues as
/// real roots.
const COMPANION_IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("slope beta must be positive and finite, got {0}")]
    NonpositiveSlope(f64),
    #[error("the band must contain at least one level")]
    EmptyBand,
    #[error("k has {k_len} entries but g has {g_len}")]
    LengthMismatch { k_len: usize, g_len: usize },
    #[error("{field}[{index}] is not finite")]
    NonFinite { field: &'static str, index: usize },
    #[error("root isolation failed: {0}")]
    RootIsolation(String),
}

/// The model instance: slope `β`, Coulomb strengths `k_j` and couplings
/// `g_j`. After construction the levels are sorted by ascending `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    beta: f64,
    k: Vec<f64>,
    g: Vec<f64>,
    degenerate: bool,
    decoupled: bool,
}

impl ModelParams {
    /// Validates and normalizes a parameter set. `k` and `g` are paired by
    /// index and sorted together by ascending `k`.
    pub fn new(beta: f64, k: Vec<f64>, g: Vec<f64>) -> Result<Self, ModelError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ModelError::NonpositiveSlope(beta));
        }
        if k.is_empty() {
            return Err(ModelError::EmptyBand);
        }
        if k.len() != g.len() {
            return Err(ModelError::LengthMismatch {
                k_len: k.len(),
                g_len: g.len(),
            });
        }
        for (i, v) in k.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite {
                    field: "k",
                    index: i,
                });
            }
        }
        for (i, v) in g.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite {
                    field: "g",
                    index: i,
                });
            }
        }
        let mut pairs: Vec<(f64, f64)> = k.into_iter().zip(g).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (k, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let degenerate = k.windows(2).any(|w| k_equal(w[0], w[1]));
        let decoupled = g.iter().any(|&gj| gj == 0.0);
        Ok(Self {
            beta,
            k,
            g,
            degenerate,
            decoupled,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Coulomb strengths, ascending.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Couplings, paired with `k()`.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn n_levels(&self) -> usize {
        self.k.len()
    }

    /// True if some `k_j` coincide to within `ROOT_TOL` relative. Such
    /// clusters are deflated analytically during root finding.
    pub fn has_degenerate_k(&self) -> bool {
        self.degenerate
    }

    /// True if some `g_j` is exactly zero (level decoupled from the crossing).
    pub fn has_decoupled_level(&self) -> bool {
        self.decoupled
    }

    /// Σ_j g_j² / 2β, the coupling scale that shifts the root sum.
    pub fn coupling_sum(&self) -> f64 {
        self.g.iter().map(|g| g * g).sum::<f64>() / (2.0 * self.beta)
    }
}

fn k_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= ROOT_TOL * (1.0 + a.abs() + b.abs())
}

/// The N real roots of the characteristic polynomial and the derived
/// complex quantities the probability formulas consume:
/// `ξ_j = 1/2 + i l_j` and `h_j = 1/2 - i k_j/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicRoots {
    /// Roots of g(y), ascending.
    pub l: Vec<f64>,
    /// ξ_j = 1/2 + i l_j, ordered like `l`.
    pub xi: Vec<Complex64>,
    /// h_j = 1/2 - i k_j/2, ordered like `ModelParams::k()`.
    pub h: Vec<Complex64>,
}

impl CharacteristicRoots {
    fn from_roots(params: &ModelParams, mut l: Vec<f64>) -> Self {
        l.sort_by(f64::total_cmp);
        let xi = l.iter().map(|&lj| Complex64::new(0.5, lj)).collect();
        let h = params
            .k
            .iter()
            .map(|&kj| Complex64::new(0.5, -kj / 2.0))
            .collect();
        Self { l, xi, h }
    }

    /// Defect of the trace identity Σ l_j = Σ (g_j²/2β - k_j/2), relative to
    /// the natural scale of the sums.
    pub fn root_sum_defect(&self, params: &ModelParams) -> f64 {
        let lhs: f64 = self.l.iter().sum();
        let rhs: f64 = params
            .k
            .iter()
            .zip(&params.g)
            .map(|(&k, &g)| g * g / (2.0 * params.beta) - k / 2.0)
            .sum();
        let scale = 1.0 + params.k.iter().map(|k| k.abs()).sum::<f64>() + params.coupling_sum();
        (lhs - rhs).abs() / scale
    }
}

/// Expanded monic coefficients of g(y), ascending: `c[0] + c[1] y + ... + y^N`.
///
/// Built by convolving the linear factors of the product term and
/// subtracting the coupling corrections via prefix/suffix products.
pub fn build_char_poly(params: &ModelParams) -> Vec<f64> {
    char_poly_of(params.beta, &params.k, &params.g)
}

fn char_poly_of(beta: f64, k: &[f64], g: &[f64]) -> Vec<f64> {
    let n = k.len();
    // prefix[j] = Π_{m<j} (y + k_m/2), suffix[j] = Π_{m>j} (y + k_m/2)
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    prefix.push(vec![1.0]);
    for j in 0..n {
        prefix.push(mul_linear(&prefix[j], k[j] / 2.0));
    }
    let mut suffix: Vec<Vec<f64>> = vec![vec![1.0]; n + 1];
    for j in (0..n).rev() {
        suffix[j] = mul_linear(&suffix[j + 1], k[j] / 2.0);
    }
    let mut coeffs = prefix[n].clone();
    for j in 0..n {
        let pj = poly_mul(&prefix[j], &suffix[j + 1]);
        let w = g[j] * g[j] / (2.0 * beta);
        for (c, p) in coeffs.iter_mut().zip(&pj) {
            *c -= w * p;
        }
    }
    coeffs
}

/// p(y) * (y + a) for ascending coefficients.
fn mul_linear(p: &[f64], a: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c * a;
        out[i + 1] += c;
    }
    out
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// g(y) and g'(y) in the factored product-minus-sum form, which stays
/// accurate where the expanded coefficients cancel.
fn eval_g_and_deriv(beta: f64, k: &[f64], g: &[f64], y: f64) -> (f64, f64) {
    let n = k.len();
    let f: Vec<f64> = k.iter().map(|&kj| y + kj / 2.0).collect();
    // product term and its derivative
    let mut prod = 1.0;
    for &fj in &f {
        prod *= fj;
    }
    let partial = |skip: Option<usize>, and: Option<usize>| -> f64 {
        let mut p = 1.0;
        for (m, &fm) in f.iter().enumerate() {
            if Some(m) != skip && Some(m) != and {
                p *= fm;
            }
        }
        p
    };
    let mut dprod = 0.0;
    for m in 0..n {
        dprod += partial(Some(m), None);
    }
    let mut val = prod;
    let mut dval = dprod;
    for j in 0..n {
        let w = g[j] * g[j] / (2.0 * beta);
        val -= w * partial(Some(j), None);
        let mut d = 0.0;
        for m in 0..n {
            if m != j {
                d += partial(Some(j), Some(m));
            }
        }
        dval -= w * d;
    }
    (val, dval)
}

/// Magnitude scale of g(y) at y, for residual checks: the same products with
/// every factor replaced by its absolute value.
fn eval_g_scale(beta: f64, k: &[f64], g: &[f64], y: f64) -> f64 {
    let f: Vec<f64> = k
        .iter()
        .map(|&kj| (y + kj / 2.0).abs().max(f64::MIN_POSITIVE))
        .collect();
    let mut prod = 1.0;
    for &fj in &f {
        prod *= fj;
    }
    let mut scale = prod;
    for j in 0..f.len() {
        let w = g[j] * g[j] / (2.0 * beta);
        scale += w * prod / f[j];
    }
    scale.max(f64::MIN_POSITIVE)
}

/// Finds the N real roots by deflation + bracketed bisection with Newton
/// polish. Falls back to the companion matrix when a bracket loses its sign
/// change to cancellation.
pub fn find_roots(params: &ModelParams) -> Result<CharacteristicRoots, ModelError> {
    find_roots_impl(params, false)
}

/// Same deflation pipeline, but the reduced system is solved by companion
/// matrix eigenvalues. Retained as an independent oracle for `find_roots`.
pub fn find_roots_companion(params: &ModelParams) -> Result<CharacteristicRoots, ModelError> {
    find_roots_impl(params, true)
}

fn find_roots_impl(
    params: &ModelParams,
    force_companion: bool,
) -> Result<CharacteristicRoots, ModelError> {
    let beta = params.beta;
    let mut roots: Vec<f64> = Vec::with_capacity(params.n_levels());

    // 1) decoupled levels contribute -k_j/2 exactly
    let coupled: Vec<(f64, f64)> = params
        .k
        .iter()
        .zip(&params.g)
        .filter_map(|(&k, &g)| {
            if g == 0.0 {
                roots.push(-k / 2.0);
                None
            } else {
                Some((k, g))
            }
        })
        .collect();

    // 2) duplicate-k clusters collapse to the degenerate-band roots:
    //    -k/2 with multiplicity (cluster size - 1) plus one effective level
    //    with g_eff² = Σ g_j²
    let mut reduced_k: Vec<f64> = Vec::new();
    let mut reduced_g: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < coupled.len() {
        let mut j = i + 1;
        let mut gsq = coupled[i].1 * coupled[i].1;
        while j < coupled.len() && k_equal(coupled[j].0, coupled[i].0) {
            gsq += coupled[j].1 * coupled[j].1;
            j += 1;
        }
        for _ in i + 1..j {
            roots.push(-coupled[i].0 / 2.0);
        }
        reduced_k.push(coupled[i].0);
        reduced_g.push(gsq.sqrt());
        i = j;
    }

    // 3) reduced system: strictly distinct k, all g > 0
    if !reduced_k.is_empty() {
        let found = if force_companion {
            companion_real_roots(beta, &reduced_k, &reduced_g)?
        } else {
            match bracketed_roots(beta, &reduced_k, &reduced_g) {
                Some(r) => r,
                None => companion_real_roots(beta, &reduced_k, &reduced_g)?,
            }
        };
        roots.extend(found);
    }

    Ok(CharacteristicRoots::from_roots(params, roots))
}

/// Bisection to absolute width 1e-10 followed by at most 5 Newton steps,
/// on the brackets guaranteed by the sign alternation of g at the band
/// points -k_j/2. Returns None if floating-point cancellation breaks a
/// bracket.
fn bracketed_roots(beta: f64, k: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let n = k.len();
    let band: Vec<f64> = k.iter().rev().map(|&kj| -kj / 2.0).collect(); // ascending
    let gv = |y: f64| eval_g_and_deriv(beta, k, g, y).0;

    // upper end of the rightmost bracket: Cauchy bound on the monic poly
    let coeffs = char_poly_of(beta, k, g);
    let cauchy = 1.0 + coeffs[..n].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut hi = band[n - 1].max(cauchy).max(band[n - 1] + 1.0);
    let mut f_hi = gv(hi);
    for _ in 0..8 {
        if f_hi > 0.0 {
            break;
        }
        hi = band[n - 1] + 2.0 * (hi - band[n - 1]);
        f_hi = gv(hi);
    }
    if f_hi <= 0.0 {
        return None;
    }

    let fs: Vec<f64> = band.iter().map(|&y| gv(y)).collect();
    let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(n);
    for j in 0..n - 1 {
        brackets.push((band[j], band[j + 1], fs[j], fs[j + 1]));
    }
    brackets.push((band[n - 1], hi, fs[n - 1], f_hi));

    let mut roots = Vec::with_capacity(n);
    for (mut a, mut b, mut fa, fb) in brackets {
        if fa == 0.0 {
            // exact zero at a band point can only come from cancellation
            return None;
        }
        if fa.signum() == fb.signum() {
            return None;
        }
        while b - a > 1e-10 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break; // interval at floating-point resolution
            }
            let fm = gv(mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        let mut y = 0.5 * (a + b);
        for _ in 0..5 {
            let (v, d) = eval_g_and_deriv(beta, k, g, y);
            if v == 0.0 || d == 0.0 {
                break;
            }
            let step = v / d;
            let y_new = y - step;
            if !(a..=b).contains(&y_new) {
                break;
            }
            y = y_new;
            if step.abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        let (v, _) = eval_g_and_deriv(beta, k, g, y);
        if v.abs() > ROOT_TOL * eval_g_scale(beta, k, g, y) * 16.0 {
            return None;
        }
        roots.push(y);
    }
    Some(roots)
}

/// Real eigenvalues of the companion matrix of the reduced polynomial.
fn companion_real_roots(beta: f64, k: &[f64], g: &[f64]) -> Result<Vec<f64>, ModelError> {
    let coeffs = char_poly_of(beta, k, g);
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i];
    }
    let eig = m.complex_eigenvalues();
    let mut roots = Vec::with_capacity(n);
    for ev in eig.iter() {
        if ev.im.abs() > COMPANION_IMAG_TOL * (1.0 + ev.re.abs()) {
            return Err(ModelError::RootIsolation(format!(
                "companion eigenvalue {ev} has non-negligible imaginary part"
            )));
        }
        roots.push(ev.re);
    }
    // one Newton polish step to tighten the eigenvalue solve
    for y in &mut roots {
        let (v, d) = eval_g_and_deriv(beta, k, g, *y);
        if d != 0.0 {
            let step = v / d;
            if step.is_finite() && step.abs() < 1e-3 * (1.0 + y.abs()) {
                *y -= step;
            }
        }
    }
    Ok(roots)
}
