//! Scalar special functions used by the closed-form transition probabilities:
//! complex log-Gamma, Stirling numbers of the second kind, and falling
//! factorials, plus a few stable log-domain helpers.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialFnError {
    /// Gamma has poles at 0, -1, -2, ...; log-Gamma is undefined there.
    #[error("log-gamma pole at nonpositive integer z = {0}")]
    Pole(f64),
    /// The exact Stirling number does not fit in 128 bits.
    #[error("S({m}, {j}) overflows the 128-bit integer range")]
    Overflow { m: u32, j: u32 },
    /// Arguments above 64 are outside the supported table range.
    #[error("stirling2 argument {0} exceeds the supported maximum 64")]
    ArgumentTooLarge(u32),
}

/// Lanczos coefficients for g = 7, 9 terms (the GSL/Boost set). Together with
/// reflection for Re z < 1/2 this gives |exp(log_gamma(z))/Γ(z) - 1| below
/// 1e-12 for |z| <= 50.
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_74; // ln(2π)/2
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Principal-branch complex log-Gamma.
///
/// `exp(log_gamma(z)) == Γ(z)` to better than 1e-12 relative for |z| <= 50;
/// the reflection formula is used for Re z < 1/2. Because `exp` is invariant
/// under 2πi shifts, every downstream Gamma ratio computed as
/// `exp(Σ ± log_gamma)` is branch-safe.
pub fn log_gamma(z: Complex64) -> Result<Complex64, SpecialFnError> {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(SpecialFnError::Pole(z.re));
    }
    Ok(log_gamma_unchecked(z))
}

fn log_gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        Complex64::new(LN_PI, 0.0)
            - ln_sin_pi(z)
            - log_gamma_unchecked(Complex64::new(1.0, 0.0) - z)
    } else {
        let zz = z - 1.0;
        let mut sum = Complex64::new(LANCZOS_COEFFS[0], 0.0);
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            sum += c / (zz + i as f64);
        }
        let t = zz + 7.5;
        Complex64::new(LN_2PI_HALF, 0.0) + (zz + 0.5) * t.ln() - t + sum.ln()
    }
}

/// log(sin(πz)) without overflowing cosh/sinh for large |Im z|.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let y = z.im;
    if y.abs() <= 1.0 {
        let (s, c) = (std::f64::consts::PI * z.re).sin_cos();
        let w = Complex64::new(
            s * (std::f64::consts::PI * y).cosh(),
            c * (std::f64::consts::PI * y).sinh(),
        );
        w.ln()
    } else {
        // sin w = -(e^{-iw}/2i)(1 - e^{2iw})   for Im w > 0 (|e^{2iw}| < 1)
        let w = z * std::f64::consts::PI;
        let i = Complex64::I;
        let one = Complex64::new(1.0, 0.0);
        if y > 0.0 {
            (i / 2.0).ln() - i * w + (one - (2.0 * i * w).exp()).ln()
        } else {
            (-i / 2.0).ln() + i * w + (one - (-2.0 * i * w).exp()).ln()
        }
    }
}

/// Stirling number of the second kind S(m, j): the number of partitions of m
/// labelled elements into j nonempty unlabelled sets. Exact, via the
/// recurrence S(m+1, j) = j S(m, j) + S(m, j-1).
pub fn stirling2(m: u32, j: u32) -> Result<u128, SpecialFnError> {
    if m > 64 {
        return Err(SpecialFnError::ArgumentTooLarge(m));
    }
    if j > 64 {
        return Err(SpecialFnError::ArgumentTooLarge(j));
    }
    if j > m {
        return Ok(0);
    }
    if m == 0 {
        return Ok(1); // S(0,0)
    }
    if j == 0 {
        return Ok(0);
    }
    // Row-by-row table for the single requested entry.
    let mut row: Vec<u128> = vec![0; j as usize + 1];
    row[0] = 1; // S(0,0)
    for mm in 1..=m {
        let hi = j.min(mm) as usize;
        for jj in (1..=hi).rev() {
            let t = (jj as u128)
                .checked_mul(row[jj])
                .and_then(|v| v.checked_add(row[jj - 1]))
                .ok_or(SpecialFnError::Overflow { m, j })?;
            row[jj] = t;
        }
        row[0] = 0; // S(m,0) = 0 for m > 0
    }
    Ok(row[j as usize])
}

/// Falling factorial (x)_n = x (x-1) ... (x-n+1), with the standard empty
/// product (x)_0 = 1.
pub fn falling_factorial(x: Complex64, n: u32) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for i in 0..n {
        p *= x - i as f64;
    }
    p
}

/// ln(1 + e^x), stable for any x.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(cosh(x)), stable for any x.
pub(crate) fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn lg(re: f64, im: f64) -> C64 {
        log_gamma(C64::new(re, im)).unwrap()
    }

    #[test]
    fn gamma_one_is_zero() {
        let v = lg(1.0, 0.0);
        assert!(v.norm() < 1e-14, "{v}");
    }

    #[test]
    fn gamma_half_is_sqrt_pi() {
        let v = lg(0.5, 0.0);
        assert_abs_diff_eq!(v.re, std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    /// |Γ(1/2 + ix)|² = π / cosh(πx), i.e. 2 Re log_gamma = log(π/cosh(πx)).
    #[test]
    fn half_line_modulus_identity() {
        for &x in &[0.5, 2.0, 10.0] {
            let lhs = 2.0 * lg(0.5, x).re;
            let rhs = LN_PI - ln_cosh(std::f64::consts::PI * x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    /// Reference points computed with 30-digit arithmetic.
    #[test]
    fn reference_values() {
        let cases = [
            (
                C64::new(0.5, 2.0),
                C64::new(-2.222_655_864_053_258_2, -0.592_536_981_977_034_59),
            ),
            (
                C64::new(3.0, 4.0),
                C64::new(-1.756_626_784_603_784_1, 4.742_664_438_034_658_0),
            ),
            (
                C64::new(8.5, -6.0),
                C64::new(7.475_278_443_161_876_3, -12.966_017_152_784_831),
            ),
        ];
        for (z, want) in cases {
            let got = log_gamma(z).unwrap();
            // compare exp(got - want) to 1: branch-insensitive relative error
            let rel = ((got - want).exp() - 1.0).norm();
            assert!(rel < 1e-12, "z={z} got={got} want={want} rel={rel:e}");
        }
        // reflection region: compare through exp to stay branch-agnostic
        let z = C64::new(-2.3, 1.7);
        let want = C64::new(-4.005_547_700_452_267_1, -6.945_026_776_596_144_9);
        let rel = ((log_gamma(z).unwrap() - want).exp() - 1.0).norm();
        assert!(rel < 1e-12, "rel={rel:e}");
    }

    #[test]
    fn pole_detection() {
        for re in [0.0, -1.0, -2.0, -17.0] {
            assert_eq!(log_gamma(C64::new(re, 0.0)), Err(SpecialFnError::Pole(re)));
        }
        assert!(log_gamma(C64::new(-1.0, 1e-9)).is_ok());
    }

    /// log_gamma(z+1) - log_gamma(z) - log(z) ≡ 0 mod 2πi in the test strip.
    #[test]
    fn recurrence_mod_2pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let z = C64::new(rng.random_range(0.1..10.0), rng.random_range(-20.0..20.0));
            let d = lg(z.re + 1.0, z.im) - log_gamma(z).unwrap() - z.ln();
            let wrapped = (d.im / (2.0 * std::f64::consts::PI)).round();
            let resid = d - C64::new(0.0, wrapped * 2.0 * std::f64::consts::PI);
            assert!(resid.norm() < 1e-12, "z={z} resid={resid:e}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let z = C64::new(rng.random_range(-5.0..8.0), rng.random_range(0.01..15.0));
            if z.im == 0.0 {
                continue;
            }
            let a = log_gamma(z).unwrap();
            let b = log_gamma(z.conj()).unwrap();
            assert!((a - b.conj()).norm() < 1e-12, "z={z}");
        }
    }

    /// Brute-force oracle: count partitions of m labelled elements into j
    /// nonempty unlabelled blocks by exhaustive assignment.
    fn stirling_by_enumeration(m: u32, j: u32) -> u128 {
        fn rec(remaining: u32, used: u32, target: u32) -> u128 {
            if remaining == 0 {
                return u128::from(used == target);
            }
            // place the next element into one of the used blocks or a new one
            let mut total = u128::from(used) * rec(remaining - 1, used, target);
            if used < target {
                total += rec(remaining - 1, used + 1, target);
            }
            total
        }
        if m == 0 {
            return u128::from(j == 0);
        }
        rec(m, 0, j)
    }

    #[test]
    fn stirling_small_values() {
        assert_eq!(stirling2(3, 2), Ok(3));
        assert_eq!(stirling2(4, 2), Ok(7));
        assert_eq!(stirling_by_enumeration(3, 2), 3);
        assert_eq!(stirling_by_enumeration(4, 2), 7);
        for m in 0..=10 {
            assert_eq!(stirling2(m, m), Ok(1));
        }
        assert_eq!(stirling2(5, 0), Ok(0));
        assert_eq!(stirling2(2, 5), Ok(0));
    }

    #[test]
    fn stirling_matches_enumeration() {
        for m in 0..=8u32 {
            for j in 0..=m {
                assert_eq!(
                    stirling2(m, j).unwrap(),
                    stirling_by_enumeration(m, j),
                    "S({m},{j})"
                );
            }
        }
    }

    #[test]
    fn stirling_recurrence_holds() {
        for m in 1..=20u32 {
            for j in 1..=m {
                let lhs = stirling2(m, j).unwrap();
                let rhs =
                    u128::from(j) * stirling2(m - 1, j).unwrap() + stirling2(m - 1, j - 1).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn stirling_overflow_and_range() {
        assert!(matches!(
            stirling2(64, 32),
            Err(SpecialFnError::Overflow { .. })
        ));
        assert!(matches!(
            stirling2(65, 2),
            Err(SpecialFnError::ArgumentTooLarge(65))
        ));
        // largest rows that still fit comfortably
        assert!(stirling2(26, 13).is_ok());
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(C64::new(7.0, 0.0), 0), C64::new(1.0, 0.0));
        assert_eq!(
            falling_factorial(C64::new(5.0, 0.0), 3),
            C64::new(60.0, 0.0)
        );
        let v = falling_factorial(C64::new(0.5, 1.0), 2);
        assert_abs_diff_eq!(v.re, -1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    /// Σ_j S(m,j) (x)_j = x^m ties the pair together (standard convention).
    #[test]
    fn stirling_falling_factorial_column_sums() {
        for x in 1..=6i32 {
            for m in 0..=8u32 {
                let mut sum = C64::new(0.0, 0.0);
                for j in 0..=m {
                    sum += stirling2(m, j).unwrap() as f64
                        * falling_factorial(C64::new(f64::from(x), 0.0), j);
                }
                let want = f64::from(x).powi(m as i32);
                assert_abs_diff_eq!(sum.re, want, epsilon = 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn softplus_and_ln_cosh_stable() {
        assert_abs_diff_eq!(softplus(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(softplus(800.0), 800.0, epsilon = 1e-12);
        assert_abs_diff_eq!(softplus(-800.0), 0.0, epsilon = 1e-300);
        assert_abs_diff_eq!(ln_cosh(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            ln_cosh(1000.0),
            1000.0 - std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(ln_cosh(-3.0), 3.0_f64.cosh().ln(), epsilon = 1e-12);
    }
}
