//! Acceptance criterion 6: the built-in figure presets produce curves on
//! which the analytic and numeric values agree at every grid point.

use lzc_cli::presets;
use lzc_cli::runner::{self, P00_VALIDATE_TOL, PQ0_VALIDATE_TOL};

fn check_preset(name: &str) -> (usize, f64, f64) {
    let mut cfg = presets::by_name(name).unwrap();
    cfg.csv = None;
    cfg.svg = None;
    let outcome = runner::run(&cfg).unwrap();
    let mut worst_p00: f64 = 0.0;
    let mut worst_band: f64 = 0.0;
    for row in &outcome.rows {
        let a = row.p00_analytic.unwrap();
        let n = row.p00_numeric.unwrap();
        worst_p00 = worst_p00.max((a - n).abs());
        for (c, cn) in [(row.p10, row.p10_numeric), (row.p20, row.p20_numeric)] {
            let (c, cn) = (c.unwrap(), cn.unwrap());
            worst_band = worst_band.max((c - cn).abs());
        }
    }
    assert!(
        worst_p00 <= P00_VALIDATE_TOL,
        "{name}: worst p00 delta {worst_p00:e} exceeds {P00_VALIDATE_TOL:e}"
    );
    assert!(
        worst_band <= PQ0_VALIDATE_TOL,
        "{name}: worst p10/p20 delta {worst_band:e} exceeds {PQ0_VALIDATE_TOL:e}"
    );
    (outcome.rows.len(), worst_p00, worst_band)
}

/// 6. Both presets: analytic and numeric P00 within 1e-3 and P10/P20 within
///    1e-2 at every grid point of each curve.
#[test]
fn criterion_6_figure_presets() {
    let mut detail = String::new();
    for name in presets::PRESET_NAMES {
        let (points, worst_p00, worst_band) = check_preset(name);
        detail.push_str(&format!(
            "{name}: {points} points, worst p00 delta {worst_p00:.2e} (tol 1e-3), worst p10/p20 delta {worst_band:.2e} (tol 1e-2); "
        ));
    }
    println!("acceptance criterion 6: PASS — {detail}");
}
