//! Cross-module checks: analytic fields sampled into grids, encoded into
//! models, and queried back.

use mfa_core::encode::{adaptive_encode, fit_grid_separable, max_relative_error, EncodeConfig};
use mfa_core::fields::{sample_grid, FieldSpec};
use mfa_core::model::ParamPoint;
use mfa_core::SplitMix64;

fn encode_cfg(degree: usize, nctrl: usize) -> EncodeConfig<f64> {
    EncodeConfig {
        degree: [degree; 3],
        nctrl: [nctrl; 3],
        adaptive: false,
        e_max: 0.05,
        max_rounds: 10,
        max_ctrl: [nctrl; 3],
    }
}

#[test]
fn beam_at_half_resolution_stays_under_regression_pin() {
    let field = FieldSpec::<f64>::gaussian_beam_default();
    let grid = sample_grid(&field, [64; 3], field.default_bounds()).unwrap();
    let model = fit_grid_separable(&grid, &encode_cfg(2, 32)).unwrap();
    let err = max_relative_error(&grid, &model);
    assert!(err < 0.05, "max relative error {err} above the 0.05 pin");
}

#[test]
fn beam_full_resolution_center_value() {
    let field = FieldSpec::<f64>::gaussian_beam_default();
    let grid = sample_grid(&field, [64; 3], field.default_bounds()).unwrap();
    let model = fit_grid_separable(&grid, &encode_cfg(2, 64)).unwrap();
    let center = model
        .eval_value(ParamPoint::new(0.5, 0.5, 0.5))
        .unwrap();
    // parameter center maps to the physical origin where the beam peaks
    assert!(
        (center - 255.0).abs() <= 0.01 * 255.0,
        "center value {center}"
    );
}

#[test]
fn encoded_polynomial_is_reproduced() {
    // total degree <= 2 in every variable: exactly representable at p = 2
    let f = |x: f64, y: f64, z: f64| 1.0 + x + 2.0 * y + 3.0 * z - x * y;
    let mut values = Vec::new();
    let dims = [12usize; 3];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                values.push(f(
                    x as f64 / 11.0,
                    y as f64 / 11.0,
                    z as f64 / 11.0,
                ));
            }
        }
    }
    let grid = mfa_core::encode::ScalarGrid::new(
        dims,
        mfa_core::model::DomainBounds::unit(),
        values,
    )
    .unwrap();
    let model = fit_grid_separable(&grid, &encode_cfg(2, 12)).unwrap();
    let (lo, hi) = grid.value_range();
    let range = hi - lo;
    let mut rng = SplitMix64::new(2);
    for _ in 0..100 {
        let q = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
        let got = model.eval_value(ParamPoint::new(q[0], q[1], q[2])).unwrap();
        let want = f(q[0], q[1], q[2]);
        assert!(
            (got - want).abs() / range <= 1e-9,
            "{got} vs {want} at {q:?}"
        );
    }
}

#[test]
fn adaptive_beam_reaches_tolerance_or_reports_caps() {
    let field = FieldSpec::<f64>::gaussian_beam_default();
    let grid = sample_grid(&field, [32; 3], field.default_bounds()).unwrap();
    let cfg = EncodeConfig {
        degree: [2; 3],
        nctrl: [6; 3],
        adaptive: true,
        e_max: 0.02,
        max_rounds: 10,
        max_ctrl: [32; 3],
    };
    let (model, report) = adaptive_encode(&grid, &cfg).unwrap();
    for w in report.rounds.windows(2) {
        assert!(w[1].max_rel_error <= w[0].max_rel_error + 1e-10);
    }
    if report.converged {
        assert!(report.final_max_rel_error <= 0.02);
        assert!(max_relative_error(&grid, &model) <= 0.02 + 1e-12);
    } else {
        assert!(report.caps_hit);
    }
}
