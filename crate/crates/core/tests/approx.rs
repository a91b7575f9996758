use ptinfer::approx::{
    find_boundaries, fit_segments, gelu, gelu_exact, mae, mean_abs_diff, mish, sigmoid,
    sigmoid_exact, table_by_name, tanh, tanh_exact, target_by_name, FitSpec, PiecewisePoly,
    TABLE_NAMES,
};

const GELU_MAE: f64 = 7.159_790_578_073_527e-4;
const SIGMOID_MAE: f64 = 1.0644285866403453e-4;
const TANH_MAE: f64 = 9.181_033_272_183_167e-4;
const MISH_MAE: f64 = 1.051_301_340_446_486e-4;

fn grid_mae(pp: &PiecewisePoly<f64>, target: fn(f64) -> f64) -> f64 {
    mae(pp, target, -6.0, 6.0, 10_000)
}

#[test]
fn pinned_mae_over_six() {
    for (name, want) in [
        ("gelu", GELU_MAE),
        ("sigmoid", SIGMOID_MAE),
        ("tanh", TANH_MAE),
        ("mish", MISH_MAE),
    ] {
        let got = grid_mae(&table_by_name(name).unwrap(), target_by_name(name).unwrap());
        assert!((got - want).abs() < 1e-9, "{name}: {got:e} vs {want:e}");
    }
}

#[test]
fn exact_against_itself_is_zero() {
    assert_eq!(
        mean_abs_diff(gelu_exact, gelu_exact, -6.0, 6.0, 10_000),
        0.0
    );
}

#[test]
fn gelu_inflection_points() {
    let b = find_boundaries(&FitSpec::<f64>::gelu()).unwrap();
    assert_eq!(b.len(), 4);
    assert!((b[1] + 2f64.sqrt()).abs() < 1e-6);
    assert!((b[2] - 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn sigmoid_third_derivative_zero() {
    let b = find_boundaries(&FitSpec::<f64>::sigmoid()).unwrap();
    assert_eq!(b.len(), 1);
    assert!((b[0] - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-6);
}

#[test]
fn mish_inflection_points() {
    let b = find_boundaries(&FitSpec::<f64>::mish()).unwrap();
    assert_eq!(b.len(), 2);
    assert!((b[0] + 2.2563763963607935).abs() < 1e-6);
    assert!((b[1] - 1.4905711794854284).abs() < 1e-6);
}

#[test]
fn gelu_refit_tracks_shipped_table() {
    let shipped = gelu::<f64>();
    let refit = fit_segments(&FitSpec::gelu(), &shipped.boundaries).unwrap();
    let (a, b) = (grid_mae(&refit, gelu_exact), grid_mae(&shipped, gelu_exact));
    assert!(a <= 2.0 * b, "refit {a:e} vs shipped {b:e}");
    assert_eq!(refit.max_degree(), 4);
}

#[test]
fn tanh_degree_four_beats_degree_five_candidates() {
    let shipped = tanh::<f64>();
    let mut spec = FitSpec::<f64>::tanh();
    spec.degrees = vec![4];
    let ours = grid_mae(
        &fit_segments(&spec, &shipped.boundaries).unwrap(),
        tanh_exact,
    );
    spec.degrees = vec![5];
    for x1 in [0.5, 2.0, 3.0, 4.0] {
        let other = grid_mae(
            &fit_segments(&spec, &[x1, shipped.boundaries[1]]).unwrap(),
            tanh_exact,
        );
        assert!(
            ours < other,
            "degree 4 {ours:e} vs degree 5 at {x1}: {other:e}"
        );
    }
}

#[test]
fn shipped_tables_are_nearly_continuous() {
    for name in TABLE_NAMES {
        let pp = table_by_name::<f64>(name).unwrap();
        assert!(
            pp.max_discontinuity() <= 1e-2,
            "{name}: {:?}",
            pp.continuity()
        );
    }
}

#[test]
fn sigmoid_halves_have_equal_error() {
    let s = sigmoid::<f64>();
    let neg = mae(&s, sigmoid_exact, -6.0, 0.0, 5_000);
    let pos = mae(&s, sigmoid_exact, 0.0, 6.0, 5_000);
    assert!((neg - pos).abs() < 1e-15, "{neg:e} vs {pos:e}");
}

#[test]
fn tables_roundtrip_through_text() {
    for pp in [gelu::<f64>(), sigmoid(), tanh(), mish()] {
        let back = PiecewisePoly::from_text(&pp.to_text()).unwrap();
        assert_eq!(back, pp);
    }
}
