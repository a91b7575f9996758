//! Approximation error suite.

use ptinfer::approx::{
    fit_segments, mae, table_by_name, target_by_name, FitSpec, PiecewisePoly, TABLE_NAMES,
};
use ptinfer::Result;

use crate::report::MaeRow;

/// Single boundaries tried in place of the shipped tanh split.
pub const TANH_CANDIDATES: [f64; 4] = [0.5, 2.0, 3.0, 4.0];

pub struct MaeRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

fn row(
    function: &str,
    variant: impl Into<String>,
    metric: &str,
    x: Option<f64>,
    value: f64,
) -> MaeRow {
    MaeRow {
        function: function.into(),
        variant: variant.into(),
        metric: metric.into(),
        x,
        value,
    }
}

/// MAE of `table` (or the shipped table) against its target, the exact target,
/// a refit at the same boundaries, and the boundary jump audit.
pub fn suite(
    function: &str,
    table: Option<&PiecewisePoly<f64>>,
    range: &MaeRange,
) -> Result<Vec<MaeRow>> {
    let target = target_by_name::<f64>(function)?;
    let shipped;
    let table = match table {
        Some(t) => t,
        None => {
            shipped = table_by_name::<f64>(function)?;
            &shipped
        }
    };
    let grid = |pp: &PiecewisePoly<f64>| mae(pp, target, range.lo, range.hi, range.points);
    let mut rows = vec![
        row(function, "table", "mae", None, grid(table)),
        row(
            function,
            "exact",
            "mae",
            None,
            ptinfer::approx::mean_abs_diff(target, target, range.lo, range.hi, range.points),
        ),
    ];
    let spec = FitSpec::by_name(function)?;
    rows.push(row(
        function,
        "refit",
        "mae",
        None,
        grid(&fit_segments(&spec, &table.boundaries)?),
    ));
    if function == "tanh" {
        let outer = table.boundaries[table.boundaries.len() - 1];
        for x1 in TANH_CANDIDATES {
            let refit = fit_segments(&spec, &[x1, outer])?;
            rows.push(row(
                function,
                format!("refit_x1={x1}"),
                "mae",
                None,
                grid(&refit),
            ));
        }
    }
    for (x, jump) in table.continuity() {
        rows.push(row(function, "table", "jump", Some(x), jump));
    }
    Ok(rows)
}

pub fn all(range: &MaeRange) -> Result<Vec<MaeRow>> {
    let mut rows = Vec::new();
    for name in TABLE_NAMES {
        rows.extend(suite(name, None, range)?);
    }
    Ok(rows)
}

/// Per-point curve for plotting: `x, exact, approx, abs_err`.
pub fn grid_rows(
    table: &PiecewisePoly<f64>,
    function: &str,
    range: &MaeRange,
) -> Result<Vec<(f64, f64, f64, f64)>> {
    let target = target_by_name::<f64>(function)?;
    let step = (range.hi - range.lo) / (range.points - 1) as f64;
    Ok((0..range.points)
        .map(|i| {
            let x = range.lo + step * i as f64;
            let (e, a) = (target(x), table.eval(x));
            (x, e, a, (a - e).abs())
        })
        .collect())
}
