//! Results CSV and SVG scatter plots.
//!
//! The CSV is the canonical artifact: LF line endings, floats at 17
//! significant digits, one row per path, byte-stable for a fixed
//! configuration. Plots are standalone SVG 1.1 documents regenerated from
//! the CSV — points, labelled axes, and an identity line whenever the two
//! fields share units.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::symmat::SymMatrix;

use super::config::StrategyKind;
use super::runner::PathOutcome;

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 76.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

/// 17 significant digits: enough to round-trip any f64.
fn float_cell(v: f64) -> String {
    format!("{v:.16e}")
}

/// Fixed (non-strategy) columns after `path_id`.
const FIXED_COLUMNS: [&str; 6] = [
    "n_dates",
    "lower_bound",
    "eps2n",
    "target_integral",
    "max_dtau",
    "max_increment_ratio",
];

/// Column names, in emission order.
pub fn csv_columns(strategies: &[StrategyKind]) -> Vec<String> {
    let mut cols = vec!["path_id".to_string()];
    cols.extend(FIXED_COLUMNS.iter().map(|c| c.to_string()));
    for kind in strategies {
        cols.push(format!("qv_{}", kind.label()));
        cols.push(format!("beta_{}", kind.label()));
        cols.push(format!("z_{}", kind.label()));
    }
    cols.push("error".to_string());
    cols
}

/// Serialize outcomes to CSV text.
pub fn csv_text(outcomes: &[PathOutcome], strategies: &[StrategyKind]) -> String {
    let mut text = csv_columns(strategies).join(",");
    text.push('\n');
    for outcome in outcomes {
        match outcome {
            PathOutcome::Row(row) => {
                let mut cells = vec![
                    row.path_id.to_string(),
                    row.n_dates.to_string(),
                    float_cell(row.lower_bound),
                    float_cell(row.stats.eps2n),
                    float_cell(row.stats.target_integral),
                    float_cell(row.stats.max_dtau),
                    float_cell(row.stats.max_increment_ratio),
                ];
                for &kind in strategies {
                    match row.metrics.iter().find(|(k, _)| *k == kind) {
                        Some((_, m)) => {
                            cells.push(float_cell(m.qv));
                            cells.push(float_cell(m.beta));
                            cells.push(float_cell(m.z_terminal));
                        }
                        None => cells.extend(["".into(), "".into(), "".into()]),
                    }
                }
                cells.push(row.status.replace([',', '\n'], ";"));
                text.push_str(&cells.join(","));
            }
            PathOutcome::Failed { path_id, message } => {
                let blanks = 6 + 3 * strategies.len();
                let mut cells = vec![path_id.to_string()];
                cells.extend(std::iter::repeat(String::new()).take(blanks));
                cells.push(message.clone());
                text.push_str(&cells.join(","));
            }
        }
        text.push('\n');
    }
    text
}

/// Write the results CSV.
pub fn write_csv(
    outcomes: &[PathOutcome],
    strategies: &[StrategyKind],
    path: &Path,
) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::input("refusing to write an empty results CSV"));
    }
    fs::write(path, csv_text(outcomes, strategies)).map_err(|e| Error::io(path, e))
}

/// Read two columns back from a results CSV, skipping rows where either
/// cell is empty (failed paths).
pub fn read_csv_xy(path: &Path, x_field: &str, y_field: &str) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |field: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == field)
            .ok_or_else(|| Error::input(format!("unknown field `{field}`; CSV has {header}")))
    };
    let xi = find(x_field)?;
    let yi = find(y_field)?;
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let (Some(xc), Some(yc)) = (cells.get(xi), cells.get(yi)) else {
            return Err(Error::Parse(format!("row {}: too few cells", lineno + 2)));
        };
        if xc.is_empty() || yc.is_empty() {
            continue;
        }
        let parse = |cell: &str| -> Result<f64> {
            cell.parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: `{cell}`: {e}", lineno + 2)))
        };
        points.push((parse(xc)?, parse(yc)?));
    }
    Ok(points)
}

/// Unit tag used to decide whether an identity line makes sense.
fn unit_tag(field: &str) -> &str {
    if field.starts_with("beta_") {
        "beta"
    } else if field.starts_with("qv_") {
        "qv"
    } else if field.starts_with("z_") {
        "value"
    } else {
        match field {
            "eps2n" | "target_integral" => "eps2n",
            "n_dates" => "count",
            "lower_bound" => "integral",
            "max_dtau" => "time",
            "max_increment_ratio" => "ratio",
            "path_id" => "index",
            _ => "unknown",
        }
    }
}

fn known_field(field: &str, strategies: &[StrategyKind]) -> bool {
    if field == "path_id" || FIXED_COLUMNS.contains(&field) {
        return true;
    }
    strategies.iter().any(|k| {
        field == format!("qv_{}", k.label())
            || field == format!("beta_{}", k.label())
            || field == format!("z_{}", k.label())
    })
}

fn extract_field(row: &super::runner::ExperimentRow, field: &str) -> f64 {
    match field {
        "path_id" => row.path_id as f64,
        "n_dates" => row.n_dates as f64,
        "lower_bound" => row.lower_bound,
        "eps2n" => row.stats.eps2n,
        "target_integral" => row.stats.target_integral,
        "max_dtau" => row.stats.max_dtau,
        "max_increment_ratio" => row.stats.max_increment_ratio,
        _ => {
            for (kind, m) in &row.metrics {
                let label = kind.label();
                if field == format!("qv_{label}") {
                    return m.qv;
                }
                if field == format!("beta_{label}") {
                    return m.beta;
                }
                if field == format!("z_{label}") {
                    return m.z_terminal;
                }
            }
            f64::NAN
        }
    }
}

/// Scatter two row fields straight from in-memory outcomes.
pub fn write_svg_scatter(
    outcomes: &[PathOutcome],
    strategies: &[StrategyKind],
    x_field: &str,
    y_field: &str,
    out: &Path,
) -> Result<()> {
    if !known_field(x_field, strategies) {
        return Err(Error::input(format!("unknown field `{x_field}`")));
    }
    if !known_field(y_field, strategies) {
        return Err(Error::input(format!("unknown field `{y_field}`")));
    }
    let points: Vec<(f64, f64)> = outcomes
        .iter()
        .filter_map(|o| o.row())
        .map(|r| (extract_field(r, x_field), extract_field(r, y_field)))
        .collect();
    let svg = render_scatter(&points, x_field, y_field);
    fs::write(out, svg).map_err(|e| Error::io(out, e))
}

/// Data range padded by 5% on each side; degenerate ranges get a symmetric
/// bump so the axes stay usable.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = (lo.abs() * 0.05).max(0.5);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let mut s = format!("{v:.4}");
    while s.contains('.') && (s.ends_with('0') || s.ends_with('.')) {
        s.pop();
    }
    s
}

/// Render a standalone SVG 1.1 scatter plot. No external assets.
pub fn render_scatter(points: &[(f64, f64)], x_field: &str, y_field: &str) -> String {
    let (x0, x1) = padded_range(points.iter().map(|p| p.0));
    let (y0, y1) = padded_range(points.iter().map(|p| p.1));
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let map_x = |v: f64| MARGIN_LEFT + (v - x0) / (x1 - x0) * plot_w;
    let map_y = |v: f64| SVG_HEIGHT - MARGIN_BOTTOM - (v - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);

    // Axes.
    let (ax_y, ax_x) = (SVG_HEIGHT - MARGIN_BOTTOM, MARGIN_LEFT);
    let _ = writeln!(
        svg,
        r#"<line x1="{ax_x}" y1="{ax_y}" x2="{:.2}" y2="{ax_y}" stroke="black" stroke-width="1"/>"#,
        SVG_WIDTH - MARGIN_RIGHT
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ax_x}" y1="{MARGIN_TOP}" x2="{ax_x}" y2="{ax_y}" stroke="black" stroke-width="1"/>"#
    );

    // Ticks and labels.
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = map_x(xv);
        let yp = map_y(yv);
        let _ = writeln!(
            svg,
            r#"<line x1="{xp:.2}" y1="{ax_y}" x2="{xp:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
            ax_y + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xp:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            ax_y + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{yp:.2}" x2="{ax_x}" y2="{yp:.2}" stroke="black" stroke-width="1"/>"#,
            ax_x - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ax_x - 8.0,
            yp + 4.0,
            fmt_tick(yv)
        );
    }

    // Axis titles.
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_field}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{y_field}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // Identity line when the fields share units.
    let (tx, ty) = (unit_tag(x_field), unit_tag(y_field));
    if tx == ty && tx != "unknown" {
        let lo = x0.max(y0);
        let hi = x1.min(y1);
        if lo < hi {
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#2050c0" stroke-width="1.5"/>"##,
                map_x(lo),
                map_y(lo),
                map_x(hi),
                map_y(hi)
            );
        }
    }

    for (x, y) in points {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#c03020" fill-opacity="0.75"/>"##,
            map_x(*x),
            map_y(*y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Parse a symmetric matrix from a JSON file.
///
/// Accepted forms: an array of rows (`[[a, b], [b, c]]`) or an object
/// `{"dim": d, "entries": [row-major flat array]}`.
pub fn read_matrix_json(path: &Path) -> Result<SymMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let (dim, entries): (usize, Vec<f64>) = match &value {
        serde_json::Value::Array(rows) => {
            let dim = rows.len();
            let mut entries = Vec::with_capacity(dim * dim);
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().ok_or_else(|| {
                    Error::Parse(format!("row {i}: expected an array of numbers"))
                })?;
                if row.len() != dim {
                    return Err(Error::Parse(format!(
                        "row {i}: expected {dim} entries, got {}",
                        row.len()
                    )));
                }
                for (j, v) in row.iter().enumerate() {
                    entries.push(v.as_f64().ok_or_else(|| {
                        Error::Parse(format!("entry ({i},{j}): expected a number"))
                    })?);
                }
            }
            (dim, entries)
        }
        serde_json::Value::Object(map) => {
            let dim = map
                .get("dim")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Parse("expected integer field `dim`".into()))?
                as usize;
            let entries = map
                .get("entries")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Parse("expected array field `entries`".into()))?
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    v.as_f64().ok_or_else(|| {
                        Error::Parse(format!("entries[{k}]: expected a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            (dim, entries)
        }
        _ => {
            return Err(Error::Parse(
                "expected an array of rows or {\"dim\", \"entries\"}".into(),
            ))
        }
    };
    SymMatrix::new(dim, entries)
}

/// Human-readable report for the `solve` subcommand.
pub fn solve_report(c: &SymMatrix) -> Result<String> {
    let solution = crate::gamma::solve_gamma_matrix(c)?;
    let spectrum = crate::symmat::eigh_sym(&solution.x)?;
    let mut out = String::new();
    let _ = writeln!(out, "trace root y: {:.12e}", solution.trace_y);
    let _ = writeln!(out, "residual ||2 tr(X) X + 4 X^2 - c^2||_F: {:.3e}", solution.residual);
    let _ = writeln!(
        out,
        "eigenvalues of X: [{}]",
        spectrum
            .eigenvalues
            .iter()
            .map(|l| format!("{l:.12e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(out, "X:");
    for i in 0..solution.x.dim() {
        let row: Vec<String> =
            (0..solution.x.dim()).map(|j| format!("{:>20.12e}", solution.x.get(i, j))).collect();
        let _ = writeln!(out, "  [{}]", row.join(", "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::runner::{ExperimentRow, StrategyMetrics};
    use super::*;
    use crate::simulator::AdmissibilityStats;

    fn sample_row(path_id: u64, beta: f64) -> PathOutcome {
        PathOutcome::Row(ExperimentRow {
            path_id,
            n_dates: 40,
            lower_bound: 0.1,
            stats: AdmissibilityStats {
                eps2n: 0.1,
                max_increment_ratio: 1.1,
                max_dtau: 0.05,
                target_integral: 0.11,
            },
            metrics: vec![
                (
                    StrategyKind::Stochastic,
                    StrategyMetrics { qv: 2.5e-4, beta, z_terminal: 0.01, n_dates: 40 },
                ),
                (
                    StrategyKind::Uniform,
                    StrategyMetrics { qv: 3.5e-4, beta: beta * 1.4, z_terminal: 0.02, n_dates: 40 },
                ),
            ],
            status: String::new(),
        })
    }

    const STRATEGIES: [StrategyKind; 2] = [StrategyKind::Stochastic, StrategyKind::Uniform];

    #[test]
    fn csv_schema_and_shape() {
        let cols = csv_columns(&STRATEGIES);
        // 1 id + 6 fixed + 3 per strategy + 1 error column.
        assert_eq!(cols.len(), 1 + 6 + 3 * 2 + 1);
        let text = csv_text(&[sample_row(0, 1.0)], &STRATEGIES);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), cols.len());
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_floats_carry_17_significant_digits() {
        assert_eq!(float_cell(1.0), "1.0000000000000000e0");
        assert_eq!(float_cell(0.1), "1.0000000000000001e-1");
        let round_trip: f64 = float_cell(std::f64::consts::PI).parse().unwrap();
        assert_eq!(round_trip, std::f64::consts::PI);
    }

    #[test]
    fn csv_is_byte_stable() {
        let rows = vec![sample_row(0, 1.0), sample_row(1, 0.9)];
        assert_eq!(csv_text(&rows, &STRATEGIES), csv_text(&rows, &STRATEGIES));
    }

    #[test]
    fn csv_failed_rows_carry_the_message() {
        let rows = vec![
            sample_row(0, 1.0),
            PathOutcome::Failed { path_id: 1, message: "boom".into() },
        ];
        let text = csv_text(&rows, &STRATEGIES);
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("1,"));
        assert!(last.ends_with(",boom"));
        assert_eq!(last.split(',').count(), csv_columns(&STRATEGIES).len());
    }

    #[test]
    fn csv_round_trips_through_the_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![sample_row(0, 1.0), sample_row(1, 0.9)];
        write_csv(&rows, &STRATEGIES, &path).unwrap();
        let points = read_csv_xy(&path, "beta_stochastic", "beta_uniform").unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].0, 1.0);
        assert!((points[0].1 - 1.4).abs() < 1e-15);
        assert!(matches!(
            read_csv_xy(&path, "beta_stochastic", "nope"),
            Err(Error::InputDomain(_))
        ));
    }

    #[test]
    fn svg_empty_plot_still_has_axes() {
        let svg = render_scatter(&[], "beta_stochastic", "beta_uniform");
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<svg"));
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("<circle"));
        assert!(svg.matches("<line").count() >= 2);
    }

    #[test]
    fn svg_identity_line_passes_through_matching_points() {
        let svg = render_scatter(&[(1.0, 1.0), (2.0, 2.0)], "beta_stochastic", "beta_uniform");
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("stroke=\"#2050c0\""), "identity line expected");

        // Different units: no identity line.
        let svg = render_scatter(&[(1.0, 1.0)], "n_dates", "qv_uniform");
        assert!(!svg.contains("stroke=\"#2050c0\""));
    }

    #[test]
    fn svg_ranges_pad_five_percent() {
        let (lo, hi) = padded_range([1.0, 3.0].into_iter());
        assert!((lo - 0.9).abs() < 1e-12);
        assert!((hi - 3.1).abs() < 1e-12);
        let (lo, hi) = padded_range(std::iter::empty());
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn svg_writer_validates_fields() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.svg");
        let rows = vec![sample_row(0, 1.0)];
        assert!(write_svg_scatter(&rows, &STRATEGIES, "beta_stochastic", "bogus", &out).is_err());
        write_svg_scatter(&rows, &STRATEGIES, "beta_stochastic", "beta_uniform", &out).unwrap();
        assert!(out.exists());
    }

    #[test]
    fn matrix_json_both_forms() {
        let dir = tempfile::tempdir().unwrap();
        let rows_path = dir.path().join("m.json");
        std::fs::write(&rows_path, "[[1.0, 0.5], [0.5, 2.0]]").unwrap();
        let m = read_matrix_json(&rows_path).unwrap();
        assert_eq!(m.get(0, 1), 0.5);

        let flat_path = dir.path().join("flat.json");
        std::fs::write(&flat_path, r#"{"dim": 2, "entries": [1.0, 0.5, 0.5, 2.0]}"#).unwrap();
        assert_eq!(read_matrix_json(&flat_path).unwrap(), m);
    }

    #[test]
    fn matrix_json_reports_asymmetry_pair() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "[[1.0, 0.5], [0.25, 2.0]]").unwrap();
        match read_matrix_json(&path) {
            Err(Error::Asymmetric { i: 0, j: 1, aij, aji }) => {
                assert_eq!((aij, aji), (0.5, 0.25));
            }
            other => panic!("expected asymmetry error, got {other:?}"),
        }
    }

    #[test]
    fn solve_report_identity() {
        let report = solve_report(&SymMatrix::identity(2)).unwrap();
        assert!(report.contains("3.535533905932"), "{report}");
        let report = solve_report(&SymMatrix::zero(2)).unwrap();
        assert!(report.contains("trace root y: 0."));
    }
}
