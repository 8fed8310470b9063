//! SVG rendering of experiment curves, log-log axes.
//!
//! The input is the CSV text itself, so re-rendering a saved CSV reproduces
//! the original plot byte for byte.

use std::fmt::Write;

use crate::experiment::{parse_csv, Row};
use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

struct Series {
    label: &'static str,
    color: &'static str,
    dashed: bool,
    value: fn(&Row) -> f64,
}

const SERIES: [Series; 7] = [
    Series { label: "E|G| clean", color: "#1f77b4", dashed: false, value: |r| r.g_clean },
    Series { label: "E|G| adversarial", color: "#d62728", dashed: false, value: |r| r.g_adv },
    Series { label: "UDB clean", color: "#1f77b4", dashed: true, value: |r| r.udb_clean },
    Series { label: "UDB adversarial", color: "#d62728", dashed: true, value: |r| r.udb_adv },
    Series { label: "bound clean", color: "#2ca02c", dashed: false, value: |r| r.bound_banchi },
    Series { label: "bound adversarial", color: "#9467bd", dashed: false, value: |r| r.bound_adv },
    Series { label: "bound general", color: "#8c564b", dashed: true, value: |r| r.bound_general },
];

fn log_span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Renders the curves of an experiment CSV. The general-budget bound is
/// drawn only when some row lies outside the floor-dependent regime.
pub fn render_svg(csv: &str) -> Result<String, CliError> {
    let rows = parse_csv(csv)?;
    if rows.is_empty() {
        return Err(CliError::Validation("no rows to plot".into()));
    }
    let show_general = rows.iter().any(|r| !r.valid_regime);
    let series: Vec<&Series> = SERIES.iter().filter(|s| show_general || s.label != "bound general").collect();

    let (x0, x1) = log_span(rows.iter().map(|r| r.t as f64));
    let (y0, y1) = log_span(rows.iter().flat_map(|r| series.iter().map(move |s| (s.value)(r))));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for e in (x0 as i32)..=(x1 as i32) {
        let x = px(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        );
    }
    for e in (y0 as i32)..=(y1 as i32) {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">training size T</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    for (i, ser) in series.iter().enumerate() {
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let points: Vec<String> = rows
            .iter()
            .filter(|r| (ser.value)(r) > 0.0)
            .map(|r| format!("{:.2},{:.2}", px(r.t as f64), py((ser.value)(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
            ser.color,
            points.join(" ")
        );
        let ly = TOP + 12.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            ser.color,
            lx + 30.0,
            ly + 4.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::render_csv;

    fn row(t: usize, valid: bool) -> Row {
        let f = 1.0 / (t as f64).sqrt();
        Row {
            t,
            g_clean: 0.1 * f,
            g_clean_stderr: 0.01,
            g_adv: 0.12 * f,
            g_adv_stderr: 0.01,
            udb_clean: 2.0 * f,
            udb_adv: 2.1 * f,
            bound_banchi: 3.0 * f,
            bound_adv: 3.2 * f,
            bound_general: 3.5,
            i2: 0.75,
            delta_floor: 0.05,
            valid_regime: valid,
        }
    }

    #[test]
    fn six_curves_in_valid_regime() {
        let csv = render_csv(&[row(25, true), row(100, true), row(400, true)]).unwrap();
        let svg = render_svg(&csv).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert_eq!(svg, render_svg(&csv).unwrap());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn general_bound_added_outside_regime() {
        let csv = render_csv(&[row(25, false), row(100, false)]).unwrap();
        assert_eq!(render_svg(&csv).unwrap().matches("<polyline").count(), 7);
    }

    #[test]
    fn empty_or_malformed_input_rejected() {
        assert!(render_svg("").is_err());
        assert!(render_svg("T,g_clean\n1,2\n").is_err());
    }
}
