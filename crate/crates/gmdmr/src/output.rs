//! Power-study outputs: the CSV table, one SVG panel per (b, m), and the
//! failed-cell list.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gmdmr_core::power::CellFailure;
use gmdmr_core::{Method, PowerRow, PowerTable};

use crate::csvio::{fmt_f64, write_text, FormatError};

pub const POWER_TABLE_HEADER: &str = "b,m,r,method,power,n_replications,mean_p,seed";

pub fn power_table_csv(table: &PowerTable) -> String {
    let mut out = String::from(POWER_TABLE_HEADER);
    out.push('\n');
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.b,
            fmt_f64(row.m),
            fmt_f64(row.r),
            row.method.name(),
            fmt_f64(row.power),
            row.n_replications,
            fmt_f64(row.mean_p),
            row.seed
        );
    }
    out
}

pub fn failed_cells_csv(failures: &[CellFailure]) -> String {
    let mut out = String::from("b,m,r,error\n");
    for f in failures {
        let msg = f.error.to_string().replace('"', "'");
        let _ = writeln!(out, "{},{},{},\"{}\"", f.b, fmt_f64(f.m), fmt_f64(f.r), msg);
    }
    out
}

/// Panel file name for a (b, m) pair, e.g. `power_b4_m-1.83.svg`.
pub fn panel_name(b: usize, m: f64) -> String {
    format!("power_b{b}_m{m}.svg")
}

/// Groups rows into (b, m) panels in first-seen order.
fn panels(table: &PowerTable) -> Vec<((usize, f64), Vec<&PowerRow>)> {
    let mut out: Vec<((usize, f64), Vec<&PowerRow>)> = Vec::new();
    for row in &table.rows {
        match out.iter_mut().find(|(k, _)| *k == (row.b, row.m)) {
            Some((_, rows)) => rows.push(row),
            None => out.push(((row.b, row.m), vec![row])),
        }
    }
    out
}

fn colour(method: Method) -> &'static str {
    match method {
        Method::Geodesic => "#d62728",
        Method::Euclidean => "#1f77b4",
        Method::Correlation => "#2ca02c",
    }
}

const W: f64 = 360.0;
const H: f64 = 280.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

/// Power against r, one polyline per method.
pub fn panel_svg(b: usize, m: f64, rows: &[&PowerRow]) -> String {
    let (r_lo, r_hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
            (lo.min(row.r), hi.max(row.r))
        });
    let span = if r_hi > r_lo { r_hi - r_lo } else { 1.0 };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |r: f64| LEFT + (r - r_lo) / span * pw;
    let y = |p: f64| TOP + (1.0 - p) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">b = {b}, m = {m}</text>"#,
        LEFT + pw / 2.0
    );
    for k in 0..=4 {
        let p = k as f64 / 4.0;
        let yy = y(p);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{p:.2}</text>"#,
            LEFT - 5.0,
            yy + 4.0
        );
    }
    let mut rs: Vec<f64> = rows.iter().map(|row| row.r).collect();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    for &r in &rs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{r}</text>"#,
            x(r),
            TOP + ph + 15.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">r</text>"#,
        LEFT + pw / 2.0,
        H - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">power</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut by_method: BTreeMap<Method, Vec<&PowerRow>> = BTreeMap::new();
    for row in rows {
        by_method.entry(row.method).or_default().push(row);
    }
    for (i, (method, mut pts)) in by_method.into_iter().enumerate() {
        pts.sort_by(|a, b| a.r.total_cmp(&b.r));
        let points: Vec<String> = pts
            .iter()
            .map(|row| format!("{:.2},{:.2}", x(row.r), y(row.power)))
            .collect();
        let c = colour(method);
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 25.0,
            ly + 4.0,
            method.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `power_table.csv`, the panels and, if any cell failed,
/// `failed_cells.csv`. Returns the paths written.
pub fn write_power_outputs(
    out_dir: &Path,
    table: &PowerTable,
    failures: &[CellFailure],
) -> Result<Vec<PathBuf>, FormatError> {
    let mut written = Vec::new();
    let csv = out_dir.join("power_table.csv");
    write_text(&csv, &power_table_csv(table))?;
    written.push(csv);
    for ((b, m), rows) in panels(table) {
        let path = out_dir.join(panel_name(b, m));
        write_text(&path, &panel_svg(b, m, &rows))?;
        written.push(path);
    }
    if !failures.is_empty() {
        let path = out_dir.join("failed_cells.csv");
        write_text(&path, &failed_cells_csv(failures))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(b: usize, m: f64, r: f64, method: Method, power: f64) -> PowerRow {
        PowerRow {
            b,
            m,
            r,
            method,
            power,
            n_replications: 10,
            mean_p: 0.5,
            seed: 7,
        }
    }

    #[test]
    fn single_row_table() {
        let table = PowerTable {
            rows: vec![row(2, -1.83, 0.5, Method::Geodesic, 0.25)],
        };
        let csv = power_table_csv(&table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], POWER_TABLE_HEADER);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "2");
        assert_eq!(fields[1].parse::<f64>().unwrap(), -1.83);
        assert_eq!(fields[3], "geodesic");
        assert_eq!(fields[4].parse::<f64>().unwrap(), 0.25);
        assert_eq!(fields[7], "7");
    }

    #[test]
    fn one_panel_per_b_m_with_one_line_per_method() {
        let mut rows = Vec::new();
        for b in [2, 4] {
            for m in [-1.83, 0.0, 1.83] {
                for r in [0.0, 0.5, 1.0] {
                    for method in Method::ALL {
                        rows.push(row(b, m, r, method, r));
                    }
                }
            }
        }
        let table = PowerTable { rows };
        let dir = tempfile::tempdir().unwrap();
        let written = write_power_outputs(dir.path(), &table, &[]).unwrap();
        assert_eq!(written.len(), 1 + 6);
        let svg = std::fs::read_to_string(dir.path().join("power_b4_m-1.83.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(dir.path().join("power_b2_m0.svg").exists());
        assert!(!dir.path().join("failed_cells.csv").exists());

        let again = tempfile::tempdir().unwrap();
        write_power_outputs(again.path(), &table, &[]).unwrap();
        for name in ["power_table.csv", "power_b2_m1.83.svg"] {
            assert_eq!(
                std::fs::read(dir.path().join(name)).unwrap(),
                std::fs::read(again.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn failures_written() {
        let failures = vec![CellFailure {
            b: 2,
            m: 0.0,
            r: 1.0,
            error: gmdmr_core::Error::EmptyInput,
        }];
        let csv = failed_cells_csv(&failures);
        assert!(csv.starts_with("b,m,r,error\n2,"));
    }
}
