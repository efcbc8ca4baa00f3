//! CSV and plot-data emission.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which parse
//! back to the identical `f64`. Undefined values are written as `NaN`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::runner::{LeverScan, PathComparison, RunResult, SweepResult};

/// Columns of each per-subsystem block, in output order.
pub const SUBSYSTEM_COLUMNS: &[&str] = &[
    "U",
    "S",
    "N",
    "Omega",
    "U_rate",
    "TS_rate",
    "N_rate",
    "W_rate",
    "power_part",
    "nonlocal_rate",
    "first_law_residual",
];

pub const GLOBAL_COLUMNS: &[&str] = &["W_ext_rate", "sum_rule_residual", "eta"];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

/// A rectangular table; the first column is the abscissa for plot data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Columns drawn as curves in plot data; empty means all but the first.
    pub curves: Vec<usize>,
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Num(x) => format_number(*x),
        Cell::Text(t) => t.clone(),
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(render).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// `#` metadata lines, then one two-column block per curve, blocks
    /// separated by two blank lines. Tables whose first column is text are
    /// written as a single block.
    pub fn to_plotdata(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let numeric_x = self.rows.iter().all(|r| matches!(r.first(), Some(Cell::Num(_))));
        if !numeric_x || self.header.len() < 2 {
            let _ = writeln!(out, "# columns: {}", self.header.join(" "));
            for row in &self.rows {
                let _ = writeln!(out, "{}", row.iter().map(render).collect::<Vec<_>>().join(" "));
            }
            return out;
        }
        let curves: Vec<usize> =
            if self.curves.is_empty() { (1..self.header.len()).collect() } else { self.curves.clone() };
        for (k, &c) in curves.iter().enumerate() {
            let name = &self.header[c];
            if k > 0 {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# curve: {name}");
            let _ = writeln!(out, "# columns: {} {name}", self.header[0]);
            for row in &self.rows {
                let _ = writeln!(out, "{} {}", render(&row[0]), render(&row[c]));
            }
        }
        out
    }
}

/// Per-point time series of a protocol run.
pub fn series_table(result: &RunResult) -> Table {
    let mut header = vec!["s".to_string()];
    header.extend(result.driven.iter().cloned());
    for label in &result.labels {
        header.extend(SUBSYSTEM_COLUMNS.iter().map(|c| format!("{c}_{label}")));
    }
    header.extend(GLOBAL_COLUMNS.iter().map(|c| c.to_string()));
    let t = result.summary.reservoir.temperature();

    let rows = result
        .points
        .iter()
        .map(|p| {
            let mut row = vec![p.s];
            row.extend(&p.driven);
            for g in 0..result.labels.len() {
                let (st, r, w) = (&p.states[g], &p.rates[g], &p.work.subsystems[g]);
                debug_assert_eq!(st.label, result.labels[g]);
                row.extend([
                    st.internal_energy,
                    st.entropy,
                    st.particles,
                    st.grand_potential,
                    r.energy_rate,
                    r.heat_rate,
                    r.particle_rate,
                    w.work_rate,
                    w.power,
                    w.nonlocal_rate,
                    p.first_law[g],
                ]);
            }
            row.extend([p.work.external_power, p.work.sum_rule_residual, p.eta.unwrap_or(f64::NAN)]);
            row.into_iter().map(Cell::Num).collect()
        })
        .collect();

    Table {
        metadata: vec![
            ("table".into(), "series".into()),
            ("subsystems".into(), result.labels.join(" ")),
            ("drive_label".into(), result.drive_label.clone()),
            ("temperature".into(), format_number(t)),
            ("chemical_potential".into(), format_number(result.summary.reservoir.mu())),
            ("grid".into(), result.summary.grid.to_string()),
        ],
        header,
        rows,
        curves: Vec::new(),
    }
}

pub fn lever_table(scan: &LeverScan) -> Table {
    Table {
        metadata: vec![
            ("table".into(), "lever".into()),
            ("drive_label".into(), scan.drive_label.clone()),
            ("max_eta".into(), format_number(scan.max_eta().unwrap_or(f64::NAN))),
        ],
        header: vec![scan.parameter.clone(), "s".into(), "eta".into()],
        curves: vec![2],
        rows: scan
            .points
            .iter()
            .map(|p| vec![Cell::Num(p.value), Cell::Num(p.s), Cell::Num(p.eta.unwrap_or(f64::NAN))])
            .collect(),
    }
}

/// Integrated totals per sweep value. `quantities` are names from
/// [`crate::config::OUTPUT_QUANTITIES`]; each gets a value and an error column.
pub fn sweep_table(sweep: &SweepResult, quantities: &[String]) -> Table {
    let labels: Vec<String> =
        sweep.summaries.first().map(|s| s.subsystems.iter().map(|t| t.label.clone()).collect()).unwrap_or_default();
    let mut header = vec![sweep.parameter.clone()];
    for q in quantities.iter().filter(|q| *q != "W_ext") {
        for l in &labels {
            header.push(format!("{q}_{l}"));
            header.push(format!("{q}_{l}_err"));
        }
    }
    if quantities.iter().any(|q| q == "W_ext") {
        header.extend(["W_ext".into(), "W_ext_err".into(), "endpoint_residual".into()]);
    }
    let rows = sweep
        .values
        .iter()
        .zip(&sweep.summaries)
        .map(|(&v, summary)| {
            let mut row = vec![v];
            for q in quantities.iter().filter(|q| *q != "W_ext") {
                for t in &summary.subsystems {
                    let x = t.quantity(q).unwrap_or_default();
                    row.extend([x.value, x.error]);
                }
            }
            if quantities.iter().any(|q| q == "W_ext") {
                row.extend([summary.external_work.value, summary.external_work.error, summary.endpoint_residual]);
            }
            row.into_iter().map(Cell::Num).collect()
        })
        .collect();
    Table { metadata: vec![("table".into(), "sweep".into())], header, rows, curves: Vec::new() }
}

pub fn path_table(cmp: &PathComparison) -> Table {
    Table {
        metadata: vec![("table".into(), "path comparison".into())],
        header: ["label", "quantity", "A", "A_err", "B", "B_err", "difference"].map(String::from).to_vec(),
        rows: cmp
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.label.clone()),
                    Cell::Text(r.quantity.clone()),
                    Cell::Num(r.a.value),
                    Cell::Num(r.a.error),
                    Cell::Num(r.b.value),
                    Cell::Num(r.b.error),
                    Cell::Num(r.difference()),
                ]
            })
            .collect(),
        curves: Vec::new(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn emit_csv(result: &RunResult, path: &Path) -> Result<()> {
    write_text(path, &series_table(result).to_csv())
}

pub fn emit_plotdata(result: &RunResult, path: &Path) -> Result<()> {
    write_text(path, &series_table(result).to_plotdata())
}

/// Parse a numeric CSV written by [`Table::to_csv`].
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(str::to_string).collect(),
        None => return Err(Error::Validation("empty CSV".into())),
    };
    let rows = lines
        .map(|line| {
            line.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| Error::Validation(format!("bad number `{c}`: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
