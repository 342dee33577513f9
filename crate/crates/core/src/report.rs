//! Tabular output: trajectory CSV, per-block variance CSV, JSON lines, and
//! ensemble summaries.
//!
//! Trajectory CSV columns, in order:
//!
//! ```text
//! t, kappa_t, dY, mean_jx, mean_jy, mean_jz, var_jz, var_jy, xi2, purity,
//! trace_J<J> for each irrep, J descending
//! ```
//!
//! Half-integer `J` is written `<2J>_2` (`trace_J3_2` is `J = 3/2`).
//! Undefined values are written as `undefined`. Numbers use `.` as decimal
//! separator, plain notation for `1e-5 <= |x| < 1e15` and exponent notation
//! otherwise. Lines end in `\n`.

use std::io::{self, Write};

use crate::dynamics::{ChiSquare, EnsembleSummary};
use crate::gcs::ObservableRecord;
use crate::spinrep::BlockLayout;

pub const UNDEFINED: &str = "undefined";

pub const SCALAR_COLUMNS: [&str; 10] = [
    "t", "kappa_t", "dY", "mean_jx", "mean_jy", "mean_jz", "var_jz", "var_jy", "xi2", "purity",
];

fn j_label(two_j: u32) -> String {
    if two_j.is_multiple_of(2) {
        format!("{}", two_j / 2)
    } else {
        format!("{two_j}_2")
    }
}

pub fn trace_column_name(two_j: u32) -> String {
    format!("trace_J{}", j_label(two_j))
}

pub fn var_jy_column_name(two_j: u32) -> String {
    format!("var_jy_J{}", j_label(two_j))
}

pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_option(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_else(|| UNDEFINED.to_string())
}

pub fn csv_header(layout: &BlockLayout) -> String {
    SCALAR_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(layout.irreps().iter().map(|ir| trace_column_name(ir.two_j)))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn csv_row(record: &ObservableRecord) -> String {
    let mut fields: Vec<String> = [
        record.t,
        record.kappa_t,
        record.dy,
        record.mean_jx,
        record.mean_jy,
        record.mean_jz,
        record.var_jz,
        record.var_jy,
    ]
    .iter()
    .map(|&x| format_number(x))
    .collect();
    fields.push(format_option(record.xi2));
    fields.push(format_number(record.purity));
    fields.extend(record.block_traces.iter().map(|&x| format_number(x)));
    fields.join(",")
}

pub fn write_csv<W: Write>(mut w: W, layout: &BlockLayout, records: &[ObservableRecord]) -> io::Result<()> {
    writeln!(w, "{}", csv_header(layout))?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}

/// `t, kappa_t`, then `var_jy_J<J>` per irrep, `J` descending.
pub fn write_block_variance_csv<W: Write>(
    mut w: W,
    layout: &BlockLayout,
    records: &[ObservableRecord],
) -> io::Result<()> {
    let header: Vec<String> = ["t".to_string(), "kappa_t".to_string()]
        .into_iter()
        .chain(layout.irreps().iter().map(|ir| var_jy_column_name(ir.two_j)))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        let row: Vec<String> = [format_number(r.t), format_number(r.kappa_t)]
            .into_iter()
            .chain(r.block_var_jy.iter().map(|&v| format_option(v)))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// One JSON object per record; undefined values are `null`.
pub fn write_jsonl<W: Write, T: serde::Serialize>(mut w: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `t, kappa_t, n_traj`, then `<column>_mean, <column>_stderr` pairs.
pub fn write_ensemble_csv<W: Write>(mut w: W, summary: &EnsembleSummary) -> io::Result<()> {
    let mut header = vec!["t".to_string(), "kappa_t".to_string(), "n_traj".to_string()];
    for (name, _) in &summary.series {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_stderr"));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..summary.t.len() {
        let mut row = vec![
            format_number(summary.t[i]),
            format_number(summary.kappa_t[i]),
            summary.n_traj.to_string(),
        ];
        for (_, stats) in &summary.series {
            let s = stats[i];
            if s.count == 0 {
                row.push(UNDEFINED.into());
                row.push(UNDEFINED.into());
            } else {
                row.push(format_number(s.mean));
                row.push(format_number(s.stderr));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `M, count, expected_binomial` with `M` written as a decimal.
pub fn write_histogram_csv<W: Write>(
    mut w: W,
    summary: &EnsembleSummary,
    n_spins: u32,
    chi: Option<&ChiSquare>,
) -> io::Result<()> {
    writeln!(w, "M,count,binomial_expected")?;
    let total: usize = summary.final_m_histogram.values().sum();
    let n = n_spins as i32;
    for k in 0..=n {
        let two_m = 2 * k - n;
        let count = summary.final_m_histogram.get(&two_m).copied().unwrap_or(0);
        let p = binomial(n_spins, k as u32) / 2f64.powi(n);
        writeln!(
            w,
            "{},{count},{}",
            format_number(two_m as f64 / 2.0),
            format_number(p * total as f64)
        )?;
    }
    writeln!(w, "# unresolved,{}", summary.unresolved())?;
    if let Some(c) = chi {
        writeln!(
            w,
            "# chi_square,{},dof,{},p_value,{}",
            format_number(c.statistic),
            c.dof,
            format_number(c.p_value)
        )?;
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
