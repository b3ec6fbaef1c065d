//! Plain-text import and export: datasets, parameter snapshots, traces, Gram
//! matrices and kernel stacks.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading a
//! file back gives the same bits and rerunning a job gives the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gradflow::TrainTrace;
use crate::gram::GramStack;
use crate::kernel::KernelStack;
use crate::linalg::Matrix;
use crate::network::{Dataset, Params};

pub fn dataset_to_csv(ds: &Dataset) -> String {
    let d = ds.dim();
    let mut out = String::from("i");
    for k in 0..d {
        let _ = write!(out, ",x_{k}");
    }
    out.push_str(",y\n");
    for (i, (x, y)) in ds.inputs.iter().zip(&ds.labels).enumerate() {
        let _ = write!(out, "{i}");
        for v in x {
            let _ = write!(out, ",{v:e}");
        }
        let _ = writeln!(out, ",{y:e}");
    }
    out
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: '{tok}': {e}")))
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = cols.len().saturating_sub(2);
    let well_formed = cols.len() >= 3
        && cols[0] == "i"
        && cols[cols.len() - 1] == "y"
        && (0..d).all(|k| cols[k + 1] == format!("x_{k}"));
    if !well_formed {
        return Err(Error::Parse(format!("unexpected dataset header '{header}'")));
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != d + 2 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                ln + 1,
                d + 2,
                toks.len()
            )));
        }
        let x = toks[1..=d]
            .iter()
            .map(|t| parse_f64(t, ln + 1))
            .collect::<Result<Vec<_>>>()?;
        inputs.push(x);
        labels.push(parse_f64(toks[d + 1], ln + 1)?);
    }
    Dataset::new(inputs, labels)
}

fn write_matrix_block(out: &mut String, label: &str, m: &Matrix) {
    let _ = writeln!(out, "{label} {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Snapshot: one `W <l> <rows> <cols>` header per layer followed by its rows,
/// then `a <m>` and the output vector on one line.
pub fn params_to_text(p: &Params) -> String {
    let mut out = format!("lazylab-params {}\n", p.depth());
    for (l, w) in p.weights.iter().enumerate() {
        write_matrix_block(&mut out, &format!("W {}", l + 1), w);
    }
    let a: Vec<String> = p.output.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "a {}", p.output.len());
    let _ = writeln!(out, "{}", a.join(" "));
    out
}

pub fn params_from_text(text: &str) -> Result<Params> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of snapshot, expected {what}")))
    };
    let header = next("header")?;
    let depth: usize = header
        .strip_prefix("lazylab-params ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad snapshot header '{header}'")))?;
    let numbers = |line: &str| -> Result<Vec<f64>> {
        line.split_whitespace().map(|t| parse_f64(t, 0)).collect()
    };
    let mut weights = Vec::with_capacity(depth);
    for l in 1..=depth {
        let h = next("layer header")?;
        let toks: Vec<&str> = h.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "W" || toks[1] != l.to_string() {
            return Err(Error::Parse(format!("bad layer header '{h}'")));
        }
        let rows: usize = toks[2].parse().map_err(|_| Error::Parse(format!("bad rows in '{h}'")))?;
        let cols: usize = toks[3].parse().map_err(|_| Error::Parse(format!("bad cols in '{h}'")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = numbers(next("matrix row")?)?;
            if row.len() != cols {
                return Err(Error::Parse(format!("layer {l}: row has {} entries, expected {cols}", row.len())));
            }
            data.extend(row);
        }
        weights.push(Matrix::from_vec(rows, cols, data)?);
    }
    let h = next("output header")?;
    let m: usize = h
        .strip_prefix("a ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad output header '{h}'")))?;
    let output = numbers(next("output vector")?)?;
    if output.len() != m {
        return Err(Error::Parse("output vector length mismatch".into()));
    }
    Ok(Params { weights, output })
}

pub fn trace_header(depth: usize) -> String {
    let mut h = String::from("t,loss,min_eig,drift");
    for l in 1..=depth {
        let _ = write!(h, ",rd_W{l}");
    }
    h.push_str(",rd_a");
    for l in 1..=depth + 1 {
        let _ = write!(h, ",p_{l}");
    }
    h.push_str(",bound_ok");
    h
}

/// Trace table. Comment lines starting with `#` carry the integration settings.
pub fn trace_to_csv(trace: &TrainTrace, depth: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# integrator={:?} dt={:e} lambda_hat={:e} slack={:e} radius={:e} decay_rate={:e}",
        trace.integrator, trace.dt, trace.lambda_hat, trace.slack, trace.radius, trace.decay_rate
    );
    out.push_str(&trace_header(depth));
    out.push('\n');
    for r in &trace.records {
        let _ = write!(out, "{:e},{:e},", r.t, r.loss);
        match r.min_eig {
            Some(v) => {
                let _ = write!(out, "{v:e}");
            }
            None => out.push_str("nan"),
        }
        let _ = write!(out, ",{:e}", r.drift);
        for v in r.rd.iter().chain(&r.p) {
            let _ = write!(out, ",{v:e}");
        }
        let _ = writeln!(out, ",{}", u8::from(r.bound_ok));
    }
    out
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| l.split(',').map(|t| parse_f64(t, k + 1)).collect())
        .collect::<Result<_>>()?;
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Matrix::from_vec(r, c, rows.into_iter().flatten().collect())
}

/// Writes `gram_raw_l<l>.csv` and `gram_norm_l<l>.csv` for every layer.
pub fn write_gram_stack(dir: &Path, gs: &GramStack) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (l, (raw, norm)) in gs.raw.iter().zip(&gs.normalized).enumerate() {
        fs::write(dir.join(format!("gram_raw_l{}.csv", l + 1)), matrix_to_csv(raw))?;
        fs::write(dir.join(format!("gram_norm_l{}.csv", l + 1)), matrix_to_csv(norm))?;
    }
    Ok(())
}

pub fn kernel_summary_line(ks: &KernelStack) -> String {
    format!("lambda_S,{:e},quad_order,{}", ks.lambda_s, ks.quad_order)
}

/// Writes every matrix of the stack plus `kernel_summary.csv`.
pub fn write_kernel_stack(dir: &Path, ks: &KernelStack) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (l, m) in ks.ktilde.iter().enumerate() {
        fs::write(dir.join(format!("ktilde_l{l}.csv")), matrix_to_csv(m))?;
    }
    for (l, m) in ks.itilde.iter().enumerate() {
        fs::write(dir.join(format!("itilde_l{}.csv", l + 1)), matrix_to_csv(m))?;
    }
    for (l, m) in ks.k.iter().enumerate() {
        fs::write(dir.join(format!("k_l{}.csv", l + 1)), matrix_to_csv(m))?;
    }
    fs::write(dir.join("kernel_summary.csv"), kernel_summary_line(ks) + "\n")?;
    Ok(())
}
