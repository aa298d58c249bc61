//! CSV and JSON emitters, and the bound-versus-empirical comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::engine::Trajectory;
use crate::experiment::{axis_values, fmt_f64, ExperimentError, StudyResult, SweepResult};
use crate::linalg;
use crate::topology::{c_lambda_or_zero, MixingMatrix, TopologyKind};

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn write_row<I, S>(w: &mut csv::Writer<Vec<u8>>, row: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).expect("in-memory csv");
}

pub fn topology_csv(rows: &[(TopologyKind, &MixingMatrix)], c: f64) -> String {
    let mut w = writer();
    write_row(&mut w, ["topology", "m", "lambda", "gap", "c", "c_lambda"]);
    for (kind, mx) in rows {
        let lam = mx.lambda();
        let cl = c_lambda_or_zero(lam, c).unwrap_or(f64::INFINITY);
        write_row(
            &mut w,
            [kind.name().to_string(), mx.m().to_string(), fmt_f64(lam), fmt_f64(mx.spectral_gap()), fmt_f64(c), fmt_f64(cl)],
        );
    }
    finish(w)
}

/// `t,consensus[,dist_to_saddle],avg_x_norm,avg_y_norm` on the agent means.
pub fn trajectory_csv(traj: &Trajectory, saddle: Option<(&[f64], &[f64])>) -> String {
    let mut w = writer();
    let mut header = vec!["t", "consensus"];
    if saddle.is_some() {
        header.push("dist_to_saddle");
    }
    header.extend(["avg_x_norm", "avg_y_norm"]);
    write_row(&mut w, header);
    for r in &traj.records {
        let mut row = vec![r.t.to_string(), fmt_f64(r.consensus)];
        if let Some((xs, ys)) = saddle {
            row.push(fmt_f64(linalg::dist(&r.x_bar, xs).hypot(linalg::dist(&r.y_bar, ys))));
        }
        row.push(fmt_f64(linalg::norm(&r.x_bar)));
        row.push(fmt_f64(linalg::norm(&r.y_bar)));
        write_row(&mut w, row);
    }
    finish(w)
}

/// `seed,t,delta,delta_avg_iterate`, one row per seed and recorded iteration.
pub fn stability_csv(study: &StudyResult) -> String {
    let mut w = writer();
    write_row(&mut w, ["seed", "t", "delta", "delta_avg_iterate"]);
    for o in &study.outcomes {
        for d in &o.delta {
            write_row(&mut w, [o.index.to_string(), d.t.to_string(), fmt_f64(d.delta), fmt_f64(d.delta_avg_iterate)]);
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub name: String,
    pub value: f64,
    pub divergent: bool,
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub topology: String,
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub seeds: usize,
    pub epsilon_arg: f64,
    pub epsilon_arg_stderr: f64,
    pub epsilon_arg_avg_iterate: f64,
    pub epsilon_arg_avg_iterate_stderr: f64,
    /// Lower estimate from finite probe grids and sample pool.
    pub epsilon_weak_lower_estimate: Option<f64>,
    pub g: f64,
    pub l: f64,
    pub mu: f64,
    pub step_condition_holds: bool,
    pub weak_gap: Option<f64>,
    pub weak_gap_stderr: Option<f64>,
    pub weak_gap_bound: f64,
    pub first_perturbed_draw: Vec<Option<usize>>,
    pub bounds: Vec<BoundSummary>,
    pub warnings: Vec<String>,
}

pub fn stability_summary(study: &StudyResult) -> StabilitySummary {
    let r = &study.report;
    StabilitySummary {
        topology: study.point.topology.name().into(),
        m: study.point.m,
        n: study.point.n,
        lambda: study.lambda,
        seeds: r.seeds,
        epsilon_arg: r.epsilon_arg.mean,
        epsilon_arg_stderr: r.epsilon_arg.stderr,
        epsilon_arg_avg_iterate: r.epsilon_arg_avg_iterate.mean,
        epsilon_arg_avg_iterate_stderr: r.epsilon_arg_avg_iterate.stderr,
        epsilon_weak_lower_estimate: r.epsilon_weak,
        g: study.constants.g,
        l: study.constants.l,
        mu: study.constants.mu(),
        step_condition_holds: study.step_condition_holds,
        weak_gap: study.risk.map(|x| x.weak_gap),
        weak_gap_stderr: study.risk.map(|x| x.weak_gap_stderr),
        weak_gap_bound: study.weak_gap_bound,
        first_perturbed_draw: study.outcomes.iter().map(|o| o.first_perturbed_draw).collect(),
        bounds: study
            .bounds
            .iter()
            .map(|b| BoundSummary { name: b.name.clone(), value: b.value, divergent: b.divergent, closed_form: b.closed_form })
            .collect(),
        warnings: study.warnings.clone(),
    }
}

/// JSON with non-finite numbers written as `null`.
pub fn stability_summary_json(study: &StudyResult) -> String {
    let mut s = serde_json::to_string_pretty(&stability_summary(study)).expect("summary serializes");
    s.push('\n');
    s
}

fn bound_rows(w: &mut csv::Writer<Vec<u8>>, prefix: &[String], reports: &[BoundReport]) {
    for b in reports {
        for t in &b.terms {
            let mut row = prefix.to_vec();
            row.extend([b.name.clone(), fmt_f64(b.value), t.name.clone(), fmt_f64(t.value)]);
            write_row(w, row);
        }
        if let Some(cf) = b.closed_form {
            let mut row = prefix.to_vec();
            row.extend([b.name.clone(), fmt_f64(b.value), "closed_form".into(), fmt_f64(cf)]);
            write_row(w, row);
        }
    }
}

/// `bound_name,value,term,term_value`.
pub fn bounds_csv(reports: &[BoundReport]) -> String {
    let mut w = writer();
    write_row(&mut w, ["bound_name", "value", "term", "term_value"]);
    bound_rows(&mut w, &[], reports);
    finish(w)
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut w = writer();
    let mut header: Vec<String> = result.axes.clone();
    header.extend(
        ["seed_count", "eps_mean", "eps_stderr", "bound_fixed", "bound_exact", "gap_weak"].map(String::from),
    );
    write_row(&mut w, header);
    for r in &result.rows {
        let mut row = r.axis_values.clone();
        row.extend([
            r.seed_count.to_string(),
            fmt_f64(r.eps_mean),
            fmt_f64(r.eps_stderr),
            fmt_f64(r.bound_fixed),
            fmt_f64(r.bound_exact),
            fmt_f64(r.gap_weak),
        ]);
        write_row(&mut w, row);
    }
    finish(w)
}

/// Every bound with its terms, keyed by the sweep axes.
pub fn sweep_bounds_csv(result: &SweepResult) -> String {
    let mut w = writer();
    let mut header: Vec<String> = result.axes.clone();
    header.extend(["bound_name", "value", "term", "term_value"].map(String::from));
    write_row(&mut w, header);
    let axes: Vec<&str> = result.axes.iter().map(String::as_str).collect();
    for s in &result.studies {
        bound_rows(&mut w, &axis_values(&s.point, &axes), &s.bounds);
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub axis_values: Vec<String>,
    pub bound_name: String,
    pub eps_mean: f64,
    /// `eps_mean + 3 eps_stderr`.
    pub eps_upper: f64,
    pub bound: f64,
    /// `bound / eps_mean`.
    pub ratio: f64,
    pub dominates: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub axes: Vec<String>,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn all_dominate(&self) -> bool {
        self.rows.iter().all(|r| r.dominates)
    }

    pub fn to_csv(&self) -> String {
        let mut w = writer();
        let mut header = self.axes.clone();
        header.extend(["bound_name", "eps_mean", "eps_upper", "bound", "ratio", "dominates"].map(String::from));
        write_row(&mut w, header);
        for r in &self.rows {
            let mut row = r.axis_values.clone();
            row.extend([
                r.bound_name.clone(),
                fmt_f64(r.eps_mean),
                fmt_f64(r.eps_upper),
                fmt_f64(r.bound),
                fmt_f64(r.ratio),
                r.dominates.to_string(),
            ]);
            write_row(&mut w, row);
        }
        finish(w)
    }

    pub fn to_markdown(&self) -> String {
        let mut header = self.axes.clone();
        header.extend(["bound", "eps_mean", "eps + 3se", "bound value", "ratio", "dominates"].map(String::from));
        let mut out = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
        for r in &self.rows {
            let mut cells = r.axis_values.clone();
            cells.extend([
                r.bound_name.clone(),
                format!("{:.4e}", r.eps_mean),
                format!("{:.4e}", r.eps_upper),
                format!("{:.4e}", r.bound),
                format!("{:.3}", r.ratio),
                if r.dominates { "yes".into() } else { "no".into() },
            ]);
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn read_table(text: &str) -> Result<Table, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| ExperimentError::SchemaMismatch(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| ExperimentError::SchemaMismatch(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str, which: &str) -> Result<usize, ExperimentError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| ExperimentError::SchemaMismatch(format!("{which} CSV lacks column `{name}`")))
}

fn parse_f64(s: &str) -> Result<f64, ExperimentError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "NaN" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| ExperimentError::SchemaMismatch(format!("not a number: `{s}`"))),
    }
}

/// Joins a sweep CSV with a sweep bounds CSV on the axis columns and compares
/// every stability bound against `eps_mean + 3 eps_stderr`.
pub fn compare_report(stability_csv: &str, bounds_csv: &str) -> Result<CompareReport, ExperimentError> {
    if stability_csv.trim().is_empty() {
        return Ok(CompareReport::default());
    }
    let (sh, srows) = read_table(stability_csv)?;
    let seed_col = column(&sh, "seed_count", "stability")?;
    let mean_col = column(&sh, "eps_mean", "stability")?;
    let se_col = column(&sh, "eps_stderr", "stability")?;
    let axes: Vec<String> = sh[..seed_col].to_vec();
    if bounds_csv.trim().is_empty() {
        return if srows.is_empty() {
            Ok(CompareReport { axes, rows: Vec::new() })
        } else {
            Err(ExperimentError::SchemaMismatch("bounds CSV is empty".into()))
        };
    }
    let (bh, brows) = read_table(bounds_csv)?;
    let name_col = column(&bh, "bound_name", "bounds")?;
    let value_col = column(&bh, "value", "bounds")?;
    if bh[..name_col] != axes[..] {
        return Err(ExperimentError::SchemaMismatch(format!(
            "axis columns differ: [{}] vs [{}]",
            axes.join(","),
            bh[..name_col].join(",")
        )));
    }
    let mut by_key: BTreeMap<Vec<String>, Vec<(String, f64)>> = BTreeMap::new();
    for r in &brows {
        let name = &r[name_col];
        if !name.contains("stability") {
            continue;
        }
        let list = by_key.entry(r[..name_col].to_vec()).or_default();
        if !list.iter().any(|(n, _)| n == name) {
            list.push((name.clone(), parse_f64(&r[value_col])?));
        }
    }
    let mut rows = Vec::new();
    for r in &srows {
        let key = r[..seed_col].to_vec();
        let (mean, se) = (parse_f64(&r[mean_col])?, parse_f64(&r[se_col])?);
        let upper = mean + 3.0 * se;
        for (name, bound) in by_key.get(&key).map(Vec::as_slice).unwrap_or_default() {
            rows.push(CompareRow {
                axis_values: key.clone(),
                bound_name: name.clone(),
                eps_mean: mean,
                eps_upper: upper,
                bound: *bound,
                ratio: bound / mean,
                dominates: *bound >= upper,
            });
        }
    }
    Ok(CompareReport { axes, rows })
}
