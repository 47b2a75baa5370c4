//! Plot-ready traces as CSV (UTF-8, LF, 9 significant digits) or JSON.

use std::fs;
use std::path::Path;

use cm_core::{MixtureStep, RGCurve, TestTrace};
use serde_json::{json, Value};

use crate::error::CliError;

const SIGNIFICANT_DIGITS: i32 = 9;

/// Shortest rendering of `v` with at most 9 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    if (-5..15).contains(&magnitude) {
        let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, v);
        let (mantissa, exponent) = s.split_once('e').expect("scientific format has an exponent");
        format!("{}e{exponent}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

/// `step_index,step_kind,G,R,R_Q,H_QP,c1,d1,py1,…` and, with `objectives`,
/// `log_l,q_fun,h_fun,l_fun`.
pub fn mixture_csv(steps: &[MixtureStep], components: usize, objectives: bool) -> String {
    let mut header: Vec<String> = ["step_index", "step_kind", "G", "R", "R_Q", "H_QP"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for j in 1..=components {
        header.extend([format!("c{j}"), format!("d{j}"), format!("py{j}")]);
    }
    if objectives {
        header.extend(["log_l", "q_fun", "h_fun", "l_fun"].map(String::from));
    }
    let mut out = csv_line(&header);
    for (index, step) in steps.iter().enumerate() {
        let m = &step.monitor;
        let mut row = vec![
            index.to_string(),
            step.kind.as_str().to_string(),
            fmt_num(m.g),
            fmt_num(m.r),
            fmt_num(m.r_q),
            fmt_num(m.h_qp),
        ];
        for (comp, py) in step.model.components().iter().zip(step.model.py().mass()) {
            row.extend([fmt_num(comp.center), fmt_num(comp.stddev), fmt_num(*py)]);
        }
        if objectives {
            match step.objectives {
                Some(o) => row.extend([o.log_l, o.q_fun, o.h_fun, o.l_fun].map(fmt_num)),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        out.push_str(&csv_line(&row));
    }
    out
}

/// `step_index,step_kind,I_semantic,I_shannon,b1,…`. Row 0 is the starting
/// partition, with empty information columns.
pub fn test_csv(trace: &TestTrace, grid: &cm_core::Alphabet) -> String {
    let n_boundaries = trace.init.n_labels().saturating_sub(1);
    let mut header: Vec<String> = ["step_index", "step_kind", "I_semantic", "I_shannon"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_boundaries).map(|k| format!("b{k}")));
    let boundary_fields = |b: Option<Vec<f64>>| -> Vec<String> {
        match b {
            Some(b) => b.into_iter().map(fmt_num).collect(),
            None => vec![String::new(); n_boundaries],
        }
    };
    let mut out = csv_line(&header);
    let mut row = vec!["0".to_string(), "init".into(), String::new(), String::new()];
    row.extend(boundary_fields(trace.init.boundaries(grid)));
    out.push_str(&csv_line(&row));
    for (k, step) in trace.steps.iter().enumerate() {
        let mut row = vec![
            (k + 1).to_string(),
            "cm".into(),
            fmt_num(step.semantic_info),
            fmt_num(step.shannon_info),
        ];
        row.extend(boundary_fields(step.boundaries.clone()));
        out.push_str(&csv_line(&row));
    }
    out
}

/// `s,G,R`, one row per solved point.
pub fn rg_csv(curve: &RGCurve) -> String {
    let mut out = String::from("s,G,R\n");
    for p in &curve.points {
        out.push_str(&csv_line(&[fmt_num(p.s), fmt_num(p.g), fmt_num(p.r)]));
    }
    out
}

pub fn mixture_json(steps: &[MixtureStep]) -> Value {
    let rows: Vec<Value> = steps
        .iter()
        .enumerate()
        .map(|(index, step)| {
            let m = &step.monitor;
            let components: Vec<Value> = step
                .model
                .components()
                .iter()
                .zip(step.model.py().mass())
                .map(|(c, py)| json!({ "c": c.center, "d": c.stddev, "py": py }))
                .collect();
            let mut row = json!({
                "step_index": index,
                "step_kind": step.kind.as_str(),
                "G": m.g,
                "R": m.r,
                "R_Q": m.r_q,
                "H_QP": m.h_qp,
                "components": components,
            });
            if let Some(o) = step.objectives {
                row["objectives"] = json!({
                    "log_l": o.log_l,
                    "q_fun": o.q_fun,
                    "h_fun": o.h_fun,
                    "l_fun": o.l_fun,
                });
            }
            row
        })
        .collect();
    Value::Array(rows)
}

pub fn test_json(trace: &TestTrace, grid: &cm_core::Alphabet) -> Value {
    let steps: Vec<Value> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            json!({
                "step_index": k + 1,
                "I_semantic": s.semantic_info,
                "I_shannon": s.shannon_info,
                "boundaries": s.boundaries,
            })
        })
        .collect();
    json!({
        "init_boundaries": trace.init.boundaries(grid),
        "steps": steps,
        "converged": trace.converged,
        "iterations": trace.iterations,
    })
}

pub fn rg_json(curve: &RGCurve) -> Value {
    let points: Vec<Value> = curve
        .points
        .iter()
        .map(|p| json!({ "s": p.s, "G": p.g, "R": p.r }))
        .collect();
    json!({ "points": points, "g_plus": curve.g_plus, "g_minus": curve.g_minus })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cm_core::{run_cm_mixture, Alphabet, MixtureModel, MixtureOptions};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(54.0), "54");
        assert_eq!(fmt_num(0.123456789123), "0.123456789");
        assert_eq!(fmt_num(-35.391234567), "-35.3912346");
        assert_eq!(fmt_num(1.5e-9), "1.5e-9");
        assert_eq!(fmt_num(-1e12), "-1000000000000");
        assert_eq!(fmt_num(2.0e20), "2e20");
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(
            mixture_csv(&[], 2, false),
            "step_index,step_kind,G,R,R_Q,H_QP,c1,d1,py1,c2,d2,py2\n"
        );
        let curve = RGCurve {
            points: vec![],
            g_plus: None,
            g_minus: None,
        };
        assert_eq!(rg_csv(&curve), "s,G,R\n");
    }

    #[test]
    fn mixture_rows_match_steps() {
        let grid = Alphabet::integer_grid(1, 100).unwrap();
        let truth = MixtureModel::from_params(grid.clone(), &[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)]).unwrap();
        let start = MixtureModel::from_params(grid, &[(30.0, 15.0, 0.5), (70.0, 15.0, 0.5)]).unwrap();
        let trace = run_cm_mixture(&truth.mixture().unwrap(), &start, MixtureOptions::default()).unwrap();
        let csv = mixture_csv(&trace.steps, 2, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), trace.steps.len() + 1);
        assert!(lines[1].starts_with("0,left_a,"));
        assert!(!csv.contains('\r'));
        assert_eq!(lines[1].split(',').count(), 12);
    }
}
