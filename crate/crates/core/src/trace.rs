//! Per-iteration traces and their CSV form.
//!
//! Columns: `t`, optionally `x_1..x_n` (1-based, like problem files),
//! `step_inf`, `residual_inf`, `err_weighted`, `bound_value`, `grid_points`. Missing values are empty
//! cells.

use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: Vec<f64>,
    /// `‖x^(t) − x^(t−1)‖∞`
    pub step_inf: f64,
    /// `‖Ax − b‖∞` for quadratics, `‖∇F(x)‖∞` otherwise.
    pub residual_inf: f64,
    /// `max_r |x_r − x*_r| / w_r`
    pub err_weighted: Option<f64>,
    pub bound_value: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub x0: Vec<f64>,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_x(&self) -> &[f64] {
        self.rows.last().map_or(&self.x0, |r| &r.x)
    }

    /// Fills `err_weighted` from a known minimiser and weights.
    pub fn attach_error(&mut self, x_star: &[f64], w: &[f64]) {
        for row in &mut self.rows {
            row.err_weighted = Some(weighted_error(&row.x, x_star, w));
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, full_x: bool) -> std::io::Result<()> {
        let n = self.x0.len();
        let mut header = vec!["t".to_string()];
        if full_x {
            header.extend((1..=n).map(|i| format!("x_{i}")));
        }
        header.extend(
            ["step_inf", "residual_inf", "err_weighted", "bound_value", "grid_points"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(out, "{}", header.join(","))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        for r in &self.rows {
            let mut cells = vec![r.t.to_string()];
            if full_x {
                cells.extend(r.x.iter().map(|v| format!("{v:e}")));
            }
            cells.push(format!("{:e}", r.step_inf));
            cells.push(format!("{:e}", r.residual_inf));
            cells.push(opt(r.err_weighted));
            cells.push(opt(r.bound_value));
            cells.push(r.grid_points.map_or(String::new(), |g| g.to_string()));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn weighted_error(x: &[f64], x_star: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(x_star)
        .zip(w)
        .fold(0.0, |m, ((a, b), wi)| m.max((a - b).abs() / wi))
}
