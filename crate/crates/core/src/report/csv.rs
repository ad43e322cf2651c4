//! `axis_value,contrast,score` tables. Floats are written in shortest
//! round-trip form, so a surface read back is bit-identical. Masked cells
//! have an empty score.

use crate::evaluation::ResponseSurface;
use crate::stimgen::TestId;

pub const HEADER: &str = "axis_value,contrast,score";

pub fn surface_to_csv(s: &ResponseSurface) -> String {
    let mut out = String::with_capacity(32 * s.axis_values.len() * s.contrasts.len());
    out.push_str(HEADER);
    out.push('\n');
    for (i, a) in s.axis_values.iter().enumerate() {
        for (j, c) in s.contrasts.iter().enumerate() {
            match s.scores[i][j] {
                Some(q) => out.push_str(&format!("{a:?},{c:?},{q:?}\n")),
                None => out.push_str(&format!("{a:?},{c:?},\n")),
            }
        }
    }
    out
}

/// Rows must cover the full axis × contrast grid in axis-major order.
pub fn surface_from_csv(text: &str, test_id: TestId, metric: &str, higher_is_better: bool) -> Result<ResponseSurface, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(format!("expected header '{HEADER}'")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(format!("line {}: expected 3 fields", n + 1));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1));
        let score = if f[2].trim().is_empty() { None } else { Some(num(f[2])?) };
        rows.push((num(f[0])?, num(f[1])?, score));
    }
    let mut axis: Vec<f64> = Vec::new();
    for r in &rows {
        if axis.last().map_or(true, |&a| a.to_bits() != r.0.to_bits()) {
            axis.push(r.0);
        }
    }
    if axis.is_empty() || rows.len() % axis.len() != 0 {
        return Err("rows do not form a full grid".into());
    }
    let nc = rows.len() / axis.len();
    let contrasts: Vec<f64> = rows[..nc].iter().map(|r| r.1).collect();
    for (k, r) in rows.iter().enumerate() {
        if r.0.to_bits() != axis[k / nc].to_bits() || r.1.to_bits() != contrasts[k % nc].to_bits() {
            return Err(format!("row {} breaks the axis-major grid order", k + 2));
        }
    }
    let s = ResponseSurface::from_fn(test_id, metric, higher_is_better, axis, contrasts, |i, j| rows[i * nc + j].2);
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}
