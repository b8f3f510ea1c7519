//! Trace CSV, SVG chart and float formatting.

use std::fmt::Write as _;
use std::io::Write;

use dpminimax::RoundRecord;

use crate::error::CliResult;

pub const TRACE_HEADER: [&str; 6] = ["round", "grad_phi_norm", "loss", "noise_x_norm", "c2r", "wallclock_ms"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> CliResult<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(TRACE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, r: &RoundRecord) -> CliResult<()> {
        self.inner.write_record([
            r.round.to_string(),
            fmt_opt(r.grad_phi_norm),
            fmt_opt(r.loss),
            fmt_f64(r.noise_x_norm),
            fmt_opt(r.c2r),
            fmt_f64(r.wallclock_ms),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Line chart of `log₁₀ ‖∇Φ(x_r)‖` against the round, one polyline per seed.
/// Returns `None` when no trace carries the metric.
pub fn render_svg(traces: &[(u64, &[RoundRecord])], title: &str) -> Option<String> {
    let series: Vec<(u64, Vec<(f64, f64)>)> = traces
        .iter()
        .map(|(seed, rows)| {
            let pts = rows
                .iter()
                .filter_map(|r| {
                    r.grad_phi_norm
                        .filter(|g| *g > 0.0 && g.is_finite())
                        .map(|g| (r.round as f64, g.log10()))
                })
                .collect();
            (*seed, pts)
        })
        .filter(|(_, p): &(u64, Vec<(f64, f64)>)| !p.is_empty())
        .collect();
    if series.is_empty() {
        return None;
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">round</text>"#,
        w / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">log10 grad_phi_norm</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (v, anchor, x, y) in [
        (x0, "middle", sx(x0), h - pad + 15.0),
        (x1, "middle", sx(x1), h - pad + 15.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="10">{v}</text>"#
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{v:.2}</text>"#,
            pad - 4.0,
            sy(v) + 3.0
        );
    }
    for (i, (seed, pts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1"><title>seed {seed}</title></path>"#,
            COLORS[i % COLORS.len()]
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(round: usize, g: Option<f64>) -> RoundRecord {
        RoundRecord {
            round,
            grad_phi_norm: g,
            loss: Some(0.5),
            noise_x_norm: 0.0,
            noise_x_std: 0.0,
            c2r: None,
            estimator_norm: 0.0,
            clipped: false,
            wallclock_ms: 0.0,
        }
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456789.12345679, -2.5e17] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_rows_leave_missing_cells_empty() {
        let mut buf = Vec::new();
        let mut w = TraceWriter::new(&mut buf).unwrap();
        w.row(&row(0, None)).unwrap();
        w.finish().unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "round,grad_phi_norm,loss,noise_x_norm,c2r,wallclock_ms");
        assert_eq!(
            lines[1],
            "0,,5.0000000000000000e-1,0.0000000000000000e0,,0.0000000000000000e0"
        );
    }

    #[test]
    fn svg_has_one_path_per_seed() {
        let a = vec![row(0, Some(1.0)), row(1, Some(0.1))];
        let b = vec![row(0, Some(2.0)), row(1, Some(0.5))];
        let svg = render_svg(&[(0, &a), (1, &b)], "t<1>").unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<title>seed").count(), 2);
        assert!(svg.contains("t&lt;1&gt;"));
        assert!(render_svg(&[(0, &[row(0, None)][..])], "x").is_none());
    }
}
