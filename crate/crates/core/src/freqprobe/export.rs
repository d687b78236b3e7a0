use std::fmt::Write as _;
use std::io::{self, Write};

use super::sweep::{ScalePoint, SensitivityCurve, SweepOutcome};

pub const CURVE_HEADER: &str = "level,class_id,sample_id,pass_type,radius,n_correct,n_total,accuracy";

/// Shortest rendering with at most 6 significant digits.
pub fn format_radius(r: f64) -> String {
    if r == 0.0 || !r.is_finite() {
        return format!("{r}");
    }
    let magnitude = r.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{r:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_curves_csv<W: Write>(mut out: W, curves: &[SensitivityCurve]) -> io::Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for c in curves {
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.level.as_str(),
                opt(c.class_id),
                opt(c.sample_id),
                c.pass.as_str(),
                format_radius(p.radius),
                p.n_correct,
                p.n_total,
                p.accuracy()
            )?;
        }
    }
    Ok(())
}

/// `sample_id,radius,label,predicted` for per-sample inspection.
pub fn write_predictions_csv<W: Write>(mut out: W, outcome: &SweepOutcome, labels: &[usize]) -> io::Result<()> {
    writeln!(out, "sample_id,radius,label,predicted")?;
    for (&radius, preds) in outcome.radii.iter().zip(&outcome.predictions) {
        for (i, (&p, &y)) in preds.iter().zip(labels).enumerate() {
            let p = if p == usize::MAX { "none".to_owned() } else { p.to_string() };
            writeln!(out, "{i},{},{y},{p}", format_radius(radius))?;
        }
    }
    Ok(())
}

pub fn write_scale_summary_csv<W: Write>(mut out: W, points: &[ScalePoint]) -> io::Result<()> {
    writeln!(out, "factor,half_max_radius")?;
    for p in points {
        let h = p.half_max.map(|h| h.to_string()).unwrap_or_else(|| "undefined".into());
        writeln!(out, "{},{h}", format_radius(p.factor))?;
    }
    Ok(())
}

/// Minimal line plot of accuracy against radius.
pub fn curve_svg(curve: &SensitivityCurve) -> String {
    let (w, h, pad) = (480.0, 320.0, 40.0);
    let rmax = curve.points.iter().map(|p| p.radius).fold(0.0f64, f64::max).max(1e-9);
    let mut path = String::new();
    for (i, p) in curve.points.iter().enumerate() {
        let x = pad + p.radius / rmax * (w - 2.0 * pad);
        let y = h - pad - p.accuracy() * (h - 2.0 * pad);
        let _ = write!(path, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
    }
    let mut title = format!("{} {}-pass", curve.level.as_str(), curve.pass.as_str());
    if let Some(c) = curve.class_id {
        let _ = write!(title, " class {c}");
    }
    if let Some(s) = curve.sample_id {
        let _ = write!(title, " sample {s}");
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
            "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            "<line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<text x=\"{pad}\" y=\"24\" font-size=\"14\">{title}</text>\n",
            "<text x=\"{r}\" y=\"{tb}\" font-size=\"11\" text-anchor=\"end\">radius {rmax}</text>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{path}\"/>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        pad = pad,
        b = h - pad,
        r = w - pad,
        tb = h - 12.0,
        title = title,
        rmax = format_radius(rmax),
        path = path,
    )
}
