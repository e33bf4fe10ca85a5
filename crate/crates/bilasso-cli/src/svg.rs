//! Minimal static SVG emitters for scatter and trace plots. Deliberately
//! tiny: fixed canvas, automatic axis ranges, no styling options.

use std::path::Path;

use anyhow::Result;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 40.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi == lo {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn sx(v: f64, lo: f64, hi: f64) -> f64 {
    PAD + (v - lo) / (hi - lo) * (W - 2.0 * PAD)
}

fn sy(v: f64, lo: f64, hi: f64) -> f64 {
    H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD)
}

fn frame(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    )
}

pub fn write_scatter(path: &Path, title: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let (xlo, xhi) = range(xs.iter().copied());
    let (ylo, yhi) = range(ys.iter().copied());
    let mut s = frame(title);
    for (&x, &y) in xs.iter().zip(ys) {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n",
            sx(x, xlo, xhi),
            sy(y, ylo, yhi)
        ));
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_traces(path: &Path, title: &str, traces: &[Vec<f64>]) -> Result<()> {
    let (ylo, yhi) = range(traces.iter().flatten().copied());
    let xmax = traces.iter().map(|t| t.len()).max().unwrap_or(1).max(2) as f64 - 1.0;
    let mut s = frame(title);
    let colors = ["steelblue", "firebrick", "seagreen", "darkorange", "purple"];
    for (t, trace) in traces.iter().enumerate() {
        let pts: Vec<String> = trace
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", sx(i as f64, 0.0, xmax), sy(v, ylo, yhi)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>\n",
            pts.join(" "),
            colors[t % colors.len()]
        ));
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}
