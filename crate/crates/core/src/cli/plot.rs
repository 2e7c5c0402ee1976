//! Plot data: a tidy CSV for external tools and a minimal static SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::lti::Signal;
use crate::stl::{Predicate, StlFormula};

/// An output band read off a top-level `G[a,b]` whose body only bounds
/// `y1`. With `on_abs` the limits apply to `|y1|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub from: usize,
    pub to: usize,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub on_abs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bound {
    Low(f64),
    High(f64),
    AbsLow(f64),
    AbsHigh(f64),
}

/// `(coefficient of y1, offset)` for a plain predicate on `y1` alone.
fn on_y1(p: &Predicate) -> Option<(f64, f64)> {
    let c = *p.coeffs.first()?;
    (c != 0.0 && p.coeffs[1..].iter().all(|&a| a == 0.0) && p.schedules.is_empty()).then_some((c, p.offset))
}

fn plain(p: &Predicate) -> Option<Bound> {
    let (c, off) = on_y1(p)?;
    Some(if c > 0.0 { Bound::Low(-off / c) } else { Bound::High(off / -c) })
}

/// `(y - r > 0, -y - r > 0)` or `(r - y > 0, y + r > 0)` mirrored pairs.
fn mirrored(a: &StlFormula, b: &StlFormula) -> Option<(f64, f64)> {
    let (StlFormula::Predicate(p), StlFormula::Predicate(q)) = (a, b) else { return None };
    let ((c1, o1), (c2, o2)) = (on_y1(p)?, on_y1(q)?);
    (c1 == -c2 && o1 == o2).then_some((c1.abs(), o1))
}

fn collect(f: &StlFormula, out: &mut Vec<Bound>) -> Option<()> {
    match f {
        StlFormula::Predicate(p) => out.push(plain(p)?),
        StlFormula::Or(fs) if fs.len() == 2 => {
            let (c, off) = mirrored(&fs[0], &fs[1])?;
            if off >= 0.0 {
                return None;
            }
            out.push(Bound::AbsLow(-off / c));
        }
        StlFormula::And(fs) => {
            if let [a, b] = fs.as_slice() {
                if let Some((c, off)) = mirrored(a, b) {
                    if off > 0.0 {
                        out.push(Bound::AbsHigh(off / c));
                        return Some(());
                    }
                }
            }
            for g in fs {
                collect(g, out)?;
            }
        }
        _ => return None,
    }
    Some(())
}

/// The band drawn for `phi`, if its shape is simple enough to have one.
pub fn spec_band(phi: &StlFormula) -> Option<Band> {
    let StlFormula::Always(a, b, body) = phi else { return None };
    let mut bounds = Vec::new();
    collect(body, &mut bounds)?;
    let on_abs = bounds.iter().any(|b| matches!(b, Bound::AbsLow(_) | Bound::AbsHigh(_)));
    if on_abs && bounds.iter().any(|b| matches!(b, Bound::Low(_) | Bound::High(_))) {
        return None;
    }
    let mut band = Band { from: *a, to: *b, low: None, high: None, on_abs };
    for bound in bounds {
        match bound {
            Bound::Low(v) | Bound::AbsLow(v) => band.low = Some(band.low.map_or(v, |l: f64| l.max(v))),
            Bound::High(v) | Bound::AbsHigh(v) => band.high = Some(band.high.map_or(v, |h: f64| h.min(v))),
        }
    }
    Some(band)
}

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

/// Everything that goes into one plot.
#[derive(Debug, Clone, Default)]
pub struct PlotData {
    pub u: Option<Signal>,
    pub y_pred: Option<Signal>,
    pub y_true: Option<Signal>,
    pub band: Option<Band>,
    /// Reference temperature `occ_t · comf_t`.
    pub t_ref: Option<Vec<f64>>,
    /// Add Celsius copies of the output and reference columns.
    pub celsius: bool,
}

impl PlotData {
    fn len(&self) -> usize {
        [&self.u, &self.y_pred, &self.y_true].iter().filter_map(|s| s.as_ref().map(Signal::len)).max().unwrap_or(0)
    }

    /// Tidy CSV: one row per time step, empty cells where a series has no
    /// value.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
        let mut add_signal = |name: &str, s: &Option<Signal>, celsius: bool| {
            let Some(s) = s else { return };
            for c in 0..s.dim() {
                let conv = |v: f64| if celsius { fahrenheit_to_celsius(v) } else { v };
                let suffix = if celsius { "_c" } else { "" };
                let values = (0..n).map(|t| (t < s.len()).then(|| conv(s.sample(t)[c]))).collect();
                columns.push((format!("{name}{}{suffix}", c + 1), values));
            }
        };
        add_signal("u", &self.u, false);
        add_signal("y_pred", &self.y_pred, false);
        add_signal("y_true", &self.y_true, false);
        if self.celsius {
            add_signal("y_pred", &self.y_pred, true);
            add_signal("y_true", &self.y_true, true);
        }
        if let Some(b) = &self.band {
            let inside = |t: usize| (b.from..=b.to).contains(&t);
            columns.push(("spec_band_low".into(), (0..n).map(|t| b.low.filter(|_| inside(t))).collect()));
            columns.push(("spec_band_high".into(), (0..n).map(|t| b.high.filter(|_| inside(t))).collect()));
        }
        if let Some(r) = &self.t_ref {
            columns.push(("T_ref".into(), (0..n).map(|t| r.get(t).copied()).collect()));
            if self.celsius {
                columns.push(("T_ref_c".into(), (0..n).map(|t| r.get(t).map(|v| fahrenheit_to_celsius(*v))).collect()));
            }
        }
        let mut out = std::iter::once("t").chain(columns.iter().map(|(h, _)| h.as_str())).collect::<Vec<_>>().join(",");
        out.push('\n');
        for t in 0..n {
            let mut row = vec![t.to_string()];
            row.extend(columns.iter().map(|(_, v)| v[t].map_or(String::new(), |v| v.to_string())));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Two stacked panels: outputs (with band or reference) and inputs.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 220.0;
        const PAD: f64 = 40.0;
        let n = self.len().max(2);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" font-family="sans-serif" font-size="11">"#,
            2.0 * H
        );
        let panel = |svg: &mut String,
                     top: f64,
                     title: &str,
                     lines: &[(&str, Vec<f64>)],
                     band: Option<(usize, usize, f64, f64)>| {
            let mut vals: Vec<f64> = lines.iter().flat_map(|(_, v)| v.iter().copied()).collect();
            if let Some((_, _, lo, hi)) = band {
                vals.extend([lo, hi]);
            }
            let (mut lo, mut hi) =
                vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (lo, hi) = (0.0, 1.0);
            }
            if hi - lo < 1e-9 {
                (lo, hi) = (lo - 1.0, hi + 1.0);
            }
            let sx = |t: f64| PAD + t / (n - 1) as f64 * (W - 2.0 * PAD);
            let sy = |v: f64| top + H - PAD / 2.0 - (v - lo) / (hi - lo) * (H - PAD * 1.5);
            let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{title}</text>"#, top + 14.0);
            let _ = writeln!(
                svg,
                r##"<rect x="{PAD}" y="{}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
                top + PAD / 2.0 + 2.0,
                W - 2.0 * PAD,
                H - PAD * 1.5
            );
            let _ = writeln!(
                svg,
                r#"<text x="4" y="{}">{hi:.3}</text><text x="4" y="{}">{lo:.3}</text>"#,
                sy(hi) + 4.0,
                sy(lo)
            );
            if let Some((a, b, blo, bhi)) = band {
                let _ = writeln!(
                    svg,
                    r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#2ca02c" fill-opacity="0.2" stroke="#2ca02c"/>"##,
                    sx(a as f64),
                    sy(bhi),
                    (sx(b as f64) - sx(a as f64)).max(1.0),
                    (sy(blo) - sy(bhi)).max(1.0)
                );
            }
            let colors = ["#1f77b4", "#d62728", "#ff7f0e", "#9467bd"];
            for (i, (name, v)) in lines.iter().enumerate() {
                let pts: Vec<String> =
                    v.iter().enumerate().map(|(t, &y)| format!("{:.2},{:.2}", sx(t as f64), sy(y))).collect();
                let color = colors[i % colors.len()];
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
                    W - PAD - 90.0,
                    top + 14.0 + 12.0 * i as f64
                );
            }
        };
        let first = |s: &Option<Signal>| s.as_ref().map(|s| s.channel(0));
        let mut outputs = Vec::new();
        if let Some(v) = first(&self.y_pred) {
            outputs.push(("y predicted", v));
        }
        if let Some(v) = first(&self.y_true) {
            outputs.push(("y closed loop", v));
        }
        if let Some(r) = &self.t_ref {
            outputs.push(("T_ref", r.clone()));
        }
        // Bands on |y| are drawn on the side the outputs are on.
        let band = self.band.as_ref().and_then(|b| {
            let (lo, hi) = (b.low.unwrap_or(f64::NAN), b.high.unwrap_or(f64::NAN));
            if !(lo.is_finite() && hi.is_finite()) {
                return None;
            }
            let negative = b.on_abs
                && outputs.first().is_some_and(|(_, v)| {
                    v.get(b.from..=b.to.min(v.len().saturating_sub(1))).is_some_and(|w| w.iter().sum::<f64>() < 0.0)
                });
            Some(if negative { (b.from, b.to, -hi, -lo) } else { (b.from, b.to, lo, hi) })
        });
        panel(&mut svg, 0.0, "outputs", &outputs, band);
        let inputs: Vec<(&str, Vec<f64>)> = first(&self.u).map(|v| vec![("u", v)]).unwrap_or_default();
        panel(&mut svg, H, "inputs", &inputs, None);
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_svg())?;
        Ok(())
    }
}
