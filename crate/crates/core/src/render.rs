//! Deterministic SVG rendering of curves, charts, and surfaces.
//!
//! Every renderer is a pure function of its numeric inputs: no clock, no
//! locale, no randomness. Identical inputs therefore yield byte-identical
//! SVG. Panels are a fixed 900 x 300 canvas stacked vertically; control
//! limits are dashed lines, out-of-control elements carry the `oc` class,
//! and all tick labels are printed to four significant digits.

use std::fmt::Write as _;


use crate::basis::linspace;
use crate::charts::ChartFrame;
use crate::error::{Error, Result};
use crate::fof::FofModel;
use crate::mfd::Mfd;
use crate::mfpca::PcaModel;
use crate::realtime::PathPoint;

pub const PANEL_WIDTH: f64 = 900.0;
pub const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 42.0;

/// The figure types the renderer knows how to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    Curves,
    Eigenfunctions,
    Charts,
    Contributions,
    MonitorOverlay,
    BetaSurface,
    RealtimePath,
}

impl RenderKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "curves" => RenderKind::Curves,
            "eigenfunctions" => RenderKind::Eigenfunctions,
            "charts" => RenderKind::Charts,
            "contributions" => RenderKind::Contributions,
            "monitor-overlay" => RenderKind::MonitorOverlay,
            "beta-surface" => RenderKind::BetaSurface,
            "realtime-path" => RenderKind::RealtimePath,
            other => return Err(Error::KindMismatch(format!("unknown kind {other}"))),
        })
    }
}

/// Format to four significant digits, deterministically.
pub fn sig4(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-3..4).contains(&exp) {
        let decimals = (3 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // Trim trailing zeros but keep at least one digit.
        if s.contains('.') {
            let t = s.trim_end_matches('0').trim_end_matches('.');
            t.to_string()
        } else {
            s
        }
    } else {
        format!("{v:.3e}")
    }
}

/// Coordinate formatting: fixed precision so output is byte-stable.
fn px(v: f64) -> String {
    format!("{v:.2}")
}

struct Scale {
    lo: f64,
    hi: f64,
    out_lo: f64,
    out_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Scale { lo, hi, out_lo, out_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.out_lo + (v - self.lo) / (self.hi - self.lo) * (self.out_hi - self.out_lo)
    }
}

fn range_of<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = if hi > lo { hi - lo } else { 1.0 };
    (lo - 0.05 * span, hi + 0.05 * span)
}

struct Svg {
    body: String,
    panels: usize,
}

const STYLE: &str = "text{font-family:monospace;font-size:12px;fill:#333}\n\
    .title{font-size:14px}\n\
    .axis{stroke:#333;stroke-width:1;fill:none}\n\
    .grid{stroke:#ddd;stroke-width:0.5}\n\
    .curve{fill:none;stroke-width:1.2}\n\
    .c0{stroke:#1f6fb4}.c1{stroke:#2a9d5c}.c2{stroke:#b07a1f}.c3{stroke:#7a4fb0}\n\
    .c4{stroke:#b04f6f}.c5{stroke:#4fb0a5}\n\
    .ref{fill:none;stroke:#bbbbbb;stroke-width:0.8}\n\
    .limit{stroke:#c23b22;stroke-width:1;stroke-dasharray:6 4;fill:none}\n\
    .stat{fill:none;stroke:#1f6fb4;stroke-width:1.2}\n\
    .pt{fill:#1f6fb4;stroke:none}\n\
    .oc{fill:#c23b22;stroke:#c23b22}\n\
    .bar{fill:#1f6fb4}\n\
    .bar.oc{fill:#c23b22}\n";

impl Svg {
    fn new() -> Self {
        Svg {
            body: String::new(),
            panels: 0,
        }
    }

    fn finish(self) -> String {
        let h = self.panels as f64 * PANEL_HEIGHT;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
             viewBox=\"0 0 {} {}\">\n<style>\n{}</style>\n{}</svg>\n",
            PANEL_WIDTH, h, PANEL_WIDTH, h, STYLE, self.body
        )
    }

    /// Opens a panel; returns (x scale, y scale) for data coordinates.
    fn panel(&mut self, title: &str, xr: (f64, f64), yr: (f64, f64)) -> (Scale, Scale) {
        let top = self.panels as f64 * PANEL_HEIGHT;
        self.panels += 1;
        let sx = Scale::new(xr.0, xr.1, MARGIN_LEFT, PANEL_WIDTH - MARGIN_RIGHT);
        let sy = Scale::new(yr.0, yr.1, top + PANEL_HEIGHT - MARGIN_BOTTOM, top + MARGIN_TOP);
        let _ = writeln!(self.body, "<g class=\"panel\">");
        let _ = writeln!(
            self.body,
            "<rect class=\"axis\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            px(MARGIN_LEFT),
            px(top + MARGIN_TOP),
            px(PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
            px(PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
        );
        let _ = writeln!(
            self.body,
            "<text class=\"title\" x=\"{}\" y=\"{}\">{}</text>",
            px(MARGIN_LEFT),
            px(top + 18.0),
            xml_escape(title)
        );
        // Tick labels at the extremes of each axis.
        for (v, anchor) in [(xr.0, "start"), (xr.1, "end")] {
            let _ = writeln!(
                self.body,
                "<text text-anchor=\"{anchor}\" x=\"{}\" y=\"{}\">{}</text>",
                px(sx.map(v)),
                px(top + PANEL_HEIGHT - MARGIN_BOTTOM + 16.0),
                sig4(v)
            );
        }
        for v in [yr.0, yr.1] {
            let _ = writeln!(
                self.body,
                "<text text-anchor=\"end\" x=\"{}\" y=\"{}\">{}</text>",
                px(MARGIN_LEFT - 6.0),
                px(sy.map(v) + 4.0),
                sig4(v)
            );
        }
        (sx, sy)
    }

    fn close_panel(&mut self) {
        let _ = writeln!(self.body, "</g>");
    }

    fn polyline(&mut self, class: &str, pts: &[(f64, f64)]) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        let _ = writeln!(
            self.body,
            "<polyline class=\"{class}\" points=\"{}\"/>",
            coords.join(" ")
        );
    }

    fn hline(&mut self, class: &str, sx: &Scale, sy: &Scale, y: f64) {
        let _ = writeln!(
            self.body,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            px(sx.out_lo),
            px(sy.map(y)),
            px(sx.out_hi),
            px(sy.map(y))
        );
    }

    fn circle(&mut self, class: &str, x: f64, y: f64, r: f64) {
        let _ = writeln!(
            self.body,
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\"/>",
            px(x),
            px(y),
            px(r)
        );
    }

    fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: Option<&str>) {
        let fill_attr = match fill {
            Some(f) => format!(" fill=\"{f}\""),
            None => String::new(),
        };
        let _ = writeln!(
            self.body,
            "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"{fill_attr}/>",
            px(x),
            px(y),
            px(w),
            px(h)
        );
    }

    fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text class=\"{class}\" text-anchor=\"{anchor}\" x=\"{}\" y=\"{}\">{}</text>",
            px(x),
            px(y),
            xml_escape(s)
        );
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const CURVE_GRID: usize = 200;

/// One panel per variable; every observation drawn as a curve.
pub fn render_curves(mfd: &Mfd) -> Result<String> {
    let (lo, hi) = mfd.basis().domain();
    let grid = linspace(lo, hi, CURVE_GRID);
    let mut svg = Svg::new();
    for p in 0..mfd.n_vars() {
        let vals = mfd.eval_all(p, &grid)?; // grid x n
        let (ylo, yhi) = pad_range(range_of(vals.iter()).0, range_of(vals.iter()).1);
        let (sx, sy) = svg.panel(&mfd.var_names()[p], (lo, hi), (ylo, yhi));
        for i in 0..mfd.n_obs() {
            let pts: Vec<(f64, f64)> = grid
                .iter()
                .enumerate()
                .map(|(g, &t)| (sx.map(t), sy.map(vals[(g, i)])))
                .collect();
            svg.polyline(&format!("curve c{}", i % 6), &pts);
        }
        svg.close_panel();
    }
    Ok(svg.finish())
}

/// One panel per retained component, overlaying the variables.
pub fn render_eigenfunctions(model: &PcaModel, components: &[usize]) -> Result<String> {
    let ef = &model.eigenfunctions;
    let (lo, hi) = ef.basis().domain();
    let grid = linspace(lo, hi, CURVE_GRID);
    let mut svg = Svg::new();
    for &m in components {
        if m >= ef.n_obs() {
            return Err(Error::InvalidConfig(format!(
                "component {m} not available; model keeps {}",
                ef.n_obs()
            )));
        }
        let mut curves = Vec::new();
        let mut lo_v = f64::INFINITY;
        let mut hi_v = f64::NEG_INFINITY;
        for p in 0..ef.n_vars() {
            let v = ef.eval(p, m, &grid)?;
            let (a, b) = range_of(v.iter());
            lo_v = lo_v.min(a);
            hi_v = hi_v.max(b);
            curves.push(v);
        }
        let title = format!(
            "component {} ({} of variance)",
            m + 1,
            sig4(model.var_prop[m] * 100.0) + "%"
        );
        let (sx, sy) = svg.panel(&title, (lo, hi), pad_range(lo_v, hi_v));
        for (p, v) in curves.iter().enumerate() {
            let pts: Vec<(f64, f64)> = grid
                .iter()
                .enumerate()
                .map(|(g, &t)| (sx.map(t), sy.map(v[g])))
                .collect();
            svg.polyline(&format!("curve c{}", p % 6), &pts);
            svg.text(
                &format!("c{}", p % 6),
                sx.out_hi - 6.0,
                sy.out_hi + 14.0 * (p as f64 + 1.0),
                "end",
                &ef.var_names()[p],
            );
        }
        svg.close_panel();
    }
    Ok(svg.finish())
}

fn stat_panel(
    svg: &mut Svg,
    title: &str,
    values: &[f64],
    limit_lo: Option<f64>,
    limit_hi: f64,
    oc: &[bool],
) {
    let n = values.len();
    let (mut vlo, mut vhi) = range_of(values.iter());
    vhi = vhi.max(limit_hi);
    if let Some(l) = limit_lo {
        vlo = vlo.min(l);
    } else {
        vlo = vlo.min(0.0);
    }
    let (ylo, yhi) = pad_range(vlo, vhi);
    let (sx, sy) = svg.panel(title, (1.0, n as f64), (ylo, yhi));
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (sx.map(i as f64 + 1.0), sy.map(v)))
        .collect();
    svg.polyline("stat", &pts);
    svg.hline("limit", &sx, &sy, limit_hi);
    if let Some(l) = limit_lo {
        svg.hline("limit", &sx, &sy, l);
    }
    for (i, &(x, y)) in pts.iter().enumerate() {
        let class = if oc[i] { "pt oc" } else { "pt" };
        svg.circle(class, x, y, 3.0);
    }
    svg.close_panel();
}

/// Stacked statistic panels: T2, SPE, and the response residual when the
/// frame carries one.
pub fn render_charts(frame: &ChartFrame) -> String {
    let mut svg = Svg::new();
    stat_panel(&mut svg, "T2", &frame.t2, None, frame.t2_lim, &frame.oc_t2);
    stat_panel(&mut svg, "SPE", &frame.spe, None, frame.spe_lim, &frame.oc_spe);
    if let (Some(y), Some(lo), Some(hi), Some(oc)) =
        (&frame.y, &frame.y_lo, &frame.y_hi, &frame.oc_y)
    {
        // Limits vary per observation: draw them as their own polylines.
        let n = y.len();
        let (mut vlo, mut vhi) = range_of(y.iter());
        vlo = vlo.min(range_of(lo.iter()).0);
        vhi = vhi.max(range_of(hi.iter()).1);
        let (ylo, yhi) = pad_range(vlo, vhi);
        let (sx, sy) = svg.panel("prediction error", (1.0, n as f64), (ylo, yhi));
        for series in [lo, hi] {
            let pts: Vec<(f64, f64)> = series
                .iter()
                .enumerate()
                .map(|(i, &v)| (sx.map(i as f64 + 1.0), sy.map(v)))
                .collect();
            svg.polyline("limit", &pts);
        }
        let pts: Vec<(f64, f64)> = y
            .iter()
            .enumerate()
            .map(|(i, &v)| (sx.map(i as f64 + 1.0), sy.map(v)))
            .collect();
        svg.polyline("stat", &pts);
        for (i, &(x, yv)) in pts.iter().enumerate() {
            let class = if oc[i] { "pt oc" } else { "pt" };
            svg.circle(class, x, yv, 3.0);
        }
        svg.close_panel();
    }
    svg.finish()
}

fn bar_panel(svg: &mut Svg, title: &str, names: &[String], values: &[f64], limits: &[f64]) {
    let p = values.len();
    let (mut vlo, mut vhi) = range_of(values.iter().chain(limits.iter()));
    vlo = vlo.min(0.0);
    vhi = vhi.max(0.0);
    let (ylo, yhi) = pad_range(vlo, vhi);
    let (sx, sy) = svg.panel(title, (0.0, p as f64), (ylo, yhi));
    let slot = (sx.out_hi - sx.out_lo) / p as f64;
    for j in 0..p {
        let x = sx.map(j as f64) + 0.15 * slot;
        let w = 0.7 * slot;
        let y0 = sy.map(0.0);
        let y1 = sy.map(values[j]);
        let class = if values[j] > limits[j] { "bar oc" } else { "bar" };
        svg.rect(class, x, y0.min(y1), w, (y0 - y1).abs(), None);
        // Per-variable limit rule across the bar slot.
        let yl = sy.map(limits[j]);
        let _ = writeln!(
            svg.body,
            "<line class=\"limit\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            px(x - 0.1 * slot),
            px(yl),
            px(x + w + 0.1 * slot),
            px(yl)
        );
        svg.text(
            "",
            x + w / 2.0,
            sy.out_lo + 16.0,
            "middle",
            &names[j],
        );
    }
    svg.close_panel();
}

/// Two bar panels (T2 and SPE contributions) for one observation.
pub fn render_contributions(frame: &ChartFrame, obs_id: &str) -> Result<String> {
    let i = frame
        .obs_ids
        .iter()
        .position(|o| o == obs_id)
        .ok_or_else(|| Error::UnknownId(obs_id.to_string()))?;
    let p = frame.var_names.len();
    let t2: Vec<f64> = (0..p).map(|j| frame.cont_t2[(i, j)]).collect();
    let spe: Vec<f64> = (0..p).map(|j| frame.cont_spe[(i, j)]).collect();
    let mut svg = Svg::new();
    bar_panel(
        &mut svg,
        &format!("T2 contributions, observation {obs_id}"),
        &frame.var_names,
        &t2,
        &frame.cont_lim_t2,
    );
    bar_panel(
        &mut svg,
        &format!("SPE contributions, observation {obs_id}"),
        &frame.var_names,
        &spe,
        &frame.cont_lim_spe,
    );
    Ok(svg.finish())
}

/// New observations drawn over the reference sample, one panel per variable.
/// Observations listed in `highlight` get the `oc` stroke class.
pub fn render_monitor_overlay(
    reference: &Mfd,
    new: &Mfd,
    highlight: Option<&[bool]>,
) -> Result<String> {
    if reference.var_names() != new.var_names() {
        return Err(Error::BasisMismatch);
    }
    if let Some(h) = highlight {
        if h.len() != new.n_obs() {
            return Err(Error::ShapeMismatch(format!(
                "{} highlight flags for {} observations",
                h.len(),
                new.n_obs()
            )));
        }
    }
    let (lo, hi) = new.basis().domain();
    let grid = linspace(lo, hi, CURVE_GRID);
    let mut svg = Svg::new();
    for p in 0..new.n_vars() {
        let rv = reference.eval_all(p, &grid)?;
        let nv = new.eval_all(p, &grid)?;
        let (a1, b1) = range_of(rv.iter());
        let (a2, b2) = range_of(nv.iter());
        let (ylo, yhi) = pad_range(a1.min(a2), b1.max(b2));
        let (sx, sy) = svg.panel(&new.var_names()[p], (lo, hi), (ylo, yhi));
        for i in 0..reference.n_obs() {
            let pts: Vec<(f64, f64)> = grid
                .iter()
                .enumerate()
                .map(|(g, &t)| (sx.map(t), sy.map(rv[(g, i)])))
                .collect();
            svg.polyline("ref", &pts);
        }
        for i in 0..new.n_obs() {
            let class = match highlight {
                Some(h) if h[i] => "curve oc",
                _ => "curve c0",
            };
            let pts: Vec<(f64, f64)> = grid
                .iter()
                .enumerate()
                .map(|(g, &t)| (sx.map(t), sy.map(nv[(g, i)])))
                .collect();
            svg.polyline(class, &pts);
        }
        svg.close_panel();
    }
    Ok(svg.finish())
}

fn heat_color(v: f64, lo: f64, hi: f64) -> String {
    // Symmetric blue-white-red map anchored at zero when the range spans it.
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let t = ((v - lo) / span).clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (
            (47.0 + u * 208.0) as u8,
            (84.0 + u * 171.0) as u8,
            (150.0 + u * 105.0) as u8,
        )
    } else {
        let u = (t - 0.5) / 0.5;
        (
            255u8,
            (255.0 - u * 180.0) as u8,
            (255.0 - u * 200.0) as u8,
        )
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

const SURF_CELLS: usize = 50;

/// Heat-map panel per covariate of the estimated coefficient surface.
pub fn render_beta_surface(model: &FofModel) -> Result<String> {
    let surfaces = model.beta_surface(SURF_CELLS, SURF_CELLS)?;
    let (slo, shi) = range_of(surfaces.iter().flat_map(|m| m.iter()));
    let (vlo, vhi) = if slo < 0.0 && shi > 0.0 {
        let a = slo.abs().max(shi);
        (-a, a)
    } else {
        (slo, shi)
    };
    let names = model.pca_x.eigenfunctions.var_names();
    let mut svg = Svg::new();
    for (p, surf) in surfaces.iter().enumerate() {
        let (sx, sy) = svg.panel(
            &format!("coefficient surface, {} (range {} to {})", names[p], sig4(slo), sig4(shi)),
            (0.0, 1.0),
            (0.0, 1.0),
        );
        let cw = (sx.out_hi - sx.out_lo) / SURF_CELLS as f64;
        let ch = (sy.out_lo - sy.out_hi) / SURF_CELLS as f64;
        for a in 0..SURF_CELLS {
            for b in 0..SURF_CELLS {
                let x = sx.out_lo + a as f64 * cw;
                let y = sy.out_hi + (SURF_CELLS - 1 - b) as f64 * ch;
                svg.rect("", x, y, cw + 0.1, ch + 0.1, Some(&heat_color(surf[(a, b)], vlo, vhi)));
            }
        }
        svg.close_panel();
    }
    Ok(svg.finish())
}

/// One panel per statistic: the statistic and its limit against the domain
/// fraction, for a single observation.
pub fn render_realtime_path(points: &[PathPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut stats: Vec<String> = Vec::new();
    for p in points {
        if !stats.contains(&p.statistic) {
            stats.push(p.statistic.clone());
        }
    }
    let mut svg = Svg::new();
    for stat in &stats {
        let sel: Vec<&PathPoint> = points.iter().filter(|p| &p.statistic == stat).collect();
        let (klo, khi) = range_of(sel.iter().map(|p| &p.k));
        let (mut vlo, mut vhi) = range_of(sel.iter().map(|p| &p.value));
        let (llo, lhi) = range_of(sel.iter().map(|p| &p.limit));
        vlo = vlo.min(llo).min(0.0);
        vhi = vhi.max(lhi);
        let (ylo, yhi) = pad_range(vlo, vhi);
        let (sx, sy) = svg.panel(stat, (klo, khi), (ylo, yhi));
        let lim_pts: Vec<(f64, f64)> =
            sel.iter().map(|p| (sx.map(p.k), sy.map(p.limit))).collect();
        svg.polyline("limit", &lim_pts);
        let val_pts: Vec<(f64, f64)> =
            sel.iter().map(|p| (sx.map(p.k), sy.map(p.value))).collect();
        svg.polyline("stat", &val_pts);
        for (p, &(x, y)) in sel.iter().zip(val_pts.iter()) {
            let class = if p.oc { "pt oc" } else { "pt" };
            svg.circle(class, x, y, 3.0);
        }
        svg.close_panel();
    }
    Ok(svg.finish())
}
