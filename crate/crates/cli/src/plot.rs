//! Static SVG line plots with error bars.
//!
//! Series are computed from per-trial records only, so a plot can be
//! regenerated from the trials CSV alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use airfc::eval::{Stat, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Nmse,
    Objective,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Nmse, Metric::Objective];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Nmse => "nmse",
            Metric::Objective => "objective",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "OTA accuracy",
            Metric::Nmse => "imitation NMSE",
            Metric::Objective => "final objective",
        }
    }

    fn value(self, t: &TrialRecord) -> f64 {
        match self {
            Metric::Accuracy => t.accuracy,
            Metric::Nmse => t.nmse,
            Metric::Objective => t.objective,
        }
    }

    fn log_scale(self) -> bool {
        !matches!(self, Metric::Accuracy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub stat: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

/// Total-order key for grid coordinates other than K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CurveKey {
    groups: usize,
    power_bits: u64,
    area_bits: u64,
    direct: bool,
}

/// One series per combination of (L, relay power, area, direct link), with
/// x = K. Only successful trials contribute; the label names just the
/// coordinates that vary across the records.
pub fn series_from_trials(trials: &[TrialRecord], metric: Metric) -> Vec<Series> {
    let mut curves: BTreeMap<CurveKey, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.ok) {
        let key = CurveKey {
            groups: t.groups,
            power_bits: t.relay_power_w.to_bits(),
            area_bits: t.area_length_m.to_bits(),
            direct: t.direct_link,
        };
        curves
            .entry(key)
            .or_default()
            .entry(t.relays_per_group)
            .or_default()
            .push(metric.value(t));
    }
    let varies = |f: fn(&CurveKey) -> u64| {
        let mut vals: Vec<u64> = curves.keys().map(f).collect();
        vals.dedup();
        vals.len() > 1
    };
    let show_power = varies(|k| k.power_bits);
    let show_area = varies(|k| k.area_bits);
    let show_direct = varies(|k| k.direct as u64);
    curves
        .into_iter()
        .map(|(key, by_k)| {
            let mut label = format!("L={}", key.groups);
            if show_power {
                let _ = write!(label, ", P={} W", f64::from_bits(key.power_bits));
            }
            if show_area {
                let _ = write!(label, ", D={} m", f64::from_bits(key.area_bits));
            }
            if show_direct {
                label.push_str(if key.direct { ", direct" } else { ", blocked" });
            }
            let points = by_k
                .into_iter()
                .map(|(k, v)| SeriesPoint {
                    x: k as f64,
                    stat: Stat::of(&v),
                })
                .collect();
            Series { label, points }
        })
        .collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let vals: Vec<f64> = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .collect();
        if vals.is_empty() {
            return Axis {
                lo: if log { 1e-3 } else { 0.0 },
                hi: 1.0,
                log,
            };
        }
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(*v), b.max(*v))
            });
        if log {
            lo = 10f64.powf(lo.log10().floor());
            hi = 10f64.powf(hi.log10().ceil());
            if lo == hi {
                hi = lo * 10.0;
            }
        } else {
            let pad = if hi > lo {
                0.05 * (hi - lo)
            } else {
                0.05 * hi.abs().max(1e-3)
            };
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.max(self.lo * 1e-3).log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (
                self.lo.log10().round() as i32,
                self.hi.log10().round() as i32,
            );
            (a..=b).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=5)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0)
                .collect()
        }
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the series as SVG. `reference` draws a dashed horizontal line
/// (used for the digital baseline accuracy).
pub fn render_svg(
    title: &str,
    metric: Metric,
    series: &[Series],
    reference: Option<(&str, f64)>,
) -> String {
    let log = metric.log_scale();
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.x))
        .collect();
    let x_axis = {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if xs.is_empty() {
            Axis {
                lo: 0.0,
                hi: 1.0,
                log: false,
            }
        } else if lo == hi {
            Axis {
                lo: lo - 1.0,
                hi: hi + 1.0,
                log: false,
            }
        } else {
            let pad = 0.05 * (hi - lo);
            Axis {
                lo: lo - pad,
                hi: hi + pad,
                log: false,
            }
        }
    };
    let ys = series
        .iter()
        .flat_map(|s| {
            s.points.iter().flat_map(|p| {
                [
                    p.stat.mean - p.stat.std,
                    p.stat.mean + p.stat.std,
                    p.stat.mean,
                ]
            })
        })
        .chain(reference.map(|r| r.1));
    let y_axis = Axis::fit(ys, log);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x_axis.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - y_axis.frac(y).clamp(-0.05, 1.05)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in y_axis.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t, log)
        );
    }
    let mut kx: Vec<f64> = xs.clone();
    kx.sort_by(f64::total_cmp);
    kx.dedup();
    for x in kx {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            px(x),
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">relays per group K</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        metric.label()
    );

    let mut legend_y = TOP + 10.0;
    let legend_x = LEFT + pw + 12.0;
    if let Some((label, value)) = reference {
        let y = py(value);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            legend_x + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            legend_x + 26.0,
            legend_y + 4.0,
            escape(label)
        );
        legend_y += 18.0;
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.stat.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for p in &ser.points {
            let (x, y0, y1) = (
                px(p.x),
                py(p.stat.mean - p.stat.std),
                py(p.stat.mean + p.stat.std),
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{color}"/>"#
            );
            for y in [y0, y1] {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}"/>"#,
                    x - 4.0,
                    x + 4.0
                );
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                py(p.stat.mean)
            );
        }
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="2"/>"#,
            legend_x + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            legend_x + 26.0,
            legend_y + 4.0,
            escape(&ser.label)
        );
        legend_y += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(groups: usize, k: usize, acc: f64, ok: bool) -> TrialRecord {
        TrialRecord {
            point: 0,
            trial: 0,
            seed: 0,
            groups,
            relays_per_group: k,
            relay_power_w: 1.0,
            area_length_m: 200.0,
            direct_link: false,
            ok,
            nmse: 0.1,
            accuracy: acc,
            imitation_error: 0.0,
            noise_penalty: 0.0,
            objective: 1.0,
            effective_snr_db: 0.0,
            iterations: 1,
            converged: true,
            max_violation: 0.0,
            error: String::new(),
        }
    }

    #[test]
    fn series_group_by_l_and_sort_by_k() {
        let trials = vec![
            rec(2, 8, 0.8, true),
            rec(1, 8, 0.5, true),
            rec(1, 4, 0.4, true),
            rec(1, 4, 0.6, true),
            rec(1, 4, 0.0, false),
        ];
        let s = series_from_trials(&trials, Metric::Accuracy);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, "L=1");
        assert_eq!(s[0].points.len(), 2);
        assert_eq!(s[0].points[0].x, 4.0);
        assert!((s[0].points[0].stat.mean - 0.5).abs() < 1e-15);
        assert_eq!(s[1].label, "L=2");
    }

    #[test]
    fn svg_has_series_and_dashed_baseline() {
        let trials: Vec<_> = (1..=3)
            .flat_map(|l| [4, 8, 16].map(|k| rec(l, k, 0.5 + 0.01 * k as f64, true)))
            .collect();
        let s = series_from_trials(&trials, Metric::Accuracy);
        let svg = render_svg("t", Metric::Accuracy, &s, Some(("digital", 0.9)));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(
            svg,
            render_svg("t", Metric::Accuracy, &s, Some(("digital", 0.9)))
        );
    }
}
