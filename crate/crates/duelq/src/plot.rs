//! Dependency-free SVG line charts for metrics and evaluation curves.

use std::io;
use std::path::Path;

use crate::harness::artifacts::{csv_header, read_curve_csv, read_metrics_csv};

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 44.0;

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    points: Vec<(f64, f64)>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.3e}")
    } else {
        format!("{v:.2}")
    }
}

fn render_panel(panel: &Panel, x_off: f64, out: &mut String) {
    use std::fmt::Write;
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let left = x_off + MARGIN_L;
    let top = MARGIN_T;

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &panel.points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if panel.points.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }

    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| top + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    writeln!(
        out,
        r#"  <text x="{:.1}" y="20" font-size="14" font-family="monospace">{}</text>"#,
        left,
        xml_escape(&panel.title)
    )
    .unwrap();
    // axes
    writeln!(
        out,
        r#"  <line x1="{l:.1}" y1="{t:.1}" x2="{l:.1}" y2="{b:.1}" stroke="black" stroke-width="1"/>"#,
        l = left,
        t = top,
        b = top + plot_h
    )
    .unwrap();
    writeln!(
        out,
        r#"  <line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="black" stroke-width="1"/>"#,
        l = left,
        b = top + plot_h,
        r = left + plot_w
    )
    .unwrap();
    // zero line when the y-range spans it
    if y_min < 0.0 && y_max > 0.0 {
        writeln!(
            out,
            r##"  <line x1="{l:.1}" y1="{y:.1}" x2="{r:.1}" y2="{y:.1}" stroke="#999999" stroke-width="0.5" stroke-dasharray="4 3"/>"##,
            l = left,
            r = left + plot_w,
            y = sy(0.0)
        )
        .unwrap();
    }
    // tick labels
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="10" font-family="monospace" text-anchor="end">{v}</text>"#,
        x = left - 4.0,
        y = top + 4.0,
        v = fmt_tick(y_max)
    )
    .unwrap();
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="10" font-family="monospace" text-anchor="end">{v}</text>"#,
        x = left - 4.0,
        y = top + plot_h + 4.0,
        v = fmt_tick(y_min)
    )
    .unwrap();
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="10" font-family="monospace">{v}</text>"#,
        x = left,
        y = top + plot_h + 16.0,
        v = fmt_tick(x_min)
    )
    .unwrap();
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="10" font-family="monospace" text-anchor="end">{v}</text>"#,
        x = left + plot_w,
        y = top + plot_h + 16.0,
        v = fmt_tick(x_max)
    )
    .unwrap();
    // axis labels
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="11" font-family="monospace" text-anchor="middle">{v}</text>"#,
        x = left + plot_w / 2.0,
        y = top + plot_h + 32.0,
        v = xml_escape(&panel.x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"  <text x="{x:.1}" y="{y:.1}" font-size="11" font-family="monospace" text-anchor="middle" transform="rotate(-90 {x:.1} {y:.1})">{v}</text>"#,
        x = x_off + 14.0,
        y = top + plot_h / 2.0,
        v = xml_escape(&panel.y_label)
    )
    .unwrap();

    if panel.points.is_empty() {
        writeln!(
            out,
            r#"  <text x="{x:.1}" y="{y:.1}" font-size="12" font-family="monospace" text-anchor="middle">no data</text>"#,
            x = left + plot_w / 2.0,
            y = top + plot_h / 2.0
        )
        .unwrap();
        return;
    }

    let mut path = String::new();
    for (i, &(x, y)) in panel.points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(path, "{cmd}{:.2} {:.2} ", sx(x), sy(y)).unwrap();
    }
    writeln!(
        out,
        r##"  <path d="{}" fill="none" stroke="#1f6fb2" stroke-width="1.4"/>"##,
        path.trim_end()
    )
    .unwrap();
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_svg(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{PANEL_H}\" viewBox=\"0 0 {width} {PANEL_H}\" data-format-version=\"1\">\n"
    ));
    out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, p) in panels.iter().enumerate() {
        render_panel(p, PANEL_W * i as f64, &mut out);
    }
    out.push_str("</svg>\n");
    out
}

/// Renders a training metrics CSV as two panels: episode reward and the
/// running total across episodes.
pub fn render_metrics_chart(metrics_csv: &Path) -> io::Result<String> {
    let rows = read_metrics_csv(metrics_csv)?;
    let per_episode: Vec<(f64, f64)> = rows
        .iter()
        .map(|m| (m.episode_index as f64, m.cumulative_reward))
        .collect();
    let mut running = 0.0;
    let cumulative: Vec<(f64, f64)> = rows
        .iter()
        .map(|m| {
            running += m.cumulative_reward;
            (m.episode_index as f64, running)
        })
        .collect();
    Ok(render_svg(&[
        Panel {
            title: "Reward per episode".into(),
            x_label: "episode".into(),
            y_label: "reward %".into(),
            points: per_episode,
        },
        Panel {
            title: "Cumulative reward over episodes".into(),
            x_label: "episode".into(),
            y_label: "cumulative reward %".into(),
            points: cumulative,
        },
    ]))
}

/// Renders a (step, cumulative reward) curve CSV as a single panel.
pub fn render_curve_chart(curve_csv: &Path) -> io::Result<String> {
    let points = read_curve_csv(curve_csv)?;
    let points: Vec<(f64, f64)> = points.iter().map(|&(s, v)| (s as f64, v)).collect();
    Ok(render_svg(&[Panel {
        title: "Cumulative reward".into(),
        x_label: "step".into(),
        y_label: "reward %".into(),
        points,
    }]))
}

/// Renders whichever layout the CSV header announces.
pub fn render_chart(csv_path: &Path) -> io::Result<String> {
    let header = csv_header(csv_path)?;
    if header.iter().any(|h| h == "episode_index") {
        render_metrics_chart(csv_path)
    } else if header.first().map(String::as_str) == Some("step")
        || header.first().map(String::as_str) == Some("global_step")
    {
        render_curve_chart(csv_path)
    } else {
        Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unrecognized CSV layout: {header:?}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{write_curve_csv, write_metrics_csv, EpisodeMetrics};

    fn sample_metrics() -> Vec<EpisodeMetrics> {
        (0..5)
            .map(|i| EpisodeMetrics {
                episode_index: i,
                global_step: (i + 1) * 10,
                cumulative_reward: i as f64 - 2.0,
                trades: 2 * i,
                steps: 10,
                epsilon: 1.0 - i as f64 * 0.1,
                mean_loss: 0.5 / (i + 1) as f64,
            })
            .collect()
    }

    #[test]
    fn metrics_chart_is_wellformed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &sample_metrics()).unwrap();
        let svg = render_metrics_chart(&path).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 2);
        // balanced tags for the fixed vocabulary used
        for tag in ["text", "svg"] {
            assert_eq!(
                svg.matches(&format!("<{tag}")).count(),
                svg.matches(&format!("</{tag}>")).count(),
                "unbalanced {tag}"
            );
        }
    }

    #[test]
    fn curve_chart_handles_empty_and_single_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, &[]).unwrap();
        let svg = render_curve_chart(&path).unwrap();
        assert!(svg.contains("no data"));

        write_curve_csv(&path, &[(1, 0.5)]).unwrap();
        let svg = render_curve_chart(&path).unwrap();
        assert!(svg.contains("<path"));
    }

    #[test]
    fn auto_detection_dispatches_by_header() {
        let dir = tempfile::tempdir().unwrap();
        let metrics = dir.path().join("metrics.csv");
        write_metrics_csv(&metrics, &sample_metrics()).unwrap();
        assert!(render_chart(&metrics).unwrap().contains("per episode"));

        let curve = dir.path().join("curve.csv");
        write_curve_csv(&curve, &[(1, 0.0), (2, 1.0)]).unwrap();
        assert!(render_chart(&curve).unwrap().contains("Cumulative reward"));
    }

    #[test]
    fn plotting_does_not_alter_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &sample_metrics()).unwrap();
        let before = std::fs::read(&path).unwrap();
        let _ = render_chart(&path).unwrap();
        assert_eq!(before, std::fs::read(&path).unwrap());
    }
}
