//! Standalone SVG rendering of a regret trace.
//!
//! Two log-log panels: mean alpha-regret per round on the left, the
//! largest per-node consensus deviation on the right. Rounds with
//! nonpositive values cannot appear on a log scale and are skipped; a
//! panel with nothing left to draw says so instead of failing, so even a
//! one-round trace renders a valid document.

use dosm_core::eval::RegretTrace;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const PANEL_W: f64 = 390.0;
const PANEL_H: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 60.0;
const PANEL_GAP: f64 = 110.0;

struct Panel {
    x0: f64,
    y0: f64,
    title: String,
    x_label: String,
    y_label: String,
    points: Vec<(f64, f64)>,
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut ticks = Vec::new();
    let first = lo.log10().floor() as i32;
    let last = hi.log10().ceil() as i32;
    for e in first..=last {
        let v = 10f64.powi(e);
        if v >= lo * 0.999 && v <= hi * 1.001 {
            ticks.push(v);
        }
    }
    if ticks.len() < 2 {
        vec![lo, hi]
    } else {
        ticks
    }
}

fn fmt_tick(v: f64) -> String {
    if (0.01..=9999.0).contains(&v.abs()) {
        let s = format!("{v}");
        if s.len() <= 7 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_panel(svg: &mut String, p: &Panel) {
    let Panel { x0, y0, .. } = *p;
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        y0 - 18.0,
        escape(&p.title)
    ));
    svg.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" \
         fill=\"none\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 38.0,
        escape(&p.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 {} {})\">{}</text>\n",
        x0 - 52.0,
        y0 + PANEL_H / 2.0,
        x0 - 52.0,
        y0 + PANEL_H / 2.0,
        escape(&p.y_label)
    ));

    if p.points.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
             fill=\"gray\">no positive values to plot</text>\n",
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H / 2.0
        ));
        return;
    }

    let (mut x_lo, mut x_hi) = p.points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(x, _)| {
        (lo.min(x), hi.max(x))
    });
    let (mut y_lo, mut y_hi) = p.points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(_, y)| {
        (lo.min(y), hi.max(y))
    });
    if x_lo == x_hi {
        x_lo /= 2.0;
        x_hi *= 2.0;
    }
    if y_lo == y_hi {
        y_lo /= 2.0;
        y_hi *= 2.0;
    }
    let map_x = |v: f64| x0 + (v.ln() - x_lo.ln()) / (x_hi.ln() - x_lo.ln()) * PANEL_W;
    let map_y = |v: f64| y0 + PANEL_H - (v.ln() - y_lo.ln()) / (y_hi.ln() - y_lo.ln()) * PANEL_H;

    for tick in log_ticks(x_lo, x_hi) {
        let x = map_x(tick);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + PANEL_H,
            y0 + PANEL_H + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            y0 + PANEL_H + 18.0,
            fmt_tick(tick)
        ));
    }
    for tick in log_ticks(y_lo, y_hi) {
        let y = map_y(tick);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            x0 - 8.0,
            y + 4.0,
            fmt_tick(tick)
        ));
    }

    if p.points.len() > 1 {
        let path: Vec<String> = p
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", map_x(x), map_y(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
    }
    for &(x, y) in &p.points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>\n",
            map_x(x),
            map_y(y)
        ));
    }
}

/// Render the trace as a self-contained SVG document.
pub fn render(trace: &RegretTrace) -> String {
    let mut regret_points = Vec::new();
    let mut consensus_points = Vec::new();
    for t in 1..=trace.horizon {
        let mut regret_sum = 0.0;
        let mut cons_max = 0.0f64;
        for i in 0..trace.nodes {
            let row = trace.row(t, i);
            regret_sum += row.alpha_regret;
            cons_max = cons_max.max(row.consensus_err);
        }
        let regret_mean = regret_sum / trace.nodes as f64;
        if regret_mean > 0.0 {
            regret_points.push((t as f64, regret_mean));
        }
        if cons_max > 0.0 {
            consensus_points.push((t as f64, cons_max));
        }
    }

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{} \
         (seed {}, alpha {:.4})</text>\n",
        WIDTH / 2.0,
        escape(&trace.algo),
        trace.seed,
        trace.alpha
    ));
    render_panel(
        &mut svg,
        &Panel {
            x0: MARGIN_LEFT,
            y0: MARGIN_TOP,
            title: "mean alpha-regret".into(),
            x_label: "round".into(),
            y_label: "alpha-regret".into(),
            points: regret_points,
        },
    );
    render_panel(
        &mut svg,
        &Panel {
            x0: MARGIN_LEFT + PANEL_W + PANEL_GAP,
            y0: MARGIN_TOP,
            title: "max consensus deviation".into(),
            x_label: "round".into(),
            y_label: "consensus error".into(),
            points: consensus_points,
        },
    );
    svg.push_str("</svg>\n");
    svg
}
