//! Hand-rolled SVG output for the two figure styles the pipeline emits: a
//! weekly-harvest bar chart (optionally comparing a baseline schedule
//! against the optimized one) and a heat map of the harvest-window sweep.
//! Pure string construction — deterministic output for identical inputs.

use gduplan::scheduler::{CellStatus, SweepResult};
use std::collections::BTreeMap;
use std::fmt::Write;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 56.0;

pub struct BarSeries {
    pub label: String,
    pub color: &'static str,
    /// Expected harvest total per week index.
    pub values: BTreeMap<i64, f64>,
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" ",
            "font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{t}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        t = title
    )
}

/// Grouped bar chart of weekly totals with an optional capacity rule.
pub fn bar_chart(title: &str, capacity: Option<f64>, series: &[BarSeries]) -> String {
    let mut weeks: Vec<i64> = series
        .iter()
        .flat_map(|s| s.values.keys().copied())
        .collect();
    weeks.sort_unstable();
    weeks.dedup();

    let mut svg = header(title);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_top = series
        .iter()
        .flat_map(|s| s.values.values().copied())
        .chain(capacity)
        .fold(1.0f64, f64::max)
        * 1.08;

    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - v / y_top);

    // Horizontal grid and y-axis tick labels.
    for i in 0..=5 {
        let v = y_top * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>",
            WIDTH - MARGIN_RIGHT
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.0}</text>",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            v
        );
    }

    let slot_w = plot_w / weeks.len().max(1) as f64;
    let bar_w = (slot_w * 0.8 / series.len().max(1) as f64).max(0.5);
    let label_step = weeks.len().div_ceil(16).max(1);

    for (slot, week) in weeks.iter().enumerate() {
        let x0 = MARGIN_LEFT + slot as f64 * slot_w + slot_w * 0.1;
        for (k, s) in series.iter().enumerate() {
            let Some(&v) = s.values.get(week) else {
                continue;
            };
            let y = y_of(v);
            let _ = writeln!(
                svg,
                concat!(
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" ",
                    "fill=\"{}\"><title>{}, week {}: {:.1}</title></rect>"
                ),
                x0 + k as f64 * bar_w,
                y,
                bar_w,
                (MARGIN_TOP + plot_h - y).max(0.0),
                s.color,
                s.label,
                week,
                v
            );
        }
        if slot % label_step == 0 {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{week}</text>",
                MARGIN_LEFT + slot as f64 * slot_w + slot_w / 2.0,
                MARGIN_TOP + plot_h + 16.0
            );
        }
    }

    if let Some(cap) = capacity {
        let y = y_of(cap);
        let _ = writeln!(
            svg,
            concat!(
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{x2:.1}\" y2=\"{y:.1}\" ",
                "stroke=\"#d62728\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n",
                "<text x=\"{x2:.1}\" y=\"{ty:.1}\" text-anchor=\"end\" ",
                "fill=\"#d62728\">capacity {cap:.0}</text>"
            ),
            MARGIN_LEFT = MARGIN_LEFT,
            y = y,
            x2 = WIDTH - MARGIN_RIGHT,
            ty = y - 5.0,
            cap = cap
        );
    }

    // Axes over the grid, legend in the top-left of the plot area.
    let _ = writeln!(
        svg,
        concat!(
            "<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
            "<line x1=\"{l}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
            "<text x=\"{cx:.1}\" y=\"{lx:.1}\" text-anchor=\"middle\">harvest week</text>\n",
            "<text x=\"16\" y=\"{cy:.1}\" transform=\"rotate(-90 16 {cy:.1})\" ",
            "text-anchor=\"middle\">ears per week</text>"
        ),
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h,
        r = WIDTH - MARGIN_RIGHT,
        cx = MARGIN_LEFT + plot_w / 2.0,
        lx = HEIGHT - 12.0,
        cy = MARGIN_TOP + plot_h / 2.0,
    );
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            concat!(
                "<rect x=\"{x}\" y=\"{y:.1}\" width=\"12\" height=\"12\" fill=\"{c}\"/>\n",
                "<text x=\"{tx}\" y=\"{ty:.1}\">{label}</text>"
            ),
            x = MARGIN_LEFT + 10.0,
            y = y,
            c = s.color,
            tx = MARGIN_LEFT + 28.0,
            ty = y + 10.0,
            label = s.label
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn lerp_channel(a: u8, b: u8, t: f64) -> u8 {
    (a as f64 + (b as f64 - a as f64) * t).round() as u8
}

/// Blue (low pairwise objective, even harvests) to red (high).
fn heat_color(t: f64) -> String {
    let (r0, g0, b0) = (0x21, 0x66, 0xac);
    let (r1, g1, b1) = (0xb2, 0x18, 0x2b);
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp_channel(r0, r1, t),
        lerp_channel(g0, g1, t),
        lerp_channel(b0, b1, t)
    )
}

/// Heat map of the window sweep: rows are first allowed harvest weeks,
/// columns are last allowed weeks, color is the pairwise-consistency value;
/// the selected window is outlined in black.
pub fn sweep_heatmap(result: &SweepResult) -> String {
    let grid = &result.grid;
    let mut firsts: Vec<i64> = grid.iter().map(|c| c.first_week.0).collect();
    firsts.sort_unstable();
    firsts.dedup();
    let mut lasts: Vec<i64> = grid.iter().map(|c| c.last_week.0).collect();
    lasts.sort_unstable();
    lasts.dedup();

    let lo = grid
        .iter()
        .filter_map(|c| c.pairwise)
        .fold(f64::INFINITY, f64::min);
    let hi = grid
        .iter()
        .filter_map(|c| c.pairwise)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut svg = header("Harvest-window sweep: expected pairwise inconsistency");
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let cell_w = plot_w / lasts.len().max(1) as f64;
    let cell_h = plot_h / firsts.len().max(1) as f64;

    for cell in grid {
        let col = lasts.binary_search(&cell.last_week.0).expect("grid column");
        let row = firsts
            .binary_search(&cell.first_week.0)
            .expect("grid row");
        let x = MARGIN_LEFT + col as f64 * cell_w;
        let y = MARGIN_TOP + row as f64 * cell_h;
        let (fill, note) = match (cell.status, cell.pairwise) {
            (CellStatus::Ok, Some(v)) => {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                (heat_color(t), format!("{v:.1}"))
            }
            (CellStatus::Skipped, _) => ("#f3f3f3".to_string(), "skipped".to_string()),
            (CellStatus::Infeasible, _) => ("#b0b0b0".to_string(), "infeasible".to_string()),
            _ => ("#707070".to_string(), "budget exhausted".to_string()),
        };
        let _ = writeln!(
            svg,
            concat!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" ",
                "stroke=\"white\" stroke-width=\"0.5\">",
                "<title>weeks {}..={}: {}</title></rect>"
            ),
            x,
            y,
            cell_w,
            cell_h,
            fill,
            cell.first_week.0,
            cell.last_week.0,
            note
        );
    }

    // Outline the winning window.
    if let (Ok(col), Ok(row)) = (
        lasts.binary_search(&result.best_window.last_week().0),
        firsts.binary_search(&result.best_window.first_week().0),
    ) {
        let _ = writeln!(
            svg,
            concat!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" ",
                "fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>"
            ),
            MARGIN_LEFT + col as f64 * cell_w,
            MARGIN_TOP + row as f64 * cell_h,
            cell_w,
            cell_h
        );
    }

    // Axis tick labels, thinned to stay readable.
    let col_step = lasts.len().div_ceil(20).max(1);
    for (col, last) in lasts.iter().enumerate().step_by(col_step) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{last}</text>",
            MARGIN_LEFT + col as f64 * cell_w + cell_w / 2.0,
            MARGIN_TOP + plot_h + 16.0
        );
    }
    let row_step = firsts.len().div_ceil(20).max(1);
    for (row, first) in firsts.iter().enumerate().step_by(row_step) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{first}</text>",
            MARGIN_LEFT - 6.0,
            MARGIN_TOP + row as f64 * cell_h + cell_h / 2.0 + 4.0
        );
    }
    let _ = writeln!(
        svg,
        concat!(
            "<text x=\"{cx:.1}\" y=\"{lx:.1}\" text-anchor=\"middle\">last harvest week</text>\n",
            "<text x=\"16\" y=\"{cy:.1}\" transform=\"rotate(-90 16 {cy:.1})\" ",
            "text-anchor=\"middle\">first harvest week</text>\n",
            "<text x=\"{l}\" y=\"{ly:.1}\">low {lo}</text>\n",
            "<text x=\"{r:.1}\" y=\"{ly:.1}\" text-anchor=\"end\">high {hi}</text>"
        ),
        cx = MARGIN_LEFT + plot_w / 2.0,
        lx = HEIGHT - 12.0,
        cy = MARGIN_TOP + plot_h / 2.0,
        l = MARGIN_LEFT,
        ly = MARGIN_TOP - 8.0,
        lo = if lo.is_finite() {
            format!("{lo:.1}")
        } else {
            "-".to_string()
        },
        r = WIDTH - MARGIN_RIGHT,
        hi = if hi.is_finite() {
            format!("{hi:.1}")
        } else {
            "-".to_string()
        },
    );

    svg.push_str("</svg>\n");
    svg
}
