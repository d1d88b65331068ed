//! Learning-curve SVG: smoothed macro-steps-per-episode series from
//! metrics CSVs, one panel per target count, colored by reward scheme.
//! The SVG is written by hand so the plot has no drawing dependency and
//! identical inputs give identical bytes.

use std::path::Path;

use thiserror::Error;
use topomacro::simenv::RewardScheme;

#[derive(Error, Debug)]
pub enum PlotError {
    #[error("metrics file `{0}`: {1}")]
    Read(String, #[source] std::io::Error),
    #[error("metrics file `{path}`: missing column `{column}`")]
    MissingColumn { path: String, column: &'static str },
    #[error("metrics file `{path}` line {line}: expected an integer in column `{column}`")]
    BadCell {
        path: String,
        line: usize,
        column: &'static str,
    },
    #[error("no input series")]
    Empty,
}

/// One curve: a label, its panel (target count), its color (scheme), and
/// the per-episode macro-step counts in episode order.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub scheme: RewardScheme,
    pub n_targets: u32,
    pub macro_steps: Vec<u32>,
}

/// Smoothing window: moving median over the trailing 100 episodes.
pub const SMOOTH_WINDOW: usize = 100;

/// The macro-cap gridline every panel draws.
pub const CAP_LINE: f64 = 250.0;

/// Read `episode,macro_steps` pairs from a metrics CSV (header-addressed,
/// so evaluation CSVs work too). Rows come back sorted by episode.
pub fn read_macro_steps(path: &Path) -> Result<Vec<u32>, PlotError> {
    let name = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|e| PlotError::Read(name.clone(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PlotError::MissingColumn {
        path: name.clone(),
        column: "episode",
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |column: &'static str| {
        cols.iter()
            .position(|c| *c == column)
            .ok_or(PlotError::MissingColumn {
                path: name.clone(),
                column,
            })
    };
    let (ep_col, steps_col) = (col("episode")?, col("macro_steps")?);
    let mut rows: Vec<(usize, u32)> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let cell = |idx: usize, column: &'static str| -> Result<&str, PlotError> {
            cells.get(idx).copied().ok_or(PlotError::BadCell {
                path: name.clone(),
                line: i + 1,
                column,
            })
        };
        let episode: usize =
            cell(ep_col, "episode")?
                .parse()
                .map_err(|_| PlotError::BadCell {
                    path: name.clone(),
                    line: i + 1,
                    column: "episode",
                })?;
        let steps: u32 =
            cell(steps_col, "macro_steps")?
                .parse()
                .map_err(|_| PlotError::BadCell {
                    path: name.clone(),
                    line: i + 1,
                    column: "macro_steps",
                })?;
        rows.push((episode, steps));
    }
    rows.sort_by_key(|&(e, _)| e);
    Ok(rows.into_iter().map(|(_, s)| s).collect())
}

/// Trailing moving median: element `i` summarizes the last
/// [`SMOOTH_WINDOW`] values up to and including `i`.
pub fn moving_median(values: &[u32]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(SMOOTH_WINDOW);
            let mut w: Vec<u32> = values[lo..=i].to_vec();
            w.sort_unstable();
            let n = w.len();
            if n % 2 == 1 {
                w[n / 2] as f64
            } else {
                (w[n / 2 - 1] as f64 + w[n / 2] as f64) / 2.0
            }
        })
        .collect()
}

fn scheme_color(scheme: RewardScheme) -> &'static str {
    match scheme {
        RewardScheme::Intermediate => "#1f77b4",
        RewardScheme::Terminal => "#d62728",
    }
}

const DASHES: [&str; 4] = ["", "6 4", "2 3", "8 3 2 3"];

const PANEL_W: f64 = 430.0;
const PANEL_H: f64 = 330.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 42.0;

fn fmt(v: f64) -> String {
    format!("{v:.1}")
}

/// Render all series into one SVG document: one panel per distinct
/// target count (ascending), each with axes, a dashed gridline at the
/// 250-macro cap, and a legend naming every series in the panel.
pub fn render_svg(series: &[Series]) -> Result<String, PlotError> {
    if series.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut panels: Vec<u32> = series.iter().map(|s| s.n_targets).collect();
    panels.sort_unstable();
    panels.dedup();

    let width = PANEL_W * panels.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{PANEL_H:.0}\" \
         viewBox=\"0 0 {width:.0} {PANEL_H:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"{width:.0}\" height=\"{PANEL_H:.0}\" fill=\"white\"/>\n"
    );

    for (pi, &targets) in panels.iter().enumerate() {
        let x0 = pi as f64 * PANEL_W + MARGIN_L;
        let y0 = MARGIN_T;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let members: Vec<&Series> = series.iter().filter(|s| s.n_targets == targets).collect();

        let max_ep = members
            .iter()
            .map(|s| s.macro_steps.len())
            .max()
            .unwrap_or(1)
            .max(2) as f64;
        let data_max = members
            .iter()
            .flat_map(|s| moving_median(&s.macro_steps))
            .fold(0.0f64, f64::max);
        let y_max = (data_max * 1.08).max(CAP_LINE * 1.04);

        let sx = |ep: f64| x0 + ep / (max_ep - 1.0) * plot_w;
        let sy = |v: f64| y0 + plot_h - v / y_max * plot_h;

        // Frame and title.
        svg.push_str(&format!(
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
             fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n"
        ));
        let title = if targets == 1 {
            "1 target".to_string()
        } else {
            format!("{targets} targets")
        };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
            x0 + plot_w / 2.0,
            y0 - 12.0
        ));

        // Axis ticks: 5 on each axis, labels outside the frame.
        for t in 0..=4 {
            let frac = t as f64 / 4.0;
            let ep = frac * (max_ep - 1.0);
            let xv = sx(ep);
            svg.push_str(&format!(
                "<line x1=\"{xv:.1}\" y1=\"{:.1}\" x2=\"{xv:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\n\
                 <text x=\"{xv:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{:.0}</text>\n",
                y0 + plot_h,
                y0 + plot_h + 5.0,
                y0 + plot_h + 18.0,
                ep
            ));
            let yv = frac * y_max;
            let yy = sy(yv);
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{x0:.1}\" y2=\"{yy:.1}\" stroke=\"#444\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
                x0 - 5.0,
                x0 - 8.0,
                yy + 4.0,
                fmt(yv)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">episode</text>\n",
            x0 + plot_w / 2.0,
            y0 + plot_h + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" \
             transform=\"rotate(-90 {:.1} {:.1})\">macro steps (median of {SMOOTH_WINDOW})</text>\n",
            x0 - 38.0,
            y0 + plot_h / 2.0,
            x0 - 38.0,
            y0 + plot_h / 2.0
        ));

        // Macro-cap gridline.
        let cap_y = sy(CAP_LINE);
        svg.push_str(&format!(
            "<line x1=\"{x0:.1}\" y1=\"{cap_y:.1}\" x2=\"{:.1}\" y2=\"{cap_y:.1}\" \
             stroke=\"#888\" stroke-dasharray=\"5 5\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\" fill=\"#666\">\
             {CAP_LINE:.0}-macro cap</text>\n",
            x0 + plot_w,
            x0 + plot_w - 4.0,
            cap_y - 4.0
        ));

        // Curves, then the legend in drawing order.
        for (si, s) in members.iter().enumerate() {
            let smoothed = moving_median(&s.macro_steps);
            let pts: Vec<String> = smoothed
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.1},{:.1}", sx(i as f64), sy(v)))
                .collect();
            let dash = DASHES[si % DASHES.len()];
            let dash_attr = if dash.is_empty() {
                String::new()
            } else {
                format!(" stroke-dasharray=\"{dash}\"")
            };
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{}/>\n",
                pts.join(" "),
                scheme_color(s.scheme),
                dash_attr
            ));
            let ly = y0 + 16.0 + si as f64 * 16.0;
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
                 stroke=\"{}\" stroke-width=\"1.6\"{}/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>\n",
                x0 + plot_w - 150.0,
                x0 + plot_w - 122.0,
                scheme_color(s.scheme),
                dash_attr,
                x0 + plot_w - 116.0,
                ly + 4.0,
                xml_escape(&s.label)
            ));
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
