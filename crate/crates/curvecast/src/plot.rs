//! Self-contained SVG rendering of a learning curve.
//!
//! No external renderer: the output is a single `<svg>` element with a fixed
//! 800x600 viewBox, a log-scaled size axis and a 0-100 accuracy axis.

/// One observed size with its replicate summary.
#[derive(Debug, Clone, Copy)]
pub struct ObservedPoint {
    pub size: f64,
    pub mean: f64,
    /// Sample standard deviation of the replicates; drawn as a whisker when
    /// positive.
    pub std_dev: f64,
}

#[derive(Debug, Clone)]
pub struct CurvePlot {
    pub observed: Vec<ObservedPoint>,
    /// Fitted curve samples, ascending in x.
    pub curve: Vec<(f64, f64)>,
    /// Vertical marker at the size required for a target accuracy.
    pub target_marker: Option<(f64, f64)>,
    pub title: String,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

impl CurvePlot {
    pub fn to_svg(&self) -> String {
        let mut xs: Vec<f64> = self.observed.iter().map(|p| p.size).collect();
        xs.extend(self.curve.iter().map(|&(x, _)| x));
        if let Some((x, _)) = self.target_marker {
            xs.push(x);
        }
        let mut x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let mut x_max = xs.iter().copied().fold(1.0, f64::max);
        if !x_min.is_finite() || x_min <= 0.0 {
            x_min = 1.0;
        }
        if x_max <= x_min {
            x_min *= 0.5;
            x_max = x_min * 4.0;
        }

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |x: f64| MARGIN_LEFT + (x.ln() - x_min.ln()) / (x_max.ln() - x_min.ln()) * plot_w;
        let py = |y: f64| MARGIN_TOP + (100.0 - y.clamp(0.0, 100.0)) / 100.0 * plot_h;

        let mut svg = String::with_capacity(8 * 1024);
        svg.push_str(&format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" "#,
                r#"width="{w}" height="{h}" font-family="sans-serif">"#,
                "\n"
            ),
            w = WIDTH,
            h = HEIGHT
        ));
        svg.push_str(&format!(
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // Accuracy grid every 20 points.
        for tick in (0..=100).step_by(20) {
            let y = py(tick as f64);
            svg.push_str(&format!(
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
                MARGIN_LEFT + plot_w
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{tick}</text>\n",
                MARGIN_LEFT - 8.0,
                y + 4.0
            ));
        }

        // Decade ticks on the log size axis, plus 2x and 5x minors.
        let lowest_decade = x_min.log10().floor() as i32;
        let highest_decade = x_max.log10().ceil() as i32;
        for decade in lowest_decade..=highest_decade {
            for mantissa in [1.0, 2.0, 5.0] {
                let x = mantissa * 10f64.powi(decade);
                if x < x_min * 0.999 || x > x_max * 1.001 {
                    continue;
                }
                let sx = px(x);
                let major = mantissa == 1.0;
                svg.push_str(&format!(
                    "<line x1=\"{sx:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>\n",
                    MARGIN_TOP + plot_h,
                    if major { "#dddddd" } else { "#f2f2f2" }
                ));
                if major || x_max / x_min < 30.0 {
                    svg.push_str(&format!(
                        "<text x=\"{sx:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
                        MARGIN_TOP + plot_h + 18.0,
                        format_tick(x)
                    ));
                }
            }
        }

        // Axes and labels.
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">training-set size per class (log scale)</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 15.0
        ));
        svg.push_str(&format!(
            "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 {:.2})\">accuracy (%)</text>\n",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0
        ));

        // Fitted curve.
        if self.curve.len() >= 2 {
            let points: Vec<String> = self
                .curve
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"2\"/>\n",
                points.join(" ")
            ));
        }

        // Target marker behind the observed points.
        if let Some((x, target)) = self.target_marker {
            let sx = px(x);
            svg.push_str(&format!(
                "<line x1=\"{sx:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"#c53030\" stroke-dasharray=\"6 4\"/>\n",
                MARGIN_TOP + plot_h
            ));
            svg.push_str(&format!(
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c53030\" stroke-dasharray=\"2 4\"/>\n",
                py(target),
                MARGIN_LEFT + plot_w,
                py(target)
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#c53030\">{} at {}%</text>\n",
                sx + 6.0,
                MARGIN_TOP + 16.0,
                format_tick(x.ceil()),
                target
            ));
        }

        // Observed points with replicate whiskers.
        for point in &self.observed {
            let sx = px(point.size);
            if point.std_dev > 0.0 {
                let top = py(point.mean + point.std_dev);
                let bottom = py(point.mean - point.std_dev);
                svg.push_str(&format!(
                    "<line x1=\"{sx:.2}\" y1=\"{top:.2}\" x2=\"{sx:.2}\" y2=\"{bottom:.2}\" stroke=\"#333333\"/>\n"
                ));
                for y in [top, bottom] {
                    svg.push_str(&format!(
                        "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#333333\"/>\n",
                        sx - 4.0,
                        sx + 4.0
                    ));
                }
            }
            svg.push_str(&format!(
                "<circle cx=\"{sx:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#333333\"/>\n",
                py(point.mean)
            ));
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn format_tick(x: f64) -> String {
    if x >= 1.0 && (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round() as u64)
    } else {
        format!("{x}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
