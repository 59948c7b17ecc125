//! Stem plots of the forward and reverse ω-measures as self-contained SVG
//! text, no external renderer.

use std::path::Path;

use retrodiction::fluctuation::DiscreteMeasure;

use crate::error::{io_err, CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

/// Render `μ_F` and `μ_R` atoms on a shared ω axis and write the file.
/// An empty forward measure is an error and nothing is written.
pub fn write_measure_plot(
    mu_forward: &DiscreteMeasure<f64>,
    mu_reverse: &DiscreteMeasure<f64>,
    title: &str,
    path: &Path,
) -> CliResult<()> {
    let svg = render_measure_plot(mu_forward, mu_reverse, title)?;
    std::fs::write(path, svg).map_err(|e| io_err(path, e))
}

pub fn render_measure_plot(
    mu_forward: &DiscreteMeasure<f64>,
    mu_reverse: &DiscreteMeasure<f64>,
    title: &str,
) -> CliResult<String> {
    if mu_forward.is_empty() && mu_reverse.is_empty() {
        return Err(CliError::EmptyMeasure);
    }
    let omegas: Vec<f64> = mu_forward
        .atoms()
        .iter()
        .chain(mu_reverse.atoms())
        .map(|&(v, _)| v)
        .collect();
    let weights: Vec<f64> = mu_forward
        .atoms()
        .iter()
        .chain(mu_reverse.atoms())
        .map(|&(_, w)| w)
        .collect();
    let (mut lo, mut hi) = omegas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if (hi - lo).abs() < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    } else {
        let pad = 0.08 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    let w_max = weights.iter().copied().fold(0.0f64, f64::max).max(1e-12);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |omega: f64| MARGIN_LEFT + (omega - lo) / (hi - lo) * plot_w;
    let y_of = |weight: f64| MARGIN_TOP + plot_h * (1.0 - weight / (1.05 * w_max));
    let baseline = MARGIN_TOP + plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">mu_F and mu_R atoms: {}</text>\n",
        MARGIN_LEFT,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{baseline}\" x2=\"{}\" y2=\"{baseline}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{baseline}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">omega</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    for (value, position) in [(lo, MARGIN_LEFT), (hi, WIDTH - MARGIN_RIGHT)] {
        svg.push_str(&format!(
            "<text x=\"{position}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">{value:.3}</text>\n",
            baseline + 16.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>\n",
        MARGIN_LEFT - 6.0,
        y_of(w_max) + 4.0,
        w_max
    ));
    // stems: forward nudged left, reverse nudged right so ties stay visible
    for (shift, color, measure) in [
        (-2.0, "#1f77b4", mu_forward),
        (2.0, "#d62728", mu_reverse),
    ] {
        for &(omega, weight) in measure.atoms() {
            let x = x_of(omega) + shift;
            let y = y_of(weight);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{baseline}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n"
            ));
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.2\" fill=\"{color}\"/>\n"
            ));
        }
    }
    // legend
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>\n",
        WIDTH - 150.0,
        MARGIN_TOP
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">mu_F</text>\n",
        WIDTH - 134.0,
        MARGIN_TOP + 9.0
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#d62728\"/>\n",
        WIDTH - 150.0,
        MARGIN_TOP + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">mu_R</text>\n",
        WIDTH - 134.0,
        MARGIN_TOP + 25.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_measure_renders_one_forward_stem() {
        let mu = DiscreteMeasure::from_atoms(vec![(0.0, 1.0)], 1e-9).unwrap();
        let svg = render_measure_plot(&mu, &mu, "log(z=1)").unwrap();
        assert!(svg.contains("<svg"));
        assert_eq!(svg.matches("#1f77b4").count(), 3); // stem + dot + legend
    }

    #[test]
    fn empty_measure_is_rejected() {
        let empty = DiscreteMeasure::<f64>::from_atoms(vec![], 1e-9).unwrap();
        assert!(matches!(
            render_measure_plot(&empty, &empty, "log(z=1)"),
            Err(CliError::EmptyMeasure)
        ));
    }
}
