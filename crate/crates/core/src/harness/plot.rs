//! SVG rendering of an attribution next to its time-domain series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::spaces::{Space, SpaceKind};
use crate::Series;

const WIDTH: f64 = 800.0;
const PANEL: f64 = 180.0;
const MARGIN: f64 = 20.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fill color and opacity for a score relative to the largest magnitude.
fn heat(score: f64, peak: f64) -> (&'static str, f64) {
    let color = if score < 0.0 { "#2166ac" } else { "#b2182b" };
    let alpha = if peak > 0.0 { score.abs() / peak } else { 0.0 };
    (color, alpha)
}

fn strip(out: &mut String, scores: &[f64], labels: &[String], top: f64, height: f64) {
    let peak = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let cell = (WIDTH - 2.0 * MARGIN) / scores.len() as f64;
    for (i, (s, label)) in scores.iter().zip(labels).enumerate() {
        let (color, alpha) = heat(*s, peak);
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{top:.3}" width="{:.3}" height="{height:.3}" fill="{color}" fill-opacity="{alpha:.4}"><title>{}: {s}</title></rect>"#,
            MARGIN + i as f64 * cell,
            cell,
            escape(label),
        );
    }
}

fn polyline(out: &mut String, values: &[f64], top: f64, height: f64) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let step = (WIDTH - 2.0 * MARGIN) / values.len() as f64;
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = MARGIN + (i as f64 + 0.5) * step;
            let y = top + height - (v - lo) / span * height;
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        points.join(" ")
    );
}

/// Renders `x` as a polyline over a heat strip of `scores`.
///
/// Time, min-zero and difference scores map coordinate `i` to time step
/// `i` (the min-zero placeholder is left out). Other spaces draw the series
/// alone in the first panel and add a second panel with one cell per
/// space coordinate, labeled by the space's bin labels.
pub fn render_attribution_svg(x: &Series, space: &Space, scores: &[f64]) -> Result<String> {
    check_len(space.input_len(), x.len())?;
    check_len(space.dim(), scores.len())?;
    let overlay = matches!(
        space.kind(),
        SpaceKind::Time | SpaceKind::MinZero | SpaceKind::Difference
    );
    let panels = if overlay { 1.0 } else { 2.0 };
    let height = panels * PANEL + (panels + 1.0) * MARGIN;
    let labels = space.bin_labels();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, "<title>{} attribution</title>", escape(&space.id()));
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>"#
    );
    if overlay {
        let n = space.input_len();
        strip(&mut out, &scores[..n], &labels[..n], MARGIN, PANEL);
    }
    polyline(&mut out, x.values(), MARGIN, PANEL);
    if !overlay {
        let top = PANEL + 2.0 * MARGIN;
        strip(&mut out, scores, &labels, top, PANEL);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes [`render_attribution_svg`] output to `path`.
pub fn emit_attribution_plot(
    x: &Series,
    space: &Space,
    scores: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = render_attribution_svg(x, space, scores)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceConfig;

    fn series(n: usize) -> Series {
        Series::new((0..n).map(|i| (i as f64 * 0.4).sin()).collect()).unwrap()
    }

    fn opacities(doc: &roxmltree::Document) -> Vec<f64> {
        doc.descendants()
            .filter(|n| n.has_tag_name("rect"))
            .filter_map(|n| n.attribute("fill-opacity"))
            .map(|a| a.parse().unwrap())
            .collect()
    }

    #[test]
    fn zero_attribution_gives_uniform_strip() {
        let space = SpaceConfig::new(SpaceKind::Time, 16).build().unwrap();
        let svg = render_attribution_svg(&series(16), &space, &[0.0; 16]).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let ops = opacities(&doc);
        assert_eq!(ops.len(), 16);
        assert!(ops.iter().all(|o| *o == 0.0));
    }

    #[test]
    fn one_hot_gives_single_band() {
        let space = SpaceConfig::new(SpaceKind::Frequency, 16).build().unwrap();
        let mut scores = vec![0.0; 16];
        scores[5] = -2.0;
        let svg = render_attribution_svg(&series(16), &space, &scores).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let ops = opacities(&doc);
        assert_eq!(ops.iter().filter(|o| **o > 0.0).count(), 1);
        assert_eq!(ops[5], 1.0);
        let band = doc
            .descendants()
            .find(|n| n.has_tag_name("rect") && n.attribute("fill-opacity") == Some("1.0000"))
            .unwrap();
        let label = band.first_element_child().unwrap().text().unwrap();
        assert!(label.starts_with(&space.bin_labels()[5]));
    }

    #[test]
    fn min_zero_overlay_skips_placeholder() {
        let space = SpaceConfig::new(SpaceKind::MinZero, 16).build().unwrap();
        let svg = render_attribution_svg(&series(16), &space, &[1.0; 17]).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(opacities(&doc).len(), 16);
        assert!(render_attribution_svg(&series(16), &space, &[1.0; 16]).is_err());
    }

    #[test]
    fn writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.svg");
        let space = SpaceConfig::new(SpaceKind::Decomposition, 16)
            .build()
            .unwrap();
        emit_attribution_plot(&series(16), &space, &vec![0.5; space.dim()], &p).unwrap();
        roxmltree::Document::parse(&fs::read_to_string(&p).unwrap()).unwrap();
    }
}
