//! SVG overlay rendering: blob boxes colored by their assigned model plus,
//! for every active model, its mean, base, and center lines drawn across the
//! horizontal span of its inliers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use textline_core::energy::ModelPool;
use textline_core::{Labeling, LineModel, ModelId, TextCandidate};

/// Fixed 12-color palette; model `id` uses `PALETTE[id % 12]`.
pub const PALETTE: [&str; 12] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
    "#008080", "#9a6324", "#800000", "#000075",
];

pub fn model_color(id: ModelId) -> &'static str {
    PALETTE[(id as usize) % PALETTE.len()]
}

fn fmt_f(v: f64) -> String {
    // Trim trailing zeros so the output stays stable and readable.
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Render a labeled scene. Outlier blobs are drawn dashed gray; each model
/// contributes three lines in its color: mean and base solid, center dashed.
pub fn render_svg(
    blobs: &[TextCandidate],
    pool: &ModelPool,
    labeling: &Labeling,
    width: f64,
    height: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">",
        fmt_f(width),
        fmt_f(height),
        fmt_f(width),
        fmt_f(height)
    );
    let _ = writeln!(out, "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>");

    // Horizontal span of each model's inliers, from the assignment.
    let mut spans: BTreeMap<ModelId, (f64, f64)> = BTreeMap::new();
    for blob in blobs {
        if let Some(Some(model)) = labeling.get(blob.id) {
            let span = spans.entry(model).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            span.0 = span.0.min(blob.bbox.left);
            span.1 = span.1.max(blob.bbox.right);
        }
    }

    for blob in blobs {
        let (stroke, dash) = match labeling.get(blob.id) {
            Some(Some(model)) => (model_color(model), ""),
            _ => ("#888888", " stroke-dasharray=\"4 3\""),
        };
        let _ = writeln!(
            out,
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"{}/>",
            fmt_f(blob.bbox.left),
            fmt_f(blob.bbox.top),
            fmt_f(blob.bbox.right - blob.bbox.left),
            fmt_f(blob.bbox.bottom - blob.bbox.top),
            stroke,
            dash
        );
    }

    for model in &pool.models {
        let Some(&(x0, x1)) = spans.get(&model.id) else { continue };
        emit_model_lines(&mut out, model, x0, x1);
    }

    out.push_str("</svg>\n");
    out
}

fn emit_model_lines(out: &mut String, model: &LineModel, x0: f64, x1: f64) {
    let color = model_color(model.id);
    let center_y0 = (model.mean_line.y_at(x0) + model.base_line.y_at(x0)) / 2.0;
    let center_y1 = (model.mean_line.y_at(x1) + model.base_line.y_at(x1)) / 2.0;
    for (y0, y1, dash) in [
        (model.mean_line.y_at(x0), model.mean_line.y_at(x1), ""),
        (model.base_line.y_at(x0), model.base_line.y_at(x1), ""),
        (center_y0, center_y1, " stroke-dasharray=\"6 4\""),
    ] {
        let _ = writeln!(
            out,
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.5\"{}/>",
            fmt_f(x0),
            fmt_f(y0),
            fmt_f(x1),
            fmt_f(y1),
            color,
            dash
        );
    }
}
