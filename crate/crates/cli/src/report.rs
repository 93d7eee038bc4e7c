//! Learning curves from an event log: one CSV row per storyline, plus SVG plots.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use aogqa::qa::{Event, EventLog, Target};
use aogqa::world::{Answer, Question};

/// A yes/no judgment costs this fraction of a drawn box.
pub const JUDGMENT_WEIGHT: f64 = 0.2;

/// Probe metrics after one storyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub storyline: usize,
    pub app: f64,
    pub aer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub iteration: usize,
    pub kind: u8,
    pub target: String,
    pub pose: Option<usize>,
    pub cost: f64,
    pub estimated_cost: f64,
    pub cumulative_cost: f64,
    pub cumulative_estimated_cost: f64,
    pub d_gen: f64,
    pub d_cate: f64,
    pub d_part: f64,
    pub risk: f64,
    pub boxes: usize,
    pub judgments: usize,
    pub cumulative_boxes: usize,
    /// Boxes plus weighted judgments.
    pub cumulative_labels: f64,
    pub app: Option<f64>,
    pub aer: Option<f64>,
}

fn labels_of(q: &Question, a: &Answer) -> (usize, usize) {
    match (q, a) {
        (Question::LabelPart { .. }, _) => (1, 0),
        (Question::Exemplar { .. }, Answer::Exemplar(Some(e))) => (e.boxes.len(), 0),
        (Question::CheckPart { .. } | Question::CheckSample { .. }, _) => (0, 1),
        _ => (0, 0),
    }
}

pub fn rows(log: &EventLog, curve: &[CurvePoint]) -> Vec<Row> {
    let probe: BTreeMap<usize, &CurvePoint> = curve.iter().map(|c| (c.storyline, c)).collect();
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    let (mut boxes_total, mut labels_total, mut estimated_total) = (0usize, 0.0, 0.0);
    for e in &log.events {
        match e {
            Event::Question {
                storyline,
                question,
                answer,
                ..
            } => {
                let (b, j) = labels_of(question, answer);
                let c = counts.entry(*storyline).or_default();
                c.0 += b;
                c.1 += j;
            }
            Event::Storyline {
                storyline,
                kind,
                target,
                pose,
                predicted_cost,
                realized_cost,
                realized_delta,
                risk,
                cumulative_cost,
                ..
            } => {
                let (boxes, judgments) = counts.get(storyline).copied().unwrap_or_default();
                boxes_total += boxes;
                labels_total += boxes as f64 + JUDGMENT_WEIGHT * judgments as f64;
                estimated_total += predicted_cost;
                let p = probe.get(storyline);
                out.push(Row {
                    iteration: *storyline,
                    kind: (*kind).into(),
                    target: match target {
                        Target::Pose(p) => format!("pose-{p}"),
                        Target::Category(c) => format!("category-{c}"),
                    },
                    pose: *pose,
                    cost: *realized_cost,
                    estimated_cost: *predicted_cost,
                    cumulative_cost: *cumulative_cost,
                    cumulative_estimated_cost: estimated_total,
                    d_gen: realized_delta.gen,
                    d_cate: realized_delta.cate,
                    d_part: realized_delta.part,
                    risk: *risk,
                    boxes,
                    judgments,
                    cumulative_boxes: boxes_total,
                    cumulative_labels: labels_total,
                    app: p.map(|c| c.app),
                    aer: p.map(|c| c.aer),
                });
            }
            _ => {}
        }
    }
    out
}

pub fn write_csv(rows: &[Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

type Series<'a> = (&'a str, Vec<(f64, f64)>, RGBColor);

fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
) -> Result<()> {
    let points = series.iter().flat_map(|s| s.1.iter());
    let (mut x1, mut y0, mut y1) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !y0.is_finite() {
        bail!("nothing to plot for {title}");
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let root = SVGBackend::new(path, (720, 440)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(52)
        .build_cartesian_2d(0.0..x1.max(1.0), y0..y1)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()?;
    for (name, pts, color) in series {
        let c = *color;
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), c.stroke_width(2)))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// `curves.svg` (probe APP and AER against realized cost), `labels.svg` (APP
/// against both label accountings) and `risk.svg`.
pub fn write_plots(rows: &[Row], dir: &Path) -> Result<Vec<String>> {
    let probed: Vec<&Row> = rows.iter().filter(|r| r.app.is_some()).collect();
    let mut written = Vec::new();
    if !probed.is_empty() {
        let app = |x: fn(&Row) -> f64| {
            probed
                .iter()
                .map(|r| (x(r), r.app.unwrap_or_default()))
                .collect::<Vec<_>>()
        };
        let aer: Vec<(f64, f64)> = probed
            .iter()
            .map(|r| (r.cumulative_cost, r.aer.unwrap_or_default()))
            .collect();
        line_chart(
            &dir.join("curves.svg"),
            "Probe accuracy against annotation cost",
            "annotation cost",
            "rate",
            &[("APP", app(|r| r.cumulative_cost), BLUE), ("AER", aer, RED)],
        )?;
        written.push("curves.svg".to_string());
        line_chart(
            &dir.join("labels.svg"),
            "APP against labels",
            "labels",
            "APP",
            &[
                ("boxes only", app(|r| r.cumulative_boxes as f64), BLUE),
                (
                    "boxes + 0.2 x judgments",
                    app(|r| r.cumulative_labels),
                    GREEN,
                ),
            ],
        )?;
        written.push("labels.svg".to_string());
    }
    let risk: Vec<(f64, f64)> = rows.iter().map(|r| (r.cumulative_cost, r.risk)).collect();
    if !risk.is_empty() {
        line_chart(
            &dir.join("risk.svg"),
            "Risk against annotation cost",
            "annotation cost",
            "risk",
            &[("risk", risk, BLACK)],
        )?;
        written.push("risk.svg".to_string());
    }
    Ok(written)
}
