//! Vertical-stack layout estimator and layout-shift scoring.
//!
//! Media are stacked top to bottom at `x = 0` in document order, followed by
//! a block of text standing in for the content below them. No floats, flex
//! or grid: the detectors need container widths and fold position, and the
//! shift model needs to know how far content moves when an unsized medium
//! receives its real size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MediaElement, PageSnapshot, ViewportConfig};

/// Default placeholder box for media without declared dimensions.
pub const DEFAULT_MEDIA_WIDTH: f64 = 300.0;
pub const DEFAULT_MEDIA_HEIGHT: f64 = 150.0;

/// Moves smaller than this are not reported as shifts.
pub const SHIFT_THRESHOLD_PX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxOwner {
    Media(usize),
    TrailingText,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementBox {
    pub owner: BoxOwner,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl ElementBox {
    fn rect(&self) -> Rect {
        Rect {
            x0: self.x,
            y0: self.y,
            x1: self.x + self.w,
            y1: self.y + self.h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizingMode {
    /// Before any medium has loaded: unsized media occupy nothing.
    Initial,
    /// Every medium at its loaded size.
    Final,
    /// Unsized media forced to the 300x150 default.
    Enforced,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayoutOptions {
    pub trailing_text_height: f64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            trailing_text_height: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftEvent {
    pub trigger_media_id: usize,
    pub impact_fraction: f64,
    pub distance_fraction: f64,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClsEstimate {
    pub total: f64,
    pub events: Vec<ShiftEvent>,
}

/// Axis-aligned rectangle, half-open in both axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn clip(&self, to: &Rect) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(to.x0),
            y0: self.y0.max(to.y0),
            x1: self.x1.min(to.x1),
            y1: self.y1.min(to.y1),
        };
        (r.x1 > r.x0 && r.y1 > r.y0).then_some(r)
    }

    /// Smallest rectangle covering both.
    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    fn contains_cell(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
        self.x0 <= x0 && x1 <= self.x1 && self.y0 <= y0 && y1 <= self.y1
    }
}

/// Area of the union of `rects` within `clip`, by coordinate compression.
pub fn union_area(rects: &[Rect], clip: &Rect) -> f64 {
    let clipped: Vec<Rect> = rects.iter().filter_map(|r| r.clip(clip)).collect();
    if clipped.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = clipped.iter().flat_map(|r| [r.x0, r.x1]).collect();
    let mut ys: Vec<f64> = clipped.iter().flat_map(|r| [r.y0, r.y1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            if clipped
                .iter()
                .any(|r| r.contains_cell(xw[0], yw[0], xw[1], yw[1]))
            {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}

fn viewport_rect(vp: &ViewportConfig) -> Rect {
    Rect {
        x0: 0.0,
        y0: 0.0,
        x1: vp.width(),
        y1: vp.height(),
    }
}

/// Size of a medium once loaded, scaled to fit the viewport width.
pub fn final_size(m: &MediaElement, vp: &ViewportConfig) -> (f64, f64) {
    let vw = vp.width();
    let dw = m.declared_width_css_px.map(f64::from);
    let dh = m.declared_height_css_px.map(f64::from);
    if let (Some(w), Some(h)) = (dw, dh) {
        return (w.min(vw), h);
    }
    let Some(natural) = m.natural_size else {
        return (dw.unwrap_or(0.0).min(vw), dh.unwrap_or(0.0));
    };
    let (nw, nh) = (f64::from(natural.width), f64::from(natural.height));
    match (dw, dh) {
        (Some(w), None) => {
            let w = w.min(vw);
            (w, nh * w / nw)
        }
        (None, Some(h)) => ((nw * h / nh).min(vw), h),
        _ => {
            let w = nw.min(vw);
            (w, nh * w / nw)
        }
    }
}

fn mode_size(m: &MediaElement, vp: &ViewportConfig, mode: SizingMode) -> (f64, f64) {
    if m.is_sized() {
        return final_size(m, vp);
    }
    match mode {
        SizingMode::Initial => (0.0, 0.0),
        SizingMode::Final => final_size(m, vp),
        SizingMode::Enforced => (DEFAULT_MEDIA_WIDTH.min(vp.width()), DEFAULT_MEDIA_HEIGHT),
    }
}

fn stack(
    media: &[MediaElement],
    sizes: &[(f64, f64)],
    vp: &ViewportConfig,
    opts: &LayoutOptions,
) -> Vec<ElementBox> {
    let mut y = 0.0;
    let mut boxes = Vec::with_capacity(media.len() + 1);
    for (m, &(w, h)) in media.iter().zip(sizes) {
        boxes.push(ElementBox {
            owner: BoxOwner::Media(m.id),
            x: 0.0,
            y,
            w,
            h,
        });
        y += h;
    }
    boxes.push(ElementBox {
        owner: BoxOwner::TrailingText,
        x: 0.0,
        y,
        w: vp.width(),
        h: opts.trailing_text_height,
    });
    boxes
}

pub fn layout_pass(
    snapshot: &PageSnapshot,
    vp: &ViewportConfig,
    mode: SizingMode,
) -> Vec<ElementBox> {
    layout_pass_with(snapshot, vp, mode, &LayoutOptions::default())
}

pub fn layout_pass_with(
    snapshot: &PageSnapshot,
    vp: &ViewportConfig,
    mode: SizingMode,
    opts: &LayoutOptions,
) -> Vec<ElementBox> {
    let sizes: Vec<_> = snapshot
        .media
        .iter()
        .map(|m| mode_size(m, vp, mode))
        .collect();
    stack(&snapshot.media, &sizes, vp, opts)
}

/// Width of the box a medium is laid out in: its declared width clamped to
/// the viewport, or the full viewport width.
pub fn container_width(
    snapshot: &PageSnapshot,
    vp: &ViewportConfig,
    media_id: usize,
) -> Result<f64> {
    let m = snapshot
        .media_by_id(media_id)
        .ok_or(Error::UnknownMedia(media_id))?;
    Ok(media_container_width(m, vp))
}

pub(crate) fn media_container_width(m: &MediaElement, vp: &ViewportConfig) -> f64 {
    m.declared_width_css_px
        .map_or(vp.width(), |w| f64::from(w).min(vp.width()))
}

pub fn estimate_cls(snapshot: &PageSnapshot, vp: &ViewportConfig) -> ClsEstimate {
    estimate_cls_with(snapshot, vp, &LayoutOptions::default())
}

/// Replays media loads in document order from the initial layout and scores
/// every load that moves visible content. A moved box contributes the whole
/// span it travels through, from its old position to its new one.
pub fn estimate_cls_with(
    snapshot: &PageSnapshot,
    vp: &ViewportConfig,
    opts: &LayoutOptions,
) -> ClsEstimate {
    let media = &snapshot.media;
    let view = viewport_rect(vp);
    let mut sizes: Vec<_> = media
        .iter()
        .map(|m| mode_size(m, vp, SizingMode::Initial))
        .collect();
    let mut estimate = ClsEstimate::default();

    for (idx, m) in media.iter().enumerate() {
        if m.is_sized() {
            continue;
        }
        let before = stack(media, &sizes, vp, opts);
        sizes[idx] = final_size(m, vp);
        let after = stack(media, &sizes, vp, opts);

        let mut regions = Vec::new();
        let mut max_move: f64 = 0.0;
        for (j, (b, a)) in before.iter().zip(&after).enumerate() {
            if j == idx {
                continue;
            }
            let dy = (a.y - b.y).abs();
            if dy < SHIFT_THRESHOLD_PX || b.w <= 0.0 || b.h <= 0.0 {
                continue;
            }
            let swept = b.rect().hull(&a.rect());
            if swept.clip(&view).is_some() {
                regions.push(swept);
                max_move = max_move.max(dy);
            }
        }
        if regions.is_empty() {
            continue;
        }
        let impact_fraction = (union_area(&regions, &view) / vp.area()).clamp(0.0, 1.0);
        let distance_fraction = max_move.min(vp.height()) / vp.height();
        estimate.events.push(ShiftEvent {
            trigger_media_id: m.id,
            impact_fraction,
            distance_fraction,
            score: impact_fraction * distance_fraction,
        });
    }
    estimate.total = estimate.events.iter().map(|e| e.score).sum();
    estimate
}
