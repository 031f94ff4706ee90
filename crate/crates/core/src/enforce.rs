//! Simulated policy enforcement and the analytic load-time model.
//!
//! [`enforce`] rewrites a snapshot the way a browser applying the policy
//! would: offending images become placeholders, unsized media get the
//! default box, blocking scripts are deferred, late-swapping fonts become
//! `optional`, and layout animations are frozen. The timeline model is a
//! sequential fetch model: every fetch costs one round trip plus its
//! transfer time on the downlink.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detect::{self, DetectOptions};
use crate::layout::{self, SizingMode, DEFAULT_MEDIA_HEIGHT, DEFAULT_MEDIA_WIDTH};
use crate::model::{
    AnimationRule, AuditReport, EncodingClass, Estimate, FeatureKind, FontDisplay, MediaElement,
    MediaKind, NetworkProfile, PageSnapshot, PixelSize, PolicySet, ViewportConfig,
};

pub fn enforce(snapshot: &PageSnapshot, ps: &PolicySet, vp: &ViewportConfig) -> PageSnapshot {
    enforce_with(snapshot, ps, vp, &DetectOptions::default())
}

pub fn enforce_with(
    snapshot: &PageSnapshot,
    ps: &PolicySet,
    vp: &ViewportConfig,
    opts: &DetectOptions,
) -> PageSnapshot {
    let mut out = snapshot.clone();

    for m in &mut out.media {
        // Sizing first: it narrows the container the oversized check uses.
        if ps.contains(FeatureKind::UnsizedMedia) && detect::check_unsized(m) {
            m.declared_width_css_px = Some(DEFAULT_MEDIA_WIDTH as u32);
            m.declared_height_css_px = Some(DEFAULT_MEDIA_HEIGHT as u32);
        }
        if needs_placeholder(m, ps, vp, opts) {
            make_placeholder(m);
            out.diagnostics.placeholders += 1;
        }
    }

    if ps.contains(FeatureKind::BlockingScript) {
        for s in &mut out.scripts {
            if detect::check_blocking_script_with(s, opts) {
                s.has_defer = true;
            }
        }
    }
    if ps.contains(FeatureKind::FontDisplayLateSwap) {
        for f in &mut out.fonts {
            if detect::check_font_late_swap(f) {
                f.font_display = FontDisplay::Optional;
            }
        }
    }
    if ps.contains(FeatureKind::LayoutAnimations) {
        for a in &mut out.animations {
            if detect::check_layout_animation(a) {
                a.animated_properties = [AnimationRule::NO_MOTION.to_owned()].into();
                a.neutralized = true;
            }
        }
    }
    out
}

fn needs_placeholder(
    m: &MediaElement,
    ps: &PolicySet,
    vp: &ViewportConfig,
    opts: &DetectOptions,
) -> bool {
    if let Some(ratio) = ps.parameter(FeatureKind::OversizedImages) {
        let container = layout::media_container_width(m, vp);
        if detect::check_oversized(m, ratio.value(), container, vp).is_some() {
            return true;
        }
    }
    [
        FeatureKind::LossyImagesMaxBpp,
        FeatureKind::LosslessImagesMaxBpp,
        FeatureKind::LosslessImagesStrictMaxBpp,
    ]
    .into_iter()
    .any(|kind| {
        ps.parameter(kind)
            .is_some_and(|max| detect::check_bpp_with(m, kind, max.value(), opts).is_some())
    })
}

/// Drops the payload. A sized placeholder takes its declared box; an unsized
/// one keeps the intrinsic size so it occupies the same layout box as the
/// image it replaces.
fn make_placeholder(m: &mut MediaElement) {
    m.placeholder = true;
    m.encoded_bytes = Some(0);
    m.encoding_class = EncodingClass::Unknown;
    if let (Some(w), Some(h)) = (m.declared_width_css_px, m.declared_height_css_px) {
        if w > 0 && h > 0 {
            m.natural_size = Some(PixelSize::new(w, h));
        }
    }
}

/// Seconds to fetch `bytes`: one round trip plus transfer on the downlink.
pub fn fetch_time(bytes: u64, np: &NetworkProfile) -> f64 {
    np.rtt_ms / 1000.0 + (bytes as f64 * 8.0) / (np.downlink_kbps * 1000.0)
}

/// Layout facts the timeline depends on, fixed before enforcement so pre and
/// post estimates describe the same page elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderAnchors {
    /// Largest-area image whose top is above the fold.
    pub lcp_image: Option<usize>,
    /// Whether any non-empty box starts above the fold.
    pub content_above_fold: bool,
}

impl RenderAnchors {
    pub fn from_layout(snapshot: &PageSnapshot, vp: &ViewportConfig) -> Self {
        let boxes = layout::layout_pass(snapshot, vp, SizingMode::Final);
        let fold = vp.height();
        let mut lcp: Option<(usize, f64)> = None;
        for (m, b) in snapshot.media.iter().zip(&boxes) {
            let area = b.w * b.h;
            if m.media_kind != MediaKind::Image || b.y >= fold || area <= 0.0 {
                continue;
            }
            if lcp.is_none_or(|(_, best)| area > best) {
                lcp = Some((m.id, area));
            }
        }
        RenderAnchors {
            lcp_image: lcp.map(|(id, _)| id),
            content_above_fold: boxes.iter().any(|b| b.y < fold && b.w * b.h > 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub first_render_s: f64,
    pub lcp_s: f64,
}

pub fn estimate_timeline(
    snapshot: &PageSnapshot,
    np: &NetworkProfile,
    vp: &ViewportConfig,
) -> Timeline {
    estimate_timeline_anchored(snapshot, np, &RenderAnchors::from_layout(snapshot, vp))
}

/// First render waits for the document and every blocking script in turn;
/// LCP adds the hero image and the slowest late-swapping font.
pub fn estimate_timeline_anchored(
    snapshot: &PageSnapshot,
    np: &NetworkProfile,
    anchors: &RenderAnchors,
) -> Timeline {
    let blocking: f64 = snapshot
        .scripts
        .iter()
        .filter(|s| detect::check_blocking_script(s))
        .map(|s| fetch_time(s.encoded_bytes.unwrap_or(0), np))
        .sum();
    let first_render_s = fetch_time(snapshot.html_bytes, np) + blocking;

    let hero = anchors
        .lcp_image
        .and_then(|id| snapshot.media_by_id(id))
        .filter(|m| !m.placeholder)
        .map_or(0.0, |m| fetch_time(m.encoded_bytes.unwrap_or(0), np));
    let font_penalty = if anchors.content_above_fold {
        snapshot
            .fonts
            .iter()
            .filter(|f| detect::check_font_late_swap(f))
            .map(|f| fetch_time(f.encoded_bytes.unwrap_or(0), np))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Timeline {
        first_render_s,
        lcp_s: first_render_s + hero + font_penalty,
    }
}

pub fn report(
    snapshot: &PageSnapshot,
    ps: &PolicySet,
    vp: &ViewportConfig,
    np: &NetworkProfile,
) -> AuditReport {
    report_with(snapshot, ps, vp, np, &DetectOptions::default())
}

/// Audits a page and estimates what enforcing `ps` would change.
pub fn report_with(
    snapshot: &PageSnapshot,
    ps: &PolicySet,
    vp: &ViewportConfig,
    np: &NetworkProfile,
    opts: &DetectOptions,
) -> AuditReport {
    let violations = detect::audit_with(snapshot, ps, vp, opts);
    let mut counts_per_feature: BTreeMap<FeatureKind, usize> = ps.kinds().map(|k| (k, 0)).collect();
    for v in &violations {
        *counts_per_feature.entry(v.feature_kind).or_default() += 1;
    }

    let enforced = enforce_with(snapshot, ps, vp, opts);
    let anchors = RenderAnchors::from_layout(snapshot, vp);
    let pre = estimate_timeline_anchored(snapshot, np, &anchors);
    let post = estimate_timeline_anchored(&enforced, np, &anchors);
    let cls_pre = layout::estimate_cls(snapshot, vp).total;
    let cls_post = layout::estimate_cls(&enforced, vp).total;

    let bytes_saved_estimate = snapshot
        .media
        .iter()
        .zip(&enforced.media)
        .map(|(a, b)| {
            a.encoded_bytes
                .unwrap_or(0)
                .saturating_sub(b.encoded_bytes.unwrap_or(0))
        })
        .sum();

    AuditReport {
        url: snapshot.url.clone(),
        violations,
        counts_per_feature,
        bytes_saved_estimate,
        first_render_estimate_s: Estimate {
            pre: pre.first_render_s,
            post: post.first_render_s,
        },
        lcp_estimate_s: Estimate {
            pre: pre.lcp_s,
            post: post.lcp_s,
        },
        cls_estimate: Estimate {
            pre: cls_pre,
            post: cls_post,
        },
    }
}
