//! Policy violation detection.
//!
//! Media run through the image-class checks in a fixed order and stop at the
//! first one that fires, so one element never counts twice. Scripts, fonts
//! and animations are checked independently.

use crate::layout::{self, SizingMode};
use crate::model::{
    AnimationRule, ElementClass, EncodingClass, FeatureKind, FontDisplay, FontFaceRule,
    MediaElement, MediaKind, PageSnapshot, PolicySet, ScriptElement, ViewportConfig, Violation,
};

/// Bytes of a lossless image not charged against `lossless-images-max-bpp`.
pub const LOSSLESS_ALLOWANCE_BYTES: u64 = 10 * 1024;

/// Order in which image-class checks run; the first to fire is reported.
pub const MEDIA_PRECEDENCE: [FeatureKind; 5] = [
    FeatureKind::OversizedImages,
    FeatureKind::LossyImagesMaxBpp,
    FeatureKind::LosslessImagesMaxBpp,
    FeatureKind::LosslessImagesStrictMaxBpp,
    FeatureKind::UnsizedMedia,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectOptions {
    /// Treat inline scripts without async/defer as blocking too.
    pub include_inline_scripts: bool,
    pub lossless_allowance_bytes: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            include_inline_scripts: false,
            lossless_allowance_bytes: LOSSLESS_ALLOWANCE_BYTES,
        }
    }
}

/// Measured value and the limit it was compared against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub measured: f64,
    pub threshold: f64,
}

/// Properties whose animation forces layout.
pub fn is_layout_property(name: &str) -> bool {
    let name = name.trim().to_ascii_lowercase();
    let name = name.as_str();
    matches!(
        name,
        "width"
            | "height"
            | "top"
            | "left"
            | "right"
            | "bottom"
            | "inset"
            | "flex-basis"
            | "font-size"
    ) || name.starts_with("inset-")
        || name.starts_with("margin")
        || name.starts_with("padding")
        || (name.starts_with("border") && name.ends_with("width"))
}

/// Oversized check. Width is always compared; height only when declared.
pub fn check_oversized(
    m: &MediaElement,
    ratio: f64,
    container_css_w: f64,
    vp: &ViewportConfig,
) -> Option<Measurement> {
    if m.media_kind != MediaKind::Image || m.placeholder {
        return None;
    }
    let natural = m.natural_size?;
    let width_limit = container_css_w * vp.device_pixel_ratio * ratio;
    let measured = f64::from(natural.width);
    if measured > width_limit {
        return Some(Measurement {
            measured,
            threshold: width_limit,
        });
    }
    let declared_h = m.declared_height_css_px?;
    let height_limit = f64::from(declared_h) * vp.device_pixel_ratio * ratio;
    let measured = f64::from(natural.height);
    (measured > height_limit).then_some(Measurement {
        measured,
        threshold: height_limit,
    })
}

pub fn check_bpp(m: &MediaElement, feature: FeatureKind, max_bpp: f64) -> Option<Measurement> {
    check_bpp_with(m, feature, max_bpp, &DetectOptions::default())
}

/// Bits-per-pixel check for one of the three bpp features.
pub fn check_bpp_with(
    m: &MediaElement,
    feature: FeatureKind,
    max_bpp: f64,
    opts: &DetectOptions,
) -> Option<Measurement> {
    if m.media_kind != MediaKind::Image || m.placeholder {
        return None;
    }
    let (wanted, allowance) = match feature {
        FeatureKind::LossyImagesMaxBpp => (EncodingClass::Lossy, 0),
        FeatureKind::LosslessImagesMaxBpp => {
            (EncodingClass::Lossless, opts.lossless_allowance_bytes)
        }
        FeatureKind::LosslessImagesStrictMaxBpp => (EncodingClass::Lossless, 0),
        _ => return None,
    };
    if m.encoding_class != wanted {
        return None;
    }
    let natural = m.natural_size?;
    let bytes = m.encoded_bytes?;
    let pixels = natural.area();
    if pixels == 0 {
        return None;
    }
    let effective = bytes.saturating_sub(allowance);
    let measured = (effective * 8) as f64 / pixels as f64;
    (measured > max_bpp).then_some(Measurement {
        measured,
        threshold: max_bpp,
    })
}

pub fn check_unsized(m: &MediaElement) -> bool {
    !m.is_sized()
}

pub fn check_blocking_script(s: &ScriptElement) -> bool {
    check_blocking_script_with(s, &DetectOptions::default())
}

pub fn check_blocking_script_with(s: &ScriptElement, opts: &DetectOptions) -> bool {
    (s.is_external() || opts.include_inline_scripts) && !s.has_async && !s.has_defer && !s.is_module
}

/// `auto`, `block` and `swap` all allow a swap after the short block period.
pub fn check_font_late_swap(f: &FontFaceRule) -> bool {
    matches!(
        f.font_display,
        FontDisplay::Auto | FontDisplay::Block | FontDisplay::Swap
    )
}

pub fn check_layout_animation(a: &AnimationRule) -> bool {
    !a.neutralized && a.animated_properties.iter().any(|p| is_layout_property(p))
}

/// First image-class feature in precedence order that this medium violates.
pub fn first_media_violation(
    m: &MediaElement,
    ps: &PolicySet,
    vp: &ViewportConfig,
    opts: &DetectOptions,
) -> Option<(FeatureKind, Option<Measurement>)> {
    for kind in MEDIA_PRECEDENCE {
        if !ps.contains(kind) {
            continue;
        }
        let param = ps.parameter(kind).map(|p| p.value());
        let hit = match kind {
            FeatureKind::OversizedImages => {
                check_oversized(m, param?, layout::media_container_width(m, vp), vp).map(Some)
            }
            FeatureKind::UnsizedMedia => check_unsized(m).then_some(None),
            bpp => check_bpp_with(m, bpp, param?, opts).map(Some),
        };
        if let Some(measurement) = hit {
            return Some((kind, measurement));
        }
    }
    None
}

pub fn audit(snapshot: &PageSnapshot, ps: &PolicySet, vp: &ViewportConfig) -> Vec<Violation> {
    audit_with(snapshot, ps, vp, &DetectOptions::default())
}

pub fn audit_with(
    snapshot: &PageSnapshot,
    ps: &PolicySet,
    vp: &ViewportConfig,
    opts: &DetectOptions,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if ps.is_empty() {
        return out;
    }
    let boxes = layout::layout_pass(snapshot, vp, SizingMode::Final);
    for (m, b) in snapshot.media.iter().zip(&boxes) {
        if let Some((kind, measurement)) = first_media_violation(m, ps, vp, opts) {
            out.push(Violation {
                feature_kind: kind,
                element_id: m.id,
                element_class: ElementClass::Media,
                measured: measurement.map(|x| x.measured),
                threshold: measurement.map(|x| x.threshold),
                above_fold: b.y < vp.height(),
            });
        }
    }
    let simple = |kind, element_id, element_class| Violation {
        feature_kind: kind,
        element_id,
        element_class,
        measured: None,
        threshold: None,
        above_fold: false,
    };
    if ps.contains(FeatureKind::BlockingScript) {
        out.extend(
            snapshot
                .scripts
                .iter()
                .filter(|s| check_blocking_script_with(s, opts))
                .map(|s| simple(FeatureKind::BlockingScript, s.id, ElementClass::Script)),
        );
    }
    if ps.contains(FeatureKind::FontDisplayLateSwap) {
        out.extend(
            snapshot
                .fonts
                .iter()
                .enumerate()
                .filter(|(_, f)| check_font_late_swap(f))
                .map(|(i, _)| simple(FeatureKind::FontDisplayLateSwap, i, ElementClass::Font)),
        );
    }
    if ps.contains(FeatureKind::LayoutAnimations) {
        out.extend(
            snapshot
                .animations
                .iter()
                .enumerate()
                .filter(|(_, a)| check_layout_animation(a))
                .map(|(i, _)| simple(FeatureKind::LayoutAnimations, i, ElementClass::Animation)),
        );
    }
    out
}
