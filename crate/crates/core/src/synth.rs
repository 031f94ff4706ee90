//! Synthetic pages that violate one feature a chosen number of times.
//!
//! Image-class pages carry unoptimized images in the 600-700 KB range whose
//! geometry is derived from the viewport and policy parameters, so that each
//! image trips the requested check and nothing earlier in the precedence
//! order. Every page also carries compliant baseline content: a deferred
//! script, an `optional` font, an opacity transition and a small image.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use url::Url;

use crate::detect;
use crate::error::{Error, Result};
use crate::extract::{self, ReferenceKind, ResourceMap, ResourceRecord};
use crate::model::{
    EncodingClass, FeatureKind, FontDisplay, MediaElement, PageSnapshot, PixelSize, PolicySet,
    ViewportConfig,
};

pub const DEFAULT_IMAGE_BYTES: u64 = 650_000;
const SCRIPT_BYTES: usize = 16 * 1024;
const FONT_BYTES: usize = 24 * 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub count: usize,
    /// `font-display` for the generated `@font-face` rules (default `swap`).
    pub font_display: Option<FontDisplay>,
    pub viewport: ViewportConfig,
    pub policy: PolicySet,
    pub image_bytes: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            count: 1,
            font_display: None,
            viewport: ViewportConfig::default(),
            policy: PolicySet::all_defaults(),
            image_bytes: DEFAULT_IMAGE_BYTES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticPage {
    pub kind: FeatureKind,
    pub html: String,
    /// Asset bytes keyed by path relative to the page.
    pub assets: BTreeMap<String, Vec<u8>>,
}

impl SyntheticPage {
    /// Writes `index.html` and its assets under `dir`; returns the page path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (rel, bytes) in &self.assets {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        let index = dir.join("index.html");
        std::fs::write(&index, &self.html).map_err(|e| Error::io(&index, e))?;
        Ok(index)
    }

    /// Resource records as a fetch of the page at `base_url` would produce.
    pub fn resources(&self, base_url: &str) -> ResourceMap {
        let Ok(base) = Url::parse(base_url) else {
            return ResourceMap::new();
        };
        let mut map = ResourceMap::new();
        for (rel, bytes) in &self.assets {
            let Ok(url) = base.join(rel) else { continue };
            let (ct, kind) = asset_type(rel);
            map.insert(
                url.to_string(),
                ResourceRecord::from_body(url.as_str(), ct, bytes, kind),
            );
        }
        map
    }

    pub fn snapshot(&self, base_url: &str) -> PageSnapshot {
        extract::extract_snapshot(self.html.as_bytes(), base_url, &self.resources(base_url))
    }
}

fn asset_type(rel: &str) -> (&'static str, ReferenceKind) {
    match rel.rsplit('.').next() {
        Some("jpg") => ("image/jpeg", ReferenceKind::Image),
        Some("png") => ("image/png", ReferenceKind::Image),
        Some("js") => ("text/javascript", ReferenceKind::Script),
        Some("woff2") => ("font/woff2", ReferenceKind::Font),
        Some("css") => ("text/css", ReferenceKind::Stylesheet),
        _ => ("application/octet-stream", ReferenceKind::Image),
    }
}

/// A planned image: container, pixel size, declared box.
#[derive(Clone, Copy, Debug)]
struct ImagePlan {
    encoding: EncodingClass,
    natural: PixelSize,
    declared: Option<(u32, u32)>,
}

impl ImagePlan {
    fn as_media(&self, bytes: u64) -> MediaElement {
        let mut m =
            MediaElement::image(0, "synthetic").with_payload(self.natural, bytes, self.encoding);
        if let Some((w, h)) = self.declared {
            m = m.with_declared(Some(w), Some(h));
        }
        m
    }
}

fn param(ps: &PolicySet, kind: FeatureKind) -> f64 {
    ps.parameter(kind).map_or(1.0, |p| p.value())
}

fn plan_image(kind: FeatureKind, p: &SynthParams) -> Result<ImagePlan> {
    let vp = &p.viewport;
    let ps = &p.policy;
    let dpr = vp.device_pixel_ratio;
    let bytes = p.image_bytes as f64;
    let ratio = param(ps, FeatureKind::OversizedImages);
    let over_ps = ps.contains(FeatureKind::OversizedImages);
    let width_cap = |css_w: u32| -> f64 {
        if over_ps {
            (f64::from(css_w) * dpr * ratio).floor()
        } else {
            f64::from(u32::MAX)
        }
    };
    let unattainable = |reason: String| Error::InvalidConfig {
        what: "synthetic page",
        reason,
    };

    let plan = match kind {
        FeatureKind::OversizedImages => {
            let css_w = vp.width_css_px.min(160);
            let css_h = (css_w * 3 / 4).max(1);
            let w = ((f64::from(css_w) * dpr * ratio * 1.5).ceil() as u32).max(2);
            ImagePlan {
                encoding: EncodingClass::Lossy,
                natural: PixelSize::new(w, (w * 3 / 4).max(1)),
                declared: Some((css_w, css_h)),
            }
        }
        FeatureKind::LossyImagesMaxBpp | FeatureKind::LosslessImagesMaxBpp => {
            let encoding = if kind == FeatureKind::LossyImagesMaxBpp {
                EncodingClass::Lossy
            } else {
                EncodingClass::Lossless
            };
            let allowance = if encoding == EncodingClass::Lossless {
                detect::LOSSLESS_ALLOWANCE_BYTES as f64
            } else {
                0.0
            };
            let css_w = vp.width_css_px.min(320);
            // Keep bpp at least a quarter above the budget.
            let max_px = (bytes - allowance) * 8.0 / param(ps, kind) / 1.25;
            let w = 960f64
                .min(width_cap(css_w))
                .min((max_px * 4.0 / 3.0).sqrt())
                .floor() as u32;
            let h = (w * 3 / 4).max(1);
            ImagePlan {
                encoding,
                natural: PixelSize::new(w.max(1), h),
                declared: Some((css_w, height_for(css_w, w, h))),
            }
        }
        FeatureKind::LosslessImagesStrictMaxBpp => {
            // Exactly meets the lenient budget after the allowance, so only
            // the strict check (no allowance) fires.
            let lenient = if ps.contains(FeatureKind::LosslessImagesMaxBpp) {
                param(ps, FeatureKind::LosslessImagesMaxBpp)
            } else {
                param(ps, kind)
            };
            let css_w = vp.width_css_px;
            let w = 2160f64.min(width_cap(css_w)).max(1.0);
            let effective = bytes - detect::LOSSLESS_ALLOWANCE_BYTES as f64;
            let h = (effective * 8.0 / (lenient * w)).ceil().max(1.0);
            let (w, h) = (w as u32, h as u32);
            let css_h = ((f64::from(h) / (dpr * ratio)).ceil() as u32).max(height_for(css_w, w, h));
            ImagePlan {
                encoding: EncodingClass::Lossless,
                natural: PixelSize::new(w, h),
                declared: Some((css_w, css_h)),
            }
        }
        FeatureKind::UnsizedMedia => {
            // Fits the viewport-wide container and every bpp budget.
            let w = width_cap(vp.width_css_px).clamp(1.0, 2160.0);
            let strict = [
                FeatureKind::LosslessImagesMaxBpp,
                FeatureKind::LosslessImagesStrictMaxBpp,
            ]
            .into_iter()
            .filter(|k| ps.contains(*k))
            .map(|k| param(ps, k))
            .fold(f64::INFINITY, f64::min);
            let h = if strict.is_finite() {
                (bytes * 8.0 / (strict * w)).ceil()
            } else {
                (w * 3.0 / 4.0).floor()
            };
            ImagePlan {
                encoding: EncodingClass::Lossless,
                natural: PixelSize::new(w as u32, h.max(1.0) as u32),
                declared: None,
            }
        }
        other => return Err(unattainable(format!("{other} is not an image feature"))),
    };

    let m = plan.as_media(p.image_bytes);
    let got = detect::first_media_violation(&m, ps, vp, &detect::DetectOptions::default())
        .map(|(k, _)| k);
    if got != Some(kind) {
        return Err(unattainable(format!(
            "no {}x{} image of {} bytes violates {kind} first under this policy (got {got:?})",
            plan.natural.width, plan.natural.height, p.image_bytes
        )));
    }
    Ok(plan)
}

const BASELINE_CSS_W: u32 = 120;
const BASELINE_CSS_H: u32 = 90;
const BASELINE_IMAGE_BYTES: usize = 160;

/// Display-resolution pixels for the compliant image, never above 1x the
/// oversized budget and large enough to keep its bpp near zero.
fn baseline_natural(p: &SynthParams) -> PixelSize {
    let ratio = param(&p.policy, FeatureKind::OversizedImages).min(1.0);
    let scale = (p.viewport.device_pixel_ratio * ratio).max(1.0 / 64.0);
    let css_w = BASELINE_CSS_W.min(p.viewport.width_css_px);
    let w = ((f64::from(css_w) * scale).floor() as u32).max(1);
    PixelSize::new(w, (w * 3 / 4).max(1))
}

fn height_for(css_w: u32, w: u32, h: u32) -> u32 {
    ((u64::from(css_w) * u64::from(h)).div_ceil(u64::from(w.max(1))) as u32).max(1)
}

fn filler(seed: &str, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(crc32fast::hash(seed.as_bytes())));
    let mut buf = vec![0u8; len];
    rng.fill_bytes(&mut buf);
    buf
}

/// Baseline JPEG container: SOI, JFIF, SOF0, comment padding, EOI.
pub fn jpeg_bytes(size: PixelSize, total: usize, seed: &str) -> Vec<u8> {
    let mut out = vec![0xFF, 0xD8];
    out.extend_from_slice(&[
        0xFF, 0xE0, 0x00, 0x10, b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0,
    ]);
    out.extend_from_slice(&[0xFF, 0xC0, 0x00, 0x11, 0x08]);
    out.extend_from_slice(&(size.height as u16).to_be_bytes());
    out.extend_from_slice(&(size.width as u16).to_be_bytes());
    out.extend_from_slice(&[3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(crc32fast::hash(seed.as_bytes())));
    let mut remaining = total.saturating_sub(out.len() + 2);
    while remaining >= 4 {
        let take = (remaining - 4).min(65_533);
        out.extend_from_slice(&[0xFF, 0xFE]);
        out.extend_from_slice(&((take + 2) as u16).to_be_bytes());
        let start = out.len();
        out.resize(start + take, 0);
        rng.fill_bytes(&mut out[start..]);
        remaining -= take + 4;
    }
    out.resize(out.len() + remaining, 0);
    out.extend_from_slice(&[0xFF, 0xD9]);
    out
}

fn png_chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    let start = out.len();
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_be_bytes());
}

/// PNG container: signature, IHDR, one IDAT of padding, IEND.
pub fn png_bytes(size: PixelSize, total: usize, seed: &str) -> Vec<u8> {
    let mut out = b"\x89PNG\r\n\x1a\n".to_vec();
    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&size.width.to_be_bytes());
    ihdr.extend_from_slice(&size.height.to_be_bytes());
    ihdr.extend_from_slice(&[8, 2, 0, 0, 0]);
    png_chunk(&mut out, b"IHDR", &ihdr);
    // 12 bytes of framing each for IDAT and IEND.
    let idat_len = total.saturating_sub(out.len() + 24);
    png_chunk(&mut out, b"IDAT", &filler(seed, idat_len));
    png_chunk(&mut out, b"IEND", &[]);
    out
}

fn script_bytes(name: &str) -> Vec<u8> {
    let mut s = format!("// {name}\n");
    let mut i = 0;
    while s.len() < SCRIPT_BYTES {
        let _ = writeln!(s, "var v{i} = {};", i * 7 % 1000);
        i += 1;
    }
    s.truncate(SCRIPT_BYTES);
    s.into_bytes()
}

fn font_bytes(seed: &str) -> Vec<u8> {
    let mut out = b"wOF2".to_vec();
    out.extend(filler(seed, FONT_BYTES - 4));
    out
}

fn font_display_css(fd: FontDisplay) -> String {
    match fd {
        FontDisplay::Auto => String::new(),
        other => format!(";font-display:{other}"),
    }
}

pub fn generate_synthetic(kind: FeatureKind, p: &SynthParams) -> Result<SyntheticPage> {
    if !p.policy.contains(kind) {
        return Err(Error::InvalidConfig {
            what: "synthetic page",
            reason: format!("policy does not enable {kind}"),
        });
    }
    let n = p.count;
    let name = kind.name();
    let mut assets = BTreeMap::new();
    let mut head = String::new();
    let mut style = String::new();
    let mut body = String::new();

    assets.insert("js/app.js".to_owned(), script_bytes("app"));
    assets.insert("fonts/baseline.woff2".to_owned(), font_bytes("baseline"));
    assets.insert(
        "img/baseline.jpg".to_owned(),
        jpeg_bytes(baseline_natural(p), BASELINE_IMAGE_BYTES, "baseline"),
    );
    style.push_str(
        "@font-face{font-family:Baseline;src:url(fonts/baseline.woff2);font-display:optional}\n",
    );
    style.push_str(
        "body{margin:0;font-family:Baseline,sans-serif}\n.fade{transition:opacity .3s ease-in}\n",
    );

    match kind {
        FeatureKind::BlockingScript => {
            for i in 0..n {
                let rel = format!("js/blocking-{i}.js");
                let _ = writeln!(head, "<script src=\"{rel}\"></script>");
                assets.insert(rel, script_bytes(&format!("blocking {i}")));
            }
        }
        FeatureKind::FontDisplayLateSwap => {
            let fd = p.font_display.unwrap_or(FontDisplay::Swap);
            for i in 0..n {
                let rel = format!("fonts/late-{i}.woff2");
                let _ = writeln!(
                    style,
                    "@font-face{{font-family:Late{i};src:url({rel}){}}}",
                    font_display_css(fd)
                );
                let _ = writeln!(
                    body,
                    "<p style=\"font-family:Late{i}\">Swapped text {i}</p>"
                );
                assets.insert(rel, font_bytes(&format!("late {i}")));
            }
        }
        FeatureKind::LayoutAnimations => {
            for i in 0..n {
                let _ = writeln!(
                    style,
                    "@keyframes grow-{i}{{from{{width:40px}}to{{width:320px}}}}\n.grow-{i}{{animation:grow-{i} 1s infinite alternate}}"
                );
                let _ = writeln!(body, "<div class=\"grow-{i}\">Animated box {i}</div>");
            }
        }
        image_kind => {
            let plan = plan_image(image_kind, p)?;
            let ext = if plan.encoding == EncodingClass::Lossy {
                "jpg"
            } else {
                "png"
            };
            for i in 0..n {
                let rel = format!("img/{name}-{i}.{ext}");
                let seed = format!("{name} {i}");
                let bytes = match plan.encoding {
                    EncodingClass::Lossy => jpeg_bytes(plan.natural, p.image_bytes as usize, &seed),
                    _ => png_bytes(plan.natural, p.image_bytes as usize, &seed),
                };
                let dims = plan
                    .declared
                    .map(|(w, h)| format!(" width=\"{w}\" height=\"{h}\""))
                    .unwrap_or_default();
                let _ = writeln!(body, "<img src=\"{rel}\"{dims} alt=\"\">");
                assets.insert(rel, bytes);
            }
        }
    }

    let html = format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n\
         <title>{name} x{n}</title>\n<style>\n{style}</style>\n\
         <script src=\"js/app.js\" defer></script>\n{head}</head>\n<body>\n{body}\
         <p class=\"fade\">Baseline content.</p>\n\
         <img src=\"img/baseline.jpg\" width=\"{BASELINE_CSS_W}\" height=\"{BASELINE_CSS_H}\" alt=\"\">\n</body>\n</html>\n"
    );
    Ok(SyntheticPage { kind, html, assets })
}
