//! HTML to [`PageSnapshot`] extraction.
//!
//! Extraction is total: any byte sequence yields a snapshot. Markup the
//! parser had to repair and CSS it could not read are tallied in
//! [`Diagnostics`] rather than reported as errors.

use std::collections::{BTreeMap, BTreeSet};

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::css::{self, Declaration, Rule, Stylesheet};
use crate::model::{
    AnimationMechanism, AnimationRule, Diagnostics, EncodingClass, FontDisplay, FontFaceRule,
    MediaElement, MediaKind, PageSnapshot, PixelSize, ScriptElement,
};
use crate::sniff::sniff_image;

/// Metadata about one fetched subresource.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub url: String,
    pub bytes: u64,
    pub content_type: String,
    /// Known only for image containers whose header could be read.
    pub image_dims: Option<PixelSize>,
    pub image_encoding: EncodingClass,
    /// Body text, kept for stylesheets only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stylesheet_text: Option<String>,
}

impl ResourceRecord {
    pub fn from_body(
        url: impl Into<String>,
        content_type: impl Into<String>,
        body: &[u8],
        kind: ReferenceKind,
    ) -> Self {
        let content_type = content_type.into();
        let image = sniff_image(body);
        let is_css = kind == ReferenceKind::Stylesheet || content_type.contains("css");
        ResourceRecord {
            url: url.into(),
            bytes: body.len() as u64,
            image_dims: image.and_then(|i| i.size),
            image_encoding: image
                .filter(|i| i.size.is_some())
                .map_or(EncodingClass::Unknown, |i| i.encoding),
            stylesheet_text: is_css.then(|| String::from_utf8_lossy(body).into_owned()),
            content_type,
        }
    }
}

pub type ResourceMap = BTreeMap<String, ResourceRecord>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReferenceKind {
    Image,
    Video,
    Script,
    Stylesheet,
    Font,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reference {
    pub url: String,
    pub kind: ReferenceKind,
}

struct RawMedia {
    kind: MediaKind,
    url: Option<String>,
    declared_width: Option<u32>,
    declared_height: Option<u32>,
}

struct RawScript {
    url: Option<String>,
    has_async: bool,
    has_defer: bool,
    is_module: bool,
}

/// One parse of the document, shared by extraction and reference discovery.
struct ParsedPage {
    base: Option<Url>,
    media: Vec<RawMedia>,
    scripts: Vec<RawScript>,
    stylesheet_links: Vec<String>,
    inline_sheets: Vec<Stylesheet>,
    inline_transitions: Vec<(String, Vec<Declaration>)>,
    diagnostics: Diagnostics,
}

fn selector(s: &str) -> Selector {
    Selector::parse(s).expect("static selector")
}

fn resolve(base: Option<&Url>, raw: &str, diagnostics: &mut Diagnostics) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    let resolved = match base {
        Some(b) => b.join(raw),
        None => Url::parse(raw),
    };
    match resolved {
        Ok(u) => Some(u.to_string()),
        Err(_) => {
            diagnostics.unresolved_urls += 1;
            None
        }
    }
}

/// HTML dimension attribute: leading digits, percentages ignored.
fn dimension_attr(value: Option<&str>) -> Option<u32> {
    let v = value?.trim();
    let end = v
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(v.len());
    if v[end..].trim_start().starts_with('%') {
        return None;
    }
    let n: f64 = v[..end].parse().ok()?;
    n.is_finite()
        .then(|| n.round().min(f64::from(u32::MAX)) as u32)
}

fn first_srcset_candidate(srcset: &str) -> Option<&str> {
    let first = srcset.split(',').next()?.trim();
    first.split_whitespace().next()
}

fn declared_sizes(
    el: &ElementRef<'_>,
    diagnostics: &mut Diagnostics,
) -> (Option<u32>, Option<u32>) {
    let mut width = dimension_attr(el.attr("width"));
    let mut height = dimension_attr(el.attr("height"));
    if let Some(style) = el.attr("style") {
        let (decls, bad) = css::parse_declarations(style);
        diagnostics.malformed_css += bad;
        for d in &decls {
            match d.name.as_str() {
                "width" if width.is_none() => width = css::absolute_px(d.plain_value()),
                "height" if height.is_none() => height = css::absolute_px(d.plain_value()),
                _ => {}
            }
        }
    }
    (width, height)
}

fn parse_page(html: &[u8], base_url: &str) -> ParsedPage {
    let text = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&text);
    let mut diagnostics = Diagnostics {
        html_parse_errors: doc.errors.len(),
        ..Diagnostics::default()
    };

    let mut base = Url::parse(base_url).ok();
    if base.is_none() && !base_url.is_empty() {
        diagnostics.unresolved_urls += 1;
    }
    if let Some(href) = doc
        .select(&selector("base[href]"))
        .next()
        .and_then(|b| b.attr("href"))
    {
        let joined = match &base {
            Some(b) => b.join(href.trim()).ok(),
            None => Url::parse(href.trim()).ok(),
        };
        if joined.is_some() {
            base = joined;
        }
    }

    let mut page = ParsedPage {
        base,
        media: Vec::new(),
        scripts: Vec::new(),
        stylesheet_links: Vec::new(),
        inline_sheets: Vec::new(),
        inline_transitions: Vec::new(),
        diagnostics,
    };
    let interesting = selector("img, video, script, style, link, [style]");
    let source_sel = selector("source");

    for el in doc.select(&interesting) {
        let name = el.value().name();
        let diag = &mut page.diagnostics;
        match name {
            "img" => {
                let mut raw_src = None;
                let in_picture = el
                    .parent()
                    .and_then(ElementRef::wrap)
                    .filter(|p| p.value().name() == "picture");
                if let Some(picture) = in_picture {
                    if let Some(cand) = picture
                        .select(&source_sel)
                        .find_map(|s| s.attr("srcset").and_then(first_srcset_candidate))
                    {
                        diag.srcset_first_candidate += 1;
                        raw_src = Some(cand.to_owned());
                    }
                }
                if raw_src.is_none() {
                    raw_src = el
                        .attr("src")
                        .filter(|s| !s.trim().is_empty())
                        .map(str::to_owned);
                }
                if raw_src.is_none() {
                    if let Some(cand) = el.attr("srcset").and_then(first_srcset_candidate) {
                        diag.srcset_first_candidate += 1;
                        raw_src = Some(cand.to_owned());
                    }
                }
                let url = raw_src.and_then(|s| resolve(page.base.as_ref(), &s, diag));
                let (w, h) = declared_sizes(&el, diag);
                page.media.push(RawMedia {
                    kind: MediaKind::Image,
                    url,
                    declared_width: w,
                    declared_height: h,
                });
            }
            "video" => {
                let raw_src = el
                    .attr("src")
                    .filter(|s| !s.trim().is_empty())
                    .or_else(|| el.select(&source_sel).find_map(|s| s.attr("src")))
                    .map(str::to_owned);
                let url = raw_src.and_then(|s| resolve(page.base.as_ref(), &s, diag));
                let (w, h) = declared_sizes(&el, diag);
                page.media.push(RawMedia {
                    kind: MediaKind::Video,
                    url,
                    declared_width: w,
                    declared_height: h,
                });
            }
            "script" => {
                let url = el
                    .attr("src")
                    .and_then(|s| resolve(page.base.as_ref(), s, diag));
                let is_module = el
                    .attr("type")
                    .is_some_and(|t| t.trim().eq_ignore_ascii_case("module"));
                page.scripts.push(RawScript {
                    url,
                    has_async: el.attr("async").is_some(),
                    has_defer: el.attr("defer").is_some(),
                    is_module,
                });
            }
            "style" => {
                let sheet = css::parse_stylesheet(&el.text().collect::<String>());
                diag.malformed_css += sheet.malformed;
                page.inline_sheets.push(sheet);
            }
            "link" => {
                let is_sheet = el.attr("rel").is_some_and(|r| {
                    r.split_ascii_whitespace()
                        .any(|t| t.eq_ignore_ascii_case("stylesheet"))
                });
                if is_sheet {
                    if let Some(u) = el
                        .attr("href")
                        .and_then(|h| resolve(page.base.as_ref(), h, diag))
                    {
                        page.stylesheet_links.push(u);
                    }
                }
            }
            _ => {}
        }
        // Inline transitions on any element. Media sizing was read above.
        if let Some(style) = el.attr("style") {
            let (decls, _) = css::parse_declarations(style);
            if decls.iter().any(|d| d.name.starts_with("transition")) {
                page.inline_transitions
                    .push((format!("{name}[style]"), decls));
            }
        }
    }
    page
}

/// Subresources a page references directly: media, scripts, stylesheets, and
/// fonts declared in same-document `<style>` blocks.
pub fn html_references(html: &[u8], base_url: &str) -> Vec<Reference> {
    let page = parse_page(html, base_url);
    let mut refs = BTreeSet::new();
    for m in &page.media {
        if let Some(u) = &m.url {
            let kind = match m.kind {
                MediaKind::Image => ReferenceKind::Image,
                MediaKind::Video => ReferenceKind::Video,
            };
            refs.insert(Reference {
                url: u.clone(),
                kind,
            });
        }
    }
    for s in &page.scripts {
        if let Some(u) = &s.url {
            refs.insert(Reference {
                url: u.clone(),
                kind: ReferenceKind::Script,
            });
        }
    }
    for u in &page.stylesheet_links {
        refs.insert(Reference {
            url: u.clone(),
            kind: ReferenceKind::Stylesheet,
        });
    }
    let mut scratch = Diagnostics::default();
    for sheet in &page.inline_sheets {
        for f in font_faces(sheet, page.base.as_ref(), &mut scratch) {
            refs.insert(Reference {
                url: f.source_url,
                kind: ReferenceKind::Font,
            });
        }
    }
    refs.into_iter().collect()
}

/// Fonts referenced by an external stylesheet, resolved against its own URL.
pub fn stylesheet_font_references(css_text: &str, sheet_url: &str) -> Vec<Reference> {
    let sheet = css::parse_stylesheet(css_text);
    let base = Url::parse(sheet_url).ok();
    let mut scratch = Diagnostics::default();
    font_faces(&sheet, base.as_ref(), &mut scratch)
        .into_iter()
        .map(|f| Reference {
            url: f.source_url,
            kind: ReferenceKind::Font,
        })
        .collect()
}

fn font_faces(
    sheet: &Stylesheet,
    base: Option<&Url>,
    diagnostics: &mut Diagnostics,
) -> Vec<FontFaceRule> {
    let mut out = Vec::new();
    for rule in &sheet.rules {
        let Rule::FontFace(decls) = rule else {
            continue;
        };
        let mut family = String::new();
        let mut src = None;
        let mut display = FontDisplay::Auto;
        for d in decls {
            match d.name.as_str() {
                "font-family" => {
                    family = d.plain_value().trim_matches(['"', '\'']).to_owned();
                }
                "src" => src = css::first_url(d.plain_value()),
                "font-display" => display = d.plain_value().parse().unwrap_or_default(),
                _ => {}
            }
        }
        let Some(url) = src.and_then(|s| resolve(base, &s, diagnostics)) else {
            diagnostics.malformed_css += 1;
            continue;
        };
        out.push(FontFaceRule {
            family,
            source_url: url,
            font_display: display,
            encoded_bytes: None,
        });
    }
    out
}

const TRANSITION_KEYWORDS: &[&str] = &[
    "ease",
    "linear",
    "ease-in",
    "ease-out",
    "ease-in-out",
    "step-start",
    "step-end",
    "normal",
    "allow-discrete",
    "initial",
    "inherit",
    "unset",
];

fn is_time(token: &str) -> bool {
    let num = token.strip_suffix("ms").or_else(|| token.strip_suffix('s'));
    num.is_some_and(|n| n.parse::<f64>().is_ok())
}

/// Properties named by `transition` / `transition-property` declarations in a block.
fn transition_properties(decls: &[Declaration]) -> BTreeSet<String> {
    let last = decls
        .iter()
        .rev()
        .find(|d| d.name == "transition" || d.name == "transition-property");
    let Some(decl) = last else {
        return BTreeSet::new();
    };
    let value = decl.plain_value().to_ascii_lowercase();
    let mut props = BTreeSet::new();
    for segment in css::split_commas(&value) {
        if decl.name == "transition-property" {
            if segment != "none" {
                props.insert(segment.to_owned());
            }
            continue;
        }
        if segment == "none" {
            continue;
        }
        let prop = segment
            .split_whitespace()
            .find(|t| {
                !is_time(t)
                    && !TRANSITION_KEYWORDS.contains(t)
                    && !t.starts_with("steps(")
                    && !t.starts_with("cubic-bezier(")
                    && !t.starts_with("linear(")
            })
            .unwrap_or("all");
        props.insert(prop.to_owned());
    }
    props
}

fn keyframe_properties(frames: &[Vec<Declaration>]) -> BTreeSet<String> {
    frames
        .iter()
        .flatten()
        .filter(|d| !d.name.starts_with("animation-"))
        .map(|d| d.name.clone())
        .collect()
}

fn animations(sheet: &Stylesheet, transitions: bool) -> Vec<AnimationRule> {
    let mut out = Vec::new();
    for rule in &sheet.rules {
        match rule {
            Rule::Keyframes { name, frames } => {
                let props = keyframe_properties(frames);
                if !props.is_empty() {
                    out.push(AnimationRule {
                        selector: format!("@keyframes {name}"),
                        animated_properties: props,
                        mechanism: AnimationMechanism::Keyframes,
                        neutralized: false,
                    });
                }
            }
            Rule::Style {
                selector,
                declarations,
            } if transitions => {
                let props = transition_properties(declarations);
                if !props.is_empty() {
                    out.push(AnimationRule {
                        selector: selector.clone(),
                        animated_properties: props,
                        mechanism: AnimationMechanism::Transition,
                        neutralized: false,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

/// Builds the analysis-ready snapshot of a page from its HTML and fetched resources.
pub fn extract_snapshot(html: &[u8], base_url: &str, resources: &ResourceMap) -> PageSnapshot {
    let mut page = parse_page(html, base_url);
    let mut snapshot = PageSnapshot::new(base_url, html.len() as u64);

    snapshot.media = page
        .media
        .iter()
        .enumerate()
        .map(|(id, raw)| {
            let record = raw.url.as_ref().and_then(|u| resources.get(u));
            let natural_size = match raw.kind {
                MediaKind::Image => record.and_then(|r| r.image_dims),
                MediaKind::Video => None,
            };
            MediaElement {
                id,
                media_kind: raw.kind,
                declared_width_css_px: raw.declared_width,
                declared_height_css_px: raw.declared_height,
                natural_size,
                encoded_bytes: record.map(|r| r.bytes),
                encoding_class: match (raw.kind, natural_size) {
                    (MediaKind::Image, Some(_)) => {
                        record.map_or(EncodingClass::Unknown, |r| r.image_encoding)
                    }
                    _ => EncodingClass::Unknown,
                },
                source_url: raw.url.clone().unwrap_or_default(),
                placeholder: false,
            }
        })
        .collect();

    snapshot.scripts = page
        .scripts
        .iter()
        .enumerate()
        .map(|(id, raw)| ScriptElement {
            id,
            source_url: raw.url.clone(),
            has_async: raw.has_async,
            has_defer: raw.has_defer,
            is_module: raw.is_module,
            encoded_bytes: raw
                .url
                .as_ref()
                .and_then(|u| resources.get(u))
                .map(|r| r.bytes),
        })
        .collect();

    let mut fonts = Vec::new();
    let mut anims = Vec::new();
    for sheet in &page.inline_sheets {
        fonts.extend(font_faces(sheet, page.base.as_ref(), &mut page.diagnostics));
        anims.extend(animations(sheet, true));
    }
    for (selector, decls) in &page.inline_transitions {
        let props = transition_properties(decls);
        if !props.is_empty() {
            anims.push(AnimationRule {
                selector: selector.clone(),
                animated_properties: props,
                mechanism: AnimationMechanism::Transition,
                neutralized: false,
            });
        }
    }
    // External sheets contribute @font-face and @keyframes only.
    for link in &page.stylesheet_links {
        let Some(text) = resources
            .get(link)
            .and_then(|r| r.stylesheet_text.as_deref())
        else {
            continue;
        };
        let sheet = css::parse_stylesheet(text);
        page.diagnostics.malformed_css += sheet.malformed;
        let sheet_base = Url::parse(link).ok();
        fonts.extend(font_faces(
            &sheet,
            sheet_base.as_ref(),
            &mut page.diagnostics,
        ));
        anims.extend(animations(&sheet, false));
    }
    for f in &mut fonts {
        f.encoded_bytes = resources.get(&f.source_url).map(|r| r.bytes);
    }
    snapshot.fonts = fonts;
    snapshot.animations = anims;
    snapshot.diagnostics = page.diagnostics;
    snapshot
}
